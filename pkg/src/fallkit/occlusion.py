"""Synthetic occluders for data augmentation.

A dynamic occluder is a filled rectangle anchored to a subset of skeleton
joints: per frame it is the padded bounding box of the subset's visible
joints, so it tracks the subject. Ten presets cover the standard body
parts; applying all of them turns one normal video into ten occluded
variants. A constant occluder is the static-rectangle ablation baseline:
random size and position, identical in every frame.

Occluder fill is a single random gray level per generated video (the
rectangle persists through the whole video, so its color does too), and
rectangles hold their last position when pose detection drops out.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace

import numpy as np

from .corpus import (
    KEYPOINT_CONF_MIN,
    NUM_JOINTS,
    ORIGIN_CONSTANT,
    ORIGIN_DYNAMIC,
    ORIGIN_NORMAL,
    FrameSequence,
    KeypointTrack,
    VideoRecord,
)

#: Default occluder rectangle padding: 5% of the image diagonal.
PADDING_DIAGONAL_FRACTION = 0.05
#: Minimum occluder side length in pixels.
DEFAULT_MIN_SIDE = 8

#: Constant-occlusion side lengths are drawn from this fraction range of
#: the image width/height.
CONSTANT_SIDE_RANGE = (0.15, 0.35)


@dataclass(frozen=True)
class OccluderPreset:
    """A named body-part occluder: BODY-25 joint subset plus geometry."""

    name: str
    joints: frozenset[int]
    padding: int | None = None  # None: resolve from image diagonal
    min_side: int = DEFAULT_MIN_SIDE

    def __post_init__(self):
        if not self.joints:
            raise ValueError("preset needs at least one joint")
        if any(j < 0 or j >= NUM_JOINTS for j in self.joints):
            raise ValueError("joint indices must be in 0..24")
        if self.padding is not None and self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.min_side < 1:
            raise ValueError("min_side must be >= 1")


def _preset(name, joints):
    return OccluderPreset(name=name, joints=frozenset(joints))


#: The ten body-part occluders, in their fixed generation order.
PRESETS: tuple[OccluderPreset, ...] = (
    _preset("both-legs", {9, 10, 11, 12, 13, 14, 19, 20, 21, 22, 23, 24}),
    _preset("head-neck", {0, 1, 15, 16, 17, 18}),
    _preset("torso-and-both-hands", {1, 2, 3, 4, 5, 6, 7, 8, 9, 12}),
    _preset("torso", {1, 2, 5, 8, 9, 12}),
    _preset("right-arm", {2, 3, 4}),
    _preset("left-arm", {5, 6, 7}),
    _preset("right-leg", {9, 10, 11, 22, 23, 24}),
    _preset("left-leg", {12, 13, 14, 19, 20, 21}),
    _preset("right-side", {0, 1, 2, 3, 4, 8, 9, 10, 11, 15, 17, 22, 23, 24}),
    _preset("left-side", {0, 1, 5, 6, 7, 8, 12, 13, 14, 16, 18, 19, 20, 21}),
)

_PRESET_INDEX = {p.name: i for i, p in enumerate(PRESETS)}

Rect = tuple[int, int, int, int]  # (x0, y0, x1, y1), inclusive pixel bounds


@dataclass
class OccluderTrack:
    """Per-frame occluder rectangle (or None before first sighting) + fill."""

    rects: list[Rect | None]
    fill: int

    def __post_init__(self):
        if not 0 <= self.fill <= 255:
            raise ValueError("fill must be an 8-bit gray level")


class OcclusionSkipped(Exception):
    """No preset joint was ever visible; the variant cannot be generated."""

    def __init__(self, video_id: str, preset_name: str):
        self.video_id = video_id
        self.preset_name = preset_name
        super().__init__(f"{video_id}: no {preset_name!r} joint ever visible")


def default_padding(width: int, height: int) -> int:
    return round(PADDING_DIAGONAL_FRACTION * math.hypot(width, height))


def occluder_rect(
    track: KeypointTrack,
    preset: OccluderPreset,
    frame: int,
    last_rect: Rect | None,
    width: int,
    height: int,
    padding: int | None = None,
) -> Rect | None:
    """Rectangle covering the preset's visible joints in one frame.

    Bounding box of joints with confidence above the detection threshold,
    expanded by ``padding`` on every side and grown (centered) so each side
    reaches the preset's minimum; clamped to the image. Falls back to
    ``last_rect`` when no preset joint is visible.
    """
    pts = track.visible(frame, sorted(preset.joints))
    if len(pts) == 0:
        return last_rect
    if padding is None:
        padding = preset.padding if preset.padding is not None else default_padding(width, height)
    x0 = math.floor(pts[:, 0].min()) - padding
    x1 = math.ceil(pts[:, 0].max()) + padding
    y0 = math.floor(pts[:, 1].min()) - padding
    y1 = math.ceil(pts[:, 1].max()) + padding
    x0, x1 = _grow_to(x0, x1, preset.min_side)
    y0, y1 = _grow_to(y0, y1, preset.min_side)
    x0 = max(x0, 0)
    y0 = max(y0, 0)
    x1 = min(x1, width - 1)
    y1 = min(y1, height - 1)
    if x1 < x0 or y1 < y0:  # joint tracked outside the image
        return last_rect
    return (x0, y0, x1, y1)


def _grow_to(lo: int, hi: int, side: int) -> tuple[int, int]:
    deficit = side - (hi - lo)
    if deficit > 0:
        lo -= deficit // 2
        hi += deficit - deficit // 2
    return lo, hi


def build_occluder_track(
    keypoints: KeypointTrack,
    preset: OccluderPreset,
    width: int,
    height: int,
    fill: int,
    padding: int | None = None,
) -> OccluderTrack:
    """Hold-last rectangle track across all frames."""
    rects: list[Rect | None] = []
    last: Rect | None = None
    for frame in range(len(keypoints)):
        last = occluder_rect(keypoints, preset, frame, last, width, height, padding)
        rects.append(last)
    return OccluderTrack(rects=rects, fill=fill)


def _video_rng(seed: int, video_id: str, *extra: int) -> np.random.Generator:
    # crc32 keeps per-video streams stable across processes/platforms
    return np.random.default_rng([seed, zlib.crc32(video_id.encode()), *extra])


def _paint(frames: np.ndarray, track: OccluderTrack) -> np.ndarray:
    out = frames.copy()
    for t, rect in enumerate(track.rects):
        if rect is not None:
            x0, y0, x1, y1 = rect
            out[t, y0 : y1 + 1, x0 : x1 + 1] = track.fill
    return out


def _child(video: VideoRecord, frames: np.ndarray, child_id: str, origin: str) -> VideoRecord:
    return VideoRecord(
        frames=FrameSequence(frames, fps=video.frames.fps, id=child_id),
        keypoints=None if video.keypoints is None else KeypointTrack(video.keypoints.joints.copy()),
        annotation=video.annotation,
        origin=origin,
        parent_id=video.id,
    )


def apply_dynamic_occlusion(
    video: VideoRecord,
    preset: OccluderPreset,
    seed: int,
    padding: int | None = None,
) -> VideoRecord:
    """One joint-anchored occluded variant of a normal video.

    The rectangle tracks the preset joints frame by frame and is filled
    with one seed-derived gray level. Raises :class:`OcclusionSkipped`
    when no preset joint is ever visible.
    """
    if video.origin != ORIGIN_NORMAL:
        raise ValueError(f"can only occlude normal videos, got origin {video.origin!r}")
    if video.keypoints is None:
        raise ValueError(f"video {video.id!r} has no keypoints")
    width, height = video.frames.size
    rng = _video_rng(seed, video.id, _PRESET_INDEX.get(preset.name, 99))
    fill = int(rng.integers(0, 256))
    track = build_occluder_track(video.keypoints, preset, width, height, fill, padding)
    if all(r is None for r in track.rects):
        raise OcclusionSkipped(video.id, preset.name)
    frames = _paint(video.frames.frames, track)
    return _child(video, frames, f"{video.id}__dyn-{preset.name}", ORIGIN_DYNAMIC)


def augment_video(
    video: VideoRecord,
    seed: int,
    padding: int | None = None,
    presets: tuple[OccluderPreset, ...] = PRESETS,
) -> tuple[list[VideoRecord], list[str]]:
    """All body-part occluded variants of one video, in preset order.

    Returns (variants, skipped preset names). Presets whose joints never
    appear are skipped and reported; a video yielding no variant at all is
    an error.
    """
    out: list[VideoRecord] = []
    skipped: list[str] = []
    for preset in presets:
        try:
            out.append(apply_dynamic_occlusion(video, preset, seed, padding))
        except OcclusionSkipped:
            skipped.append(preset.name)
    if not out:
        raise OcclusionSkipped(video.id, "all presets")
    return out, skipped


def apply_constant_occlusion(video: VideoRecord, seed: int, variant: int = 0) -> VideoRecord:
    """Static random-rectangle variant (ablation baseline).

    Size is drawn uniformly from the configured fraction range of the
    image dimensions, position uniformly such that the rectangle fits;
    identical in all frames.
    """
    if video.origin != ORIGIN_NORMAL:
        raise ValueError(f"can only occlude normal videos, got origin {video.origin!r}")
    width, height = video.frames.size
    rng = _video_rng(seed, video.id, 1000 + variant)
    lo, hi = CONSTANT_SIDE_RANGE
    w = max(1, round(float(rng.uniform(lo, hi)) * width))
    h = max(1, round(float(rng.uniform(lo, hi)) * height))
    x0 = int(rng.integers(0, width - w + 1))
    y0 = int(rng.integers(0, height - h + 1))
    fill = int(rng.integers(0, 256))
    track = OccluderTrack(rects=[(x0, y0, x0 + w - 1, y0 + h - 1)] * len(video.frames), fill=fill)
    frames = _paint(video.frames.frames, track)
    return _child(video, frames, f"{video.id}__const-{variant:02d}", ORIGIN_CONSTANT)


def constant_variants(video: VideoRecord, seed: int, count: int = len(PRESETS)) -> list[VideoRecord]:
    """``count`` static variants, matching the dynamic preset count for a
    fair ablation."""
    return [apply_constant_occlusion(video, seed, variant=k) for k in range(count)]
