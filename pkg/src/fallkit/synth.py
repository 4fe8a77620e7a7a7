"""Seeded synthetic fall/ADL corpus: stick figures with exact keypoints.

Each video renders an articulated stick figure on a textured, noisy
background. Motion scripts: walking (with optional pauses), sitting down,
slow lying down, fast crouching, and falling - a fast accelerating
rotation about the feet. Slow lying ends in the same pose as a fall, so
appearance alone cannot separate the classes; the discriminating signal
is motion speed and pattern, which is what the feature extractor is
built to capture.

The generator emits its own skeleton as a BODY-25 keypoint track
(confidence 1 everywhere) and exact fall-interval annotations, giving a
corpus whose ground truth is perfect by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    NUM_JOINTS,
    FallAnnotation,
    FrameSequence,
    KeypointTrack,
    ManifestEntry,
    VideoRecord,
    save_manifest,
    write_record,
)


@dataclass(frozen=True)
class SynthCorpusSpec:
    count: int = 40
    width: int = 160
    height: int = 120
    fps: float = 30.0
    frames_min: int = 20
    frames_max: int = 28
    fall_fraction: float = 0.5
    seed: int = 0
    # subject motion parameters
    scale_range: tuple[float, float] = (0.42, 0.62)  # body height / frame height
    walk_speed: tuple[float, float] = (0.5, 1.7)  # px/frame
    fall_frames: tuple[int, int] = (7, 12)
    lie_frames: tuple[int, int] = (16, 26)
    noise_sigma: tuple[float, float] = (0.5, 2.5)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0.0 <= self.fall_fraction <= 1.0:
            raise ValueError("fall_fraction must be in [0, 1]")
        if self.frames_min < 12 or self.frames_max < self.frames_min:
            raise ValueError("need frames_max >= frames_min >= 12")


# canonical standing pose, mid-hip at the origin, y up, units of body height
_POSE = np.zeros((NUM_JOINTS, 2))
_POSE[0] = (0.00, 0.52)    # nose
_POSE[1] = (0.00, 0.40)    # neck
_POSE[2] = (-0.10, 0.38)   # R shoulder
_POSE[3] = (-0.14, 0.22)   # R elbow
_POSE[4] = (-0.16, 0.06)   # R wrist
_POSE[5] = (0.10, 0.38)    # L shoulder
_POSE[6] = (0.14, 0.22)    # L elbow
_POSE[7] = (0.16, 0.06)    # L wrist
_POSE[8] = (0.00, 0.00)    # mid hip
_POSE[9] = (-0.06, 0.00)   # R hip
_POSE[10] = (-0.065, -0.26)
_POSE[11] = (-0.07, -0.52)
_POSE[12] = (0.06, 0.00)   # L hip
_POSE[13] = (0.065, -0.26)
_POSE[14] = (0.07, -0.52)
_POSE[15] = (-0.02, 0.55)  # R eye
_POSE[16] = (0.02, 0.55)   # L eye
_POSE[17] = (-0.045, 0.53)
_POSE[18] = (0.045, 0.53)
_POSE[19] = (0.09, -0.56)   # L big toe
_POSE[20] = (0.11, -0.555)
_POSE[21] = (0.05, -0.555)  # L heel
_POSE[22] = (-0.09, -0.56)  # R big toe
_POSE[23] = (-0.11, -0.555)
_POSE[24] = (-0.05, -0.555)  # R heel

_PIVOT = np.array([0.0, -0.55])  # feet-level rotation pivot

_BONES = (
    (1, 0), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7),
    (1, 8), (8, 9), (9, 10), (10, 11), (8, 12), (12, 13), (13, 14),
    (11, 22), (22, 23), (11, 24), (14, 19), (19, 20), (14, 21),
)

_SCRIPTS_NON_FALL = ("walk", "sit", "lie", "crouch")

_RIGHT_LEG = [9, 10, 11, 22, 23, 24]
_LEFT_LEG = [12, 13, 14, 19, 20, 21]
_UPPER = [0, 1, 2, 3, 4, 5, 6, 7, 15, 16, 17, 18]


def _pose_at(gait_phase: float, gait_amp: float, crouch: float, body_angle: float) -> np.ndarray:
    """Body-frame joints after gait swing, crouch and rotation about the feet.

    Positive ``body_angle`` tips the body toward -x; the mirror factor in
    the image mapping picks the on-screen fall direction.
    """
    p = _POSE.copy()
    swing = gait_amp * math.sin(gait_phase)
    p[_RIGHT_LEG, 0] += swing * np.array([0.2, 0.5, 1, 1, 1, 1])
    p[_LEFT_LEG, 0] -= swing * np.array([0.2, 0.5, 1, 1, 1, 1])
    p[[3, 4], 0] -= 0.7 * swing
    p[[6, 7], 0] += 0.7 * swing
    if crouch > 0:
        drop = 0.30 * crouch
        p[_UPPER, 1] -= drop
        p[[8, 9, 12], 1] -= drop
        p[[10, 13], 1] -= 0.45 * drop
        p[[10, 13], 0] += np.array([-0.10, 0.10]) * crouch  # knees bend out
    if body_angle != 0.0:
        c, s = math.cos(body_angle), math.sin(body_angle)
        rel = p - _PIVOT
        p = _PIVOT + np.column_stack([rel[:, 0] * c - rel[:, 1] * s, rel[:, 0] * s + rel[:, 1] * c])
    return p


def _to_image(p: np.ndarray, cx: float, ground_y: float, scale: float, mirror: int) -> np.ndarray:
    out = np.empty_like(p)
    out[:, 0] = cx + mirror * scale * p[:, 0]
    out[:, 1] = ground_y - scale * (p[:, 1] - _PIVOT[1])
    return out


def _paint_points(img: np.ndarray, pts: np.ndarray, radius: int, value: float):
    if len(pts) == 0:
        return
    h, w = img.shape
    xx = np.clip(np.round(pts[:, 0]).astype(int), 0, w - 1)
    yy = np.clip(np.round(pts[:, 1]).astype(int), 0, h - 1)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            img[np.clip(yy + dy, 0, h - 1), np.clip(xx + dx, 0, w - 1)] = value


def _stroke(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    dist = float(np.hypot(*(p1 - p0)))
    n = max(2, int(math.ceil(2 * dist)))
    t = np.linspace(0.0, 1.0, n)[:, None]
    return p0 + t * (p1 - p0)


def _disc_points(center, radius: float) -> np.ndarray:
    r = int(math.ceil(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    mask = ys**2 + xs**2 <= radius**2
    return np.column_stack([center[0] + xs[mask], center[1] + ys[mask]])


def _background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    base = rng.uniform(25.0, 70.0)
    coarse = rng.uniform(-22.0, 22.0, size=(6, 8))
    tex = np.kron(coarse, np.ones((height // 6 + 1, width // 8 + 1)))[:height, :width]
    bg = base + tex
    for _ in range(int(rng.integers(0, 2))):  # optional static furniture block
        bw = int(rng.integers(width // 8, width // 3))
        bh = int(rng.integers(height // 8, height // 3))
        x0 = int(rng.integers(0, width - bw))
        y0 = int(rng.integers(0, height - bh))
        bg[y0 : y0 + bh, x0 : x0 + bw] = rng.uniform(15.0, 110.0)
    return bg


def _make_video(spec: SynthCorpusSpec, index: int, script: str) -> VideoRecord:
    rng = np.random.default_rng([spec.seed, index])
    width, height = spec.width, spec.height
    n_frames = int(rng.integers(spec.frames_min, spec.frames_max + 1))
    scale = float(rng.uniform(*spec.scale_range)) * height
    ground_y = float(rng.uniform(0.84, 0.94)) * height
    margin = 0.30 * scale + 2
    cx = float(rng.uniform(margin, width - margin))
    speed = float(rng.uniform(*spec.walk_speed)) * (1 if rng.random() < 0.5 else -1)
    facing = 1 if speed >= 0 else -1
    omega = float(rng.uniform(0.35, 0.75))
    gait_amp = float(rng.uniform(0.05, 0.10))
    subject_val = float(rng.uniform(150.0, 235.0))
    sigma = float(rng.uniform(*spec.noise_sigma))
    stroke_radius = max(2, round(0.035 * scale))
    wobble = float(rng.uniform(0.01, 0.03))

    if script == "fall":
        duration = int(rng.integers(spec.fall_frames[0], spec.fall_frames[1] + 1))
    elif script == "lie":
        duration = int(rng.integers(spec.lie_frames[0], spec.lie_frames[1] + 1))
    elif script in ("sit", "crouch"):
        duration = int(rng.integers(5, 9))
    else:
        duration = 0
    t_latest = max(4, n_frames - duration - 4)
    t_action = int(rng.integers(4, t_latest + 1)) if script != "walk" else n_frames
    pause = rng.random() < 0.4
    pause_at = int(rng.integers(2, max(3, n_frames - 6))) if pause else -1

    bg = _background(rng, width, height)
    n_blobs = int(rng.integers(0, 3))
    blob_pos = rng.uniform([4, 4], [width - 5, height - 5], size=(n_blobs, 2))
    blob_vel = rng.uniform(-1.6, 1.6, size=(n_blobs, 2))
    blob_val = rng.uniform(10.0, 245.0, size=n_blobs)
    blob_r = rng.integers(2, 5, size=n_blobs)

    frames = np.empty((n_frames, height, width), dtype=np.uint8)
    joints = np.zeros((n_frames, NUM_JOINTS, 3), dtype=np.float32)
    x_now = cx
    rot = 0.0
    crouch = 0.0
    tip_dir = 0  # on-screen fall direction, fixed at action start
    for t in range(n_frames):
        in_action = script != "walk" and t >= t_action
        u = min(1.0, (t - t_action + 1) / duration) if in_action and duration else 0.0
        if script in ("fall", "lie") and in_action:
            if tip_dir == 0:
                reach = 1.2 * scale  # head sweep when fully down
                tip_dir = facing if 2 < x_now + facing * reach < width - 2 else -facing
            rot = (math.pi / 2) * (u**1.5 if script == "fall" else u)
        elif script in ("sit", "crouch") and in_action:
            crouch = math.sin(math.pi * u) if script == "crouch" else min(1.0, 1.4 * u)
        moving = (script == "walk" or t < t_action) and not (
            pause and pause_at <= t < pause_at + 6
        )
        if moving:
            x_now = min(max(x_now + speed, margin), width - margin)
        settled = rot >= math.pi / 2 - 1e-9
        show_rot = rot + (wobble * math.sin(1.1 * t) if settled else 0.0)
        # positive body angle tips toward -x in body frame; mirror maps it on-screen
        body_angle = show_rot if tip_dir == 0 else show_rot * (-tip_dir * facing)
        p = _pose_at(omega * t if moving else omega * t_action, gait_amp, crouch, body_angle)
        img_pts = _to_image(p, x_now, ground_y, scale, facing)

        canvas = bg + rng.normal(0.0, sigma, size=bg.shape)
        for k in range(n_blobs):
            pos = blob_pos[k] + t * blob_vel[k]
            pos = np.array([4 + (pos[0] - 4) % (width - 9), 4 + (pos[1] - 4) % (height - 9)])
            _paint_points(canvas, _disc_points(pos, float(blob_r[k])), 0, blob_val[k])
        pts = [_stroke(img_pts[a], img_pts[b]) for a, b in _BONES]
        head_center = img_pts[0] + 0.55 * (img_pts[0] - img_pts[1])
        pts.append(_disc_points(head_center, 0.10 * scale))
        _paint_points(canvas, np.vstack(pts), stroke_radius, subject_val)
        frames[t] = np.clip(canvas, 0, 255).astype(np.uint8)

        joints[t, :, 0] = np.clip(img_pts[:, 0], 0, width - 1)
        joints[t, :, 1] = np.clip(img_pts[:, 1], 0, height - 1)
        joints[t, :, 2] = 1.0

    if script == "fall":
        # annotate from where the accelerating rotation is visibly under way
        # (as a human annotator would), not from the near-still first frames
        onset = t_action + max(0, math.ceil(0.1 * duration) - 1)
        annotation = FallAnnotation(onset, min(n_frames - 1, t_action + duration - 1))
    else:
        annotation = FallAnnotation()
    return VideoRecord(
        frames=FrameSequence(frames, fps=spec.fps, id=f"synth_{index:04d}"),
        keypoints=KeypointTrack(joints),
        annotation=annotation,
    )


def generate_synth_records(spec: SynthCorpusSpec) -> list[VideoRecord]:
    """All corpus videos, deterministically derived from the spec seed."""
    n_fall = round(spec.count * spec.fall_fraction)
    records = []
    for i in range(spec.count):
        if i < n_fall:
            script = "fall"
        else:
            script = _SCRIPTS_NON_FALL[(i - n_fall) % len(_SCRIPTS_NON_FALL)]
        records.append(_make_video(spec, i, script))
    return records


def generate_synth_corpus(spec: SynthCorpusSpec, out_root) -> tuple[Path, list[ManifestEntry]]:
    """Write the corpus to disk in the standard layout; returns the
    manifest path and entries."""
    out_root = Path(out_root)
    entries = [write_record(out_root, record) for record in generate_synth_records(spec)]
    manifest = out_root / "manifest.tsv"
    save_manifest(entries, manifest)
    return manifest, entries
