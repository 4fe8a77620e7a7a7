"""Data model and ingestion for fall-detection video corpora.

A corpus lives on disk as a tab-separated manifest plus, per video, a
directory of binary PGM (P5) frames and optionally a directory of
pose-estimator JSON files (one per frame, BODY-25 layout: a top-level
``people`` array whose entries carry a flat 75-number
``pose_keypoints_2d`` list).

Manifest columns, one video per line::

    id  frames_dir  keypoints_dir|-  fall_start|-  fall_end|-  origin  parent_id|-

Relative paths are resolved against the manifest's own directory so a
corpus can be moved as a unit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Provenance tags for a video record.
ORIGIN_NORMAL = "normal"
ORIGIN_DYNAMIC = "dynamic_occluded"
ORIGIN_CONSTANT = "constant_occluded"
ORIGIN_REALISTIC = "realistic_occluded"
ORIGINS = (ORIGIN_NORMAL, ORIGIN_DYNAMIC, ORIGIN_CONSTANT, ORIGIN_REALISTIC)

#: Joints with confidence at or below this are treated as undetected
#: everywhere downstream (pose estimators emit near-zero junk coordinates).
KEYPOINT_CONF_MIN = 0.1

#: Number of joints in the BODY-25 skeleton layout.
NUM_JOINTS = 25


class CorpusError(Exception):
    """Malformed corpus input: manifest, frame files or keypoint files."""


@dataclass
class FrameSequence:
    """Ordered grayscale frames of one video.

    ``frames`` is a (T, H, W) uint8 array; a video must hold at least one
    4-frame feature window.
    """

    frames: np.ndarray
    fps: float
    id: str

    def __post_init__(self):
        if self.frames.ndim != 3:
            raise ValueError("frames must be a (T, H, W) array")
        if self.frames.dtype != np.uint8:
            raise ValueError("frames must be 8-bit grayscale")
        if len(self.frames) < 4:
            raise ValueError(f"video {self.id!r} has {len(self.frames)} frames, need >= 4")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    def __len__(self):
        return len(self.frames)

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return self.frames.shape[2], self.frames.shape[1]


@dataclass
class KeypointTrack:
    """Per-frame BODY-25 joints, a (T, 25, 3) array of (x, y, confidence).

    Confidence 0 marks an undetected joint; its coordinates are ignored.
    """

    joints: np.ndarray

    def __post_init__(self):
        if self.joints.ndim != 3 or self.joints.shape[1:] != (NUM_JOINTS, 3):
            raise ValueError("keypoint track must have shape (T, 25, 3)")

    def __len__(self):
        return len(self.joints)

    def visible(self, frame: int, joint_ids) -> np.ndarray:
        """(x, y) rows of the given joints detected in ``frame``."""
        pts = self.joints[frame]
        sel = pts[list(joint_ids)]
        return sel[sel[:, 2] > KEYPOINT_CONF_MIN, :2]


@dataclass(frozen=True)
class FallAnnotation:
    """Inclusive frame interval of the fall, or absent for ADL-only videos."""

    fall_start: int | None = None
    fall_end: int | None = None

    def __post_init__(self):
        if (self.fall_start is None) != (self.fall_end is None):
            raise ValueError("fall_start and fall_end must both be present or both absent")
        if self.fall_start is not None:
            if self.fall_start < 0 or self.fall_start > self.fall_end:
                raise ValueError("need 0 <= fall_start <= fall_end")

    @property
    def has_fall(self) -> bool:
        return self.fall_start is not None


@dataclass
class VideoRecord:
    """A fully loaded video: frames, keypoints, annotation and provenance."""

    frames: FrameSequence
    keypoints: KeypointTrack | None
    annotation: FallAnnotation
    origin: str = ORIGIN_NORMAL
    parent_id: str | None = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if (self.origin == ORIGIN_NORMAL) != (self.parent_id is None):
            raise ValueError("normal records have no parent; occluded records need one")
        if self.keypoints is not None and len(self.keypoints) != len(self.frames):
            raise CorpusError(
                f"video {self.id!r}: {len(self.keypoints)} keypoint frames "
                f"for {len(self.frames)} video frames"
            )
        if self.annotation.has_fall and self.annotation.fall_end >= len(self.frames):
            raise ValueError("fall annotation exceeds sequence bounds")

    @property
    def id(self) -> str:
        return self.frames.id


@dataclass
class ManifestEntry:
    """One manifest line; a lazy descriptor (frames not yet decoded)."""

    video_id: str
    frames_dir: Path
    keypoints_dir: Path | None
    fall_start: int | None
    fall_end: int | None
    origin: str
    parent_id: str | None

    @property
    def annotation(self) -> FallAnnotation:
        return FallAnnotation(self.fall_start, self.fall_end)


def frame_labels(annotation: FallAnnotation, length: int) -> np.ndarray:
    """Boolean per-frame fall labels: True inside [fall_start, fall_end]."""
    if length < 1:
        raise ValueError("length must be positive")
    labels = np.zeros(length, dtype=bool)
    if annotation.has_fall:
        if annotation.fall_end >= length:
            raise ValueError("annotation indices out of bounds")
        labels[annotation.fall_start : annotation.fall_end + 1] = True
    return labels


# ---------------------------------------------------------------------------
# PGM frames

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    m = _PGM_TOKEN.match(buf, pos)
    if not m:
        raise CorpusError("truncated PGM header")
    return m.group(1), m.end()


def read_pgm(path) -> np.ndarray:
    """Decode a binary (P5) PGM file into an (H, W) uint8 array."""
    buf = Path(path).read_bytes()
    magic, pos = _pgm_read_token(buf, 0)
    if magic != b"P5":
        raise CorpusError(f"{path}: not a binary PGM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _pgm_read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise CorpusError(f"{path}: bad PGM header field {tok!r}") from None
    width, height, maxval = fields
    if not (0 < maxval <= 255):
        raise CorpusError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    data = buf[pos : pos + width * height]
    if len(data) != width * height:
        raise CorpusError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, image: np.ndarray):
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + image.tobytes())


def frame_filename(index: int) -> str:
    """1-based, zero-padded frame file name."""
    return f"frame_{index:06d}.pgm"


def load_frames(frames_dir, video_id: str, fps: float = 30.0) -> FrameSequence:
    """Load every .pgm in the directory, in name order."""
    frames_dir = Path(frames_dir)
    paths = sorted(frames_dir.glob("*.pgm"))
    if not paths:
        raise CorpusError(f"no PGM frames in {frames_dir}")
    images = [read_pgm(p) for p in paths]
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise CorpusError(f"{frames_dir}: frames differ in size: {sorted(shapes)}")
    return FrameSequence(np.stack(images), fps=fps, id=video_id)


def write_frames(frames_dir, frames: np.ndarray):
    frames_dir = Path(frames_dir)
    frames_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_pgm(frames_dir / frame_filename(i + 1), frame)


def luma(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) RGB array to 8-bit grayscale (Rec.601 luma)."""
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.round(y), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Keypoints

def _parse_keypoint_file(path) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: unparseable keypoint file: {exc}") from None
    people = doc.get("people", [])
    if not people:
        return np.zeros((NUM_JOINTS, 3), dtype=np.float32)
    best = None
    best_conf = -1.0
    for person in people:
        flat = person.get("pose_keypoints_2d")
        if flat is None or len(flat) != NUM_JOINTS * 3:
            raise CorpusError(f"{path}: expected {NUM_JOINTS * 3} pose values")
        pts = np.asarray(flat, dtype=np.float32).reshape(NUM_JOINTS, 3)
        conf = float(pts[:, 2].sum())
        if conf > best_conf:  # ties keep the first person listed
            best, best_conf = pts, conf
    return best


def load_keypoints(keypoints_dir, frame_count: int) -> KeypointTrack:
    """Load one keypoint file per frame; multi-person frames resolve to the
    person with the highest summed confidence."""
    keypoints_dir = Path(keypoints_dir)
    paths = sorted(keypoints_dir.glob("*.json"))
    if len(paths) != frame_count:
        raise CorpusError(
            f"{keypoints_dir}: {len(paths)} keypoint files for {frame_count} frames"
        )
    return KeypointTrack(np.stack([_parse_keypoint_file(p) for p in paths]))


def write_keypoints(keypoints_dir, track: KeypointTrack):
    keypoints_dir = Path(keypoints_dir)
    keypoints_dir.mkdir(parents=True, exist_ok=True)
    for i, pts in enumerate(track.joints):
        doc = {"people": [{"pose_keypoints_2d": [round(float(v), 4) for v in pts.ravel()]}]}
        (keypoints_dir / f"frame_{i + 1:06d}_keypoints.json").write_text(json.dumps(doc))


# ---------------------------------------------------------------------------
# Manifest

def _opt(value: str) -> str | None:
    return None if value == "-" else value


def load_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest into lazy descriptors and validate parent references."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest not found: {path}")
    root = path.parent
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise CorpusError(f"{path}:{lineno}: expected 7 tab-separated fields, got {len(parts)}")
        vid, frames_dir, kp_dir, start, end, origin, parent = parts
        if origin not in ORIGINS:
            raise CorpusError(f"{path}:{lineno}: unknown origin {origin!r}")
        try:
            fall_start = None if start == "-" else int(start)
            fall_end = None if end == "-" else int(end)
        except ValueError:
            raise CorpusError(f"{path}:{lineno}: bad fall interval {start!r}..{end!r}") from None
        if (fall_start is None) != (fall_end is None):
            raise CorpusError(f"{path}:{lineno}: fall_start/fall_end must come together")
        parent_id = _opt(parent)
        if (origin == ORIGIN_NORMAL) != (parent_id is None):
            raise CorpusError(f"{path}:{lineno}: origin {origin!r} inconsistent with parent {parent!r}")
        entries.append(
            ManifestEntry(
                video_id=vid,
                frames_dir=root / frames_dir,
                keypoints_dir=None if kp_dir == "-" else root / kp_dir,
                fall_start=fall_start,
                fall_end=fall_end,
                origin=origin,
                parent_id=parent_id,
            )
        )
    ids = {e.video_id for e in entries}
    if len(ids) != len(entries):
        raise CorpusError(f"{path}: duplicate video ids")
    for e in entries:
        if e.parent_id is not None and e.parent_id not in ids:
            raise CorpusError(f"{path}: {e.video_id} references missing parent {e.parent_id!r}")
    return entries


def _manifest_line(entry: ManifestEntry, root: Path) -> str:
    def rel(p):
        try:
            return Path(p).relative_to(root).as_posix()
        except ValueError:
            return Path(p).as_posix()

    fields = [
        entry.video_id,
        rel(entry.frames_dir),
        rel(entry.keypoints_dir) if entry.keypoints_dir else "-",
        "-" if entry.fall_start is None else str(entry.fall_start),
        "-" if entry.fall_end is None else str(entry.fall_end),
        entry.origin,
        entry.parent_id or "-",
    ]
    return "\t".join(fields)


def save_manifest(entries, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent
    path.write_text("".join(_manifest_line(e, root) + "\n" for e in entries))


def append_manifest(entries, path):
    path = Path(path)
    root = path.parent
    with path.open("a") as fh:
        for e in entries:
            fh.write(_manifest_line(e, root) + "\n")


def load_record(entry: ManifestEntry, fps: float = 30.0) -> VideoRecord:
    """Materialize a descriptor: decode frames and keypoints."""
    frames = load_frames(entry.frames_dir, entry.video_id, fps=fps)
    keypoints = None
    if entry.keypoints_dir is not None:
        keypoints = load_keypoints(entry.keypoints_dir, len(frames))
    return VideoRecord(
        frames=frames,
        keypoints=keypoints,
        annotation=entry.annotation,
        origin=entry.origin,
        parent_id=entry.parent_id,
    )


def write_record(root, record: VideoRecord) -> ManifestEntry:
    """Write a record's frames/keypoints under ``root`` and describe it.

    Layout: ``root/videos/<id>/`` and ``root/keypoints/<id>/``. The caller
    appends the returned entry to a manifest in ``root``.
    """
    root = Path(root)
    frames_dir = root / "videos" / record.id
    write_frames(frames_dir, record.frames.frames)
    kp_dir = None
    if record.keypoints is not None:
        kp_dir = root / "keypoints" / record.id
        write_keypoints(kp_dir, record.keypoints)
    return ManifestEntry(
        video_id=record.id,
        frames_dir=frames_dir,
        keypoints_dir=kp_dir,
        fall_start=record.annotation.fall_start,
        fall_end=record.annotation.fall_end,
        origin=record.origin,
        parent_id=record.parent_id,
    )
