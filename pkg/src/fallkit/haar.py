"""Dynamic Haar features over 4-frame windows.

Six channels are built per window: appearance ``A`` (the first frame),
motion magnitude ``M`` (mean absolute inter-frame difference over the
three frame pairs) and four direction-tuned channels ``U``/``D``/``L``/
``R``. A directional channel compares each frame against the next frame
re-aligned one pixel against motion in that direction, minus the static
re-alignment residual of the frame against itself: it goes quiet where
the scene moves its way and is exactly zero on a static scene, whatever
the texture. Shifts replicate edge pixels to avoid spurious border
energy, and all five motion channels are invariant to global intensity
offsets.

Rectangle filters are evaluated on integral images. Every filter reduces
to a handful of integral-table lookups with integer coefficients, so a
whole bank is precompiled into (index, coefficient) arrays and evaluated
with one gather per window.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHANNELS = ("A", "M", "U", "D", "L", "R")
SHIFT_CHANNELS = ("U", "D", "L", "R")

KIND_SINGLE = "single_rect_sum"
KIND_TWO_H = "two_rect_h"
KIND_TWO_V = "two_rect_v"
KIND_THREE_H = "three_rect_h"
KIND_THREE_V = "three_rect_v"
KIND_FOUR = "four_rect"
KIND_MOTION = "motion_direction"
KINDS = (KIND_SINGLE, KIND_TWO_H, KIND_TWO_V, KIND_THREE_H, KIND_THREE_V, KIND_FOUR, KIND_MOTION)

# how the overall rect divides into equal sub-rectangles (x-wise, y-wise)
_KIND_GRID = {
    KIND_SINGLE: (1, 1),
    KIND_TWO_H: (2, 1),
    KIND_TWO_V: (1, 2),
    KIND_THREE_H: (3, 1),
    KIND_THREE_V: (1, 3),
    KIND_FOUR: (2, 2),
    KIND_MOTION: (1, 1),
}

DEFAULT_WORK_SIZE = (64, 48)  # (width, height)
DEFAULT_POS_STEP = 4
DEFAULT_SCALES = (8, 16, 32)


# ---------------------------------------------------------------------------
# Channels

def _shift(img: np.ndarray, direction: str) -> np.ndarray:
    """Re-align ``img`` one pixel against motion in ``direction``.

    Content that moved one pixel that way between consecutive frames lines
    up with the previous frame again; edges replicate.
    """
    out = np.empty_like(img)
    if direction == "U":
        out[1:] = img[:-1]
        out[0] = img[0]
    elif direction == "D":
        out[:-1] = img[1:]
        out[-1] = img[-1]
    elif direction == "L":
        out[:, 1:] = img[:, :-1]
        out[:, 0] = img[:, 0]
    elif direction == "R":
        out[:, :-1] = img[:, 1:]
        out[:, -1] = img[:, -1]
    else:
        raise ValueError(f"unknown shift direction {direction!r}")
    return out


def build_channels(window: np.ndarray) -> dict[str, np.ndarray]:
    """Six float32 channels from a 4-frame window.

    Motion channels average the three frame pairs, keeping magnitudes
    independent of window length. Directional channels subtract the static
    shift residual (|shift(f) - f| of the earlier frame) so identical
    frames produce exactly zero, and clamp at zero to stay non-negative.
    """
    window = np.asarray(window)
    if window.ndim != 3 or window.shape[0] != 4:
        raise ValueError("window must be 4 frames of equal size")
    f = window.astype(np.float32)
    channels = {"A": f[0].copy()}
    channels["M"] = (np.abs(f[1] - f[0]) + np.abs(f[2] - f[1]) + np.abs(f[3] - f[2])) / 3.0
    for d in SHIFT_CHANNELS:
        acc = np.zeros_like(f[0])
        for i in range(3):
            moved = np.abs(_shift(f[i + 1], d) - f[i])
            baseline = np.abs(_shift(f[i], d) - f[i])
            acc += np.maximum(moved - baseline, 0.0)
        channels[d] = acc / 3.0
    return channels


# ---------------------------------------------------------------------------
# Integral images

def integral(channel: np.ndarray) -> np.ndarray:
    """(H+1, W+1) cumulative-sum table; integer inputs stay exact (int64)."""
    channel = np.asarray(channel)
    dtype = np.int64 if np.issubdtype(channel.dtype, np.integer) else np.float64
    ii = np.zeros((channel.shape[0] + 1, channel.shape[1] + 1), dtype=dtype)
    np.cumsum(channel, axis=0, dtype=dtype, out=ii[1:, 1:])
    ii[1:, 1:] = np.cumsum(ii[1:, 1:], axis=1)
    return ii


def rect_sum(ii: np.ndarray, rect) -> float:
    """Sum of the (x, y, w, h) rectangle via four table lookups."""
    x, y, w, h = rect
    height, width = ii.shape[0] - 1, ii.shape[1] - 1
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > width or y + h > height:
        raise ValueError(f"rect {rect} outside {width}x{height} image")
    return ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x]


# ---------------------------------------------------------------------------
# Filters

@dataclass(frozen=True)
class FilterSpec:
    """One Haar filter: channel, layout kind and overall rectangle.

    ``(x, y, w, h)`` is the full extent; the kind divides it into equal
    sub-rectangles. For ``motion_direction`` the channel names the shift
    channel S and the response is sum(M, rect) - sum(S, rect).
    """

    channel: str
    kind: str
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.kind not in _KIND_GRID:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == KIND_MOTION and self.channel not in SHIFT_CHANNELS:
            raise ValueError("motion_direction pairs M with a shift channel (U/D/L/R)")
        gx, gy = _KIND_GRID[self.kind]
        if self.w < gx or self.h < gy or self.w % gx or self.h % gy:
            raise ValueError(f"{self.kind} needs w divisible by {gx} and h by {gy}")
        if self.x < 0 or self.y < 0:
            raise ValueError("negative filter position")

    def cells(self) -> list[tuple[int, int, int, int, int]]:
        """(x, y, w, h, sign) sub-rectangles on the filter's own channel."""
        gx, gy = _KIND_GRID[self.kind]
        cw, ch = self.w // gx, self.h // gy
        if self.kind == KIND_SINGLE or self.kind == KIND_MOTION:
            return [(self.x, self.y, self.w, self.h, +1)]
        if self.kind == KIND_TWO_H:
            return [(self.x, self.y, cw, ch, +1), (self.x + cw, self.y, cw, ch, -1)]
        if self.kind == KIND_TWO_V:
            return [(self.x, self.y, cw, ch, +1), (self.x, self.y + ch, cw, ch, -1)]
        if self.kind == KIND_THREE_H:
            return [
                (self.x, self.y, cw, ch, -1),
                (self.x + cw, self.y, cw, ch, +1),
                (self.x + 2 * cw, self.y, cw, ch, -1),
            ]
        if self.kind == KIND_THREE_V:
            return [
                (self.x, self.y, cw, ch, -1),
                (self.x, self.y + ch, cw, ch, +1),
                (self.x, self.y + 2 * ch, cw, ch, -1),
            ]
        # four_rect: diagonal pairs
        return [
            (self.x, self.y, cw, ch, +1),
            (self.x + cw, self.y, cw, ch, -1),
            (self.x, self.y + ch, cw, ch, -1),
            (self.x + cw, self.y + ch, cw, ch, +1),
        ]

    def to_line(self) -> str:
        return f"{self.channel} {self.kind} {self.x} {self.y} {self.w} {self.h}"

    @classmethod
    def from_line(cls, line: str) -> "FilterSpec":
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"bad filter line: {line!r}")
        return cls(parts[0], parts[1], *(int(v) for v in parts[2:]))


def evaluate_filter(spec: FilterSpec, channels: dict[str, np.ndarray]) -> float:
    """Reference single-filter evaluation straight from channel images."""
    def plain_sum(channel, x, y, w, h):
        return float(channels[channel][y : y + h, x : x + w].sum(dtype=np.float64))

    if spec.kind == KIND_MOTION:
        return plain_sum("M", spec.x, spec.y, spec.w, spec.h) - plain_sum(
            spec.channel, spec.x, spec.y, spec.w, spec.h
        )
    return sum(s * plain_sum(spec.channel, x, y, w, h) for x, y, w, h, s in spec.cells())


def enumerate_filters(
    width: int,
    height: int,
    pos_step: int = DEFAULT_POS_STEP,
    scales: tuple[int, ...] = DEFAULT_SCALES,
    kinds: tuple[str, ...] = KINDS,
    channels: tuple[str, ...] = CHANNELS,
) -> list[FilterSpec]:
    """The full filter bank in a fixed order: channel, kind, scale, y, x.

    Base cell shapes are every 1:1 and 2:1 aspect pair over ``scales``;
    each kind tiles its sub-rectangle grid from the base cell, so all
    divisibility constraints hold by construction.
    """
    if width < 8 or height < 8:
        raise ValueError("working grid must be at least 8x8")
    if pos_step < 1:
        raise ValueError("pos_step must be >= 1")
    scale_set = set(scales)
    shapes = [(s, s) for s in scales]
    for s in scales:
        if 2 * s in scale_set:
            shapes.append((2 * s, s))
            shapes.append((s, 2 * s))
    bank = []
    for channel in channels:
        for kind in kinds:
            if kind == KIND_MOTION and channel not in SHIFT_CHANNELS:
                continue
            gx, gy = _KIND_GRID[kind]
            for bw, bh in shapes:
                tw, th = bw * gx, bh * gy
                if tw > width or th > height:
                    continue
                for y in range(0, height - th + 1, pos_step):
                    for x in range(0, width - tw + 1, pos_step):
                        bank.append(FilterSpec(channel, kind, x, y, tw, th))
    return bank


# ---------------------------------------------------------------------------
# Bank container and compiled evaluation

@dataclass(frozen=True)
class FilterBank:
    width: int
    height: int
    filters: tuple[FilterSpec, ...]

    def __post_init__(self):
        for spec in self.filters:
            if spec.x + spec.w > self.width or spec.y + spec.h > self.height:
                raise ValueError(f"filter {spec} exceeds {self.width}x{self.height} grid")

    def __len__(self):
        return len(self.filters)

    @property
    def checksum(self) -> str:
        body = f"{self.width}x{self.height}\n" + "\n".join(f.to_line() for f in self.filters)
        return hashlib.sha256(body.encode()).hexdigest()


def default_bank(
    width: int = DEFAULT_WORK_SIZE[0],
    height: int = DEFAULT_WORK_SIZE[1],
    pos_step: int = DEFAULT_POS_STEP,
    scales: tuple[int, ...] = DEFAULT_SCALES,
) -> FilterBank:
    return FilterBank(width, height, tuple(enumerate_filters(width, height, pos_step, scales)))


def save_bank(bank: FilterBank, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# dynamic haar filter bank",
        f"grid {bank.width} {bank.height}",
        f"count {len(bank)}",
        f"checksum {bank.checksum}",
    ]
    lines += [f.to_line() for f in bank.filters]
    path.write_text("\n".join(lines) + "\n")


def load_bank(path) -> FilterBank:
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    header = dict(l.split(None, 1) for l in lines[:3])
    width, height = (int(v) for v in header["grid"].split())
    count = int(header["count"])
    filters = tuple(FilterSpec.from_line(l) for l in lines[3:])
    if len(filters) != count:
        raise ValueError(f"{path}: bank count mismatch ({len(filters)} vs {count})")
    bank = FilterBank(width, height, filters)
    if bank.checksum != header["checksum"].strip():
        raise ValueError(f"{path}: bank checksum mismatch")
    return bank


_PLANE_OFFSET = {c: i for i, c in enumerate(CHANNELS)}


@dataclass
class CompiledBank:
    """Gather tables for fast evaluation: response = sum(II_flat[idx] * coef)."""

    width: int
    height: int
    idx: np.ndarray  # (F, P) int32 into the stacked flattened integrals
    coef: np.ndarray  # (F, P) float32, zero-padded
    indices: np.ndarray  # original bank indices of each compiled row
    checksum: str


def _corner_points(spec: FilterSpec) -> dict[tuple[str, int, int], int]:
    points: dict[tuple[str, int, int], int] = {}

    def add_rect(channel, x, y, w, h, sign):
        for row, col, c in (
            (y + h, x + w, +1),
            (y, x + w, -1),
            (y + h, x, -1),
            (y, x, +1),
        ):
            key = (channel, row, col)
            points[key] = points.get(key, 0) + sign * c
            if points[key] == 0:
                del points[key]

    if spec.kind == KIND_MOTION:
        add_rect("M", spec.x, spec.y, spec.w, spec.h, +1)
        add_rect(spec.channel, spec.x, spec.y, spec.w, spec.h, -1)
    else:
        for x, y, w, h, sign in spec.cells():
            add_rect(spec.channel, x, y, w, h, sign)
    return points


def compile_bank(bank: FilterBank, indices=None) -> CompiledBank:
    """Precompute integral-table lookups for all (or selected) filters."""
    if indices is None:
        indices = np.arange(len(bank), dtype=np.int64)
    else:
        indices = np.asarray(list(indices), dtype=np.int64)
    plane = (bank.height + 1) * (bank.width + 1)
    per_filter = []
    for i in indices:
        pts = _corner_points(bank.filters[i])
        flat = [
            (_PLANE_OFFSET[ch] * plane + row * (bank.width + 1) + col, c)
            for (ch, row, col), c in sorted(pts.items())
        ]
        per_filter.append(flat)
    max_pts = max(len(p) for p in per_filter) if per_filter else 1
    idx = np.zeros((len(per_filter), max_pts), dtype=np.int32)
    coef = np.zeros((len(per_filter), max_pts), dtype=np.float32)
    for r, pts in enumerate(per_filter):
        for k, (flat, c) in enumerate(pts):
            idx[r, k] = flat
            coef[r, k] = c
    return CompiledBank(bank.width, bank.height, idx, coef, indices, bank.checksum)


def window_integrals(window: np.ndarray) -> np.ndarray:
    """Stacked flattened float64 integral tables of all six channels."""
    channels = build_channels(window)
    return np.concatenate([integral(channels[c].astype(np.float64)).ravel() for c in CHANNELS])


def extract_features(window: np.ndarray, bank) -> np.ndarray:
    """Responses of every bank filter on one 4-frame window (float32).

    ``bank`` may be a FilterBank, a CompiledBank, or a plain list of
    FilterSpec (compiled on the fly).
    """
    if isinstance(bank, CompiledBank):
        compiled = bank
    elif isinstance(bank, FilterBank):
        compiled = compile_bank(bank)
    else:
        specs = tuple(bank)
        w = np.asarray(window).shape[2]
        h = np.asarray(window).shape[1]
        compiled = compile_bank(FilterBank(w, h, specs))
    window = np.asarray(window)
    if window.shape[1] != compiled.height or window.shape[2] != compiled.width:
        raise ValueError(
            f"window is {window.shape[2]}x{window.shape[1]}, "
            f"bank expects {compiled.width}x{compiled.height}"
        )
    flat = window_integrals(window)
    return (flat[compiled.idx] * compiled.coef).sum(axis=1).astype(np.float32)


# ---------------------------------------------------------------------------
# Area-average resizing (downscale to the working grid)

def _area_reduce_last(a: np.ndarray, out_n: int) -> np.ndarray:
    """Exact box-average along the last axis to ``out_n`` bins."""
    n = a.shape[-1]
    if n == out_n:
        return a.copy()
    cum = np.zeros(a.shape[:-1] + (n + 1,), dtype=np.float64)
    np.cumsum(a, axis=-1, out=cum[..., 1:])
    edges = np.arange(out_n + 1) * (n / out_n)
    base = np.minimum(edges.astype(np.int64), n)
    frac = edges - base
    padded = np.concatenate([a, np.zeros(a.shape[:-1] + (1,), dtype=a.dtype)], axis=-1)
    values = cum[..., base] + frac * padded[..., base]
    return (values[..., 1:] - values[..., :-1]) * (out_n / n)


def resize_area(image: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Exact area-average resize of one (H, W) image to (out_h, out_w)."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be positive")
    a = np.asarray(image, dtype=np.float64)
    a = _area_reduce_last(a, out_w)
    a = _area_reduce_last(np.swapaxes(a, -1, -2), out_h)
    return np.swapaxes(a, -1, -2).astype(np.float32)


def to_work_resolution(frames: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area-average a (T, H, W) stack down to the working grid (float32)."""
    frames = np.asarray(frames)
    if frames.shape[1] == height and frames.shape[2] == width:
        return frames.astype(np.float32)
    a = np.asarray(frames, dtype=np.float64)
    a = _area_reduce_last(a, width)
    a = np.swapaxes(_area_reduce_last(np.swapaxes(a, 1, 2), height), 1, 2)
    return a.astype(np.float32)


# ---------------------------------------------------------------------------
# Feature matrix persistence

_MATRIX_MAGIC = b"FMX1"


def save_feature_matrix(path, matrix: np.ndarray, meta, bank_checksum: str = ""):
    """Binary feature file: little-endian (magic, rows, cols) header plus a
    row-major float32 payload; labels/origins go to a ``.meta.tsv`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    rows, cols = matrix.shape
    if len(meta) != rows:
        raise ValueError("one meta row per matrix row required")
    with path.open("wb") as fh:
        fh.write(struct.pack("<4sQQ", _MATRIX_MAGIC, rows, cols))
        fh.write(matrix.tobytes())
    lines = [f"# bank {bank_checksum}"]
    lines += [f"{vid}\t{label}\t{origin}" for vid, label, origin in meta]
    Path(str(path) + ".meta.tsv").write_text("\n".join(lines) + "\n")


def load_feature_matrix(path):
    """Returns (matrix, meta rows, bank checksum)."""
    path = Path(path)
    with path.open("rb") as fh:
        header = fh.read(20)
        magic, rows, cols = struct.unpack("<4sQQ", header)
        if magic != _MATRIX_MAGIC:
            raise ValueError(f"{path}: not a feature matrix file")
        payload = fh.read(rows * cols * 4)
    matrix = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()
    meta_path = Path(str(path) + ".meta.tsv")
    meta = []
    checksum = ""
    for line in meta_path.read_text().splitlines():
        if line.startswith("# bank"):
            checksum = line.split(None, 2)[2] if len(line.split(None, 2)) > 2 else ""
            continue
        vid, label, origin = line.split("\t")
        meta.append((vid, label, origin))
    if len(meta) != rows:
        raise ValueError(f"{path}: sidecar has {len(meta)} rows for {rows} samples")
    return matrix, meta, checksum
