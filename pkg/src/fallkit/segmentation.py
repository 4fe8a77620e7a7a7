"""Fixed-length sampled windows over videos, with train/test labeling rules.

A window keeps every ``sampling_rate``-th frame; consecutive windows start
``stride`` frames apart. Windows wholly inside the fall interval are fall,
wholly outside are non-fall. Mixed windows are discarded from training;
at test time they get the majority label, ties resolving to fall (a missed
fall is the costlier mistake).

Train/validation/test splitting is by whole video; occluded variants always
follow their parent so no frame of one source video can leak across splits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import VideoRecord, frame_labels

LABEL_FALL = "fall"
LABEL_NON_FALL = "non_fall"
LABEL_DISCARDED = "discarded"

MODE_TRAIN = "train"
MODE_TEST = "test"

SPLIT_TRAIN = "train"
SPLIT_VAL = "val"
SPLIT_TEST = "test"
SPLITS = (SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST)


@dataclass(frozen=True)
class SegmentParams:
    segment_len: int = 4
    sampling_rate: int = 1
    stride: int = 4

    def __post_init__(self):
        if self.segment_len < 2:
            raise ValueError("segment_len must be >= 2")
        if self.sampling_rate < 1 or self.stride < 1:
            raise ValueError("sampling_rate and stride must be >= 1")

    @property
    def span(self) -> int:
        """Source frames covered by one window."""
        return (self.segment_len - 1) * self.sampling_rate + 1


@dataclass(frozen=True)
class Segment:
    video_id: str
    frame_indices: tuple[int, ...]
    label: str
    origin: str


def segment_indices(length: int, params: SegmentParams) -> np.ndarray:
    """Start-aligned complete windows: shape (count, segment_len) of source
    frame indices. A too-short video yields an empty array."""
    span = params.span
    if length < span:
        return np.empty((0, params.segment_len), dtype=np.int64)
    starts = np.arange(0, length - span + 1, params.stride, dtype=np.int64)
    offsets = np.arange(params.segment_len, dtype=np.int64) * params.sampling_rate
    return starts[:, None] + offsets[None, :]


def label_segment(window, labels: np.ndarray, mode: str) -> str:
    """Fall / non-fall / discarded label of one window under the given mode."""
    if mode not in (MODE_TRAIN, MODE_TEST):
        raise ValueError(f"unknown mode {mode!r}")
    window = np.asarray(window)
    n_fall = int(labels[window].sum())
    if n_fall == len(window):
        return LABEL_FALL
    if n_fall == 0:
        return LABEL_NON_FALL
    if mode == MODE_TRAIN:
        return LABEL_DISCARDED
    return LABEL_FALL if 2 * n_fall >= len(window) else LABEL_NON_FALL


def segment_video(record: VideoRecord, params: SegmentParams, mode: str) -> list[Segment]:
    """All labeled windows of one video; train-mode mixed windows dropped."""
    labels = frame_labels(record.annotation, len(record.frames))
    segments = []
    for window in segment_indices(len(record.frames), params):
        label = label_segment(window, labels, mode)
        if label == LABEL_DISCARDED:
            continue
        segments.append(
            Segment(
                video_id=record.id,
                frame_indices=tuple(int(i) for i in window),
                label=label,
                origin=record.origin,
            )
        )
    return segments


# ---------------------------------------------------------------------------
# Video-level splits

def assign_splits(
    entries,
    seed: int,
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> dict[str, str]:
    """Random 60/20/20 split over source videos; children follow parents.

    ``entries`` is any iterable with ``video_id``/``parent_id`` attributes.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    entries = list(entries)
    roots = [e.video_id for e in entries if e.parent_id is None]
    if not roots:
        raise ValueError("no parent videos to split")
    order = np.array(sorted(roots))
    rng = np.random.default_rng(seed)
    rng.shuffle(order)
    n = len(order)
    n_val = int(np.floor(fractions[1] * n))
    n_test = int(np.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    splits: dict[str, str] = {}
    for i, vid in enumerate(order):
        if i < n_train:
            splits[str(vid)] = SPLIT_TRAIN
        elif i < n_train + n_val:
            splits[str(vid)] = SPLIT_VAL
        else:
            splits[str(vid)] = SPLIT_TEST
    for e in entries:
        if e.parent_id is not None:
            if e.parent_id not in splits:
                raise ValueError(f"{e.video_id}: parent {e.parent_id!r} not in split set")
            splits[e.video_id] = splits[e.parent_id]
    return splits


def assert_split_hygiene(entries, splits: dict[str, str]):
    """Every occluded child must share its parent's split."""
    for e in entries:
        if e.parent_id is not None and splits[e.video_id] != splits[e.parent_id]:
            raise ValueError(
                f"split contamination: {e.video_id} in {splits[e.video_id]!r} "
                f"but parent {e.parent_id} in {splits[e.parent_id]!r}"
            )


def save_splits(splits: dict[str, str], path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{vid}\t{split}\n" for vid, split in sorted(splits.items())]
    path.write_text("".join(lines))


def load_splits(path) -> dict[str, str]:
    splits = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            vid, split = line.split("\t")
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'video_id<TAB>split'") from None
        if split not in SPLITS:
            raise ValueError(f"{path}:{lineno}: unknown split {split!r}")
        splits[vid] = split
    return splits
