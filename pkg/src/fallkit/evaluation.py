"""Metrics, PCA feature-space diagnostics and timing benchmarks.

Fall is the positive class everywhere. Reports carry the overall
confusion counts plus per-origin slices so occlusion degradation is
visible directly.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .haar import compile_bank, extract_features, to_work_resolution
from .trainer import FeatureDataset, TrainedPipeline


@dataclass
class MetricSlice:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def recall(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def precision(self) -> float | None:
        pred_pos = self.tp + self.fp
        return self.tp / pred_pos if pred_pos else None


@dataclass
class EvalReport:
    overall: MetricSlice
    per_origin: dict[str, MetricSlice] = field(default_factory=dict)
    ms_per_frame: float | None = None

    def to_text(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.4f}"

        rows = [("overall", self.overall)] + sorted(self.per_origin.items())
        width = max(len(name) for name, _ in rows)
        lines = [
            f"{'slice':<{width}}  {'n':>6}  {'accuracy':>8}  {'recall':>8}  {'precision':>9}  TP/FP/TN/FN"
        ]
        for name, s in rows:
            lines.append(
                f"{name:<{width}}  {s.total:>6}  {s.accuracy:>8.4f}  {fmt(s.recall):>8}  "
                f"{fmt(s.precision):>9}  {s.tp}/{s.fp}/{s.tn}/{s.fn}"
            )
        if self.ms_per_frame is not None:
            lines.append(f"timing: {self.ms_per_frame:.3f} ms/frame")
        return "\n".join(lines)

    def to_csv_rows(self) -> list[str]:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"

        rows = [("overall", self.overall)] + sorted(self.per_origin.items())
        out = ["slice,n,accuracy,recall,precision,tp,fp,tn,fn"]
        for name, s in rows:
            out.append(
                f"{name},{s.total},{s.accuracy:.6f},{fmt(s.recall)},{fmt(s.precision)},"
                f"{s.tp},{s.fp},{s.tn},{s.fn}"
            )
        return out


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> MetricSlice:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return MetricSlice(
        tp=int(((y_true > 0) & (y_pred > 0)).sum()),
        fp=int(((y_true < 0) & (y_pred > 0)).sum()),
        tn=int(((y_true < 0) & (y_pred < 0)).sum()),
        fn=int(((y_true > 0) & (y_pred < 0)).sum()),
    )


def evaluate(pipeline: TrainedPipeline, ds: FeatureDataset) -> EvalReport:
    """Classify every test segment; slice metrics by record origin."""
    if not len(ds):
        raise ValueError("empty test set")
    preds = pipeline.predict(ds.X)
    overall = confusion(ds.y, preds)
    if overall.recall is None:
        warnings.warn("no fall samples in the test set; recall undefined")
    per_origin = {}
    for origin in sorted(set(ds.origins.tolist())):
        mask = ds.origins == origin
        per_origin[origin] = confusion(ds.y[mask], preds[mask])
    return EvalReport(overall=overall, per_origin=per_origin)


# ---------------------------------------------------------------------------
# PCA diagnostic projection

@dataclass
class PcaResult:
    projection: np.ndarray  # (n, 2)
    variances: np.ndarray  # top-2 eigenvalues of the covariance
    ratios: np.ndarray  # fraction of total variance per component


def pca_project_2d(features: np.ndarray) -> PcaResult:
    """Mean-centered projection onto the top two covariance eigenvectors.

    Components are ordered by descending eigenvalue with the sign fixed so
    each component's largest-magnitude loading is positive.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3 or X.shape[1] < 2:
        raise ValueError("need at least 3 samples of at least 2 dimensions")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (len(X) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    comps = eigvecs[:, order]
    for k in range(2):
        if comps[np.argmax(np.abs(comps[:, k])), k] < 0:
            comps[:, k] = -comps[:, k]
    variances = np.maximum(eigvals[order], 0.0)
    total = max(float(eigvals.clip(min=0).sum()), 1e-300)
    return PcaResult(
        projection=centered @ comps,
        variances=variances,
        ratios=variances / total,
    )


def write_pca_csv(path, result: PcaResult, labels=None, origins=None):
    n = len(result.projection)
    labels = ["-"] * n if labels is None else list(labels)
    origins = ["-"] * n if origins is None else list(origins)
    lines = ["pc1,pc2,label,origin"]
    for (a, b), lab, orig in zip(result.projection, labels, origins):
        lines.append(f"{a:.8g},{b:.8g},{lab},{orig}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Timing benchmark

@dataclass
class BenchmarkStats:
    n_segments: int
    frames_per_segment: int
    median_ms_per_frame: float
    p95_ms_per_frame: float
    total_seconds: float


def benchmark(pipeline: TrainedPipeline, bank, windows, min_segments: int = 100) -> BenchmarkStats:
    """Median/p95 per-frame wall time of selected-feature extraction plus
    classification on raw 4-frame windows (single process, one at a time).

    ``windows`` is a sequence of (segment_len, H, W) arrays at native
    resolution; each is downscaled, evaluated on the pipeline's selected
    filters only, and classified.
    """
    windows = list(windows)
    if len(windows) < min_segments:
        raise ValueError(f"need at least {min_segments} segments, got {len(windows)}")
    selected = list(pipeline.selected_features)
    compiled = compile_bank(bank, selected)
    times = np.empty(len(windows))
    t_start = time.perf_counter()
    for i, window in enumerate(windows):
        t0 = time.perf_counter()
        work = to_work_resolution(np.asarray(window), pipeline.work_width, pipeline.work_height)
        feats = extract_features(work, compiled)
        pipeline.svm.decision(feats.astype(np.float64))
        times[i] = time.perf_counter() - t0
    total = time.perf_counter() - t_start
    frames = len(windows[0])
    per_frame_ms = times / frames * 1000.0
    return BenchmarkStats(
        n_segments=len(windows),
        frames_per_segment=frames,
        median_ms_per_frame=float(np.median(per_frame_ms)),
        p95_ms_per_frame=float(np.percentile(per_frame_ms, 95)),
        total_seconds=total,
    )
