"""Weighted training orchestration: balance weights, boosting, SVM, sweeps.

Per-sample weights implement the balanced two-set cost
``L = L_normal + lambda * (n/o) * L_occluded``: normal-origin samples get
weight 1, occluded-origin samples get ``lambda * n / o`` where n and o are
the normal/occluded sample counts. The n/o factor keeps the occluded
contribution invariant to how many occluded variants were generated, so
lambda transfers across corpus sizes. Weights enter AdaBoost through its
initial distribution and the SVM through per-sample costs.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boosting, svm
from .corpus import ORIGIN_NORMAL
from .haar import (
    CompiledBank,
    FilterBank,
    compile_bank,
    extract_features,
    load_bank,
    save_bank,
    to_work_resolution,
)
from .segmentation import LABEL_FALL, SegmentParams, segment_video


@dataclass(frozen=True)
class WeightingPolicy:
    """Balance factor plus the sample counts it normalizes against."""

    lam: float
    n_normal: int
    n_occluded: int

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.n_normal < 1:
            raise ValueError("need at least one normal sample")
        if self.n_occluded < 0:
            raise ValueError("occluded count must be >= 0")

    @property
    def occluded_weight(self) -> float:
        if self.n_occluded == 0:
            return 0.0
        return self.lam * self.n_normal / self.n_occluded


def sample_weights(origins, policy: WeightingPolicy) -> np.ndarray:
    """Per-sample weights: 1 for normal origin, lambda*n/o for occluded."""
    origins = np.asarray(origins)
    normal = origins == ORIGIN_NORMAL
    n, o = int(normal.sum()), int((~normal).sum())
    if n != policy.n_normal or o != policy.n_occluded:
        raise ValueError(
            f"policy counts (n={policy.n_normal}, o={policy.n_occluded}) do not "
            f"match origin tags (n={n}, o={o})"
        )
    return np.where(normal, 1.0, policy.occluded_weight)


# ---------------------------------------------------------------------------
# Feature datasets

@dataclass
class FeatureDataset:
    """Extracted segment features with label/origin metadata."""

    X: np.ndarray  # (n, F) float32
    y: np.ndarray  # (n,) int8, +1 fall / -1 non-fall
    origins: np.ndarray  # (n,) str
    video_ids: np.ndarray  # (n,) str
    bank_checksum: str = ""

    def __len__(self):
        return len(self.X)

    @property
    def meta(self):
        labels = np.where(self.y > 0, "fall", "non_fall")
        return list(zip(self.video_ids.tolist(), labels.tolist(), self.origins.tolist()))

    def policy(self, lam: float) -> WeightingPolicy:
        normal = self.origins == ORIGIN_NORMAL
        return WeightingPolicy(lam, int(normal.sum()), int((~normal).sum()))


def extract_dataset(records, bank, params: SegmentParams, mode: str) -> FeatureDataset:
    """Segment each record, evaluate the bank per window, stack the rows.

    ``records`` is any iterable of VideoRecord; it is consumed streaming so
    occluded variants can be generated on the fly without holding a whole
    corpus in memory.
    """
    compiled = bank if isinstance(bank, CompiledBank) else compile_bank(bank)
    rows, ys, origins, vids = [], [], [], []
    for record in records:
        segments = segment_video(record, params, mode)
        if not segments:
            continue
        work = to_work_resolution(record.frames.frames, compiled.width, compiled.height)
        for seg in segments:
            rows.append(extract_features(work[list(seg.frame_indices)], compiled))
            ys.append(1 if seg.label == LABEL_FALL else -1)
            origins.append(seg.origin)
            vids.append(seg.video_id)
    n_features = compiled.idx.shape[0]
    X = np.vstack(rows) if rows else np.empty((0, n_features), dtype=np.float32)
    return FeatureDataset(
        X=X,
        y=np.asarray(ys, dtype=np.int8),
        origins=np.asarray(origins, dtype=object),
        video_ids=np.asarray(vids, dtype=object),
        bank_checksum=compiled.checksum,
    )


def dataset_from_matrix(X, meta, bank_checksum: str = "") -> FeatureDataset:
    """Rebuild a dataset from a persisted feature matrix + sidecar rows."""
    vids = np.asarray([m[0] for m in meta], dtype=object)
    y = np.asarray([1 if m[1] == "fall" else -1 for m in meta], dtype=np.int8)
    origins = np.asarray([m[2] for m in meta], dtype=object)
    return FeatureDataset(np.asarray(X, dtype=np.float32), y, origins, vids, bank_checksum)


# ---------------------------------------------------------------------------
# Pipeline

@dataclass
class TrainedPipeline:
    """Feature-selection stage plus classifier stage, with consistency keys."""

    boost: boosting.BoostModel
    svm: svm.SvmModel
    policy: WeightingPolicy
    bank_checksum: str
    work_width: int
    work_height: int

    @property
    def selected_features(self) -> tuple[int, ...]:
        return self.boost.selected_features

    def decision(self, X_bank: np.ndarray) -> np.ndarray:
        """SVM margins from full-bank feature rows."""
        X_bank = np.asarray(X_bank)
        return self.svm.decision(X_bank[:, list(self.selected_features)])

    def predict(self, X_bank: np.ndarray) -> np.ndarray:
        return np.where(self.decision(X_bank) > 0, 1, -1).astype(np.int8)


@dataclass
class TrainReport:
    n_samples: int
    n_normal: int
    n_occluded: int
    rounds: int
    selected_count: int
    round_errors: list[float] = field(repr=False)
    boost_seconds: float = 0.0
    svm_seconds: float = 0.0
    svm_objective: float = 0.0
    train_accuracy: float = 0.0
    svm_c: float = 1.0


def selection_checksum(selected, bank_checksum: str) -> str:
    body = bank_checksum + ":" + ",".join(str(i) for i in selected)
    return hashlib.sha256(body.encode()).hexdigest()


def train_pipeline(
    train: FeatureDataset,
    policy: WeightingPolicy,
    rounds: int = 300,
    C: float = 1.0,
    use_numba: bool = True,
    work_size: tuple[int, int] = (64, 48),
    val: FeatureDataset | None = None,
    c_grid=(0.01, 0.1, 1.0, 10.0),
) -> tuple[TrainedPipeline, TrainReport]:
    """AdaBoost feature selection then weighted SVM, both under the policy
    weights. The caller is responsible for split hygiene.

    With ``val`` given, the SVM trade-off is picked from ``c_grid`` by
    validation accuracy (feature selection runs once; only the SVM stage
    is refit per candidate). Otherwise ``C`` is used as passed.
    """
    weights = sample_weights(train.origins, policy)
    t0 = time.perf_counter()
    boost = boosting.adaboost_train(
        train.X, train.y, weights, rounds, bank_checksum=train.bank_checksum, use_numba=use_numba
    )
    t1 = time.perf_counter()
    sel = list(boost.selected_features)
    Xsel = train.X[:, sel].astype(np.float64)
    sel_checksum = selection_checksum(sel, train.bank_checksum)

    def fit_svm(c):
        return svm.train_weighted_svm(
            Xsel,
            train.y,
            weights,
            C=c,
            bank_checksum=train.bank_checksum,
            selection_checksum=sel_checksum,
        )

    if val is not None:
        val_sel = val.X[:, sel].astype(np.float64)
        model, C, best_acc = None, None, -1.0
        for c in c_grid:
            cand = fit_svm(c)
            acc = float((np.where(cand.decision(val_sel) > 0, 1, -1) == val.y).mean())
            if acc > best_acc:
                model, C, best_acc = cand, c, acc
    else:
        model = fit_svm(C)
    t2 = time.perf_counter()
    pipeline = TrainedPipeline(
        boost=boost,
        svm=model,
        policy=policy,
        bank_checksum=train.bank_checksum,
        work_width=work_size[0],
        work_height=work_size[1],
    )
    preds = pipeline.predict(train.X)
    report = TrainReport(
        n_samples=len(train),
        n_normal=policy.n_normal,
        n_occluded=policy.n_occluded,
        rounds=boost.rounds,
        selected_count=len(boost.selected_features),
        round_errors=list(boost.round_errors),
        boost_seconds=t1 - t0,
        svm_seconds=t2 - t1,
        svm_objective=model.objective_trace[-1] if model.objective_trace else 0.0,
        train_accuracy=float((preds == train.y).mean()) if len(train) else 0.0,
        svm_c=float(C),
    )
    return pipeline, report


def accuracy(pipeline: TrainedPipeline, ds: FeatureDataset) -> float:
    if not len(ds):
        raise ValueError("empty dataset")
    return float((pipeline.predict(ds.X) == ds.y).mean())


def lambda_sweep(
    train: FeatureDataset,
    val: FeatureDataset,
    lambdas,
    rounds: int = 300,
    C: float = 1.0,
    use_numba: bool = True,
    select_c: bool = False,
) -> list[dict]:
    """One full train+validate per lambda; rows are plain dicts for easy
    tabulation. ``select_c`` picks each point's SVM trade-off on the
    validation split instead of using the fixed ``C``."""
    rows = []
    for lam in lambdas:
        pipeline, report = train_pipeline(
            train, train.policy(lam), rounds, C, use_numba, val=val if select_c else None
        )
        rows.append(
            {
                "lambda": float(lam),
                "val_accuracy": accuracy(pipeline, val),
                "rounds": report.rounds,
                "train_accuracy": report.train_accuracy,
            }
        )
    return rows


def sweep_features(
    train: FeatureDataset,
    eval_ds: FeatureDataset,
    grid,
    lam: float = 0.6,
    C: float = 1.0,
    use_numba: bool = True,
    val: FeatureDataset | None = None,
) -> list[dict]:
    """Accuracy/cost trade-off over the number of boosting rounds.

    ``val``, when given, drives per-point SVM trade-off selection (never
    the evaluation set).
    """
    rows = []
    policy = train.policy(lam)
    for k in grid:
        t0 = time.perf_counter()
        pipeline, report = train_pipeline(train, policy, int(k), C, use_numba, val=val)
        train_seconds = time.perf_counter() - t0
        rows.append(
            {
                "features": int(k),
                "accuracy": accuracy(pipeline, eval_ds),
                "train_seconds": train_seconds,
                "selected": report.selected_count,
            }
        )
    return rows


def select_svm_c(
    train: FeatureDataset,
    val: FeatureDataset,
    policy: WeightingPolicy,
    rounds: int = 300,
    grid=(0.01, 0.1, 1.0, 10.0),
    use_numba: bool = True,
) -> float:
    """Pick the hinge trade-off by validation accuracy (first best wins)."""
    _, report = train_pipeline(train, policy, rounds, use_numba=use_numba, val=val, c_grid=grid)
    return report.svm_c


# ---------------------------------------------------------------------------
# Persistence

def save_pipeline(pipeline: TrainedPipeline, out_dir, bank: FilterBank | None = None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    boosting.save_boost_model(pipeline.boost, out_dir / "boost.txt")
    svm.save_svm_model(pipeline.svm, out_dir / "svm.txt")
    if bank is not None:
        if bank.checksum != pipeline.bank_checksum:
            raise ValueError("bank does not match the pipeline's checksum")
        save_bank(bank, out_dir / "bank.txt")
    meta = [
        "# trained fall-detection pipeline",
        f"lambda {pipeline.policy.lam!r}",
        f"n_normal {pipeline.policy.n_normal}",
        f"n_occluded {pipeline.policy.n_occluded}",
        f"bank_checksum {pipeline.bank_checksum or '-'}",
        f"work {pipeline.work_width} {pipeline.work_height}",
    ]
    (out_dir / "meta.txt").write_text("\n".join(meta) + "\n")


def load_pipeline(run_dir) -> tuple[TrainedPipeline, FilterBank | None]:
    run_dir = Path(run_dir)
    meta = {}
    for line in (run_dir / "meta.txt").read_text().splitlines():
        if line and not line.startswith("#"):
            key, value = line.split(None, 1)
            meta[key] = value
    checksum = "" if meta["bank_checksum"] == "-" else meta["bank_checksum"]
    boost = boosting.load_boost_model(run_dir / "boost.txt", checksum or None)
    model = svm.load_svm_model(run_dir / "svm.txt", checksum or None)
    bank = None
    if (run_dir / "bank.txt").exists():
        bank = load_bank(run_dir / "bank.txt")
        if checksum and bank.checksum != checksum:
            raise ValueError(f"{run_dir}: bank/model checksum mismatch")
    work_w, work_h = (int(v) for v in meta["work"].split())
    policy = WeightingPolicy(float(meta["lambda"]), int(meta["n_normal"]), int(meta["n_occluded"]))
    return (
        TrainedPipeline(
            boost=boost,
            svm=model,
            policy=policy,
            bank_checksum=checksum,
            work_width=work_w,
            work_height=work_h,
        ),
        bank,
    )


# ---------------------------------------------------------------------------
# Experiment configuration files (key=value text)

def parse_config(path) -> dict[str, str]:
    """key=value lines; blank lines and # comments ignored."""
    config = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config
