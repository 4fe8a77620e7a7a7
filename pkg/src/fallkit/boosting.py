"""Weighted discrete AdaBoost over decision stumps for feature selection.

Each round scans every feature column for the stump minimizing weighted
0-1 error; thresholds sit midway between adjacent distinct values of the
sorted column, so one cumulative sweep per feature finds the optimum.
Sort orders never change between rounds and are computed once.

Deterministic tie-breaking everywhere: lower error, then smaller
threshold, then polarity +1, then smaller feature index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised where numba is absent
    _HAVE_NUMBA = False

#: Vote weight assigned to a zero-error stump (training stops there).
ALPHA_CAP = math.log(1e9)

#: A round whose best weighted error reaches 0.5 adds no information.
ERROR_STOP = 0.5 - 1e-9


@dataclass
class DecisionStump:
    """Single-feature threshold classifier: +polarity where value >= threshold."""

    feature: int
    threshold: float
    polarity: int
    alpha: float = 0.0

    def predict(self, values: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(values) >= self.threshold, self.polarity, -self.polarity)


@dataclass
class BoostModel:
    stumps: list[DecisionStump]
    selected_features: tuple[int, ...]
    bank_checksum: str = ""
    round_errors: list[float] = field(default_factory=list, compare=False)

    @property
    def rounds(self) -> int:
        return len(self.stumps)


def _validate_labels_weights(labels, weights):
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if labels.shape != weights.shape:
        raise ValueError("labels and weights must align")
    if not set(np.unique(labels)) <= {-1, 1}:
        raise ValueError("labels must be +/-1")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must not be all zero")
    active = weights > 0
    if len(set(np.unique(labels[active]))) < 2:
        raise ValueError("both classes need nonzero weight")
    return labels.astype(np.int8), weights / total


def train_stump(values, labels, weights, feature: int = 0):
    """Best (threshold, polarity) for one feature column.

    Returns (stump without vote weight, weighted 0-1 error). Weights are
    normalized internally so the error is relative.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2:
        raise ValueError("need a 1-D column of at least 2 samples")
    labels, weights = _validate_labels_weights(labels, weights)
    err, theta, pol = _scan_numpy(
        np.asfortranarray(values[:, None]),
        np.argsort(values, kind="stable").astype(np.int32)[:, None],
        weights * labels,
        float(weights[labels == -1].sum()),
    )
    if not np.isfinite(err[0]):
        raise ValueError("constant feature column admits no threshold")
    return DecisionStump(feature, float(theta[0]), int(pol[0])), float(err[0])


def _scan_numpy(X, order, signed_w, w_neg, chunk_cols: int = 512):
    """Per-feature best stump via sorted cumulative sweep (vectorized).

    Returns (error, threshold, polarity) arrays over features; features
    with no distinct adjacent values get error = inf.
    """
    n, n_features = order.shape
    err = np.full(n_features, np.inf)
    theta = np.zeros(n_features)
    pol = np.zeros(n_features, dtype=np.int8)
    for c0 in range(0, n_features, chunk_cols):
        c1 = min(c0 + chunk_cols, n_features)
        o = order[:, c0:c1]
        xs = np.take_along_axis(X[:, c0:c1], o, axis=0)
        cum = np.cumsum(signed_w[o], axis=0)[:-1]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        inf = np.inf
        # error for "predict +1 above the cut" after cut position j
        e_plus = np.where(valid, w_neg + cum, inf)
        e_minus = np.where(valid, 1.0 - (w_neg + cum), inf)
        jp = e_plus.argmin(axis=0)
        jm = e_minus.argmin(axis=0)
        sub = np.arange(c1 - c0)
        ep = e_plus[jp, sub]
        em = e_minus[jm, sub]
        tp = 0.5 * (xs[jp, sub].astype(np.float64) + xs[jp + 1, sub])
        tm = 0.5 * (xs[jm, sub].astype(np.float64) + xs[jm + 1, sub])
        minus_wins = (em < ep) | ((em == ep) & (tm < tp))
        err[c0:c1] = np.where(minus_wins, em, ep)
        theta[c0:c1] = np.where(minus_wins, tm, tp)
        pol[c0:c1] = np.where(minus_wins, -1, 1).astype(np.int8)
        pol[c0:c1][~np.isfinite(err[c0:c1])] = 0
    return err, theta, pol


if _HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _scan_numba(X, order, signed_w, w_neg, err, theta, pol):  # pragma: no cover
        n, n_features = order.shape
        for f in numba.prange(n_features):
            s = 0.0
            best_e = np.inf
            best_t = 0.0
            best_p = 0
            for j in range(n - 1):
                i = order[j, f]
                s += signed_w[i]
                xa = X[i, f]
                xb = X[order[j + 1, f], f]
                if xa < xb:
                    e_plus = w_neg + s
                    e_minus = 1.0 - e_plus
                    if e_plus < best_e:
                        best_e = e_plus
                        best_t = 0.5 * (np.float64(xa) + np.float64(xb))
                        best_p = 1
                    if e_minus < best_e:
                        best_e = e_minus
                        best_t = 0.5 * (np.float64(xa) + np.float64(xb))
                        best_p = -1
            err[f] = best_e
            theta[f] = best_t
            pol[f] = best_p


def _best_stump_all(X, order, signed_w, w_neg, use_numba: bool):
    n_features = order.shape[1]
    if use_numba and _HAVE_NUMBA:
        err = np.empty(n_features)
        theta = np.empty(n_features)
        pol = np.empty(n_features, dtype=np.int8)
        _scan_numba(X, order, signed_w, w_neg, err, theta, pol)
    else:
        err, theta, pol = _scan_numpy(X, order, signed_w, w_neg)
    best = int(err.argmin())  # ties resolve to the smaller feature index
    if not np.isfinite(err[best]):
        raise ValueError("no feature column admits a threshold")
    return best, float(theta[best]), int(pol[best]), float(err[best])


def adaboost_train(
    features: np.ndarray,
    labels,
    init_weights,
    rounds: int,
    bank_checksum: str = "",
    use_numba: bool = True,
) -> BoostModel:
    """Discrete AdaBoost seeded with externally supplied sample weights.

    Zero-weight samples can never influence any round and are dropped up
    front, which makes weighting endpoints exact (weight 0 == absent).
    Stops early on a useless round (error >= 0.5) or a perfect stump
    (error 0, vote weight capped).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    X = np.asarray(features)
    if X.ndim != 2:
        raise ValueError("features must be a (samples, features) matrix")
    labels, w = _validate_labels_weights(labels, init_weights)
    keep = w > 0
    X = X[keep]
    y = labels[keep]
    w = w[keep]
    w = w / w.sum()

    # column-major layout and one stable presort, reused by every round
    Xf = np.asfortranarray(X, dtype=np.float32)
    order = np.asfortranarray(np.argsort(Xf, axis=0, kind="stable").astype(np.int32))

    stumps: list[DecisionStump] = []
    round_errors: list[float] = []
    for _ in range(rounds):
        w_neg = float(w[y == -1].sum())
        f, th, p, eps = _best_stump_all(Xf, order, w * y, w_neg, use_numba)
        eps = max(eps, 0.0)
        round_errors.append(eps)
        if eps >= ERROR_STOP:
            break
        if eps == 0.0:
            stumps.append(DecisionStump(f, th, p, ALPHA_CAP))
            break
        alpha = min(0.5 * math.log((1.0 - eps) / eps), ALPHA_CAP)
        stumps.append(DecisionStump(f, th, p, alpha))
        h = np.where(Xf[:, f] >= th, p, -p).astype(np.float64)
        w = w * np.exp(-alpha * y * h)
        w = w / w.sum()
    if not stumps:
        raise ValueError("no informative stump found in round 1")

    selected = tuple(dict.fromkeys(s.feature for s in stumps))
    return BoostModel(stumps, selected, bank_checksum, round_errors)


def boost_predict(model: BoostModel, features: np.ndarray, columns: dict[int, int] | None = None):
    """Ensemble vote: labels (+1 at margin >= 0, the documented convention)
    and the signed margins.

    ``columns`` maps bank feature indices to matrix columns when the
    matrix holds only a feature subset.
    """
    if not model.stumps:
        raise ValueError("empty model")
    X = np.asarray(features)
    margins = np.zeros(len(X))
    for stump in model.stumps:
        col = stump.feature if columns is None else columns[stump.feature]
        if col >= X.shape[1]:
            raise ValueError(f"feature column {col} missing from matrix")
        margins += stump.alpha * stump.predict(X[:, col])
    labels = np.where(margins >= 0, 1, -1).astype(np.int8)
    return labels, margins


def save_boost_model(model: BoostModel, path):
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# adaboost stump ensemble",
        f"bank_checksum {model.bank_checksum or '-'}",
        f"rounds {model.rounds}",
        f"selected {len(model.selected_features)}",
    ]
    for s in model.stumps:
        lines.append(f"{s.feature} {float(s.threshold)!r} {s.polarity} {float(s.alpha)!r}")
    path.write_text("\n".join(lines) + "\n")


def load_boost_model(path, expect_bank_checksum: str | None = None) -> BoostModel:
    from pathlib import Path

    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    header = dict(l.split(None, 1) for l in lines[:3])
    checksum = header["bank_checksum"]
    checksum = "" if checksum == "-" else checksum
    if expect_bank_checksum is not None and checksum and checksum != expect_bank_checksum:
        raise ValueError(f"{path}: model was trained on a different filter bank")
    stumps = []
    for line in lines[3:]:
        f, th, p, a = line.split()
        stumps.append(DecisionStump(int(f), float(th), int(p), float(a)))
    if len(stumps) != int(header["rounds"]):
        raise ValueError(f"{path}: stump count mismatch")
    selected = tuple(dict.fromkeys(s.feature for s in stumps))
    return BoostModel(stumps, selected, checksum)
