"""Cost-sensitive linear SVM with per-sample importance weights.

Minimizes  0.5*||w||^2 + C * sum_i g_i * hinge(y_i * (w.x_i + b))  on
internally standardized features. Per-sample costs realize the weighted
classifier: a high-weight sample presses harder on the hyperplane, a
zero-weight sample has no influence at all (such rows are dropped up
front, making removal equivalence exact).

The optimizer smooths the hinge kink (Huber-style, width mu), minimizes
each stage with L-BFGS and shrinks mu toward zero, tracking the best true
hinge objective seen; the recorded trace is therefore non-increasing and
the returned parameters are the trace's last entry. Fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

#: Hinge smoothing widths; later (optional) epochs repeat the last one.
MU_SCHEDULE = (0.5, 0.1, 0.02, 4e-3, 1e-3, 2e-4, 5e-5)


@dataclass(eq=False)
class SvmModel:
    """Trained hyperplane plus the standardization it expects.

    ``kept`` lists the input feature indices that survived training;
    zero-variance inputs are recorded in ``dropped`` and ignored by the
    decision function.
    """

    dim: int
    kept: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    w: np.ndarray
    b: float
    bank_checksum: str = ""
    selection_checksum: str = ""
    dropped: tuple[int, ...] = ()
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = True

    def decision(self, x: np.ndarray) -> np.ndarray:
        """Signed margin(s) of one vector or a (n, dim) matrix."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {x.shape[1]}")
        z = (x[:, list(self.kept)] - self.mean) / self.std
        margins = z @ self.w + self.b
        return margins[0] if single else margins

    def predict(self, x: np.ndarray) -> np.ndarray:
        """+1 (fall) where margin > 0, else -1; margin 0 is non-fall."""
        margins = np.atleast_1d(self.decision(x))
        return np.where(margins > 0, 1, -1).astype(np.int8)


def _hinge_objective(theta, Xs, y, costs, mu):
    w, b = theta[:-1], theta[-1]
    m = y * (Xs @ w + b)
    z = 1.0 - m
    if mu > 0:
        quad = np.abs(z) <= mu
        lin = z > mu
        loss = np.where(lin, z, 0.0)
        loss = np.where(quad, (z + mu) ** 2 / (4.0 * mu), loss)
        dldm = np.where(lin, -1.0, 0.0)
        dldm = np.where(quad, -(z + mu) / (2.0 * mu), dldm)
    else:
        loss = np.maximum(z, 0.0)
        dldm = np.where(z > 0, -1.0, 0.0)
    f = 0.5 * float(w @ w) + float(costs @ loss)
    cy = costs * dldm * y
    grad = np.concatenate([w + Xs.T @ cy, [cy.sum()]])
    return f, grad


def true_objective(w, b, Xs, y, costs) -> float:
    """Exact weighted hinge objective on standardized features."""
    m = y * (Xs @ w + b)
    return 0.5 * float(w @ w) + float(costs @ np.maximum(0.0, 1.0 - m))


def train_weighted_svm(
    X: np.ndarray,
    y,
    g,
    C: float = 1.0,
    tol: float = 1e-6,
    max_epochs: int = 24,
    stage_iters: int = 150,
    bank_checksum: str = "",
    selection_checksum: str = "",
) -> SvmModel:
    """Fit the weighted hinge objective; see the module docstring.

    Stops when the recorded objective's relative improvement falls below
    ``tol`` after the smoothing schedule has completed, or at
    ``max_epochs`` stages.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) != len(g):
        raise ValueError("X, y, g must align")
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    if np.any(g < 0) or C <= 0:
        raise ValueError("need g >= 0 and C > 0")
    active = g > 0
    if len(set(np.unique(y[active]))) < 2:
        raise ValueError("both classes need positive weight")
    Xa, ya, ga = X[active], y[active], g[active]

    dim = X.shape[1]
    mean = Xa.mean(axis=0)
    std = Xa.std(axis=0)
    keep = std > 0
    kept = tuple(int(i) for i in np.flatnonzero(keep))
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    Xs = (Xa[:, keep] - mean[keep]) / std[keep]
    costs = C * ga

    theta = np.zeros(Xs.shape[1] + 1)
    best_theta = theta.copy()
    best_f = true_objective(theta[:-1], theta[-1], Xs, ya, costs)
    trace = [best_f]
    converged = False
    for epoch in range(max_epochs):
        mu = MU_SCHEDULE[min(epoch, len(MU_SCHEDULE) - 1)]
        res = optimize.minimize(
            _hinge_objective,
            theta,
            args=(Xs, ya, costs, mu),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": stage_iters, "gtol": 1e-12, "ftol": 1e-14},
        )
        theta = res.x
        f = true_objective(theta[:-1], theta[-1], Xs, ya, costs)
        if f < best_f:
            best_f = f
            best_theta = theta.copy()
        trace.append(best_f)
        if epoch >= len(MU_SCHEDULE) - 1:
            prev, cur = trace[-2], trace[-1]
            if prev - cur <= tol * max(abs(prev), 1e-12):
                converged = True
                break

    return SvmModel(
        dim=dim,
        kept=kept,
        mean=mean[keep],
        std=std[keep],
        w=best_theta[:-1].copy(),
        b=float(best_theta[-1]),
        bank_checksum=bank_checksum,
        selection_checksum=selection_checksum,
        dropped=dropped,
        objective_trace=trace,
        converged=converged,
    )


def svm_decision(model: SvmModel, x: np.ndarray):
    return model.decision(x)


def svm_predict(model: SvmModel, x: np.ndarray):
    return model.predict(x)


def kkt_subgradient_norm(model: SvmModel, X, y, g, C: float = 1.0, kink_tol: float = 1e-3) -> float:
    """Norm of the minimum-norm subgradient at the model's parameters.

    Samples on the hinge kink (margin within ``kink_tol`` of 1) take a
    free coefficient in [0, 1]; bounded least squares picks the
    combination of smallest norm. Near an optimum this approaches 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    active = g > 0
    Xs = (X[active][:, list(model.kept)] - model.mean) / model.std
    ya, ca = y[active], C * g[active]
    m = ya * (Xs @ model.w + model.b)
    fixed = m < 1.0 - kink_tol
    kink = np.abs(m - 1.0) <= kink_tol
    aug = np.hstack([Xs, np.ones((len(Xs), 1))])
    r0 = np.concatenate([model.w, [0.0]])
    r0 -= (ca[fixed] * ya[fixed]) @ aug[fixed]
    if not kink.any():
        return float(np.linalg.norm(r0))
    A = (ca[kink] * ya[kink])[:, None] * aug[kink]
    res = optimize.lsq_linear(A.T, r0, bounds=(0.0, 1.0))
    return float(np.linalg.norm(r0 - A.T @ res.x))


# ---------------------------------------------------------------------------
# Persistence

def save_svm_model(model: SvmModel, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# weighted linear svm",
        f"dim {model.dim}",
        f"bank_checksum {model.bank_checksum or '-'}",
        f"selection_checksum {model.selection_checksum or '-'}",
        f"b {float(model.b)!r}",
        "dropped " + (",".join(str(i) for i in model.dropped) if model.dropped else "-"),
    ]
    for i, idx in enumerate(model.kept):
        lines.append(f"{idx} {float(model.mean[i])!r} {float(model.std[i])!r} {float(model.w[i])!r}")
    path.write_text("\n".join(lines) + "\n")


def load_svm_model(path, expect_bank_checksum: str | None = None) -> SvmModel:
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    header = dict(l.split(None, 1) for l in lines[:5])
    bank_checksum = "" if header["bank_checksum"] == "-" else header["bank_checksum"]
    if expect_bank_checksum is not None and bank_checksum and bank_checksum != expect_bank_checksum:
        raise ValueError(f"{path}: model was trained on a different filter bank")
    dropped_field = header["dropped"]
    dropped = () if dropped_field == "-" else tuple(int(v) for v in dropped_field.split(","))
    kept, mean, std, w = [], [], [], []
    for line in lines[5:]:
        idx, m, s, wv = line.split()
        kept.append(int(idx))
        mean.append(float(m))
        std.append(float(s))
        w.append(float(wv))
    return SvmModel(
        dim=int(header["dim"]),
        kept=tuple(kept),
        mean=np.array(mean),
        std=np.array(std),
        w=np.array(w),
        b=float(header["b"]),
        bank_checksum=bank_checksum,
        selection_checksum="" if header["selection_checksum"] == "-" else header["selection_checksum"],
        dropped=dropped,
    )
