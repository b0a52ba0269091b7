"""Sparse coefficient fitting and the parsimony-penalized fitness.

STRidge alternates ridge regression on unit-normalized columns with hard
thresholding of small coefficients, then debiases the surviving support
with a final ordinary least-squares fit in the original column scale.
The fitness of a fitted candidate is

    score = (1 - lam * n_active_terms) / (1 + nrmse_train)

so equal-accuracy candidates are ranked by parsimony.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateProblem, ZeroVariance
from .numerics import RegressionProblem


@dataclass(frozen=True)
class StridgeConfig:
    ridge_alpha: float = 1e-5
    threshold: float = 1e-2
    max_iters: int = 10
    lambda_parsimony: float = 0.01

    def __post_init__(self):
        for name in ("ridge_alpha", "threshold", "lambda_parsimony"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one STRidge fit; coefficients off the support are 0."""

    coefficients: tuple[float, ...]
    support: tuple[int, ...]
    nrmse_train: float
    r2_train: float
    score: float
    nrmse_test: Optional[float] = None
    r2_test: Optional[float] = None
    degenerate: bool = False
    support_trace: tuple[tuple[int, ...], ...] = field(default=(), repr=False)


def nrmse(predicted: Sequence[float], target: Sequence[float]) -> float:
    """Root mean squared error normalized by the target's population std."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape or t.size < 2:
        raise ValueError("predicted/target must be equal-length vectors (n >= 2)")
    var = float(np.mean((t - t.mean()) ** 2))
    if var <= 0.0:
        raise ZeroVariance("target variance is zero")
    return float(np.sqrt(np.mean((p - t) ** 2) / var))


def r_squared(predicted: Sequence[float], target: Sequence[float]) -> float:
    """Coefficient of determination; equals 1 - nrmse**2 by construction."""
    return 1.0 - nrmse(predicted, target) ** 2


def fitness(nrmse_train: float, n_terms: int, lam: float) -> float:
    """Composite accuracy/parsimony score; higher is better."""
    if nrmse_train < 0 or n_terms < 0:
        raise ValueError("nrmse and term count must be non-negative")
    return (1.0 - lam * n_terms) / (1.0 + nrmse_train)


def _ridge(A: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    d = A.shape[1]
    if alpha > 0:
        return np.linalg.solve(A.T @ A + alpha * np.eye(d), A.T @ y)
    return np.linalg.lstsq(A, y, rcond=None)[0]


def stridge(p: RegressionProblem, cfg: StridgeConfig = StridgeConfig()) -> FitResult:
    """Sequential threshold ridge regression on one problem.

    Columns are scaled to unit 2-norm before thresholding so the threshold
    is comparable across terms; reported coefficients are in the original
    scale. If every column is thresholded away the result is the empty
    model (zero predictor). Rank-deficient supports are repaired by
    dropping dependent columns and flagging the result.
    """
    theta = p.matrix()
    y = np.asarray(p.target, dtype=np.float64)
    n, d = theta.shape
    if d < 1:
        raise DegenerateProblem("no candidate columns")
    if n <= d:
        raise DegenerateProblem(f"{n} samples cannot fit {d} columns")

    norms = np.linalg.norm(theta, axis=0)
    degenerate = bool(np.any(norms <= 1e-300))
    valid = np.flatnonzero(norms > 1e-300)
    theta_n = theta[:, valid] / norms[valid]
    # target scaled to unit norm as well, so thresholded weights are
    # dimensionless contribution fractions and the default cutoff is portable
    y_scale = np.linalg.norm(y)
    y_n = y / y_scale if y_scale > 0 else y

    support = list(range(valid.size))
    trace: list[tuple[int, ...]] = [tuple(int(valid[j]) for j in support)]
    xi = _ridge(theta_n, y_n, cfg.ridge_alpha) if support else np.zeros(0)
    for _ in range(cfg.max_iters if support else 0):
        keep = [j for j, w in zip(support, xi) if abs(w) >= cfg.threshold]
        if keep == support:
            break
        support = keep
        trace.append(tuple(int(valid[j]) for j in support))
        if not support:
            break
        xi = _ridge(theta_n[:, support], y_n, cfg.ridge_alpha)

    coeffs = np.zeros(d)
    final = [int(valid[j]) for j in support]
    if final:
        sub = theta[:, final]
        sol, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(final):
            # keep a maximal independent subset, preferring leading columns
            _, _, piv = scipy.linalg.qr(sub, mode="economic", pivoting=True)
            final = sorted(int(final[j]) for j in piv[:rank])
            sub = theta[:, final]
            sol = np.linalg.lstsq(sub, y, rcond=None)[0]
            degenerate = True
        coeffs[final] = sol
        predicted = sub @ coeffs[final]
    else:
        predicted = np.zeros(n)

    err = nrmse(predicted, y)
    return FitResult(
        coefficients=tuple(float(c) for c in coeffs),
        support=tuple(final),
        nrmse_train=err,
        r2_train=1.0 - err**2,
        score=fitness(err, len(final), cfg.lambda_parsimony),
        degenerate=degenerate,
        support_trace=tuple(trace),
    )


def evaluate_coefficients(p: RegressionProblem,
                          coefficients: Sequence[float]) -> tuple[float, float]:
    """(nrmse, r2) of fixed coefficients on another split's problem."""
    theta = p.matrix()
    c = np.asarray(coefficients, dtype=np.float64)
    if c.size != theta.shape[1]:
        raise ValueError("coefficient count does not match column count")
    predicted = theta @ c
    err = nrmse(predicted, p.target)
    return err, 1.0 - err**2
