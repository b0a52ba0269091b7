"""Gaussian-process surrogate over the discrete strategy space.

Fitness observations are standardized, a GP is fit with grid-searched
hyperparameters (exact log marginal likelihood), and the next strategy is
the Expected Improvement argmax over all arms. Two kernels are available:

* IndexRBF embeds strategy k at the scalar k/K and applies a squared-
  exponential kernel, so adjacent indices correlate (the shipped bank is
  ordered in category blocks to make that adjacency meaningful).
* Categorical treats arms as exchangeable: unit self-covariance and a
  small constant cross-covariance between distinct arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InsufficientData

JITTER = 1e-8
CATEGORICAL_CROSS = 0.1
LENGTHSCALE_GRID = (0.05, 0.1, 0.2, 0.4, 0.8)
NOISE_GRID = (1e-4, 1e-2, 1e-1)


class Kernel(Enum):
    INDEX_RBF = "IndexRBF"
    CATEGORICAL = "Categorical"


@dataclass(frozen=True)
class Observation:
    strategy_id: int
    fitness: float


@dataclass(frozen=True)
class GPState:
    """Fitted surrogate; immutable, safe to share across threads."""

    observations: tuple[Observation, ...]
    kernel: Kernel
    n_arms: int
    lengthscale: float
    signal_var: float
    noise_var: float
    y_mean: float
    y_std: float
    log_marginal: float
    chol: np.ndarray
    alpha: np.ndarray


def _kernel_matrix(kernel: Kernel, ids_a: np.ndarray, ids_b: np.ndarray,
                   n_arms: int, lengthscale: float, signal_var: float) -> np.ndarray:
    if kernel is Kernel.INDEX_RBF:
        xa = ids_a / n_arms
        xb = ids_b / n_arms
        sq = (xa[:, None] - xb[None, :]) ** 2
        return signal_var * np.exp(-sq / (2.0 * lengthscale**2))
    same = ids_a[:, None] == ids_b[None, :]
    return signal_var * np.where(same, 1.0, CATEGORICAL_CROSS)


def log_marginal_likelihood(obs: Sequence[Observation], kernel: Kernel,
                            n_arms: int, lengthscale: float,
                            noise_var: float) -> float:
    """Exact GP log evidence on standardized targets (signal_var = 1)."""
    ids = np.array([o.strategy_id for o in obs], dtype=np.float64)
    y = np.array([o.fitness for o in obs], dtype=np.float64)
    y_mean = float(y.mean())
    y_std = float(y.std())
    ys = (y - y_mean) / (y_std if y_std > 1e-12 else 1.0)
    K = _kernel_matrix(Kernel(kernel), ids, ids, n_arms, lengthscale, 1.0)
    K[np.diag_indices_from(K)] += noise_var + JITTER
    L = np.linalg.cholesky(K)
    a = scipy.linalg.solve_triangular(L, ys, lower=True)
    n = ys.size
    return float(
        -0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    )


def fit_gp(obs: Sequence[Observation], kernel: Kernel, K: int) -> GPState:
    """Fit the surrogate, grid-searching lengthscale and noise by evidence.

    Ties in the evidence resolve to the earliest grid point, keeping the
    fit deterministic.
    """
    obs = tuple(obs)
    if len(obs) < 2:
        raise InsufficientData(f"{len(obs)} observations; need at least 2")
    kernel = Kernel(kernel)
    ids = np.array([o.strategy_id for o in obs], dtype=np.float64)
    y = np.array([o.fitness for o in obs], dtype=np.float64)
    y_mean = float(y.mean())
    y_std = float(y.std())
    scale = y_std if y_std > 1e-12 else 1.0
    ys = (y - y_mean) / scale

    lengthscales = LENGTHSCALE_GRID if kernel is Kernel.INDEX_RBF else (1.0,)
    best = None
    for ls in lengthscales:
        base = _kernel_matrix(kernel, ids, ids, K, ls, 1.0)
        for noise in NOISE_GRID:
            Km = base.copy()
            Km[np.diag_indices_from(Km)] += noise + JITTER
            L = np.linalg.cholesky(Km)
            a = scipy.linalg.solve_triangular(L, ys, lower=True)
            lml = float(
                -0.5 * a @ a
                - np.log(np.diag(L)).sum()
                - 0.5 * ys.size * math.log(2 * math.pi)
            )
            if best is None or lml > best[0]:
                alpha = scipy.linalg.solve_triangular(L.T, a, lower=False)
                best = (lml, ls, noise, L, alpha)

    lml, ls, noise, L, alpha = best
    return GPState(
        observations=obs,
        kernel=kernel,
        n_arms=K,
        lengthscale=ls,
        signal_var=1.0,
        noise_var=noise,
        y_mean=y_mean,
        y_std=scale,
        log_marginal=lml,
        chol=L,
        alpha=alpha,
    )


def posterior(gp: GPState, k: int) -> tuple[float, float]:
    """Noise-inclusive posterior (mean, stddev) at arm k, de-standardized."""
    if not 1 <= k <= gp.n_arms:
        raise ValueError(f"strategy id {k} outside 1..{gp.n_arms}")
    ids = np.array([o.strategy_id for o in gp.observations], dtype=np.float64)
    k_star = _kernel_matrix(
        gp.kernel, np.array([float(k)]), ids, gp.n_arms, gp.lengthscale,
        gp.signal_var,
    )[0]
    mu_s = float(k_star @ gp.alpha)
    v = scipy.linalg.solve_triangular(gp.chol, k_star, lower=True)
    var_s = gp.signal_var + gp.noise_var + JITTER - float(v @ v)
    sigma_s = math.sqrt(max(var_s, 0.0))
    return gp.y_mean + gp.y_std * mu_s, gp.y_std * sigma_s


def expected_improvement(mu: float, sigma: float, y_star: float) -> float:
    """E[max(y - y_star, 0)] for y ~ N(mu, sigma^2); exact when sigma = 0."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    gain = mu - y_star
    if sigma == 0.0:
        return max(gain, 0.0)
    z = gain / sigma
    cdf = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return gain * cdf + sigma * pdf


def select_strategy(gp: GPState, K: int, y_star: float) -> int:
    """EI argmax over arms 1..K; ties break to the lowest index."""
    best_k, best_ei = 1, -math.inf
    for k in range(1, K + 1):
        mu, sigma = posterior(gp, k)
        ei = expected_improvement(mu, sigma, y_star)
        if ei > best_ei:
            best_k, best_ei = k, ei
    return best_k
