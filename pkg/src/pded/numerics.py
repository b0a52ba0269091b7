"""Gridded dataset container and regression-input assembly.

A Dataset wraps a dense field u(x, t) on a uniform grid. This module turns
it into sparse-regression inputs: the time-derivative target u_t and one
feature column per candidate term, evaluated on an interior window that
excludes every point touched by one-sided boundary stencils.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import EmptySplit, SingularFactor, UnsupportedOrder
from .expr import Expression, Factor, Term

TRIM_X = 2
TRIM_T = 1


class Axis(Enum):
    X = "x"
    T = "t"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    ALL = "all"


class Dataset:
    """Immutable u(x, t) field with lazily cached derivative matrices."""

    def __init__(self, u, x0, x1, t0, t1, name="dataset", train_frac=0.8,
                 metadata=None):
        u = np.ascontiguousarray(u, dtype=np.float64)
        if u.ndim != 2:
            raise ValueError("u must be a 2-D [nx, nt] array")
        if u.shape[0] < 8 or u.shape[1] < 8:
            raise ValueError("grid must be at least 8x8")
        if not np.all(np.isfinite(u)):
            raise ValueError("u contains non-finite entries")
        if not (x1 > x0 and t1 > t0):
            raise ValueError("domain bounds must be increasing")
        if not 0.0 < train_frac <= 1.0:
            raise ValueError("train_frac must lie in (0, 1]")
        u.setflags(write=False)
        self.u = u
        self.nx, self.nt = u.shape
        self.x0, self.x1 = float(x0), float(x1)
        self.t0, self.t1 = float(t0), float(t1)
        self.dx = (self.x1 - self.x0) / (self.nx - 1)
        self.dt = (self.t1 - self.t0) / (self.nt - 1)
        self.name = str(name)
        self.train_frac = float(train_frac)
        self.metadata = dict(metadata or {})
        self._deriv_cache: dict[tuple[int, Axis], np.ndarray] = {}
        self._field_cache: dict[Factor, np.ndarray] = {}
        self._crc: int | None = None

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def payload_crc32(self) -> int:
        if self._crc is None:
            self._crc = zlib.crc32(self.u.tobytes(order="C")) & 0xFFFFFFFF
        return self._crc

    @property
    def n_train(self) -> int:
        # small slack so train_frac * nt lands on the intended integer
        return int(math.ceil(self.train_frac * self.nt - 1e-9))


def _fd_axis0(u: np.ndarray, h: float, order: int) -> np.ndarray:
    """Second-order finite differences along axis 0 of a 2-D array.

    Interior points use central stencils; boundary rows use second-order
    one-sided stencils.
    """
    n = u.shape[0]
    out = np.empty_like(u)
    if order == 1:
        out[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        out[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
        out[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    elif order == 2:
        out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
        out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2
    elif order == 3:
        out[2:-2] = (
            -0.5 * u[:-4] + u[1:-3] - u[3:-1] + 0.5 * u[4:]
        ) / h**3
        fwd = (-2.5, 9.0, -12.0, 7.0, -1.5)
        for i in (0, 1):
            out[i] = sum(c * u[i + j] for j, c in enumerate(fwd)) / h**3
        for i in (n - 2, n - 1):
            out[i] = -sum(c * u[i - j] for j, c in enumerate(fwd)) / h**3
    else:
        raise UnsupportedOrder(f"order {order} not supported")
    return out


def differentiate(d: Dataset, order: int, axis: Axis) -> np.ndarray:
    """Finite-difference derivative of d.u, cached per (order, axis).

    Spatial derivatives support orders 1-3; the time axis supports order 1
    only. The returned array is read-only and shared across calls.
    """
    axis = Axis(axis)
    if axis is Axis.T and order != 1:
        raise UnsupportedOrder("time axis supports first derivatives only")
    if axis is Axis.X and order not in (1, 2, 3):
        raise UnsupportedOrder(f"order {order} not supported on the x axis")
    key = (order, axis)
    cached = d._deriv_cache.get(key)
    if cached is None:
        if axis is Axis.X:
            cached = _fd_axis0(d.u, d.dx, order)
        else:
            cached = _fd_axis0(d.u.T, d.dt, order).T
        cached.setflags(write=False)
        d._deriv_cache[key] = cached
    return cached


def _factor_field(d: Dataset, f: Factor) -> np.ndarray:
    cached = d._field_cache.get(f)
    if cached is not None:
        return cached
    if f is Factor.U:
        field = d.u
    elif f is Factor.UX:
        field = differentiate(d, 1, Axis.X)
    elif f is Factor.UXX:
        field = differentiate(d, 2, Axis.X)
    elif f is Factor.UXXX:
        field = differentiate(d, 3, Axis.X)
    elif f is Factor.X:
        field = np.broadcast_to(d.x[:, None], d.u.shape)
    elif f is Factor.INV_X:
        field = np.broadcast_to((1.0 / d.x)[:, None], d.u.shape)
    elif f is Factor.SIN_U:
        field = np.sin(d.u)
    else:  # Factor.EXP_U
        field = np.exp(d.u)
    d._field_cache[f] = field
    return field


@dataclass
class RegressionProblem:
    """Flattened regression inputs for one candidate on one split."""

    target: np.ndarray
    columns: dict[Term, np.ndarray]
    n_samples: int
    split_index: int

    def matrix(self) -> np.ndarray:
        return np.column_stack(list(self.columns.values()))


def _time_window(d: Dataset, split: Split) -> tuple[int, int]:
    n_train = d.n_train
    if split is Split.TRAIN:
        lo, hi = 0, n_train
    elif split is Split.TEST:
        lo, hi = n_train, d.nt
    else:
        lo, hi = 0, d.nt
    lo, hi = lo + TRIM_T, hi - TRIM_T
    if hi <= lo:
        raise EmptySplit(f"{split.value} split has no interior time slices")
    return lo, hi


def build_problem(d: Dataset, e: Union[Expression, Sequence[Term]],
                  split: Split = Split.TRAIN) -> RegressionProblem:
    """Assemble target u_t and one feature column per term.

    Accepts either a parsed Expression or any sequence of Terms (candidate
    libraries may exceed the 8-term skeleton cap). The train/test split is
    temporal: the first ceil(train_frac * nt) slices train, the remainder
    test, each trimmed by one slice at both ends; 2 spatial points are
    trimmed at each boundary so every retained row uses central stencils.
    """
    terms = tuple(e.terms) if isinstance(e, Expression) else tuple(e)
    if not terms:
        raise ValueError("at least one term is required")
    if len(set(t.sort_key for t in terms)) != len(terms):
        raise ValueError("duplicate terms in candidate library")
    uses_invx = any(f is Factor.INV_X for t in terms for f, _ in t.factors)
    if uses_invx and not (d.x0 > 0 or d.x1 < 0):
        raise SingularFactor("1/x undefined on a domain crossing x = 0")

    split = Split(split)
    t_lo, t_hi = _time_window(d, split)
    x_lo, x_hi = TRIM_X, d.nx - TRIM_X
    if x_hi <= x_lo:
        raise EmptySplit("grid too narrow after spatial trimming")

    window = np.s_[x_lo:x_hi, t_lo:t_hi]
    target = differentiate(d, 1, Axis.T)[window].ravel()
    columns: dict[Term, np.ndarray] = {}
    for term in terms:
        col = np.ones((x_hi - x_lo) * (t_hi - t_lo))
        for f, exp in term.factors:
            base = _factor_field(d, f)[window].ravel()
            col = col * (base if exp == 1 else base**exp)
        if not np.all(np.isfinite(col)):
            raise SingularFactor(f"term {term.text} is non-finite on {d.name}")
        columns[term] = col
    return RegressionProblem(
        target=target,
        columns=columns,
        n_samples=target.size,
        split_index=d.n_train,
    )
