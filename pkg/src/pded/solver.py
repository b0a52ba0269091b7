"""Benchmark dataset generation and bit-exact persistence.

Five 1-D benchmark problems are generated from their governing equations:

    burgers      u_t = -u u_x + 0.1 u_xx        x in [-8, 8],  t in [0, 10]
    fisher       u_t = u_xx + u - u^2           x in [-1, 1],  t in [0, 1]
    chafee       u_t = u_xx + u - u^3           x in [0, 3],   t in [0, 0.5]
    divide       u_t = 0.25 u_xx - u_x / x      x in [1, 2],   t in [0, 1]
    allen_cahn   u_t = 0.1 u_xx + 5 (u - u^3)   x in [-10, 10], t in [0, 10]

burgers and allen_cahn are solved pseudo-spectrally (FFT space derivatives,
periodic boundaries) and the solution is sampled onto the inclusive target
grid; the other three use second-order central differences in space. Time
integration is adaptive embedded Runge-Kutta 4(5) at rtol = atol = 1e-8.
Boundary conditions for the finite-difference problems: homogeneous
Neumann for fisher/chafee, Dirichlet pinned at the initial boundary values
for divide. All choices are recorded in the sidecar metadata.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ChecksumMismatch, FormatError, SolverDiverged, StepSizeUnderflow
from .expr import Expression, parse_equation, to_text
from .numerics import Dataset

GENERATOR_VERSION = 1
RTOL = 1e-8
ATOL = 1e-8

_MAGIC = b"PDED"
_HEADER = struct.Struct("<4sIQQdddd")
_TRAILER = struct.Struct("<I")


@dataclass(frozen=True)
class PdeSpec:
    name: str
    x0: float
    x1: float
    t0: float
    t1: float
    nx: int
    nt: int
    parameters: tuple[tuple[str, float], ...]
    scheme: str  # "spectral" | "fd_neumann" | "fd_dirichlet"
    ground_truth_text: str
    ground_truth_coefficients: tuple[float, ...]
    ic_description: str
    ic_seed: int = 0

    @property
    def params(self) -> dict[str, float]:
        return dict(self.parameters)

    @property
    def ground_truth(self) -> tuple[Expression, tuple[float, ...]]:
        return parse_equation(self.ground_truth_text), self.ground_truth_coefficients


_SPECS: dict[str, PdeSpec] = {
    s.name: s
    for s in (
        PdeSpec(
            name="burgers",
            x0=-8.0, x1=8.0, t0=0.0, t1=10.0, nx=256, nt=201,
            parameters=(("nu", 0.1),),
            scheme="spectral",
            ground_truth_text="u_t = -1*u*u_x + 0.1*u_xx",
            ground_truth_coefficients=(-1.0, 0.1),
            ic_description="-sin(pi*x/8)*sech(x/4) smooth pulse",
        ),
        PdeSpec(
            name="fisher",
            x0=-1.0, x1=1.0, t0=0.0, t1=1.0, nx=200, nt=100,
            parameters=(("diffusion", 1.0), ("growth", 1.0)),
            scheme="fd_neumann",
            ground_truth_text="u_t = 1*u - 1*u^2 + 1*u_xx",
            ground_truth_coefficients=(1.0, -1.0, 1.0),
            ic_description="sigmoid step 1/(1+exp(x/0.25))",
        ),
        PdeSpec(
            name="chafee",
            x0=0.0, x1=3.0, t0=0.0, t1=0.5, nx=301, nt=200,
            parameters=(("diffusion", 1.0), ("growth", 1.0)),
            scheme="fd_neumann",
            ground_truth_text="u_t = 1*u - 1*u^3 + 1*u_xx",
            ground_truth_coefficients=(1.0, -1.0, 1.0),
            ic_description="0.5 + 0.5*cos(2*pi*x/3)",
        ),
        PdeSpec(
            name="divide",
            x0=1.0, x1=2.0, t0=0.0, t1=1.0, nx=100, nt=251,
            parameters=(("diffusion", 0.25),),
            scheme="fd_dirichlet",
            ground_truth_text="u_t = -1*u_x*1/x + 0.25*u_xx",
            ground_truth_coefficients=(-1.0, 0.25),
            ic_description="sin(pi*(x-1)) + 1",
        ),
        PdeSpec(
            name="allen_cahn",
            x0=-10.0, x1=10.0, t0=0.0, t1=10.0, nx=256, nt=201,
            parameters=(("diffusion", 0.1), ("reaction", 5.0)),
            scheme="spectral",
            ground_truth_text="u_t = 5*u - 5*u^3 + 0.1*u_xx",
            ground_truth_coefficients=(5.0, -5.0, 0.1),
            ic_description="sin(2*pi*x/L) + 0.5*cos(4*pi*x/L) + eps, "
                           "eps ~ U(0, 0.2) drawn once per dataset",
        ),
    )
}

_ALIASES = {
    "allencahn": "allen_cahn",
    "allen-cahn": "allen_cahn",
    "pde_divide": "divide",
    "chafee_infante": "chafee",
    "chafee-infante": "chafee",
}


def pde_names() -> tuple[str, ...]:
    return tuple(_SPECS)


def pde_spec(name: str) -> PdeSpec:
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    key = _ALIASES.get(key, key)
    if key not in _SPECS:
        raise KeyError(f"unknown pde '{name}'; expected one of {sorted(_SPECS)}")
    return _SPECS[key]


def ground_truth_for(dataset_name: str) -> Optional[tuple[Expression, tuple[float, ...]]]:
    """Ground-truth skeleton/coefficients for a known dataset name, else None."""
    try:
        return pde_spec(dataset_name).ground_truth
    except KeyError:
        return None


# ----------------------------------------------------------------------
# initial conditions
# ----------------------------------------------------------------------

def _ic_values(spec: PdeSpec, x: np.ndarray) -> np.ndarray:
    if spec.name == "burgers":
        return -np.sin(np.pi * x / 8.0) / np.cosh(x / 4.0)
    if spec.name == "fisher":
        # width 0.25 keeps the relaxation of the step resolvable at the
        # stored time spacing
        return 1.0 / (1.0 + np.exp(x / 0.25))
    if spec.name == "chafee":
        # zero-slope at both walls (Neumann-compatible); the offset keeps
        # the cubic term well excited
        return 0.5 + 0.5 * np.cos(2.0 * np.pi * x / 3.0)
    if spec.name == "divide":
        return np.sin(np.pi * (x - 1.0)) + 1.0
    if spec.name == "allen_cahn":
        from .rng import SeededStream

        L = spec.x1 - spec.x0
        eps = 0.2 * SeededStream(spec.ic_seed).uniform()
        return (
            np.sin(2.0 * np.pi * x / L)
            + 0.5 * np.cos(4.0 * np.pi * x / L)
            + eps
        )
    raise KeyError(spec.name)


# ----------------------------------------------------------------------
# spectral machinery (periodic problems)
# ----------------------------------------------------------------------

def spectral_derivative(v: np.ndarray, length: float, order: int) -> np.ndarray:
    """Derivative of samples on a uniform periodic grid via the FFT."""
    m = v.shape[0]
    k = 2.0 * np.pi * np.fft.rfftfreq(m, d=length / m)
    mult = (1j * k) ** order
    if order % 2 == 1 and m % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0  # odd derivative of the Nyquist mode is not representable
    return np.fft.irfft(mult * np.fft.rfft(v, axis=0), n=m, axis=0)


def _spectral_rhs(spec: PdeSpec, m: int) -> Callable[[float, np.ndarray], np.ndarray]:
    L = spec.x1 - spec.x0
    k = 2.0 * np.pi * np.fft.rfftfreq(m, d=L / m)
    k1 = 1j * k
    if m % 2 == 0:
        k1 = k1.copy()
        k1[-1] = 0.0
    k2 = -(k**2)
    if spec.name == "burgers":
        nu = spec.params["nu"]

        def rhs(t, u):
            uh = np.fft.rfft(u)
            return -u * np.fft.irfft(k1 * uh, n=m) + nu * np.fft.irfft(k2 * uh, n=m)

        return rhs
    if spec.name == "allen_cahn":
        d = spec.params["diffusion"]
        r = spec.params["reaction"]

        def rhs(t, u):
            uxx = np.fft.irfft(k2 * np.fft.rfft(u), n=m)
            return d * uxx + r * (u - u**3)

        return rhs
    raise ValueError(f"{spec.name} is not a spectral problem")


def spectral_solve(spec: PdeSpec, n_points: int,
                   ic_override: Optional[np.ndarray] = None
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate a periodic problem on its natural grid of n_points.

    Returns (x_solver, t, u) where x_solver covers [x0, x1) and u has shape
    (n_points, nt). Used directly by self-convergence checks; dataset
    generation resamples this solution onto the inclusive target grid.
    """
    L = spec.x1 - spec.x0
    x_s = spec.x0 + (L / n_points) * np.arange(n_points)
    u0 = np.asarray(ic_override, dtype=np.float64) if ic_override is not None \
        else _ic_values(spec, x_s)
    if u0.shape != x_s.shape:
        raise ValueError("initial condition shape does not match the solver grid")
    t_eval = np.linspace(spec.t0, spec.t1, spec.nt)
    sol = solve_ivp(
        _spectral_rhs(spec, n_points), (spec.t0, spec.t1), u0,
        method="RK45", t_eval=t_eval, rtol=RTOL, atol=ATOL,
    )
    _check_solution(sol)
    return x_s, t_eval, sol.y


def _resample_periodic(u_s: np.ndarray, x0: float, length: float,
                       x_target: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of u_s at x_target."""
    m = u_s.shape[0]
    coeff = np.fft.fft(u_s, axis=0) / m
    kfreq = 2.0 * np.pi * np.fft.fftfreq(m, d=length / m)
    basis = np.exp(1j * np.outer(x_target - x0, kfreq))
    return np.real(basis @ coeff)


# ----------------------------------------------------------------------
# finite-difference machinery (bounded problems)
# ----------------------------------------------------------------------

def _fd_rhs(spec: PdeSpec, x: np.ndarray) -> Callable[[float, np.ndarray], np.ndarray]:
    dx = x[1] - x[0]
    if spec.name in ("fisher", "chafee"):
        d = spec.params["diffusion"]
        cubic = spec.name == "chafee"

        def rhs(t, u):
            uxx = np.empty_like(u)
            uxx[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
            uxx[0] = 2.0 * (u[1] - u[0]) / dx**2  # mirror ghost: u_x = 0
            uxx[-1] = 2.0 * (u[-2] - u[-1]) / dx**2
            reaction = u - (u**3 if cubic else u**2)
            return d * uxx + reaction

        return rhs
    if spec.name == "divide":
        d = spec.params["diffusion"]
        inv_x = 1.0 / x

        def rhs(t, u):
            out = np.zeros_like(u)
            uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
            ux = (u[2:] - u[:-2]) / (2 * dx)
            out[1:-1] = d * uxx - inv_x[1:-1] * ux
            return out  # boundaries pinned at their initial values

        return rhs
    raise ValueError(f"{spec.name} is not a finite-difference problem")


def _check_solution(sol) -> None:
    if not sol.success:
        msg = str(sol.message)
        if "step size" in msg.lower():
            raise StepSizeUnderflow(msg)
        raise SolverDiverged(msg)
    if not np.all(np.isfinite(sol.y)):
        raise SolverDiverged("integration produced non-finite state")


# ----------------------------------------------------------------------
# generation and persistence
# ----------------------------------------------------------------------

def generate(spec: PdeSpec,
             ic_override: Optional[np.ndarray] = None) -> Dataset:
    """Solve one benchmark problem and package it as a Dataset.

    ic_override replaces the documented initial condition with explicit
    values on the solver grid (the periodic grid for spectral problems,
    the inclusive grid otherwise); used for fixed-point checks.
    """
    x_target = np.linspace(spec.x0, spec.x1, spec.nx)
    if spec.scheme == "spectral":
        _, _, u_s = spectral_solve(spec, spec.nx, ic_override)
        u = _resample_periodic(u_s, spec.x0, spec.x1 - spec.x0, x_target)
        bcs = "periodic"
    else:
        u0 = np.asarray(ic_override, dtype=np.float64) if ic_override is not None \
            else _ic_values(spec, x_target)
        if u0.shape != x_target.shape:
            raise ValueError("initial condition shape does not match the grid")
        t_eval = np.linspace(spec.t0, spec.t1, spec.nt)
        sol = solve_ivp(
            _fd_rhs(spec, x_target), (spec.t0, spec.t1), u0,
            method="RK45", t_eval=t_eval, rtol=RTOL, atol=ATOL,
        )
        _check_solution(sol)
        u = sol.y
        bcs = "homogeneous Neumann" if spec.scheme == "fd_neumann" \
            else "Dirichlet pinned at initial boundary values"

    gt_expr, gt_coeffs = spec.ground_truth
    metadata = {
        "pde": spec.name,
        "parameters": spec.params,
        "bcs": bcs,
        "solver": {
            "time_stepper": "RK45",
            "rtol": RTOL,
            "atol": ATOL,
            "space": "pseudo-spectral" if spec.scheme == "spectral"
                     else "second-order central differences",
        },
        "ic": spec.ic_description,
        "ic_seed": spec.ic_seed,
        "generator_version": GENERATOR_VERSION,
        "ground_truth": to_text(gt_expr, gt_coeffs),
        "ground_truth_skeleton": to_text(gt_expr),
    }
    return Dataset(
        u, spec.x0, spec.x1, spec.t0, spec.t1,
        name=spec.name, train_frac=0.8, metadata=metadata,
    )


def generate_named(name: str, ic_seed: int = 0) -> Dataset:
    """Convenience wrapper: look up the spec, override the seed, solve."""
    spec = dataclasses.replace(pde_spec(name), ic_seed=int(ic_seed))
    return generate(spec)


def save_dataset(d: Dataset, path: Union[str, Path]) -> None:
    """Write the binary container and its JSON sidecar."""
    path = Path(path)
    payload = d.u.tobytes(order="C")
    header = _HEADER.pack(
        _MAGIC, 1, d.nx, d.nt, d.x0, d.x1, d.t0, d.t1
    )
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    path.write_bytes(header + payload + _TRAILER.pack(crc))
    sidecar = {"name": d.name, "train_frac": d.train_frac, **d.metadata}
    Path(str(path) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset container, verifying structure and payload CRC32."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size + _TRAILER.size:
        raise FormatError(f"{path} is truncated")
    magic, version, nx, nt, x0, x1, t0, t1 = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path} has bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"unsupported container version {version}")
    expected = _HEADER.size + nx * nt * 8 + _TRAILER.size
    if len(blob) != expected:
        raise FormatError(
            f"{path} has {len(blob)} bytes, expected {expected}"
        )
    payload = blob[_HEADER.size:-_TRAILER.size]
    (crc_stored,) = _TRAILER.unpack(blob[-_TRAILER.size:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise ChecksumMismatch(f"{path} payload CRC mismatch")
    u = np.frombuffer(payload, dtype="<f8").reshape(nx, nt)

    name, train_frac, metadata = path.stem, 0.8, {}
    sidecar = Path(str(path) + ".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        name = meta.pop("name", name)
        train_frac = meta.pop("train_frac", train_frac)
        metadata = meta
    try:
        return Dataset(u, x0, x1, t0, t1, name=name, train_frac=train_frac,
                       metadata=metadata)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
