"""Sudden quenches under a fixed field and their time-averaged order parameters.

Two quench types:

* switch-on: start in the classical solution (ground state of ``H[0]``), evolve
  under ``H[h_f]`` and track ``G(t) = (1/N) sum_i m_i <sigma^z_i>(t)`` where
  ``m_i = +-1`` is the solution's magnetization;
* switch-off: start in the driver ground state (ground state of ``H[1]``),
  evolve under ``H[h_f]`` and track ``X(t) = (1/N) sum_i <sigma^x_i>(t)``.

The dynamical quench parameter (DQP) is the trapezoidal time average of the
observable over ``[0, tau]`` sampled at every propagation step.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .spin_core import (
    TRANSVERSE_SIGN,
    SpinInstance,
    StructureError,
    basis_state,
    magnetizations_z,
    spin_values,
    transverse_ground_state,
)

DEFAULT_TAU = 20.0
DEFAULT_DT = 0.02
REGRESSION_POINTS = 20
NN_POINTS = 128
# constant-field quenches below this dimension use the exact eigendecomposition propagator
DENSE_QUENCH_MAX_DIM = 256


class QuenchKind(str, Enum):
    SWITCH_ON = "switch_on"
    SWITCH_OFF = "switch_off"


_KIND_OF_DQP = {"G": QuenchKind.SWITCH_ON, "X": QuenchKind.SWITCH_OFF}


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuenchSpec:
    kind: QuenchKind
    h_f: float
    tau: float = DEFAULT_TAU
    dt: float = DEFAULT_DT

    def __post_init__(self):
        object.__setattr__(self, "kind", QuenchKind(self.kind))
        if self.kind is QuenchKind.SWITCH_ON and not 0.0 < self.h_f <= 1.0:
            raise ValueError(f"switch-on needs 0 < h_f <= 1, got {self.h_f}")
        if self.kind is QuenchKind.SWITCH_OFF and not 0.0 <= self.h_f < 1.0:
            raise ValueError(f"switch-off needs 0 <= h_f < 1, got {self.h_f}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.tau < 10 * self.dt:
            raise ValueError("tau must be at least 10 * dt")


@dataclass
class DQPCurve:
    kind: str  # "G" or "X"
    h_f_grid: np.ndarray
    values: np.ndarray
    seed: Optional[int] = None
    n_spins: Optional[int] = None
    tau: float = DEFAULT_TAU
    dt: float = DEFAULT_DT


# --- propagation -----------------------------------------------------------


def _check_normalized(psi: np.ndarray):
    if not np.all(np.isfinite(psi)):
        raise PropagationError("non-finite amplitudes")


def _fields(instance: SpinInstance, h: float, sign: float):
    diag = np.ascontiguousarray((1.0 - h) * instance.diagonal)
    return diag, sign * h * instance.coupling


def evolve(
    instance: SpinInstance,
    h: float,
    psi0,
    t: float,
    method: str = "krylov",
    sign: float = TRANSVERSE_SIGN,
    m_max: int = _kernels.KRYLOV_DIM,
    tol: float = _kernels.KRYLOV_TOL,
) -> np.ndarray:
    """``exp(-i H[h] t) psi0``.

    ``method="krylov"`` is the matrix-free Lanczos propagator; ``"dense"``
    diagonalizes the materialized Hamiltonian and is meant for small N.
    """
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    if psi0.shape != (instance.dim,):
        raise StructureError(f"state has shape {psi0.shape}, expected ({instance.dim},)")
    if method == "krylov":
        diag, off = _fields(instance, h, sign)
        out = _kernels.ACTIVE.krylov_expm(diag, off, instance.n_spins, psi0, float(t), m_max, tol)
    elif method == "dense":
        out = dense_propagator(instance, h, t, sign) @ psi0
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    _check_normalized(out)
    return out


def dense_propagator(instance: SpinInstance, h: float, t: float, sign: float = TRANSVERSE_SIGN) -> np.ndarray:
    from .spin_core import dense_hamiltonian

    evals, evecs = np.linalg.eigh(dense_hamiltonian(instance, h, sign))
    return (evecs * np.exp(-1j * evals * t)) @ evecs.T


# --- observables -----------------------------------------------------------


def solution_magnetization(instance: SpinInstance) -> np.ndarray:
    if instance.solution is None:
        raise StructureError("G observable needs an instance with a recorded solution")
    return np.array([1.0 if c == "1" else -1.0 for c in instance.solution])


def g_weights(instance: SpinInstance) -> np.ndarray:
    """Diagonal of the G operator: ``(1/N) sum_i m_i s_i(b)`` per basis state."""
    return spin_values(instance.n_spins) @ solution_magnetization(instance) / instance.n_spins


def g_observable(instance: SpinInstance, psi_t) -> float:
    return float(np.dot(solution_magnetization(instance), magnetizations_z(psi_t)) / instance.n_spins)


def x_observable(psi_t) -> float:
    psi_t = np.ascontiguousarray(psi_t, dtype=np.complex128)
    n = psi_t.shape[0].bit_length() - 1
    return _kernels.ACTIVE.expect(psi_t, np.zeros(psi_t.shape[0]), 1.0 / n, n)


def _setup(instance: SpinInstance, kind: QuenchKind, sign: float):
    n = instance.n_spins
    if kind is QuenchKind.SWITCH_ON:
        return basis_state(instance.solution_index, n), g_weights(instance), 0.0
    # measure sigma^x along the driver ground-state axis so both sign conventions agree
    return transverse_ground_state(n, sign), np.zeros(instance.dim), -sign / n


def _dense_trace(instance, h, psi0, dt, n_steps, obs_diag, flip_coef, sign):
    """Exact propagation through the eigenbasis of the materialized ``H[h]``.

    The observable is rotated into the eigenbasis once, so each time sample
    costs one row of a matrix product.
    """
    from .spin_core import dense_hamiltonian

    evals, evecs = np.linalg.eigh(dense_hamiltonian(instance, h, sign))
    obs = (evecs.T * obs_diag) @ evecs
    if flip_coef != 0.0:
        flipped = np.zeros_like(evecs)
        for i in range(instance.n_spins):
            flipped += evecs.reshape(-1, 2, 1 << i, evecs.shape[1])[:, ::-1].reshape(evecs.shape)
        obs += flip_coef * (evecs.T @ flipped)
    coeffs = evecs.T @ psi0
    times = dt * np.arange(n_steps + 1)
    theta = np.outer(times, evals)
    cos, sin = np.cos(theta), np.sin(theta)
    z_re = cos * coeffs.real + sin * coeffs.imag
    z_im = cos * coeffs.imag - sin * coeffs.real
    values = np.einsum("kb,kb->k", z_re, z_re @ obs) + np.einsum("kb,kb->k", z_im, z_im @ obs)
    return values, evecs @ (z_re[-1] + 1j * z_im[-1])


def observable_trace(instance: SpinInstance, spec: QuenchSpec, method: str = "auto", sign: float = TRANSVERSE_SIGN):
    """Times and observable values ``O(t_k)`` for one quench, ``t_k = k * tau / n_steps``."""
    n_steps = int(math.ceil(spec.tau / spec.dt - 1e-9))
    dt = spec.tau / n_steps
    psi0, obs_diag, flip_coef = _setup(instance, spec.kind, sign)
    if method == "auto":
        method = "dense" if instance.dim <= DENSE_QUENCH_MAX_DIM else "krylov"
    if method == "krylov":
        diag, off = _fields(instance, spec.h_f, sign)
        values, psi_end = _kernels.ACTIVE.observe_trace(
            diag, off, instance.n_spins, psi0, dt, n_steps, obs_diag, flip_coef,
            _kernels.KRYLOV_DIM, _kernels.KRYLOV_TOL,
        )
    elif method == "dense":
        values, psi_end = _dense_trace(instance, spec.h_f, psi0, dt, n_steps, obs_diag, flip_coef, sign)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    _check_normalized(psi_end)
    return dt * np.arange(n_steps + 1), values


def dqp(instance: SpinInstance, spec: QuenchSpec, method: str = "auto", sign: float = TRANSVERSE_SIGN) -> float:
    """Trapezoidal time average of the quench observable over ``[0, tau]``."""
    times, values = observable_trace(instance, spec, method, sign)
    dt = times[1] - times[0]
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])) / spec.tau)


def preset_grid(kind: str, points: int = REGRESSION_POINTS) -> np.ndarray:
    """``points`` equidistant fields, dropping the stationary anchor of ``kind``.

    The full grid is ``linspace(0, 1, points + 1)``; G omits ``h_f = 0`` and X
    omits ``h_f = 1``, where the initial state does not evolve.
    """
    full = np.linspace(0.0, 1.0, points + 1)
    if kind == "G":
        return full[1:]
    if kind == "X":
        return full[:-1]
    raise ValueError(f"kind must be 'G' or 'X', got {kind!r}")


def dqp_curve(
    instance: SpinInstance,
    kind: str,
    h_f_grid=None,
    tau: float = DEFAULT_TAU,
    dt: float = DEFAULT_DT,
    method: str = "auto",
    sign: float = TRANSVERSE_SIGN,
) -> DQPCurve:
    if kind not in _KIND_OF_DQP:
        raise ValueError(f"kind must be 'G' or 'X', got {kind!r}")
    grid = preset_grid(kind) if h_f_grid is None else np.asarray(h_f_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("h_f grid must be strictly increasing")
    qkind = _KIND_OF_DQP[kind]
    values = np.array([dqp(instance, QuenchSpec(qkind, float(h), tau, dt), method, sign) for h in grid])
    return DQPCurve(kind, grid, values, instance.seed, instance.n_spins, tau, dt)


# --- persistence -----------------------------------------------------------


def save_curve(curve: DQPCurve, path) -> Path:
    """Write ``h_f,value`` CSV plus a ``.json`` sidecar next to it."""
    path = Path(path)
    lines = ["h_f,value"] + [f"{h:.12g},{v:.12g}" for h, v in zip(curve.h_f_grid, curve.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"kind": curve.kind, "tau": curve.tau, "dt": curve.dt, "seed": curve.seed, "n_spins": curve.n_spins}
    path.with_suffix(".json").write_text(json.dumps(meta) + "\n", encoding="utf-8")
    return path


def load_curve(path) -> DQPCurve:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return DQPCurve(meta["kind"], data[:, 0], data[:, 1], meta.get("seed"), meta.get("n_spins"), meta["tau"], meta["dt"])
