"""Annealing schedules, time-dependent evolution along them and final fidelities.

A schedule runs the field from ``h(0) = 1`` (driver only) to ``h(T) = 0``
(problem only). Integration uses a constant-field Krylov propagator per step,
evaluated at the step's midpoint field.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import _kernels
from .quench import DQPCurve
from .spectrum import GapProfile, critical_field, ground_state
from .spin_core import TRANSVERSE_SIGN, SpinInstance, basis_state, transverse_ground_state

DEFAULT_DT = 0.005
DEFAULT_SAMPLES = 64
ALPHA_GRID = np.arange(0.0, 15.0 + 1e-9, 0.5)


class SingularProtocolError(ValueError):
    pass


class EstimateUnavailable(ValueError):
    pass


class NoCrossingError(ValueError):
    pass


@dataclass
class Protocol:
    """Field samples ``fields[k] = h(times[k])``.

    ``shape`` is the exact schedule when one exists (linear, quadratic);
    otherwise the schedule is the piecewise-linear interpolant of the samples.
    """

    times: np.ndarray
    fields: np.ndarray
    label: str
    params: dict = field(default_factory=dict)
    shape: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.times.size < 3 or self.times.shape != self.fields.shape:
            raise ValueError("a protocol needs at least 3 matching time/field samples")
        # zero-length cells are allowed: extreme gap weighting makes them instantaneous
        if self.times[0] != 0.0 or self.times[-1] <= 0.0 or np.any(np.diff(self.times) < 0):
            raise ValueError("protocol times must start at 0 and be nondecreasing to T > 0")
        if self.fields[0] != 1.0 or self.fields[-1] != 0.0:
            raise ValueError("protocol must run from h=1 to h=0")
        if np.any(np.diff(self.fields) > 0):
            raise ValueError("protocol fields must be nonincreasing")

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    def field_at(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.total_time)
        if self.shape is not None:
            return np.clip(self.shape(t), 0.0, 1.0)
        return np.interp(t, self.times, self.fields)


def _sampled(T: float, K: int, shape, label: str, params: dict) -> Protocol:
    if T <= 0:
        raise ValueError("T must be positive")
    if K < 2:
        raise ValueError("K must be >= 2")
    times = np.linspace(0.0, T, K + 1)
    fields = np.clip(shape(times), 0.0, 1.0)
    fields[0], fields[-1] = 1.0, 0.0
    return Protocol(times, fields, label, params, shape)


def linear_protocol(T: float, K: int = 128) -> Protocol:
    return _sampled(T, K, lambda t: 1.0 - t / T, "linear", {"T": T})


def quadratic_coefficients(h_c: float, T: float) -> dict:
    """Coefficients of the two parabolas meeting with zero slope at ``t_c = (1 - h_c) T``."""
    if not 0.0 < h_c < 1.0:
        raise ValueError(f"h_c must be in (0, 1), got {h_c}")
    t_c = (1.0 - h_c) * T
    tail = T - t_c
    b1 = -2.0 * (1.0 - h_c) / t_c
    c1 = (1.0 - h_c) / t_c**2
    # h_c * (1 - (t - t_c)^2 / tail^2) expanded in powers of t
    c2 = -h_c / tail**2
    b2 = 2.0 * h_c * t_c / tail**2
    a2 = h_c * (1.0 - t_c**2 / tail**2)
    return {"t_c": t_c, "b1": b1, "c1": c1, "a2": a2, "b2": b2, "c2": c2}


def quadratic_protocol(T: float, h_c: float, K: int = 128) -> Protocol:
    co = quadratic_coefficients(h_c, T)
    t_c, tail = co["t_c"], T - co["t_c"]

    def shape(t):
        t = np.asarray(t, dtype=float)
        early = 1.0 + co["b1"] * t + co["c1"] * t * t
        late = h_c * (1.0 - ((t - t_c) / tail) ** 2)
        return np.where(t < t_c, early, late)

    return _sampled(T, K, shape, "quadratic", {"T": T, "h_c": float(h_c), **co})


def full_gap_dwell_times(gaps: Sequence[float], alpha: float, T: float) -> np.ndarray:
    """Dwell times proportional to ``gap ** -alpha``, summing to ``T``."""
    gaps = np.abs(np.asarray(gaps, dtype=float))
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if np.any(gaps <= 0) or not np.all(np.isfinite(gaps)):
        raise SingularProtocolError("gap profile contains a zero or non-finite gap")
    logw = -alpha * np.log(gaps)
    w = np.exp(logw - logw.max())
    dwell = T * w / w.sum()
    return dwell


def full_gap_protocol(profile: GapProfile, alpha: float, T: float, rescaled: bool = False) -> Protocol:
    """Gap-adapted schedule.

    The field axis is split into as many equal cells as the profile has grid
    points; cell ``i`` (counted from ``h = 1`` downwards) is crossed in the
    dwell time set by the gap of the ``i``-th grid point from the top. ``h(t)``
    is linear inside each cell. ``rescaled=True`` uses the bandwidth-rescaled
    gap instead of ``E_1 - E_0``.
    """
    gaps = profile.gap if rescaled else profile.raw_gap
    dwell = full_gap_dwell_times(gaps[::-1], alpha, T)
    n = dwell.size
    if n < 2:
        raise ValueError("full-gap protocol needs at least two profile points")
    times = np.minimum(np.concatenate([[0.0], np.cumsum(dwell)]), T)
    times[-1] = T
    fields = np.linspace(1.0, 0.0, n + 1)
    return Protocol(times, fields, "fullgap", {"T": T, "alpha": float(alpha), "rescaled": rescaled})


# --- evolution ---------------------------------------------------------------


@dataclass
class AnnealResult:
    times: np.ndarray
    fields: np.ndarray
    fidelity: np.ndarray
    final_fidelity: float
    label: str
    params: dict
    total_time: float
    dt: float
    seed: Optional[int] = None
    norm_drift: float = 0.0


def instantaneous_ground_state(instance: SpinInstance, h: float, sign: float = TRANSVERSE_SIGN) -> np.ndarray:
    if h == 1.0:
        return transverse_ground_state(instance.n_spins, sign)
    if h == 0.0 and instance.solution is not None:
        return basis_state(instance.solution_index, instance.n_spins)
    return ground_state(instance, h, sign)[1]


def anneal_evolve(
    instance: SpinInstance,
    protocol: Protocol,
    dt: float = DEFAULT_DT,
    samples: int = DEFAULT_SAMPLES,
    sign: float = TRANSVERSE_SIGN,
) -> AnnealResult:
    """Integrate along ``protocol`` and record fidelity with the instantaneous ground state.

    Fidelity is sampled at ``samples`` equidistant times including 0 and T.
    Each inter-sample segment is cut into equal steps no longer than ``dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if samples < 2:
        raise ValueError("need at least two fidelity samples")
    T = protocol.total_time
    sample_t = np.linspace(0.0, T, samples)
    sample_h = protocol.field_at(sample_t)
    sample_h[0], sample_h[-1] = 1.0, 0.0
    psi = transverse_ground_state(instance.n_spins, sign)
    diag = np.ascontiguousarray(instance.diagonal, dtype=float)
    fid = np.empty(samples)
    fid[0] = min(1.0, abs(np.vdot(instantaneous_ground_state(instance, 1.0, sign), psi)))
    ks = _kernels.ACTIVE
    for k in range(samples - 1):
        t0, t1 = sample_t[k], sample_t[k + 1]
        n_sub = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        step = (t1 - t0) / n_sub
        mids = protocol.field_at(t0 + step * (np.arange(n_sub) + 0.5))
        psi = ks.evolve_fields(
            diag, float(instance.coupling), float(sign), instance.n_spins, psi,
            np.ascontiguousarray(mids), step, _kernels.KRYLOV_DIM, _kernels.KRYLOV_TOL,
        )
        gs = instantaneous_ground_state(instance, float(sample_h[k + 1]), sign)
        fid[k + 1] = min(1.0, abs(np.vdot(gs, psi)))
    drift = abs(np.linalg.norm(psi) - 1.0)
    return AnnealResult(
        times=sample_t,
        fields=sample_h,
        fidelity=fid,
        final_fidelity=float(fid[-1]),
        label=protocol.label,
        params=dict(protocol.params),
        total_time=T,
        dt=dt,
        seed=instance.seed,
        norm_drift=float(drift),
    )


def final_fidelity(instance: SpinInstance, protocol: Protocol, dt: float = DEFAULT_DT) -> float:
    return anneal_evolve(instance, protocol, dt, samples=2).final_fidelity


# --- critical-field estimates -----------------------------------------------


class FieldSource(str, Enum):
    CONSTANT = "constant"
    TRUE_GAP = "gap"
    FROM_G = "G"
    FROM_X = "X"


@dataclass(frozen=True)
class CriticalFieldEstimate:
    source: FieldSource
    value: float


def half_crossing(h_grid, values, level: float = 0.5) -> float:
    """Largest ``h`` at which the piecewise-linear curve equals ``level``."""
    h = np.asarray(h_grid, dtype=float)
    v = np.asarray(values, dtype=float) - level
    for k in range(h.size - 1, 0, -1):
        a, b = v[k - 1], v[k]
        if b == 0.0:
            return float(h[k])
        if a == 0.0 or (a < 0) != (b < 0):
            return float(h[k - 1] + (h[k] - h[k - 1]) * a / (a - b))
    if h.size and v[0] == 0.0:
        return float(h[0])
    raise EstimateUnavailable("DQP curve never crosses the level")


def critical_field_estimate(source, data=None) -> CriticalFieldEstimate:
    """Slow-down field for the quadratic schedule.

    ``data`` is a :class:`DQPCurve` for the G/X sources and a
    :class:`GapProfile` for the true-gap source. DQP curves are extended with
    their stationary anchor (G = 1 at h = 0, X = 1 at h = 1) before searching
    for the 0.5 crossing.
    """
    source = FieldSource(source)
    if source is FieldSource.CONSTANT:
        return CriticalFieldEstimate(source, 0.5)
    if source is FieldSource.TRUE_GAP:
        if not isinstance(data, GapProfile):
            raise TypeError("true-gap estimate needs a GapProfile")
        value = critical_field(data).h_c_delta
    else:
        if not isinstance(data, DQPCurve):
            raise TypeError("DQP estimate needs a DQPCurve")
        h, v = np.asarray(data.h_f_grid, float), np.asarray(data.values, float)
        if source is FieldSource.FROM_G and h[0] > 0.0:
            h, v = np.concatenate([[0.0], h]), np.concatenate([[1.0], v])
        if source is FieldSource.FROM_X and h[-1] < 1.0:
            h, v = np.concatenate([h, [1.0]]), np.concatenate([v, [1.0]])
        value = half_crossing(h, v)
    if not 0.0 < value < 1.0:
        raise EstimateUnavailable(f"estimate {value} outside (0, 1)")
    return CriticalFieldEstimate(source, float(value))


# --- scaling with system size -------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    n_values: tuple
    t_star: tuple
    slope: float
    intercept: float


def crossing_time(T_list, mean_fidelity, target: float) -> float:
    """First ``T`` at which the (running-max) mean fidelity reaches ``target``.

    The curve is made monotone by a running maximum, then interpolated with a
    shape-preserving cubic.
    """
    T = np.asarray(T_list, dtype=float)
    F = np.maximum.accumulate(np.asarray(mean_fidelity, dtype=float))
    if F[-1] < target:
        raise NoCrossingError(f"mean fidelity never reaches {target} (max {F[-1]:.4f})")
    k = int(np.argmax(F >= target))
    if k == 0:
        if F[0] == target:
            return float(T[0])
        raise NoCrossingError(f"mean fidelity already above {target} at T={T[0]}")
    # strictly increasing copy for interpolation
    keep = np.concatenate([[True], np.diff(F) > 0])
    spline = PchipInterpolator(T[keep], F[keep])
    lo = T[keep][T[keep] <= T[k - 1]].max()
    hi = T[k]
    return float(brentq(lambda x: spline(x) - target, lo, hi, xtol=1e-12))


def fidelity_scaling(table: dict, target: float) -> ScalingFit:
    """Fit ``T* = a N + b`` from ``{N: (T_list, mean_fidelity)}``."""
    ns = sorted(table)
    t_star = [crossing_time(*table[n], target) for n in ns]
    A = np.column_stack([np.asarray(ns, float), np.ones(len(ns))])
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(t_star), rcond=None)
    return ScalingFit(tuple(ns), tuple(t_star), float(a), float(b))


def mean_final_fidelity(instances, protocol_for, T_list, dt: float = DEFAULT_DT) -> np.ndarray:
    """Mean final fidelity over ``instances`` for each ``T``.

    ``protocol_for(instance, T)`` builds the schedule for one run.
    """
    out = []
    for T in T_list:
        out.append(np.mean([final_fidelity(inst, protocol_for(inst, T), dt) for inst in instances]))
    return np.asarray(out)


# --- persistence -------------------------------------------------------------


def save_result(result: AnnealResult, path) -> Path:
    path = Path(path)
    lines = ["t,h,fidelity"] + [
        f"{t:.12g},{h:.12g},{f:.12g}" for t, h, f in zip(result.times, result.fields, result.fidelity)
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {
        "protocol": result.label,
        "parameters": {k: v for k, v in sorted(result.params.items())},
        "T": result.total_time,
        "dt": result.dt,
        "seed": result.seed,
        "final_fidelity": result.final_fidelity,
    }
    path.with_suffix(".json").write_text(json.dumps(meta) + "\n", encoding="utf-8")
    return path
