"""Exact spectra of ``H[h]``, the bandwidth-rescaled annealing gap and its minimum."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .spin_core import MAX_SPINS, TRANSVERSE_SIGN, SpinInstance, apply_hamiltonian, dense_hamiltonian

DEFAULT_GRID_POINTS = 128
GOLDEN_TOL = 1e-4
DENSE_GROUND_STATE_MAX_DIM = 256

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class EigensolverError(RuntimeError):
    pass


def default_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def full_spectrum(instance: SpinInstance, h: float, vectors: bool = False, sign: float = TRANSVERSE_SIGN):
    """All ``2**N`` eigenvalues of ``H[h]`` in ascending order (and eigenvectors if asked)."""
    if instance.n_spins > MAX_SPINS:
        raise ValueError(f"dense spectra limited to N <= {MAX_SPINS}")
    H = dense_hamiltonian(instance, h, sign)
    try:
        if vectors:
            return np.linalg.eigh(H)
        return np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(f"eigensolver failed at h={h}: {exc}") from exc


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def ground_state(instance: SpinInstance, h: float, sign: float = TRANSVERSE_SIGN):
    """Lowest eigenpair of ``H[h]``, phase-fixed so the largest component is real positive."""
    if instance.dim <= DENSE_GROUND_STATE_MAX_DIM:
        evals, evecs = full_spectrum(instance, h, vectors=True, sign=sign)
        return float(evals[0]), _fix_phase(evecs[:, 0].astype(np.complex128))
    op = spla.LinearOperator(
        (instance.dim, instance.dim),
        matvec=lambda v: apply_hamiltonian(instance, h, np.ravel(v), sign),
        dtype=np.float64,
    )
    # deterministic start vector keeps repeated runs bit-identical
    v0 = np.linspace(1.0, 2.0, instance.dim)
    try:
        evals, evecs = spla.eigsh(op, k=2, which="SA", tol=1e-12, v0=v0, ncv=min(instance.dim, 40))
    except spla.ArpackNoConvergence as exc:  # pragma: no cover
        raise EigensolverError(f"ARPACK did not converge at h={h}") from exc
    order = np.argsort(evals)
    return float(evals[order[0]]), _fix_phase(evecs[:, order[0]].astype(np.complex128))


@dataclass
class GapProfile:
    """Gap data on a grid of fields.

    ``gap`` is ``(e1 - e0) / bandwidth``; ``bandwidth`` is ``E_max - e0``.
    """

    h_grid: np.ndarray
    gap: np.ndarray
    bandwidth: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    instance: Optional[SpinInstance] = field(default=None, repr=False, compare=False)
    sign: float = field(default=TRANSVERSE_SIGN, repr=False, compare=False)

    @property
    def raw_gap(self) -> np.ndarray:
        return self.e1 - self.e0


@dataclass(frozen=True)
class CriticalField:
    h_c_delta: float
    min_gap: float
    grid_index: int
    refined: bool


def gap_at(instance: SpinInstance, h: float, sign: float = TRANSVERSE_SIGN):
    """``(gap, bandwidth, e0, e1)`` at a single field."""
    ev = full_spectrum(instance, h, sign=sign)
    w = ev[-1] - ev[0]
    return (ev[1] - ev[0]) / w, w, ev[0], ev[1]


def gap_profile(instance: SpinInstance, h_grid=None, sign: float = TRANSVERSE_SIGN) -> GapProfile:
    h_grid = default_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    if h_grid.ndim != 1 or h_grid.size == 0:
        raise ValueError("h_grid must be a nonempty vector")
    if h_grid.min() < 0.0 or h_grid.max() > 1.0:
        raise ValueError("h_grid must lie in [0, 1]")
    if np.any(np.diff(h_grid) <= 0):
        raise ValueError("h_grid must be strictly increasing")
    rows = np.array([gap_at(instance, h, sign) for h in h_grid])
    return GapProfile(
        h_grid=h_grid,
        gap=rows[:, 0],
        bandwidth=rows[:, 1],
        e0=rows[:, 2],
        e1=rows[:, 3],
        instance=instance,
        sign=sign,
    )


def golden_section_min(f, a: float, b: float, tol: float = GOLDEN_TOL):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def critical_field(profile: GapProfile, refine: bool = True, tol: float = GOLDEN_TOL) -> CriticalField:
    """Field of minimal gap: grid argmin, then golden-section refinement.

    Refinement needs ``profile.instance``; without it the grid argmin is returned.
    Ties on the grid go to the smaller field.
    """
    if profile.gap.size == 0:
        raise ValueError("empty gap profile")
    k = int(np.argmin(profile.gap))
    h_best, g_best = float(profile.h_grid[k]), float(profile.gap[k])
    if not refine or profile.instance is None or profile.h_grid.size < 2:
        return CriticalField(h_best, g_best, k, False)
    lo = float(profile.h_grid[max(k - 1, 0)])
    hi = float(profile.h_grid[min(k + 1, profile.h_grid.size - 1)])
    inst, sign = profile.instance, profile.sign
    h_ref, g_ref = golden_section_min(lambda h: gap_at(inst, h, sign)[0], lo, hi, tol)
    if g_ref <= g_best:
        return CriticalField(float(h_ref), float(g_ref), k, True)
    return CriticalField(h_best, g_best, k, False)


# --- persistence -----------------------------------------------------------

PROFILE_HEADER = ["h", "gap", "bandwidth", "e0", "e1"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def profile_rows(profile: GapProfile):
    for row in zip(profile.h_grid, profile.gap, profile.bandwidth, profile.e0, profile.e1):
        yield [_fmt(v) for v in row]


def save_profile(profile: GapProfile, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_HEADER)
        writer.writerows(profile_rows(profile))
    return path


def load_profile(path, instance: Optional[SpinInstance] = None) -> GapProfile:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PROFILE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    return GapProfile(*(data[:, i] for i in range(5)), instance=instance)
