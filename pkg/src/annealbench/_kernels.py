"""Hot inner loops: matrix-free Hamiltonian action and Krylov propagation.

Two interchangeable backends are built from the same algorithm code:

* ``numba``: explicit loops compiled with ``@njit``.
* ``numpy``: vectorized bit-flip sweeps, interpreted.

The numba backend is the default when numba imports. Set
``ANNEALBENCH_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for the benchmark in ``benchmarks/bench_kernels.py``).

Conventions shared by every kernel: the Hamiltonian is ``diag + offdiag * F``
where ``diag`` is a real vector over the ``2**n`` basis states and ``F`` is the
sum of single-spin flips ``sum_i sigma^x_i``. Bit ``i`` of a basis index is
spin ``i``.
"""

import os
import types
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLE = os.environ.get("ANNEALBENCH_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

KRYLOV_DIM = 30
KRYLOV_TOL = 1e-12


# ---------------------------------------------------------------------------
# numba primitives
# ---------------------------------------------------------------------------


def _flip_sum_loop(psi, n_spins, out):
    dim = psi.shape[0]
    for b in range(dim):
        acc = psi[b ^ 1]
        for i in range(1, n_spins):
            acc += psi[b ^ (1 << i)]
        out[b] = acc
    return out


def _matvec_loop(diag, offdiag, n_spins, psi, out):
    dim = psi.shape[0]
    for b in range(dim):
        acc = psi[b ^ 1]
        for i in range(1, n_spins):
            acc += psi[b ^ (1 << i)]
        out[b] = diag[b] * psi[b] + offdiag * acc
    return out


def _axpy_loop(a, x, y):
    for b in range(y.shape[0]):
        y[b] += a * x[b]


def _expect_loop(psi, obs_diag, flip_coef, n_spins):
    dim = psi.shape[0]
    total = 0.0
    for b in range(dim):
        p = psi[b]
        total += (p.real * p.real + p.imag * p.imag) * obs_diag[b]
        if flip_coef != 0.0:
            acc = psi[b ^ 1]
            for i in range(1, n_spins):
                acc += psi[b ^ (1 << i)]
            total += flip_coef * (p.real * acc.real + p.imag * acc.imag)
    return total


# ---------------------------------------------------------------------------
# numpy primitives
# ---------------------------------------------------------------------------


def _flip_sum_vec(psi, n_spins, out):
    out[:] = 0.0
    for i in range(n_spins):
        out += psi.reshape(-1, 2, 1 << i)[:, ::-1, :].reshape(-1)
    return out


def _matvec_vec(diag, offdiag, n_spins, psi, out):
    _flip_sum_vec(psi, n_spins, out)
    out *= offdiag
    out += diag * psi
    return out


def _axpy_vec(a, x, y):
    y += a * x


def _expect_vec(psi, obs_diag, flip_coef, n_spins):
    total = float(np.dot(psi.real**2 + psi.imag**2, obs_diag))
    if flip_coef != 0.0:
        flipped = _flip_sum_vec(psi, n_spins, np.empty_like(psi))
        total += flip_coef * float(np.vdot(psi, flipped).real)
    return total


# ---------------------------------------------------------------------------
# Krylov propagation, shared between backends
#
# The functions below are written once against the placeholder names
# ``_matvec``, ``_axpy``, ``_expect`` and ``_krylov_ws``; ``_rebind`` binds them
# to either the numba or the numpy primitives.
# ---------------------------------------------------------------------------

_matvec = _axpy = _expect = _krylov_ws = None


def krylov_expm_ws(diag, offdiag, n_spins, psi, t, m_max, tol, V, w):
    """Return exp(-1j * H * t) @ psi via Lanczos with sub-stepping.

    ``V`` (shape ``(m_max + 1, dim)``) and ``w`` are caller-owned scratch.
    """
    dim = psi.shape[0]
    m_max = min(m_max, dim)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max + 1)
    phi = psi.copy()
    remaining = t
    tau = t
    while remaining > 0.0:
        if tau > remaining:
            tau = remaining
        norm0 = np.sqrt(np.vdot(phi, phi).real)
        if norm0 == 0.0:
            return phi
        V[0, :] = phi / norm0
        m = 0
        done = False
        breakdown = False
        y = np.zeros(1, dtype=np.complex128)
        while not done:
            _matvec(diag, offdiag, n_spins, V[m], w)
            a = np.vdot(V[m], w).real
            alpha[m] = a
            _axpy(-a, V[m], w)
            if m > 0:
                _axpy(-beta[m], V[m - 1], w)
            # one full reorthogonalization pass
            for k in range(m + 1):
                _axpy(-np.vdot(V[k], w), V[k], w)
            b = np.sqrt(np.vdot(w, w).real)
            beta[m + 1] = b
            m += 1
            if b < 1e-13 * max(1.0, abs(a)):
                breakdown = True
            if breakdown or m == m_max or (m >= 4 and m % 2 == 0):
                T = np.zeros((m, m))
                for k in range(m):
                    T[k, k] = alpha[k]
                    if k + 1 < m:
                        T[k, k + 1] = beta[k + 1]
                        T[k + 1, k] = beta[k + 1]
                evals, evecs = np.linalg.eigh(T)
                while True:
                    coef = np.exp(-1j * evals * tau) * evecs[0, :]
                    y = evecs.astype(np.complex128) @ coef
                    # a-posteriori estimate: weight leaking past the Krylov space
                    err = 0.0 if breakdown else norm0 * b * abs(y[m - 1])
                    if err <= tol or m < m_max or tau < 1e-300:
                        break
                    tau *= 0.5
                if err <= tol or breakdown or m == m_max:
                    done = True
            if not done:
                V[m, :] = w / b
        phi = norm0 * (y @ V[:m])
        remaining -= tau
        if remaining < 1e-14 * t:
            remaining = 0.0
    return phi


def krylov_expm(diag, offdiag, n_spins, psi, t, m_max, tol):
    """Return exp(-1j * H * t) @ psi via Lanczos with sub-stepping."""
    dim = psi.shape[0]
    V = np.zeros((min(m_max, dim) + 1, dim), dtype=np.complex128)
    w = np.zeros(dim, dtype=np.complex128)
    return _krylov_ws(diag, offdiag, n_spins, psi, t, m_max, tol, V, w)


def observe_trace(diag, offdiag, n_spins, psi0, dt, n_steps, obs_diag, flip_coef, m_max, tol):
    """Observable values at t = 0, dt, ..., n_steps*dt under a fixed Hamiltonian."""
    dim = psi0.shape[0]
    V = np.zeros((min(m_max, dim) + 1, dim), dtype=np.complex128)
    w = np.zeros(dim, dtype=np.complex128)
    values = np.zeros(n_steps + 1)
    psi = psi0.copy()
    values[0] = _expect(psi, obs_diag, flip_coef, n_spins)
    for k in range(n_steps):
        psi = _krylov_ws(diag, offdiag, n_spins, psi, dt, m_max, tol, V, w)
        values[k + 1] = _expect(psi, obs_diag, flip_coef, n_spins)
    return values, psi


def evolve_fields(problem_diag, coupling, sign, n_spins, psi0, fields, dt, m_max, tol):
    """Apply one constant-field propagator of length dt per entry of ``fields``."""
    dim = psi0.shape[0]
    V = np.zeros((min(m_max, dim) + 1, dim), dtype=np.complex128)
    w = np.zeros(dim, dtype=np.complex128)
    diag = np.empty_like(problem_diag)
    psi = psi0.copy()
    for k in range(fields.shape[0]):
        h = fields[k]
        diag[:] = (1.0 - h) * problem_diag
        psi = _krylov_ws(diag, sign * h * coupling, n_spins, psi, dt, m_max, tol, V, w)
    return psi


def _rebind(fn, **names):
    scope = dict(fn.__globals__)
    scope.update(names)
    out = types.FunctionType(fn.__code__, scope, fn.__name__, fn.__defaults__)
    out.__qualname__ = fn.__qualname__
    out.__doc__ = fn.__doc__
    return out


def _build(name, flip_sum, matvec, axpy, expect, jit):
    prims = {"_matvec": matvec, "_axpy": axpy, "_expect": expect}
    ws = jit(_rebind(krylov_expm_ws, **prims))
    prims["_krylov_ws"] = ws
    return SimpleNamespace(
        name=name,
        flip_sum=flip_sum,
        matvec=matvec,
        expect=expect,
        krylov_expm_ws=ws,
        krylov_expm=jit(_rebind(krylov_expm, **prims)),
        observe_trace=jit(_rebind(observe_trace, **prims)),
        evolve_fields=jit(_rebind(evolve_fields, **prims)),
    )


def _identity(fn):
    return fn


NUMPY = _build("numpy", _flip_sum_vec, _matvec_vec, _axpy_vec, _expect_vec, _identity)

if numba is not None:
    _njit = numba.njit(cache=True, nogil=True)
    NUMBA = _build(
        "numba",
        _njit(_flip_sum_loop),
        _njit(_matvec_loop),
        _njit(_axpy_loop),
        _njit(_expect_loop),
        _njit,
    )
else:  # pragma: no cover
    NUMBA = None

ACTIVE = NUMPY if (_DISABLE or NUMBA is None) else NUMBA


def backend_name():
    return ACTIVE.name
