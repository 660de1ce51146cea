"""EC3 problem Hamiltonian, transverse driver and Pauli expectation values.

Basis convention: bit ``i`` of a basis index is spin ``i``; bit 1 means spin
up (``s_i = +1``). All energies are in units where the coupling ``J`` is the
scale, times are in ``1/J`` and hbar = 1.

The annealing Hamiltonian is ``H[h] = (1 - h) H_p + h H_q`` with

    H_p = J * sum_{(i,j,k)} (s_i + s_j + s_k - 1)^2
    H_q = sign * J * sum_i sigma^x_i,   sign = -1 by default.

With ``sign = -1`` the ground state at ``h = 1`` is the uniform superposition.
The other sign is unitarily equivalent (conjugation by prod_i sigma^z_i).
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels

TRANSVERSE_SIGN = -1.0
MAX_SPINS = 12


class StructureError(ValueError):
    """Malformed instance: bad clause indices, wrong vector sizes."""


@dataclass(frozen=True)
class SpinInstance:
    """An exact-cover-3 instance.

    ``solution`` is a bitstring whose character ``i`` is the value of spin
    ``i``; it is set only when the assignment is known to be unique.
    """

    n_spins: int
    clauses: Tuple[Tuple[int, int, int], ...]
    coupling: float = 1.0
    solution: Optional[str] = None
    seed: int = 0
    _diag: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        clauses = tuple(tuple(int(v) for v in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise StructureError(f"n_spins must be in [1, {MAX_SPINS}], got {self.n_spins}")
        if self.coupling <= 0:
            raise StructureError("coupling must be positive")
        for c in clauses:
            if len(c) != 3:
                raise StructureError(f"clause {c} is not a triple")
            if len(set(c)) != 3:
                raise StructureError(f"clause {c} repeats a spin")
            if min(c) < 0 or max(c) >= self.n_spins:
                raise StructureError(f"clause {c} out of range for N={self.n_spins}")
        if self.solution is not None and (
            len(self.solution) != self.n_spins or set(self.solution) - {"0", "1"}
        ):
            raise StructureError(f"solution {self.solution!r} is not an N-bit string")

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    @property
    def diagonal(self) -> np.ndarray:
        """Cached, read-only problem diagonal."""
        if self._diag is None:
            d = build_problem_diagonal(self)
            d.flags.writeable = False
            object.__setattr__(self, "_diag", d)
        return self._diag

    @property
    def solution_index(self) -> int:
        if self.solution is None:
            raise StructureError("instance has no recorded solution")
        return bitstring_to_index(self.solution)


def bitstring_to_index(bits: str) -> int:
    return sum(1 << i for i, c in enumerate(bits) if c == "1")


def index_to_bitstring(index: int, n_spins: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n_spins))


def spin_values(n_spins: int) -> np.ndarray:
    """Array ``s[b, i]`` of +-1 spin values for every basis state."""
    idx = np.arange(1 << n_spins)
    bits = (idx[:, None] >> np.arange(n_spins)[None, :]) & 1
    return 2 * bits - 1


def build_problem_diagonal(instance: SpinInstance) -> np.ndarray:
    """Diagonal of ``H_p`` over all ``2**N`` basis states."""
    n = instance.n_spins
    s = spin_values(n)
    energies = np.zeros(1 << n)
    for i, j, k in instance.clauses:
        if max(i, j, k) >= n:
            raise StructureError(f"clause {(i, j, k)} out of range")
        energies += (s[:, i] + s[:, j] + s[:, k] - 1) ** 2
    return instance.coupling * energies


def _check_state(instance: SpinInstance, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape != (instance.dim,):
        raise StructureError(f"state has shape {psi.shape}, expected ({instance.dim},)")
    return psi


def apply_hamiltonian(instance: SpinInstance, h: float, psi, sign: float = TRANSVERSE_SIGN):
    """Return ``H[h] @ psi`` without materializing ``H``."""
    psi = _check_state(instance, psi)
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"field h={h} outside [0, 1]")
    out_dtype = np.result_type(psi.dtype, np.float64)
    psi = np.ascontiguousarray(psi, dtype=out_dtype)
    out = np.empty_like(psi)
    diag = np.ascontiguousarray((1.0 - h) * instance.diagonal)
    _kernels.ACTIVE.matvec(diag, sign * h * instance.coupling, instance.n_spins, psi, out)
    return out


def dense_hamiltonian(instance: SpinInstance, h: float, sign: float = TRANSVERSE_SIGN) -> np.ndarray:
    """Materialized real symmetric ``H[h]``; used by the eigensolvers."""
    n, dim = instance.n_spins, instance.dim
    H = np.diag((1.0 - h) * instance.diagonal)
    idx = np.arange(dim)
    off = sign * h * instance.coupling
    for i in range(n):
        H[idx, idx ^ (1 << i)] += off
    return H


def expectation_sigma_z(psi, site: int) -> float:
    psi = np.asarray(psi)
    n = _n_from_dim(psi.shape[0])
    if not 0 <= site < n:
        raise StructureError(f"site {site} out of range for N={n}")
    prob = np.abs(psi) ** 2
    s = 2 * ((np.arange(psi.shape[0]) >> site) & 1) - 1
    return float(np.dot(prob, s))


def expectation_sigma_x(psi, site: int) -> float:
    psi = np.asarray(psi)
    n = _n_from_dim(psi.shape[0])
    if not 0 <= site < n:
        raise StructureError(f"site {site} out of range for N={n}")
    idx = np.arange(psi.shape[0])
    low = idx[((idx >> site) & 1) == 0]
    return float(2.0 * np.real(np.vdot(psi[low], psi[low ^ (1 << site)])))


def magnetizations_z(psi) -> np.ndarray:
    """All ``<sigma^z_i>`` at once."""
    psi = np.asarray(psi)
    n = _n_from_dim(psi.shape[0])
    return (np.abs(psi) ** 2) @ spin_values(n)


def basis_state(index: int, n_spins: int) -> np.ndarray:
    psi = np.zeros(1 << n_spins, dtype=np.complex128)
    psi[index] = 1.0
    return psi


def transverse_ground_state(n_spins: int, sign: float = TRANSVERSE_SIGN) -> np.ndarray:
    """Ground state of ``H_q``: the product of sigma^x eigenstates with eigenvalue ``-sign``."""
    dim = 1 << n_spins
    if sign < 0:
        return np.full(dim, dim**-0.5, dtype=np.complex128)
    parity = np.array([bin(b).count("1") & 1 for b in range(dim)])
    return (dim**-0.5) * np.where(parity, -1.0, 1.0).astype(np.complex128)


def _n_from_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise StructureError(f"state length {dim} is not a power of two")
    return n


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def clause_array(clauses: Sequence[Sequence[int]]) -> np.ndarray:
    return np.asarray(clauses, dtype=np.int64).reshape(-1, 3)
