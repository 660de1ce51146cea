"""Random EC3 instances with a unique satisfying assignment (USA)."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .spin_core import SpinInstance, StructureError, clause_array, index_to_bitstring

MAX_ENUM_SPINS = 24
DEFAULT_MAX_ATTEMPTS = 100_000


class GenerationError(RuntimeError):
    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class GeneratorConfig:
    n_spins: int
    n_clauses: Optional[int] = None  # defaults to n_spins
    seed: int = 0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    coupling: float = 1.0

    def __post_init__(self):
        if self.n_clauses is None:
            object.__setattr__(self, "n_clauses", self.n_spins)
        if self.n_spins < 3:
            raise ValueError(f"n_spins must be >= 3, got {self.n_spins}")
        if self.n_clauses < 1:
            raise ValueError(f"n_clauses must be >= 1, got {self.n_clauses}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class SatisfactionReport:
    count: int
    solution: Optional[str] = None


def clause_satisfied(triple, assignment: str) -> bool:
    """True iff exactly two of the three referenced spins are up."""
    i, j, k = triple
    n = len(assignment)
    if not all(0 <= v < n for v in (i, j, k)):
        raise StructureError(f"clause {triple} out of range for {n} spins")
    return (assignment[i] == "1") + (assignment[j] == "1") + (assignment[k] == "1") == 2


def satisfying_mask(clauses: Sequence[Sequence[int]], n_spins: int) -> np.ndarray:
    """Boolean mask over all ``2**n`` assignments, True where every clause holds."""
    if n_spins > MAX_ENUM_SPINS:
        raise ValueError(f"exhaustive enumeration limited to {MAX_ENUM_SPINS} spins")
    idx = np.arange(1 << n_spins, dtype=np.int64)
    mask = np.ones(idx.shape, dtype=bool)
    for i, j, k in clause_array(clauses):
        if max(i, j, k) >= n_spins or min(i, j, k) < 0:
            raise StructureError(f"clause {(i, j, k)} out of range")
        ups = ((idx >> i) & 1) + ((idx >> j) & 1) + ((idx >> k) & 1)
        mask &= ups == 2
    return mask


def count_satisfying(clauses, n_spins: int) -> SatisfactionReport:
    mask = satisfying_mask(clauses, n_spins)
    hits = np.flatnonzero(mask)
    solution = index_to_bitstring(int(hits[0]), n_spins) if hits.size == 1 else None
    return SatisfactionReport(count=int(hits.size), solution=solution)


def sample_clauses(rng: np.random.Generator, n_spins: int, n_clauses: int) -> list:
    """Independent triples of distinct spins; each triple is stored sorted."""
    return [tuple(sorted(int(v) for v in rng.choice(n_spins, size=3, replace=False))) for _ in range(n_clauses)]


def generate_usa_instance(config: GeneratorConfig, return_attempts: bool = False):
    """Rejection-sample whole clause sets until exactly one assignment satisfies them."""
    rng = np.random.default_rng(config.seed)
    for attempt in range(1, config.max_attempts + 1):
        clauses = sample_clauses(rng, config.n_spins, config.n_clauses)
        report = count_satisfying(clauses, config.n_spins)
        if report.count == 1:
            inst = SpinInstance(
                n_spins=config.n_spins,
                clauses=tuple(clauses),
                coupling=config.coupling,
                solution=report.solution,
                seed=config.seed,
            )
            return (inst, attempt) if return_attempts else inst
    raise GenerationError(
        f"no USA instance for N={config.n_spins}, M={config.n_clauses}, seed={config.seed} "
        f"after {config.max_attempts} attempts",
        attempts=config.max_attempts,
    )


def generate_ensemble(n_spins: int, seeds, n_clauses: Optional[int] = None, **kw) -> list:
    return [generate_usa_instance(GeneratorConfig(n_spins, n_clauses, seed=s, **kw)) for s in seeds]


# --- persistence -----------------------------------------------------------


def instance_to_dict(inst: SpinInstance) -> dict:
    return {
        "n_spins": inst.n_spins,
        "coupling": float(inst.coupling),
        "seed": int(inst.seed),
        "clauses": [list(c) for c in inst.clauses],
        "solution": inst.solution,
    }


def instance_from_dict(data: dict) -> SpinInstance:
    return SpinInstance(
        n_spins=int(data["n_spins"]),
        clauses=tuple(tuple(c) for c in data["clauses"]),
        coupling=float(data.get("coupling", 1.0)),
        solution=data.get("solution"),
        seed=int(data.get("seed", 0)),
    )


def dumps_instance(inst: SpinInstance) -> str:
    return json.dumps(instance_to_dict(inst)) + "\n"


def save_instance(inst: SpinInstance, path) -> Path:
    path = Path(path)
    path.write_text(dumps_instance(inst), encoding="utf-8")
    return path


def load_instance(path) -> SpinInstance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def instance_filename(inst: SpinInstance) -> str:
    return f"ec3_n{inst.n_spins}_m{inst.n_clauses}_s{inst.seed}.json"
