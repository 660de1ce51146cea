"""Statistics on top of the simulations.

* least-squares regression of the critical field on DQP features,
* Pearson correlation,
* a single dense linear layer trained with ADAM mapping X curves to gap curves,
* a Poisson fit of the optimal gap exponent,
* the per-instance search for that exponent.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .anneal import ALPHA_GRID, DEFAULT_DT, final_fidelity, full_gap_protocol


class UndefinedCorrelation(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


# --- regression ------------------------------------------------------------------


@dataclass
class RegressionModel:
    beta: np.ndarray  # intercept first
    rank: int
    design_shape: tuple

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.design_shape[1]

    def predict(self, features) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        return self.beta[0] + features @ self.beta[1:]


def design_matrix(features) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    return np.column_stack([np.ones(features.shape[0]), features])


def fit_regression(features, targets) -> RegressionModel:
    """Least squares with an intercept column.

    Uses LAPACK's SVD-based solver, so a rank-deficient design yields the
    minimum-norm solution; ``rank_deficient`` reports it.
    """
    A = design_matrix(features)
    y = np.asarray(targets, dtype=float)
    if A.shape[0] != y.shape[0]:
        raise ValueError("features and targets disagree on the number of instances")
    if A.shape[0] <= A.shape[1]:
        raise ValueError(f"need more instances than parameters, got design {A.shape}")
    beta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    return RegressionModel(beta=beta, rank=int(rank), design_shape=A.shape)


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson_r needs two equal-length vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.mean(dx * dx)), np.sqrt(np.mean(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelation("zero variance")
    return float(np.clip(np.mean(dx * dy) / (sx * sy), -1.0, 1.0))


def train_test_indices(n: int, test_fraction: float, seed: int):
    """Seeded disjoint split, ``(train, test)`` index arrays."""
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# --- linear network --------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 5.5e-4
    batch_size: int = 64
    epochs: int = 600
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


@dataclass
class LinearNet:
    weights: np.ndarray  # (n_out, n_in)
    bias: np.ndarray
    meta: dict = field(default_factory=dict)

    def forward(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.weights.T + self.bias


def init_linear_net(n_in: int, n_out: int, rng: np.random.Generator) -> LinearNet:
    limit = 1.0 / np.sqrt(n_in)
    return LinearNet(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))


class Adam:
    """ADAM with bias-corrected first and second moments."""

    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mse(pred, target) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(target)) ** 2))


def mse_gradients(net: LinearNet, x, y):
    """Gradients of the mean squared error over batch and outputs."""
    err = net.forward(x) - y
    scale = 2.0 / err.size
    return scale * err.T @ x, scale * err.sum(axis=0)


def train_linear_net(x_train, y_train, x_val=None, y_val=None, config: Optional[TrainConfig] = None) -> LinearNet:
    """Minibatch ADAM on the mean squared error; records per-epoch losses.

    Losses are full-set MSEs evaluated after each epoch.
    """
    config = config or TrainConfig()
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    rng = np.random.default_rng(config.seed)
    net = init_linear_net(x_train.shape[1], y_train.shape[1], rng)
    opt = Adam([net.weights.shape, net.bias.shape], config.learning_rate, config.beta1, config.beta2, config.eps)
    loss_hist, val_hist = [], []
    n = x_train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            gw, gb = mse_gradients(net, x_train[idx], y_train[idx])
            opt.step([net.weights, net.bias], [gw, gb])
        loss = mse(net.forward(x_train), y_train)
        if not np.isfinite(loss):
            raise DivergenceError(epoch)
        loss_hist.append(loss)
        if x_val is not None:
            val_hist.append(mse(net.forward(x_val), y_val))
    net.meta = {
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
        "seed": config.seed,
        "loss": loss_hist,
        "val_loss": val_hist,
    }
    return net


class GapPrediction(NamedTuple):
    gap: np.ndarray
    clipped: bool


def predict_gap(net: LinearNet, dqp) -> GapPrediction:
    """Affine prediction clipped below at zero."""
    x = np.asarray(dqp, dtype=float)
    if x.shape[-1] != net.weights.shape[1]:
        raise ValueError(f"input has {x.shape[-1]} points, network expects {net.weights.shape[1]}")
    raw = net.forward(x)
    return GapPrediction(np.maximum(raw, 0.0), bool(np.any(raw < 0.0)))


def save_net(net: LinearNet, path) -> Path:
    path = Path(path)
    data = {"weights": net.weights.tolist(), "bias": net.bias.tolist(), "meta": net.meta}
    path.write_text(json.dumps(data) + "\n", encoding="utf-8")
    return path


def load_net(path) -> LinearNet:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return LinearNet(np.asarray(data["weights"], float), np.asarray(data["bias"], float), data.get("meta", {}))


def dataset_splits(n: int, test_size: int, val_fraction: float = 0.2, seed: int = 0):
    """``(train, val, test)`` index arrays: hold out ``test_size``, then a fraction of the rest."""
    if not 0 < test_size < n:
        raise ValueError("test_size must be in (0, n)")
    perm = np.random.default_rng(seed).permutation(n)
    test, rest = perm[:test_size], perm[test_size:]
    n_val = int(round(val_fraction * rest.size))
    return np.sort(rest[n_val:]), np.sort(rest[:n_val]), np.sort(test)


# --- optimal gap exponent -----------------------------------------------------------


@dataclass(frozen=True)
class PoissonFit:
    lam: float
    support: tuple  # (min, max) of the in-range samples
    n_samples: int

    def pmf(self, k):
        from scipy.stats import poisson

        return poisson.pmf(k, self.lam)


def fit_poisson(samples, range_max: float = 10.0, grid=ALPHA_GRID) -> PoissonFit:
    """Poisson MLE on in-range samples snapped to ``grid``; the MLE is the mean."""
    s = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    snapped = grid[np.abs(s[:, None] - grid[None, :]).argmin(axis=1)] if s.size else s
    inside = snapped[snapped <= range_max]
    if inside.size == 0:
        raise ValueError("no samples within the fit range")
    values, counts = np.unique(inside, return_counts=True)
    lam = float(np.dot(values, counts) / counts.sum())
    return PoissonFit(lam, (float(values.min()), float(values.max())), int(inside.size))


@dataclass(frozen=True)
class AlphaScan:
    alpha_max: float
    best_fidelity: float
    alphas: np.ndarray
    fidelities: np.ndarray


def alpha_max_search(instance, profile, T: float = 1.0, alpha_grid=ALPHA_GRID, dt: float = DEFAULT_DT) -> AlphaScan:
    """Grid argmax of the final fidelity of gap-adapted schedules; ties go to smaller alpha."""
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.size == 0:
        raise ValueError("empty alpha grid")
    fids = np.array([final_fidelity(instance, full_gap_protocol(profile, a, T), dt) for a in alphas])
    k = int(np.argmax(fids))
    return AlphaScan(float(alphas[k]), float(fids[k]), alphas, fids)


# --- datasets --------------------------------------------------------------------


def gap_dataset_record(instance, x_points: int = 128, gap_points: int = 128, tau: float = 20.0, dt: float = 0.02) -> dict:
    """One training record: switch-off DQP curve and annealing gap of an instance."""
    from .quench import dqp_curve, preset_grid
    from .spectrum import default_grid, gap_profile

    curve = dqp_curve(instance, "X", preset_grid("X", x_points), tau=tau, dt=dt)
    profile = gap_profile(instance, default_grid(gap_points))
    return {"seed": int(instance.seed), "x": curve.values.tolist(), "gap": profile.gap.tolist()}


def save_dataset(records, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"seed": rec["seed"], "x": rec["x"], "gap": rec["gap"]}) + "\n")
    return path


def load_dataset(path):
    """Returns ``(seeds, X, gaps)`` arrays from a JSON-lines dataset."""
    recs = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    seeds = np.array([r["seed"] for r in recs])
    return seeds, np.array([r["x"] for r in recs], float), np.array([r["gap"] for r in recs], float)
