"""End-to-end acceptance checks, one test per criterion.

Expensive ensemble data is cached under ``.cache/acceptance`` in the repo root
(set ``ANNEALBENCH_NO_CACHE=1`` to recompute). Each test prints a PASS/FAIL
line; the lines are repeated in the pytest terminal summary.
"""

import itertools
import json
import os
from pathlib import Path

import numpy as np
import pytest

from annealbench.analysis import (
    alpha_max_search,
    dataset_splits,
    fit_poisson,
    fit_regression,
    gap_dataset_record,
    load_dataset,
    pearson_r,
    predict_gap,
    save_dataset,
    train_linear_net,
    train_test_indices,
)
from annealbench.anneal import (
    critical_field_estimate,
    fidelity_scaling,
    final_fidelity,
    full_gap_protocol,
    linear_protocol,
    quadratic_protocol,
)
from annealbench.cli import main as cli_main
from annealbench.instance_gen import GeneratorConfig, generate_ensemble, generate_usa_instance
from annealbench.quench import QuenchSpec, dqp, dqp_curve, evolve
from annealbench.spectrum import critical_field, gap_at, gap_profile
from annealbench.spin_core import (
    basis_state,
    dense_hamiltonian,
    expectation_sigma_z,
    index_to_bitstring,
    random_state,
)

CACHE = Path(__file__).resolve().parents[1] / ".cache" / "acceptance"
USE_CACHE = os.environ.get("ANNEALBENCH_NO_CACHE", "") not in {"1", "true", "yes"}


def cached(name, build):
    """JSON-cached result of ``build()``."""
    path = CACHE / f"{name}.json"
    if USE_CACHE and path.exists():
        return json.loads(path.read_text())
    data = build()
    CACHE.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data))
    return data


# --- 1: analytic oracles --------------------------------------------------------


def test_criterion_01_analytic_oracles(criterion):
    insts = [generate_usa_instance(GeneratorConfig(n, seed=s)) for n in (4, 5, 6, 7, 8) for s in range(4)]
    gap_err = max(abs(gap_at(i, 1.0)[0] - 1.0 / i.n_spins) for i in insts)

    inst = insts[4]  # N = 5
    psi0 = basis_state(inst.solution_index, inst.n_spins)
    signs = np.array([1.0 if c == "1" else -1.0 for c in inst.solution])
    rabi_err = 0.0
    for t in np.linspace(0.0, 10.0, 201):
        psi = evolve(inst, 1.0, psi0, t)
        sz = np.array([expectation_sigma_z(psi, k) for k in range(inst.n_spins)])
        rabi_err = max(rabi_err, np.max(np.abs(sz * signs - np.cos(2 * inst.coupling * t))))

    sudden_err = max(abs(final_fidelity(i, linear_protocol(1e-9)) - 2 ** (-i.n_spins / 2)) for i in insts)
    ok = gap_err < 1e-12 and rabi_err < 1e-8 and sudden_err < 1e-6
    criterion(
        1, ok,
        f"|gap(1)-1/N| = {gap_err:.1e} (exact), Rabi err = {rabi_err:.1e} (<1e-8), "
        f"sudden |F-2^(-N/2)| = {sudden_err:.1e} (<1e-6)",
    )


# --- 2: Krylov vs dense -----------------------------------------------------------


def test_criterion_02_krylov_matches_dense(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for k in range(20):
        inst = generate_usa_instance(GeneratorConfig(5, seed=int(rng.integers(1 << 30))))
        h, t = float(rng.uniform()), float(rng.uniform(0, 20))
        psi = random_state(inst.dim, rng)
        worst = max(worst, np.linalg.norm(evolve(inst, h, psi, t, "krylov") - evolve(inst, h, psi, t, "dense")))
    criterion(2, worst < 1e-7, f"max ||psi_krylov - psi_dense|| over 20 triples = {worst:.1e} (<1e-7)")


# --- 3: brute force ---------------------------------------------------------------


def test_criterion_03_ground_state_is_unique_assignment(criterion):
    mismatches, min_excited = 0, np.inf
    for k in range(20):
        n = 4 + k % 3
        inst = generate_usa_instance(GeneratorConfig(n, seed=100 + k))
        sols = [
            "".join(bits)
            for bits in itertools.product("01", repeat=n)
            if all(sum(bits[i] == "1" for i in c) == 2 for c in inst.clauses)
        ]
        evals, evecs = np.linalg.eigh(dense_hamiltonian(inst, 0.0))
        gs = index_to_bitstring(int(np.argmax(np.abs(evecs[:, 0]))), n)
        mismatches += int(sols != [gs] or evals[0] != 0.0)
        diag = inst.diagonal
        min_excited = min(min_excited, diag[diag > 0].min() / inst.coupling)
    ok = mismatches == 0 and min_excited >= 4.0
    criterion(3, ok, f"{20 - mismatches}/20 ground states equal the enumerated USA, min nonzero energy = {min_excited:g} J (>=4)")


# --- 4: DQP endpoints and tau stability -------------------------------------------------


def test_criterion_04_dqp_endpoints_and_tau_stability(criterion):
    insts = generate_ensemble(7, range(1000, 1005))
    end_err = max(
        max(abs(dqp(i, QuenchSpec("switch_on", 1e-3)) - 1.0), abs(dqp(i, QuenchSpec("switch_off", 1 - 1e-3)) - 1.0))
        for i in insts
    )
    taus = (10.0, 20.0, 50.0, 100.0)
    curve_spread, point_spread = 0.0, 0.0
    for inst in insts:
        for kind in ("G", "X"):
            c = np.array([dqp_curve(inst, kind, tau=tau).values for tau in taus])
            spread, mean = c.max(axis=0) - c.min(axis=0), np.abs(c.mean(axis=0))
            curve_spread = max(curve_spread, np.linalg.norm(spread) / np.linalg.norm(mean))
            sel = mean >= 0.1
            point_spread = max(point_spread, np.max(spread[sel] / mean[sel]))
    ok = end_err < 1e-3 and curve_spread < 0.2
    criterion(
        4, ok,
        f"endpoint err = {end_err:.1e} (<1e-3), tau spread per curve = {curve_spread:.3f} (<0.2); "
        f"worst pointwise where |DQP|>=0.1 = {point_spread:.3f} (reported only)",
    )


# --- 5: regression ----------------------------------------------------------------------


def _regression_data():
    def build():
        out = {"G": [], "X": [], "hc": []}
        for inst in generate_ensemble(7, range(1000, 1100)):
            out["G"].append(dqp_curve(inst, "G").values.tolist())
            out["X"].append(dqp_curve(inst, "X").values.tolist())
            out["hc"].append(critical_field(gap_profile(inst)).h_c_delta)
        return out

    return cached("regression_n7_100", build)


def test_criterion_05_regression_quality(criterion):
    data = _regression_data()
    hc = np.array(data["hc"])
    train, test = train_test_indices(hc.size, 0.2, seed=0)
    r = {}
    for kind in ("G", "X"):
        F = np.array(data[kind])
        model = fit_regression(F[train], hc[train])
        r[kind] = pearson_r(hc[test], model.predict(F[test]))
    ok = max(r.values()) >= 0.6
    criterion(5, ok, f"out-of-sample r: G = {r['G']:.3f}, X = {r['X']:.3f} (best >= 0.6), N=7, 100 instances")


# --- 6: linear network ------------------------------------------------------------------


def _nn_dataset():
    path = CACHE / "nn_n7_500.jsonl"
    if not (USE_CACHE and path.exists()):
        CACHE.mkdir(parents=True, exist_ok=True)
        records = [gap_dataset_record(generate_usa_instance(GeneratorConfig(7, seed=s))) for s in range(500)]
        save_dataset(records, path)
    return load_dataset(path)


def test_criterion_06_network_reconstruction(criterion):
    seeds, X, Y = _nn_dataset()
    tr, va, te = dataset_splits(len(seeds), 100, 0.2, seed=0)
    net = train_linear_net(X[tr], Y[tr], X[va], Y[va])
    loss, val = net.meta["loss"][-1], net.meta["val_loss"][-1]
    per_curve = np.mean((predict_gap(net, X[te]).gap - Y[te]) ** 2, axis=1)
    med = float(np.median(per_curve))
    ok = loss <= 1e-5 and val <= 3 * loss and med <= 1e-4
    criterion(
        6, ok,
        f"train loss = {loss:.2e} (<=1e-5), val loss = {val:.2e} (<= 3x train), median test MSE = {med:.2e} (<=1e-4)",
    )


# --- 7: protocol benefit ------------------------------------------------------------------


def _protocol_comparison():
    def build():
        rows = []
        for inst in generate_ensemble(10, range(3000, 3030)):
            h_x = critical_field_estimate("X", dqp_curve(inst, "X")).value
            rows.append({
                "seed": inst.seed,
                "h_c_X": h_x,
                "linear": final_fidelity(inst, linear_protocol(1.0)),
                "quad_const": final_fidelity(inst, quadratic_protocol(1.0, 0.5)),
                "quad_X": final_fidelity(inst, quadratic_protocol(1.0, h_x)),
            })
        return rows

    return cached("protocols_n10_30_T1", build)


def test_criterion_07_protocol_benefit(criterion):
    rows = _protocol_comparison()
    mean = {k: float(np.mean([r[k] for r in rows])) for k in ("linear", "quad_const", "quad_X")}
    d_const = mean["quad_X"] - mean["quad_const"]
    d_lin = mean["quad_X"] - mean["linear"]
    ok = len(rows) >= 30 and d_const >= 0.01 and d_lin >= 0.01
    criterion(
        7, ok,
        f"N=10 T=1 n={len(rows)}: mean F linear = {mean['linear']:.4f}, quad(0.5) = {mean['quad_const']:.4f}, "
        f"quad(X) = {mean['quad_X']:.4f}; margins {d_const:.4f}, {d_lin:.4f} (>=0.01)",
    )


# --- 8: full-gap protocol ------------------------------------------------------------------


def _alpha_scans():
    def build():
        out = []
        for inst in generate_ensemble(7, range(4000, 4030)):
            scan = alpha_max_search(inst, gap_profile(inst), T=1.0)
            out.append({"seed": inst.seed, "alpha_max": scan.alpha_max, "fidelity": scan.best_fidelity})
        return out

    return cached("alpha_n7_30_T1", build)


def test_criterion_08_full_gap_protocol(criterion):
    insts = generate_ensemble(7, range(4000, 4005))
    diff = max(
        abs(final_fidelity(i, full_gap_protocol(gap_profile(i), 0.0, 1.0)) - final_fidelity(i, linear_protocol(1.0)))
        for i in insts
    )
    amax = np.array([r["alpha_max"] for r in _alpha_scans()])
    med = float(np.median(amax))
    lam = fit_poisson(amax, range_max=10.0).lam
    ok = diff <= 1e-10 and med > 2 and 3.1 <= lam <= 6.1
    criterion(
        8, ok,
        f"|F(alpha=0)-F(linear)| = {diff:.1e} (<=1e-10), median alpha_max = {med:g} (>2), "
        f"Poisson lambda = {lam:.3f} (in [3.1, 6.1]), n={amax.size}",
    )


# --- 9: scaling with N ------------------------------------------------------------------


SCALING_T = [4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0]


def _scaling_table():
    def build():
        table = {}
        for n in (5, 6, 7, 8):
            insts = generate_ensemble(n, range(5000, 5016))
            h_x = [critical_field_estimate("X", dqp_curve(i, "X")).value for i in insts]
            table[str(n)] = {
                "linear": [float(np.mean([final_fidelity(i, linear_protocol(T)) for i in insts])) for T in SCALING_T],
                "quad_X": [
                    float(np.mean([final_fidelity(i, quadratic_protocol(T, h)) for i, h in zip(insts, h_x)]))
                    for T in SCALING_T
                ],
            }
        return table

    return cached("scaling_n5-8_16", build)


@pytest.mark.slow
def test_criterion_09_scaling_trend(criterion):
    table = _scaling_table()
    fits = {
        kind: fidelity_scaling({int(n): (SCALING_T, v[kind]) for n, v in table.items()}, 0.9)
        for kind in ("linear", "quad_X")
    }
    ok = fits["linear"].slope > fits["quad_X"].slope
    t_lin = ", ".join(f"{t:.1f}" for t in fits["linear"].t_star)
    t_quad = ", ".join(f"{t:.1f}" for t in fits["quad_X"].t_star)
    criterion(
        9, ok,
        f"T*(F=0.9) N=5..8 linear [{t_lin}] slope {fits['linear'].slope:.2f} > "
        f"quad(X) [{t_quad}] slope {fits['quad_X'].slope:.2f}",
    )


# --- 10: determinism --------------------------------------------------------------------


def _pipeline(out: Path):
    inst = out / "instances"
    steps = [
        ["generate", "--n", "5", "--seeds", "0..39"],
        ["spectrum", "--instances", str(inst), "--grid", "32", "--emit-plot-data"],
        ["quench", "--instances", str(inst), "--kind", "both", "--emit-plot-data"],
        ["anneal", "--instances", str(inst), "--protocol", "quadratic", "--hc-source", "X",
         "--curves", str(out / "curves"), "--T", "1,2", "--emit-plot-data"],
        ["anneal", "--instances", str(inst), "--protocol", "fullgap", "--alpha", "2",
         "--profiles", str(out / "profiles"), "--T", "1"],
        ["regress", "--instances", str(inst), "--kind", "X", "--curves", str(out / "curves"),
         "--critical", str(out / "critical_fields.csv"), "--emit-plot-data"],
        ["stats", "--fig", "1", "--inputs", str(out / "critical_fields.csv")],
    ]
    return [cli_main(step + ["--out", str(out), "--seed", "7"]) for step in steps]


def test_criterion_10_determinism(tmp_path, criterion):
    codes = _pipeline(tmp_path / "a") + _pipeline(tmp_path / "b")

    def files(root):
        return {
            p.relative_to(root): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.suffix in {".csv", ".json"} and not p.name.startswith("manifest_")
        }

    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    differing = sorted(str(k) for k in a if a[k] != b.get(k))
    ok = all(c == 0 for c in codes) and a.keys() == b.keys() and not differing
    criterion(10, ok, f"{len(a)} CSV/JSON outputs compared, {len(differing)} differ, exit codes {sorted(set(codes))}")
