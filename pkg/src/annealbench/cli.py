"""``annealbench`` command line.

Every subcommand reads inputs produced by earlier ones, writes CSV/JSON into
``--out`` and finishes with ``manifest_<command>.json`` listing the config,
input and output hashes. Exit codes: 0 ok, 2 bad arguments, 3 missing input,
4 numerical failure.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .analysis import (
    DivergenceError,
    TrainConfig,
    UndefinedCorrelation,
    alpha_max_search,
    dataset_splits,
    fit_poisson,
    fit_regression,
    gap_dataset_record,
    load_dataset,
    mse,
    pearson_r,
    predict_gap,
    save_dataset,
    save_net,
    train_linear_net,
    train_test_indices,
)
from .anneal import (
    ALPHA_GRID,
    EstimateUnavailable,
    NoCrossingError,
    SingularProtocolError,
    anneal_evolve,
    critical_field_estimate,
    fidelity_scaling,
    full_gap_protocol,
    linear_protocol,
    quadratic_protocol,
    save_result,
)
from .instance_gen import GenerationError, GeneratorConfig, generate_usa_instance, instance_filename, load_instance, save_instance
from .quench import PropagationError, dqp_curve, load_curve, preset_grid, save_curve
from .spectrum import EigensolverError, critical_field, default_grid, gap_profile, load_profile, save_profile

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
NUMERIC_ERRORS = (
    GenerationError,
    EigensolverError,
    PropagationError,
    SingularProtocolError,
    DivergenceError,
    NoCrossingError,
    UndefinedCorrelation,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    """Arguments that parse but cannot work together."""


class MissingInput(Exception):
    def __init__(self, path):
        super().__init__(f"missing input: {path}")
        self.path = path


# --- helpers ---------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_csv(path: Path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_seeds(text: str):
    """``"0..99"`` (inclusive), ``"1,4,9"`` or a single integer."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _int_at_least(lo):
    def conv(text):
        value = int(text)
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {value}")
        return value

    return conv


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def resolve_instances(paths):
    files = []
    for p in paths or []:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.json")))
        elif p.is_file():
            files.append(p)
        else:
            raise MissingInput(p)
    if not files:
        raise MissingInput(paths[0] if paths else "--instances")
    return files


def _require(path: Path) -> Path:
    if not Path(path).exists():
        raise MissingInput(path)
    return Path(path)


def pool_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class Run:
    """Tracks inputs and outputs of one command for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs, self.outputs = [], []
        self.started = time.perf_counter()

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def used(self, *paths):
        self.inputs.extend(Path(p) for p in paths)

    def wrote(self, *paths):
        for p in paths:
            p = Path(p)
            self.outputs.append(p)
            sidecar = p.with_suffix(".json")
            if p.suffix == ".csv" and sidecar.exists() and sidecar not in self.outputs:
                self.outputs.append(sidecar)

    def finish(self):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in {"func", "config"}}
        manifest = {
            "command": self.args.command,
            "version": __version__,
            "backend": _kernels.backend_name(),
            "config": config,
            "inputs": {str(p): sha256(p) for p in sorted(set(self.inputs))},
            "outputs": {str(p): sha256(p) for p in sorted(set(self.outputs))},
            "wall_clock_s": round(time.perf_counter() - self.started, 3),
        }
        path = self.out / f"manifest_{self.args.command}.json"
        write_json(path, manifest)
        return path


# --- subcommands -------------------------------------------------------------------


def _generate_one(job):
    n, m, seed, max_attempts, coupling = job
    try:
        inst, attempts = generate_usa_instance(
            GeneratorConfig(n, m, seed=seed, max_attempts=max_attempts, coupling=coupling), return_attempts=True
        )
        return inst, attempts, None
    except GenerationError as exc:
        return None, exc.attempts, str(exc)


def cmd_generate(args, run: Run):
    seeds = parse_seeds(args.seeds)
    m = args.m if args.m is not None else args.n
    jobs = [(args.n, m, s, args.max_attempts, args.coupling) for s in seeds]
    results = pool_map(_generate_one, jobs, args.threads)
    summary, failures = [], []
    for seed, (inst, attempts, err) in zip(seeds, results):
        summary.append({"seed": seed, "attempts": attempts, "ok": err is None})
        if err:
            failures.append(err)
            continue
        run.wrote(save_instance(inst, run.path("instances", instance_filename(inst))))
    run.wrote(write_json(run.path("generate_summary.json"), {"n_spins": args.n, "n_clauses": m, "runs": summary}))
    if failures:
        raise GenerationError("; ".join(failures), attempts=args.max_attempts)


def _load_all(args, run: Run):
    files = resolve_instances(args.instances)
    run.used(*files)
    return files, [load_instance(f) for f in files]


def _spectrum_one(job):
    inst, points = job
    prof = gap_profile(inst, default_grid(points))
    return prof, critical_field(prof)


def cmd_spectrum(args, run: Run):
    files, insts = _load_all(args, run)
    results = pool_map(_spectrum_one, [(i, args.grid) for i in insts], args.threads)
    rows = []
    for f, inst, (prof, crit) in zip(files, insts, results):
        run.wrote(save_profile(prof, run.path("profiles", f.stem + ".csv")))
        rows.append([inst.seed, inst.n_spins, f.stem, crit.h_c_delta, crit.min_gap])
    header = ["seed", "n_spins", "instance", "h_c_delta", "min_gap"]
    run.wrote(write_csv(run.path("critical_fields.csv"), header, rows))
    if args.emit_plot_data:
        run.wrote(write_csv(run.path("fig1.csv"), ["n_spins", "seed", "h_c_delta"], [[r[1], r[0], r[3]] for r in rows]))


def _quench_one(job):
    inst, kind, points, tau, dt = job
    return dqp_curve(inst, kind, preset_grid(kind, points), tau=tau, dt=dt)


def cmd_quench(args, run: Run):
    files, insts = _load_all(args, run)
    kinds = ["G", "X"] if args.kind == "both" else [args.kind]
    jobs = [(inst, k, args.grid, args.tau, args.dt) for inst in insts for k in kinds]
    curves = pool_map(_quench_one, jobs, args.threads)
    plot = []
    stems = [f.stem for f in files for _ in kinds]
    for stem, curve in zip(stems, curves):
        run.wrote(save_curve(curve, run.path("curves", f"{stem}_{curve.kind}.csv")))
        plot.extend([curve.seed, curve.n_spins, curve.kind, h, v] for h, v in zip(curve.h_f_grid, curve.values))
    if args.emit_plot_data:
        run.wrote(write_csv(run.path("fig2.csv"), ["seed", "n_spins", "kind", "h_f", "value"], plot))


def _slowdown_field(args, run: Run, stem, inst):
    """``(h_c, source_used)``; falls back to the constant when no crossing exists."""
    source = args.hc_source
    if source == "constant":
        return critical_field_estimate("constant").value, "constant"
    if source == "gap":
        path = _require(Path(args.profiles) / f"{stem}.csv")
        run.used(path)
        return critical_field_estimate("gap", load_profile(path, inst)).value, "gap"
    path = _require(Path(args.curves) / f"{stem}_{source}.csv")
    run.used(path, path.with_suffix(".json"))
    try:
        return critical_field_estimate(source, load_curve(path)).value, source
    except EstimateUnavailable:
        return 0.5, "constant-fallback"


def _anneal_one(job):
    inst, protocol, dt, samples = job
    return anneal_evolve(inst, protocol, dt=dt, samples=samples)


def _alpha_one(job):
    inst, profile, T, alphas, dt = job
    return alpha_max_search(inst, profile, T, alphas, dt)


def cmd_anneal(args, run: Run):
    files, insts = _load_all(args, run)
    if args.protocol == "fullgap" and args.alpha == "sweep":
        return _anneal_alpha_sweep(args, run, files, insts)
    jobs, meta = [], []
    for f, inst in zip(files, insts):
        h_c, used = (None, None)
        profile = None
        if args.protocol == "quadratic":
            h_c, used = _slowdown_field(args, run, f.stem, inst)
        elif args.protocol == "fullgap":
            path = _require(Path(args.profiles) / f"{f.stem}.csv")
            run.used(path)
            profile = load_profile(path, inst)
        for T in args.T:
            if args.protocol == "linear":
                proto, tag = linear_protocol(T), "linear"
            elif args.protocol == "quadratic":
                proto, tag = quadratic_protocol(T, h_c), f"quadratic-{args.hc_source}"
            else:
                proto, tag = full_gap_protocol(profile, float(args.alpha), T), f"fullgap-a{float(args.alpha):g}"
            jobs.append((inst, proto, args.dt, args.samples))
            meta.append((f.stem, inst, tag, h_c, used, T))
    results = pool_map(_anneal_one, jobs, args.threads)
    rows, traces = [], []
    for (stem, inst, tag, h_c, used, T), res in zip(meta, results):
        run.wrote(save_result(res, run.path("runs", f"{stem}_{tag}_T{T:g}.csv")))
        alpha = res.params.get("alpha", "")
        rows.append([inst.seed, inst.n_spins, args.protocol, tag, "" if h_c is None else h_c, used or "", alpha, T, res.final_fidelity])
        traces.extend([inst.seed, tag, T, t, h, fi] for t, h, fi in zip(res.times, res.fields, res.fidelity))
    header = ["seed", "n_spins", "protocol", "label", "h_c", "hc_source", "alpha", "T", "final_fidelity"]
    run.wrote(write_csv(run.path(f"anneal_summary_{_run_tag(args)}.csv"), header, rows))
    if args.emit_plot_data:
        fig = "fig10.csv" if args.protocol == "fullgap" else "fig7.csv"
        run.wrote(write_csv(run.path(fig), ["seed", "label", "T", "t", "h", "fidelity"], traces))


def _run_tag(args) -> str:
    if args.protocol == "quadratic":
        return f"quadratic-{args.hc_source}"
    if args.protocol == "fullgap":
        return f"fullgap-a{args.alpha}"
    return "linear"


def _anneal_alpha_sweep(args, run: Run, files, insts):
    jobs = []
    for f, inst in zip(files, insts):
        path = _require(Path(args.profiles) / f"{f.stem}.csv")
        run.used(path)
        profile = load_profile(path, inst)
        for T in args.T:
            jobs.append((inst, profile, T, ALPHA_GRID, args.dt))
    scans = pool_map(_alpha_one, jobs, args.threads)
    scan_rows, best_rows = [], []
    for (inst, _, T, _, _), scan in zip(jobs, scans):
        scan_rows.extend([inst.seed, inst.n_spins, T, a, fi] for a, fi in zip(scan.alphas, scan.fidelities))
        best_rows.append([inst.seed, inst.n_spins, T, scan.alpha_max, scan.best_fidelity])
    run.wrote(write_csv(run.path("alpha_scan.csv"), ["seed", "n_spins", "T", "alpha", "final_fidelity"], scan_rows))
    run.wrote(write_csv(run.path("alpha_max.csv"), ["seed", "n_spins", "T", "alpha_max", "final_fidelity"], best_rows))
    if args.emit_plot_data:
        run.wrote(write_csv(run.path("fig11.csv"), ["seed", "n_spins", "T", "alpha", "final_fidelity"], scan_rows))


def cmd_regress(args, run: Run):
    files, insts = _load_all(args, run)
    crit_path = _require(Path(args.critical))
    run.used(crit_path)
    hc = {row["instance"]: float(row["h_c_delta"]) for row in read_csv(crit_path)}
    feats, targets, seeds = [], [], []
    for f, inst in zip(files, insts):
        if f.stem not in hc:
            raise MissingInput(f"{crit_path}: no critical field for {f.stem}")
        path = _require(Path(args.curves) / f"{f.stem}_{args.kind}.csv")
        run.used(path)
        feats.append(load_curve(path).values)
        targets.append(hc[f.stem])
        seeds.append(inst.seed)
    X, y = np.array(feats), np.array(targets)
    train, test = train_test_indices(len(y), args.test_fraction, args.seed)
    if train.size <= X.shape[1] + 1 or test.size < 2:
        raise UsageError(f"{len(y)} instances are too few for {X.shape[1]} features and a {args.test_fraction} test split")
    model = fit_regression(X[train], y[train])
    pred_test = model.predict(X[test])
    pred_train = model.predict(X[train])
    summary = {
        "kind": args.kind,
        "n_spins": sorted({i.n_spins for i in insts}),
        "n": int(len(y)),
        "n_train": int(train.size),
        "n_test": int(test.size),
        "split": {"test_fraction": args.test_fraction, "seed": args.seed},
        "design_shape": list(model.design_shape),
        "rank_deficient": model.rank_deficient,
        "pearson_r": pearson_r(y[test], pred_test),
        "pearson_r_in_sample": pearson_r(y[train], pred_train),
    }
    run.wrote(write_csv(run.path(f"regression_{args.kind}.csv"), ["true_hc", "predicted_hc"], zip(y[test], pred_test)))
    run.wrote(write_json(run.path(f"regression_{args.kind}.json"), summary))
    if args.emit_plot_data:
        rows = [[args.kind, seeds[i], "test", y[i], p] for i, p in zip(test, pred_test)]
        rows += [[args.kind, seeds[i], "train", y[i], p] for i, p in zip(train, pred_train)]
        run.wrote(write_csv(run.path(f"fig3_{args.kind}.csv"), ["kind", "seed", "set", "true_hc", "predicted_hc"], rows))


def _record_one(job):
    inst, points = job
    return gap_dataset_record(inst, points, points)


def cmd_train(args, run: Run):
    if args.dataset:
        ds_path = _require(Path(args.dataset))
        run.used(ds_path)
    else:
        _, insts = _load_all(args, run)
        records = pool_map(_record_one, [(i, args.points) for i in insts], args.threads)
        ds_path = save_dataset(records, run.path("dataset.jsonl"))
        run.wrote(ds_path)
    seeds, X, Y = load_dataset(ds_path)
    test_size = args.test_size or max(1, int(round(0.2 * len(seeds))))
    tr, va, te = dataset_splits(len(seeds), test_size, args.val_fraction, args.seed)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    net = train_linear_net(X[tr], Y[tr], X[va], Y[va], cfg)
    net.meta["split"] = {"train": int(tr.size), "val": int(va.size), "test": int(te.size)}
    run.wrote(save_net(net, run.path("model.json")))
    hist = [[e + 1, l, v] for e, (l, v) in enumerate(zip(net.meta["loss"], net.meta["val_loss"]))]
    run.wrote(write_csv(run.path("train_history.csv"), ["epoch", "loss", "val_loss"], hist))
    pred = predict_gap(net, X[te])
    per_curve = np.mean((pred.gap - Y[te]) ** 2, axis=1)
    summary = {
        "final_loss": net.meta["loss"][-1],
        "final_val_loss": net.meta["val_loss"][-1],
        "test_mse": mse(pred.gap, Y[te]),
        "median_test_curve_mse": float(np.median(per_curve)),
        "clipped": pred.clipped,
        **net.meta["split"],
    }
    run.wrote(write_json(run.path("train_summary.json"), summary))
    if args.emit_plot_data:
        run.wrote(write_csv(run.path("fig5.csv"), ["epoch", "loss", "val_loss"], hist))
        grid = default_grid(Y.shape[1])
        rows = [[seeds[i], h, yt, yp] for k, i in enumerate(te) for h, yt, yp in zip(grid, Y[i], pred.gap[k])]
        run.wrote(write_csv(run.path("fig6.csv"), ["seed", "h", "true_gap", "predicted_gap"], rows))


def _iqr(values) -> float:
    q1, q3 = np.percentile(values, [25, 75])
    return float(q3 - q1)


def cmd_stats(args, run: Run):
    inputs = [_require(Path(p)) for p in args.inputs]
    run.used(*inputs)
    if args.fig == 1:
        by_n = {}
        for p in inputs:
            for row in read_csv(p):
                by_n.setdefault(int(row["n_spins"]), []).append(float(row["h_c_delta"]))
        edges = np.linspace(0.0, 1.0, 41)
        rows, summary = [], {}
        for n in sorted(by_n):
            dens, _ = np.histogram(by_n[n], bins=edges, density=True)
            rows.extend([n, lo, hi, d] for lo, hi, d in zip(edges[:-1], edges[1:], dens))
            summary[str(n)] = {"count": len(by_n[n]), "median": float(np.median(by_n[n])), "iqr": _iqr(by_n[n])}
        iqrs = [summary[str(n)]["iqr"] for n in sorted(by_n)]
        summary["iqr_decreases"] = int(sum(b < a for a, b in zip(iqrs, iqrs[1:])))
        run.wrote(write_csv(run.path("fig1.csv"), ["n_spins", "bin_lo", "bin_hi", "density"], rows))
        run.wrote(write_json(run.path("stats_fig1.json"), summary))
    elif args.fig == 4:
        rows = []
        for p in inputs:
            s = json.loads(p.read_text(encoding="utf-8"))
            rows.append([",".join(map(str, s["n_spins"])), s["kind"], s["pearson_r"], s["pearson_r_in_sample"], s["n"]])
        run.wrote(write_csv(run.path("fig4.csv"), ["n_spins", "kind", "pearson_r", "pearson_r_in_sample", "n"], rows))
    elif args.fig in (8, 9):
        table = {}
        for p in inputs:
            for row in read_csv(p):
                key = (row["label"], int(row["n_spins"]), float(row["T"]))
                table.setdefault(key, []).append(float(row["final_fidelity"]))
        means = sorted((lab, n, T, float(np.mean(v)), len(v)) for (lab, n, T), v in table.items())
        run.wrote(write_csv(run.path("fig8.csv"), ["label", "n_spins", "T", "mean_fidelity", "count"], means))
        if args.fig == 9:
            _scaling_stats(args, run, means)
    elif args.fig == 12:
        rows = [r for p in inputs for r in read_csv(p)]
        amax = np.array([float(r["alpha_max"]) for r in rows])
        in_range = amax[amax <= args.range_max]
        fit = fit_poisson(in_range, args.range_max) if in_range.size else None
        values, counts = np.unique(amax, return_counts=True)
        hist = [[v, c, "over" if v > args.range_max else "in"] for v, c in zip(values, counts)]
        run.wrote(write_csv(run.path("fig12.csv"), ["alpha_max", "count", "range"], hist))
        fids = np.array([float(r["final_fidelity"]) for r in rows])
        corr = pearson_r(amax, fids) if len(rows) > 2 and amax.std() > 0 and fids.std() > 0 else None
        summary = {
            "lambda": fit.lam if fit else None,
            "support": list(fit.support) if fit else None,
            "n_in_range": fit.n_samples if fit else 0,
            "n_total": int(amax.size),
            "median_alpha_max": float(np.median(amax)),
            "pearson_r_alpha_fidelity": corr,
        }
        run.wrote(write_json(run.path("stats_fig12.json"), summary))
    else:
        raise SystemExit(f"unsupported --fig {args.fig}")


def _scaling_stats(args, run: Run, means):
    out, rows = {}, []
    for label in sorted({m[0] for m in means}):
        table = {}
        for lab, n, T, f, _ in means:
            if lab == label:
                table.setdefault(n, ([], []))
                table[n][0].append(T)
                table[n][1].append(f)
        fit = fidelity_scaling(table, args.target)
        out[label] = {"slope": fit.slope, "intercept": fit.intercept, "n_spins": list(fit.n_values), "t_star": list(fit.t_star)}
        rows.extend([label, n, t] for n, t in zip(fit.n_values, fit.t_star))
    run.wrote(write_csv(run.path("fig9.csv"), ["label", "n_spins", "t_star"], rows))
    run.wrote(write_json(run.path("stats_fig9.json"), {"target": args.target, "fits": out}))


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out")
    common.add_argument("--threads", type=_int_at_least(1), default=int(os.environ.get("ANNEALBENCH_THREADS", "1")))
    common.add_argument("--emit-plot-data", action="store_true")
    common.add_argument("--config", help="JSON file with flag defaults (same names as the flags)")

    parser = argparse.ArgumentParser(prog="annealbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="random USA exact-cover instances")
    p.add_argument("--n", type=_int_at_least(3), required=True)
    p.add_argument("--m", type=_int_at_least(1), default=None)
    p.add_argument("--seeds", default="0")
    p.add_argument("--max-attempts", type=_int_at_least(1), default=100_000)
    p.add_argument("--coupling", type=float, default=1.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("spectrum", parents=[common], help="gap profiles and critical fields")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--grid", type=_int_at_least(2), default=128)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("quench", parents=[common], help="DQP curves")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--kind", choices=["G", "X", "both"], default="both")
    p.add_argument("--grid", type=_int_at_least(2), default=20)
    p.add_argument("--tau", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=0.02)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("anneal", parents=[common], help="annealing runs and fidelities")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--protocol", choices=["linear", "quadratic", "fullgap"], default="linear")
    p.add_argument("--hc-source", choices=["constant", "gap", "G", "X"], default="constant")
    p.add_argument("--alpha", default="0", help="gap exponent, or 'sweep' for the alpha_max search")
    p.add_argument("--T", type=_float_list, default=[1.0])
    p.add_argument("--dt", type=float, default=0.005)
    p.add_argument("--samples", type=_int_at_least(2), default=64)
    p.add_argument("--curves", default="out/curves")
    p.add_argument("--profiles", default="out/profiles")
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("regress", parents=[common], help="critical field from DQP features")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--kind", choices=["G", "X"], default="X")
    p.add_argument("--curves", default="out/curves")
    p.add_argument("--critical", default="out/critical_fields.csv")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("train", parents=[common], help="linear network from X curves to gap curves")
    p.add_argument("--dataset")
    p.add_argument("--instances", nargs="+")
    p.add_argument("--points", type=_int_at_least(2), default=128)
    p.add_argument("--epochs", type=_int_at_least(1), default=600)
    p.add_argument("--lr", type=float, default=5.5e-4)
    p.add_argument("--batch-size", type=_int_at_least(1), default=64)
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stats", parents=[common], help="ensemble aggregations")
    p.add_argument("--fig", type=int, choices=[1, 4, 8, 9, 12], required=True)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--range-max", type=float, default=10.0)
    p.set_defaults(func=cmd_stats)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingInput(args.config)
        known = {a.dest for a in parser._subparsers._group_actions[0].choices[args.command]._actions}
        unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    if getattr(args, "command", None) == "train" and not (args.dataset or args.instances):
        parser.error("train needs --dataset or --instances")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except MissingInput as exc:
        print(f"annealbench: {exc}", file=sys.stderr)
        return EXIT_MISSING
    run = Run(args)
    try:
        args.func(args, run)
    except MissingInput as exc:
        print(f"annealbench: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except UsageError as exc:
        print(f"annealbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"annealbench: numerical failure: {exc}", file=sys.stderr)
        run.finish()
        return EXIT_NUMERIC
    run.finish()
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
