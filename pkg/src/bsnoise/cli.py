"""Command-line front end.

Exit status: 0 on success, 1 when a verification fails, 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bounds import f_curve
from .errors import BosonNoiseError
from .experiment import (
    NETWORK_MODES,
    SCHEMA_VERSION,
    ExperimentConfig,
    epsilon_sweep,
    metadata,
    run_experiment,
    run_full_distribution_experiment,
)
from .linalg import RngStream, haar_unitary
from .noise import PLACEMENTS
from .permanent import EXACT_MAX_N, permanent_glynn, permanent_ryser

SWEEP_COLUMNS = ("epsilon", "mean_distance", "stderr", "bound")
SWEEP_CSV_COLUMNS = SWEEP_COLUMNS + ("n", "m", "trials")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--epsilon", help="scalar or comma-separated list")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--network-mode", choices=NETWORK_MODES)
    p.add_argument("--placement", choices=PLACEMENTS)
    p.add_argument("--with-kn", action="store_true", default=None)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsnoise", description="Boson Sampling with noisy beamsplitters")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, text in [
        ("run", "run trials at one epsilon and write JSONL records and a summary"),
        ("sweep", "mean distance across epsilon values with a power-law fit"),
        ("verify", "run every numerical check"),
        ("full-dist", "enumerate full output distributions and check the distance identity"),
        ("decompose", "sample a Haar network and write it as JSON"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        if name == "verify":
            p.add_argument("--quick", action="store_true", help="smaller sample counts")
            p.add_argument("--json", help="also write results to this file")
        if name == "sweep":
            p.add_argument("--csv", help="write the sweep table here")

    p = sub.add_parser("bench-permanent", help="time Ryser and Glynn permanents")
    p.add_argument("--sizes", default="10,12,14,16,18,20")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")

    p = sub.add_parser("emit-plot-data", help="turn summary files into plot-ready tables")
    p.add_argument("summaries", nargs="*", help="*.summary.json or sweep JSON files")
    p.add_argument("--f-curve", action="store_true", help="emit (n, f(n, n^2)) for n in [11, 100]")
    p.add_argument("--output", help="CSV file (standard output if omitted)")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for key, attr in [("n", "n"), ("m", "m"), ("epsilon", "epsilon"), ("trials", "trials"),
                      ("master_seed", "seed"), ("output_path", "output"), ("network_mode", "network_mode"),
                      ("noise_placement", "placement"), ("compute_kn", "with_kn"), ("workers", "workers")]:
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_mapping(overrides)


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    for eps in cfg.epsilon:
        out = cfg.output_path
        if out and len(cfg.epsilon) > 1:
            p = Path(out)
            out = str(p.with_name(f"{p.stem}_eps{eps:g}{p.suffix}"))
        summary = run_experiment(cfg.replace(output_path=out), eps)
        d = summary.stat("distance")
        print(f"n={cfg.n} m={cfg.m} eps={eps:g} trials={summary.trials} errors={summary.errors}")
        print(f"  mean distance {_fmt(d.mean)} +- {_fmt(d.stderr)}; bound {_fmt(summary.bounds['distance_lower'])}")
        for name in ("X", "defect_H", "defect_K", "sigma_sq"):
            s = summary.stat(name)
            if not math.isnan(s.mean):
                print(f"  {name:9} {_fmt(s.mean)} +- {_fmt(s.stderr)}")
        if out:
            print(f"  records: {out}")
    print("config: " + json.dumps(cfg.to_dict(), sort_keys=True))
    return 0


def _write_table(rows: list[dict], columns, path: str | None) -> None:
    handle = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else r[k]) for k in columns})
    finally:
        if path:
            handle.close()


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if args.epsilon is None and not args.config:
        cfg = cfg.replace(epsilon=(2e-3, 5e-3, 1e-2, 2e-2))
    cfg = cfg.replace(diagnostics=False)
    result = epsilon_sweep(cfg)
    rows = [{**r, "bound": None if r["bound"] is None or math.isnan(r["bound"]) else r["bound"]}
            for r in result.table()]
    _write_table(rows, SWEEP_CSV_COLUMNS, args.csv)
    fit = result.fit
    print(f"fitted exponent {fit.exponent:.4f}, coefficient {fit.coefficient:.4g}, R^2 {fit.r_squared:.4f}")
    print(f"heuristic distance coefficient 2Nn/m = {2 * result.heuristic_coefficient:.4g}")
    if cfg.output_path:
        doc = {"metadata": metadata(cfg), "sweep": result.to_dict()}
        Path(cfg.output_path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))
        print(f"sweep written to {cfg.output_path}")
    return 0


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o))


def cmd_verify(args) -> int:
    from .verification import FAIL, suite_passed, verify_suite

    cfg = _config_from_args(args)
    results = verify_suite(cfg, quick=args.quick)
    for r in results:
        print(r.line(), flush=True)
    ok = suite_passed(results)
    failed = sum(r.status == FAIL for r in results)
    print(f"{len(results) - failed}/{len(results)} checks did not fail")
    if args.json:
        Path(args.json).write_text(json.dumps({"metadata": metadata(cfg), "checks": [r.to_dict() for r in results]},
                                              indent=2, default=_json_default))
    return 0 if ok else 1


def cmd_full_dist(args) -> int:
    cfg = _config_from_args(args)
    res = run_full_distribution_experiment(cfg)
    print(f"n={cfg.n} m={cfg.m} eps={cfg.epsilon[0]:g} trials={len(res.records)}")
    print(f"  max |sum p - 1| = {res.max_mass_error:.3e}")
    print(f"  max |l1 - 2(1 - p1)| = {res.max_identity_error:.3e}")
    print("  " + ("pass" if res.passed else "FAIL"))
    return 0 if res.passed else 1


def cmd_decompose(args) -> int:
    from .network import haar_network, sample_network_direct

    cfg = _config_from_args(args)
    gen = RngStream(cfg.master_seed).generator(0)
    net = haar_network(cfg.n, cfg.m, gen) if cfg.network_mode == "decompose-haar" \
        else sample_network_direct(cfg.n, cfg.m, gen)
    text = net.to_json()
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
        print(f"{len(net)} gates on {cfg.m} modes written to {cfg.output_path}")
    else:
        print(text)
    return 0


def bench_permanent(sizes, repetitions: int = 3, seed: int = 0) -> list[dict]:
    """Best-of-``repetitions`` wall time per permanent for Ryser and Glynn."""
    gen = np.random.default_rng(seed)
    permanent_ryser(np.eye(2))
    permanent_glynn(np.eye(2))
    rows = []
    for n in sizes:
        if n > EXACT_MAX_N:
            raise UsageError(f"n={n} exceeds the cap {EXACT_MAX_N}")
        # unitary minors keep the permanent away from cancellation to zero
        a = haar_unitary(max(n, 2), gen)[:n, :n] * math.sqrt(max(n, 2))
        times = {}
        values = {}
        for name, fn in (("ryser", permanent_ryser), ("glynn", permanent_glynn)):
            best = math.inf
            for _ in range(repetitions):
                start = time.perf_counter()
                values[name] = fn(a)
                best = min(best, time.perf_counter() - start)
            times[name] = best
        rel = abs(values["ryser"] - values["glynn"]) / max(abs(values["ryser"]), 1e-300)
        rows.append({"n": n, "ryser_seconds": times["ryser"], "glynn_seconds": times["glynn"], "rel_diff": rel})
    return rows


def growth_within_model(rows: list[dict], factor: float = 3.0, min_seconds: float = 1e-3) -> bool:
    """Time ratio between sizes within ``factor`` of ``2^dn * (n2/n1)``; tiny timings are skipped."""
    ok = True
    for a, b in zip(rows, rows[1:]):
        if a["ryser_seconds"] < min_seconds:
            continue
        model = 2.0 ** (b["n"] - a["n"]) * b["n"] / a["n"]
        ratio = b["ryser_seconds"] / a["ryser_seconds"]
        ok &= model / factor <= ratio <= model * factor
    return ok


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sizes {args.sizes!r}") from exc
    rows = bench_permanent(sizes, args.repetitions, args.seed)
    print(f"{'n':>4} {'ryser (s)':>12} {'glynn (s)':>12} {'rel diff':>10}")
    for r in rows:
        print(f"{r['n']:>4} {r['ryser_seconds']:>12.3e} {r['glynn_seconds']:>12.3e} {r['rel_diff']:>10.1e}")
    agree = all(r["rel_diff"] <= 1e-10 for r in rows)
    growth = growth_within_model(rows)
    print(f"Ryser/Glynn agreement within 1e-10: {'yes' if agree else 'NO'}")
    print(f"time growth within 3x of 2^dn * n-ratio: {'yes' if growth else 'NO'}")
    if args.output:
        _write_table(rows, ("n", "ryser_seconds", "glynn_seconds", "rel_diff"), args.output)
    return 0 if agree and growth else 1


def _load_plot_sources(paths) -> list[dict]:
    rows = []
    for path in paths:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        meta = doc.get("metadata", {})
        if meta.get("schema_version") != SCHEMA_VERSION:
            raise UsageError(f"{path}: schema version {meta.get('schema_version')!r}, expected {SCHEMA_VERSION}")
        if "sweep" in doc:
            rows.extend(doc["sweep"]["table"])
        elif "stats" in doc and "epsilon" in doc:
            rows.append({"epsilon": doc["epsilon"], "mean_distance": doc["stats"]["distance"]["mean"],
                         "stderr": doc["stats"]["distance"]["stderr"], "bound": doc["bounds"]["distance_lower"]})
        else:
            raise UsageError(f"{path}: neither a run summary nor a sweep")
    return sorted(rows, key=lambda r: r["epsilon"])


def cmd_emit(args) -> int:
    if args.f_curve:
        rows = [{"n": n, "f": f} for n, f in f_curve(11, 100)]
        _write_table(rows, ("n", "f"), args.output)
        return 0
    if not args.summaries:
        raise UsageError("no summary files given (or pass --f-curve)")
    _write_table(_load_plot_sources(args.summaries), SWEEP_COLUMNS, args.output)
    return 0


COMMANDS = {
    "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "full-dist": cmd_full_dist,
    "decompose": cmd_decompose, "bench-permanent": cmd_bench, "emit-plot-data": cmd_emit,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (BosonNoiseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
