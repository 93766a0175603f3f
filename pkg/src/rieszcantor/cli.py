"""Command line entry point: ``rieszcantor <command> [--config FILE] [--out DIR] ...``.

Commands
    generate   tree, mass and point-cloud dumps per battery entry
    energy     E_K, sigma and the martingale block table per entry
    corona     decomposition JSON with audit records per entry
    capacity   capacity proxies and Wolff energies per entry
    report     the whole battery: ratio brackets, corona summaries, figures
    bench      direct against treecode timings and accuracy
    verify     run the invariant suite; exit 1 if anything fails

Every command writes ``manifest.json`` into the output directory.  Exit code 2
signals a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _kernels
from .config import SCHEMA_VERSION, ExperimentConfig, load_config
from .corona import dump_decomposition
from .errors import ConfigError, RieszCantorError
from .geometry import CantorSpec, build_cantor, dump_spec, dump_tree
from .measure import assign_measure, discretize, dump_cloud, dump_masses
from .pipeline import battery_summary, run_battery, run_entry, verify_suite
from .riesz import KernelParams, martingale_decompose, max_relative_error, riesz_field

__all__ = ["main", "build_parser"]

COMMANDS = ("generate", "energy", "corona", "capacity", "report", "bench", "verify")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


class Run:
    """Output directory, file index and stage timings of one invocation."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.files = []
        self.stages = {}
        self.started = datetime.now(timezone.utc)
        out.mkdir(parents=True, exist_ok=True)

    def header(self, s: float | None = None, d: int | None = None) -> dict:
        c = self.cfg.corona
        h = {"schema_version": SCHEMA_VERSION, "tool_version": _version(), "config_hash": self.cfg.digest(),
             "B": c.B, "M": c.M, "delta0": c.delta0, "A": c.A, "delta_W": c.delta_W,
             "delta_W_prime": c.delta_W_prime, "c_db": c.c_db}
        if s is None or d is None:
            # battery-wide values; mixed batteries list every value
            specs = [b.spec for b in self.cfg.battery]
            ss = sorted({float(x["s"]) for x in specs})
            ds = sorted({int(x["dimension"]) for x in specs})
            s = s if s is not None else (ss[0] if len(ss) == 1 else ";".join(map(str, ss)) or None)
            d = d if d is not None else (ds[0] if len(ds) == 1 else ";".join(map(str, ds)) or None)
        if s is not None:
            h["s"] = s
        if d is not None:
            h["d"] = d
        return h

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg.formats

    def write_text(self, rel: str, text: str) -> Path:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files.append(rel)
        return path

    def write_json(self, rel: str, data) -> Path:
        return self.write_text(rel, json.dumps(_clean(data), indent=1, sort_keys=True) + "\n")

    def write_csv(self, rel: str, rows: list, header: dict) -> Path | None:
        if not rows:
            return None
        buf = io.StringIO()
        for k, v in header.items():
            buf.write(f"# {k}={v}\n")
        cols = list(rows[0])
        for r in rows[1:]:
            cols.extend(k for k in r if k not in cols)
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in cols})
        return self.write_text(rel, buf.getvalue())

    def figure(self, rel_stem: str, fn, *args, **kw):
        for fmt in ("svg", "png"):
            if self.wants(fmt):
                path = self.out / f"{rel_stem}.{fmt}"
                path.parent.mkdir(parents=True, exist_ok=True)
                fn(*args, path=path, **kw)
                self.files.append(f"{rel_stem}.{fmt}")

    def stage(self, name: str, t0: float):
        self.stages[name] = round(time.perf_counter() - t0, 3)

    def manifest(self, status: str, extra: dict | None = None) -> Path:
        finished = datetime.now(timezone.utc)
        index = []
        for rel in self.files:
            data = (self.out / rel).read_bytes()
            index.append({"path": rel, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool": "rieszcantor",
            "tool_version": _version(),
            "command": self.command,
            "status": status,
            "config_source": self.cfg.source,
            "config_hash": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "overrides": self.cfg.overrides(),
            "started": self.started.isoformat(),
            "finished": finished.isoformat(),
            "runtimes_s": self.stages,
            "files": index,
        }
        if extra:
            doc.update(extra)
        path = self.out / "manifest.json"
        path.write_text(json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n")
        return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, np.floating):
        return repr(float(v))
    return "" if v is None else v


def _entry_dir(name: str) -> str:
    return name.replace("/", "_")


# -- commands ------------------------------------------------------------------------------------

def cmd_generate(run: Run) -> int:
    """Write tree, mass and cloud dumps."""
    for entry in run.cfg.entries():
        t0 = time.perf_counter()
        tree = build_cantor(entry.spec)
        mu = assign_measure(tree, entry.rule)
        base = _entry_dir(entry.name)
        run.write_text(f"{base}/spec.toml", dump_spec(entry.spec))
        run.write_text(f"{base}/tree.txt", dump_tree(tree))
        run.write_text(f"{base}/masses.txt", dump_masses(mu))
        if run.wants("csv"):
            run.write_text(f"{base}/cloud.csv", dump_cloud(discretize(mu)))
        if tree.depth > 0 and tree.dimension >= 1:
            from .plotting import plot_cantor
            run.figure(f"{base}/cantor", plot_cantor, tree, mu)
        run.stage(entry.name, t0)
    return 0


def cmd_energy(run: Run) -> int:
    """Riesz energy and martingale tables."""
    rows, blocks, out = [], [], []
    for entry in run.cfg.entries():
        t0 = time.perf_counter()
        res = run_entry(entry, None, run.cfg.threads)
        cap = res.capacity
        row = {"name": entry.name, "d": entry.spec.dimension, "s": entry.spec.s, "depth": entry.spec.depth,
               "leaves": cap.leaves, "energy": cap.energy, "sigma": cap.sigma,
               "energy_over_sigma": cap.ratios.get("energy_over_sigma"), "pythagoras_rel_gap": res.pythagoras}
        if res.leaf_values is not None:
            md = martingale_decompose(res.tree, res.measure, res.leaf_values)
            gen = res.tree.generation
            per_gen = np.bincount(gen, weights=md.block_norms, minlength=res.tree.depth + 1)
            for g, v in enumerate(per_gen[: res.tree.depth]):
                blocks.append({"name": entry.name, "generation": g, "block_norm_sq": float(v)})
            row.update(norm_sq=md.norm_sq, mean_term=md.mean_term, block_total=md.block_total)
            if run.wants("svg") or run.wants("png"):
                from .plotting import plot_martingale
                run.figure(f"figures/martingale_{_entry_dir(entry.name)}", plot_martingale, per_gen[: res.tree.depth])
        rows.append(row)
        out.append(row)
        run.stage(entry.name, t0)
    header = run.header()
    if run.wants("json"):
        run.write_json("energy.json", {"header": header, "entries": out, "martingale": blocks})
    if run.wants("csv"):
        run.write_csv("energy.csv", rows, header)
        run.write_csv("martingale.csv", blocks, header)
    return 0


def cmd_corona(run: Run) -> int:
    """Corona decomposition with audit records."""
    rows = []
    for entry in run.cfg.entries():
        t0 = time.perf_counter()
        res = run_entry(entry, run.cfg.corona, run.cfg.threads)
        dec = res.decomposition
        doc = json.loads(dump_decomposition(dec, res.forest))
        doc["header"] = run.header(entry.spec.s, entry.spec.dimension)
        doc["invariants"] = res.invariants
        doc["statistics"] = res.statistics
        doc["qp_ratios"] = res.qp_ratios
        doc["regime"] = run.cfg.corona.regime()
        run.write_json(f"corona/{_entry_dir(entry.name)}.json", doc)
        row = {"name": entry.name, "top": len(dec.top), "corona_ok": res.corona_ok(),
               "HD": sum(len(dec.stop(r, "HD")) for r in dec.top),
               "LD": sum(len(dec.stop(r, "LD")) for r in dec.top),
               "BR": sum(len(dec.stop(r, "BR")) for r in dec.top),
               "truncated_trees": res.statistics["n_truncated"],
               "max_packing": res.statistics["max_packing"], "max_sigma_ratio": res.statistics["max_sigma_ratio"],
               "qp_r1.5": res.qp_max(1.5), "qp_r2": res.qp_max(2.0)}
        for kind in ("W", "LW", "MDec", "TInc"):
            row[f"maximal_{kind}"] = sum(m.kind == kind for m in res.forest)
        rows.append(row)
        if run.wants("svg") or run.wants("png"):
            from .plotting import plot_cantor
            run.figure(f"figures/corona_{_entry_dir(entry.name)}", plot_cantor, res.tree, res.measure,
                       decomposition=dec)
        run.stage(entry.name, t0)
    if run.wants("csv"):
        run.write_csv("corona.csv", rows, run.header())
    return 0


def cmd_capacity(run: Run) -> int:
    """Capacity proxies and Wolff energies."""
    rows = []
    for entry in run.cfg.entries():
        t0 = time.perf_counter()
        res = run_entry(entry, None, run.cfg.threads)
        rows.append(res.capacity)
        run.stage(entry.name, t0)
    header = run.header()
    if run.wants("json"):
        run.write_json("capacity.json", {"header": header, "reports": [r.to_dict() for r in rows]})
    if run.wants("csv"):
        flat = []
        for r in rows:
            d = {k: v for k, v in r.to_dict().items() if k not in ("config", "ratios")}
            d["flags"] = ";".join(r.flags)
            d.update(r.ratios)
            flat.append(d)
        run.write_csv("capacity.csv", flat, header)
    return 0


def _progress(k, n, res):
    print(f"[{k + 1}/{n}] {res.name}", file=sys.stderr, flush=True)


def cmd_report(run: Run) -> int:
    """Full battery report with figures."""
    t0 = time.perf_counter()
    results = run_battery(run.cfg.entries(), run.cfg.corona, run.cfg.threads, _progress)
    for r in results:
        run.stages[r.name] = round(sum(r.timings.values()), 3)
    summary = battery_summary(results)
    header = run.header()
    if run.wants("json"):
        run.write_json("report.json", {"header": header, "regime": run.cfg.corona.regime(), "summary": summary,
                                       "entries": [r.to_dict() for r in results]})
    rows = [r.row() for r in results]
    if run.wants("csv"):
        run.write_csv("report.csv", rows, header)
    if run.wants("svg") or run.wants("png"):
        from .plotting import plot_cantor, plot_ratios
        run.figure("figures/ratios", plot_ratios, rows)
        for r in results:
            if r.tree.depth > 0:
                run.figure(f"figures/cantor_{_entry_dir(r.name)}", plot_cantor, r.tree, r.measure)
                break
    run.stage("total", t0)
    return 0


def bench_rows(cfg: ExperimentConfig, threads=None) -> tuple[list, list]:
    """Timing rows for the configured depths and accuracy rows for random specs."""
    b = cfg.bench
    spec0 = CantorSpec.from_dict(dict(b["spec"], depth=2), "bench.spec")
    warm = discretize(assign_measure(build_cantor(spec0)))
    kp = KernelParams(spec0.s, theta_open=b["theta_open"], **{k: v for k, v in cfg.kernel.items()
                                                               if k not in ("theta_open", "mode")})
    riesz_field(warm, None, kp, mode="direct", threads=threads)
    riesz_field(warm, None, kp, mode="treecode", threads=threads)
    timing = []
    for depth in b["depths"]:
        spec = CantorSpec.from_dict(dict(b["spec"], depth=depth), "bench.spec")
        cloud = discretize(assign_measure(build_cantor(spec)))
        t0 = time.perf_counter()
        tc = riesz_field(cloud, None, kp, mode="treecode", threads=threads)
        t_tc = time.perf_counter() - t0
        t0 = time.perf_counter()
        dr = riesz_field(cloud, None, kp, mode="direct", threads=threads)
        t_dr = time.perf_counter() - t0
        timing.append({"spec": "bench", "depth": depth, "N": len(cloud), "direct_s": t_dr, "treecode_s": t_tc,
                       "speedup": t_dr / t_tc, "max_rel_err": max_relative_error(tc.values, dr.values),
                       "theta_open": b["theta_open"]})
    accuracy = []
    for seed in range(int(b["random_specs"])):
        spec = CantorSpec.from_dict(dict(b["random_spec"], depth=b["random_depth"], seed=seed), "bench.random_spec")
        cloud = discretize(assign_measure(build_cantor(spec)))
        tc = riesz_field(cloud, None, kp, mode="treecode", threads=threads)
        dr = riesz_field(cloud, None, kp, mode="direct", threads=threads)
        accuracy.append({"spec": "random", "seed": seed, "depth": b["random_depth"], "N": len(cloud),
                         "max_rel_err": max_relative_error(tc.values, dr.values)})
    return timing, accuracy


def cmd_bench(run: Run) -> int:
    """Direct against treecode timing and accuracy."""
    t0 = time.perf_counter()
    timing, accuracy = bench_rows(run.cfg, run.cfg.threads)
    run.stage("bench", t0)
    header = run.header(run.cfg.bench["spec"]["s"], run.cfg.bench["spec"]["dimension"])
    for r in timing:
        print(f"N={r['N']:>8d}  direct {r['direct_s']:8.2f} s  treecode {r['treecode_s']:7.2f} s  "
              f"speedup {r['speedup']:6.1f}  max rel err {r['max_rel_err']:.2e}")
    if accuracy:
        print(f"random specs: {len(accuracy)}, worst max rel err {max(r['max_rel_err'] for r in accuracy):.2e}")
    if run.wants("json"):
        run.write_json("bench.json", {"header": header, "timing": timing, "accuracy": accuracy})
    if run.wants("csv"):
        run.write_csv("bench.csv", timing + accuracy, header)
    if run.wants("svg") or run.wants("png"):
        from .plotting import plot_bench
        run.figure("figures/bench", plot_bench, timing)
    return 0


def cmd_verify(run: Run) -> int:
    """Run the invariant suite."""
    t0 = time.perf_counter()
    suites = verify_suite(run.cfg, progress=_progress)
    run.stage("verify", t0)
    ok = all(s.ok for s in suites)
    for s in suites:
        print(f"{'PASS' if s.ok else 'FAIL'}  {s.name}")
    run.write_json("verify.json", {"header": run.header(), "ok": ok, "suites": [s.to_dict() for s in suites]})
    run.suites = {s.name: ("green" if s.ok else "red") for s in suites}
    return 0 if ok else 1


HANDLERS = {"generate": cmd_generate, "energy": cmd_energy, "corona": cmd_corona, "capacity": cmd_capacity,
            "report": cmd_report, "bench": cmd_bench, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment TOML file (default: the shipped battery)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="run only this seed of randomised batteries")
    common.add_argument("--depth", type=int, help="use this depth for every battery and the bench")
    common.add_argument("--threads", type=int, help="numba worker threads")
    common.add_argument("--format", action="append", choices=("json", "csv", "svg", "png"), dest="formats",
                        help="output format; repeat to select several (default: from the config)")
    parser = argparse.ArgumentParser(prog="rieszcantor", description="Riesz transforms, corona decompositions and capacities on Cantor sets.",
                                     epilog="exit status: 0 ok, 1 failed verification or run error, 2 configuration error")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        doc = HANDLERS[name].__doc__.rstrip('.')
        sub.add_parser(name, parents=[common], help=doc[0].lower() + doc[1:])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.depth is not None and args.depth < 0:
            raise ConfigError("depth must be non-negative", "--depth")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("threads must be positive", "--threads")
        cfg = cfg.with_overrides(args.seed, args.depth, args.out, args.threads,
                                 tuple(args.formats) if args.formats else None)
        cfg.entries()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RieszCantorError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _kernels.set_threads(cfg.threads)
    run = Run(args.command, cfg, Path(cfg.output_dir))
    try:
        status = HANDLERS[args.command](run)
    except RieszCantorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.manifest("error", {"error": str(exc)})
        return 1
    extra = {"suites": run.suites} if hasattr(run, "suites") else None
    run.manifest("ok" if status == 0 else "failed", extra)
    print(f"wrote {len(run.files)} files and manifest.json to {run.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
