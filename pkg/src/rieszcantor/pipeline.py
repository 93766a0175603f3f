"""Battery evaluation and the invariant suite behind ``report`` and ``verify``.

One battery entry is evaluated once: the leaf field feeds the energy, the
martingale split and the corona means, so every quantity of an entry comes
from the same numbers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .capacity import (BatteryEntry, CapacityReport, WolffParams, evaluate_configuration, summarize,
                       wolff_potential)
from .corona import (CoronaParams, build_maximal_trees, check_corona_invariants, corona_decompose,
                     lemma_qp_ratios, tree_statistics)
from .geometry import CantorSpec, build_cantor, transform_tree, validate_tree
from .measure import MassRule, PointCloud, assign_measure, discretize, sigma
from .riesz import (KernelParams, leaf_field, martingale_decompose, max_relative_error, natural_scale,
                    pairing_sum, riesz_energy, riesz_field, riesz_means)

__all__ = ["EntryResult", "run_entry", "run_battery", "battery_summary", "SuiteResult", "verify_suite",
           "closed_form_checks", "similarity_check"]

RATIO_KEYS = ("energy_over_sigma", "sigma_over_wolff", "energy_over_wolff", "gamma_over_cap")


@dataclass
class EntryResult:
    entry: BatteryEntry
    tree: object
    measure: object
    capacity: CapacityReport
    validation: object
    decomposition: object = None
    forest: list = field(default_factory=list)
    invariants: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    qp_ratios: list = field(default_factory=list)
    pythagoras: float | None = None
    leaf_values: np.ndarray | None = None
    timings: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.entry.name

    def qp_max(self, r: float) -> float | None:
        vals = [row[f"r={r:g}"] for row in self.qp_ratios]
        return max(vals) if vals else None

    def corona_ok(self) -> bool:
        return all(v["ok"] for v in self.invariants.values() if v.get("asserted"))

    def row(self) -> dict:
        """Flat summary for CSV output."""
        spec = self.entry.spec
        cap = self.capacity
        out = {"name": self.name, "d": spec.dimension, "s": spec.s, "layout": str(spec.layout),
               "depth": spec.depth, "seed": spec.seed, "mass_rule": self.entry.rule.kind,
               "leaves": cap.leaves, "energy": cap.energy, "sigma": cap.sigma, "wolff_energy": cap.wolff_energy,
               "growth": cap.growth, "cap_nonlinear_proxy": cap.cap_nonlinear_proxy, "gamma_proxy": cap.gamma_proxy}
        out.update({k: cap.ratios.get(k) for k in RATIO_KEYS})
        out["pythagoras_rel_gap"] = self.pythagoras
        if self.decomposition is not None:
            out["top"] = len(self.decomposition.top)
            out["corona_ok"] = self.corona_ok()
            out["max_packing"] = self.statistics.get("max_packing")
            out["max_sigma_ratio"] = self.statistics.get("max_sigma_ratio")
            out["qp_r1.5"] = self.qp_max(1.5)
            out["qp_r2"] = self.qp_max(2.0)
        out["flags"] = ";".join(cap.flags)
        return out

    def to_dict(self) -> dict:
        out = {"name": self.name, "capacity": self.capacity.to_dict(), "validation_ok": self.validation.ok,
               "pythagoras_rel_gap": self.pythagoras}
        if self.decomposition is not None:
            out["corona"] = {
                "top": len(self.decomposition.top),
                "invariants": self.invariants,
                "maximal_trees": [{"kind": m.kind, "order": m.order, "simple_trees": len(m.simple_roots),
                                   "initial": m.is_initial} for m in self.forest],
                "statistics": {k: v for k, v in self.statistics.items() if k != "trees"},
                "qp_ratio_max": {"1.5": self.qp_max(1.5), "2": self.qp_max(2.0)},
            }
        return out


def _entry_config(entry: BatteryEntry, corona: CoronaParams | None) -> dict:
    out = {"spec": entry.spec.to_dict(), "rule": entry.rule.to_dict(),
           "kernel": entry.kernel_params().to_dict(), "wolff": entry.wolff_params().to_dict()}
    if corona is not None:
        out["corona"] = corona.to_dict()
    return out


def run_entry(entry: BatteryEntry, corona: CoronaParams | None = CoronaParams(),
              threads: int | None = None) -> EntryResult:
    """Evaluate capacity quantities and, unless ``corona`` is None, the decomposition."""
    timings = {}
    t0 = time.perf_counter()
    tree = build_cantor(entry.spec)
    val = validate_tree(tree, disconnection=False)
    measure = assign_measure(tree, entry.rule)
    timings["build"] = time.perf_counter() - t0
    kernel = entry.kernel_params()
    lf = None
    if len(tree.leaves) >= 2:
        t0 = time.perf_counter()
        lf = leaf_field(tree, measure, kernel, threads=threads)
        timings["leaf_field"] = time.perf_counter() - t0
    cap = evaluate_configuration(tree, measure, kernel, entry.wolff_params(), entry.name,
                                 _entry_config(entry, corona), field_=lf)
    if not val.ok:
        cap.flags.append("invalid:" + ",".join(sorted(val.kinds())))
    timings.update(cap.timings)
    res = EntryResult(entry, tree, measure, cap, val, timings=timings)
    if lf is not None:
        res.leaf_values = lf.per_leaf(tree)
        md = martingale_decompose(tree, measure, res.leaf_values)
        res.pythagoras = md.pythagoras_gap() / md.norm_sq if md.norm_sq > 0 else 0.0
    if corona is not None:
        t0 = time.perf_counter()
        means = (riesz_means(tree, measure, leaf_values=res.leaf_values) if res.leaf_values is not None
                 else np.zeros((tree.n_cubes, tree.dimension)))
        dec = corona_decompose(tree, measure, corona, means)
        res.decomposition = dec
        res.forest = build_maximal_trees(dec)
        res.invariants = check_corona_invariants(dec)
        res.statistics = tree_statistics(dec)
        res.qp_ratios = lemma_qp_ratios(dec)
        timings["corona"] = time.perf_counter() - t0
    return res


def run_battery(entries, corona: CoronaParams | None = CoronaParams(), threads: int | None = None,
                progress=None) -> list:
    out = []
    for k, entry in enumerate(entries):
        res = run_entry(entry, corona, threads)
        if progress is not None:
            progress(k, len(entries), res)
        out.append(res)
    return out


def battery_summary(results) -> dict:
    """Ratio brackets across the battery plus corona and q/p ratio maxima."""
    summary = summarize([r.capacity for r in results])
    with_corona = [r for r in results if r.decomposition is not None]
    if with_corona:
        summary["corona_ok"] = all(r.corona_ok() for r in with_corona)
        for rr in (1.5, 2.0):
            vals = [v for v in (r.qp_max(rr) for r in with_corona) if v is not None]
            summary[f"qp_ratio_max_r{rr:g}"] = max(vals) if vals else None
        summary["max_packing"] = max(r.statistics["max_packing"] for r in with_corona)
        summary["max_sigma_ratio"] = max(r.statistics["max_sigma_ratio"] for r in with_corona)
    gaps = [r.pythagoras for r in results if r.pythagoras is not None]
    summary["max_pythagoras_rel_gap"] = max(gaps) if gaps else None
    return summary


# -- closed forms and similarity --------------------------------------------------------------

def closed_form_checks() -> dict:
    """Hand-computable fixtures: a Wolff point mass and the two-point energy."""
    cloud = PointCloud.from_arrays(np.array([[1.0, 0.0]]), np.array([1.0]))
    w = wolff_potential(cloud, np.zeros(2), WolffParams(alpha=1.0 / 3.0, p=1.5))
    # two leaves of mass 1/2 with centroids one unit apart
    spec = CantorSpec(1, 0.5, layout=((-1 / 3,), (1 / 3,)), ratio=1 / 3, depth=1, root_side=1.5)
    tree = build_cantor(spec)
    energy = riesz_energy(tree, assign_measure(tree), KernelParams(spec.s, mode="direct"))
    return {"wolff_point_mass": {"value": w, "expected": 1.0 / 3.0, "ok": abs(w - 1 / 3) <= 1e-8},
            "two_point_energy": {"value": energy, "expected": 0.25, "ok": abs(energy - 0.25) <= 1e-8}}


def similarity_check(entry: BatteryEntry, t: float = 3.7, v=(1.0, -2.0)) -> dict:
    """Relative change of E_K / sigma and gamma/cap proxies under x -> t x + v."""
    base = run_entry(entry, None)
    spec2 = entry.spec.transformed(t, tuple(v)[:entry.spec.dimension])
    moved = run_entry(BatteryEntry(spec2, entry.rule, entry.kernel, entry.wolff, entry.name + "-moved"), None)
    out = {}
    for key in ("energy_over_sigma", "gamma_over_cap"):
        a, b = base.capacity.ratios[key], moved.capacity.ratios[key]
        out[key] = {"base": a, "moved": b, "rel": abs(a - b) / abs(a)}
    return out


# -- verify suite ----------------------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    ok: bool
    details: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "details": self.details}


def _suite(name, fn):
    try:
        ok, details = fn()
    except Exception as exc:  # a crashing suite is a failed suite
        return SuiteResult(name, False, {"error": f"{type(exc).__name__}: {exc}"})
    return SuiteResult(name, bool(ok), details)


def verify_suite(config, results=None, direct_limit: int = 4096, progress=None) -> list:
    """Run every invariant family on the configured battery.

    ``results`` reuses an already evaluated battery.  Checks needing an
    O(N^2) direct sum run only on entries with at most ``direct_limit`` leaves.
    """
    entries = config.entries()
    if results is None:
        results = run_battery(entries, config.corona, config.threads, progress)
    suites = []

    def geometry():
        bad = [r.name for r in results if not r.validation.ok]
        return not bad, {"entries": len(results), "invalid": bad}

    def measure():
        errs = {r.name: r.measure.consistency_error() for r in results}
        worst = max(errs.values())
        return worst <= 1e-12, {"max_consistency_error": worst}

    def pythagoras():
        gaps = {r.name: r.pythagoras for r in results if r.pythagoras is not None}
        worst = max(gaps.values(), default=0.0)
        return worst <= 1e-10, {"max_rel_gap": worst}

    def small():
        return [r for r in results if 2 <= len(r.tree.leaves) <= direct_limit]

    def antisymmetry():
        rows = {}
        for r in small():
            cloud = discretize(r.measure)
            tot = pairing_sum(cloud, r.tree.s)
            rows[r.name] = float(np.linalg.norm(tot) / natural_scale(cloud, r.tree.s))
        worst = max(rows.values(), default=0.0)
        return worst <= 1e-9, {"max_norm_over_scale": worst, "entries": len(rows)}

    def treecode():
        rows = {}
        for r in small():
            cloud = discretize(r.measure)
            kp = r.entry.kernel_params()
            tc = riesz_field(cloud, None, kp, mode="treecode")
            dr = riesz_field(cloud, None, kp, mode="direct")
            rows[r.name] = max_relative_error(tc.values, dr.values)
        worst = max(rows.values(), default=0.0)
        return worst <= 1e-6, {"max_rel_error": worst, "entries": len(rows)}

    def corona():
        failed = {r.name: [k for k, v in r.invariants.items() if v.get("asserted") and not v["ok"]]
                  for r in results if r.decomposition is not None}
        failed = {k: v for k, v in failed.items() if v}
        reported = {}
        for r in results:
            for k, v in r.invariants.items():
                if not v.get("asserted") and not v["ok"]:
                    reported.setdefault(k, []).append(r.name)
        return not failed, {"failed": failed, "reported_only": reported}

    def closed_forms():
        res = closed_form_checks()
        return all(v["ok"] for v in res.values()), res

    def similarity():
        cand = [r.entry for r in small()]
        if not cand:
            return True, {"skipped": "no entry small enough"}
        res = similarity_check(cand[0])
        return all(v["rel"] <= 1e-9 for v in res.values()), {"entry": cand[0].name, **res}

    def finite_brackets():
        summ = battery_summary(results)
        ok = all(math.isfinite(summ[k]["spread"]) for k in RATIO_KEYS if k in summ)
        return ok, {k: summ.get(k) for k in RATIO_KEYS}

    for name, fn in (("geometry", geometry), ("measure", measure), ("martingale", pythagoras),
                     ("antisymmetry", antisymmetry), ("treecode", treecode), ("corona", corona),
                     ("closed_forms", closed_forms), ("similarity", similarity),
                     ("finite_brackets", finite_brackets)):
        suites.append(_suite(name, fn))
    return suites
