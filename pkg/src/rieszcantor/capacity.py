"""Wolff potentials, capacity proxies and the comparability report.

With beta = d - alpha p and q = p' - 1 the Wolff potential of a point cloud is

    W(x) = int_cut^inf (mu(B(x, r)) / r^beta)^q dr / r,

and mu(B(x, r)) is a step function of r.  Between consecutive distances the
integrand is a pure power, so the integral is a finite sum of closed-form
terms; the last term covers [r_max, inf) exactly.  For large clouds a tree
mode merges distant cubes into their centre of mass first.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._hierarchy import Hierarchy
from .errors import DepthZero, EmptyCloud, OverlappingCubes, ZeroEnergy, ZeroWolffEnergy
from .geometry import CantorSpec, CantorTree, build_cantor, validate_tree
from .measure import DyadicMeasure, MassRule, PointCloud, assign_measure, discretize, sigma
from .riesz import KernelParams, LeafField, leaf_field, riesz_energy

__all__ = [
    "WolffParams",
    "CapacityReport",
    "BatteryEntry",
    "wolff_potential",
    "wolff_potentials",
    "wolff_energy",
    "capacity_nonlinear",
    "capacity_nonlinear_from",
    "growth_scan",
    "capacity_riesz",
    "capacity_riesz_from",
    "evaluate_configuration",
    "comparability_report",
    "two_cube_lower_bound_check",
]


@dataclass(frozen=True)
class WolffParams:
    """Exponents of the Wolff potential and how it is evaluated.

    ``cutoff_factor`` times the side of a leaf is the inner radius used for
    points seen from inside their own leaf.  ``mode`` is ``exact``, ``tree``
    or ``auto`` (exact up to ``exact_max`` points).
    """

    alpha: float
    p: float = 1.5
    cutoff_factor: float = 0.5
    mode: str = "auto"
    theta_w: float = 0.1
    exact_max: int = 4096

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.mode not in ("auto", "exact", "tree"):
            raise ValueError("mode must be auto, exact or tree")
        if not 0 < self.theta_w < 1:
            raise ValueError("theta_w must lie in (0, 1)")
        if self.cutoff_factor < 0:
            raise ValueError("cutoff_factor must be non-negative")

    @classmethod
    def for_corollary(cls, d: int, s: float, **kw) -> "WolffParams":
        """alpha = 2(d - s)/3 and p = 3/2, the exponents paired with gamma_s."""
        return cls(alpha=2.0 * (d - s) / 3.0, p=1.5, **kw)

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q(self) -> float:
        return 1.0 / (self.p - 1.0)

    def beta(self, d: int) -> float:
        b = d - self.alpha * self.p
        if not b > 0:
            raise ValueError(f"alpha * p = {self.alpha * self.p} must be below d = {d}")
        return b

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "p": self.p, "p_dual": self.p_dual, "cutoff_factor": self.cutoff_factor,
                "mode": self.mode, "theta_w": self.theta_w}


def wolff_potentials(cloud: PointCloud, x, params: WolffParams, cutoff=0.0, mode: str | None = None) -> np.ndarray:
    """Wolff potentials of ``cloud`` at the rows of ``x`` (inner cutoff per row or scalar)."""
    if len(cloud) == 0:
        raise EmptyCloud("cloud has no points")
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    d = cloud.dimension
    bq = params.beta(d) * params.q
    cut = np.ascontiguousarray(np.broadcast_to(np.asarray(cutoff, dtype=float), (len(x),)))
    mode = mode or params.mode
    if mode == "auto":
        mode = "exact" if len(cloud) <= params.exact_max else "tree"
    if mode == "exact":
        return _kernels.wolff_exact(x, cut, cloud.points, cloud.weights, bq, params.q)
    h = Hierarchy.for_cloud(cloud)
    _, _, com, rad_com, mass = h.mass_stats
    return _kernels.wolff_tree(x, cut, h.points, h.weights, com, rad_com, mass, h.child_start,
                               h.child_count, h.pstart, h.pend, h.bucket, params.theta_w, bq, params.q)


def wolff_potential(cloud: PointCloud, x, params: WolffParams, cutoff: float = 0.0) -> float:
    """Wolff potential of ``cloud`` at one point ``x`` (exact piecewise integration)."""
    return float(wolff_potentials(cloud, np.asarray(x, dtype=float)[None], params, cutoff, mode="exact")[0])


def wolff_energy(tree: CantorTree, measure: DyadicMeasure, params: WolffParams, mode: str | None = None) -> float:
    """sum over leaves P of mu(P) W(z_P), z_P the centroid, cut at ``cutoff_factor`` * side(P)."""
    cloud = discretize(measure, "leaf-representatives", 1)
    cut = params.cutoff_factor * tree.side[cloud.owner]
    pots = wolff_potentials(cloud, cloud.points, params, cut, mode)
    return float(math.fsum(cloud.weights * pots))


def capacity_nonlinear_from(total: float, w_tot: float, params: WolffParams) -> float:
    """c * mu(E) with c = (mu(E)/W_tot)^(1/(p'-1))."""
    if not w_tot > 0:
        raise ZeroWolffEnergy("Wolff energy vanishes")
    return (total / w_tot) ** (1.0 / params.q) * total


def capacity_nonlinear(measure: DyadicMeasure, params: WolffParams, w_tot: float | None = None) -> float:
    """Scaling proxy for the nonlinear capacity (a lower estimate up to Wolff constants)."""
    if w_tot is None:
        w_tot = wolff_energy(measure.tree, measure, params)
    return capacity_nonlinear_from(measure.total, w_tot, params)


def growth_scan(tree: CantorTree, measure: DyadicMeasure, s: float | None = None) -> dict:
    """max of mu(B(z_P, l(Q)))/l(Q)^s over leaves P and cubes Q containing P.

    Balls are closed; a relative slack of 1e-9 on radii keeps the count stable
    when points sit exactly on a sphere.
    """
    s = tree.s if s is None else s
    cloud = discretize(measure, "leaf-representatives", 1)
    h = Hierarchy.for_cloud(cloud)
    _, rad, _, _, mass = h.mass_stats
    owners = cloud.owner
    chains = [owners]
    radii = [tree.ell[owners]]
    cur = owners
    while True:
        up = tree.parent[cur]
        if np.all(up < 0):
            break
        cur = np.where(up >= 0, up, cur)
        chains.append(cur)
        radii.append(tree.ell[cur])
    qx = np.ascontiguousarray(np.tile(cloud.points, (len(radii), 1)))
    qr = np.ascontiguousarray(np.concatenate(radii))
    masses = _kernels.ball_masses(qx, qr, h.points, h.weights, h.center, rad, mass, h.child_start,
                                  h.child_count, h.pstart, h.pend, h.bucket, 1e-9)
    dens = masses / qr ** s
    k = int(np.argmax(dens))
    return {"max": float(dens[k]), "center": qx[k].tolist(), "radius": float(qr[k]), "balls": len(qr)}


def capacity_riesz_from(total: float, energy: float, growth: float) -> float:
    """c * mu(E) with c = min((mu(E)/E_K)^(1/2), 1/growth)."""
    if not energy > 0:
        raise ZeroEnergy("Riesz energy vanishes")
    c = math.sqrt(total / energy)
    if growth > 0:
        c = min(c, 1.0 / growth)
    return c * total


def capacity_riesz(measure: DyadicMeasure, s: float, energy: float, growth: float | dict) -> float:
    """Scaling proxy for gamma_s: the largest multiple of mu meeting the energy and growth constraints."""
    g = growth["max"] if isinstance(growth, dict) else float(growth)
    return capacity_riesz_from(measure.total, energy, g)


# -- reports ----------------------------------------------------------------------------

@dataclass
class CapacityReport:
    """One configuration of the comparability battery; capacities are scaling proxies."""

    name: str
    config: dict
    total_mass: float = 0.0
    energy: float = float("nan")
    sigma: float = float("nan")
    wolff_energy: float = float("nan")
    growth: float = float("nan")
    cap_nonlinear_proxy: float = float("nan")
    gamma_proxy: float = float("nan")
    sup_theta: float = float("nan")
    leaves: int = 0
    flags: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def excluded(self) -> bool:
        return bool(self.flags)

    @property
    def ratios(self) -> dict:
        if self.excluded:
            return {}
        return {
            "energy_over_sigma": self.energy / self.sigma,
            "sigma_over_wolff": self.sigma / self.wolff_energy,
            "energy_over_wolff": self.energy / self.wolff_energy,
            "gamma_over_cap": self.gamma_proxy / self.cap_nonlinear_proxy,
        }

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "name", "total_mass", "energy", "sigma", "wolff_energy", "growth", "cap_nonlinear_proxy",
            "gamma_proxy", "sup_theta", "leaves", "flags")}
        out["ratios"] = self.ratios
        out["config"] = self.config
        return out


@dataclass(frozen=True)
class BatteryEntry:
    spec: CantorSpec
    rule: MassRule = MassRule()
    kernel: KernelParams | None = None
    wolff: WolffParams | None = None
    name: str = ""

    def kernel_params(self) -> KernelParams:
        return self.kernel or KernelParams(self.spec.s)

    def wolff_params(self) -> WolffParams:
        return self.wolff or WolffParams.for_corollary(self.spec.dimension, self.spec.s)


def evaluate_configuration(tree: CantorTree, measure: DyadicMeasure, kernel: KernelParams,
                           wolff: WolffParams, name: str = "", config: dict | None = None,
                           field_: LeafField | None = None) -> CapacityReport:
    """Energy, sigma, Wolff energy, growth and both capacity proxies for one measure.

    ``field_`` reuses an already evaluated leaf field for the energy.
    """
    rep = CapacityReport(name=name, config=config or {}, total_mass=measure.total,
                         leaves=len(tree.leaves), sup_theta=float(measure.theta.max()))
    if tree.depth == 0:
        rep.flags.append("DepthZero")
        return rep
    t0 = time.perf_counter()
    rep.energy = riesz_energy(tree, measure, kernel, field_=field_ or leaf_field(tree, measure, kernel))
    rep.timings["energy"] = time.perf_counter() - t0
    rep.sigma = sigma(measure, np.arange(tree.n_cubes))
    t0 = time.perf_counter()
    rep.wolff_energy = wolff_energy(tree, measure, wolff)
    rep.timings["wolff"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep.growth = growth_scan(tree, measure, kernel.s)["max"]
    rep.timings["growth"] = time.perf_counter() - t0
    rep.cap_nonlinear_proxy = capacity_nonlinear_from(measure.total, rep.wolff_energy, wolff)
    rep.gamma_proxy = capacity_riesz_from(measure.total, rep.energy, rep.growth)
    return rep


def comparability_report(battery) -> tuple[list, dict]:
    """Evaluate every battery entry and summarise the ratio brackets.

    Depth-zero entries are flagged and left out of the summary; entries whose
    trees fail validation are flagged likewise.
    """
    reports = []
    for k, entry in enumerate(battery):
        tree = build_cantor(entry.spec)
        name = entry.name or f"entry{k}"
        config = {"spec": entry.spec.to_dict(), "rule": entry.rule.to_dict(),
                  "kernel": entry.kernel_params().to_dict(), "wolff": entry.wolff_params().to_dict()}
        val = validate_tree(tree, disconnection=False)
        measure = assign_measure(tree, entry.rule)
        rep = evaluate_configuration(tree, measure, entry.kernel_params(), entry.wolff_params(), name, config)
        if not val.ok:
            rep.flags.append("invalid:" + ",".join(sorted(val.kinds())))
        reports.append(rep)
    return reports, summarize(reports)


def summarize(reports) -> dict:
    used = [r for r in reports if not r.excluded]
    out = {"entries": len(reports), "used": len(used), "excluded": [r.name for r in reports if r.excluded]}
    for key in ("energy_over_sigma", "sigma_over_wolff", "energy_over_wolff", "gamma_over_cap"):
        vals = [r.ratios[key] for r in used]
        if vals:
            lo, hi = min(vals), max(vals)
            out[key] = {"min": lo, "max": hi, "spread": hi / lo if lo > 0 else float("inf")}
    return out


def two_cube_lower_bound_check(tree: CantorTree, measure: DyadicMeasure, q_u, q_d,
                               params: KernelParams | None = None, energy: float | None = None) -> dict:
    """E_K against sigma({root}) for a measure with two separated heavy cubes.

    Returns both sides, their ratio and the hypothesis ratios
    dist(Q_u, Q_d)/l(root), mu(Q_u)/mu(root), mu(Q_d)/mu(root).
    """
    u, dd = tree.index(q_u), tree.index(q_d)
    if tree.contains(u, dd) or tree.contains(dd, u):
        raise OverlappingCubes(f"{tree.label(u)} and {tree.label(dd)} overlap")
    if tree.depth == 0:
        raise DepthZero("no leaves to compare")
    params = params or KernelParams(tree.s)
    e = riesz_energy(tree, measure, params) if energy is None else energy
    sig = float(measure.theta[0] ** 2 * measure.mass[0])
    ratio = e / sig
    if not ratio > 0:
        raise AssertionError(f"energy ratio {ratio} is not positive")
    return {
        "energy": e,
        "sigma_root": sig,
        "ratio": ratio,
        "dist_ratio": tree.distance(u, dd) / tree.ell[0],
        "mass_ratio_u": float(measure.mass[u] / measure.mass[0]),
        "mass_ratio_d": float(measure.mass[dd] / measure.mass[0]),
        "cubes": (tree.label(u), tree.label(dd)),
    }
