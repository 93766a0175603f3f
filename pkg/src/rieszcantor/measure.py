"""Measures on Cantor trees and the density coefficients built from them.

A :class:`DyadicMeasure` stores the mass of every cube.  Densities are
precomputed eagerly when the measure is created, so a measure can be shared
between threads without locking:

* ``theta``    mu(Q) / l(Q)^s
* ``theta_d``  the power of two 2^j with 2^j <= theta < 2^(j+1)
* ``p``        the ancestor-smoothed density sum_{P >= Q} (l(Q)/l(P)) theta(P)

The ancestor chain of ``p`` stops at the root of the stored tree.  An optional
tail adds phantom ancestors of side l0 / tail_ratio^j carrying the full mass.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    EmptyStopFamily,
    InconsistentPrescription,
    NegativeMass,
    NotAnAncestor,
    OverlappingStopFamily,
    UnknownCube,
    ZeroDensity,
)
from .geometry import CantorTree

__all__ = [
    "MassRule",
    "DyadicMeasure",
    "PointCloud",
    "assign_measure",
    "theta",
    "theta_dyadic",
    "dyadic_floor",
    "p_coefficient",
    "p_relative",
    "is_p_doubling",
    "sigma",
    "q_coefficient",
    "q_coefficients",
    "q_sum",
    "check_disjoint",
    "discretize",
    "rd_points",
    "dump_masses",
    "load_masses",
    "dump_cloud",
    "load_cloud",
]

_KINDS = ("uniform", "weighted", "random", "prescribed")


@dataclass(frozen=True)
class MassRule:
    """How mass is split from a cube to its children.

    ``weighted`` uses ``weights[i]`` for the i-th child (renormalised over the
    children a cube actually has); ``random`` draws Dirichlet(concentration)
    splits from ``seed``; ``prescribed`` takes ``table``, a mapping from cube id
    (``(g, i)``, ``"g:i"`` or flat index) to mass, or an array over all cubes.
    Leaves must be covered; interior entries, when present, are checked.
    """

    kind: str = "uniform"
    weights: tuple | None = None
    concentration: float = 1.0
    seed: int = 0
    table: object = None
    total: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown mass rule {self.kind!r}; expected one of {_KINDS}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if any(w < 0 for w in self.weights):
                raise NegativeMass("split weights must be non-negative")
        if self.kind == "weighted" and not self.weights:
            raise ValueError("weighted rule needs weights")
        if self.kind == "random" and not self.concentration > 0:
            raise ValueError("Dirichlet concentration must be positive")
        if self.total < 0:
            raise NegativeMass("total mass must be non-negative")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "total": self.total}
        if self.kind == "weighted":
            out["weights"] = list(self.weights)
        if self.kind == "random":
            out.update(concentration=self.concentration, seed=self.seed)
        return out


class DyadicMeasure:
    """Per-cube masses with eagerly computed density tables (read-only arrays)."""

    def __init__(self, tree: CantorTree, mass, rule: MassRule | None = None,
                 p_tail: bool = False, tail_ratio: float = 0.5):
        mass = np.array(mass, dtype=float)
        if mass.shape != (tree.n_cubes,):
            raise InconsistentPrescription(f"expected {tree.n_cubes} masses, got shape {mass.shape}")
        if np.any(mass < 0):
            raise NegativeMass(f"{int(np.sum(mass < 0))} cube(s) carry negative mass")
        self.tree = tree
        self.mass = mass
        self.rule = rule
        self.total = float(mass[0])
        self.s = tree.s
        self.p_tail = p_tail
        self.tail_ratio = tail_ratio
        self.theta = mass / tree.ell ** tree.s
        self.theta_d = dyadic_floor(self.theta)
        p = self.theta.copy()
        if p_tail:
            r = tail_ratio ** (1.0 + tree.s)
            p[0] += self.theta[0] * r / (1.0 - r)
        # parents precede children in breadth-first storage
        for g in range(1, tree.depth + 1):
            sl = tree.generation_slice(g)
            par = tree.parent[sl]
            p[sl] += tree.ell[sl] / tree.ell[par] * p[par]
        self.p = p
        for arr in (self.mass, self.theta, self.theta_d, self.p):
            arr.setflags(write=False)

    @property
    def positive(self) -> bool:
        return bool(np.all(self.mass > 0))

    def consistency_error(self) -> float:
        """max_Q |mu(Q) - sum of children| / mu(E)."""
        t = self.tree
        sums = np.zeros(t.n_cubes)
        np.add.at(sums, t.parent[1:], self.mass[1:])
        inner = ~t.is_leaf
        if not inner.any():
            return 0.0
        return float(np.max(np.abs(sums[inner] - self.mass[inner])) / max(self.total, 1e-300))

    def leaf_masses(self) -> np.ndarray:
        return self.mass[self.tree.leaves]

    def scaled(self, lam: float) -> "DyadicMeasure":
        return DyadicMeasure(self.tree, self.mass * lam, self.rule, self.p_tail, self.tail_ratio)

    def on(self, tree: CantorTree) -> "DyadicMeasure":
        """The same masses carried by a structurally identical tree."""
        return DyadicMeasure(tree, self.mass, self.rule, self.p_tail, self.tail_ratio)

    def __repr__(self):
        return f"DyadicMeasure(total={self.total:g}, cubes={self.tree.n_cubes}, sup_theta={self.theta.max():.6g})"


def dyadic_floor(x):
    """Largest power of two not exceeding each entry (exact, via frexp)."""
    x = np.asarray(x, dtype=float)
    mant, expo = np.frexp(x)
    out = np.ldexp(np.full_like(x, 0.5), expo)
    return np.where(x > 0, out, 0.0)


def _split_fractions(tree: CantorTree, rule: MassRule) -> np.ndarray:
    n = tree.n_cubes
    frac = np.ones(n)
    if rule.kind == "uniform":
        kids = np.arange(1, n)
        frac[kids] = 1.0 / tree.child_count[tree.parent[kids]]
    elif rule.kind == "weighted":
        w = np.asarray(rule.weights)
        for q in np.nonzero(tree.child_count > 0)[0]:
            k = tree.child_count[q]
            if len(w) < k:
                raise InconsistentPrescription(f"{k} children but only {len(w)} weights")
            sub = w[:k]
            if sub.sum() <= 0:
                raise InconsistentPrescription("split weights sum to zero")
            frac[tree.children(q)] = sub / sub.sum()
    elif rule.kind == "random":
        rng = np.random.default_rng(rule.seed)
        for q in np.nonzero(tree.child_count > 0)[0]:
            frac[tree.children(q)] = rng.dirichlet(np.full(tree.child_count[q], rule.concentration))
    return frac


def _prescribed_masses(tree: CantorTree, table) -> np.ndarray:
    n = tree.n_cubes
    if isinstance(table, dict):
        given = np.full(n, np.nan)
        for key, val in table.items():
            if isinstance(key, str) and ":" in key:
                g, i = key.split(":")
                key = (int(g), int(i))
            given[tree.index(key)] = float(val)
    else:
        given = np.asarray(table, dtype=float)
        if given.shape != (n,):
            raise InconsistentPrescription(f"prescribed table needs {n} entries")
    if np.any(given < 0):
        raise NegativeMass("prescribed table has negative entries")
    leaves = tree.leaves
    if np.any(np.isnan(given[leaves])):
        raise InconsistentPrescription("prescribed table must cover every leaf")
    mass = np.zeros(n)
    mass[leaves] = given[leaves]
    for g in range(tree.depth, 0, -1):
        sl = tree.generation_slice(g)
        np.add.at(mass, tree.parent[sl], mass[sl])
    mass[leaves] = given[leaves]
    known = ~np.isnan(given)
    scale = max(float(mass[0]), 1e-300)
    bad = known & (np.abs(given - mass) > 1e-10 * scale)
    if bad.any():
        q = int(np.nonzero(bad)[0][0])
        raise InconsistentPrescription(
            f"cube {tree.label(q)}: prescribed {float(given[q])!r} but children sum to {float(mass[q])!r}")
    return mass


def assign_measure(tree: CantorTree, rule: MassRule | None = None, **kw) -> DyadicMeasure:
    """Distribute ``rule.total`` down the tree according to ``rule``.

    Masses are formed as products of split fractions along ancestor chains, so
    consistency holds up to round-off; random splits are reproducible from the
    seed.  Extra keyword arguments go to :class:`DyadicMeasure`.
    """
    rule = rule or MassRule()
    if rule.kind == "prescribed":
        return DyadicMeasure(tree, _prescribed_masses(tree, rule.table), rule, **kw)
    frac = _split_fractions(tree, rule)
    mass = np.empty(tree.n_cubes)
    mass[0] = rule.total
    for g in range(1, tree.depth + 1):
        sl = tree.generation_slice(g)
        mass[sl] = mass[tree.parent[sl]] * frac[sl]
    return DyadicMeasure(tree, mass, rule, **kw)


# -- scalar coefficients ---------------------------------------------------------

def theta(measure: DyadicMeasure, cube) -> float:
    return float(measure.theta[measure.tree.index(cube)])


def theta_dyadic(measure: DyadicMeasure, cube) -> float:
    q = measure.tree.index(cube)
    if not measure.theta[q] > 0:
        raise ZeroDensity(f"cube {measure.tree.label(q)} has zero density")
    return float(measure.theta_d[q])


def p_coefficient(measure: DyadicMeasure, cube, R=None) -> float:
    """p(Q), or p(Q, R) = sum over Q <= P <= R of (l(Q)/l(P)) theta(P)."""
    tree = measure.tree
    q = tree.index(cube)
    if R is None:
        return float(measure.p[q])
    r = tree.index(R)
    if not tree.contains(r, q):
        raise NotAnAncestor(f"{tree.label(r)} does not contain {tree.label(q)}")
    total = 0.0
    c = q
    while True:
        total += tree.ell[q] / tree.ell[c] * measure.theta[c]
        if c == r:
            return float(total)
        c = int(tree.parent[c])


def p_relative(measure: DyadicMeasure, cubes, R) -> np.ndarray:
    """Vectorised p(Q, R) for cubes Q inside R, using p(Q) - (l(Q)/l(R)) (p(R) - theta(R))."""
    tree = measure.tree
    cubes = np.asarray(cubes, dtype=np.int64)
    r = tree.index(R)
    outside = measure.p[r] - measure.theta[r]
    return measure.p[cubes] - tree.ell[cubes] / tree.ell[r] * outside


def is_p_doubling(measure: DyadicMeasure, cube, c_db: float) -> bool:
    q = measure.tree.index(cube)
    return bool(measure.p[q] <= c_db * measure.theta[q])


def _flat_family(tree: CantorTree, family) -> np.ndarray:
    if isinstance(family, np.ndarray) and family.dtype.kind in "iu":
        idx = family.astype(np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= tree.n_cubes):
            raise UnknownCube("family index out of range")
        return np.unique(idx)
    return np.unique(np.array([tree.index(c) for c in family], dtype=np.int64))


def sigma(measure: DyadicMeasure, family) -> float:
    """sigma(T) = sum over the (deduplicated) family of theta(Q)^2 mu(Q)."""
    idx = _flat_family(measure.tree, family)
    return float(math.fsum(measure.theta[idx] ** 2 * measure.mass[idx]))


def check_disjoint(tree: CantorTree, family) -> np.ndarray:
    """Return the family as sorted flat indices, raising if two members nest."""
    idx = _flat_family(tree, family)
    order = idx[np.argsort(tree.pre_pos[idx])]
    if order.size > 1:
        nested = tree.pre_pos[order[1:]] < tree.subtree_end[order[:-1]]
        if nested.any():
            k = int(np.nonzero(nested)[0][0])
            raise OverlappingStopFamily(
                f"cubes {tree.label(order[k])} and {tree.label(order[k + 1])} overlap")
    return idx


def q_sum(ell_p, mass_p, dist_pq, ell_q, s) -> float:
    """sum_P l(P) mu(P) / (l(P) + dist(P, Q) + l(Q))^(s+1) from raw geometry."""
    ell_p, mass_p, dist_pq = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (ell_p, mass_p, dist_pq))
    return float(np.sum(ell_p * mass_p / (ell_p + dist_pq + ell_q) ** (s + 1)))


def q_coefficients(measure: DyadicMeasure, cubes, stop_family) -> np.ndarray:
    """q(Q, T) for each Q in ``cubes`` against a disjoint stop family."""
    tree = measure.tree
    fam = check_disjoint(tree, stop_family)
    cubes = np.array([tree.index(c) for c in cubes], dtype=np.int64) if not isinstance(
        cubes, np.ndarray) else cubes.astype(np.int64)
    if fam.size == 0:
        return np.zeros(len(cubes))
    return _kernels.q_sums(tree.center[cubes], tree.side[cubes] / 2, tree.ell[cubes],
                           tree.center[fam], tree.side[fam] / 2, tree.ell[fam],
                           measure.mass[fam], tree.s)


def q_coefficient(measure: DyadicMeasure, cube, stop_family) -> float:
    return float(q_coefficients(measure, np.array([measure.tree.index(cube)]), stop_family)[0])


# -- point clouds ------------------------------------------------------------------

@dataclass
class PointCloud:
    """Weighted points with the cube that owns each of them.

    ``owner`` holds flat cube indices (or -1 when no tree is attached).  Clouds
    made by :func:`discretize` are grouped by owner in depth-first order of the
    tree, which the treecode relies on.
    """

    points: np.ndarray
    weights: np.ndarray
    owner: np.ndarray
    provenance: str = "explicit"
    tree: CantorTree | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.weights = np.ascontiguousarray(self.weights, dtype=float).reshape(len(self.points))
        self.owner = np.ascontiguousarray(
            np.full(len(self.points), -1) if self.owner is None else self.owner, dtype=np.int64)
        if np.any(self.weights < 0):
            raise NegativeMass("point weights must be non-negative")

    @classmethod
    def from_arrays(cls, points, weights, owner=None) -> "PointCloud":
        return cls(np.atleast_2d(np.asarray(points, dtype=float)), weights, owner)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def total(self) -> float:
        return float(math.fsum(self.weights))

    def scaled(self, lam: float) -> "PointCloud":
        return PointCloud(self.points, self.weights * lam, self.owner, self.provenance, self.tree)


def rd_points(d: int, m: int) -> np.ndarray:
    """First ``m`` points of the additive R_d low-discrepancy sequence in [0,1)^d.

    Point n is frac(1/2 + n * alpha) with alpha_j = phi_d^-(j+1), phi_d the
    positive root of x^(d+1) = x + 1; point 0 is the cube centre.
    """
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    alpha = phi ** -np.arange(1, d + 1)
    return np.mod(0.5 + np.arange(m)[:, None] * alpha[None, :], 1.0)


def _fill_cubes(tree: CantorTree, cubes: np.ndarray, masses: np.ndarray, m: int):
    unit = rd_points(tree.dimension, m) - 0.5
    pts = tree.center[cubes][:, None, :] + tree.side[cubes][:, None, None] * unit[None]
    return (pts.reshape(-1, tree.dimension), np.repeat(masses / m, m), np.repeat(cubes, m))


def discretize(measure: DyadicMeasure, mode: str = "leaf-representatives",
               samples_per_cube: int = 1, stop_family=None) -> PointCloud:
    """Weighted point cloud approximating ``measure``.

    ``leaf-representatives`` puts ``samples_per_cube`` low-discrepancy points in
    every leaf; ``eta-samples`` does the same for the cubes of ``stop_family``,
    which approximates the measure that spreads mu(P) uniformly over each P.
    Sample 0 is the cube centre, so one sample per cube gives the centroids.
    """
    tree = measure.tree
    if samples_per_cube < 1:
        raise ValueError("samples_per_cube must be positive")
    if mode == "leaf-representatives":
        cubes = tree.leaves
    elif mode == "eta-samples":
        if stop_family is None or len(stop_family) == 0:
            raise EmptyStopFamily("eta-samples need a non-empty stop family")
        cubes = check_disjoint(tree, stop_family)
    else:
        raise ValueError(f"unknown discretization mode {mode!r}")
    cubes = cubes[np.argsort(tree.pre_pos[cubes], kind="stable")]
    pts, w, own = _fill_cubes(tree, cubes, measure.mass[cubes], samples_per_cube)
    return PointCloud(pts, w, own, mode, tree)


# -- text formats -----------------------------------------------------------------

def dump_masses(measure: DyadicMeasure, path=None) -> str:
    tree = measure.tree
    lines = ["# id mass"] + [f"{tree.label(q)} {float(measure.mass[q])!r}" for q in range(tree.n_cubes)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_masses(tree: CantorTree, text_or_path) -> DyadicMeasure:
    text = text_or_path
    if isinstance(text_or_path, Path) or "\n" not in str(text_or_path):
        text = Path(text_or_path).read_text()
    table = {}
    for ln in text.splitlines():
        if ln.strip() and not ln.startswith("#"):
            key, val = ln.split()
            table[key] = float(val)
    return assign_measure(tree, MassRule("prescribed", table=table, total=table.get("0:0", 1.0)))


def dump_cloud(cloud: PointCloud, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = cloud.dimension
    w.writerow([f"x{k + 1}" for k in range(d)] + ["weight", "owner"])
    tree = cloud.tree
    for x, wt, o in zip(cloud.points, cloud.weights, cloud.owner):
        label = tree.label(int(o)) if (tree is not None and o >= 0) else str(int(o))
        w.writerow([repr(float(c)) for c in x] + [repr(float(wt)), label])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def load_cloud(text_or_path, tree: CantorTree | None = None) -> PointCloud:
    text = text_or_path
    if isinstance(text_or_path, Path) or "\n" not in str(text_or_path):
        text = Path(text_or_path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    pts = np.array([[float(v) for v in r[:d]] for r in body]).reshape(len(body), d)
    wts = np.array([float(r[d]) for r in body])
    owner = []
    for r in body:
        lab = r[d + 1]
        owner.append(tree.index(tuple(int(v) for v in lab.split(":"))) if (tree and ":" in lab) else int(lab))
    return PointCloud(pts, wts, np.array(owner, dtype=np.int64), "loaded", tree)
