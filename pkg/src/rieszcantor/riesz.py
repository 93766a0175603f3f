"""s-Riesz transforms of weighted point clouds on Cantor trees.

The kernel is K(x) = x / |x|^(s+1).  Three evaluation paths share one entry
point, :func:`riesz_field`:

* direct summation over all pairs, compensated and bit-reproducible;
* a treecode that uses the cubes of the tree as cells and replaces distant
  cubes by Cartesian Taylor expansions of adaptive order;
* the suppressed kernel (x - y)/(|x - y|^2 + phi(x) phi(y))^((s+1)/2), direct only.

The discrete energy realises ||R mu||^2 at leaf scale: every leaf P sees the
measure on E minus P, evaluated at quadrature points of P.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from ._hierarchy import Hierarchy
from .errors import (
    DepthZero,
    EmptyCloud,
    InvalidOpening,
    MissingLeafValue,
    SingularEvaluation,
)
from .geometry import CantorTree
from .measure import DyadicMeasure, PointCloud, discretize, p_relative, rd_points

__all__ = [
    "KernelParams",
    "RieszField",
    "LeafField",
    "MartingaleDecomposition",
    "kernel_eval",
    "riesz_field",
    "leaf_field",
    "riesz_energy",
    "riesz_means",
    "riesz_mean",
    "martingale_decompose",
    "pairing_sum",
    "natural_scale",
    "suppression_comparison",
    "oscillation_constant",
    "max_relative_error",
]

_MODES = ("auto", "direct", "treecode")


@dataclass(frozen=True)
class KernelParams:
    """Kernel exponent, truncation and evaluation settings.

    ``phi`` maps an (n, d) array of points to the (n,) values of the
    suppression function; when set, the suppressed kernel is used and
    ``epsilon`` is ignored.  ``mode="auto"`` sums directly up to
    ``direct_max`` sources and uses the treecode above.  ``tol`` is the target
    relative truncation error of each far-field expansion.
    """

    s: float
    epsilon: float = 0.0
    phi: Callable | None = None
    mode: str = "auto"
    theta_open: float = 0.4
    tol: float = 1e-8
    max_order: int = 14
    leaf_size: int = 16
    direct_max: int = 8192

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if not 0.0 < self.theta_open < 1.0:
            raise InvalidOpening(f"opening parameter must lie in (0, 1), got {self.theta_open}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {"s": self.s, "epsilon": self.epsilon, "suppressed": self.phi is not None,
                "mode": self.mode, "theta_open": self.theta_open, "tol": self.tol,
                "max_order": self.max_order}


@dataclass
class RieszField:
    points: np.ndarray
    values: np.ndarray
    mode: str
    theta_open: float | None
    epsilon: float
    stats: dict = field(default_factory=dict)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)


def _check_s(s, d):
    if not (d - 1 < s < d):
        raise ValueError(f"s={s} must satisfy {d - 1} < s < {d}")


def kernel_eval(x, y, params: KernelParams, phi_x: float | None = None, phi_y: float | None = None):
    """K(x - y), or the suppressed kernel when a suppression value is available."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    r2 = float(np.dot(diff, diff))
    if params.phi is not None and phi_x is None:
        phi_x = float(params.phi(x[None])[0])
        phi_y = float(params.phi(y[None])[0])
    if phi_x is not None:
        den = r2 + phi_x * phi_y
        if den == 0.0:
            raise SingularEvaluation("x = y with zero suppression")
        return diff * den ** (-(params.s + 1) / 2)
    if r2 == 0.0:
        raise SingularEvaluation("kernel is singular at x = y")
    return diff * r2 ** (-(params.s + 1) / 2)


def _resolve_mode(params: KernelParams, n_sources: int, mode):
    mode = mode or params.mode
    if mode == "auto":
        mode = "direct" if n_sources <= params.direct_max else "treecode"
    if mode not in ("direct", "treecode"):
        if isinstance(mode, (float, int)):
            raise InvalidOpening("pass theta_open through KernelParams")
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def riesz_field(cloud: PointCloud, eval_points=None, params: KernelParams | None = None,
                mode: str | None = None, eval_owner=None, eval_phi=None, source_phi=None,
                threads: int | None = None) -> RieszField:
    """R_eps(cloud) at ``eval_points`` (default: the cloud points themselves).

    ``eval_owner`` gives, per evaluation point, a cube whose own points are left
    out of the sum (leaf self-exclusion); ``-1`` disables it.  With suppression
    the values of phi come from ``eval_phi``/``source_phi`` or ``params.phi``.
    """
    if params is None:
        raise ValueError("kernel parameters are required")
    if len(cloud) == 0:
        raise EmptyCloud("cloud has no points")
    d = cloud.dimension
    _check_s(params.s, d)
    x = cloud.points if eval_points is None else np.atleast_2d(np.asarray(eval_points, dtype=float))
    x = np.ascontiguousarray(x)
    nt = len(x)
    t_owner = np.full(nt, -1, np.int64) if eval_owner is None else np.ascontiguousarray(eval_owner, dtype=np.int64)
    _kernels.set_threads(threads)
    suppressed = params.phi is not None or eval_phi is not None
    t0 = time.perf_counter()
    if suppressed:
        tphi = eval_phi if eval_phi is not None else params.phi(x)
        sphi = source_phi if source_phi is not None else params.phi(cloud.points)
        vals, bad = _kernels.direct_field(x, t_owner, np.asarray(tphi, float), cloud.points, cloud.weights,
                                          cloud.owner, np.asarray(sphi, float), params.s,
                                          np.zeros(nt), True)
        if bad:
            raise SingularEvaluation(f"{bad} coincident pair(s) with zero suppression")
        return RieszField(x, vals, "suppressed", None, params.epsilon,
                          {"seconds": time.perf_counter() - t0})
    m = _resolve_mode(params, len(cloud), mode)
    if m == "treecode" and np.any(cloud.owner >= 0) and cloud.tree is None and eval_owner is not None:
        m = "direct"  # owner exclusion in far fields needs the tree's nesting
    if m == "direct":
        vals, _ = _kernels.direct_field(x, t_owner, np.zeros(nt), cloud.points, cloud.weights, cloud.owner,
                                        np.zeros(len(cloud)), params.s, np.full(nt, params.epsilon), False)
        return RieszField(x, vals, "direct", None, params.epsilon, {"seconds": time.perf_counter() - t0})
    vals, stats = _treecode(cloud, x, t_owner, params)
    stats["seconds"] = time.perf_counter() - t0
    return RieszField(x, vals, "treecode", params.theta_open, params.epsilon, stats)


def _treecode(cloud: PointCloud, x, t_owner, params: KernelParams):
    d = cloud.dimension
    h = Hierarchy.for_cloud(cloud, params.leaf_size)
    pmax = params.max_order
    kk, deg, m1, m2, p1, ncum = _kernels.taylor_tables(d, pmax + 1)
    lam = params.s - 1.0
    c1, c2 = _kernels.recurrence_factors(deg, lam)
    fac = ((-1.0) ** deg[:, None]) * (kk + 1.0)
    mom, rad, com, rad_com, mass = h.moments(pmax)
    vals, nfar, nnear = _kernels.tree_field(
        x, t_owner, h.points, h.weights, h.owner, h.center, h.diam, rad, h.child_start, h.child_count,
        h.pstart, h.pend, h.bucket, mom, c1, c2, m1, m2, p1, fac, ncum,
        params.s, params.epsilon, params.theta_open, params.tol, pmax)
    return vals, {"far_interactions": int(nfar), "near_pairs": int(nnear), "cells": h.n_cells}


def max_relative_error(approx, exact) -> float:
    """max_i |approx_i - exact_i| / |exact_i| over evaluation points (vector norms)."""
    approx = np.asarray(approx, dtype=float).reshape(len(exact), -1)
    exact = np.asarray(exact, dtype=float).reshape(len(exact), -1)
    num = np.linalg.norm(approx - exact, axis=1)
    den = np.linalg.norm(exact, axis=1)
    return float(np.max(np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))))


# -- leaf-scale quantities ---------------------------------------------------------

@dataclass
class LeafField:
    """Field R(chi_{E minus P} mu) at the quadrature points of every leaf P.

    ``points``/``values``/``weights``/``owner`` are flat over leaves (in
    depth-first order) times quadrature points; ``weights`` are mu(P)/order.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    owner: np.ndarray
    order: int
    mode: str
    stats: dict = field(default_factory=dict)

    def per_leaf(self, tree: CantorTree) -> np.ndarray:
        """Quadrature-averaged field per leaf, in ``tree.leaves`` order."""
        d = self.values.shape[1]
        sums = np.zeros((tree.n_cubes, d))
        np.add.at(sums, self.owner, self.values)
        return sums[tree.leaves] / self.order


def leaf_field(tree: CantorTree, measure: DyadicMeasure, params: KernelParams,
               quadrature_order: int = 1, mode: str | None = None, threads: int | None = None) -> LeafField:
    """Evaluate R(chi_{E minus P} mu) on every leaf P; the sources are leaf centroids."""
    if tree.depth == 0 or len(tree.leaves) < 2:
        raise DepthZero("a single leaf has no complement to see")
    src = discretize(measure, "leaf-representatives", 1)
    quad = discretize(measure, "leaf-representatives", quadrature_order)
    f = riesz_field(src, quad.points, params, mode=mode, eval_owner=quad.owner, threads=threads)
    return LeafField(quad.points, f.values, quad.weights, quad.owner, quadrature_order, f.mode, f.stats)


def riesz_energy(tree: CantorTree, measure: DyadicMeasure, params: KernelParams,
                 quadrature_order: int = 1, mode: str | None = None, field_: LeafField | None = None) -> float:
    """E_K = sum_P mu(P) * mean over quadrature points z of P of |R(chi_{E minus P} mu)(z)|^2."""
    lf = field_ or leaf_field(tree, measure, params, quadrature_order, mode)
    return float(math.fsum(lf.weights * np.einsum("ij,ij->i", lf.values, lf.values)))


def riesz_means(tree: CantorTree, measure: DyadicMeasure, params: KernelParams | None = None,
                leaf_values=None) -> np.ndarray:
    """m_Q(R mu) for every cube, from leaf-centroid values (computed if not given).

    Cubes of zero mass get the zero vector.
    """
    if leaf_values is None:
        leaf_values = leaf_field(tree, measure, params, 1).per_leaf(tree)
    leaf_values = np.asarray(leaf_values, dtype=float)
    if leaf_values.ndim == 1:
        leaf_values = leaf_values[:, None]
    acc = np.zeros((tree.n_cubes, leaf_values.shape[1]))
    acc[tree.leaves] = measure.mass[tree.leaves, None] * leaf_values
    for g in range(tree.depth, 0, -1):
        sl = tree.generation_slice(g)
        np.add.at(acc, tree.parent[sl], acc[sl])
    mass = measure.mass[:, None]
    return np.divide(acc, mass, out=np.zeros_like(acc), where=mass > 0)


def riesz_mean(tree: CantorTree, measure: DyadicMeasure, cube, params: KernelParams | None = None,
               means: np.ndarray | None = None) -> np.ndarray:
    q = tree.index(cube)
    if means is None:
        means = riesz_means(tree, measure, params)
    return means[q]


# -- martingale differences ----------------------------------------------------------

@dataclass
class MartingaleDecomposition:
    """Block structure of f: means per cube, child offsets and ||D_Q f||^2.

    ``offsets[c] = m_c f - m_parent(c) f`` is stored on the child; leaves and
    the root carry their own entries only as means.
    """

    means: np.ndarray
    offsets: np.ndarray
    block_norms: np.ndarray
    coarse_mean: np.ndarray
    norm_sq: float
    mean_term: float

    @property
    def block_total(self) -> float:
        return float(math.fsum(self.block_norms))

    def pythagoras_gap(self) -> float:
        """| ||f||^2 - (mu(E)|m f|^2 + sum_Q ||D_Q f||^2) |."""
        return abs(self.norm_sq - math.fsum([self.mean_term, *self.block_norms]))


def martingale_decompose(tree: CantorTree, measure: DyadicMeasure, f) -> MartingaleDecomposition:
    """Martingale differences D_Q f = sum_{P child of Q} chi_P (m_P f - m_Q f).

    ``f`` gives one value (scalar or vector) per leaf, either as an array in
    ``tree.leaves`` order or as a mapping from leaf id to value.
    """
    leaves = tree.leaves
    if isinstance(f, dict):
        vals = []
        for q in leaves:
            key = tree.cube_id(int(q))
            if key in f:
                vals.append(f[key])
            elif tree.label(int(q)) in f:
                vals.append(f[tree.label(int(q))])
            elif int(q) in f:
                vals.append(f[int(q)])
            else:
                raise MissingLeafValue(f"no value for leaf {tree.label(int(q))}")
        f = vals
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != len(leaves):
        raise MissingLeafValue(f"expected {len(leaves)} leaf values, got {f.shape[0]}")
    if not np.all(np.isfinite(f)):
        raise MissingLeafValue("leaf values must be finite")
    means = riesz_means(tree, measure, leaf_values=f)
    mass = measure.mass
    offsets = np.zeros_like(means)
    kids = np.arange(1, tree.n_cubes)
    offsets[kids] = means[kids] - means[tree.parent[kids]]
    contrib = mass[kids] * np.einsum("ij,ij->i", offsets[kids], offsets[kids])
    blocks = np.zeros(tree.n_cubes)
    np.add.at(blocks, tree.parent[kids], contrib)
    norm_sq = math.fsum(mass[leaves] * np.einsum("ij,ij->i", f, f))
    coarse = means[0]
    return MartingaleDecomposition(means, offsets, blocks, coarse, float(norm_sq),
                                   float(mass[0] * np.dot(coarse, coarse)))


# -- checks of structural properties ---------------------------------------------------

def pairing_sum(cloud: PointCloud, s: float) -> np.ndarray:
    """sum over ordered pairs p != p' of w_p w_p' K(z_p - z_p') (direct)."""
    f = riesz_field(cloud, None, KernelParams(s, mode="direct"))
    return np.array([math.fsum(cloud.weights * f.values[:, m]) for m in range(cloud.dimension)])


def natural_scale(cloud: PointCloud, s: float) -> float:
    """sum w^2 * (minimal pair distance)^(-s)."""
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(cloud.points).query(cloud.points, k=2)
    dmin = float(dist[:, 1].min())
    return float(np.sum(cloud.weights ** 2) * dmin ** (-s))


def suppression_comparison(cloud: PointCloud, phi_values, s: float) -> dict:
    """Compare R_eps with eps = phi(x) pointwise against the suppressed transform.

    Returns per-point differences, the local density bound
    sup_{r > phi(x)} mass(B(x, r))/r^s and the worst ratio between them.
    """
    phi_values = np.ascontiguousarray(phi_values, dtype=float)
    n = len(cloud)
    own = np.full(n, -1, np.int64)
    trunc, _ = _kernels.direct_field(cloud.points, own, np.zeros(n), cloud.points, cloud.weights, own,
                                     np.zeros(n), s, phi_values, False)
    supp, bad = _kernels.direct_field(cloud.points, own, phi_values, cloud.points, cloud.weights, own,
                                      phi_values, s, np.zeros(n), True)
    if bad:
        raise SingularEvaluation("suppression vanishes on a coincident pair")
    diff = np.linalg.norm(trunc - supp, axis=1)
    bound = _kernels.density_sup_beyond(cloud.points, phi_values, cloud.points, cloud.weights, s)
    ratio = np.divide(diff, bound, out=np.zeros_like(diff), where=bound > 0)
    return {"difference": diff, "density_bound": bound, "constant": float(ratio.max())}


def oscillation_constant(tree: CantorTree, measure: DyadicMeasure, s: float, cubes=None,
                         samples: int = 5, max_cubes: int = 64) -> dict:
    """Measured C in |R(chi_{R-Q} mu)(x) - R(chi_{R-Q} mu)(y)| <= C (|x-y|/l(Q)) p(Q, R).

    x, y range over ``samples`` low-discrepancy points of Q (in the closed
    cube); R over all ancestors of Q.  Sources are leaf centroids.  Cubes
    default to an evenly spaced selection of at most ``max_cubes`` non-root cubes.
    """
    if cubes is None:
        cand = np.arange(1, tree.n_cubes)
        step = max(1, len(cand) // max_cubes)
        cubes = cand[::step][:max_cubes]
    src = discretize(measure, "leaf-representatives", 1)
    unit = rd_points(tree.dimension, samples) - 0.5
    best, where = 0.0, None
    params = KernelParams(s, mode="direct")
    for q in cubes:
        q = int(q)
        pts = tree.center[q] + tree.side[q] * unit
        inside_q = (tree.pre_pos[src.owner] >= tree.pre_pos[q]) & (tree.pre_pos[src.owner] < tree.subtree_end[q])
        for r in tree.ancestors(q, include_self=False):
            in_r = (tree.pre_pos[src.owner] >= tree.pre_pos[r]) & (tree.pre_pos[src.owner] < tree.subtree_end[r])
            sel = in_r & ~inside_q
            if not sel.any():
                continue
            sub = PointCloud(src.points[sel], src.weights[sel], src.owner[sel], "restricted", tree)
            vals = riesz_field(sub, pts, params).values
            i, j = np.triu_indices(samples, 1)
            num = np.linalg.norm(vals[i] - vals[j], axis=1)
            sep = np.linalg.norm(pts[i] - pts[j], axis=1)
            pqr = float(p_relative(measure, [q], r)[0])
            c = float(np.max(num * tree.ell[q] / (sep * pqr)))
            if c > best:
                best, where = c, (tree.label(q), tree.label(r))
    return {"constant": best, "witness": where}
