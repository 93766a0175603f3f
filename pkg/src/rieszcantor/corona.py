"""Stopping-time (corona) decomposition of the cube family and its tree taxonomy.

For a root R the stopping rules are evaluated top-down on proper subcubes of R;
the first rule that fires on a cube stops the descent there, in the priority

    HD  theta_d(Q) >= B theta_d(R)
    LD  theta(Q) <= delta0 theta(R)
    BR  |m_Q(R mu) - m_R(R mu)| >= M (theta(R) + p(Q))

so the resulting Stop_0(R) is a disjoint family with the outermost cube
winning.  Each Stop_0 cube is refined to its maximal p-doubling subcubes, which
form Stop(R) and become roots in turn.  Tree(R) is R together with every cube
inside R not contained in a cube of Stop(R).

The deepest stored generation is terminal.  The rules are evaluated on leaves
as on any other cube (a leaf that fires becomes a one-cube tree), and trees
that still hold a leaf are flagged as truncated by depth.  With
``stop_at_leaves=False`` leaves never stop; that variant can leave leaves of
high density inside a tree.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NotARoot
from .geometry import CantorTree
from .measure import DyadicMeasure, p_relative, q_coefficients, sigma
from .riesz import KernelParams, riesz_means

__all__ = [
    "CoronaParams",
    "StopRecord",
    "CoronaDecomposition",
    "MaximalTree",
    "Tractability",
    "corona_decompose",
    "classify_simple_tree",
    "build_maximal_trees",
    "check_tractable",
    "tree_statistics",
    "check_corona_invariants",
    "check_doubling_chains",
    "check_nondoubling_families",
    "lemma_qp_ratios",
    "dump_decomposition",
]

RULES = ("HD", "LD", "BR")


@dataclass(frozen=True)
class CoronaParams:
    """Constants of the stopping rules and of the tree taxonomy.

    ``M`` defaults to ``C_M * B``.  ``delta_W_prime`` (growth test of large
    wonderful trees) defaults to ``delta_W``.
    """

    B: float = 4.0
    C_M: float = 10.0
    M: float | None = None
    delta0: float = 1e-3
    c_db: float = 20.0
    A: float = 10.0
    delta_W: float = 1e-2
    delta_W_prime: float | None = None
    stop_at_leaves: bool = True

    def __post_init__(self):
        b = float(self.B)
        if not (b > 1 and math.frexp(b)[0] == 0.5):
            raise ValueError(f"B must be a power of two above 1, got {self.B}")
        if self.M is None:
            object.__setattr__(self, "M", self.C_M * b)
        if self.delta_W_prime is None:
            object.__setattr__(self, "delta_W_prime", self.delta_W)
        for name in ("delta0", "delta_W", "delta_W_prime"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.c_db > 1:
            raise ValueError("c_db must exceed 1")
        if not self.A > 1:
            raise ValueError("A must exceed 1")

    def regime(self) -> dict:
        """Which of the orderings assumed by the asymptotic theory hold for these values."""
        return {
            "c_db_above_10": self.c_db > 10,
            "A_above_10": self.A > 10,
            "delta0_small_vs_1_over_B": self.delta0 <= 0.01 / self.B,
            "M_at_least_c_db": self.M >= self.c_db,
            "M_below_A_below_B": self.M < self.A < self.B,
        }

    def to_dict(self) -> dict:
        return {"B": self.B, "M": self.M, "C_M": self.C_M, "delta0": self.delta0, "c_db": self.c_db,
                "A": self.A, "delta_W": self.delta_W, "delta_W_prime": self.delta_W_prime,
                "stop_at_leaves": self.stop_at_leaves}


@dataclass
class StopRecord:
    """A cube of Stop(R) with the rule that fired on its Stop_0 ancestor."""

    cube: int
    rule: str
    stop0: int
    audit: dict


@dataclass
class _RootData:
    root: int
    stop0: dict        # cube -> (rule, audit)
    stop: list         # StopRecord
    truncated: bool = False

    def family(self, rule: str | None = None, refined: bool = True) -> list:
        if refined:
            return [r.cube for r in self.stop if rule is None or r.rule == rule]
        return [q for q, (r, _) in self.stop0.items() if rule is None or r == rule]


@dataclass
class CoronaDecomposition:
    """Top, the per-root Tree/Stop structure and per-cube owning roots.

    ``tree_of[q]`` is the root of the simple tree holding q and ``in_tree0[q]``
    tells whether q is not inside any Stop_0 cube of that root.
    """

    tree: CantorTree
    measure: DyadicMeasure
    params: CoronaParams
    top: list
    roots: dict
    tree_of: np.ndarray
    in_tree0: np.ndarray
    means: np.ndarray

    def root_data(self, R) -> _RootData:
        r = self.tree.index(R)
        if r not in self.roots:
            raise NotARoot(f"{self.tree.label(r)} is not in Top")
        return self.roots[r]

    @cached_property
    def _members(self) -> dict:
        order = np.argsort(self.tree_of, kind="stable")
        keys = self.tree_of[order]
        cuts = np.searchsorted(keys, self.top)
        ends = np.searchsorted(keys, self.top, side="right")
        return {r: order[a:b] for r, a, b in zip(self.top, cuts, ends)}

    def tree_cubes(self, R) -> np.ndarray:
        r = self.root_data(R).root
        return self._members[r]

    def tree0_cubes(self, R) -> np.ndarray:
        cubes = self.tree_cubes(R)
        return cubes[self.in_tree0[cubes]]

    def stop(self, R, rule: str | None = None) -> list:
        return self.root_data(R).family(rule)

    def stop0(self, R, rule: str | None = None) -> list:
        return self.root_data(R).family(rule, refined=False)

    def to_dict(self, include_cubes: bool = True) -> dict:
        t = self.tree
        out = {"params": self.params.to_dict(), "top": [t.label(r) for r in self.top], "trees": []}
        for r in self.top:
            data = self.roots[r]
            entry = {
                "root": t.label(r),
                "truncated": data.truncated,
                "stop": [{"cube": t.label(s.cube), "rule": s.rule, "stop0": t.label(s.stop0), "audit": s.audit}
                         for s in data.stop],
                "stop0": [{"cube": t.label(q), "rule": rule, "audit": audit} for q, (rule, audit) in data.stop0.items()],
            }
            if include_cubes:
                entry["cubes"] = [t.label(int(q)) for q in self.tree_cubes(r)]
            out["trees"].append(entry)
        return out


def _audit(tree, measure, means, q, r, params):
    jump = float(np.linalg.norm(means[q] - means[r]))
    return {
        "theta": float(measure.theta[q]),
        "theta_d_ratio": float(measure.theta_d[q] / measure.theta_d[r]) if measure.theta_d[r] > 0 else None,
        "theta_ratio": float(measure.theta[q] / measure.theta[r]) if measure.theta[r] > 0 else None,
        "p": float(measure.p[q]),
        "mean_jump": jump,
        "br_threshold": float(params.M * (measure.theta[r] + measure.p[q])),
    }


def _decompose_root(tree, measure, means, params, r, doubling, owner, in_tree0):
    th, thd, p = measure.theta, measure.theta_d, measure.p
    hd_level = params.B * thd[r]
    ld_level = params.delta0 * th[r]
    stop0 = {}
    stop = []
    truncated = False
    owner[r] = r
    in_tree0[r] = True
    stack = list(tree.children(r)[::-1])
    while stack:
        q = int(stack.pop())
        leaf = tree.child_count[q] == 0
        if leaf and not params.stop_at_leaves:
            owner[q] = r
            in_tree0[q] = True
            truncated = True
            continue
        rule = None
        if thd[q] > 0 and thd[q] >= hd_level:
            rule = "HD"
        elif th[q] <= ld_level:
            rule = "LD"
        elif np.linalg.norm(means[q] - means[r]) >= params.M * (th[r] + p[q]):
            rule = "BR"
        if rule is None:
            owner[q] = r
            in_tree0[q] = True
            if leaf:
                truncated = True
            stack.extend(tree.children(q)[::-1])
            continue
        audit = _audit(tree, measure, means, q, r, params)
        stop0[q] = (rule, audit)
        # maximal p-doubling cubes inside the Stop_0 cube
        inner = [q]
        while inner:
            c = int(inner.pop())
            if doubling[c]:
                stop.append(StopRecord(c, rule, q, {**audit, "p_own": float(p[c]), "theta_own": float(th[c])}))
                continue
            owner[c] = r
            in_tree0[c] = False
            if tree.child_count[c] == 0:
                truncated = True
            inner.extend(tree.children(c)[::-1])
    return _RootData(r, stop0, stop, truncated)


def corona_decompose(tree: CantorTree, measure: DyadicMeasure, params: CoronaParams | None = None,
                     riesz=None) -> CoronaDecomposition:
    """Run the stopping-time construction from the root cube.

    ``riesz`` supplies m_Q(R mu): an (n_cubes, d) array of means, a
    :class:`KernelParams` used to compute them, a callable cube -> vector, or
    ``None`` for default kernel parameters.
    """
    params = params or CoronaParams()
    if isinstance(riesz, np.ndarray):
        means = riesz
    elif callable(riesz) and not isinstance(riesz, KernelParams):
        means = np.array([riesz(q) for q in range(tree.n_cubes)], dtype=float)
    elif len(tree.leaves) < 2:
        means = np.zeros((1, tree.dimension))
    else:
        means = riesz_means(tree, measure, riesz or KernelParams(tree.s))
    doubling = measure.p <= params.c_db * measure.theta
    owner = np.full(tree.n_cubes, -1, dtype=np.int64)
    in_tree0 = np.zeros(tree.n_cubes, dtype=bool)
    roots = {}
    top = []
    queue = deque([0])
    while queue:
        r = queue.popleft()
        top.append(r)
        data = _decompose_root(tree, measure, means, params, r, doubling, owner, in_tree0)
        roots[r] = data
        queue.extend(s.cube for s in data.stop)
    return CoronaDecomposition(tree, measure, params, top, roots, owner, in_tree0, means)


# -- tree taxonomy --------------------------------------------------------------------

def _mass(measure, family) -> float:
    return float(math.fsum(measure.mass[np.asarray(family, dtype=np.int64)])) if len(family) else 0.0


def classify_simple_tree(decomp: CoronaDecomposition, R) -> str:
    """``W``, ``Isigma``, ``Dsigma`` or ``Ssigma`` for Tree(R)."""
    data = decomp.root_data(R)
    mu, prm = decomp.measure, decomp.params
    r = data.root
    if _mass(mu, data.family("BR")) >= prm.delta_W * mu.mass[r]:
        return "W"
    s_stop = sigma(mu, np.array(data.family(), dtype=np.int64))
    s_root = float(mu.theta[r] ** 2 * mu.mass[r])
    if s_stop > prm.A * s_root:
        return "Isigma"
    if s_stop < s_root / prm.A:
        return "Dsigma"
    return "Ssigma"


@dataclass
class MaximalTree:
    """A maximal tree: its root, type, the simple trees it absorbed and its stop family."""

    root: int
    kind: str
    simple_roots: list
    stop: list
    order: int | None = None
    simple_kind: str = ""
    history: list = field(default_factory=list)
    is_initial: bool = False

    def cubes(self, decomp: CoronaDecomposition) -> np.ndarray:
        return np.concatenate([decomp.tree_cubes(r) for r in self.simple_roots])

    def to_dict(self, tree: CantorTree) -> dict:
        return {"root": tree.label(self.root), "kind": self.kind, "order": self.order,
                "simple_kind": self.simple_kind, "initial": self.is_initial,
                "simple_roots": [tree.label(r) for r in self.simple_roots],
                "stop": [tree.label(q) for q in self.stop], "history": self.history}


def _grow_mdec(decomp, r, kinds):
    absorbed = [r]
    stop = list(decomp.stop(r))
    while True:
        grow = [P for P in stop if kinds[P] == "Dsigma"]
        if not grow:
            return absorbed, stop
        keep = [P for P in stop if kinds[P] != "Dsigma"]
        for P in grow:
            absorbed.append(P)
            keep.extend(decomp.stop(P))
        stop = keep


def _grow_increasing(decomp, r):
    mu, prm = decomp.measure, decomp.params
    absorbed = [r]
    hd_prev = list(decomp.stop(r, "HD"))
    stop_prev = list(decomp.stop(r))
    s_prev = sigma(mu, np.array(stop_prev, dtype=np.int64))
    history = [{"k": 1, "sigma_stop": s_prev, "mu_hd": _mass(mu, hd_prev), "mu_br": _mass(mu, decomp.stop(r, "BR"))}]
    k = 1
    while True:
        k += 1
        hd_set = set(hd_prev)
        stop_k = [P for P in stop_prev if P not in hd_set]
        hd_k, br_k = [], []
        for P in hd_prev:
            absorbed.append(P)
            stop_k.extend(decomp.stop(P))
            hd_k.extend(decomp.stop(P, "HD"))
            br_k.extend(decomp.stop(P, "BR"))
        s_k = sigma(mu, np.array(stop_k, dtype=np.int64))
        mu_br, mu_hd_prev = _mass(mu, br_k), _mass(mu, hd_prev)
        history.append({"k": k, "sigma_stop": s_k, "mu_hd": _mass(mu, hd_k), "mu_br": mu_br})
        if mu_br > prm.delta_W_prime * mu_hd_prev:
            return "LW", k, absorbed, stop_k, history
        if s_k <= prm.A * s_prev:
            return "TInc", k, absorbed, stop_k, history
        hd_prev, stop_prev, s_prev = hd_k, stop_k, s_k


def build_maximal_trees(decomp: CoronaDecomposition, params: CoronaParams | None = None) -> list:
    """Group the simple trees into maximal W / MDec / LW / TInc trees.

    Processing starts at the root cube; the stop family of every maximal tree
    supplies the next maximal roots.  ``params`` overrides the decomposition's
    taxonomy constants when given.
    """
    if params is not None and params != decomp.params:
        decomp = CoronaDecomposition(decomp.tree, decomp.measure, params, decomp.top, decomp.roots,
                                     decomp.tree_of, decomp.in_tree0, decomp.means)
    kinds = {r: classify_simple_tree(decomp, r) for r in decomp.top}
    forest = []
    queue = deque([decomp.top[0]])
    while queue:
        r = queue.popleft()
        kind = kinds[r]
        if kind == "W":
            mt = MaximalTree(r, "W", [r], list(decomp.stop(r)), simple_kind=kind)
        elif kind == "Dsigma":
            absorbed, stop = _grow_mdec(decomp, r, kinds)
            mt = MaximalTree(r, "MDec", absorbed, stop, simple_kind=kind)
        else:
            label, order, absorbed, stop, hist = _grow_increasing(decomp, r)
            mt = MaximalTree(r, label, absorbed, stop, order, kind, hist)
        mt.is_initial = r == decomp.top[0]
        forest.append(mt)
        queue.extend(mt.stop)
    return forest


@dataclass
class Tractability:
    ok: bool
    conditions: dict

    def failed(self) -> list:
        return [k for k, v in self.conditions.items() if not v["holds"]]


def _levels(decomp, r):
    hd1 = decomp.stop(r, "HD")
    lv = {"HD1": hd1, "LD1": decomp.stop(r, "LD"), "BR1": decomp.stop(r, "BR"), "HD2": [], "LD2": [], "BR2": []}
    for P in hd1:
        for rule in RULES:
            lv[rule + "2"].extend(decomp.stop(P, rule))
    return lv


def check_tractable(decomp: CoronaDecomposition, R) -> Tractability:
    """Evaluate the four balance inequalities of a two-level HD extension of Tree(R).

    Conditions: ``hd1_lower`` sigma(R)/(20A) <= sigma(HD1); ``stop2_upper``
    sigma(HD2 u BR2 u LD2) <= 10 A sigma(HD1); ``br1`` sigma(BR1) <= delta_W
    sigma(R); ``br2`` sigma(BR2) <= delta_W sigma(HD1).
    """
    data = decomp.root_data(R)
    mu, prm = decomp.measure, decomp.params
    r = data.root
    lv = _levels(decomp, r)
    sg = {k: sigma(mu, np.array(v, dtype=np.int64)) for k, v in lv.items()}
    s_r = float(mu.theta[r] ** 2 * mu.mass[r])
    conds = {
        "hd1_lower": (s_r / (20 * prm.A), sg["HD1"]),
        "stop2_upper": (sg["HD2"] + sg["BR2"] + sg["LD2"], 10 * prm.A * sg["HD1"]),
        "br1": (sg["BR1"], prm.delta_W * s_r),
        "br2": (sg["BR2"], prm.delta_W * sg["HD1"]),
    }
    out = {k: {"lhs": a, "rhs": b, "holds": bool(a <= b)} for k, (a, b) in conds.items()}
    return Tractability(all(v["holds"] for v in out.values()), out)


def lemma_qp_ratios(decomp: CoronaDecomposition, exponents=(1.5, 2.0)) -> list:
    """sum q(P,T)^r mu(P) / sum p(P,R)^r mu(P) over Stop_2 of every root's two-level tree.

    Stop_2 = LD1 u BR1 u HD2 u LD2 u BR2; roots with empty Stop_2 are skipped.
    """
    mu = decomp.measure
    rows = []
    for r in decomp.top:
        lv = _levels(decomp, r)
        fam = np.array(sorted(set(lv["LD1"] + lv["BR1"] + lv["HD2"] + lv["LD2"] + lv["BR2"])), dtype=np.int64)
        if fam.size == 0:
            continue
        q = q_coefficients(mu, fam, fam)
        p = p_relative(mu, fam, r)
        m = mu.mass[fam]
        row = {"root": decomp.tree.label(r), "size": int(fam.size)}
        for e in exponents:
            num = math.fsum(q ** e * m)
            den = math.fsum(p ** e * m)
            row[f"r={e:g}"] = num / den if den > 0 else float("inf")
        rows.append(row)
    return rows


# -- statistics and invariant checks ----------------------------------------------------

def tree_statistics(decomp: CoronaDecomposition, measure: DyadicMeasure | None = None) -> dict:
    """Packing and energy ratios per simple tree, with maxima over trees."""
    mu = measure or decomp.measure
    t = decomp.tree
    top = np.array(decomp.top, dtype=np.int64)
    idx = np.searchsorted(np.sort(top), decomp.tree_of)
    order = np.argsort(top)
    w_mass = np.bincount(idx, weights=mu.mass, minlength=len(top))
    w_sigma = np.bincount(idx, weights=mu.theta ** 2 * mu.mass, minlength=len(top))
    w_mass0 = np.bincount(idx, weights=mu.mass * decomp.in_tree0, minlength=len(top))
    rows = []
    for j, r in enumerate(np.sort(top)):
        base = mu.theta[r] ** 2 * mu.mass[r]
        rows.append({
            "root": t.label(int(r)),
            "mass_sum": float(w_mass[j]),
            "packing": float(w_mass[j] / mu.mass[r]) if mu.mass[r] > 0 else float("inf"),
            "packing_tree0": float(w_mass0[j] / mu.mass[r]) if mu.mass[r] > 0 else float("inf"),
            "sigma": float(w_sigma[j]),
            "sigma_ratio": float(w_sigma[j] / base) if base > 0 else float("inf"),
            "truncated": decomp.roots[int(r)].truncated,
        })
    rows = [rows[k] for k in np.argsort(order)]
    full = [r for r in rows if not r["truncated"]]
    return {
        "trees": rows,
        "max_packing": max(r["packing"] for r in rows),
        "max_sigma_ratio": max(r["sigma_ratio"] for r in rows),
        "max_packing_untruncated": max((r["packing"] for r in full), default=None),
        "max_sigma_ratio_untruncated": max((r["sigma_ratio"] for r in full), default=None),
        "n_trees": len(rows),
        "n_truncated": len(rows) - len(full),
    }


def check_doubling_chains(measure: DyadicMeasure, c_db: float) -> dict:
    """theta(Q_j) <= 2^(-j/2) p(Q_0) on every chain whose cubes below Q_0 fail p-doubling.

    Returns the number of chains examined and the largest ratio
    theta(Q_j) / (2^(-j/2) p(Q_0)).
    """
    t = measure.tree
    nd = measure.p > c_db * measure.theta
    cur = np.nonzero(nd & (t.parent >= 0))[0]
    tip = cur.copy()
    worst, chains, j = 0.0, 0, 1
    while cur.size:
        anc = t.parent[cur]
        ratio = measure.theta[tip] / (2.0 ** (-j / 2) * measure.p[anc])
        chains += int(cur.size)
        if ratio.size:
            worst = max(worst, float(ratio.max()))
        keep = nd[anc] & (t.parent[anc] >= 0)
        cur, tip, j = anc[keep], tip[keep], j + 1
    return {"chains": chains, "max_ratio": worst, "ok": worst <= 1.0 + 1e-12}


def check_nondoubling_families(measure: DyadicMeasure, c_db: float) -> dict:
    """sigma(J) <= 2 p(Q)^2 mu(Q) for the maximal family J of cubes hanging below Q
    through non-doubling cubes only (Q itself non-doubling)."""
    t = measure.tree
    nd = measure.p > c_db * measure.theta
    acc = np.where(nd, measure.theta ** 2 * measure.mass, 0.0)
    for g in range(t.depth, 0, -1):
        sl = t.generation_slice(g)
        np.add.at(acc, t.parent[sl], np.where(nd[sl], acc[sl], 0.0))
    q = np.nonzero(nd)[0]
    if q.size == 0:
        return {"families": 0, "max_ratio": 0.0, "ok": True}
    ratio = acc[q] / (2 * measure.p[q] ** 2 * measure.mass[q])
    return {"families": int(q.size), "max_ratio": float(ratio.max()), "ok": bool(ratio.max() <= 1 + 1e-12)}


def check_corona_invariants(decomp: CoronaDecomposition) -> dict:
    """Evaluate the structural guarantees of the decomposition.

    Every entry carries ``ok`` plus the measured quantity; entries with
    ``asserted: False`` are reported only (their hypotheses are asymptotic).
    """
    t, mu, prm = decomp.tree, decomp.measure, decomp.params
    out = {}
    covered = decomp.tree_of >= 0
    counts = np.zeros(t.n_cubes, dtype=np.int64)
    for r in decomp.top:
        counts[decomp.tree_cubes(r)] += 1
    out["partition"] = {"ok": bool(covered.all() and np.all(counts == 1)),
                        "uncovered": int((~covered).sum()), "multiply_covered": int((counts > 1).sum()),
                        "asserted": True}
    doubling = mu.p <= prm.c_db * mu.theta
    disjoint, all_doubling = True, True
    for r in decomp.top:
        fam = np.array(decomp.stop(r), dtype=np.int64)
        if fam.size > 1:
            o = fam[np.argsort(t.pre_pos[fam])]
            disjoint &= bool(np.all(t.pre_pos[o[1:]] >= t.subtree_end[o[:-1]]))
        all_doubling &= bool(np.all(doubling[fam])) if fam.size else True
    out["stop_disjoint"] = {"ok": disjoint, "asserted": True}
    out["stop_doubling"] = {"ok": all_doubling, "asserted": True}
    top = np.array(decomp.top, dtype=np.int64)
    out["top_doubling"] = {"ok": bool(np.all(doubling[top])), "asserted": True}

    root_of = decomp.tree_of
    th_bound = mu.theta / (2 * prm.B * mu.theta[root_of])
    p_bound = mu.p / ((2 * prm.B + prm.c_db) * mu.theta[root_of])
    out["tree_density_bounds"] = {"ok": bool(th_bound.max() <= 1 + 1e-12 and p_bound.max() <= 1 + 1e-12),
                                  "max_theta_ratio": float(th_bound.max()), "max_p_ratio": float(p_bound.max()),
                                  "asserted": True}

    br_ratio, ld_ratio, hd0_total, hd0_doubling = [], [], 0, 0
    ld_level = prm.delta0 ** (1.0 / (t.s + 2))
    for r in decomp.top:
        data = decomp.roots[r]
        for rec in data.stop:
            if rec.rule == "BR":
                jump = float(np.linalg.norm(decomp.means[rec.cube] - decomp.means[r]))
                br_ratio.append(jump / (prm.M * mu.theta[r] / 2))
            elif rec.rule == "LD":
                ld_ratio.append(mu.p[rec.cube] / (ld_level * mu.theta[r]))
        for q, (rule, _) in data.stop0.items():
            if rule == "HD":
                hd0_total += 1
                hd0_doubling += int(doubling[q])
    out["br_separation"] = {"ok": all(x >= 1 - 1e-12 for x in br_ratio), "count": len(br_ratio),
                            "min_ratio": min(br_ratio, default=None), "asserted": True}
    out["ld_bound"] = {"ok": all(x <= 1 + 1e-12 for x in ld_ratio), "count": len(ld_ratio),
                       "max_ratio": max(ld_ratio, default=None), "asserted": False}
    out["hd0_doubling"] = {"ok": hd0_doubling == hd0_total, "count": hd0_total, "doubling": hd0_doubling,
                           "asserted": False}
    chains = check_doubling_chains(mu, prm.c_db)
    out["doubling_chain_decay"] = {**chains, "asserted": True}
    fams = check_nondoubling_families(mu, prm.c_db)
    out["nondoubling_family_sigma"] = {**fams, "asserted": True}
    return out


def dump_decomposition(decomp: CoronaDecomposition, forest=None, path=None, include_cubes=True) -> str:
    data = decomp.to_dict(include_cubes)
    if forest is not None:
        data["maximal_trees"] = [m.to_dict(decomp.tree) for m in forest]
    text = json.dumps(data, indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
