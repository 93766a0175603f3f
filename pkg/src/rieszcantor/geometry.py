"""Uniformly disconnected Cantor trees in R^d.

A construction starts from one closed axis-aligned cube and, generation after
generation, places a finite family of disjoint closed subcubes inside every
cube of the previous generation.  Every child must satisfy

    rho_min * l(Q) <= l(child) <= rho_max * l(Q)
    dist(child, other child) >= c_sep * l(Q)

where ``l`` is the diameter (default) or the side of the cube, selected by
``CantorSpec.length_convention``.  Cubes are stored breadth first, so that the
children of any cube occupy a contiguous slice of the flat arrays and the
descendants of a cube at a fixed generation form a contiguous range.

Cube identifiers are ``(generation, index)`` pairs.  Most internals work on the
flat position in the breadth-first order; :meth:`CantorTree.index` converts.
"""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, NonPositiveScale, SpecViolation, UnknownCube

__all__ = [
    "CantorSpec",
    "CubeNode",
    "CantorTree",
    "ValidationReport",
    "Violation",
    "build_cantor",
    "validate_tree",
    "transform_tree",
    "box_distance",
    "children_bound",
    "load_spec",
    "dump_spec",
    "dump_tree",
    "load_tree_dump",
]

_REL = 1e-12
_PRESET = re.compile(r"^(grid|random)(\d+)$")


@dataclass(frozen=True)
class CantorSpec:
    """Declarative description of a Cantor construction.

    ``layout`` is either a preset name or an explicit sequence of child centres
    given relative to the parent centre in units of the parent side.  Presets:

    * ``"grid{3^d-1}"`` (``grid8`` in the plane): children in the non-central
      cells of the 3^d subdivision;
    * ``"grid{2^d}"`` (``grid4`` in the plane): the corner cells only;
    * ``"grid{3^d}"``: every cell of the subdivision;
    * ``"random{k}"``: k children placed uniformly at random (rejection sampled);
    * ``"single"``: one concentric child.

    ``ratio=None`` draws every child ratio uniformly from ``ratio_bounds``.
    ``jitter`` perturbs preset centres by up to that many parent sides per
    coordinate.  Random draws are retried up to ``max_retries`` times per parent.
    """

    dimension: int
    s: float
    layout: str | tuple = "grid8"
    ratio: float | None = 0.25
    ratio_bounds: tuple[float, float] = (1 / 8, 1 / 3)
    c_sep: float = 0.05
    depth: int = 3
    seed: int = 0
    jitter: float = 0.0
    root_side: float = 1.0
    root_center: tuple | None = None
    length_convention: str = "diam"
    c_sep_cap: float = 0.1
    max_retries: int = 1000

    def __post_init__(self):
        d = self.dimension
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise SpecViolation("parameter", f"dimension must be a positive integer, got {d!r}")
        if not (d - 1 < self.s < d):
            raise SpecViolation("parameter", f"s={self.s} must satisfy {d - 1} < s < {d}")
        if isinstance(self.layout, (list, tuple)):
            offsets = tuple(tuple(float(c) for c in row) for row in self.layout)
            if not offsets or any(len(row) != d for row in offsets):
                raise SpecViolation("parameter", "explicit layout needs non-empty rows of length d")
            object.__setattr__(self, "layout", offsets)
        lo, hi = (float(b) for b in self.ratio_bounds)
        object.__setattr__(self, "ratio_bounds", (lo, hi))
        if not (0.0 < lo <= hi < 1.0):
            raise SpecViolation("parameter", f"ratio bounds {self.ratio_bounds} must satisfy 0 < lo <= hi < 1")
        if self.ratio is not None:
            r = float(self.ratio)
            object.__setattr__(self, "ratio", r)
            if not (lo * (1 - _REL) <= r <= hi * (1 + _REL)):
                raise SpecViolation("ratio", f"ratio {r} outside bounds [{lo}, {hi}]")
        if not (0.0 < self.c_sep <= self.c_sep_cap):
            raise SpecViolation("parameter", f"c_sep={self.c_sep} must lie in (0, {self.c_sep_cap}]")
        if self.depth < 0:
            raise SpecViolation("parameter", "depth must be non-negative")
        if self.root_side <= 0:
            raise SpecViolation("parameter", "root_side must be positive")
        if self.jitter < 0:
            raise SpecViolation("parameter", "jitter must be non-negative")
        if self.length_convention not in ("diam", "side"):
            raise SpecViolation("parameter", "length_convention must be 'diam' or 'side'")
        if self.root_center is not None:
            rc = tuple(float(c) for c in self.root_center)
            if len(rc) != d:
                raise SpecViolation("parameter", "root_center must have length d")
            object.__setattr__(self, "root_center", rc)
        if isinstance(self.layout, str):
            _resolve_layout(self)  # fail early on unknown presets

    @property
    def length_factor(self) -> float:
        """l(Q) / side(Q) under the configured convention."""
        return math.sqrt(self.dimension) if self.length_convention == "diam" else 1.0

    @property
    def is_random(self) -> bool:
        randomly_placed = isinstance(self.layout, str) and self.layout.startswith("random")
        return self.ratio is None or self.jitter > 0 or randomly_placed

    def transformed(self, t: float, v: Sequence[float]) -> "CantorSpec":
        if t <= 0:
            raise NonPositiveScale(f"scale must be positive, got {t}")
        rc = np.zeros(self.dimension) if self.root_center is None else np.asarray(self.root_center)
        return replace(self, root_side=self.root_side * t, root_center=tuple(t * rc + np.asarray(v, float)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ratio_bounds"] = list(self.ratio_bounds)
        if isinstance(self.layout, tuple):
            out["layout"] = [list(r) for r in self.layout]
        if self.root_center is not None:
            out["root_center"] = list(self.root_center)
        return out

    @classmethod
    def from_dict(cls, data: dict, where: str = "spec") -> "CantorSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown field(s) {unknown}", where)
        kw = dict(data)
        if "ratio_bounds" in kw:
            kw["ratio_bounds"] = tuple(kw["ratio_bounds"])
        if kw.get("ratio") in ("random", "none"):
            kw["ratio"] = None
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc), where) from None


@dataclass(frozen=True)
class CubeNode:
    id: tuple[int, int]
    generation: int
    center: tuple[float, ...]
    side: float
    ell: float
    parent: tuple[int, int] | None
    children: tuple[tuple[int, int], ...]

    @property
    def is_leaf(self) -> bool:
        return not self.children


def _resolve_layout(spec: CantorSpec):
    """Return (offsets or None, child count) in parent-side units."""
    d = spec.dimension
    if not isinstance(spec.layout, str):
        arr = np.asarray(spec.layout, dtype=float)
        return arr, len(arr)
    if spec.layout == "single":
        return np.zeros((1, d)), 1
    m = _PRESET.match(spec.layout)
    if not m:
        raise SpecViolation("parameter", f"unknown layout preset {spec.layout!r}")
    kind, k = m.group(1), int(m.group(2))
    if kind == "random":
        if k < 1:
            raise SpecViolation("parameter", "random layout needs at least one child")
        return None, k
    cells = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * d), indexing="ij")).reshape(d, -1).T / 3.0
    if k == 3**d - 1:
        offsets = cells[np.any(cells != 0, axis=1)]
    elif k == 2**d:
        offsets = cells[np.all(cells != 0, axis=1)]
    elif k == 3**d:
        offsets = cells
    else:
        raise SpecViolation("parameter", f"grid{k} is not a {d}-dimensional preset")
    return offsets, k


def box_distance(c1, h1, c2, h2):
    """Euclidean distance between closed axis-aligned cubes (centres, half sides).

    Broadcasts over leading axes; returns 0 for intersecting cubes.
    """
    gap = np.abs(np.asarray(c1) - np.asarray(c2)) - (np.asarray(h1) + np.asarray(h2))[..., None]
    return np.sqrt(np.sum(np.maximum(gap, 0.0) ** 2, axis=-1))


def _sibling_failures(offsets, ratios, spec):
    """Check one parent's child layout (parent side 1, centred at 0).

    Returns None when admissible, else (kind, [child positions]).
    """
    lo, hi = spec.ratio_bounds
    bad = np.nonzero((ratios < lo * (1 - _REL)) | (ratios > hi * (1 + _REL)))[0]
    if bad.size:
        return "ratio", bad.tolist()
    reach = np.abs(offsets) + ratios[:, None] / 2
    bad = np.nonzero(np.any(reach > 0.5 * (1 + _REL), axis=1))[0]
    if bad.size:
        return "containment", bad.tolist()
    k = len(ratios)
    if k > 1:
        i, j = np.triu_indices(k, 1)
        gaps = box_distance(offsets[i], ratios[i] / 2, offsets[j], ratios[j] / 2)
        bad = np.nonzero(gaps < spec.c_sep * spec.length_factor * (1 - _REL))[0]
        if bad.size:
            return "separation", [int(i[bad[0]]), int(j[bad[0]])]
    return None


def _draw_children(spec, nominal, k, rng):
    lo, hi = spec.ratio_bounds
    failure = None
    for _ in range(spec.max_retries):
        ratios = np.full(k, spec.ratio) if spec.ratio is not None else rng.uniform(lo, hi, k)
        if nominal is None:
            half_room = (1.0 - ratios[:, None]) / 2
            offsets = rng.uniform(-1.0, 1.0, (k, spec.dimension)) * half_room
        elif spec.jitter > 0:
            offsets = nominal + spec.jitter * rng.uniform(-1.0, 1.0, nominal.shape)
        else:
            offsets = nominal
        failure = _sibling_failures(offsets, ratios, spec)
        if failure is None:
            return offsets, ratios
    kind, where = failure
    raise SpecViolation(kind, f"no admissible child layout after {spec.max_retries} draws", where)


class CantorTree:
    """Immutable breadth-first storage of the cube family D.

    Arrays (all read-only): ``center`` (N, d), ``side``, ``ell``, ``parent``,
    ``generation``, ``child_start``, ``child_count``.  ``preorder`` lists flat
    indices in depth-first preorder and ``pre_pos``/``subtree_end`` delimit every
    subtree inside it.
    """

    def __init__(self, spec: CantorSpec, center, side, parent):
        center = np.ascontiguousarray(center, dtype=float).reshape(len(side), spec.dimension)
        side = np.ascontiguousarray(side, dtype=float)
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        n = len(side)
        if n == 0 or parent[0] != -1 or np.any(parent[1:] < 0):
            raise SpecViolation("parameter", "tree must have a single root stored first")
        if np.any(parent[1:] >= np.arange(1, n)) or np.any(np.diff(parent[1:]) < 0):
            raise SpecViolation("parameter", "cubes must be stored breadth first with grouped siblings")
        generation = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            generation[i] = generation[parent[i]] + 1
        if np.any(np.diff(generation) < 0):
            raise SpecViolation("parameter", "cubes must be sorted by generation")
        child_count = np.bincount(parent[1:], minlength=n).astype(np.int64)
        child_start = np.zeros(n, dtype=np.int64)
        first = np.full(n, n, dtype=np.int64)
        np.minimum.at(first, parent[1:], np.arange(1, n))
        child_start[:] = np.where(child_count > 0, first, 0)

        self.spec = spec
        self.center = center
        self.side = side
        self.parent = parent
        self.generation = generation
        self.child_count = child_count
        self.child_start = child_start
        self.ell = side * spec.length_factor
        self.depth = int(generation[-1])
        self.gen_offsets = np.searchsorted(generation, np.arange(self.depth + 2)).astype(np.int64)
        self.is_leaf = child_count == 0
        self.leaves = np.nonzero(self.is_leaf)[0]
        self._build_preorder()
        for arr in (self.center, self.side, self.parent, self.generation, self.child_count,
                    self.child_start, self.ell, self.gen_offsets, self.is_leaf, self.leaves,
                    self.preorder, self.pre_pos, self.subtree_end):
            arr.setflags(write=False)

    def _build_preorder(self):
        n = self.n_cubes
        size = np.ones(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            size[self.parent[i]] += size[i]
        pre_pos = np.zeros(n, dtype=np.int64)
        # a child starts right after its parent plus the subtrees of earlier siblings
        for i in range(1, n):
            p = self.parent[i]
            pre_pos[i] = pre_pos[p] + 1 if i == self.child_start[p] else pre_pos[i - 1] + size[i - 1]
        preorder = np.empty(n, dtype=np.int64)
        preorder[pre_pos] = np.arange(n)
        self.pre_pos = pre_pos
        self.subtree_end = pre_pos + size
        self.preorder = preorder

    # -- basic queries -----------------------------------------------------
    @property
    def n_cubes(self) -> int:
        return len(self.side)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def s(self) -> float:
        return self.spec.s

    def index(self, cube) -> int:
        """Flat index of a cube given as ``(generation, index)`` or flat int."""
        if isinstance(cube, (tuple, list)) and len(cube) == 2:
            g, i = int(cube[0]), int(cube[1])
            if not (0 <= g <= self.depth) or not (0 <= i < self.gen_offsets[g + 1] - self.gen_offsets[g]):
                raise UnknownCube(cube)
            return int(self.gen_offsets[g] + i)
        if isinstance(cube, (int, np.integer)) and 0 <= cube < self.n_cubes:
            return int(cube)
        raise UnknownCube(cube)

    def cube_id(self, flat: int) -> tuple[int, int]:
        g = int(self.generation[flat])
        return g, int(flat - self.gen_offsets[g])

    def label(self, flat: int) -> str:
        g, i = self.cube_id(flat)
        return f"{g}:{i}"

    def children(self, flat: int) -> np.ndarray:
        a = self.child_start[flat]
        return np.arange(a, a + self.child_count[flat])

    def ancestors(self, flat: int, include_self: bool = True) -> list[int]:
        out = [flat] if include_self else []
        p = self.parent[flat]
        while p >= 0:
            out.append(int(p))
            p = self.parent[p]
        return out

    def contains(self, outer: int, inner: int) -> bool:
        """True when cube ``outer`` contains cube ``inner`` (or equals it)."""
        return bool(self.pre_pos[outer] <= self.pre_pos[inner] < self.subtree_end[outer])

    def subtree(self, flat: int) -> np.ndarray:
        return self.preorder[self.pre_pos[flat]:self.subtree_end[flat]]

    def leaves_under(self, flat: int) -> np.ndarray:
        sub = self.subtree(flat)
        return sub[self.is_leaf[sub]]

    def generation_slice(self, g: int) -> slice:
        return slice(int(self.gen_offsets[g]), int(self.gen_offsets[g + 1]))

    def node(self, cube) -> CubeNode:
        q = self.index(cube)
        p = int(self.parent[q])
        return CubeNode(
            id=self.cube_id(q),
            generation=int(self.generation[q]),
            center=tuple(float(c) for c in self.center[q]),
            side=float(self.side[q]),
            ell=float(self.ell[q]),
            parent=None if p < 0 else self.cube_id(p),
            children=tuple(self.cube_id(int(c)) for c in self.children(q)),
        )

    def nodes(self) -> Iterable[CubeNode]:
        for q in range(self.n_cubes):
            yield self.node(q)

    def distance(self, a: int, b: int) -> float:
        return float(box_distance(self.center[a], self.side[a] / 2, self.center[b], self.side[b] / 2))

    def __repr__(self):
        return (f"CantorTree(d={self.dimension}, depth={self.depth}, cubes={self.n_cubes}, "
                f"leaves={len(self.leaves)}, layout={self.spec.layout!r})")


def build_cantor(spec: CantorSpec) -> CantorTree:
    """Construct the cube hierarchy of ``spec`` down to generation ``spec.depth``.

    Deterministic layouts are checked once (they are similar at every cube);
    random layouts are drawn per parent in breadth-first order from
    ``numpy.random.default_rng(spec.seed)`` and each draw is rejection tested.
    """
    d = spec.dimension
    nominal, k = _resolve_layout(spec)
    root = np.zeros(d) if spec.root_center is None else np.asarray(spec.root_center, dtype=float)
    centers = [root[None, :]]
    sides = [np.array([spec.root_side])]
    parents = [np.array([-1], dtype=np.int64)]
    offset = 1
    if not spec.is_random:
        ratios = np.full(k, spec.ratio)
        failure = _sibling_failures(nominal, ratios, spec)
        if failure is not None:
            kind, where = failure
            raise SpecViolation(kind, f"layout {spec.layout!r} is not admissible (children {where})", where)
        for _ in range(spec.depth):
            prev_c, prev_s = centers[-1], sides[-1]
            n_prev = len(prev_s)
            centers.append((prev_c[:, None, :] + prev_s[:, None, None] * nominal[None]).reshape(-1, d))
            sides.append(np.repeat(prev_s * spec.ratio, k))
            parents.append(np.repeat(np.arange(offset - n_prev, offset), k))
            offset += n_prev * k
    else:
        rng = np.random.default_rng(spec.seed)
        for _ in range(spec.depth):
            prev_c, prev_s = centers[-1], sides[-1]
            n_prev = len(prev_s)
            new_c, new_s, new_p = [], [], []
            for j in range(n_prev):
                offs, ratios = _draw_children(spec, nominal, k, rng)
                new_c.append(prev_c[j] + prev_s[j] * offs)
                new_s.append(prev_s[j] * ratios)
                new_p.append(np.full(k, offset - n_prev + j))
            centers.append(np.concatenate(new_c))
            sides.append(np.concatenate(new_s))
            parents.append(np.concatenate(new_p))
            offset += sum(len(s) for s in new_s)
    return CantorTree(spec, np.concatenate(centers), np.concatenate(sides), np.concatenate(parents))


def transform_tree(tree: CantorTree, t: float, v: Sequence[float]) -> CantorTree:
    """Similarity image x -> t x + v of a tree; the structure is unchanged."""
    if not t > 0:
        raise NonPositiveScale(f"scale must be positive, got {t}")
    v = np.asarray(v, dtype=float).reshape(tree.dimension)
    return CantorTree(tree.spec.transformed(t, v), tree.center * t + v, tree.side * t, tree.parent)


def children_bound(spec: CantorSpec) -> int:
    """Upper bound on the number of children of any admissible cube.

    Sibling cubes at Euclidean distance >= g are separated by g/sqrt(d) along some
    axis, so cubes inflated by half of that are interior-disjoint and fit in the
    parent inflated likewise.  Volume comparison gives the bound.
    """
    d = spec.dimension
    g = spec.c_sep * spec.length_factor / math.sqrt(d)
    return int(math.floor(((1 + g) / (spec.ratio_bounds[0] + g)) ** d * (1 + 1e-12)))


@dataclass
class Violation:
    kind: str
    cubes: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    """Result of :func:`validate_tree`; ``violations`` is empty iff the tree is admissible."""

    violations: list = field(default_factory=list)
    achieved: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}


def _sibling_pairs(tree: CantorTree):
    parents = np.nonzero(tree.child_count > 1)[0]
    ii, jj = [], []
    for c in np.unique(tree.child_count[parents]):
        group = parents[tree.child_count[parents] == c]
        a, b = np.triu_indices(int(c), 1)
        ii.append((tree.child_start[group][:, None] + a[None]).ravel())
        jj.append((tree.child_start[group][:, None] + b[None]).ravel())
    if not ii:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(ii), np.concatenate(jj)


def validate_tree(tree: CantorTree, disconnection: bool = True) -> ValidationReport:
    """Check every cube invariant and report achieved constants.

    Violations are collected, never raised.  ``achieved`` holds the extreme child
    ratios, the sibling separation constant min dist(C, C')/l(Q), the volume
    regularity range vol(Q)/l(Q)^d, the maximal number of children against
    :func:`children_bound`, and (when ``disconnection``) the constant
    min_Q dist(Q, E \\ Q)/l(Q) with E the union of the leaves.
    """
    spec = tree.spec
    rep = ValidationReport()
    lo, hi = spec.ratio_bounds
    kids = np.arange(1, tree.n_cubes)
    par = tree.parent[kids]

    ratio = tree.ell[kids] / tree.ell[par] if kids.size else np.zeros(0)
    for q in kids[(ratio < lo * (1 - _REL)) | (ratio > hi * (1 + _REL))]:
        p = int(tree.parent[q])
        rep.violations.append(Violation("ratio", (tree.cube_id(p), tree.cube_id(int(q))),
                                        f"l(child)/l(parent) = {tree.ell[q] / tree.ell[p]:.6g}"))

    reach = np.abs(tree.center[kids] - tree.center[par]) + tree.side[kids, None] / 2
    escaped = np.any(reach > (tree.side[par, None] / 2) * (1 + _REL), axis=1) if kids.size else []
    for q in kids[escaped]:
        rep.violations.append(Violation("containment", (tree.cube_id(int(q)), tree.cube_id(int(tree.parent[q])))))

    i, j = _sibling_pairs(tree)
    gaps = box_distance(tree.center[i], tree.side[i] / 2, tree.center[j], tree.side[j] / 2)
    rel = gaps / tree.ell[tree.parent[i]] if i.size else np.zeros(0)
    for a, b, r in zip(i[rel < spec.c_sep * (1 - _REL)], j[rel < spec.c_sep * (1 - _REL)],
                       rel[rel < spec.c_sep * (1 - _REL)]):
        rep.violations.append(Violation("separation", (tree.cube_id(int(a)), tree.cube_id(int(b))),
                                        f"dist/l(parent) = {r:.6g} < c_sep = {spec.c_sep}"))

    bound = children_bound(spec)
    max_children = int(tree.child_count.max()) if tree.n_cubes else 0
    if max_children > bound:
        worst = int(np.argmax(tree.child_count))
        rep.violations.append(Violation("children", (tree.cube_id(worst),), f"{max_children} > bound {bound}"))

    vol = tree.side ** tree.dimension / tree.ell ** tree.dimension
    rep.achieved.update(
        min_ratio=float(ratio.min()) if ratio.size else None,
        max_ratio=float(ratio.max()) if ratio.size else None,
        separation_constant=float(rel.min()) if rel.size else None,
        volume_ratio=(float(vol.min()), float(vol.max())),
        max_children=max_children,
        children_bound=bound,
        n_cubes=tree.n_cubes,
        depth=tree.depth,
    )
    if disconnection and tree.n_cubes > 1:
        const = _kernels.disconnection_constants(
            tree.center, tree.side, tree.ell, tree.parent, tree.child_start, tree.child_count)
        finite = const[np.isfinite(const)]
        rep.achieved["disconnection_constant"] = float(finite.min()) if finite.size else None
    return rep


# -- text formats -------------------------------------------------------------

def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot encode {v!r}")


def dump_spec(spec: CantorSpec, path=None) -> str:
    """Write a spec as a flat TOML document; ``None`` fields are omitted."""
    lines = [f"{k} = {_toml_value(v)}" for k, v in spec.to_dict().items() if v is not None]
    if spec.ratio is None:
        lines.append('ratio = "random"')
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_spec(source) -> CantorSpec:
    """Read a spec document from a path or from TOML text."""
    import tomli

    where = "spec"
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        where = str(source)
        source = Path(source).read_text()
    try:
        data = tomli.loads(source)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc), where) from None
    return CantorSpec.from_dict(data, where)


def dump_tree(tree: CantorTree, path=None) -> str:
    """Line-oriented dump: ``id parent generation x1 .. xd side`` per cube.

    The first line is a comment carrying the spec as JSON.
    """
    buf = io.StringIO()
    buf.write("# spec " + json.dumps(tree.spec.to_dict(), sort_keys=True) + "\n")
    buf.write("# id parent generation " + " ".join(f"x{k + 1}" for k in range(tree.dimension)) + " side\n")
    for q in range(tree.n_cubes):
        p = int(tree.parent[q])
        coords = " ".join(repr(float(c)) for c in tree.center[q])
        buf.write(f"{tree.label(q)} {'-' if p < 0 else tree.label(p)} {int(tree.generation[q])} "
                  f"{coords} {float(tree.side[q])!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def load_tree_dump(text_or_path) -> CantorTree:
    text = text_or_path
    if isinstance(text_or_path, Path) or "\n" not in str(text_or_path):
        text = Path(text_or_path).read_text()
    lines = text.splitlines()
    spec = CantorSpec.from_dict(json.loads(lines[0][len("# spec "):]))
    labels, parents, centers, sides = {}, [], [], []
    for row in (ln.split() for ln in lines[1:] if ln and not ln.startswith("#")):
        labels[row[0]] = len(labels)
        parents.append(-1 if row[1] == "-" else labels[row[1]])
        centers.append([float(x) for x in row[3:-1]])
        sides.append(float(row[-1]))
    return CantorTree(spec, np.array(centers), np.array(sides), np.array(parents))
