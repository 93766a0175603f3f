"""Spatial hierarchy over a point cloud, in the flat layout the kernels expect.

For clouds made from a Cantor tree the cubes of the tree are the cells; cubes
holding at most ``leaf_size`` points become buckets and everything below them
is dropped.  Clouds without a tree get an adaptive 2^d-tree over their bounding
cube.  Either way the points are permuted so every cell owns a contiguous
range, siblings are contiguous and cells are stored breadth first.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from . import _kernels


def _preorder(parent, child_start, child_count):
    n = len(parent)
    size = np.ones(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        size[parent[i]] += size[i]
    pos = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        p = parent[i]
        pos[i] = pos[p] + 1 if i == child_start[p] else pos[i - 1] + size[i - 1]
    return pos, pos + size


class Hierarchy:
    """Cells (centre, side, parent/children) plus the permuted cloud."""

    def __init__(self, center, side, parent, bucket, point_cell, points, weights, owner):
        n = len(side)
        self.center = np.ascontiguousarray(center, dtype=float)
        self.side = np.ascontiguousarray(side, dtype=float)
        self.parent = np.ascontiguousarray(parent, dtype=np.int64)
        self.bucket = np.ascontiguousarray(bucket, dtype=np.bool_)
        self.child_count = np.bincount(self.parent[1:], minlength=n).astype(np.int64)
        first = np.full(n, n, dtype=np.int64)
        np.minimum.at(first, self.parent[1:], np.arange(1, n))
        self.child_start = np.where(self.child_count > 0, first, 0).astype(np.int64)
        self.diam = self.side * math.sqrt(self.center.shape[1])
        pos, end = _preorder(self.parent, self.child_start, self.child_count)
        key = pos[point_cell]
        perm = np.argsort(key, kind="stable")
        self.perm = perm
        self.points = np.ascontiguousarray(points[perm])
        self.weights = np.ascontiguousarray(weights[perm])
        self.owner = np.ascontiguousarray(owner[perm])
        skey = key[perm]
        self.pstart = np.searchsorted(skey, pos).astype(np.int64)
        self.pend = np.searchsorted(skey, end).astype(np.int64)
        self._moments = {}

    @property
    def n_cells(self) -> int:
        return len(self.side)

    def moments(self, order: int):
        """(moments, radius about centre, centre of mass, radius about it, mass)."""
        if order not in self._moments:
            kk, deg, m1, m2, p1, ncum = _kernels.taylor_tables(self.center.shape[1], max(order, 1) + 1)
            nm = int(ncum[max(order, 1)])
            self._moments[order] = _kernels.cell_moments(
                self.center, self.pstart, self.pend, self.points, self.weights, nm, m1)
        return self._moments[order]

    @cached_property
    def mass_stats(self):
        return self.moments(1)

    # -- constructors -----------------------------------------------------------
    @classmethod
    def from_tree(cls, tree, points, weights, owner, leaf_size: int = 16) -> "Hierarchy":
        n = tree.n_cubes
        own_count = np.bincount(owner, minlength=n).astype(np.int64)
        count = own_count.copy()
        for g in range(tree.depth, 0, -1):
            sl = tree.generation_slice(g)
            np.add.at(count, tree.parent[sl], count[sl])
        is_bucket = (count <= leaf_size) | tree.is_leaf | ((own_count > 0) & (count > own_count))
        active = np.zeros(n, dtype=bool)
        active[0] = True
        home = np.zeros(n, dtype=np.int64)  # bucket that absorbs each cube
        for g in range(1, tree.depth + 1):
            sl = tree.generation_slice(g)
            par = tree.parent[sl]
            active[sl] = active[par] & ~is_bucket[par]
            home[sl] = np.where(active[sl], np.arange(sl.start, sl.stop), home[par])
        keep = active & (count > 0)
        keep[0] = True
        new = np.cumsum(keep) - 1
        idx = np.nonzero(keep)[0]
        parent = np.where(tree.parent[idx] >= 0, new[np.maximum(tree.parent[idx], 0)], -1)
        return cls(tree.center[idx], tree.side[idx], parent, is_bucket[idx],
                   new[home[owner]], points, weights, owner)

    @classmethod
    def from_points(cls, points, weights, owner, leaf_size: int = 16, max_depth: int = 48) -> "Hierarchy":
        points = np.asarray(points, dtype=float)
        d = points.shape[1]
        lo, hi = points.min(axis=0), points.max(axis=0)
        side0 = float(np.max(hi - lo)) or 1.0
        centers, sides, parents, buckets = [(lo + hi) / 2], [side0 * (1 + 1e-12)], [-1], []
        point_cell = np.zeros(len(points), dtype=np.int64)
        members = [np.arange(len(points))]
        depth = [0]
        signs = np.array(np.meshgrid(*([[-1, 1]] * d), indexing="ij")).reshape(d, -1).T
        c = 0
        while c < len(centers):
            idx = members[c]
            if len(idx) <= leaf_size or depth[c] >= max_depth:
                buckets.append(True)
                point_cell[idx] = c
            else:
                buckets.append(False)
                upper = points[idx] > centers[c]
                code = upper @ (1 << np.arange(d)[::-1])
                for k, sgn in enumerate(signs):
                    sel = idx[code == k]
                    if sel.size:
                        centers.append(centers[c] + sgn * sides[c] / 4)
                        sides.append(sides[c] / 2)
                        parents.append(c)
                        members.append(sel)
                        depth.append(depth[c] + 1)
            members[c] = None
            c += 1
        return cls(np.array(centers), np.array(sides), np.array(parents), np.array(buckets),
                   point_cell, points, np.asarray(weights, dtype=float), np.asarray(owner, dtype=np.int64))

    @classmethod
    def for_cloud(cls, cloud, leaf_size: int = 16) -> "Hierarchy":
        if cloud.tree is not None and np.all(cloud.owner >= 0):
            return cls.from_tree(cloud.tree, cloud.points, cloud.weights, cloud.owner, leaf_size)
        return cls.from_points(cloud.points, cloud.weights, cloud.owner, leaf_size)
