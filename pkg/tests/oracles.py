"""Independent reference implementations used only by the tests.

These are deliberately plain numpy / scipy code with no shared code path with
the package kernels.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def riesz_direct(sources, weights, targets, s, src_owner=None, tgt_owner=None, chunk=512):
    """sum_j w_j (x - y_j)/|x - y_j|^(s+1), skipping pairs with equal owner (or equal points)."""
    sources = np.asarray(sources, float)
    targets = np.asarray(targets, float)
    out = np.zeros_like(targets)
    for a in range(0, len(targets), chunk):
        t = targets[a:a + chunk]
        diff = t[:, None, :] - sources[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        if src_owner is not None:
            skip = tgt_owner[a:a + chunk, None] == src_owner[None, :]
        else:
            skip = r2 == 0
        r2 = np.where(skip, 1.0, r2)
        fac = np.where(skip, 0.0, weights[None, :] * r2 ** (-(s + 1) / 2))
        out[a:a + chunk] = np.einsum("ij,ijk->ik", fac, diff)
    return out


def wolff_quad(points, weights, x, alpha, p, cutoff=0.0):
    """Wolff potential by adaptive quadrature between the jump radii of mu(B(x, r))."""
    points = np.atleast_2d(np.asarray(points, float))
    d = points.shape[1]
    beta = d - alpha * p
    q = 1.0 / (p - 1.0)
    dist = np.linalg.norm(points - np.asarray(x, float), axis=1)
    order = np.argsort(dist)
    radii = dist[order]
    cum = np.cumsum(np.asarray(weights, float)[order])
    edges = sorted({max(r, cutoff) for r in radii} | {cutoff})
    total = 0.0

    def mass(r):
        k = np.searchsorted(radii, r, side="left")
        return cum[k - 1] if k > 0 else 0.0

    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo or lo <= 0:
            continue
        m = mass(0.5 * (lo + hi))
        val, _ = integrate.quad(lambda t: (m / t ** beta) ** q / t, lo, hi, epsrel=1e-13, epsabs=0)
        total += val
    top = edges[-1]
    m = cum[-1]
    if top > 0:
        # tail integral of m^q t^(-beta q - 1) from top to infinity
        total += integrate.quad(lambda t: (m / t ** beta) ** q / t, top, math.inf, epsrel=1e-13, epsabs=0)[0]
    return total
