"""Compiled inner loops (numba).

Everything here works on flat arrays.  Point clouds are sorted so that the
points owned by the subtree of any cube form one contiguous range
``[pstart[c], pend[c])``; ``bucket[c]`` marks cubes that own points directly.

Field evaluations are parallel over targets only; each target accumulates its
sources in a fixed order, so results do not depend on the thread count.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numba
import numpy as np
from numba import njit, prange

# TBB builds shipped with some distributions are too old; prefer OpenMP.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_STACK = 4096


# -- geometry ------------------------------------------------------------------

@njit(cache=True)
def _boxdist(c1, h1, c2, h2):
    acc = 0.0
    for m in range(c1.shape[0]):
        g = abs(c1[m] - c2[m]) - (h1 + h2)
        if g > 0.0:
            acc += g * g
    return math.sqrt(acc)


@njit(cache=True)
def disconnection_constants(center, side, ell, parent, child_start, child_count):
    """dist(Q, E \\ Q) / l(Q) per cube, E = union of leaves (branch and bound)."""
    n = side.shape[0]
    out = np.full(n, np.inf)
    stack = np.empty(_STACK, np.int64)
    for q in range(1, n):
        best = np.inf
        hq = side[q] / 2
        c = q
        while parent[c] >= 0:
            p = parent[c]
            top = 0
            for sb in range(child_start[p], child_start[p] + child_count[p]):
                if sb != c:
                    stack[top] = sb
                    top += 1
            while top > 0:
                top -= 1
                u = stack[top]
                lb = _boxdist(center[q], hq, center[u], side[u] / 2)
                if lb >= best:
                    continue
                if child_count[u] == 0:
                    best = lb
                else:
                    for ch in range(child_start[u], child_start[u] + child_count[u]):
                        stack[top] = ch
                        top += 1
            c = p
        out[q] = best / ell[q]
    return out


# -- multi-index tables for Cartesian Taylor expansions --------------------------

@lru_cache(maxsize=None)
def taylor_tables(d: int, order: int):
    """Multi-indices of total degree <= order, sorted by degree.

    Returns (kk, deg, minus1, minus2, plus1, ncum) where ``minus1[i, m]`` is the
    position of kk[i] - e_m (or -1), ``minus2`` that of kk[i] - 2 e_m, ``plus1``
    that of kk[i] + e_m (or -1 past the table) and ``ncum[q]`` counts indices of
    degree <= q.
    """
    mi = []
    for deg in range(order + 1):
        mi.extend(k for k in itertools.product(range(deg + 1), repeat=d) if sum(k) == deg)
    mi.sort(key=lambda k: (sum(k), tuple(-x for x in k)))
    pos = {k: i for i, k in enumerate(mi)}
    n = len(mi)
    kk = np.array(mi, dtype=np.int64).reshape(n, d)
    deg = kk.sum(axis=1)
    minus1 = -np.ones((n, d), np.int64)
    minus2 = -np.ones((n, d), np.int64)
    plus1 = -np.ones((n, d), np.int64)
    for i, k in enumerate(mi):
        for m in range(d):
            km = list(k)
            km[m] -= 1
            if km[m] >= 0:
                minus1[i, m] = pos[tuple(km)]
                km[m] -= 1
                if km[m] >= 0:
                    minus2[i, m] = pos[tuple(km)]
            kp = list(k)
            kp[m] += 1
            plus1[i, m] = pos.get(tuple(kp), -1)
    ncum = np.array([int(np.sum(deg <= q)) for q in range(order + 1)], dtype=np.int64)
    return kk, deg, minus1, minus2, plus1, ncum


@njit(cache=True)
def taylor_coefficients(r, lam, ncoef, c1, c2, minus1, minus2, a):
    """Taylor coefficients D^k phi(r)/k! of phi(r) = |r|^(-lam), first ``ncoef``.

    Uses  N|r|^2 a_n + (2N-2+lam) sum_m r_m a_{n-e_m} + (N-2+lam) sum_m a_{n-2e_m} = 0
    with c1 = (2N-2+lam)/N and c2 = (N-2+lam)/N precomputed per index.
    """
    d = r.shape[0]
    rho = 0.0
    for m in range(d):
        rho += r[m] * r[m]
    a[0] = rho ** (-0.5 * lam)
    inv = 1.0 / rho
    for i in range(1, ncoef):
        s1 = 0.0
        s2 = 0.0
        for m in range(d):
            j = minus1[i, m]
            if j >= 0:
                s1 += r[m] * a[j]
                j = minus2[i, m]
                if j >= 0:
                    s2 += a[j]
        a[i] = -(c1[i] * s1 + c2[i] * s2) * inv


def recurrence_factors(deg, lam):
    n = np.maximum(deg, 1).astype(float)
    c1 = (2 * deg - 2 + lam) / n
    c2 = (deg - 2 + lam) / n
    c1[0] = c2[0] = 0.0
    return c1, c2


@njit(cache=True)
def cell_moments(center, pstart, pend, pts, w, nmom, minus1):
    """Moments sum_j w_j (y_j - c)^k about every cube centre, plus radii and masses."""
    n, d = center.shape
    mom = np.zeros((n, nmom))
    rad = np.zeros(n)
    com = np.zeros((n, d))
    rad_com = np.zeros(n)
    mass = np.zeros(n)
    pw = np.empty(nmom)
    dd = np.empty(d)
    for c in range(n):
        for j in range(pstart[c], pend[c]):
            r2 = 0.0
            for m in range(d):
                dd[m] = pts[j, m] - center[c, m]
                r2 += dd[m] * dd[m]
            if r2 > rad[c] * rad[c]:
                rad[c] = math.sqrt(r2)
            pw[0] = 1.0
            for i in range(1, nmom):
                for m in range(d):
                    q = minus1[i, m]
                    if q >= 0:
                        pw[i] = pw[q] * dd[m]
                        break
            wj = w[j]
            for i in range(nmom):
                mom[c, i] += wj * pw[i]
            mass[c] += wj
        if mass[c] > 0:
            for m in range(d):
                com[c, m] = center[c, m] + mom[c, 1 + m] / mass[c] if nmom > d else center[c, m]
        for j in range(pstart[c], pend[c]):
            r2 = 0.0
            for m in range(d):
                r2 += (pts[j, m] - com[c, m]) ** 2
            if r2 > rad_com[c] * rad_com[c]:
                rad_com[c] = math.sqrt(r2)
    return mom, rad, com, rad_com, mass


# -- Riesz fields ----------------------------------------------------------------

@njit(cache=True)
def _neumaier(s, c, t):
    u = s + t
    if abs(s) >= abs(t):
        c += (s - u) + t
    else:
        c += (t - u) + s
    return u, c


@njit(parallel=True, cache=True)
def direct_field(tx, t_owner, t_phi, sx, sw, s_owner, s_phi, s, eps, use_phi):
    """sum_j w_j K(x_i - y_j) with compensated summation.

    Pairs with equal non-negative owners are skipped.  Without suppression only
    pairs with |x_i - y| > eps[i] count; with suppression the kernel is
    (x - y)/(|x - y|^2 + phi(x) phi(y))^((s+1)/2) and eps is ignored.
    Returns (field, number of singular pairs met).
    """
    nt, d = tx.shape
    ns = sx.shape[0]
    out = np.zeros((nt, d))
    bad = np.zeros(nt, np.int64)
    ex = -0.5 * (s + 1.0)
    for i in prange(nt):
        eps2 = eps[i] * eps[i]
        acc = np.zeros(d)
        comp = np.zeros(d)
        diff = np.empty(d)
        oi = t_owner[i]
        for j in range(ns):
            if oi >= 0 and s_owner[j] == oi:
                continue
            r2 = 0.0
            for m in range(d):
                diff[m] = tx[i, m] - sx[j, m]
                r2 += diff[m] * diff[m]
            if use_phi:
                den = r2 + t_phi[i] * s_phi[j]
                if den == 0.0:
                    if sw[j] != 0.0:
                        bad[i] += 1
                    continue
                f = sw[j] * den ** ex
            else:
                if r2 <= eps2:
                    continue
                f = sw[j] * r2 ** ex
            for m in range(d):
                acc[m], comp[m] = _neumaier(acc[m], comp[m], diff[m] * f)
        for m in range(d):
            out[i, m] = acc[m] + comp[m]
    return out, bad.sum()


@njit(parallel=True, cache=True)
def tree_field(tx, t_owner, sx, sw, s_owner, center, diam, rad, child_start, child_count,
               pstart, pend, bucket, mom, c1, c2, minus1, minus2, plus1, fac, ncum,
               s, eps, theta, tol, pmax):
    """Barnes-Hut evaluation with adaptive-order Cartesian Taylor far fields.

    A cube is used as a far source when diam < theta * |x - centre| and all its
    points lie beyond eps; the expansion order is the least p with
    (rad/|x - centre|)^(p+1) <= tol, capped at pmax.  Returns (field, number of
    far interactions, number of near pairs).
    """
    nt, d = tx.shape
    out = np.zeros((nt, d))
    nfar = np.zeros(nt, np.int64)
    nnear = np.zeros(nt, np.int64)
    lam = s - 1.0
    ex = -0.5 * (s + 1.0)
    eps2 = eps * eps
    ltol = math.log(tol)
    ncoef_max = ncum[pmax + 1]
    for i in prange(nt):
        stack = np.empty(_STACK, np.int64)
        a = np.empty(ncoef_max)
        r = np.empty(d)
        acc = np.zeros(d)
        g = np.zeros(d)
        oi = t_owner[i]
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            c = stack[top]
            if pend[c] == pstart[c]:
                continue
            dist2 = 0.0
            for m in range(d):
                r[m] = tx[i, m] - center[c, m]
                dist2 += r[m] * r[m]
            dist = math.sqrt(dist2)
            if diam[c] < theta * dist and dist - rad[c] > eps:
                p = pmax
                if rad[c] == 0.0:
                    p = 0
                else:
                    p = int(math.ceil(ltol / math.log(rad[c] / dist))) - 1
                    p = min(pmax, max(p, 0))
                taylor_coefficients(r, lam, ncum[p + 1], c1, c2, minus1, minus2, a)
                for m in range(d):
                    g[m] = 0.0
                for k in range(ncum[p]):
                    mk = mom[c, k]
                    for m in range(d):
                        g[m] += fac[k, m] * a[plus1[k, m]] * mk
                for m in range(d):
                    acc[m] -= g[m] / lam
                nfar[i] += 1
            elif bucket[c]:
                for j in range(pstart[c], pend[c]):
                    if oi >= 0 and s_owner[j] == oi:
                        continue
                    r2 = 0.0
                    for m in range(d):
                        r[m] = tx[i, m] - sx[j, m]
                        r2 += r[m] * r[m]
                    if r2 <= eps2:
                        continue
                    f = sw[j] * r2 ** ex
                    for m in range(d):
                        acc[m] += r[m] * f
                    nnear[i] += 1
            else:
                for ch in range(child_start[c], child_start[c] + child_count[c]):
                    stack[top] = ch
                    top += 1
        for m in range(d):
            out[i, m] = acc[m]
    return out, nfar.sum(), nnear.sum()


@njit(parallel=True, cache=True)
def q_sums(qc, qh, ql, pc, ph, pl, pm, s):
    """sum_P l(P) mu(P) / D(P, Q)^(s+1), D = l(P) + dist(P, Q) + l(Q), per cube Q."""
    nq = qc.shape[0]
    npp = pc.shape[0]
    out = np.zeros(nq)
    for i in prange(nq):
        tot = 0.0
        for j in range(npp):
            dpq = _boxdist(qc[i], qh[i], pc[j], ph[j])
            tot += pl[j] * pm[j] / (pl[j] + dpq + ql[i]) ** (s + 1.0)
        out[i] = tot
    return out


# -- ball masses and Wolff potentials ----------------------------------------------

@njit(parallel=True, cache=True)
def ball_masses(qx, qr, sx, sw, center, rad, mass, child_start, child_count, pstart, pend, bucket, slack):
    """Cloud mass in closed balls B(qx_i, qr_i * (1 + slack))."""
    nq, d = qx.shape
    out = np.zeros(nq)
    for i in prange(nq):
        stack = np.empty(_STACK, np.int64)
        rr = qr[i] * (1.0 + slack)
        tot = 0.0
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            c = stack[top]
            if pend[c] == pstart[c]:
                continue
            dc = 0.0
            for m in range(d):
                dc += (qx[i, m] - center[c, m]) ** 2
            dc = math.sqrt(dc)
            if dc + rad[c] <= rr:
                tot += mass[c]
            elif dc - rad[c] > rr:
                continue
            elif bucket[c]:
                for j in range(pstart[c], pend[c]):
                    r2 = 0.0
                    for m in range(d):
                        r2 += (qx[i, m] - sx[j, m]) ** 2
                    if r2 <= rr * rr:
                        tot += sw[j]
            else:
                for ch in range(child_start[c], child_start[c] + child_count[c]):
                    stack[top] = ch
                    top += 1
        out[i] = tot
    return out


@njit(parallel=True, cache=True)
def density_sup_beyond(tx, r0, sx, sw, s):
    """sup over r > r0[i] of mass(closed B(x_i, r)) / r^s."""
    nt, d = tx.shape
    ns = sx.shape[0]
    out = np.zeros(nt)
    for i in prange(nt):
        dist = np.empty(ns)
        for j in range(ns):
            r2 = 0.0
            for m in range(d):
                r2 += (tx[i, m] - sx[j, m]) ** 2
            dist[j] = math.sqrt(r2)
        order = np.argsort(dist, kind="mergesort")
        acc = 0.0
        best = 0.0
        k = 0
        while k < ns and dist[order[k]] <= r0[i]:
            acc += sw[order[k]]
            k += 1
        if r0[i] > 0:
            best = acc / r0[i] ** s
        while k < ns:
            r = dist[order[k]]
            while k < ns and dist[order[k]] == r:
                acc += sw[order[k]]
                k += 1
            v = acc / r ** s
            if v > best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _wolff_from_steps(r, m, n, cut, bq, q):
    """Integral of (F(t)/t^beta)^q dt/t over t >= cut, F the step function with
    jumps m[k] at r[k] (sorted); bq = beta * q."""
    total = 0.0
    acc = 0.0
    k = 0
    while k < n:
        lo = max(r[k], cut)
        acc += m[k]
        k += 1
        while k < n and max(r[k], cut) == lo:
            acc += m[k]
            k += 1
        if acc <= 0.0:
            continue
        if k < n:
            hi = max(r[k], cut)
            total += acc ** q * (lo ** (-bq) - hi ** (-bq)) / bq
        else:
            total += acc ** q * lo ** (-bq) / bq
    return total


@njit(parallel=True, cache=True)
def wolff_exact(tx, t_cut, sx, sw, bq, q):
    """Exact Wolff potentials of a point cloud (O(n) per target after sorting)."""
    nt, d = tx.shape
    ns = sx.shape[0]
    out = np.zeros(nt)
    for i in prange(nt):
        dist = np.empty(ns)
        for j in range(ns):
            r2 = 0.0
            for m in range(d):
                r2 += (tx[i, m] - sx[j, m]) ** 2
            dist[j] = math.sqrt(r2)
        order = np.argsort(dist, kind="mergesort")
        out[i] = _wolff_from_steps(dist[order], sw[order], ns, t_cut[i], bq, q)
    return out


@njit(parallel=True, cache=True)
def wolff_tree(tx, t_cut, sx, sw, com, rad_com, mass, child_start, child_count,
               pstart, pend, bucket, theta, bq, q):
    """Wolff potentials with distant cubes collapsed to their centre of mass.

    A cube is collapsed when its points lie within theta * |x - com| of the
    centre of mass.  Collapsing moves each jump radius of mu(B(x, r)) by at most
    a factor 1 +- theta, so the relative error is O(theta).
    """
    nt, d = tx.shape
    ns = sx.shape[0]
    out = np.zeros(nt)
    for i in prange(nt):
        stack = np.empty(_STACK, np.int64)
        rbuf = np.empty(ns)
        mbuf = np.empty(ns)
        n = 0
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            c = stack[top]
            if pend[c] == pstart[c]:
                continue
            dc = 0.0
            for m in range(d):
                dc += (tx[i, m] - com[c, m]) ** 2
            dc = math.sqrt(dc)
            if rad_com[c] < theta * dc:
                rbuf[n] = dc
                mbuf[n] = mass[c]
                n += 1
            elif bucket[c]:
                for j in range(pstart[c], pend[c]):
                    r2 = 0.0
                    for m in range(d):
                        r2 += (tx[i, m] - sx[j, m]) ** 2
                    rbuf[n] = math.sqrt(r2)
                    mbuf[n] = sw[j]
                    n += 1
            else:
                for ch in range(child_start[c], child_start[c] + child_count[c]):
                    stack[top] = ch
                    top += 1
        order = np.argsort(rbuf[:n], kind="mergesort")
        out[i] = _wolff_from_steps(rbuf[:n][order], mbuf[:n][order], n, t_cut[i], bq, q)
    return out


def set_threads(n: int | None):
    if n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
