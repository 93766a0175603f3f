"""Property-based checks of the structural identities on random inputs."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import riesz_direct
from rieszcantor.capacity import WolffParams, wolff_potentials
from rieszcantor.corona import CoronaParams, check_corona_invariants, corona_decompose
from rieszcantor.geometry import CantorSpec, build_cantor, validate_tree
from rieszcantor.measure import MassRule, PointCloud, assign_measure, sigma
from rieszcantor.riesz import KernelParams, kernel_eval, martingale_decompose, max_relative_error, riesz_field

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2 ** 31 - 1)
exponents = st.floats(1.05, 1.95)


def random_setup(seed, depth=3, concentration=1.0):
    spec = CantorSpec(2, 1.5, layout="random5", ratio=None, ratio_bounds=(0.125, 0.2), depth=depth, seed=seed)
    tree = build_cantor(spec)
    return tree, assign_measure(tree, MassRule(kind="random", seed=seed, concentration=concentration))


@SETTINGS
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), exponents)
def test_kernel_antisymmetry(xy, s):
    x, y = np.array(xy[:2]), np.array(xy[2:])
    if np.allclose(x, y):
        return
    params = KernelParams(s)
    assert np.array_equal(kernel_eval(x, y, params), -kernel_eval(y, x, params))


@SETTINGS
@given(seeds)
def test_random_construction_admissible(seed):
    tree, _ = random_setup(seed)
    rep = validate_tree(tree, disconnection=False)
    assert rep.ok
    assert rep.achieved["separation_constant"] >= tree.spec.c_sep * (1 - 1e-12)


@SETTINGS
@given(seeds, st.floats(0.3, 5.0))
def test_measure_tables(seed, conc):
    tree, mu = random_setup(seed, concentration=conc)
    kids = np.arange(1, tree.n_cubes)
    sums = np.zeros(tree.n_cubes)
    np.add.at(sums, tree.parent[kids], mu.mass[kids])
    inner = tree.child_count > 0
    np.testing.assert_allclose(sums[inner], mu.mass[inner], rtol=1e-12)
    np.testing.assert_allclose(mu.theta * tree.ell ** 1.5, mu.mass, rtol=1e-12)
    pos = mu.theta > 0
    td, th = mu.theta_d[pos], mu.theta[pos]
    assert np.all((td <= th) & (th < 2 * td))
    assert np.all(np.frexp(td)[0] == 0.5)
    np.testing.assert_allclose(mu.p[kids], mu.theta[kids] + tree.ell[kids] / tree.ell[tree.parent[kids]]
                               * mu.p[tree.parent[kids]], rtol=1e-12)


@SETTINGS
@given(seeds, st.floats(0.1, 10.0))
def test_sigma_additive_and_cubic(seed, lam):
    tree, mu = random_setup(seed)
    g1 = np.arange(*tree.generation_slice(1).indices(tree.n_cubes))
    leaves = tree.leaves
    total = sigma(mu, np.concatenate([g1, leaves]))
    assert math.isclose(total, sigma(mu, g1) + sigma(mu, leaves), rel_tol=1e-12)
    assert math.isclose(sigma(mu.scaled(lam), g1), lam ** 3 * sigma(mu, g1), rel_tol=1e-12)


@SETTINGS
@given(seeds, st.integers(1, 3))
def test_martingale_identity(seed, dim):
    tree, mu = random_setup(seed)
    f = np.random.default_rng(seed).normal(size=(len(tree.leaves), dim))
    md = martingale_decompose(tree, mu, f)
    assert md.pythagoras_gap() <= 1e-12 * md.norm_sq


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.5, 4.0), st.floats(0.2, 100.0))
def test_corona_invariants_random(seed, conc, m):
    tree, mu = random_setup(seed, concentration=conc)
    dec = corona_decompose(tree, mu, CoronaParams(M=m))
    inv = check_corona_invariants(dec)
    failed = [k for k, v in inv.items() if v["asserted"] and not v["ok"]]
    assert not failed


@SETTINGS
@given(seeds, st.floats(0.1, 10.0), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_wolff_homogeneous_and_translation_invariant(seed, lam, shift):
    g = np.random.default_rng(seed)
    pts, w = g.normal(size=(12, 2)), g.uniform(0.1, 1.0, 12)
    x = g.normal(size=(3, 2))
    params = WolffParams(alpha=1 / 3, p=1.5)
    base = wolff_potentials(PointCloud.from_arrays(pts, w), x, params)
    scaled = wolff_potentials(PointCloud.from_arrays(pts, lam * w), x, params)
    np.testing.assert_allclose(scaled, lam ** params.q * base, rtol=1e-12)
    moved = wolff_potentials(PointCloud.from_arrays(pts + shift, w), x + shift, params)
    np.testing.assert_allclose(moved, base, rtol=1e-9)


@settings(max_examples=15, deadline=None)
@given(seeds, exponents)
def test_treecode_random_clouds(seed, s):
    g = np.random.default_rng(seed)
    n = 600
    pts = np.concatenate([g.normal(size=(n // 2, 2)) * 0.1, g.uniform(-1, 1, (n // 2, 2))])
    w = g.uniform(0.1, 1.0, n)
    x = g.uniform(-1.5, 1.5, (100, 2))
    cloud = PointCloud.from_arrays(pts, w)
    got = riesz_field(cloud, x, KernelParams(s, mode="treecode", leaf_size=8)).values
    assert max_relative_error(got, riesz_direct(pts, w, x, s)) <= 1e-6
