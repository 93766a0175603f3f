"""Riesz kernel, field evaluation, energies, means and martingale differences."""

from __future__ import annotations

import numpy as np
import pytest

from oracles import riesz_direct
from rieszcantor.errors import DepthZero, EmptyCloud, InvalidOpening, MissingLeafValue, SingularEvaluation
from rieszcantor.geometry import transform_tree
from rieszcantor.measure import PointCloud, assign_measure, discretize
from rieszcantor.riesz import (
    KernelParams,
    kernel_eval,
    leaf_field,
    martingale_decompose,
    max_relative_error,
    natural_scale,
    pairing_sum,
    riesz_energy,
    riesz_field,
    riesz_means,
    suppression_comparison,
)

from conftest import SKEW, grid8, rng, two_leaf_tree

P15 = KernelParams(1.5)


def leaf_oracle(tree, mu, s):
    cloud = discretize(mu)
    return cloud, riesz_direct(cloud.points, cloud.weights, cloud.points, s, cloud.owner, cloud.owner)


def test_kernel_unit_distance():
    np.testing.assert_array_equal(kernel_eval([1.0, 0.0], [0.0, 0.0], P15), [1.0, 0.0])


def test_kernel_suppressed():
    params = KernelParams(1.5, phi=lambda p: np.ones(len(p)))
    val = kernel_eval([1.0, 0.0], [0.0, 0.0], params)
    assert val[0] == pytest.approx(2 ** -1.25, rel=1e-15)
    assert val[0] == pytest.approx(0.42045, abs=5e-6)
    assert val[1] == 0.0


def test_kernel_antisymmetric_bit_exact():
    g = rng(1)
    for _ in range(20):
        x, y = g.normal(size=2), g.normal(size=2)
        assert np.array_equal(kernel_eval(x, y, P15), -kernel_eval(y, x, P15))


def test_kernel_singular():
    with pytest.raises(SingularEvaluation):
        kernel_eval([0.0, 0.0], [0.0, 0.0], P15)


def test_bad_opening():
    with pytest.raises(InvalidOpening):
        KernelParams(1.5, theta_open=1.2)


def test_field_single_point():
    cloud = PointCloud.from_arrays(np.zeros((1, 2)), np.ones(1))
    f = riesz_field(cloud, [[1.0, 0.0]], P15)
    np.testing.assert_allclose(f.values, [[1.0, 0.0]], rtol=1e-15)


def test_field_two_masses():
    cloud = PointCloud.from_arrays(np.array([[0.0, 0.0], [3.0, 0.0]]), np.array([1.0, 2.0]))
    f = riesz_field(cloud, [[1.0, 0.0]], P15)
    assert f.values[0, 0] == pytest.approx(1 - 1 / np.sqrt(2), rel=1e-14)
    assert f.values[0, 0] == pytest.approx(0.29289, abs=5e-6)
    assert f.values[0, 1] == 0.0


def test_field_empty_cloud():
    cloud = PointCloud.from_arrays(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(EmptyCloud):
        riesz_field(cloud, [[1.0, 0.0]], P15)


def test_direct_matches_oracle(grid8_d3):
    tree, mu = grid8_d3
    cloud = discretize(mu, samples_per_cube=2)
    x = rng(2).uniform(-0.6, 0.6, (200, 2))
    got = riesz_field(cloud, x, KernelParams(1.5, mode="direct")).values
    ref = riesz_direct(cloud.points, cloud.weights, x, 1.5)
    assert max_relative_error(got, ref) < 1e-12


def test_treecode_matches_oracle_grid8(grid8_d3):
    tree, mu = grid8_d3
    cloud, ref = leaf_oracle(tree, mu, 1.5)
    f = riesz_field(cloud, None, KernelParams(1.5, mode="treecode", theta_open=0.4, leaf_size=8),
                    eval_owner=cloud.owner)
    assert f.mode == "treecode"
    assert f.stats["far_interactions"] > 0
    assert max_relative_error(f.values, ref) <= 1e-6


def test_treecode_matches_oracle_random(random_tree):
    tree, mu = random_tree
    cloud, ref = leaf_oracle(tree, mu, 1.5)
    f = riesz_field(cloud, None, KernelParams(1.5, mode="treecode", leaf_size=8), eval_owner=cloud.owner)
    assert max_relative_error(f.values, ref) <= 1e-6


def test_treecode_other_dimension():
    from rieszcantor.geometry import CantorSpec, build_cantor

    tree = build_cantor(CantorSpec(3, 2.5, layout="grid8", depth=2))
    mu = assign_measure(tree, SKEW)
    cloud, ref = leaf_oracle(tree, mu, 2.5)
    f = riesz_field(cloud, None, KernelParams(2.5, mode="treecode", leaf_size=4), eval_owner=cloud.owner)
    assert max_relative_error(f.values, ref) <= 1e-6


def test_two_point_energy():
    tree, mu = two_leaf_tree()
    assert riesz_energy(tree, mu, KernelParams(0.5)) == pytest.approx(0.25, rel=1e-14)


def test_energy_single_leaf():
    tree = grid8(0)
    with pytest.raises(DepthZero):
        riesz_energy(tree, assign_measure(tree), P15)


def test_energy_depth4_against_oracle(grid8_d4):
    tree, mu = grid8_d4
    cloud, ref = leaf_oracle(tree, mu, 1.5)
    expected = float(np.sum(cloud.weights * np.einsum("ij,ij->i", ref, ref)))
    got = riesz_energy(tree, mu, KernelParams(1.5, mode="direct"))
    assert got == pytest.approx(expected, rel=1e-10)
    tc = riesz_energy(tree, mu, KernelParams(1.5, mode="treecode"))
    assert tc == pytest.approx(expected, rel=1e-6)


def test_energy_quadrature_order(grid8_d3):
    tree, mu = grid8_d3
    e1 = riesz_energy(tree, mu, P15)
    e4 = riesz_energy(tree, mu, P15, quadrature_order=4)
    assert e4 > 0 and abs(e4 - e1) / e1 < 0.5


def test_root_mean_vanishes(skew_d4):
    tree, mu = skew_d4
    means = riesz_means(tree, mu, P15)
    scale = natural_scale(discretize(mu), 1.5)
    assert np.linalg.norm(means[0]) <= 1e-10 * scale


def test_pairing_sum_vanishes(grid8_d3):
    _, mu = grid8_d3
    cloud = discretize(mu)
    assert np.linalg.norm(pairing_sum(cloud, 1.5)) <= 1e-10 * natural_scale(cloud, 1.5)


def test_two_leaf_mean():
    tree, mu = two_leaf_tree()
    means = riesz_means(tree, mu, KernelParams(0.5))
    a, b = int(tree.leaves[0]), int(tree.leaves[1])
    expected = kernel_eval(tree.center[a], tree.center[b], KernelParams(0.5)) * mu.mass[b]
    np.testing.assert_allclose(means[a], expected, rtol=1e-15)


def test_means_scale_under_dilation(skew_d4):
    tree, mu = skew_d4
    big = transform_tree(tree, 3.7, (1.0, -2.0))
    m1 = riesz_means(tree, mu, P15)
    m2 = riesz_means(big, mu.on(big), P15)
    nz = np.linalg.norm(m1, axis=1) > 1e-8 * np.abs(m1).max()
    np.testing.assert_allclose(m2[nz], m1[nz] * 3.7 ** -1.5, rtol=1e-10)


def test_martingale_constant():
    tree = grid8(3)
    mu = assign_measure(tree, SKEW)
    md = martingale_decompose(tree, mu, np.full(len(tree.leaves), 2.5))
    assert np.all(np.abs(md.block_norms) < 1e-28)
    assert md.norm_sq == pytest.approx(6.25, rel=1e-14)
    assert md.mean_term == pytest.approx(6.25, rel=1e-14)


def test_martingale_indicator():
    tree = grid8(1)
    mu = assign_measure(tree)
    f = np.zeros(8)
    f[0] = 1.0
    md = martingale_decompose(tree, mu, f)
    assert md.block_norms[0] == pytest.approx(7 / 64, rel=1e-14)
    assert md.mean_term == pytest.approx(1 / 64, rel=1e-14)
    assert md.norm_sq == pytest.approx(1 / 8, rel=1e-14)


def test_martingale_mapping_input():
    tree = grid8(1)
    mu = assign_measure(tree)
    vals = {tree.cube_id(int(q)): float(k) for k, q in enumerate(tree.leaves)}
    md = martingale_decompose(tree, mu, vals)
    assert md.pythagoras_gap() < 1e-14
    del vals[tree.cube_id(int(tree.leaves[0]))]
    with pytest.raises(MissingLeafValue):
        martingale_decompose(tree, mu, vals)


def test_martingale_pythagoras_riesz(skew_d4):
    tree, mu = skew_d4
    lf = leaf_field(tree, mu, P15)
    md = martingale_decompose(tree, mu, lf.per_leaf(tree))
    energy = riesz_energy(tree, mu, P15, field_=lf)
    assert md.norm_sq == pytest.approx(energy, rel=1e-12)
    assert md.pythagoras_gap() <= 1e-10 * energy


def test_suppression_comparison_bounded(grid8_d3):
    tree, mu = grid8_d3
    cloud = discretize(mu)
    phi = tree.side[cloud.owner]
    out = suppression_comparison(cloud, phi, 1.5)
    assert np.all(np.isfinite(out["difference"]))
    assert 0 < out["constant"] < 100
