"""Stopping rules, simple and maximal tree types, tractability and statistics."""

from __future__ import annotations

import json

import numpy as np
import pytest

from rieszcantor.corona import (
    CoronaParams,
    build_maximal_trees,
    check_corona_invariants,
    check_tractable,
    classify_simple_tree,
    corona_decompose,
    dump_decomposition,
    lemma_qp_ratios,
    tree_statistics,
)
from rieszcantor.errors import NotARoot
from rieszcantor.measure import DyadicMeasure, assign_measure

from conftest import SKEW, grid8


def first_split(depth, weights):
    """grid8 with unit root side: the root splits by ``weights``, every later split is uniform."""
    tree = grid8(depth, length_convention="side")
    mass = np.empty(tree.n_cubes)
    mass[0] = 1.0
    mass[1:9] = weights
    for g in range(2, depth + 1):
        sl = tree.generation_slice(g)
        mass[sl] = mass[tree.parent[sl]] / 8
    return tree, DyadicMeasure(tree, mass)


def zero_means(tree):
    return np.zeros((tree.n_cubes, tree.dimension))


def asserted_ok(decomp):
    inv = check_corona_invariants(decomp)
    return {k: v["ok"] for k, v in inv.items() if v["asserted"]}


def test_params_validation():
    with pytest.raises(ValueError):
        CoronaParams(B=3)
    with pytest.raises(ValueError):
        CoronaParams(delta0=0.0)
    with pytest.raises(ValueError):
        CoronaParams(A=1.0)
    p = CoronaParams(B=8, C_M=5)
    assert p.M == 40 and p.delta_W_prime == p.delta_W
    assert set(p.regime()) >= {"A_above_10", "c_db_above_10"}


def test_depth_zero():
    tree = grid8(0)
    dec = corona_decompose(tree, assign_measure(tree))
    assert dec.top == [0]
    assert dec.tree_cubes(0).tolist() == [0]
    assert dec.stop(0) == []


def test_uniform_single_tree(grid8_d4):
    tree, mu = grid8_d4
    dec = corona_decompose(tree, mu, CoronaParams(B=4, delta0=0.01))
    assert dec.top == [0]
    assert len(dec.tree_cubes(0)) == tree.n_cubes
    assert dec.stop(0) == []
    assert classify_simple_tree(dec, 0) == "Dsigma"
    assert all(asserted_ok(dec).values())


def test_skew_heavy_child_is_high_density():
    tree = grid8(4, length_convention="side")
    mu = assign_measure(tree, SKEW)
    dec = corona_decompose(tree, mu, CoronaParams(B=4))
    assert mu.theta[1] == pytest.approx(7.2, rel=1e-12)
    assert (mu.theta_d[0], mu.theta_d[1]) == (1.0, 4.0)
    assert 1 in dec.stop0(0, "HD")
    assert 1 in dec.stop(0, "HD")
    rec = dec.root_data(0).stop0[1]
    assert rec[0] == "HD" and rec[1]["theta_d_ratio"] == 4.0
    assert all(asserted_ok(dec).values())


def test_not_a_root(grid8_d3):
    tree, mu = grid8_d3
    dec = corona_decompose(tree, mu)
    with pytest.raises(NotARoot):
        dec.root_data(3)


def test_low_density_rule():
    weights = np.array([1e-4] + [(1 - 1e-4) / 7] * 7)
    tree, mu = first_split(1, weights)
    dec = corona_decompose(tree, mu, CoronaParams(delta0=1e-3), riesz=zero_means(tree))
    assert dec.stop0(0) == [1]
    assert dec.stop0(0, "LD") == [1]


def test_big_jump_rule_and_w_type():
    weights = np.array([0.2] + [0.8 / 7] * 7)
    tree, mu = first_split(1, weights)
    means = zero_means(tree)
    means[1] = (1e3, 0.0)
    dec = corona_decompose(tree, mu, CoronaParams(delta_W=0.1), riesz=means)
    assert dec.stop(0, "BR") == [1]
    assert classify_simple_tree(dec, 0) == "W"
    forest = build_maximal_trees(dec)
    assert forest[0].kind == "W" and forest[0].is_initial
    assert all(asserted_ok(dec).values())


def test_same_sigma_type():
    # a child of mass 1/4 and side 1/4 has density 2 and sigma 1 = sigma(root)
    weights = np.array([0.25] + [0.75 / 7] * 7)
    tree, mu = first_split(1, weights)
    dec = corona_decompose(tree, mu, CoronaParams(B=2, A=10), riesz=zero_means(tree))
    assert dec.stop(0, "HD") == [1]
    assert mu.theta[1] ** 2 * mu.mass[1] == pytest.approx(1.0, rel=1e-14)
    assert classify_simple_tree(dec, 0) == "Ssigma"


def test_empty_stop_is_decreasing_and_mdec(grid8_d3):
    tree, mu = grid8_d3
    dec = corona_decompose(tree, mu)
    forest = build_maximal_trees(dec)
    assert [m.kind for m in forest] == ["MDec"]
    assert forest[0].simple_roots == [0]


def test_mdec_absorbs_decreasing_descendants():
    # the heavy child is high density but its own tree is decreasing
    weights = np.array([0.9] + [0.1 / 7] * 7)
    tree, mu = first_split(3, weights)
    dec = corona_decompose(tree, mu, CoronaParams(B=4, A=1.5), riesz=zero_means(tree))
    kinds = {r: classify_simple_tree(dec, r) for r in dec.top}
    forest = build_maximal_trees(dec)
    for mt in forest:
        if mt.kind == "MDec":
            assert all(kinds[r] == "Dsigma" for r in mt.simple_roots)
            assert all(kinds[P] != "Dsigma" for P in mt.stop)


def test_increasing_tree_of_order_two():
    weights = np.array([0.9] + [0.1 / 7] * 7)
    tree, mu = first_split(2, weights)
    dec = corona_decompose(tree, mu, CoronaParams(B=4), riesz=zero_means(tree))
    assert dec.stop(0) == [1]
    assert dec.stop(1) == []
    assert classify_simple_tree(dec, 0) == "Isigma"
    forest = build_maximal_trees(dec)
    assert forest[0].kind == "TInc" and forest[0].order == 2
    assert forest[0].simple_roots == [0, 1]


def test_large_wonderful_tree_of_order_two():
    weights = np.array([0.9] + [0.1 / 7] * 7)
    tree, mu = first_split(2, weights)
    means = zero_means(tree)
    g = int(tree.children(1)[0])
    means[g] = (1e4, 0.0)
    dec = corona_decompose(tree, mu, CoronaParams(B=4), riesz=means)
    assert dec.stop(1, "BR") == [g]
    assert classify_simple_tree(dec, 0) == "Isigma"
    forest = build_maximal_trees(dec)
    assert forest[0].kind == "LW" and forest[0].order == 2
    assert forest[0].history[-1]["mu_br"] > dec.params.delta_W_prime * mu.mass[1]


def test_tractable_empty_hd_false(grid8_d3):
    tree, mu = grid8_d3
    res = check_tractable(corona_decompose(tree, mu), 0)
    assert not res.ok
    assert "hd1_lower" in res.failed()


def test_tractable_true_with_witnesses():
    weights = np.array([0.9] + [0.1 / 7] * 7)
    tree, mu = first_split(2, weights)
    res = check_tractable(corona_decompose(tree, mu, riesz=zero_means(tree)), 0)
    assert res.ok
    assert res.conditions["hd1_lower"]["rhs"] == pytest.approx(7.2 ** 2 * 0.9, rel=1e-12)
    assert set(res.conditions) == {"hd1_lower", "stop2_upper", "br1", "br2"}


def test_tractable_fails_on_big_jump_mass():
    # sigma of the jump child equals twice delta_W sigma(root)
    delta_w = 0.1
    m = (2 * delta_w / 64) ** (1 / 3)
    weights = np.array([0.5, m] + [(0.5 - m) / 6] * 6)
    tree, mu = first_split(1, weights)
    means = zero_means(tree)
    means[2] = (1e3, 0.0)
    dec = corona_decompose(tree, mu, CoronaParams(B=4, delta_W=delta_w), riesz=means)
    assert dec.stop(0, "HD") == [1] and dec.stop(0, "BR") == [2]
    res = check_tractable(dec, 0)
    assert res.failed() == ["br1"]
    assert res.conditions["br1"]["lhs"] == pytest.approx(2 * res.conditions["br1"]["rhs"], rel=1e-12)


@pytest.mark.parametrize("depth", [0, 2, 4])
def test_statistics_uniform(depth):
    tree = grid8(depth, length_convention="side")
    mu = assign_measure(tree)
    stats = tree_statistics(corona_decompose(tree, mu))
    assert stats["n_trees"] == 1
    assert stats["trees"][0]["mass_sum"] == pytest.approx(depth + 1, rel=1e-12)
    assert stats["max_packing"] == pytest.approx(depth + 1, rel=1e-12)
    assert stats["max_sigma_ratio"] == pytest.approx(depth + 1, rel=1e-12)


def test_invariants_random(random_tree):
    tree, mu = random_tree
    dec = corona_decompose(tree, mu, CoronaParams(M=2.0))
    assert all(asserted_ok(dec).values())
    assert dec.tree_of.min() >= 0


def test_invariants_skew_small_m(skew_d4):
    tree, mu = skew_d4
    dec = corona_decompose(tree, mu, CoronaParams(M=1.0, B=2))
    inv = check_corona_invariants(dec)
    assert all(v["ok"] for v in inv.values() if v["asserted"])


def test_qp_rows(random_tree):
    tree, mu = random_tree
    rows = lemma_qp_ratios(corona_decompose(tree, mu))
    assert rows
    for row in rows:
        assert row["size"] > 0
        assert 0 < row["r=1.5"] < np.inf and 0 < row["r=2"] < np.inf


def test_dump_json(skew_d4, tmp_path):
    tree, mu = skew_d4
    dec = corona_decompose(tree, mu)
    forest = build_maximal_trees(dec)
    path = tmp_path / "corona.json"
    text = dump_decomposition(dec, forest, path)
    data = json.loads(path.read_text())
    assert text == path.read_text()
    assert data["top"][0] == tree.label(0)
    assert len(data["trees"]) == len(dec.top)
    assert sum(len(t["cubes"]) for t in data["trees"]) == tree.n_cubes
    assert data["maximal_trees"][0]["initial"] is True


def test_leaves_left_in_tree_when_not_stopping(skew_d4):
    tree, mu = skew_d4
    dec = corona_decompose(tree, mu, CoronaParams(stop_at_leaves=False))
    assert all(dec.in_tree0[tree.leaves] | (dec.tree_of[tree.leaves] >= 0))
    assert any(dec.roots[r].truncated for r in dec.top)
