import numpy as np
import pytest

from rieszcantor.geometry import CantorSpec, build_cantor
from rieszcantor.measure import MassRule, assign_measure

SKEW = MassRule(kind="weighted", weights=(0.9,) + (0.1 / 7,) * 7)


def grid8(depth, **kw):
    return build_cantor(CantorSpec(2, 1.5, depth=depth, **kw))


@pytest.fixture(scope="session")
def grid8_d3():
    tree = grid8(3)
    return tree, assign_measure(tree)


@pytest.fixture(scope="session")
def grid8_d4():
    tree = grid8(4)
    return tree, assign_measure(tree)


@pytest.fixture(scope="session")
def skew_d4():
    tree = grid8(4)
    return tree, assign_measure(tree, SKEW)


@pytest.fixture(scope="session")
def random_tree():
    spec = CantorSpec(2, 1.5, layout="random5", ratio=None, ratio_bounds=(0.125, 0.2), depth=4, seed=3)
    tree = build_cantor(spec)
    return tree, assign_measure(tree, MassRule(kind="random", seed=3, concentration=2.0))


def rng(seed=0):
    return np.random.default_rng(seed)


def two_leaf_tree():
    """Two leaves of mass 1/2 whose centroids sit one unit apart on the line."""
    spec = CantorSpec(1, 0.5, layout=((-1 / 3,), (1 / 3,)), ratio=1 / 3, depth=1, root_side=1.5)
    tree = build_cantor(spec)
    return tree, assign_measure(tree)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
