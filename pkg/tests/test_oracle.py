import itertools

import numpy as np
import pytest

from ising_gof import Configuration, FiberId, LatticeShape
from ising_gof.oracle import (
    BudgetExceededError,
    degree1_move_count,
    enumerate_fiber,
    exact_fiber_distribution,
    fiber_component_count,
    fiber_sizes,
    swap_graph_components,
)


def brute_fibers(shape):
    """Every 0/1 state of a tiny lattice, grouped by (t1, t2)."""
    out = {}
    for bits in itertools.product((0, 1), repeat=shape.n_sites):
        c = Configuration(shape, np.array(bits, dtype=np.uint8))
        out.setdefault((c.t1, c.t2), []).append(c)
    return out


def test_one_by_three_single_one():
    configs = enumerate_fiber(LatticeShape((3,)), FiberId(1, 1))
    assert [c.cells.tolist() for c in configs] == [[1, 0, 0], [0, 0, 1]]


def test_empty_fiber_has_one_state():
    for dims in [(3,), (2, 3), (4, 4)]:
        configs = enumerate_fiber(LatticeShape(dims), FiberId(0, 0))
        assert len(configs) == 1 and configs[0].t1 == 0


def test_fibers_partition_all_states():
    shape = LatticeShape((3, 3))
    total = sum(sum(fiber_sizes(shape, a).values()) for a in range(10))
    assert total == 512


@pytest.mark.parametrize("dims, boundary", [((3, 3), "free"), ((2, 4), "free"), ((4, 4), "zero_clamped")])
def test_enumeration_matches_brute_force(dims, boundary):
    shape = LatticeShape(dims, boundary)
    if boundary == "zero_clamped":
        # brute force over interior sites only
        expected = {}
        for a in range(shape.admissible.size + 1):
            for sites in itertools.combinations(shape.admissible.tolist(), a):
                c = Configuration.from_sites(shape, sites)
                expected.setdefault((c.t1, c.t2), []).append(c)
    else:
        expected = brute_fibers(shape)
    for (a, b), configs in expected.items():
        got = enumerate_fiber(shape, FiberId(a, b))
        assert sorted(c.cells.tobytes() for c in got) == sorted(c.cells.tobytes() for c in configs)


def test_fiber_sizes_symmetric_under_square_group():
    shape = LatticeShape((4, 4))
    for a in range(1, 6):
        for b, size in fiber_sizes(shape, a).items():
            states = enumerate_fiber(shape, FiberId(a, b))
            assert len(states) == size
            keys = {c.cells.tobytes() for c in states}
            for c in states[:20]:
                g = c.grid
                for img in (np.rot90(g), g.T, g[::-1], np.rot90(g, 2)):
                    assert np.ascontiguousarray(img).reshape(-1).tobytes() in keys


def test_budget_exceeded():
    with pytest.raises(BudgetExceededError, match="budget"):
        enumerate_fiber(LatticeShape((6, 6)), FiberId(10, 20), budget=1000)
    with pytest.raises(BudgetExceededError):
        degree1_move_count(LatticeShape((5, 5)))


@pytest.mark.parametrize("dims, expected", [((3, 3), 466), ((1,), 0), ((1, 2), 1), ((2,), 1)])
def test_degree1_move_count(dims, expected):
    assert degree1_move_count(LatticeShape(dims)) == expected


def test_degree1_count_against_brute_force():
    shape = LatticeShape((2, 3))
    expected = sum(len(v) - 1 for v in brute_fibers(shape).values())
    assert degree1_move_count(shape) == expected


def test_figure2_components(figure2_pair):
    left, right = figure2_pair
    states = enumerate_fiber(left.shape, FiberId(4, 8))
    idx = {c.cells.tobytes(): k for k, c in enumerate(states)}
    i, j = idx[left.cells.tobytes()], idx[right.cells.tobytes()]

    strict = swap_graph_components(states, 0)
    where = {k: g for g, comp in enumerate(strict) for k in comp}
    assert where[i] != where[j]
    # each interior block is isolated: every swap raises T2
    assert [i] in strict and [j] in strict

    expanded = swap_graph_components(states, 2)
    assert len(expanded) == 1


def test_swap_graph_components_reference_bfs():
    # independent breadth-first search over the slice T1 = a, band |t2 - b| <= e
    shape = LatticeShape((3, 4))
    a, b = 3, 6
    states = enumerate_fiber(shape, FiberId(a, b))
    for e in (0, 2):
        comps = swap_graph_components(states, e)
        label = {}
        for start in range(len(states)):
            key0 = tuple(np.flatnonzero(states[start].cells))
            if key0 in label:
                continue
            label[key0] = start
            frontier = [key0]
            while frontier:
                nxt = []
                for key in frontier:
                    ones = set(key)
                    for j in ones:
                        for i in range(shape.n_sites):
                            if i in ones:
                                continue
                            new = tuple(sorted(ones - {j} | {i}))
                            if new in label:
                                continue
                            c = Configuration.from_sites(shape, new)
                            if abs(c.t2 - b) <= e:
                                label[new] = start
                                nxt.append(new)
                frontier = nxt
        ref = {}
        for k, c in enumerate(states):
            ref.setdefault(label[tuple(np.flatnonzero(c.cells))], []).append(k)
        assert sorted(ref.values()) == comps


def test_unbounded_band_gives_one_component_per_slice():
    shape = LatticeShape((3, 3))
    for a in range(1, 8):
        for b in fiber_sizes(shape, a):
            assert fiber_component_count(shape, FiberId(a, b), expansion=100) == 1


def test_one_dimensional_strict_irreducibility():
    shape = LatticeShape((15,), "zero_clamped")
    for a in range(1, 7):
        for b in fiber_sizes(shape, a):
            assert fiber_component_count(shape, FiberId(a, b), 0) == 1, (a, b)


def test_components_reject_mixed_fibers():
    shape = LatticeShape((3, 3))
    x = Configuration.from_sites(shape, [0])
    y = Configuration.from_sites(shape, [4])
    with pytest.raises(ValueError):
        swap_graph_components([x, y], 0)
    assert swap_graph_components([], 0) == []


def test_chi_square_closed_forms():
    states = enumerate_fiber(LatticeShape((3,)), FiberId(1, 1))
    flat = exact_fiber_distribution(np.array([50, 50]), states)
    assert flat.chi2 == 0.0 and flat.pvalue == pytest.approx(1.0)
    skew = exact_fiber_distribution(np.array([100, 0]), states)
    assert skew.chi2 == pytest.approx(100.0)
    assert skew.dof == 1


def test_chi_square_from_recorded_states():
    states = enumerate_fiber(LatticeShape((3,)), FiberId(1, 1))
    rows = np.array([states[0].cells] * 30 + [states[1].cells] * 10)
    res = exact_fiber_distribution(rows, states)
    assert res.counts.tolist() == [30, 10]
    assert res.chi2 == pytest.approx(10.0)
    with pytest.raises(ValueError, match="not in the fiber"):
        exact_fiber_distribution(np.array([[0, 1, 0]], dtype=np.uint8), states)


def test_undersampling_flag():
    states = enumerate_fiber(LatticeShape((4, 4)), FiberId(2, 8))
    with pytest.warns(RuntimeWarning, match="unreliable"):
        res = exact_fiber_distribution(np.ones(len(states), dtype=np.int64), states)
    assert res.undersampled
