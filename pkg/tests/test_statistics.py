import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ising_gof import Configuration, LatticeShape
from ising_gof.statistics import (
    ADJACENT,
    CONSECUTIVE,
    DIAGONAL,
    Motif,
    StatDescriptor,
    SubtableScheme,
    Tracking,
    count_motif,
    default_descriptors,
    evaluate,
    format_motifs,
    non_homogeneity,
    parse_motifs,
    sample_disjoint_pairs,
    subtable_values,
)

DOMINO = Motif(["11"], "rotations", "domino")


def brute_count(grid, motif):
    """Slide every distinct variant over the grid cell by cell."""
    grid = np.atleast_2d(grid)
    variants = {}
    base = motif.array
    cands = [base]
    if motif.symmetry_closure != "none":
        cands += [np.rot90(base, k) for k in (1, 2, 3)]
    if motif.symmetry_closure == "rotations_and_reflections":
        cands += [np.rot90(base[::-1], k) for k in range(4)]
    for c in cands:
        variants[(c.shape, c.tobytes())] = c
    total = 0
    for v in variants.values():
        h, w = v.shape
        for r in range(grid.shape[0] - h + 1):
            for c in range(grid.shape[1] - w + 1):
                patch = grid[r:r + h, c:c + w]
                total += all(v[i, j] < 0 or v[i, j] == patch[i, j] for i in range(h) for j in range(w))
    return total


def brute_window(grid, r, c, n):
    w = np.asarray(grid[r:r + n, c:c + n], dtype=int)
    edges = np.abs(np.diff(w, axis=0)).sum() + np.abs(np.diff(w, axis=1)).sum()
    return int(w.sum()), int(edges)


small_grids = arrays(np.uint8, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=st.integers(0, 1))


def test_domino_on_figure1(figure1):
    assert count_motif(figure1, DOMINO) == 3


def test_motif_on_empty_grid():
    empty = Configuration.empty(LatticeShape((6, 6)))
    for m in (DOMINO, CONSECUTIVE, ADJACENT, DIAGONAL):
        assert count_motif(empty, m) == 0


def test_isolated_domino_exact_match():
    assert count_motif(np.array([0, 1, 1, 0], dtype=np.uint8), CONSECUTIVE) == 1
    assert count_motif(np.array([[0, 1, 1, 1, 0]], dtype=np.uint8), CONSECUTIVE) == 0


def test_default_motifs_distinct_on_figure1(figure1):
    values = {m.name: count_motif(figure1, m) for m in (CONSECUTIVE, ADJACENT, DIAGONAL)}
    for m in (CONSECUTIVE, ADJACENT, DIAGONAL):
        assert values[m.name] == brute_count(figure1.grid, m)


@settings(max_examples=60)
@given(small_grids, st.sampled_from([DOMINO, CONSECUTIVE, ADJACENT, DIAGONAL,
                                     Motif(["1.", "11"], "rotations_and_reflections", "corner"),
                                     Motif(["10", "0."], "none")]))
def test_count_matches_brute_force(grid, motif):
    assert count_motif(grid, motif) == brute_count(grid, motif)


@settings(max_examples=40)
@given(small_grids)
def test_counts_invariant_under_rotation(grid):
    for m in (CONSECUTIVE, ADJACENT, DIAGONAL):
        assert count_motif(grid, m) == count_motif(np.ascontiguousarray(np.rot90(grid)), m)
    corner = Motif(["1.", "11"], "rotations_and_reflections")
    assert count_motif(grid, corner) == count_motif(np.ascontiguousarray(grid.T), corner)


def test_variants_are_deduplicated():
    assert len(Motif(["11"]).variants()) == 2
    assert len(Motif(["1"]).variants()) == 1
    assert len(DIAGONAL.variants()) == 2
    assert len(ADJACENT.variants()) == 4
    assert len(Motif(["1.", "11"], "rotations_and_reflections").variants()) == 4


def test_motif_validation():
    with pytest.raises(ValueError):
        Motif(["1" * 5])
    with pytest.raises(ValueError):
        Motif(["..", ".."])
    with pytest.raises(ValueError):
        Motif(["12"])
    with pytest.raises(ValueError):
        Motif(["11"], "mirror")
    assert Motif([[1, -1], [0, 1]]).rows() == ["1.", "01"]


MOTIF_FILE = """\
# two custom motifs
cross rotations
.1.
111
.1.

corner rotations_and_reflections
1.
11
"""


def test_parse_and_format_motifs():
    motifs = parse_motifs(MOTIF_FILE)
    assert [m.name for m in motifs] == ["cross", "corner"]
    assert motifs[1].symmetry_closure == "rotations_and_reflections"
    assert parse_motifs(format_motifs(motifs)) == motifs
    assert parse_motifs("pair\n11\n")[0].symmetry_closure == "rotations"


@pytest.mark.parametrize("text, line", [
    ("a b c\n11\n", 1),
    ("ok\n11\n\nlonely\n", 4),
    ("ok\n11\n\nbad\n1x\n", 4),
])
def test_motif_file_errors_carry_line(text, line):
    with pytest.raises(ValueError, match=f"line {line}"):
        parse_motifs(text)


def test_pairs_do_not_fit():
    with pytest.raises(ValueError):
        sample_disjoint_pairs(LatticeShape((5, 5)), SubtableScheme(K=1, N=5))
    with pytest.raises(ValueError):
        sample_disjoint_pairs(LatticeShape((5, 5)), SubtableScheme(K=1, N=3))
    with pytest.raises(ValueError):
        SubtableScheme(K=0)
    with pytest.raises(ValueError):
        SubtableScheme(N=1)


@pytest.mark.parametrize("dims, K, N", [((10, 10), 100, 3), ((800, 800), 500, 50), ((3, 8), 20, 3)])
def test_pairs_are_disjoint_and_inside(dims, K, N):
    pairs = sample_disjoint_pairs(LatticeShape(dims), SubtableScheme(K, N, seed=1))
    assert pairs.shape == (K, 2, 2)
    assert (pairs >= 0).all()
    assert (pairs[:, :, 0] <= dims[0] - N).all() and (pairs[:, :, 1] <= dims[1] - N).all()
    gap = np.abs(pairs[:, 0] - pairs[:, 1])
    assert (gap.max(axis=1) >= N).all()


def test_pairs_prefix_stable_and_seeded():
    shape = LatticeShape((12, 12))
    small = sample_disjoint_pairs(shape, SubtableScheme(10, 3, seed=4))
    big = sample_disjoint_pairs(shape, SubtableScheme(40, 3, seed=4))
    assert (big[:10] == small).all()
    other = sample_disjoint_pairs(shape, SubtableScheme(10, 3, seed=5))
    assert not (other == small).all()


@settings(max_examples=30)
@given(arrays(np.uint8, (9, 11), elements=st.integers(0, 1)), st.integers(2, 4))
def test_window_values_match_brute_force(grid, n):
    corners = sample_disjoint_pairs(LatticeShape(grid.shape), SubtableScheme(8, n, seed=3))
    wa, wb = subtable_values(grid, corners, n)
    flat = corners.reshape(-1, 2)
    for k, (r, c) in enumerate(flat):
        assert (wa[k], wb[k]) == brute_window(grid, r, c, n)


def test_non_homogeneity_on_constant_grid():
    scheme = SubtableScheme(50, 3)
    for kind in ("dT1", "dT2", "dT12"):
        assert non_homogeneity(np.zeros((10, 10), np.uint8), scheme, kind) == 0.0
        assert non_homogeneity(np.ones((10, 10), np.uint8), scheme, kind) == 0.0
    with pytest.raises(ValueError):
        non_homogeneity(np.zeros((10, 10), np.uint8), scheme, "dT3")


def test_single_block_non_homogeneity():
    n = 3
    grid = np.zeros((10, 10), np.uint8)
    grid[4:7, 4:7] = 1
    scheme = SubtableScheme(K=2000, N=n, seed=0)
    assert non_homogeneity(grid, scheme, "dT1") == n * n
    assert non_homogeneity(grid, scheme, "dT12") == 1.0
    # reference: maximise over the same pairs by brute force
    pairs = sample_disjoint_pairs(LatticeShape(grid.shape), scheme)
    db = max(abs(brute_window(grid, *p[0], n)[1] - brute_window(grid, *p[1], n)[1]) for p in pairs)
    assert non_homogeneity(grid, scheme, "dT2") == db


@settings(max_examples=200)
@given(arrays(np.uint8, (8, 8), elements=st.integers(0, 1)))
def test_non_homogeneity_bounds(grid):
    scheme = SubtableScheme(K=20, N=3, seed=1)
    assert 0.0 <= non_homogeneity(grid, scheme, "dT12") <= 1.0
    assert non_homogeneity(grid, scheme, "dT1") <= 9
    assert non_homogeneity(grid, scheme, "dT2") <= 12


def test_more_pairs_never_decrease():
    rng = np.random.default_rng(0)
    grid = (rng.random((15, 15)) < 0.3).astype(np.uint8)
    for kind in ("dT1", "dT2"):
        values = [non_homogeneity(grid, SubtableScheme(K, 3, seed=2), kind) for K in (1, 5, 20, 80)]
        assert values == sorted(values)


def test_evaluate_dispatch(figure1):
    consecutive = StatDescriptor("motif_count", CONSECUTIVE)
    assert evaluate(figure1, consecutive) == float(count_motif(figure1, CONSECUTIVE))
    zero = np.zeros((10, 10), np.uint8)
    assert evaluate(zero, StatDescriptor("dT12", scheme=SubtableScheme())) == 0.0


def test_evaluate_is_deterministic():
    rng = np.random.default_rng(1)
    grid = (rng.random((10, 10)) < 0.5).astype(np.uint8)
    fixed = StatDescriptor("dT2", scheme=SubtableScheme(20, 3, seed=8))
    assert evaluate(grid, fixed) == evaluate(grid, fixed)
    fresh = StatDescriptor("dT2", scheme=SubtableScheme(3, 3, seed=8, resample=True))
    assert evaluate(grid, fresh, (0, 5)) == evaluate(grid, fresh, (0, 5))
    values = {evaluate(grid, fresh, (0, k)) for k in range(30)}
    assert len(values) > 1


def test_descriptor_validation_and_round_trip():
    with pytest.raises(ValueError):
        StatDescriptor("dT1")
    with pytest.raises(ValueError):
        StatDescriptor("motif_count")
    with pytest.raises(ValueError):
        StatDescriptor("motif_count", DOMINO, scheme=SubtableScheme())
    with pytest.raises(ValueError):
        StatDescriptor("dT1", scheme=SubtableScheme(), sided="both")
    for d in default_descriptors(SubtableScheme(7, 2, seed=3)):
        back = StatDescriptor.from_dict(d.to_dict())
        assert back.to_dict() == d.to_dict()
        assert (back.kind, back.motif, back.scheme, back.sided) == (d.kind, d.motif, d.scheme, d.sided)
    dt12 = default_descriptors(SubtableScheme())[-1]
    assert "dT12_reading" in dt12.to_dict()


def test_default_descriptors_sidedness():
    descs = default_descriptors(SubtableScheme())
    assert [d.label for d in descs] == ["diagonal_pairs", "adjacent_pairs", "consecutive_pairs",
                                       "dT1", "dT2", "dT12"]
    assert [d.sided for d in descs] == ["upper", "two_sided", "two_sided", "upper", "upper", "upper"]
    assert len(default_descriptors()) == 3


def test_tracking_values_and_restrictions():
    shape = LatticeShape((9, 9))
    descs = default_descriptors(SubtableScheme(15, 3, seed=6)) + [StatDescriptor("motif_count", DOMINO)]
    tracking = Tracking(descs, shape)
    rng = np.random.default_rng(3)
    for _ in range(5):
        grid = (rng.random(shape.dims) < 0.4).astype(np.uint8)
        assert tracking.values(grid).tolist() == [evaluate(grid, d) for d in descs]
    with pytest.raises(ValueError, match="resampling"):
        Tracking([StatDescriptor("dT1", scheme=SubtableScheme(resample=True))], shape)
