"""Exhaustive ground truth for small lattices.

Fibers are enumerated as subsets of the admissible sites, so the cost is
``C(n_admissible, a)`` rather than ``2 ** n_sites``.  Subsets are encoded as
64-bit masks over admissible-site positions, which caps the admissible site
count at 64.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy import stats

from . import _kernels
from .lattice import Configuration, FiberId, LatticeShape

ENUMERATION_BUDGET = 10_000_000


class BudgetExceededError(RuntimeError):
    pass


def _check_budget(shape: LatticeShape, a: int, budget: int) -> int:
    n = shape.admissible.size
    if n > 64:
        raise BudgetExceededError(f"{n} admissible sites; enumeration supports at most 64")
    if not 0 <= a <= n:
        return 0
    total = comb(n, a)
    if total > budget:
        raise BudgetExceededError(
            f"C({n}, {a}) = {total:,} subsets exceeds the budget of {budget:,}; use a smaller lattice or fewer ones"
        )
    return total


@dataclass(frozen=True)
class SliceTable:
    """All configurations with ``T1 = a`` on a lattice, sorted by mask."""

    shape: LatticeShape
    a: int
    masks: np.ndarray
    t2: np.ndarray

    def configuration(self, k: int) -> Configuration:
        return Configuration(self.shape, self.cells(self.masks[k:k + 1])[0])

    def cells(self, masks: np.ndarray) -> np.ndarray:
        n = self.shape.admissible.size
        bits = (masks[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
        out = np.zeros((masks.size, self.shape.n_sites), dtype=np.uint8)
        out[:, self.shape.admissible] = bits.astype(np.uint8)
        return out

    def mask_of(self, config: Configuration) -> int:
        bits = config.cells[self.shape.admissible].astype(np.uint64)
        return int((bits << np.arange(bits.size, dtype=np.uint64)).sum())


@lru_cache(maxsize=32)
def slice_table(shape: LatticeShape, a: int, budget: int = ENUMERATION_BUDGET) -> SliceTable:
    total = _check_budget(shape, a, budget)
    if total == 0:
        return SliceTable(shape, a, np.empty(0, np.uint64), np.empty(0, np.int32))
    masks, t2 = _kernels.enumerate_subsets(shape.admissible, shape.neighbors, shape.n_sites, a, total)
    order = np.argsort(masks, kind="stable")
    masks, t2 = masks[order], t2[order]
    masks.flags.writeable = False
    t2.flags.writeable = False
    return SliceTable(shape, a, masks, t2)


def enumerate_fiber(shape: LatticeShape, fiber: FiberId, budget: int = ENUMERATION_BUDGET) -> list[Configuration]:
    """Every configuration in S(a, b).

    Canonical order: lexicographic in the sorted tuple of occupied sites.
    """
    table = slice_table(shape, fiber.a, budget)
    masks = table.masks[table.t2 == fiber.b]
    cells = table.cells(masks)
    configs = [Configuration(shape, row) for row in cells]
    configs.sort(key=lambda c: tuple(np.flatnonzero(c.cells)))
    return configs


def fiber_sizes(shape: LatticeShape, a: int, budget: int = ENUMERATION_BUDGET) -> dict[int, int]:
    """``{b: |S(a, b)|}`` for every non-empty fiber with ``T1 = a``."""
    table = slice_table(shape, a, budget)
    values, counts = np.unique(table.t2, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def fiber_census(shape: LatticeShape, a: int) -> dict[int, tuple[int, int]]:
    """``{b: (|S(a, b)|, max singletons in S(a, b))}`` by streaming all subsets.

    Nothing is stored per subset, so this runs past the enumeration budget.
    """
    if shape.admissible.size > 64:
        raise BudgetExceededError("census supports at most 64 admissible sites")
    max_t2 = 2 * shape.ndim * a
    counts, best = _kernels.subset_census(shape.admissible, shape.neighbors, shape.n_sites, a, max_t2)
    return {int(b): (int(counts[b]), int(best[b])) for b in np.flatnonzero(counts)}


def swap_graph_components(fiber_states: list[Configuration], expansion: int,
                          budget: int = ENUMERATION_BUDGET) -> list[list[int]]:
    """Partition ``fiber_states`` by simple-swap connectivity.

    Two states are joined when a path of simple swaps links them with every
    intermediate state inside ``|T2 - b| <= expansion``.  The states must share
    one lattice shape and one ``(T1, T2)``.  Returns lists of indices into
    ``fiber_states``, each sorted, ordered by their smallest index.
    """
    if not fiber_states:
        return []
    first = fiber_states[0]
    shape, a, b = first.shape, first.t1, first.t2
    for c in fiber_states:
        if c.shape != shape or c.t1 != a or c.t2 != b:
            raise ValueError("all fiber states must share the lattice and the sufficient statistics")
    table = slice_table(shape, a, budget)
    labels = _kernels.swap_components(table.masks, table.t2, shape.admissible.size,
                                      b - expansion, b + expansion)
    keys = np.array([table.mask_of(c) for c in fiber_states], dtype=np.uint64)
    where = np.searchsorted(table.masks, keys)
    groups: dict[int, list[int]] = {}
    for idx, w in enumerate(where):
        groups.setdefault(int(labels[w]), []).append(idx)
    return sorted(groups.values(), key=lambda g: g[0])


def fiber_component_count(shape: LatticeShape, fiber: FiberId, expansion: int,
                          budget: int = ENUMERATION_BUDGET) -> int:
    """Number of swap-connected pieces of S(a, b) without materialising configurations."""
    table = slice_table(shape, fiber.a, budget)
    members = np.flatnonzero(table.t2 == fiber.b)
    if members.size == 0:
        return 0
    labels = _kernels.swap_components(table.masks, table.t2, shape.admissible.size,
                                      fiber.b - expansion, fiber.b + expansion)
    return int(np.unique(labels[members]).size)


def degree1_move_count(shape: LatticeShape) -> int:
    """Number of independent degree-one binomials ``P_y - P_y'``.

    Every fiber of size ``k`` contributes ``k - 1``.
    """
    n = shape.admissible.size
    if n > 16:
        raise BudgetExceededError(f"{n} free sites; degree-one counting enumerates all 2^n states (n <= 16)")
    total = 0
    for a in range(n + 1):
        total += sum(k - 1 for k in fiber_sizes(shape, a).values())
    return total


@dataclass(frozen=True)
class UniformityCheck:
    chi2: float
    pvalue: float
    dof: int
    n: int
    counts: np.ndarray
    undersampled: bool


def exact_fiber_distribution(chain_run, fiber_states: list[Configuration]) -> UniformityCheck:
    """Pearson chi-square of recorded states against the uniform law on the fiber.

    ``chain_run`` is anything with a ``states`` array of recorded cells, one
    row per sample; a plain ``(n, n_sites)`` array or a count vector aligned
    with ``fiber_states`` also works.
    """
    k = len(fiber_states)
    if k < 2:
        raise ValueError("need at least two fiber states")
    states = getattr(chain_run, "states", chain_run)
    states = np.asarray(states)
    if states.ndim == 1:
        counts = states.astype(np.int64)
        if counts.size != k:
            raise ValueError("count vector must align with fiber_states")
    else:
        index = {c.cells.tobytes(): q for q, c in enumerate(fiber_states)}
        uniq, inverse = np.unique(states, axis=0, return_inverse=True)
        counts = np.zeros(k, dtype=np.int64)
        for row, hits in zip(uniq, np.bincount(inverse.reshape(-1), minlength=len(uniq))):
            q = index.get(np.ascontiguousarray(row, dtype=np.uint8).tobytes())
            if q is None:
                raise ValueError("recorded state is not in the fiber")
            counts[q] += hits
    n = int(counts.sum())
    undersampled = n < 10 * k
    if undersampled:
        warnings.warn(f"{n} samples for {k} states; chi-square approximation is unreliable", RuntimeWarning)
    chi2, p = stats.chisquare(counts)
    return UniformityCheck(float(chi2), float(p), k - 1, n, counts, undersampled)
