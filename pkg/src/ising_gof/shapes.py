"""Max-singleton and rectangular configurations, fiber feasibility and the 1D normalisation path."""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np

from .lattice import Configuration, FiberId, LatticeShape


class InfeasibleFiberError(ValueError):
    pass


class DoesNotFitError(ValueError):
    pass


def _ceil_sqrt(n: int) -> int:
    r = isqrt(n)
    return r if r * r == n else r + 1


@dataclass(frozen=True)
class RectangularSpec:
    """An ``n x m`` block with a ``d1``-cell partial row on a short side,
    ``d2`` extra cells on a long side, plus ``s`` singletons.

    The block has ``n`` rows and ``m`` columns.  ``d1 = 0`` and ``s = 0`` are
    allowed, and so is ``n = m - 1`` (produced by the corner-break case of the
    max-singleton formula at perfect squares).
    """

    n: int
    m: int
    d1: int = 0
    d2: int = 0
    s: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"block sides must be >= 1, got n={self.n}, m={self.m}")
        if self.d2 not in (0, 1):
            raise ValueError(f"d2 must be 0 or 1, got {self.d2}")
        if self.s < 0 or self.d1 < 0:
            raise ValueError("d1 and s must be nonnegative")
        if self.d1 >= self.m:
            raise ValueError(f"d1 = {self.d1} must be smaller than m = {self.m}")
        if self.m > self.n + 1 or (self.m == self.n + 1 and self.d1 != self.m - 1):
            raise ValueError(f"m = {self.m} too large for n = {self.n}")

    @property
    def component_size(self) -> int:
        return self.n * self.m + self.d1 + self.d2

    @property
    def total_singletons(self) -> int:
        """Singletons of the realised configuration; a 1x1 block is one too."""
        return self.s + (self.component_size == 1)

    def block_cells(self) -> list[tuple[int, int]]:
        """Offsets of the non-singleton component relative to its top-left corner."""
        cells = [(r, c) for r in range(self.n) for c in range(self.m)]
        cells += [(self.n, c) for c in range(self.d1)]
        if self.d2:
            cells.append((0, self.m))
        return cells


def rect_stats(spec: RectangularSpec) -> tuple[int, int]:
    t1 = spec.n * spec.m + spec.d1 + spec.d2 + spec.s
    t2 = 2 * (spec.n + spec.m + (1 if spec.d1 > 0 else 0) + spec.d2 + 2 * spec.s)
    return t1, t2


def realize_rect(spec: RectangularSpec, shape: LatticeShape, anchor=(1, 1)) -> Configuration:
    """Place the block with its top-left corner at ``anchor`` and add the singletons.

    Singletons go to the first interior sites, in raster order, that are at
    Chebyshev distance >= 2 from every occupied site.  Nothing is placed on the
    outermost layer, whatever the boundary mode of ``shape``.
    """
    if shape.ndim != 2:
        raise ValueError("rectangular configurations are two-dimensional")
    rows, cols = shape.dims
    grid = np.zeros((rows, cols), dtype=np.uint8)
    r0, c0 = anchor
    for dr, dc in spec.block_cells():
        r, c = r0 + dr, c0 + dc
        if not (1 <= r < rows - 1 and 1 <= c < cols - 1):
            raise DoesNotFitError(f"block of {spec} does not fit inside {shape} at {anchor}")
        grid[r, c] = 1
    need = spec.s
    # occupied neighbourhood (Chebyshev radius 1) of everything placed so far
    blocked = np.zeros((rows + 2, cols + 2), dtype=bool)
    for r, c in zip(*np.nonzero(grid)):
        blocked[r:r + 3, c:c + 3] = True
    for r in range(1, rows - 1):
        if need == 0:
            break
        for c in range(1, cols - 1):
            if need == 0:
                break
            if not blocked[r + 1, c + 1]:
                grid[r, c] = 1
                blocked[r:r + 3, c:c + 3] = True
                need -= 1
    if need:
        raise DoesNotFitError(f"only {spec.s - need} of {spec.s} singletons fit inside {shape}")
    return Configuration(shape, grid)


def fiber_feasible(fiber: FiberId, d: int) -> bool:
    """Whether S(a, b) is non-empty on an ample zero-clamped lattice of dimension 1 or 2."""
    a, b = fiber.a, fiber.b
    if d not in (1, 2):
        raise ValueError("feasibility is only characterised for d = 1 and d = 2")
    if a == 0:
        return b == 0
    if b % 2:
        return False
    if d == 1:
        return 2 <= b <= 2 * a
    return 4 * a - 2 * _max_grid_edges(a) <= b <= 4 * a


def _max_grid_edges(k: int) -> int:
    # floor(2k - 2 sqrt(k)) = 2k - ceil(2 sqrt(k)) = 2k - ceil_sqrt(4k)
    return 2 * k - _ceil_sqrt(4 * k)


def max_singleton_2d(fiber: FiberId) -> RectangularSpec:
    """Rectangular configuration with the most singletons in a 2D fiber.

    The closed-form ``(d1, d2)`` rule can miss ``b`` by 2 once the component
    has a partial row of two or more cells (first at ``S(11, 14)``); the
    component shape is then found by a direct search with the same ``s``.
    """
    a, b = fiber.a, fiber.b
    if a == 0 or not fiber_feasible(fiber, 2):
        raise InfeasibleFiberError(f"S({a}, {b}) is empty on the 2D lattice")
    s = (b // 2 - 1 - _ceil_sqrt(4 * a - b + 1)) // 2
    k = a - s
    m = isqrt(k)
    r = k // m
    residual = b - 4 * s - 2 * (m + r)
    if residual in (0, 2):
        n = r - 1 if k % m == 0 and residual == 2 else r
        d1, d2 = (k - m * n, 0) if residual == 0 else (k - m * n - 1, 1)
        try:
            spec = RectangularSpec(n, m, d1, d2, s)
        except ValueError:
            spec = None
        if spec is not None and rect_stats(spec) == (a, b):
            return spec
    spec = _component_search(k, b // 2 - 2 * s, s)
    if spec is None:
        raise InfeasibleFiberError(f"no rectangular configuration in S({a}, {b})")
    return spec


def _component_search(k: int, half: int, s: int):
    """``n x m`` block plus partial rows with ``k`` cells and half-perimeter ``half``."""
    for m in range(isqrt(k), 0, -1):
        for n in range(max(m - 1, 1), k // m + 1):
            for d2 in (0, 1):
                d1 = k - n * m - d2
                if not 0 <= d1 < m or n + m + (d1 > 0) + d2 != half:
                    continue
                try:
                    return RectangularSpec(n, m, d1, d2, s)
                except ValueError:
                    continue
    return None


@dataclass(frozen=True)
class MaxSingleton1D:
    singletons: int
    component_size: int

    @property
    def total_singletons(self) -> int:
        return self.singletons + (self.component_size == 1)


def max_singleton_1d(fiber: FiberId) -> MaxSingleton1D:
    a, b = fiber.a, fiber.b
    if not fiber_feasible(fiber, 1) or a == 0:
        raise InfeasibleFiberError(f"S({a}, {b}) is empty on the 1D lattice")
    return MaxSingleton1D(b // 2 - 1, a - b // 2 + 1)


def _runs(cells: np.ndarray) -> list[list[int]]:
    """[start, length] of each run of ones, left to right."""
    padded = np.concatenate(([0], cells.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return [[int(s), int(e - s)] for s, e in zip(edges[::2], edges[1::2])]


def normalize_1d(config: Configuration) -> list[tuple[int, int]]:
    """Swaps that take a 1D zero-clamped configuration to its max-singleton form.

    Each swap ``(i, j)`` turns site ``i`` on and site ``j`` off.  Surplus cells
    (all but one cell of each run) hop one run at a time towards the leftmost
    run of length >= 2: the donor gives up its end cell facing the receiver and
    the receiver grows by one cell on that side.  Gaps keep their widths, so
    the number of runs, and with it T2, never changes.  Every swap lowers
    ``sum((len - 1) * distance_to_target)`` by one.
    """
    shape = config.shape
    if shape.ndim != 1 or not shape.zero_clamped:
        raise ValueError("normalize_1d needs a one-dimensional zero-clamped configuration")
    runs = _runs(config.cells)
    big = [k for k, (_, length) in enumerate(runs) if length > 1]
    if len(big) <= 1:
        return []
    target = big[0]
    swaps: list[tuple[int, int]] = []
    while True:
        donors = [k for k in range(target + 1, len(runs)) if runs[k][1] > 1]
        if not donors:
            return swaps
        k = donors[0]
        start, length = runs[k]
        left = runs[k - 1]
        swaps.append((left[0] + left[1], start))
        left[1] += 1
        runs[k] = [start + 1, length - 1]
