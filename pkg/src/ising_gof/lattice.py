"""Binary configurations on d-dimensional lattice graphs.

Cells are stored flat in C order: for a lattice of size ``N1 x ... x Nd`` the
site with coordinates ``(x1, ..., xd)`` has index ``np.ravel_multi_index``,
so the last axis varies fastest.  For 2D grids this is the usual row-major
layout with ``dims = (rows, cols)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._kernels import build_neighbors, swap_delta

BOUNDARY_MODES = ("free", "zero_clamped")


class InvalidSwapError(ValueError):
    """Raised when a simple swap does not turn a zero on and a one off."""


@dataclass(frozen=True)
class LatticeShape:
    """Size of the lattice graph and how its outermost layer is treated.

    ``zero_clamped`` forbids ones on the outermost layer of sites, which is the
    setting in which the connectivity results hold.
    """

    dims: tuple[int, ...]
    boundary: str = "free"

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not dims or any(n < 1 for n in dims):
            raise ValueError(f"lattice dims must be positive, got {self.dims!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def parse(cls, text: str, boundary: str = "free") -> "LatticeShape":
        """``"10x10"`` or ``"1x15"`` style sizes."""
        try:
            dims = tuple(int(p) for p in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"cannot parse lattice size {text!r}") from None
        return cls(dims, boundary)

    def __str__(self):
        return "x".join(map(str, self.dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_edges(self) -> int:
        total = 0
        for k, n in enumerate(self.dims):
            total += (n - 1) * (self.n_sites // n)
        return total

    @property
    def zero_clamped(self) -> bool:
        return self.boundary == "zero_clamped"

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``(n_sites, 2d)`` int32 table of lattice neighbours, ``-1``-padded."""
        table = build_neighbors(np.array(self.dims, dtype=np.int64))
        table.flags.writeable = False
        return table

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Flat boolean mask of the outermost layer of sites."""
        sites = np.arange(self.n_sites, dtype=np.int32)
        mask = np.zeros(self.n_sites, dtype=bool)
        for axis, size in enumerate(self.dims):
            coord = (sites // (self.n_sites // int(np.prod(self.dims[: axis + 1])))) % size
            mask |= (coord == 0) | (coord == size - 1)
        mask.flags.writeable = False
        return mask

    @cached_property
    def admissible(self) -> np.ndarray:
        """Flat indices of sites allowed to hold a one, ascending."""
        if self.zero_clamped:
            sites = np.flatnonzero(~self.boundary_mask)
        else:
            sites = np.arange(self.n_sites)
        sites = sites.astype(np.int32)
        sites.flags.writeable = False
        return sites

    def site(self, index) -> int:
        """Flat index from either a flat index or a coordinate tuple."""
        if isinstance(index, (tuple, list, np.ndarray)):
            return int(np.ravel_multi_index(tuple(int(x) for x in index), self.dims))
        index = int(index)
        if not 0 <= index < self.n_sites:
            raise IndexError(f"site {index} outside lattice of {self.n_sites} sites")
        return index


def _t2_of_grid(grid: np.ndarray) -> int:
    g = grid.astype(np.int8, copy=False)
    return int(sum(np.count_nonzero(np.diff(g, axis=k)) for k in range(g.ndim)))


class Configuration:
    """A 0/1 assignment to every lattice site with cached (T1, T2).

    Besides the cells, a configuration keeps the occupied sites and the
    admissible empty sites in two dense arrays with a position map, so a
    uniformly random one or zero can be drawn and a swap applied in O(1).
    The arrays are mutated in place by the compiled chain kernels.
    """

    def __init__(self, shape: LatticeShape, cells):
        cells = np.ascontiguousarray(cells, dtype=np.uint8).reshape(-1)
        if cells.size != shape.n_sites:
            raise ValueError(f"expected {shape.n_sites} cells for a {shape} lattice, got {cells.size}")
        if cells.max(initial=0) > 1:
            raise ValueError("configuration cells must be 0 or 1")
        if shape.zero_clamped and cells[shape.boundary_mask].any():
            raise ValueError("zero_clamped configuration has ones on the boundary")
        self.shape = shape
        self.cells = cells.copy()
        self._rebuild()

    def _rebuild(self):
        cells = self.cells
        adm = self.shape.admissible
        self.ones = np.flatnonzero(cells).astype(np.int32)
        self.zeros = adm[cells[adm] == 0].astype(np.int32)
        self.pos = np.full(cells.size, -1, dtype=np.int32)
        self.pos[self.ones] = np.arange(self.ones.size, dtype=np.int32)
        self.pos[self.zeros] = np.arange(self.zeros.size, dtype=np.int32)
        self._t2 = _t2_of_grid(self.grid)

    @classmethod
    def from_grid(cls, grid, boundary: str = "free") -> "Configuration":
        grid = np.asarray(grid)
        if grid.ndim == 0:
            raise ValueError("grid must have at least one axis")
        return cls(LatticeShape(grid.shape, boundary), grid)

    @classmethod
    def empty(cls, shape: LatticeShape) -> "Configuration":
        return cls(shape, np.zeros(shape.n_sites, dtype=np.uint8))

    @classmethod
    def from_sites(cls, shape: LatticeShape, sites: Sequence) -> "Configuration":
        cells = np.zeros(shape.n_sites, dtype=np.uint8)
        for s in sites:
            cells[shape.site(s)] = 1
        return cls(shape, cells)

    @property
    def grid(self) -> np.ndarray:
        """The cells as an array of shape ``dims`` (a view)."""
        return self.cells.reshape(self.shape.dims)

    @property
    def t1(self) -> int:
        return int(self.ones.size)

    @property
    def t2(self) -> int:
        return self._t2

    @property
    def ones_index(self) -> np.ndarray:
        return self.ones

    @property
    def zeros_index(self) -> np.ndarray:
        return self.zeros

    def copy(self) -> "Configuration":
        new = object.__new__(Configuration)
        new.shape = self.shape
        new.cells = self.cells.copy()
        new.ones = self.ones.copy()
        new.zeros = self.zeros.copy()
        new.pos = self.pos.copy()
        new._t2 = self._t2
        return new

    def swap_delta(self, i, j) -> int:
        """T2 change the swap ``(i, j)`` would cause, without applying it."""
        i, j = self._check_swap(i, j)
        return int(swap_delta(self.cells, self.shape.neighbors, i, j))

    def _check_swap(self, i, j):
        i = self.shape.site(i)
        j = self.shape.site(j)
        if self.cells[i] != 0 or self.cells[j] != 1:
            raise InvalidSwapError(f"swap needs y[{i}] = 0 and y[{j}] = 1")
        if self.pos[i] < 0:
            raise InvalidSwapError(f"site {i} is on the clamped boundary")
        return i, j

    def apply_swap(self, i, j) -> int:
        """Turn zero-site ``i`` on and one-site ``j`` off; returns the T2 change."""
        i, j = self._check_swap(i, j)
        delta = int(swap_delta(self.cells, self.shape.neighbors, i, j))
        zi, oi = self.pos[i], self.pos[j]
        self.cells[i] = 1
        self.cells[j] = 0
        self.zeros[zi] = j
        self.pos[j] = zi
        self.ones[oi] = i
        self.pos[i] = oi
        self._t2 += delta
        return delta

    def recompute(self) -> tuple[int, int]:
        """(T1, T2) from scratch, ignoring the caches."""
        return int(self.cells.sum()), _t2_of_grid(self.grid)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.shape, self.cells.tobytes()))

    def __repr__(self):
        return f"Configuration({self.shape}, {self.shape.boundary}, t1={self.t1}, t2={self.t2})"


@dataclass(frozen=True, order=True)
class FiberId:
    """Target sufficient statistics ``(a, b)`` of a fiber S(a, b)."""

    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"fiber statistics must be nonnegative, got ({self.a}, {self.b})")

    def check_parity(self, shape: LatticeShape):
        """On a zero-clamped lattice every T2 value is even."""
        if shape.zero_clamped and self.b % 2:
            raise ValueError(f"b = {self.b} is odd; impossible on a zero-clamped lattice")


def suff_stats(config: Configuration) -> tuple[int, int]:
    """Number of ones and number of disagreeing lattice edges."""
    return config.t1, config.t2


def to_spin_stats(config: Configuration) -> tuple[int, int]:
    """The same statistics for the +-1 representation of the configuration."""
    shape = config.shape
    return 2 * config.t1 - shape.n_sites, shape.n_edges - 2 * config.t2


def apply_swap(config: Configuration, i, j) -> int:
    return config.apply_swap(i, j)


@dataclass
class Components:
    sizes: list[int]
    sites: list[np.ndarray] = field(repr=False)

    @property
    def singletons(self) -> int:
        return sum(1 for s in self.sizes if s == 1)

    def census(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.sizes:
            out[s] = out.get(s, 0) + 1
        return dict(sorted(out.items(), reverse=True))


def connected_components(config: Configuration) -> Components:
    """Connected components of the occupied sites under lattice adjacency.

    Components are ordered by size (largest first), ties by smallest site index.
    """
    from scipy import ndimage  # heavy import, only needed here

    labels, n = ndimage.label(config.grid)
    flat = labels.reshape(-1)
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(1, n + 2))
    groups = [order[bounds[k]:bounds[k + 1]] for k in range(n)]
    groups.sort(key=lambda g: (-g.size, g[0]))
    return Components([int(g.size) for g in groups], groups)
