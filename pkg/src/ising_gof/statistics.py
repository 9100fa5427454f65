"""Test statistics: binary motif counts and subtable non-homogeneity.

Motifs are small windows over {1, 0, wildcard}; a configuration's count is the
number of placements of any symmetry variant that fit inside the lattice and
match on every non-wildcard cell.  Non-homogeneity statistics compare the
number of ones (``a``) and of disagreeing internal edges (``b``) in ``K``
pairs of disjoint ``N x N`` windows.

``Tracking`` bundles a list of descriptors into the flat arrays the chain
kernels update incrementally, so posterior samples cost O(1) per swap instead
of a full re-evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._kernels import count_window, window_values
from .lattice import Configuration, LatticeShape

CLOSURES = ("none", "rotations", "rotations_and_reflections")
KINDS = ("motif_count", "dT1", "dT2", "dT12")
SIDES = ("lower", "upper", "two_sided")
MAX_WINDOW = 4
MAX_PAIR_TRIES = 1_000_000

_CHARS = {"1": 1, "0": 0, ".": -1}


def _as_window(window) -> np.ndarray:
    if isinstance(window, str):
        window = window.split()
    if len(window) and isinstance(window[0], str):
        rows = []
        for line in window:
            try:
                rows.append([_CHARS[ch] for ch in line.strip()])
            except KeyError as exc:
                raise ValueError(f"motif rows use only '1', '0' and '.', got {line!r}") from exc
        window = rows
    arr = np.array(window, dtype=np.int8)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


@dataclass(frozen=True)
class Motif:
    """Binary pattern with optional symmetry closure.  ``-1`` marks a wildcard.

    ``window`` accepts nested lists, an array, or strings of ``1``, ``0`` and
    ``.`` (one string per row).
    """

    window: tuple
    symmetry_closure: str = "rotations"
    name: str = ""

    def __post_init__(self):
        arr = _as_window(self.window)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("motif window must be a non-empty 2D array")
        if arr.shape[0] > MAX_WINDOW or arr.shape[1] > MAX_WINDOW:
            raise ValueError(f"motif window is at most {MAX_WINDOW}x{MAX_WINDOW}, got {arr.shape}")
        if not np.isin(arr, (-1, 0, 1)).all():
            raise ValueError("motif cells must be 1, 0 or wildcard")
        if (arr < 0).all():
            raise ValueError("motif needs at least one non-wildcard cell")
        if self.symmetry_closure not in CLOSURES:
            raise ValueError(f"symmetry_closure must be one of {CLOSURES}")
        object.__setattr__(self, "window", tuple(tuple(int(v) for v in row) for row in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.window, dtype=np.int8)

    def variants(self) -> list[np.ndarray]:
        """Distinct windows of the symmetry closure, in a fixed order."""
        base = self.array
        cands = [base]
        if self.symmetry_closure != "none":
            cands += [np.rot90(base, k) for k in (1, 2, 3)]
        if self.symmetry_closure == "rotations_and_reflections":
            cands += [np.rot90(base.T, k) for k in range(4)]
        seen, out = set(), []
        for c in cands:
            key = (c.shape, c.tobytes())
            if key not in seen:
                seen.add(key)
                out.append(np.ascontiguousarray(c))
        return out

    def rows(self) -> list[str]:
        inv = {1: "1", 0: "0", -1: "."}
        return ["".join(inv[v] for v in row) for row in self.window]

    def to_dict(self) -> dict:
        return {"name": self.name, "closure": self.symmetry_closure, "rows": self.rows()}

    @classmethod
    def from_dict(cls, d: dict) -> "Motif":
        return cls(tuple(d["rows"]), d.get("closure", "rotations"), d.get("name", ""))


CONSECUTIVE = Motif(("0110",), "rotations", "consecutive_pairs")
ADJACENT = Motif(("11", "00"), "rotations", "adjacent_pairs")
DIAGONAL = Motif(("10", "01"), "rotations", "diagonal_pairs")


def parse_motifs(text: str) -> list[Motif]:
    """Read motif blocks.

    Each block starts with a header ``<name> [closure]`` followed by rows of
    ``1``, ``0`` and ``.``; blocks are separated by blank lines and ``#``
    starts a comment.
    """
    motifs, block = [], []

    def flush():
        if not block:
            return
        header = block[0][1].split()
        if len(header) > 2:
            raise ValueError(f"line {block[0][0]}: header is '<name> [closure]'")
        closure = header[1] if len(header) == 2 else "rotations"
        if len(block) < 2:
            raise ValueError(f"line {block[0][0]}: motif {header[0]!r} has no rows")
        try:
            motifs.append(Motif(tuple(line for _, line in block[1:]), closure, header[0]))
        except ValueError as exc:
            raise ValueError(f"line {block[0][0]}: {exc}") from None
        block.clear()

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            flush()
            continue
        block.append((lineno, line))
    flush()
    return motifs


def format_motifs(motifs: Iterable[Motif]) -> str:
    return "\n\n".join("\n".join([f"{m.name or 'motif'} {m.symmetry_closure}"] + m.rows()) for m in motifs) + "\n"


def _grid2d(config_or_grid) -> np.ndarray:
    grid = config_or_grid.grid if isinstance(config_or_grid, Configuration) else np.asarray(config_or_grid)
    if grid.ndim == 1:
        grid = grid[None, :]
    if grid.ndim != 2:
        raise ValueError("statistics are defined for 1D and 2D lattices")
    return np.ascontiguousarray(grid, dtype=np.uint8)


def count_motif(config_or_grid, motif: Motif) -> int:
    """Matching placements of all variants of ``motif`` (1D lattices count as one row)."""
    grid = _grid2d(config_or_grid)
    return int(sum(count_window(grid, v) for v in motif.variants()))


# -- subtables ----------------------------------------------------------------------


@dataclass(frozen=True)
class SubtableScheme:
    """``K`` pairs of disjoint ``N x N`` windows.

    With ``resample=False`` (default) the windows depend only on ``seed`` and
    the lattice size, so every posterior sample is scored against the same
    pairs as the observed data.  With ``resample=True`` each evaluation draws
    fresh pairs from a stream keyed by ``(chain, record)``.
    """

    K: int = 100
    N: int = 3
    seed: int = 0
    resample: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.N < 2:
            raise ValueError("N must be >= 2")

    def check_fits(self, shape: LatticeShape):
        if shape.ndim != 2:
            raise ValueError("subtable statistics need a 2D lattice")
        rows, cols = shape.dims
        n = self.N
        if rows < n or cols < n or (rows < 2 * n and cols < 2 * n):
            raise ValueError(f"two disjoint {n}x{n} windows do not fit in a {shape} lattice")


def sample_disjoint_pairs(shape: LatticeShape, scheme: SubtableScheme, stream_key: tuple = ()) -> np.ndarray:
    """``(K, 2, 2)`` array of window corners ``[[r1, c1], [r2, c2]]``.

    Pairs are drawn one after another by rejection, so the first ``K`` pairs
    of a larger scheme with the same seed are exactly the pairs of this one.
    """
    scheme.check_fits(shape)
    rows, cols = shape.dims
    n = scheme.N
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(scheme.seed, spawn_key=tuple(stream_key))))
    high = np.array([rows - n + 1, cols - n + 1, rows - n + 1, cols - n + 1])
    out = np.empty((scheme.K, 2, 2), dtype=np.int64)
    for k in range(scheme.K):
        for _ in range(MAX_PAIR_TRIES):
            r1, c1, r2, c2 = rng.integers(0, high)
            if abs(r1 - r2) >= n or abs(c1 - c2) >= n:
                out[k] = ((r1, c1), (r2, c2))
                break
        else:
            raise RuntimeError(f"no disjoint pair found after {MAX_PAIR_TRIES} tries")
    return out


def subtable_values(config_or_grid, corners: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Ones and disagreeing internal edges of each window, flattened pair by pair."""
    grid = _grid2d(config_or_grid)
    return window_values(grid, np.ascontiguousarray(corners, dtype=np.int64).reshape(-1, 2), n)


def _dt(wa: np.ndarray, wb: np.ndarray, n: int, kind: str) -> np.ndarray:
    """dT values from window values of shape ``(..., 2K)``."""
    da = np.abs(wa[..., 0::2] - wa[..., 1::2]).max(axis=-1)
    db = np.abs(wb[..., 0::2] - wb[..., 1::2]).max(axis=-1)
    if kind == "dT1":
        return da.astype(np.float64)
    if kind == "dT2":
        return db.astype(np.float64)
    return np.maximum(da / (n * n), db / (2 * n * (n - 1)))


def non_homogeneity(config_or_grid, scheme: SubtableScheme, kind: str, stream_key: tuple = ()) -> float:
    """``dT1``, ``dT2`` or ``dT12`` of a configuration.

    ``dT12`` is the larger of ``dT1 / N^2`` and ``dT2 / (2 N (N - 1))``, each
    maximised over all pairs before normalising.
    """
    if kind not in ("dT1", "dT2", "dT12"):
        raise ValueError(f"unknown non-homogeneity kind {kind!r}")
    grid = _grid2d(config_or_grid)
    corners = sample_disjoint_pairs(LatticeShape(grid.shape), scheme, stream_key)
    wa, wb = subtable_values(grid, corners, scheme.N)
    return float(_dt(wa, wb, scheme.N, kind))


# -- descriptors ----------------------------------------------------------------------


@dataclass(frozen=True)
class StatDescriptor:
    """One statistic plus the tail used for its p-value."""

    kind: str
    motif: Optional[Motif] = None
    scheme: Optional[SubtableScheme] = None
    name: str = ""
    sided: str = "two_sided"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.sided not in SIDES:
            raise ValueError(f"sided must be one of {SIDES}")
        if (self.kind == "motif_count") != (self.motif is not None):
            raise ValueError("a motif is required for, and only for, motif_count")
        if (self.kind != "motif_count") != (self.scheme is not None):
            raise ValueError("a subtable scheme is required for, and only for, dT statistics")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return self.motif.name or "motif" if self.motif is not None else self.kind

    def to_dict(self) -> dict:
        d = {"name": self.label, "kind": self.kind, "sided": self.sided}
        if self.motif is not None:
            d["motif"] = self.motif.to_dict()
        if self.scheme is not None:
            d["scheme"] = {"K": self.scheme.K, "N": self.scheme.N, "seed": self.scheme.seed,
                           "resample": self.scheme.resample}
        if self.kind == "dT12":
            d["dT12_reading"] = "max(max_i|a1-a2|/N^2, max_i|b1-b2|/(2N(N-1)))"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StatDescriptor":
        motif = Motif.from_dict(d["motif"]) if "motif" in d else None
        scheme = SubtableScheme(**d["scheme"]) if "scheme" in d else None
        return cls(d["kind"], motif, scheme, d.get("name", ""), d.get("sided", "two_sided"))


def evaluate(config_or_grid, descriptor: StatDescriptor, stream_key: tuple = ()) -> float:
    """Value of ``descriptor`` on a configuration.

    ``stream_key`` only matters for resampling subtable schemes.
    """
    if descriptor.kind == "motif_count":
        return float(count_motif(config_or_grid, descriptor.motif))
    key = tuple(stream_key) if descriptor.scheme.resample else ()
    return non_homogeneity(config_or_grid, descriptor.scheme, descriptor.kind, key)


def default_descriptors(scheme: Optional[SubtableScheme] = None) -> list[StatDescriptor]:
    """Diagonal (upper), adjacent and consecutive pairs (two-sided), then dT1, dT2, dT12 (upper)."""
    out = [
        StatDescriptor("motif_count", DIAGONAL, sided="upper"),
        StatDescriptor("motif_count", ADJACENT, sided="two_sided"),
        StatDescriptor("motif_count", CONSECUTIVE, sided="two_sided"),
    ]
    if scheme is not None:
        out += [StatDescriptor(k, scheme=scheme, sided="upper") for k in ("dT1", "dT2", "dT12")]
    return out


# -- incremental tracking ---------------------------------------------------------------


class Tracking:
    """Kernel-side state for a list of descriptors on one lattice.

    Motif counts are kept per descriptor; window ones/edge counts are kept per
    window.  Resampling schemes cannot be tracked and raise ``ValueError``.
    """

    def __init__(self, descriptors: Sequence[StatDescriptor], shape: LatticeShape):
        if shape.ndim not in (1, 2):
            raise ValueError("tracked statistics need a 1D or 2D lattice")
        self.descriptors = list(descriptors)
        self.shape = shape
        variants, owner = [], []
        self._motif_col: dict[int, int] = {}
        self._scheme_slot: dict[int, tuple[int, int, int]] = {}
        windows, sides = [], []
        schemes: dict[SubtableScheme, tuple[int, int]] = {}
        for k, d in enumerate(self.descriptors):
            if d.kind == "motif_count":
                col = len(self._motif_col)
                self._motif_col[k] = col
                for v in d.motif.variants():
                    variants.append(v)
                    owner.append(col)
            else:
                if d.scheme.resample:
                    raise ValueError("resampling subtable schemes are evaluated outside the kernel")
                if d.scheme not in schemes:
                    corners = sample_disjoint_pairs(shape, d.scheme)
                    start = len(windows)
                    windows.extend(corners.reshape(-1, 2).tolist())
                    sides.extend([d.scheme.N] * (2 * d.scheme.K))
                    schemes[d.scheme] = (start, len(windows))
                start, stop = schemes[d.scheme]
                self._scheme_slot[k] = (start, stop, d.scheme.N)
        mv = np.full((len(variants), MAX_WINDOW, MAX_WINDOW), -1, dtype=np.int8)
        for q, v in enumerate(variants):
            mv[q, : v.shape[0], : v.shape[1]] = v
        self._mv = mv
        self._mvh = np.array([v.shape[0] for v in variants], dtype=np.int64)
        self._mvw = np.array([v.shape[1] for v in variants], dtype=np.int64)
        self._mown = np.array(owner, dtype=np.int64)
        self._variants = variants
        self._n_motifs = len(self._motif_col)
        self._win = np.array(windows, dtype=np.int64).reshape(-1, 2)
        self._wside = np.array(sides, dtype=np.int64)

    @property
    def n_outputs(self) -> int:
        return len(self.descriptors)

    def motif_arrays(self):
        return self._mv, self._mvh, self._mvw, self._mown

    def window_arrays(self):
        return self._win, self._wside

    def initial_counts(self, grid):
        g = _grid2d(grid)
        mcount = np.zeros(self._n_motifs, dtype=np.int64)
        for v, col in zip(self._variants, self._mown):
            mcount[col] += count_window(g, v)
        wa = np.zeros(len(self._win), dtype=np.int64)
        wb = np.zeros(len(self._win), dtype=np.int64)
        for side in np.unique(self._wside):
            sel = self._wside == side
            wa[sel], wb[sel] = subtable_values(g, self._win[sel], int(side))
        return mcount, wa, wb

    def reduce(self, mcounts: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
        """Descriptor values from recorded counters, one row per record."""
        out = np.empty((mcounts.shape[0], len(self.descriptors)), dtype=np.float64)
        for k, d in enumerate(self.descriptors):
            if d.kind == "motif_count":
                out[:, k] = mcounts[:, self._motif_col[k]]
            else:
                start, stop, n = self._scheme_slot[k]
                out[:, k] = _dt(wa[:, start:stop], wb[:, start:stop], n, d.kind)
        return out

    def values(self, grid) -> np.ndarray:
        m, a, b = self.initial_counts(grid)
        return self.reduce(m[None], a[None], b[None])[0]
