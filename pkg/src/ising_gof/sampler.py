"""Simple-swap Metropolis-Hastings on the expanded sample space, and data generators.

The swap chain keeps ``T1`` fixed and lets ``T2`` wander inside a band of
half-width ``2 (d - 1)`` around the target ``b``.  Because the proposal is
symmetric and every in-band state has the same target weight, the chain is
uniform on the band; watching it only when ``T2 == b`` gives uniform draws
from the fiber S(a, b).  ``mode="strict"`` collapses the band to ``b`` itself,
which is the classical swap algorithm and can be reducible.

Random numbers are raw 64-bit words from a ``numpy`` PCG64 stream; chain ``c``
of a run seeded with ``seed`` uses ``SeedSequence(seed, spawn_key=(c,))``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .lattice import Configuration, FiberId, LatticeShape

MODES = ("expanded", "strict")
RECORD_POLICIES = ("on_fiber_only", "all_states")
T3_KINDS = ("none", "second_nearest", "diagonal", "overall_parity")

_CHUNK_STEPS = 1 << 16
_EMPTY_I8 = np.zeros((0, 1, 1), dtype=np.int8)
_EMPTY_I64 = np.zeros(0, dtype=np.int64)
_EMPTY_WIN = np.zeros((0, 2), dtype=np.int64)


def expanded_contains(t1: int, t2: int, target: FiberId, d: int, parity: bool = True) -> bool:
    """Whether ``(t1, t2)`` lies in the minimal expansion S*(a, b) for dimension ``d``.

    With ``parity=False`` odd offsets inside the band are admitted too, which is
    what the sampler does on free-boundary lattices.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    off = t2 - target.b
    if t1 != target.a or abs(off) > 2 * (d - 1):
        return False
    return off % 2 == 0 or not parity


def chain_rng(seed: int, chain: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


@dataclass(frozen=True)
class ChainSettings:
    """Sampler protocol.  ``target=None`` means the fiber of the starting state.

    The defaults follow the 10x10 protocol: 100,000 steps, 10,000 burn-in,
    thinning 10.
    """

    mode: str = "expanded"
    target: Optional[FiberId] = None
    steps: int = 100_000
    burn_in: int = 10_000
    thinning: int = 10
    seed: int = 0
    record_policy: str = "on_fiber_only"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.record_policy not in RECORD_POLICIES:
            raise ValueError(f"record_policy must be one of {RECORD_POLICIES}")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not 0 <= self.burn_in < self.steps:
            raise ValueError("need 0 <= burn_in < steps")


@dataclass
class ChainRun:
    """Recorded output of one chain.

    ``samples`` holds one row of statistic values per recorded state (when
    statistics were requested), ``states`` the recorded cells (when kept).
    ``record_steps`` gives the 1-based step index of each record.
    """

    chain: int
    settings: ChainSettings
    target: FiberId
    t2: np.ndarray
    record_steps: np.ndarray
    samples: Optional[np.ndarray]
    states: Optional[np.ndarray]
    accepted: int
    on_fiber_steps: int
    final_state: Configuration = field(repr=False)

    @property
    def n_samples(self) -> int:
        return int(self.t2.size)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.settings.steps

    @property
    def on_fiber_fraction(self) -> float:
        post = self.settings.steps - self.settings.burn_in
        return self.on_fiber_steps / post

    @property
    def frozen(self) -> bool:
        return self.accepted == 0


def _band(shape: LatticeShape, target: FiberId, mode: str) -> tuple[int, int, int]:
    half = 2 * (shape.ndim - 1) if mode == "expanded" else 0
    parity = 1 if shape.zero_clamped else 0
    return target.b - half, target.b + half, parity


def _grid_dims(shape: LatticeShape) -> tuple[int, int]:
    if shape.ndim == 2:
        return shape.dims
    if shape.ndim == 1:
        return 1, shape.dims[0]
    return 1, shape.n_sites


class _Counters:
    """Mutable tracker state for one chain (see ``Tracking`` in ``statistics``)."""

    def __init__(self, tracking, config: Configuration):
        if tracking is None:
            self.mv, self.mvh, self.mvw, self.mown = _EMPTY_I8, _EMPTY_I64, _EMPTY_I64, _EMPTY_I64
            self.win, self.wside = _EMPTY_WIN, _EMPTY_I64
            self.mcount, self.wa, self.wb = _EMPTY_I64.copy(), _EMPTY_I64.copy(), _EMPTY_I64.copy()
        else:
            self.mv, self.mvh, self.mvw, self.mown = tracking.motif_arrays()
            self.win, self.wside = tracking.window_arrays()
            self.mcount, self.wa, self.wb = tracking.initial_counts(config.grid)

    def args(self):
        return (self.mv, self.mvh, self.mvw, self.mown, self.mcount, self.win, self.wside, self.wa, self.wb)


def _check_start(config: Configuration, target: FiberId, mode: str):
    target.check_parity(config.shape)
    lo, hi, parity = _band(config.shape, target, mode)
    ok = config.t1 == target.a and lo <= config.t2 <= hi and (not parity or (config.t2 - target.b) % 2 == 0)
    if not ok:
        raise ValueError(
            f"start state (t1={config.t1}, t2={config.t2}) is outside the {mode} band of S({target.a}, {target.b})"
        )


def step(config: Configuration, settings: ChainSettings, rng: np.random.Generator) -> bool:
    """One proposal of the swap chain, applied to ``config`` in place.

    Uses the same word-to-index mapping as ``run_chain``, so a sequence of
    ``step`` calls with ``chain_rng(seed, c)`` replays chain ``c`` exactly.
    Expanded mode needs ``settings.target``: once the state leaves the fiber
    its own statistics no longer say where the band is centred.
    """
    if settings.target is None and settings.mode == "expanded":
        raise ValueError("step in expanded mode needs settings.target")
    target = settings.target or FiberId(config.t1, config.t2)
    lo, hi, parity = _band(config.shape, target, settings.mode)
    nrows, ncols = _grid_dims(config.shape)
    st = np.array([config.t2, 0, 0], dtype=np.int64)
    words = rng.bit_generator.random_raw(2)
    counters = _Counters(None, config)
    _kernels.swap_run(config.cells, config.shape.neighbors, config.ones, config.zeros, config.pos, st,
                      lo, hi, target.b, parity, words, nrows, ncols, *counters.args())
    config._t2 = int(st[0])
    return bool(st[1])


def run_chain(config0: Configuration, settings: ChainSettings, *, chain: int = 0, tracking=None,
              observe: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
              keep_states: bool = False, batch_bytes: int = 1 << 20) -> ChainRun:
    """Run one swap chain from a copy of ``config0``.

    Parameters
    ----------
    tracking
        Optional statistics tracker (``statistics.Tracking``).  Its counters are
        updated incrementally inside the compiled loop and reduced to one row of
        values per record.
    observe
        Optional ``observe(grid, record_index) -> values`` evaluated in Python
        on every kept record; its values follow the tracked ones in ``samples``.
    keep_states
        Store the cells of every kept record in ``ChainRun.states``.
    batch_bytes
        Memory bound for the per-batch record buffers.
    """
    shape = config0.shape
    target = settings.target or FiberId(config0.t1, config0.t2)
    _check_start(config0, target, settings.mode)
    if tracking is not None and shape.ndim > 2:
        raise ValueError("tracked statistics need a 1D or 2D lattice")
    cfg = config0.copy()
    lo, hi, parity = _band(shape, target, settings.mode)
    nrows, ncols = _grid_dims(shape)
    nbr = shape.neighbors
    bitgen = chain_rng(settings.seed, chain).bit_generator
    counters = _Counters(tracking, cfg)
    st = np.array([cfg.t2, 0, 0], dtype=np.int64)

    def advance(n: int):
        while n > 0:
            k = min(n, _CHUNK_STEPS)
            _kernels.swap_run(cfg.cells, nbr, cfg.ones, cfg.zeros, cfg.pos, st, lo, hi, target.b, parity,
                              bitgen.random_raw(2 * k), nrows, ncols, *counters.args())
            n -= k

    advance(settings.burn_in)
    st[2] = 0
    n_records = (settings.steps - settings.burn_in) // settings.thinning
    need_cells = keep_states or observe is not None
    row_bytes = 8 * (1 + counters.mcount.size + 2 * counters.wa.size) + (shape.n_sites if need_cells else 0)
    per_batch = max(1, min(batch_bytes // row_bytes, max(1, _CHUNK_STEPS // settings.thinning)))

    t2_out, step_out, sample_out, state_out = [], [], [], []
    done = 0
    while done < n_records:
        nb = min(per_batch, n_records - done)
        out_t2 = np.empty(nb, dtype=np.int64)
        out_m = np.empty((nb, counters.mcount.size), dtype=np.int64)
        out_wa = np.empty((nb, counters.wa.size), dtype=np.int64)
        out_wb = np.empty((nb, counters.wb.size), dtype=np.int64)
        out_cells = np.empty((nb if need_cells else 0, shape.n_sites), dtype=np.uint8)
        words = bitgen.random_raw(2 * nb * settings.thinning)
        _kernels.swap_record(cfg.cells, nbr, cfg.ones, cfg.zeros, cfg.pos, st, lo, hi, target.b, parity,
                             words, settings.thinning, nrows, ncols, *counters.args(),
                             out_t2, out_m, out_wa, out_wb, out_cells)
        keep = out_t2 == target.b if settings.record_policy == "on_fiber_only" else np.ones(nb, dtype=bool)
        idx = np.flatnonzero(keep)
        steps_here = settings.burn_in + (done + idx + 1) * settings.thinning
        t2_out.append(out_t2[idx])
        step_out.append(steps_here)
        cols = []
        if tracking is not None:
            cols.append(np.asarray(tracking.reduce(out_m[idx], out_wa[idx], out_wb[idx]), dtype=np.float64))
        if observe is not None:
            obs = [np.atleast_1d(np.asarray(observe(out_cells[q].reshape(shape.dims), int(done + q)), dtype=np.float64))
                   for q in idx]
            cols.append(np.array(obs).reshape(idx.size, -1) if obs else np.zeros((0, 0)))
        if cols:
            sample_out.append(np.hstack([c.reshape(idx.size, -1) for c in cols]) if idx.size else None)
        if keep_states:
            state_out.append(out_cells[idx])
        done += nb
    advance(settings.steps - settings.burn_in - n_records * settings.thinning)
    cfg._t2 = int(st[0])

    states = None
    if keep_states:
        states = np.vstack(state_out) if state_out else np.zeros((0, shape.n_sites), np.uint8)
    samples = None
    if tracking is not None or observe is not None:
        blocks = [s for s in sample_out if s is not None]
        samples = np.vstack(blocks) if blocks else np.zeros((0, 0))
    return ChainRun(
        chain=chain,
        settings=settings,
        target=target,
        t2=np.concatenate(t2_out) if t2_out else np.zeros(0, np.int64),
        record_steps=np.concatenate(step_out) if step_out else np.zeros(0, np.int64),
        samples=samples,
        states=states,
        accepted=int(st[1]),
        on_fiber_steps=int(st[2]),
        final_state=cfg,
    )


def run_chains(config0: Configuration, settings: ChainSettings, n_chains: int, *, workers: Optional[int] = None,
               **kwargs) -> list[ChainRun]:
    """Run chains ``0 .. n_chains - 1`` in a thread pool; results come back in chain order."""
    workers = workers or min(n_chains, os.cpu_count() or 1)
    if workers <= 1:
        return [run_chain(config0, settings, chain=c, **kwargs) for c in range(n_chains)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_chain, config0, settings, chain=c, **kwargs) for c in range(n_chains)]
        return [f.result() for f in futures]


def find_fiber_member(shape: LatticeShape, target: FiberId, seed: int = 0, init: Optional[Configuration] = None,
                      max_steps: int = 50_000_000, uphill: float = 1e-3) -> Configuration:
    """A configuration in S(a, b), found by a swap walk that homes in on ``T2 = b``.

    Starts from ``init`` (with ones added or removed at random to reach
    ``T1 = a``) or from ``a`` uniformly placed ones.
    """
    rng = chain_rng(seed, 0)
    adm = shape.admissible
    if target.a > adm.size:
        raise ValueError(f"a = {target.a} exceeds the {adm.size} admissible sites")
    if init is None:
        cells = np.zeros(shape.n_sites, dtype=np.uint8)
        cells[rng.choice(adm, size=target.a, replace=False)] = 1
    else:
        if init.shape != shape:
            raise ValueError("init lives on a different lattice")
        cells = init.cells.copy()
        ones = np.flatnonzero(cells)
        if ones.size > target.a:
            cells[rng.choice(ones, size=ones.size - target.a, replace=False)] = 0
        elif ones.size < target.a:
            free = adm[cells[adm] == 0]
            cells[rng.choice(free, size=target.a - ones.size, replace=False)] = 1
    cfg = Configuration(shape, cells)
    st = np.array([cfg.t2, 0, 0], dtype=np.int64)
    used = 0
    while st[0] != target.b and used < max_steps:
        k = min(_CHUNK_STEPS, max_steps - used)
        used += _kernels.descend_to_fiber(cfg.cells, shape.neighbors, cfg.ones, cfg.zeros, cfg.pos, st, target.b,
                                          rng.bit_generator.random_raw(3 * k), uphill)
    cfg._t2 = int(st[0])
    if cfg.t2 != target.b:
        raise RuntimeError(f"no state of S({target.a}, {target.b}) found within {max_steps} proposals")
    return cfg


# -- Boltzmann-type models --------------------------------------------------------


def interaction_edges(dims: tuple[int, ...], boundary: str = "free") -> np.ndarray:
    """``(n_edges, 2)`` nearest-neighbour pairs; ``periodic`` wraps axes of length >= 3."""
    n = int(np.prod(dims))
    coords = np.indices(dims).reshape(len(dims), n)
    sites = np.arange(n)
    out = []
    for axis, size in enumerate(dims):
        stride = n // int(np.prod(dims[: axis + 1]))
        inner = coords[axis] < size - 1
        out.append(np.stack([sites[inner], sites[inner] + stride], axis=1))
        if boundary == "periodic" and size >= 3:
            last = coords[axis] == size - 1
            out.append(np.stack([sites[last], sites[last] - (size - 1) * stride], axis=1))
    return np.concatenate(out).astype(np.int64) if out else np.zeros((0, 2), np.int64)


def _second_neighbors(dims, edges, diagonal_only: bool) -> dict[tuple[int, int], int]:
    """Number of paths ``i - j - k`` (``i != k``) for each unordered pair ``{i, k}``."""
    n = int(np.prod(dims))
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(int(v))
        adj[v].append(int(u))
    coords = np.indices(dims).reshape(len(dims), n).T
    paths: dict[tuple[int, int], int] = {}
    for j in range(n):
        nb = adj[j]
        for x in range(len(nb)):
            for y in range(x + 1, len(nb)):
                i, k = min(nb[x], nb[y]), max(nb[x], nb[y])
                if i == k:
                    continue
                if diagonal_only and np.count_nonzero(coords[i] != coords[k]) != 2:
                    continue
                paths[(i, k)] = paths.get((i, k), 0) + 1
    return paths


@dataclass(frozen=True)
class BoltzmannModel:
    """Unnormalised density ``exp(alpha T1 + beta T2 + gamma T3)``.

    Supplying ``vertex_alphas`` (one per site) and/or ``edge_betas`` (one per
    edge of ``interaction_edges``) switches to the non-homogeneous density
    ``exp(sum alpha_i y_i + sum beta_ij |y_i - y_j|)``; a missing array is
    filled with the scalar.  ``beta`` multiplies the number of disagreeing
    edges as written, so clustering needs ``beta < 0``.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    t3_kind: str = "none"
    vertex_alphas: Optional[np.ndarray] = None
    edge_betas: Optional[np.ndarray] = None
    boundary: str = "free"

    def __post_init__(self):
        if self.t3_kind not in T3_KINDS:
            raise ValueError(f"t3_kind must be one of {T3_KINDS}")
        if self.boundary not in ("free", "periodic"):
            raise ValueError("boundary must be 'free' or 'periodic'")

    @property
    def homogeneous(self) -> bool:
        return self.vertex_alphas is None and self.edge_betas is None

    def _params(self, dims):
        n = int(np.prod(dims))
        edges = interaction_edges(dims, self.boundary)
        alphas = np.full(n, self.alpha) if self.vertex_alphas is None else np.asarray(self.vertex_alphas, float)
        betas = np.full(len(edges), self.beta) if self.edge_betas is None else np.asarray(self.edge_betas, float)
        if alphas.shape != (n,) or betas.shape != (len(edges),):
            raise ValueError(f"need {n} vertex parameters and {len(edges)} edge parameters")
        return edges, alphas, betas

    def t3(self, grid) -> float:
        y = np.asarray(grid).reshape(-1).astype(np.int64)
        if self.t3_kind == "none":
            return 0.0
        if self.t3_kind == "overall_parity":
            return float(y.sum() % 2 == 0)
        dims = np.shape(grid)
        edges = interaction_edges(dims, self.boundary)
        paths = _second_neighbors(dims, edges, self.t3_kind == "diagonal")
        return float(sum(w * abs(y[i] - y[k]) for (i, k), w in paths.items()))

    def log_weight(self, grid) -> float:
        """``log`` of the unnormalised density at ``grid``."""
        grid = np.asarray(grid)
        edges, alphas, betas = self._params(grid.shape)
        y = grid.reshape(-1).astype(np.int64)
        val = float(alphas @ y) + float(betas @ np.abs(y[edges[:, 0]] - y[edges[:, 1]]))
        return val + self.gamma * self.t3(grid)

    def compile(self, dims):
        """Per-site tables for the single-flip kernel."""
        n = int(np.prod(dims))
        edges, alphas, betas = self._params(dims)
        nbr_lists: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (u, v), w in zip(edges, betas):
            nbr_lists[u].append((int(v), float(w)))
            nbr_lists[v].append((int(u), float(w)))
        nbr, nbr_w = _pad(nbr_lists)
        second: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        if self.t3_kind in ("second_nearest", "diagonal") and self.gamma != 0.0:
            for (i, k), c in _second_neighbors(dims, edges, self.t3_kind == "diagonal").items():
                second[i].append((k, self.gamma * c))
                second[k].append((i, self.gamma * c))
        nbr2, nbr2_w = _pad(second)
        gamma_parity = self.gamma if self.t3_kind == "overall_parity" else 0.0
        return alphas, nbr, nbr_w, nbr2, nbr2_w, float(gamma_parity)


def _pad(lists):
    width = max([len(x) for x in lists] + [1])
    idx = np.full((len(lists), width), -1, dtype=np.int32)
    w = np.zeros((len(lists), width), dtype=np.float64)
    for p, row in enumerate(lists):
        for k, (q, val) in enumerate(row):
            idx[p, k] = q
            w[p, k] = val
    return idx, w


def boltzmann_trajectory(model: BoltzmannModel, shape: LatticeShape, sweeps: int, seed: int = 0,
                         init: Optional[Configuration] = None, record_every: int = 1):
    """Single-site Metropolis for ``model``; returns ``(recorded_states, final_state)``.

    One sweep is ``n_sites`` proposals at uniformly chosen sites.  Row ``r`` of
    ``recorded_states`` is the state after ``(r + 1) * record_every`` sweeps.
    """
    if shape.zero_clamped:
        raise ValueError("the Boltzmann generator runs on free lattices")
    rng = chain_rng(seed, 0)
    if init is None:
        cells = rng.integers(0, 2, size=shape.n_sites).astype(np.uint8)
    else:
        cells = init.cells.copy()
    tables = model.compile(shape.dims)
    n_rec = sweeps // record_every if record_every else 0
    out = np.empty((n_rec, shape.n_sites), dtype=np.uint8)
    # chunks are whole multiples of record_every so the kernel's local count lines up
    unit = record_every or 1
    per_chunk = max(unit, (max(1, _CHUNK_STEPS // shape.n_sites) // unit) * unit)
    done, r = 0, 0
    while done < sweeps:
        k = min(per_chunk, sweeps - done)
        words = rng.bit_generator.random_raw(2 * k * shape.n_sites)
        r += _kernels.metropolis_sweeps(cells, *tables, words, unit, out[r:])
        done += k
    return out[:r], Configuration(shape, cells)


def generate_boltzmann(model: BoltzmannModel, shape: LatticeShape, sweeps: int, seed: int = 0,
                       init: Optional[Configuration] = None) -> Configuration:
    """Final state of ``sweeps`` Metropolis sweeps targeting ``model``."""
    _, final = boltzmann_trajectory(model, shape, sweeps, seed, init, record_every=0)
    return final
