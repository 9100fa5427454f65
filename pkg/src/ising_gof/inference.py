"""Monte Carlo p-values, posterior summaries and multi-chain diagnostics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lattice import Configuration, FiberId
from .sampler import ChainRun, ChainSettings, run_chain, run_chains
from .statistics import StatDescriptor, Tracking, evaluate

QUANTILE_LEVELS = (0.025, 0.05, 0.5, 0.95, 0.975)
MIN_ON_FIBER = 100
OBSERVED_STREAM = (1 << 32, 0)


class UnderSampledError(RuntimeError):
    """A chain recorded too few on-fiber samples."""

    def __init__(self, chain: int, n: int, minimum: int = MIN_ON_FIBER):
        super().__init__(f"chain {chain} recorded {n} on-fiber samples; at least {minimum} are required")
        self.chain = chain
        self.n = n


def mc_pvalue(observed: float, samples, sided: str = "two_sided", ties: str = "conservative",
              rng: Optional[np.random.Generator] = None) -> float:
    """Monte Carlo p-value with the ``(1 + hits) / (1 + n)`` correction.

    With ``ties="conservative"`` samples equal to ``observed`` count as at
    least as extreme.  ``ties="randomized"`` places the observed value at a
    uniformly random position among its ties, which makes the p-value exactly
    uniform on ``{1, ..., n + 1} / (n + 1)`` when the observed value is
    exchangeable with the samples.  The two-sided value doubles the smaller
    tail and caps it at 1.
    """
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    n = s.size
    if n == 0:
        raise ValueError("need at least one sample")
    if sided not in ("lower", "upper", "two_sided"):
        raise ValueError(f"sided must be 'lower', 'upper' or 'two_sided', got {sided!r}")
    above = np.count_nonzero(s > observed)
    below = np.count_nonzero(s < observed)
    equal = n - above - below
    if ties == "conservative":
        upper = (1 + above + equal) / (1 + n)
        lower = (1 + below + equal) / (1 + n)
    elif ties == "randomized":
        rng = rng if rng is not None else np.random.default_rng()
        v = int(rng.integers(1, equal + 2))
        upper = (above + v) / (1 + n)
        lower = (below + equal + 2 - v) / (1 + n)
    else:
        raise ValueError("ties must be 'conservative' or 'randomized'")
    if sided == "upper":
        return float(upper)
    if sided == "lower":
        return float(lower)
    return float(min(1.0, 2 * min(upper, lower)))


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    sd: float
    quantiles: dict
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "n": self.n,
                "quantiles": {str(k): v for k, v in self.quantiles.items()}}


def posterior_summary(samples) -> PosteriorSummary:
    """Mean, sd (``n - 1`` denominator) and nearest-rank quantiles."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise ValueError("posterior_summary needs at least two samples")
    q = np.quantile(x, QUANTILE_LEVELS, method="inverted_cdf")
    return PosteriorSummary(float(x.mean()), float(x.std(ddof=1)),
                            {lvl: float(v) for lvl, v in zip(QUANTILE_LEVELS, q)}, int(x.size))


def gelman_rubin(chains: Sequence) -> float:
    """Split-half potential scale reduction factor.

    Each chain is cut into two halves of length ``L`` (a trailing odd element
    is dropped); ``W`` is the mean within-half variance and ``B / L`` the
    variance of the half means.  Returns ``inf`` when ``W = 0``.
    """
    if len(chains) < 2:
        raise ValueError("need at least two chains")
    arrays = [np.asarray(c, dtype=np.float64).reshape(-1) for c in chains]
    length = min(a.size for a in arrays)
    if length < 4:
        raise ValueError("each chain needs at least four draws")
    half = length // 2
    halves = np.array([part for a in arrays for part in (a[:half], a[half:2 * half])])
    w = halves.var(axis=1, ddof=1).mean()
    b_over_l = halves.mean(axis=1).var(ddof=1)
    if w == 0:
        return float("inf") if b_over_l > 0 else float("nan")
    return float(np.sqrt(((half - 1) / half * w + b_over_l) / w))


@dataclass(frozen=True)
class Autocorrelation:
    lags: np.ndarray
    values: np.ndarray
    degenerate: bool

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(k), float(v)) for k, v in zip(self.lags, self.values)]


def autocorrelation(series, max_lag: int) -> Autocorrelation:
    """Biased autocovariance normalised by lag 0, for lags ``0 .. max_lag``.

    A constant series has no variance; its values are reported as 0 with
    ``degenerate=True``.
    """
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    if x.size <= max_lag:
        raise ValueError("series must be longer than max_lag")
    lags = np.arange(max_lag + 1)
    x = x - x.mean()
    c0 = x @ x
    if c0 == 0:
        return Autocorrelation(lags, np.zeros(max_lag + 1), True)
    n = x.size
    # FFT of the zero-padded series gives all lagged sums at once
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f), 2 * n)[: max_lag + 1]
    values = np.clip(acov / c0, -1.0, 1.0)
    values[0] = 1.0
    return Autocorrelation(lags, values, False)


def ess(chains: Sequence) -> float:
    """Effective sample size of pooled chains, summing autocorrelations in
    pairs until the first negative pair sum (Geyer's initial positive sequence)."""
    arrays = [np.asarray(c, dtype=np.float64).reshape(-1) for c in chains]
    total = sum(a.size for a in arrays)
    rho_sum = 0.0
    weights = 0
    for a in arrays:
        if a.size < 4:
            continue
        ac = autocorrelation(a, a.size - 1)
        if ac.degenerate:
            continue
        r = ac.values
        s = 0.0
        for k in range(1, r.size - 1, 2):
            pair = r[k] + r[k + 1]
            if pair < 0:
                break
            s += pair
        rho_sum += a.size * s
        weights += a.size
    if weights == 0:
        return float(total)
    tau = 1 + 2 * rho_sum / weights
    return float(total / max(tau, 1e-12))


@dataclass(frozen=True)
class Diagnostics:
    psrf: float
    autocorrelation: list
    ess: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"psrf": _json_float(self.psrf), "ess": self.ess, "degenerate": self.degenerate,
                "autocorrelation": [[k, v] for k, v in self.autocorrelation]}


def diagnose(chains: Sequence, max_lag: int = 20) -> Diagnostics:
    """R-hat on equal-length truncations, pooled autocorrelation and ESS."""
    arrays = [np.asarray(c, dtype=np.float64).reshape(-1) for c in chains]
    length = min(a.size for a in arrays)
    psrf = gelman_rubin([a[:length] for a in arrays]) if len(arrays) >= 2 else float("nan")
    lag = min(max_lag, length - 1)
    acs = [autocorrelation(a, lag) for a in arrays]
    live = [ac.values for ac in acs if not ac.degenerate]
    mean_ac = np.mean(live, axis=0) if live else np.zeros(lag + 1)
    return Diagnostics(psrf, [(int(k), float(v)) for k, v in enumerate(mean_ac)], ess(arrays), not live)


def _json_float(x: float):
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "inf"
    return float(x)


@dataclass
class StatisticResult:
    descriptor: StatDescriptor
    observed: float
    pvalue: float
    summary: PosteriorSummary
    diagnostics: Diagnostics

    def to_dict(self) -> dict:
        return {"statistic": self.descriptor.to_dict(), "observed": self.observed, "pvalue": self.pvalue,
                "sided": self.descriptor.sided, "posterior": self.summary.to_dict(),
                "diagnostics": self.diagnostics.to_dict()}


@dataclass
class TestReport:
    fiber: FiberId
    settings: ChainSettings
    n_chains: int
    results: list[StatisticResult]
    chain_samples: list[np.ndarray] = field(repr=False)
    acceptance_rates: list[float]
    on_fiber_fractions: list[float]

    __test__ = False  # not a pytest class

    @property
    def pooled(self) -> np.ndarray:
        return np.vstack(self.chain_samples)

    def result(self, name: str) -> StatisticResult:
        for r in self.results:
            if r.descriptor.label == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        s = self.settings
        return {
            "fiber": {"a": self.fiber.a, "b": self.fiber.b},
            "settings": {"mode": s.mode, "steps": s.steps, "burn_in": s.burn_in, "thinning": s.thinning,
                         "seed": s.seed, "record_policy": s.record_policy, "n_chains": self.n_chains},
            "chains": [{"chain": c, "n_samples": int(x.shape[0]), "acceptance_rate": a, "on_fiber_fraction": f}
                       for c, (x, a, f) in enumerate(zip(self.chain_samples, self.acceptance_rates,
                                                         self.on_fiber_fractions))],
            "statistics": [r.to_dict() for r in self.results],
        }


def run_test(observed: Configuration, descriptors: Sequence[StatDescriptor], settings: ChainSettings,
             n_chains: int = 3, workers: Optional[int] = None, min_samples: int = MIN_ON_FIBER) -> TestReport:
    """Exact conditional goodness-of-fit test of the fiber of ``observed``.

    Chains start from ``observed``; their on-fiber, post-burn-in, thinned
    records are pooled in chain order.  Statistics with fixed definitions are
    tracked inside the chain loop, resampling ones are evaluated per record.
    """
    fiber = FiberId(observed.t1, observed.t2)
    if settings.target is not None and settings.target != fiber:
        raise ValueError(f"settings target {settings.target} differs from the observed fiber {fiber}")
    if settings.record_policy != "on_fiber_only":
        raise ValueError("run_test pools on-fiber records only")
    descriptors = list(descriptors)
    tracked = [d for d in descriptors if d.kind == "motif_count" or not d.scheme.resample]
    loose = [d for d in descriptors if d not in tracked]
    tracking = Tracking(tracked, observed.shape) if tracked else None
    runs: list[ChainRun] = []

    def make_observer(chain):
        def observe(grid, k):
            return [evaluate(grid, d, (chain, k)) for d in loose]
        return observe

    if loose:
        # per-chain observers need the chain index, so submit one by one
        with ThreadPoolExecutor(max_workers=workers or 1) as pool:
            futs = [pool.submit(run_chain, observed, settings, chain=c, tracking=tracking,
                                observe=make_observer(c)) for c in range(n_chains)]
            runs = [f.result() for f in futs]
    else:
        runs = run_chains(observed, settings, n_chains, workers=workers, tracking=tracking)

    for run in runs:
        if run.n_samples < min_samples:
            raise UnderSampledError(run.chain, run.n_samples, min_samples)

    order = [tracked.index(d) if d in tracked else len(tracked) + loose.index(d) for d in descriptors]
    chain_samples = [run.samples[:, order] for run in runs]
    obs_tracked = tracking.values(observed.grid) if tracking else np.zeros(0)
    # resampled windows for the observed data come from a stream no chain can use
    observed_values = [float(obs_tracked[tracked.index(d)]) if d in tracked else evaluate(observed, d, OBSERVED_STREAM)
                       for d in descriptors]
    pooled = np.vstack(chain_samples)
    results = []
    for k, d in enumerate(descriptors):
        col = pooled[:, k]
        results.append(StatisticResult(
            d, observed_values[k], mc_pvalue(observed_values[k], col, d.sided), posterior_summary(col),
            diagnose([x[:, k] for x in chain_samples])))
    return TestReport(fiber, settings, n_chains, results, chain_samples,
                      [r.acceptance_rate for r in runs], [r.on_fiber_fraction for r in runs])
