"""Exact conditional goodness-of-fit tests for binary data on finite lattices.

The sufficient statistics of the Ising-type model are the number of ones
``T1`` and the number of disagreeing neighbour pairs ``T2``.  Under the model,
the configurations sharing the observed ``(T1, T2)`` are equally likely, so a
test statistic can be calibrated by sampling that set uniformly with a
simple-swap Markov chain.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    Components,
    Configuration,
    FiberId,
    InvalidSwapError,
    LatticeShape,
    apply_swap,
    connected_components,
    suff_stats,
    to_spin_stats,
)
from .sampler import (  # noqa: E402
    BoltzmannModel,
    ChainRun,
    ChainSettings,
    expanded_contains,
    find_fiber_member,
    generate_boltzmann,
    run_chain,
    run_chains,
    step,
)
from .statistics import (  # noqa: E402
    Motif,
    StatDescriptor,
    SubtableScheme,
    count_motif,
    default_descriptors,
    evaluate,
    non_homogeneity,
    sample_disjoint_pairs,
)
from .inference import (  # noqa: E402
    Diagnostics,
    PosteriorSummary,
    UnderSampledError,
    autocorrelation,
    gelman_rubin,
    mc_pvalue,
    posterior_summary,
    run_test,
)
