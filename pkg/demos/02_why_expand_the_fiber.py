"""Why the swap chain needs room to move off the fiber.

On the free 4x6 lattice the fiber S(4, 8) holds 580 configurations.  Two of
them are a single 2x2 block, sitting in the interior at different columns.
Neither block can move by a single swap without changing T2, so a chain that
only accepts swaps within the fiber never leaves either of them.  Allowing T2
to wander by two and recording only the on-fiber visits joins everything up.

Run with ``python demos/02_why_expand_the_fiber.py``.
"""

import numpy as np

from ising_gof import ChainSettings, Configuration, FiberId, LatticeShape, run_chain
from ising_gof.oracle import enumerate_fiber, swap_graph_components

shape = LatticeShape((4, 6))
fiber = FiberId(4, 8)


def block(col):
    grid = np.zeros(shape.dims, dtype=np.uint8)
    grid[1:3, col:col + 2] = 1
    return Configuration(shape, grid)


left, right = block(1), block(3)
print("two members of S(4, 8):")
for a, b in zip(left.grid, right.grid):
    print("  " + "".join(".#"[v] for v in a) + "    " + "".join(".#"[v] for v in b))

# --- the swap graph, exactly ---------------------------------------------------
states = enumerate_fiber(shape, fiber)
for e in (0, 2):
    comps = swap_graph_components(states, e)
    sizes = sorted((len(c) for c in comps), reverse=True)
    print(f"\nexpansion e={e}: {len(comps)} component(s), sizes {sizes}")

# --- the same thing seen by a chain ------------------------------------------------
for mode in ("strict", "expanded"):
    run = run_chain(left, ChainSettings(mode=mode, steps=50_000, burn_in=1_000, thinning=10, seed=3),
                    keep_states=True)
    distinct = len({row.tobytes() for row in run.states})
    print(f"{mode:>8} chain: acceptance {run.acceptance_rate:.3f}, "
          f"{distinct} distinct fiber states among {run.n_samples} records")
