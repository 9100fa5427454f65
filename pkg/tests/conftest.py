import numpy as np
import pytest

from ising_gof import Configuration, LatticeShape

# Figure 1 configuration, listed column by column
FIGURE1_COLUMNS = [0, 0, 0, 0, 0,
                   0, 1, 1, 1, 0,
                   0, 0, 1, 0, 0,
                   0, 1, 0, 1, 0,
                   0, 0, 0, 0, 0]


@pytest.fixture
def figure1():
    grid = np.array(FIGURE1_COLUMNS, dtype=np.uint8).reshape(5, 5).T
    return Configuration.from_grid(grid)


def block_config(shape, top_left, side=2):
    grid = np.zeros(shape.dims, dtype=np.uint8)
    r, c = top_left
    grid[r:r + side, c:c + side] = 1
    return Configuration(shape, grid)


@pytest.fixture
def figure2_pair():
    """The two interior 2x2-block states of S(4, 8) on the free 4x6 lattice."""
    shape = LatticeShape((4, 6))
    return block_config(shape, (1, 1)), block_config(shape, (1, 3))
