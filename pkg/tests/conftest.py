"""
Shared fixtures: small grids, lateral data and randomized admissible fields.
"""
import numpy as np
import pytest

from slabvortex.domain import Disk, Rectangle, extrude, make_domain, power_law_datum
from slabvortex.fields import DirectorField
from slabvortex.params import ScalingParams


@pytest.fixture(scope="session")
def disk_domain():
    """Unit disk at 32 cells across."""
    return make_domain(Disk(1.0), 32)


@pytest.fixture(scope="session")
def square_domain():
    """Unit square at 32 cells per side (nodes on the sides)."""
    return make_domain(Rectangle(1.0, 1.0), 32)


@pytest.fixture(scope="session")
def slab_grid(disk_domain):
    """Unit disk slab with four layers."""
    return extrude(disk_domain, 4)


@pytest.fixture(scope="session")
def hedgehog(disk_domain):
    """Degree-one datum g = e^{i theta} on the unit disk."""
    return power_law_datum(disk_domain, 1)


@pytest.fixture
def params():
    """A pair inside the regime sqrt(2) eta <= eps."""
    return ScalingParams(eps=0.2, eta=0.1)


def random_director(grid, datum, seed: int, smooth: bool = False) -> DirectorField:
    """
    Random unit field with lateral data (g, 0).

    With smooth=True the field is a few low Fourier modes in (x, y, x3)
    instead of independent node values.
    """
    rng = np.random.default_rng(seed)
    if smooth:
        X, Y = grid.base.coordinates()
        Z = grid.z
        X, Y, Z = X[:, :, None], Y[:, :, None], Z[None, None, :]
        components = []
        for _ in range(3):
            a, b, c, phase = rng.uniform(-2.0, 2.0, size=4)
            components.append(np.sin(a * X + b * Y + c * Z + phase) + rng.uniform(-0.5, 0.5))
        values = np.stack(np.broadcast_arrays(*components), axis=-1)
    else:
        values = rng.standard_normal(grid.node_shape + (3,))
    values = values / np.maximum(np.linalg.norm(values, axis=-1, keepdims=True), 1e-12)
    bi, bj = grid.base.boundary_index.T
    values[bi, bj, :, :2] = datum.values[:, None, :]
    values[bi, bj, :, 2] = 0.0
    return DirectorField(grid, values)


@pytest.fixture
def make_random_director():
    """Factory for randomized admissible director fields."""
    return random_director
