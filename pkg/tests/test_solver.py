"""
Tests for initialization, the slab and planar minimizers and the gradient check.
"""
import numpy as np
import pytest

from slabvortex.domain import Disk, extrude, make_domain, power_law_datum
from slabvortex.energy import energy_full, vertical_average
from slabvortex.fields import DirectorField, ShapeError
from slabvortex.models import DescentMetric, SolveOptions
from slabvortex.params import ScalingParams
from slabvortex.solver import (
    InvalidPerturbationError,
    el_residual,
    gradient_check,
    initial_director,
    initial_planar,
    minimize_full,
    minimize_gl,
)
from slabvortex.vortex import degree_on_loop, locate_defects, square_loop


@pytest.fixture(scope="module")
def coarse_grid():
    """Unit disk at 16 cells with three layers."""
    return extrude(make_domain(Disk(1.0), 16), 3)


def tangential(U: DirectorField, seed: int) -> np.ndarray:
    """Random direction tangent to the sphere, zero off the free nodes."""
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(U.values.shape)
    phi = r - np.sum(r * U.values, axis=-1, keepdims=True) * U.values
    phi[~U.grid.free_mask()] = 0.0
    return phi


class TestInitialDirector:
    """Tests for initial_director and initial_planar."""

    def test_admissible(self, slab_grid, hedgehog):
        """The start is unit-valued and carries (g, 0) on the lateral nodes."""
        U = initial_director(slab_grid, hedgehog, noise=0.1, seed=4)
        assert U.norm_violations() == []
        assert U.lateral_violations(hedgehog) == []

    def test_degree_of_average(self, slab_grid, hedgehog):
        """The vertical average winds once around the center."""
        u = vertical_average(initial_director(slab_grid, hedgehog))
        assert degree_on_loop(u, square_loop(slab_grid.base, (0.0, 0.0), 6)) == 1

    def test_noise_is_seeded(self, slab_grid, hedgehog):
        """Equal seeds give equal fields, different seeds differ."""
        a = initial_director(slab_grid, hedgehog, noise=0.1, seed=1)
        b = initial_director(slab_grid, hedgehog, noise=0.1, seed=1)
        c = initial_director(slab_grid, hedgehog, noise=0.1, seed=2)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_split_seeds(self, slab_grid):
        """A degree-two datum with split_radius starts from two unit vortices."""
        g = power_law_datum(slab_grid.base, 2)
        u = vertical_average(initial_director(slab_grid, g, split_radius=0.4))
        assert degree_on_loop(u, square_loop(slab_grid.base, (0.4, 0.0), 2)) == 1
        assert degree_on_loop(u, square_loop(slab_grid.base, (-0.4, 0.0), 2)) == 1
        assert degree_on_loop(u, square_loop(slab_grid.base, (0.0, 0.0), 9)) == 2

    def test_initial_planar(self, disk_domain, hedgehog):
        """The planar start vanishes at the seed and matches g on the boundary."""
        u = initial_planar(disk_domain, hedgehog)
        i, j = disk_domain.nearest_node((0.0, 0.0))
        assert np.allclose(u.values[i, j], 0.0)
        bi, bj = disk_domain.boundary_index.T
        assert np.allclose(u.values[bi, bj], hedgehog.values)


class TestGradientCheck:
    """Tests for gradient_check."""

    def test_second_order_agreement(self, slab_grid, hedgehog, params, make_random_director):
        """Central differences along V(t) agree with the first variation at order two."""
        U = make_random_director(slab_grid, hedgehog, seed=7, smooth=True)
        for seed in range(2):
            report = gradient_check(U, params, tangential(U, seed))
            assert report.observed_order >= 1.8
            assert report.direction_norm > 0.0

    def test_rejects_normal_direction(self, slab_grid, hedgehog, params, make_random_director):
        """A direction along U itself is not tangential."""
        U = make_random_director(slab_grid, hedgehog, seed=7)
        phi = np.array(U.values)
        phi[~slab_grid.free_mask()] = 0.0
        with pytest.raises(InvalidPerturbationError, match="not tangential"):
            gradient_check(U, params, phi)

    def test_rejects_lateral_direction(self, slab_grid, hedgehog, params, make_random_director):
        """Moving a Dirichlet node is rejected."""
        U = make_random_director(slab_grid, hedgehog, seed=7)
        phi = np.zeros(U.values.shape)
        bi, bj = slab_grid.base.boundary_index[0]
        phi[bi, bj, 1] = (0.0, 0.0, 1.0)
        with pytest.raises(InvalidPerturbationError, match="Dirichlet"):
            gradient_check(U, params, phi)


class TestMinimizeFull:
    """Tests for minimize_full on coarse grids."""

    def test_degree_zero_relaxes_to_constant(self, coarse_grid):
        """A constant datum leads to zero energy and no defects."""
        g = power_law_datum(coarse_grid.base, 0)
        p = ScalingParams(eps=0.3, eta=0.2)
        init = initial_director(coarse_grid, g, noise=0.2, seed=1)
        U, report = minimize_full(init, g, p)
        assert report.converged
        assert report.final_energy.total < 1e-6
        assert len(locate_defects(vertical_average(U))) == 0

    def test_degree_one_descent(self, coarse_grid):
        """Energy decreases monotonically and the constraints survive."""
        g = power_law_datum(coarse_grid.base, 1)
        p = ScalingParams(eps=0.3, eta=0.2)
        init = initial_director(coarse_grid, g, noise=0.05, seed=0)
        U, report = minimize_full(init, g, p)

        trace = np.array(report.energy_trace)
        assert np.all(np.diff(trace) <= 0.0)
        assert report.converged
        assert report.stop_reason == "converged"
        assert U.norm_violations() == []
        assert U.lateral_violations(g) == []
        assert el_residual(U, p) == pytest.approx(report.residual, rel=1e-9)
        assert report.final_energy.total == pytest.approx(energy_full(U, p).total, rel=1e-12)

    def test_iteration_cap(self, coarse_grid):
        """Hitting max_iters returns an unconverged report."""
        g = power_law_datum(coarse_grid.base, 1)
        p = ScalingParams(eps=0.3, eta=0.2)
        opts = SolveOptions(max_iters=5, metric=DescentMetric.L2)
        _, report = minimize_full(initial_director(coarse_grid, g), g, p, opts)
        assert not report.converged
        assert report.iterations == 5
        assert report.stop_reason == "max_iters"
        assert report.energy_trace[-1] <= report.energy_trace[0]

    def test_foreign_datum(self, coarse_grid, hedgehog):
        """A datum built on another grid raises ShapeError."""
        init = initial_director(coarse_grid, power_law_datum(coarse_grid.base, 1))
        with pytest.raises(ShapeError):
            minimize_full(init, hedgehog, ScalingParams(eps=0.3, eta=0.2))


class TestMinimizeGL:
    """Tests for the planar Ginzburg-Landau minimizer."""

    def test_single_vortex_at_center(self):
        """The degree-one GL minimizer on the disk has one vortex near the center."""
        domain = make_domain(Disk(1.0), 24)
        g = power_law_datum(domain, 1)
        u, report = minimize_gl(initial_planar(domain, g), g, eps=0.2)
        assert report.converged
        assert np.all(np.diff(report.energy_trace) <= 0.0)
        found = locate_defects(u)
        assert found.charges.tolist() == [1]
        assert np.hypot(found.items[0].x, found.items[0].y) <= 2.0 * domain.cell_size

    def test_rejects_bad_eps(self, disk_domain, hedgehog):
        """eps must be positive."""
        with pytest.raises(ValueError):
            minimize_gl(initial_planar(disk_domain, hedgehog), hedgehog, eps=0.0)
