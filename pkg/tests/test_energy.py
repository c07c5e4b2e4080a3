"""
Tests for the slab energy, its gradient, vertical averages and the inequality checks.
"""
import math

import numpy as np
import pytest

from slabvortex.domain import extrude, power_law_datum
from slabvortex.energy import (
    check_average_bound,
    check_gl_bound,
    energy_full,
    energy_gradient,
    energy_restricted,
    gl_energy,
    jensen_gap,
    vertical_average,
)
from slabvortex.fields import DirectorField, PlanarField, ShapeError
from slabvortex.models import EnergyBreakdown
from slabvortex.params import ScalingParams


def _columns(grid, func):
    """Director field from func(X, Y, Z) returning three broadcastable components."""
    return DirectorField.from_function(
        grid, lambda X, Y, Z: np.stack(np.broadcast_arrays(*func(X, Y, Z)), axis=-1)
    )


class TestEnergyFull:
    """Tests for energy_full on fields with known discrete energies."""

    def test_constant_planar_field_is_free(self, square_domain, params):
        """A constant in-plane field has zero energy."""
        grid = extrude(square_domain, 4)
        breakdown = energy_full(DirectorField.constant(grid, (0.6, 0.8, 0.0)), params)
        assert breakdown.total == 0.0

    def test_vertical_field_pays_anchoring(self, square_domain, params):
        """U = e3 costs area / eps^2 in anchoring and nothing else."""
        grid = extrude(square_domain, 4)
        breakdown = energy_full(DirectorField.constant(grid, (0.0, 0.0, 1.0)), params)
        assert breakdown.anchoring == pytest.approx(1.0 / params.eps ** 2, rel=1e-12)
        assert breakdown.bulk_horizontal == 0.0
        assert breakdown.bulk_vertical == 0.0

    def test_twist_across_thickness(self, square_domain, params):
        """An in-plane twist in x3 costs the chord form of the vertical energy."""
        grid = extrude(square_domain, 4)
        theta = 0.9
        U = _columns(grid, lambda X, Y, Z: (np.cos(theta * Z), np.sin(theta * Z), 0.0 * X))
        expected = (grid.n_layers - 1) * 4.0 * math.sin(0.5 * theta * grid.hz) ** 2 / (2.0 * params.eta ** 2 * grid.hz)
        breakdown = energy_full(U, params)
        assert breakdown.bulk_vertical == pytest.approx(expected, rel=1e-12)
        assert breakdown.bulk_horizontal == pytest.approx(0.0, abs=1e-14)

    def test_in_plane_rotation(self, square_domain, params):
        """A rotation along x costs 2 sin^2(a hx / 2) / hx^2 on the unit square."""
        grid = extrude(square_domain, 3)
        a = 2.0
        U = _columns(grid, lambda X, Y, Z: (np.cos(a * X) + 0.0 * Z, np.sin(a * X) + 0.0 * Z, 0.0 * X + 0.0 * Z))
        hx = square_domain.hx
        expected = 2.0 * math.sin(0.5 * a * hx) ** 2 / hx ** 2
        assert energy_full(U, params).bulk_horizontal == pytest.approx(expected, rel=1e-12)

    def test_sign_flip_invariance(self, slab_grid, hedgehog, params, make_random_director):
        """(U1, -U2, U3) has the same energy as U."""
        U = make_random_director(slab_grid, hedgehog, seed=3)
        assert energy_full(U.mirrored(), params).total == pytest.approx(energy_full(U, params).total, rel=1e-12)
        assert energy_full(U.symmetrized(), params).anchoring == pytest.approx(energy_full(U, params).anchoring, rel=1e-12)

    def test_rejects_foreign_params(self, slab_grid):
        """Anything but ScalingParams raises ShapeError."""
        with pytest.raises(ShapeError):
            energy_full(DirectorField.constant(slab_grid, (1.0, 0.0, 0.0)), (0.2, 0.1))


class TestEnergyRestricted:
    """Tests for energy_restricted."""

    def test_additive_over_partition(self, slab_grid, hedgehog, params, make_random_director):
        """Restrictions to a set and its complement add up to the full energy."""
        U = make_random_director(slab_grid, hedgehog, seed=5)
        active = slab_grid.base.active_mask
        X, _ = slab_grid.base.coordinates()
        left = active & (X < 0.1)
        right = active & ~(X < 0.1)
        total = energy_restricted(U, params, left) + energy_restricted(U, params, right)
        full = energy_full(U, params)
        assert total.total == pytest.approx(full.total, rel=1e-12)
        assert total.anchoring == pytest.approx(full.anchoring, rel=1e-12)

    def test_empty_set(self, slab_grid, params):
        """An empty restriction is the zero breakdown."""
        U = DirectorField.constant(slab_grid, (1.0, 0.0, 0.0))
        assert energy_restricted(U, params, np.zeros((0, 2), dtype=int)) == EnergyBreakdown.zero()

    def test_index_list_matches_mask(self, slab_grid, hedgehog, params, make_random_director):
        """Node index arrays and boolean masks select the same set."""
        U = make_random_director(slab_grid, hedgehog, seed=6)
        nodes = np.argwhere(slab_grid.base.interior_mask)[:40]
        mask = np.zeros(slab_grid.base.node_shape, dtype=bool)
        mask[nodes[:, 0], nodes[:, 1]] = True
        assert energy_restricted(U, params, nodes).total == pytest.approx(energy_restricted(U, params, mask).total)

    def test_exterior_nodes_rejected(self, slab_grid, params):
        """Selecting an exterior node raises ShapeError."""
        U = DirectorField.constant(slab_grid, (1.0, 0.0, 0.0))
        with pytest.raises(ShapeError):
            energy_restricted(U, params, np.array([[0, 0]]))


class TestEnergyGradient:
    """Tests for the Euclidean gradient of the discrete energy."""

    def test_matches_central_difference(self, slab_grid, hedgehog, params, make_random_director):
        """The energy is quadratic, so central differences reproduce the gradient."""
        U = make_random_director(slab_grid, hedgehog, seed=8)
        rng = np.random.default_rng(1)
        direction = rng.standard_normal(U.values.shape)
        t = 0.1
        plus = energy_full(U.with_values(U.values + t * direction), params).total
        minus = energy_full(U.with_values(U.values - t * direction), params).total
        fd = (plus - minus) / (2.0 * t)
        assert float(np.sum(energy_gradient(U, params) * direction)) == pytest.approx(fd, rel=1e-8)


class TestAverages:
    """Tests for vertical_average, gl_energy and jensen_gap."""

    def test_average_of_layered_field(self, slab_grid, hedgehog, make_random_director):
        """An x3-independent field averages to its own planar part."""
        U = make_random_director(slab_grid, hedgehog, seed=2)
        column = np.repeat(U.values[:, :, :1, :], slab_grid.n_layers, axis=2)
        flat = U.with_values(column)
        assert np.allclose(vertical_average(flat).values, flat.values[:, :, 0, :2])
        assert jensen_gap(flat) == pytest.approx(0.0, abs=1e-8)

    def test_jensen_gap_non_negative(self, slab_grid, hedgehog, make_random_director):
        """Averaging never increases the planar Dirichlet energy."""
        for seed in range(3):
            assert jensen_gap(make_random_director(slab_grid, hedgehog, seed=seed)) >= -1e-10

    def test_gl_energy_extremes(self, disk_domain):
        """Unit constants are free; the zero field pays area / (4 eps^2)."""
        eps = 0.25
        assert gl_energy(PlanarField.constant(disk_domain, (1.0, 0.0)), eps) == pytest.approx(0.0, abs=1e-14)
        zero = gl_energy(PlanarField.constant(disk_domain, (0.0, 0.0)), eps)
        assert zero == pytest.approx(disk_domain.area / (4.0 * eps ** 2), rel=1e-12)


class TestInequalityChecks:
    """Tests for the coupling and averaging inequalities."""

    def test_gl_bound_on_random_fields(self, slab_grid, hedgehog, params, make_random_director):
        """GL(u_bar) <= F(U) inside the regime."""
        for seed in range(5):
            report = check_gl_bound(make_random_director(slab_grid, hedgehog, seed=seed), params)
            assert report.holds
            assert report.factor == 1.0

    def test_sharp_gl_bound(self, slab_grid, hedgehog, make_random_director):
        """With c* given and admissible, the sharper bound is checked too."""
        p = ScalingParams(eps=0.4, eta=0.1)
        report = check_gl_bound(make_random_director(slab_grid, hedgehog, seed=11), p, c_star=0.5)
        assert report.sharp_holds is True
        assert report.sharp_lhs >= report.lhs

    def test_sharp_bound_skipped_when_inapplicable(self, slab_grid, hedgehog, params, make_random_director):
        """c* too large for the pair leaves the sharp fields empty."""
        report = check_gl_bound(make_random_director(slab_grid, hedgehog, seed=12), params, c_star=0.9)
        assert report.sharp_holds is None

    def test_factor_outside_regime(self, slab_grid, hedgehog, make_random_director):
        """Outside the regime the bound is scaled by 2 eta^2 / eps^2."""
        p = ScalingParams(eps=0.1, eta=0.2)
        report = check_gl_bound(make_random_director(slab_grid, hedgehog, seed=4), p)
        assert report.factor == pytest.approx(8.0)
        assert report.holds

    def test_average_bound_on_smooth_fields(self, slab_grid, hedgehog, make_random_director):
        """Every layer stays within ||d3 U|| / sqrt(2) of the average."""
        for seed in range(5):
            report = check_average_bound(make_random_director(slab_grid, hedgehog, seed=seed, smooth=True))
            assert report.holds
            assert len(report.layer_distances) == slab_grid.n_layers

    def test_average_bound_trivial_for_layered_fields(self, disk_domain):
        """x3-independent fields have zero distances and zero ratio."""
        grid = extrude(disk_domain, 3)
        U = DirectorField.constant(grid, (0.0, 1.0, 0.0))
        report = check_average_bound(U)
        assert report.ratio == 0.0
        assert report.holds

    def test_degree_two_datum(self, disk_domain, params, make_random_director):
        """The checks do not depend on the datum's degree."""
        grid = extrude(disk_domain, 3)
        g = power_law_datum(disk_domain, 2)
        U = make_random_director(grid, g, seed=9)
        assert check_gl_bound(U, params).holds
        assert check_average_bound(U).holds
