"""
End-to-end minimizer structure along eps sweeps and the laws of the core problem.
"""
import math

import numpy as np
import pytest

from slabvortex.core import core_constant, core_energy
from slabvortex.domain import Disk, extrude, make_domain, power_law_datum
from slabvortex.energy import vertical_average
from slabvortex.experiments import plateau, reduced_energy
from slabvortex.harmonic import RenormalizedEnergy, minimize_renormalized
from slabvortex.models import SolveOptions
from slabvortex.params import ScalingParams, linear_schedule
from slabvortex.solver import initial_director, minimize_full
from slabvortex.vortex import locate_defects

pytestmark = pytest.mark.slow

K = 1.0 / math.sqrt(2.0)
EPS_LIST = [0.2, 0.1, 0.05]
OPTIONS = SolveOptions(max_iters=5000)


def sweep(degree: int, split_radius: float = 0.0):
    """Minimize on the unit disk at 128 cells x 8 layers along EPS_LIST with eta = eps / sqrt(2)."""
    grid = extrude(make_domain(Disk(1.0), 128), 8)
    g = power_law_datum(grid.base, degree)
    results = []
    for p in linear_schedule(K, EPS_LIST):
        init = initial_director(grid, g, split_radius=split_radius)
        U, report = minimize_full(init, g, p, OPTIONS)
        results.append((p, U, report))
    return grid, results


@pytest.fixture(scope="module")
def degree_one_sweep():
    return sweep(1)


@pytest.fixture(scope="module")
def degree_two_sweep():
    return sweep(2, split_radius=0.3)


class TestDegreeOneSweep:
    """Structure of the degree-one minimizers."""

    def test_single_centered_defect(self, degree_one_sweep):
        """The smallest eps has exactly one +1 defect within two cells of the center."""
        grid, results = degree_one_sweep
        _, U, _ = results[-1]
        found = locate_defects(vertical_average(U))
        assert found.charges.tolist() == [1]
        assert math.hypot(found.items[0].x, found.items[0].y) <= 2.0 * grid.base.cell_size

    def test_u3_has_one_sign(self, degree_one_sweep):
        """U3 does not change sign inside the slab."""
        grid, results = degree_one_sweep
        interior = np.repeat(grid.base.interior_mask[:, :, None], grid.n_layers, axis=2)
        for _, U, _ in results:
            u3 = U.perpendicular[interior]
            assert u3.min() >= -1e-8 or u3.max() <= 1e-8

    def test_energy_expansion(self, degree_one_sweep):
        """E(eps) plateaus and approaches W_g(0) + gamma."""
        grid, results = degree_one_sweep
        eps = [p.eps for p, _, _ in results]
        reduced = [reduced_energy(r.final_energy.total, 1, p.eps) for p, _, r in results]
        trend = plateau(eps, reduced)
        assert trend["spread"] < 0.10

        w_center = RenormalizedEnergy(grid.base, power_law_datum(grid.base, 1))(np.array([[0.0, 0.0]]))
        gamma = core_constant(K, [(0.4, 0.1), (0.8, 0.1)], opts=OPTIONS).gamma
        prediction = w_center + gamma
        assert reduced[-1] == pytest.approx(prediction, rel=0.15)


class TestDegreeTwoSweep:
    """Structure of the degree-two minimizers."""

    def test_two_unit_defects(self, degree_two_sweep):
        """The smallest eps splits into two +1 defects, symmetric about the center."""
        grid, results = degree_two_sweep
        _, U, _ = results[-1]
        found = locate_defects(vertical_average(U))
        assert found.charges.tolist() == [1, 1]
        a1, a2 = found.positions
        assert np.linalg.norm(a1 + a2) <= 2.0 * grid.base.cell_size

    def test_positions_near_renormalized_optimum(self, degree_two_sweep):
        """W_g at the detected positions is within 10% of its minimum."""
        grid, results = degree_two_sweep
        _, U, _ = results[-1]
        found = locate_defects(vertical_average(U))
        g = power_law_datum(grid.base, 2)
        detected = RenormalizedEnergy(grid.base, g)(found.positions, found.charges)
        optimum = minimize_renormalized(grid.base, g, 2)
        assert detected == pytest.approx(optimum.value, rel=0.10)


class TestCoreLaws:
    """Monotonicity, subadditivity and scaling of the cell problem."""

    @pytest.fixture(scope="class")
    def ladder(self):
        p = ScalingParams(eps=0.05, eta=K * 0.05)
        return [
            core_energy(sigma, p, resolution=round(5 * 2 * sigma / 0.05), opts=OPTIONS)
            for sigma in (0.2, 0.4, 0.8)
        ]

    def test_tilde_gamma_nonincreasing(self, ladder):
        """tilde gamma does not grow with sigma beyond 1%."""
        tildes = [s.tilde_gamma for s in ladder]
        for smaller, larger in zip(tildes, tildes[1:]):
            assert larger <= smaller + 0.01 * max(abs(smaller), 1.0)

    def test_subadditivity(self, ladder):
        """gamma(sigma2) <= gamma(sigma1) + pi log(sigma2 / sigma1)."""
        for a in ladder:
            for b in ladder:
                if b.sigma > a.sigma:
                    slack = 0.01 * max(abs(a.gamma_value), 1.0)
                    assert b.gamma_value <= a.gamma_value + math.pi * math.log(b.sigma / a.sigma) + slack

    def test_scaling(self, ladder):
        """gamma(sigma, eps) matches gamma(2 sigma, 2 eps) within 2%."""
        doubled = core_energy(0.4, ScalingParams(eps=0.1, eta=K * 0.1), resolution=40, opts=OPTIONS)
        assert doubled.gamma_value == pytest.approx(ladder[0].gamma_value, rel=0.02)
