"""
Tests for the cell problem on B_sigma x (0, 1) and the core constant.
"""
import math

import pytest

from slabvortex.core import ResolutionError, core_constant, core_energy, core_table
from slabvortex.params import InvalidParameterError, ScalingParams

K_MAX = 1.0 / math.sqrt(2.0)
SMALL_LADDER = [(0.4, 0.2)]


class TestCoreEnergy:
    """Tests for core_energy."""

    def test_under_resolved(self):
        """Fewer than four cells per eps is refused."""
        with pytest.raises(ResolutionError, match="cells per eps"):
            core_energy(1.0, ScalingParams(eps=0.1, eta=0.05), resolution=16)

    def test_bad_sigma(self):
        """sigma must be positive."""
        with pytest.raises(ValueError):
            core_energy(0.0, ScalingParams(eps=0.1, eta=0.05), resolution=16)

    def test_small_cell(self):
        """A coarse cell problem converges and reports the reduced value."""
        p = ScalingParams(eps=0.2, eta=K_MAX * 0.2)
        sample = core_energy(0.4, p, resolution=16, n_layers=4)
        assert sample.report.converged
        assert sample.gamma_value > 0.0
        assert sample.tilde_gamma == pytest.approx(sample.gamma_value - math.pi * math.log(2.0))
        row = sample.to_row()
        assert row["sigma"] == 0.4
        assert row["k"] == pytest.approx(K_MAX)


class TestCoreConstant:
    """Tests for core_constant and core_table."""

    def test_empty_ladder(self):
        """An empty ladder is rejected."""
        with pytest.raises(ValueError, match="empty"):
            core_constant(K_MAX, [])

    def test_cells_per_eps(self):
        """cells_per_eps below four is a resolution error."""
        with pytest.raises(ResolutionError):
            core_constant(K_MAX, SMALL_LADDER, cells_per_eps=2)

    def test_slope_out_of_range(self):
        """k beyond 1/sqrt(2) is outside the admissible schedules."""
        with pytest.raises(InvalidParameterError):
            core_constant(0.8, SMALL_LADDER)

    def test_single_entry(self):
        """A one-entry ladder has infinite spread and is not converged."""
        result = core_constant(K_MAX, SMALL_LADDER, n_layers=4)
        assert math.isinf(result.spread)
        assert not result.converged
        assert result.gamma == result.samples[0].tilde_gamma
        assert result.to_dict()["spread"] is None

    def test_repeated_entry_plateaus(self):
        """Two identical rungs agree exactly, with or without worker threads."""
        ladder = SMALL_LADDER * 2
        serial = core_constant(K_MAX, ladder, n_layers=4)
        threaded = core_constant(K_MAX, ladder, n_layers=4, workers=2)
        assert serial.spread == 0.0
        assert serial.converged
        assert threaded.gamma == serial.gamma

    def test_table(self):
        """core_table returns one record per slope."""
        table = core_table([0.5, K_MAX], SMALL_LADDER, n_layers=4)
        assert [c.k for c in table] == [0.5, pytest.approx(K_MAX)]
        assert all(len(c.samples) == 1 for c in table)
