"""
Tests for the value types: validation, derived properties and dict round-trips.
"""
import math

import pytest

from slabvortex.models import (
    AverageBoundReport,
    CoreConstant,
    CoreSample,
    Defect,
    DefectSet,
    DescentMetric,
    EnergyBreakdown,
    ExperimentKind,
    Provenance,
    RenormalizedOptimum,
    RenormalizedReport,
    SolveOptions,
    SolveReport,
)
from slabvortex.params import ScalingParams


def make_report(total: float = 3.0) -> SolveReport:
    return SolveReport(
        iterations=12,
        final_energy=EnergyBreakdown.from_parts(total / 3, total / 3, total / 3),
        residual=1e-6,
        energy_trace=(5.0, 4.0, total),
        converged=True,
        stop_reason="converged",
    )


class TestEnergyBreakdown:
    """Tests for EnergyBreakdown."""

    def test_total_is_sum(self):
        """from_parts fills the total."""
        e = EnergyBreakdown.from_parts(1.0, 2.0, 0.5)
        assert e.total == 3.5

    def test_rejects_inconsistent_total(self):
        """A total that is not the sum of parts is invalid."""
        with pytest.raises(ValueError, match="sum of parts"):
            EnergyBreakdown(1.0, 1.0, 1.0, 4.0)

    def test_rejects_negative_part(self):
        """Parts are non-negative."""
        with pytest.raises(ValueError, match="non-negative"):
            EnergyBreakdown.from_parts(-1.0, 0.0, 0.0)

    def test_addition(self):
        """Breakdowns add part by part."""
        total = EnergyBreakdown.from_parts(1.0, 2.0, 3.0) + EnergyBreakdown.zero()
        assert total == EnergyBreakdown.from_parts(1.0, 2.0, 3.0)

    def test_round_trip(self):
        """to_dict and from_dict are inverse."""
        e = EnergyBreakdown.from_parts(0.1, 0.2, 0.3)
        assert EnergyBreakdown.from_dict(e.to_dict()) == e

    def test_row(self):
        """CSV rows carry the parameters next to the parts."""
        row = EnergyBreakdown.from_parts(1.0, 2.0, 3.0).to_row(ScalingParams(eps=0.2, eta=0.1))
        assert row == {"eps": 0.2, "eta": 0.1, "bulk_h": 1.0, "bulk_v": 2.0, "anchor": 3.0, "total": 6.0}


class TestSolveOptions:
    """Tests for SolveOptions."""

    def test_metric_from_string(self):
        """String metrics are parsed."""
        assert SolveOptions(metric="L2").metric == DescentMetric.L2

    @pytest.mark.parametrize("kwargs", [
        {"max_iters": 0},
        {"tol_residual": 0.0},
        {"step_shrink": 1.0},
        {"init_noise": -0.1},
        {"log_every": 0},
    ])
    def test_rejects_invalid(self, kwargs):
        """Out-of-range knobs raise ValueError."""
        with pytest.raises(ValueError):
            SolveOptions(**kwargs)

    def test_from_dict_ignores_unknown(self):
        """Unknown keys are dropped; missing keys take defaults."""
        opts = SolveOptions.from_dict({"max_iters": 10, "colour": "blue"})
        assert opts.max_iters == 10
        assert opts.tol_residual == SolveOptions().tol_residual

    def test_round_trip(self):
        """to_dict and from_dict are inverse."""
        opts = SolveOptions(max_iters=50, metric=DescentMetric.L2, split_radius=0.3)
        assert SolveOptions.from_dict(opts.to_dict()) == opts


class TestSolveReport:
    """Tests for SolveReport."""

    def test_round_trip(self):
        """Reports survive serialization."""
        report = make_report()
        assert SolveReport.from_dict(report.to_dict()) == report

    def test_str(self):
        """The summary names the outcome."""
        assert str(make_report()).startswith("converged after 12 iterations")


class TestDefects:
    """Tests for Defect and DefectSet."""

    def test_zero_charge(self):
        """Charge zero is not a defect."""
        with pytest.raises(ValueError, match="nonzero integer"):
            Defect(0.0, 0.0, 0)

    def test_fractional_charge(self):
        """Charges are integers."""
        with pytest.raises(ValueError):
            Defect(0.0, 0.0, 0.5)

    def test_duplicate_positions(self):
        """Two defects at one position are rejected."""
        with pytest.raises(ValueError, match="Duplicate"):
            DefectSet.prescribed([(0.1, 0.2), (0.1, 0.2)], [1, 1])

    def test_prescribed(self):
        """Positions, charges and the total come out of a prescribed set."""
        defects = DefectSet.prescribed([(0.1, 0.2), (-0.3, 0.0)], [1, -2])
        assert defects.provenance == Provenance.PRESCRIBED
        assert defects.total_charge == -1
        assert defects.charges.tolist() == [1, -2]
        assert defects.positions.shape == (2, 2)

    def test_negated(self):
        """negated flips every charge and keeps positions."""
        defects = DefectSet.prescribed([(0.1, 0.2)], [1]).negated()
        assert defects.items == (Defect(0.1, 0.2, -1),)

    def test_empty(self):
        """An empty set has a (0, 2) position array."""
        assert DefectSet().positions.shape == (0, 2)
        assert DefectSet().total_charge == 0

    def test_round_trip(self):
        """Detected sets keep provenance and warnings."""
        defects = DefectSet(
            items=(Defect(0.5, -0.5, 1),), provenance=Provenance.DETECTED, warnings=("touches the boundary",)
        )
        assert DefectSet.from_dict(defects.to_dict()) == defects

    def test_rows(self):
        """CSV rows have x, y and charge."""
        assert DefectSet.prescribed([(0.1, 0.2)], [1]).to_rows() == [{"x": 0.1, "y": 0.2, "charge": 1}]


class TestRenormalizedModels:
    """Tests for RenormalizedReport and RenormalizedOptimum."""

    def test_parts_must_add_up(self):
        """w_closed is the sum of its three terms."""
        with pytest.raises(ValueError):
            RenormalizedReport(1.0, 1.0, (), pair_term=0.5, boundary_term=0.0, regular_term=0.0)

    def test_discrepancy(self):
        """discrepancy is the absolute gap between the two definitions."""
        report = RenormalizedReport(1.0, 1.25, ((0.1, 1.3),), 0.5, 0.25, 0.25)
        assert report.discrepancy == 0.25
        assert RenormalizedReport.from_dict(report.to_dict()) == report

    def test_optimum_defects(self):
        """An optimum converts to a prescribed set with its charge."""
        optimum = RenormalizedOptimum(((0.5, 0.0), (-0.5, 0.0)), value=-0.4, seed=0, evaluations=10, charge=-1)
        assert optimum.defects().charges.tolist() == [-1, -1]


class TestBoundReports:
    """Tests for AverageBoundReport derived values."""

    def test_ratio(self):
        """ratio is the worst layer distance over ||d3 U||."""
        report = AverageBoundReport((0.1, 0.3), 0.6, 0.6 / math.sqrt(2), 0.0, 0.0, (True, True))
        assert report.holds
        assert report.ratio == pytest.approx(0.5)

    def test_constant_field(self):
        """A field without x3 dependence has ratio 0."""
        report = AverageBoundReport((0.0, 0.0), 0.0, 0.0, 0.0, 0.0, (True, False))
        assert report.ratio == 0.0
        assert not report.holds


class TestCoreModels:
    """Tests for CoreSample and CoreConstant."""

    def test_sample_round_trip(self):
        """Samples survive serialization."""
        sample = CoreSample(0.4, ScalingParams(eps=0.2, eta=0.1), 5.0, 5.0 - math.pi * math.log(2.0), make_report())
        assert CoreSample.from_dict(sample.to_dict()) == sample

    def test_non_finite_tilde(self):
        """tilde_gamma must be finite."""
        with pytest.raises(ValueError):
            CoreSample(0.4, ScalingParams(eps=0.2, eta=0.1), 5.0, math.nan, make_report())

    def test_converged_means_no_warnings(self):
        """Warnings mark a constant as unconverged; infinite spread serializes as null."""
        assert CoreConstant(0.5, 1.0, 0.01, ()).converged
        constant = CoreConstant(0.5, 1.0, math.inf, (), ("a single ladder entry cannot show a plateau",))
        assert not constant.converged
        assert constant.to_dict()["spread"] is None


class TestEnums:
    """Tests for config-facing enums."""

    @pytest.mark.parametrize("text, kind", [("minimize", ExperimentKind.MINIMIZE), (" Sweep ", ExperimentKind.SWEEP)])
    def test_experiment_from_str(self, text, kind):
        """Parsing ignores case and surrounding blanks."""
        assert ExperimentKind.from_str(text) == kind

    def test_unknown_experiment(self):
        """Unknown names raise ValueError."""
        with pytest.raises(ValueError):
            ExperimentKind.from_str("relax")
