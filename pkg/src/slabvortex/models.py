"""
Data models shared across the slabvortex modules.

Record types are immutable (frozen) dataclasses with to_dict/from_dict for the
JSON reports. Array-carrying types (domains, fields) live next to the code that
builds them.
"""
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Optional

import numpy as np

from slabvortex.params import ScalingParams


class DomainKind(Enum):
    """Supported cross-section shapes."""
    DISK = "disk"
    RECTANGLE = "rectangle"
    ANNULUS = "annulus"

    @classmethod
    def from_str(cls, value: str) -> "DomainKind":
        """Parse a config value (case-insensitive)."""
        return cls(value.strip().lower())


class NodeKind(IntEnum):
    """Per-node flag of a masked grid."""
    EXTERIOR = 0
    INTERIOR = 1
    BOUNDARY = 2


class DatumKind(Enum):
    """How a lateral datum was produced."""
    POWER_LAW = "power_law"
    SAMPLED = "sampled"


class Provenance(Enum):
    """Where a defect set came from."""
    DETECTED = "detected"
    PRESCRIBED = "prescribed"


class DescentMetric(Enum):
    """Inner product used to turn gradients into search directions."""
    H1 = "h1"
    L2 = "l2"

    @classmethod
    def from_str(cls, value: str) -> "DescentMetric":
        """Parse a config value (case-insensitive)."""
        return cls(value.strip().lower())


class DegreeMethod(Enum):
    """How loop degrees are evaluated."""
    INCREMENTS = "increments"
    CURRENT = "current"


class ExperimentKind(Enum):
    """Subcommands driven by a run configuration."""
    MINIMIZE = "minimize"
    SWEEP = "sweep"
    RENORMALIZED = "renormalized"
    CORE = "core"
    ANALYZE = "analyze"

    @classmethod
    def from_str(cls, value: str) -> "ExperimentKind":
        """Parse a config value (case-insensitive)."""
        return cls(value.strip().lower())


# =============================================================================
# Energies
# =============================================================================


@dataclass(frozen=True)
class EnergyBreakdown:
    """
    Contributions of the discrete slab energy.

    bulk_vertical already carries the 1/eta^2 factor and anchoring the
    1/(2 eps^2) factor; total is their sum with bulk_horizontal.
    """
    bulk_horizontal: float
    bulk_vertical: float
    anchoring: float
    total: float

    def __post_init__(self):
        for name in ("bulk_horizontal", "bulk_vertical", "anchoring"):
            value = getattr(self, name)
            if value < 0.0 or math.isnan(value):
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        parts = self.bulk_horizontal + self.bulk_vertical + self.anchoring
        if not math.isclose(self.total, parts, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"total {self.total!r} differs from the sum of parts {parts!r}")

    def __str__(self) -> str:
        return (
            f"total={self.total:.10g} (horizontal={self.bulk_horizontal:.6g}, "
            f"vertical={self.bulk_vertical:.6g}, anchoring={self.anchoring:.6g})"
        )

    @classmethod
    def from_parts(cls, bulk_horizontal: float, bulk_vertical: float, anchoring: float) -> "EnergyBreakdown":
        """Build a breakdown whose total is the sum of the parts."""
        h, v, a = float(bulk_horizontal), float(bulk_vertical), float(anchoring)
        return cls(h, v, a, h + v + a)

    @classmethod
    def zero(cls) -> "EnergyBreakdown":
        """All-zero breakdown (empty restriction)."""
        return cls(0.0, 0.0, 0.0, 0.0)

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown.from_parts(
            self.bulk_horizontal + other.bulk_horizontal,
            self.bulk_vertical + other.bulk_vertical,
            self.anchoring + other.anchoring,
        )

    def to_row(self, params: ScalingParams) -> dict:
        """CSV row with columns eps, eta, bulk_h, bulk_v, anchor, total."""
        return {
            "eps": params.eps,
            "eta": params.eta,
            "bulk_h": self.bulk_horizontal,
            "bulk_v": self.bulk_vertical,
            "anchor": self.anchoring,
            "total": self.total,
        }

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "bulk_horizontal": self.bulk_horizontal,
            "bulk_vertical": self.bulk_vertical,
            "anchoring": self.anchoring,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnergyBreakdown":
        """Reconstruct from dictionary."""
        return cls(
            bulk_horizontal=data["bulk_horizontal"],
            bulk_vertical=data["bulk_vertical"],
            anchoring=data["anchoring"],
            total=data["total"],
        )


@dataclass(frozen=True)
class GLBoundReport:
    """Outcome of the coupling inequality GL(u_bar) <= factor * F(U)."""
    lhs: float
    rhs: float
    factor: float
    slack_relative: float
    slack_h2: float
    holds: bool
    c_star: Optional[float] = None
    sharp_lhs: Optional[float] = None
    sharp_holds: Optional[bool] = None

    @property
    def slack(self) -> float:
        return self.slack_relative + self.slack_h2

    def __str__(self) -> str:
        verdict = "holds" if self.holds else "VIOLATED"
        return f"GL bound {verdict}: {self.lhs:.8g} <= {self.rhs:.8g} (+{self.slack:.2g})"

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "factor": self.factor,
            "slack_relative": self.slack_relative,
            "slack_h2": self.slack_h2,
            "holds": self.holds,
            "c_star": self.c_star,
            "sharp_lhs": self.sharp_lhs,
            "sharp_holds": self.sharp_holds,
        }


@dataclass(frozen=True)
class AverageBoundReport:
    """Layer-wise check of ||u_bar - u(., x3)|| <= ||d3 U|| / sqrt(2)."""
    layer_distances: tuple[float, ...]
    derivative_norm: float
    rhs: float
    slack_relative: float
    slack_h2: float
    layer_holds: tuple[bool, ...]

    @property
    def holds(self) -> bool:
        return all(self.layer_holds)

    @property
    def ratio(self) -> float:
        """Largest layer distance over ||d3 U|| (0 for x3-independent fields)."""
        worst = max(self.layer_distances) if self.layer_distances else 0.0
        if self.derivative_norm == 0.0:
            return 0.0
        return worst / self.derivative_norm

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "layer_distances": list(self.layer_distances),
            "derivative_norm": self.derivative_norm,
            "rhs": self.rhs,
            "slack_relative": self.slack_relative,
            "slack_h2": self.slack_h2,
            "layer_holds": list(self.layer_holds),
            "holds": self.holds,
            "ratio": self.ratio,
        }


# =============================================================================
# Solver
# =============================================================================


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the descent solvers; config keys solve.* map onto these fields."""
    max_iters: int = 3000
    tol_residual: float = 1e-5
    step_init: float = 1.0
    step_shrink: float = 0.5
    seed: int = 0
    metric: DescentMetric = DescentMetric.H1
    log_every: int = 50
    shift: float = 0.0
    init_noise: float = 0.0
    split_radius: float = 0.0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters!r}")
        if not self.tol_residual > 0.0:
            raise ValueError(f"tol_residual must be > 0, got {self.tol_residual!r}")
        if not self.step_init > 0.0:
            raise ValueError(f"step_init must be > 0, got {self.step_init!r}")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError(f"step_shrink must lie in (0, 1), got {self.step_shrink!r}")
        if self.shift < 0.0 or self.init_noise < 0.0 or self.split_radius < 0.0:
            raise ValueError("shift, init_noise and split_radius must be non-negative")
        if int(self.log_every) < 1:
            raise ValueError(f"log_every must be >= 1, got {self.log_every!r}")
        if isinstance(self.metric, str):
            object.__setattr__(self, "metric", DescentMetric.from_str(self.metric))

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "max_iters": self.max_iters,
            "tol_residual": self.tol_residual,
            "step_init": self.step_init,
            "step_shrink": self.step_shrink,
            "seed": self.seed,
            "metric": self.metric.value,
            "log_every": self.log_every,
            "shift": self.shift,
            "init_noise": self.init_noise,
            "split_radius": self.split_radius,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolveOptions":
        """Reconstruct from dictionary; missing keys take defaults."""
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class SolveReport:
    """Trace and outcome of one descent run."""
    iterations: int
    final_energy: EnergyBreakdown
    residual: float
    energy_trace: tuple[float, ...]
    converged: bool
    stop_reason: str = ""

    def __str__(self) -> str:
        status = "converged" if self.converged else "not converged"
        return (
            f"{status} after {self.iterations} iterations, "
            f"energy={self.final_energy.total:.10g}, residual={self.residual:.3g}"
        )

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "iterations": self.iterations,
            "final_energy": self.final_energy.to_dict(),
            "residual": self.residual,
            "energy_trace": list(self.energy_trace),
            "converged": self.converged,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        """Reconstruct from dictionary."""
        return cls(
            iterations=data["iterations"],
            final_energy=EnergyBreakdown.from_dict(data["final_energy"]),
            residual=data["residual"],
            energy_trace=tuple(data.get("energy_trace", ())),
            converged=data["converged"],
            stop_reason=data.get("stop_reason", ""),
        )


@dataclass(frozen=True)
class GradientCheckReport:
    """Assembled directional derivative against central differences along V(t)."""
    derivative: float
    direction_norm: float
    steps: tuple[float, ...]
    finite_differences: tuple[float, ...]
    mismatches: tuple[float, ...]
    observed_order: float

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "derivative": self.derivative,
            "direction_norm": self.direction_norm,
            "steps": list(self.steps),
            "finite_differences": list(self.finite_differences),
            "mismatches": list(self.mismatches),
            "observed_order": self.observed_order,
        }


# =============================================================================
# Defects
# =============================================================================


@dataclass(frozen=True)
class Defect:
    """A point singularity with an integer charge. Immutable and hashable."""
    x: float
    y: float
    charge: int

    def __post_init__(self):
        if int(self.charge) != self.charge or self.charge == 0:
            raise ValueError(f"Defect charge must be a nonzero integer, got {self.charge!r}")
        object.__setattr__(self, "charge", int(self.charge))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def __str__(self) -> str:
        return f"({self.x:+.4f}, {self.y:+.4f}) -> {self.charge:+d}"

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {"x": self.x, "y": self.y, "charge": self.charge}

    @classmethod
    def from_dict(cls, data: dict) -> "Defect":
        """Reconstruct from dictionary."""
        return cls(x=data["x"], y=data["y"], charge=data["charge"])


@dataclass(frozen=True)
class DefectSet:
    """
    Positions and charges of point defects.

    The total charge is not constrained here; callers compare it with the
    degree of the boundary datum.
    """
    items: tuple[Defect, ...] = ()
    provenance: Provenance = Provenance.PRESCRIBED
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        seen = set()
        for defect in self.items:
            if defect.position in seen:
                raise ValueError(f"Duplicate defect position {defect.position}")
            seen.add(defect.position)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Defect]:
        return iter(self.items)

    def __str__(self) -> str:
        inner = ", ".join(str(d) for d in self.items) or "none"
        return f"{len(self.items)} defect(s) [{self.provenance.value}]: {inner}"

    @classmethod
    def prescribed(cls, points: list[tuple[float, float]], charges: list[int]) -> "DefectSet":
        """Build a prescribed set from parallel lists of points and charges."""
        if len(points) != len(charges):
            raise ValueError("points and charges must have the same length")
        return cls(
            items=tuple(Defect(float(p[0]), float(p[1]), int(c)) for p, c in zip(points, charges)),
            provenance=Provenance.PRESCRIBED,
        )

    @property
    def total_charge(self) -> int:
        return sum(d.charge for d in self.items)

    @property
    def charges(self) -> np.ndarray:
        return np.array([d.charge for d in self.items], dtype=int)

    @property
    def positions(self) -> np.ndarray:
        """Positions as an (N, 2) array."""
        return np.array([d.position for d in self.items], dtype=float).reshape(-1, 2)

    def negated(self) -> "DefectSet":
        """Same positions with all charges flipped."""
        return DefectSet(
            items=tuple(Defect(d.x, d.y, -d.charge) for d in self.items),
            provenance=self.provenance,
            warnings=self.warnings,
        )

    def to_rows(self) -> list[dict]:
        """CSV rows with columns x, y, charge."""
        return [d.to_dict() for d in self.items]

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "items": [d.to_dict() for d in self.items],
            "provenance": self.provenance.value,
            "warnings": list(self.warnings),
            "total_charge": self.total_charge,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DefectSet":
        """Reconstruct from dictionary."""
        return cls(
            items=tuple(Defect.from_dict(d) for d in data.get("items", [])),
            provenance=Provenance(data.get("provenance", Provenance.PRESCRIBED.value)),
            warnings=tuple(data.get("warnings", [])),
        )


# =============================================================================
# Renormalized energy
# =============================================================================


@dataclass(frozen=True)
class RenormalizedReport:
    """Closed-form and limit-definition values of the renormalized energy."""
    w_closed: float
    w_limit: float
    sigma_samples: tuple[tuple[float, float], ...]
    pair_term: float
    boundary_term: float
    regular_term: float
    compatibility_residual: float = 0.0

    def __post_init__(self):
        parts = self.pair_term + self.boundary_term + self.regular_term
        if abs(self.w_closed - parts) > 1e-12 * max(1.0, abs(parts)):
            raise ValueError("w_closed must equal pair_term + boundary_term + regular_term")

    @property
    def discrepancy(self) -> float:
        """|w_closed - w_limit|."""
        return abs(self.w_closed - self.w_limit)

    def __str__(self) -> str:
        return (
            f"W closed={self.w_closed:.8g}, limit={self.w_limit:.8g} "
            f"(|diff|={self.discrepancy:.2e})"
        )

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "w_closed": self.w_closed,
            "w_limit": self.w_limit,
            "sigma_samples": [list(s) for s in self.sigma_samples],
            "pair_term": self.pair_term,
            "boundary_term": self.boundary_term,
            "regular_term": self.regular_term,
            "compatibility_residual": self.compatibility_residual,
            "discrepancy": self.discrepancy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RenormalizedReport":
        """Reconstruct from dictionary."""
        return cls(
            w_closed=data["w_closed"],
            w_limit=data["w_limit"],
            sigma_samples=tuple(tuple(s) for s in data.get("sigma_samples", [])),
            pair_term=data["pair_term"],
            boundary_term=data["boundary_term"],
            regular_term=data["regular_term"],
            compatibility_residual=data.get("compatibility_residual", 0.0),
        )


@dataclass(frozen=True)
class RenormalizedOptimum:
    """Best configuration found by pattern search over unit-charge defects."""
    positions: tuple[tuple[float, float], ...]
    value: float
    seed: int
    evaluations: int
    charge: int = 1

    def defects(self) -> DefectSet:
        """The optimum as a prescribed set of equal-charge defects."""
        return DefectSet.prescribed(list(self.positions), [self.charge] * len(self.positions))

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "positions": [list(p) for p in self.positions],
            "value": self.value,
            "seed": self.seed,
            "evaluations": self.evaluations,
            "charge": self.charge,
        }


# =============================================================================
# Core problem
# =============================================================================


@dataclass(frozen=True)
class CoreSample:
    """One cell-problem solve on B_sigma x (0, 1) with hedgehog lateral data."""
    sigma: float
    params: ScalingParams
    gamma_value: float
    tilde_gamma: float
    report: SolveReport

    def __post_init__(self):
        if not math.isfinite(self.tilde_gamma):
            raise ValueError(f"tilde_gamma must be finite, got {self.tilde_gamma!r}")

    def to_row(self) -> dict:
        """CSV row with columns k, sigma, eps, gamma_value, tilde_gamma, iterations, residual."""
        return {
            "k": self.params.k,
            "sigma": self.sigma,
            "eps": self.params.eps,
            "gamma_value": self.gamma_value,
            "tilde_gamma": self.tilde_gamma,
            "iterations": self.report.iterations,
            "residual": self.report.residual,
        }

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "sigma": self.sigma,
            "params": self.params.to_dict(),
            "gamma_value": self.gamma_value,
            "tilde_gamma": self.tilde_gamma,
            "report": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoreSample":
        """Reconstruct from dictionary."""
        return cls(
            sigma=data["sigma"],
            params=ScalingParams.from_dict(data["params"]),
            gamma_value=data["gamma_value"],
            tilde_gamma=data["tilde_gamma"],
            report=SolveReport.from_dict(data["report"]),
        )


@dataclass(frozen=True)
class CoreConstant:
    """Plateau estimate of the core constant along a sigma/eps ladder at fixed k."""
    k: float
    gamma: float
    spread: float
    samples: tuple[CoreSample, ...]
    warnings: tuple[str, ...] = ()

    @property
    def converged(self) -> bool:
        return not self.warnings

    def __str__(self) -> str:
        return f"gamma(k={self.k:.4g}) = {self.gamma:.6g} (spread {self.spread:.2%})"

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "k": self.k,
            "gamma": self.gamma,
            "spread": self.spread if math.isfinite(self.spread) else None,
            "samples": [s.to_dict() for s in self.samples],
            "warnings": list(self.warnings),
            "converged": self.converged,
        }
