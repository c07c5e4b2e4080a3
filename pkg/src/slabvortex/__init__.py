"""
slabvortex - Thin-slab director energies, vortex detection and renormalized energies.

Minimizes the rescaled Oseen-Frank energy of unit director fields on a thin
cylinder over a planar domain, locates the point defects of the vertically
averaged field, and compares the energy asymptotics with the renormalized
energy of the limiting harmonic map and the core constant.
"""

__version__ = "0.1.0"

# Parameters and models
from slabvortex.params import InvalidParameterError, ScalingParams, from_physical, linear_schedule
from slabvortex.models import (
    DomainKind,
    NodeKind,
    DatumKind,
    Provenance,
    DescentMetric,
    DegreeMethod,
    ExperimentKind,
    EnergyBreakdown,
    GLBoundReport,
    AverageBoundReport,
    SolveOptions,
    SolveReport,
    GradientCheckReport,
    Defect,
    DefectSet,
    RenormalizedReport,
    RenormalizedOptimum,
    CoreSample,
    CoreConstant,
)

# Geometry and fields
from slabvortex.domain import (
    InvalidGeometryError,
    Disk,
    Rectangle,
    Annulus,
    Domain2D,
    Grid3D,
    BoundaryDatum,
    make_domain,
    extrude,
    power_law_datum,
)
from slabvortex.fields import ShapeError, DirectorField, PlanarField, ScalarField2D

# Energies and solvers
from slabvortex.energy import (
    energy_full,
    energy_restricted,
    energy_gradient,
    vertical_average,
    gl_energy,
    check_gl_bound,
    check_average_bound,
    jensen_gap,
)
from slabvortex.solver import (
    DivergedError,
    NoProgressError,
    InvalidPerturbationError,
    initial_director,
    initial_planar,
    minimize_full,
    minimize_gl,
    el_residual,
    gradient_check,
)

# Defects, harmonic maps, core problem
from slabvortex.vortex import IllDefinedDegreeError, current, jacobian, degree_on_loop, locate_defects
from slabvortex.harmonic import (
    IncompatibleDataError,
    InvalidConfigurationError,
    CanonicalMap,
    PsiSolution,
    RenormalizedEnergy,
    solve_psi,
    canonical_map,
    renormalized_energy,
    minimize_renormalized,
    scan_renormalized,
)
from slabvortex.core import ResolutionError, core_energy, core_constant, core_table

# Runs and artifacts
from slabvortex.config import ConfigError, RunConfig, load_config
from slabvortex.serializer import CorruptDumpError, FieldSerializer, ReportSerializer
from slabvortex.experiments import ExperimentRunner, RunOutcome

__all__ = [
    # Version
    "__version__",
    # Parameters
    "InvalidParameterError",
    "ScalingParams",
    "from_physical",
    "linear_schedule",
    # Enums
    "DomainKind",
    "NodeKind",
    "DatumKind",
    "Provenance",
    "DescentMetric",
    "DegreeMethod",
    "ExperimentKind",
    # Models
    "EnergyBreakdown",
    "GLBoundReport",
    "AverageBoundReport",
    "SolveOptions",
    "SolveReport",
    "GradientCheckReport",
    "Defect",
    "DefectSet",
    "RenormalizedReport",
    "RenormalizedOptimum",
    "CoreSample",
    "CoreConstant",
    # Domain
    "InvalidGeometryError",
    "Disk",
    "Rectangle",
    "Annulus",
    "Domain2D",
    "Grid3D",
    "BoundaryDatum",
    "make_domain",
    "extrude",
    "power_law_datum",
    # Fields
    "ShapeError",
    "DirectorField",
    "PlanarField",
    "ScalarField2D",
    # Energy
    "energy_full",
    "energy_restricted",
    "energy_gradient",
    "vertical_average",
    "gl_energy",
    "check_gl_bound",
    "check_average_bound",
    "jensen_gap",
    # Solver
    "DivergedError",
    "NoProgressError",
    "InvalidPerturbationError",
    "initial_director",
    "initial_planar",
    "minimize_full",
    "minimize_gl",
    "el_residual",
    "gradient_check",
    # Vortex
    "IllDefinedDegreeError",
    "current",
    "jacobian",
    "degree_on_loop",
    "locate_defects",
    # Harmonic
    "IncompatibleDataError",
    "InvalidConfigurationError",
    "CanonicalMap",
    "PsiSolution",
    "RenormalizedEnergy",
    "solve_psi",
    "canonical_map",
    "renormalized_energy",
    "minimize_renormalized",
    "scan_renormalized",
    # Core
    "ResolutionError",
    "core_energy",
    "core_constant",
    "core_table",
    # Runs
    "ConfigError",
    "RunConfig",
    "load_config",
    "CorruptDumpError",
    "FieldSerializer",
    "ReportSerializer",
    "ExperimentRunner",
    "RunOutcome",
]
