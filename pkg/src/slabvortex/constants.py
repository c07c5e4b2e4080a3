"""
Centralized constants for the slabvortex package.

This module contains:
- Geometry and grid construction defaults
- Tolerances used by the energy checks and the solver
- Detection thresholds for vortex location
- Renormalized-energy and core-ladder defaults
- Serialization schema versions
"""
import math

# =============================================================================
# Geometry & Grid Constants
# =============================================================================

# Smallest admissible cell count per axis for make_domain
MIN_RESOLUTION = 16

# Padding node layers added around curved shapes so ghost nodes exist
CURVED_DOMAIN_PADDING = 2

# Sub-cell samples per axis used to compute area fractions and edge weights.
# Must be even so that node-centered and edge-centered blocks align.
WEIGHT_SUBSAMPLES = 8

# Relative tolerance for "strictly inside" tests against the analytic boundary
INSIDE_TOLERANCE = 1e-12

# Smallest number of layers across the slab thickness
MIN_LAYERS = 2

# =============================================================================
# Energy Check Constants
# =============================================================================

# Pointwise unit-norm tolerance for director fields
UNIT_NORM_TOLERANCE = 1e-12

# Slack for the inequality checks: relative part and h^2-proportional part
CHECK_RELATIVE_SLACK = 1e-6
CHECK_H2_SLACK = 1.0

# =============================================================================
# Solver Constants
# =============================================================================

DEFAULT_MAX_ITERS = 3000
DEFAULT_TOL_RESIDUAL = 1e-5
DEFAULT_STEP_INIT = 1.0
DEFAULT_STEP_SHRINK = 0.5
DEFAULT_LOG_EVERY = 50

ARMIJO_COEFFICIENT = 1e-4              # Sufficient-decrease constant
STEP_GROWTH_CAP = 1.01                 # Multiplier on the quadratic step guess
MIN_STEP = 1e-16                       # Backtracking gives up below this step
NORMALIZATION_FLOOR = 1e-15            # |U + t D| below this aborts the step

# Safety factor applied to the explicit step bound of the l2 metric
EXPLICIT_STEP_FACTOR = 1.0

# Modes whose mass shift dominates stiffness by this ratio are preconditioned
# by their diagonal instead of a sparse LU factorization
DIAGONAL_MODE_RATIO = 25.0

# Initial guess: the core is mollified onto the north pole within this many cells
MOLLIFIER_CELLS = 2.0

# Energy-trace slack tolerated by the monotonicity contract
TRACE_SLACK = 1e-14

# =============================================================================
# Vortex Detection Constants
# =============================================================================

DEFAULT_CORE_THRESHOLD = 0.5

# Loops with |u| below this cannot carry a well-defined winding
DEGREE_NORM_FLOOR = 0.5

# Zero-charge clusters at least this wide (in cells) are reported as warnings;
# Defect charges are nonzero, so they never enter the DefectSet
ZERO_CHARGE_REPORT_DIAMETER = 3

# Relative tolerance for a winding sum to count as an integer
INTEGER_TOLERANCE = 1e-6

# =============================================================================
# Harmonic / Renormalized Energy Constants
# =============================================================================

# Fundamental-solution sources sit on the boundary scaled by this factor
SOURCE_SCALE = 1.3

# Source count bounds; collocation uses COLLOCATION_RATIO points per source
MIN_SOURCES = 64
MAX_SOURCES = 512
COLLOCATION_RATIO = 2

# Default truncation radii and extrapolation degree for the limit definition
DEFAULT_SIGMA_LADDER: tuple[float, ...] = (0.2, 0.1, 0.05)
EXTRAPOLATION_DEGREE = 2

# Polar quadrature around each defect: Gauss-Legendre nodes in log r, trapezoid in theta
POLAR_RADIAL_NODES = 48
POLAR_ANGULAR_NODES = 128

# Sub-cell samples per axis for the Cartesian part of the truncated energy
DEFAULT_ENERGY_SUBSAMPLES = 2

# Pattern search: rejection distance (in cells) from boundary and between defects
BARRIER_CELLS = 3.0
PATTERN_INITIAL_FRACTION = 0.1         # Initial step as a fraction of the domain size
PATTERN_MIN_CELL_FRACTION = 0.25       # Stop once the step is below this many cells
PATTERN_MAX_EVALUATIONS = 4000

# =============================================================================
# Core Problem Constants
# =============================================================================

MIN_CELLS_PER_EPS = 4
DEFAULT_CORE_LAYERS = 8
PLATEAU_SPREAD_WARNING = 0.10          # Spread above this flags a non-plateau ladder
TILDE_GAMMA_WINDOW = (-20.0, 20.0)     # Sanity window for tilde gamma

# =============================================================================
# Parameter Regime
# =============================================================================

# Largest linear-schedule slope k with sqrt(2) * k * eps <= eps
MAX_LINEAR_K = 1.0 / math.sqrt(2.0)

# =============================================================================
# Configuration
# =============================================================================

ENV_PREFIX = "SLABVORTEX_"
ENV_SEPARATOR = "__"
CONFIG_HASH_LENGTH = 12

# =============================================================================
# Serialization
# =============================================================================

# Version tags written into every dump, CSV and JSON report
SCHEMA_VERSION = "1"
FIELD_DUMP_MAGIC = "slabvortex-field"
FIELD_DUMP_END = "END_HEADER"
FIELD_DUMP_ORDER = "x-fastest"

# =============================================================================
# Exit Codes
# =============================================================================

EXIT_OK = 0
EXIT_INVALID = 1                       # Configuration, dump or validation failure
EXIT_NOT_CONVERGED = 2                 # Solver stopped without meeting its tolerance
EXIT_SUBRUN_FAILED = 3                 # A sweep entry raised
