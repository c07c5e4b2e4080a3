"""
Descent solvers for the slab energy and the planar Ginzburg-Landau energy.

Both minimizers share one preconditioned nonlinear conjugate gradient loop
(Polak-Ribiere+ with restarts) and an Armijo backtracking line search. The
slab solver keeps |U| = 1 by normalizing after every trial step; the planar
solver is unconstrained. Lateral Dirichlet nodes and exterior nodes never move.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from slabvortex.constants import (
    ARMIJO_COEFFICIENT,
    DIAGONAL_MODE_RATIO,
    EXPLICIT_STEP_FACTOR,
    MIN_STEP,
    MOLLIFIER_CELLS,
    NORMALIZATION_FLOOR,
    STEP_GROWTH_CAP,
)
from slabvortex.domain import BoundaryDatum, Domain2D, Grid3D
from slabvortex.energy import (
    energy_full,
    energy_gradient,
    gl_energy,
    gl_energy_gradient,
    planar_dirichlet_energy,
)
from slabvortex.fields import DirectorField, PlanarField, ShapeError
from slabvortex.models import (
    DatumKind,
    DescentMetric,
    EnergyBreakdown,
    GradientCheckReport,
    SolveOptions,
    SolveReport,
)
from slabvortex.params import ScalingParams

logger = logging.getLogger(__name__)


class DivergedError(RuntimeError):
    """Raised when the energy of the starting field is not finite."""
    pass


class NoProgressError(RuntimeError):
    """
    Raised when the line search cannot find an admissible decreasing step.

    Carries the partial report and the last accepted field.
    """

    def __init__(self, message: str, report: Optional[SolveReport] = None, field=None):
        super().__init__(message)
        self.report = report
        self.field = field


class InvalidPerturbationError(ValueError):
    """Raised when a gradient-check direction is not tangential or moves Dirichlet nodes."""
    pass


# =============================================================================
# Shared descent loop
# =============================================================================


@dataclass
class _Problem:
    """Callables and weights that define one minimization."""
    energy: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    tangent: Callable[[np.ndarray, np.ndarray], np.ndarray]
    retract: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    precondition: Callable[[np.ndarray], np.ndarray]
    breakdown: Callable[[np.ndarray], EnergyBreakdown]
    wrap: Callable[[np.ndarray], object]
    free: np.ndarray
    mass: np.ndarray
    step_cap: float


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def _residual(problem: _Problem, tangential_gradient: np.ndarray) -> float:
    squared = np.sum(tangential_gradient * tangential_gradient, axis=-1)
    free = problem.free
    if not free.any():
        return 0.0
    return math.sqrt(float(np.sum(squared[free] / problem.mass[free])))


def _report(problem, x, iterations, residual, trace, opts, stop_reason) -> SolveReport:
    return SolveReport(
        iterations=iterations,
        final_energy=problem.breakdown(x),
        residual=residual,
        energy_trace=tuple(trace),
        converged=residual <= opts.tol_residual,
        stop_reason=stop_reason,
    )


def _descend(problem: _Problem, x: np.ndarray, opts: SolveOptions) -> tuple[np.ndarray, SolveReport]:
    energy = problem.energy(x)
    if not math.isfinite(energy):
        raise DivergedError(f"initial energy is not finite ({energy!r})")

    trace = [energy]
    grad = problem.tangent(x, problem.gradient(x))
    residual = _residual(problem, grad)
    direction = prev_grad = prev_pgrad = None
    prev_decrease = None
    iterations = 0
    stop_reason = "max_iters"
    logger.info("start: energy %.10g, residual %.3e", energy, residual)

    while True:
        if residual <= opts.tol_residual:
            stop_reason = "converged"
            break
        if iterations >= opts.max_iters:
            break

        pgrad = problem.tangent(x, problem.precondition(grad))
        if direction is None:
            direction = -pgrad
        else:
            old = problem.tangent(x, prev_pgrad)
            denom = _inner(prev_grad, prev_pgrad)
            beta = max(0.0, _inner(grad, pgrad - old) / denom) if denom > 0.0 else 0.0
            direction = -pgrad + beta * problem.tangent(x, direction)
        slope = _inner(grad, direction)
        if not slope < 0.0:
            # Restart along the preconditioned steepest descent
            direction = -pgrad
            slope = _inner(grad, direction)
        if not slope < 0.0:
            report = _report(problem, x, iterations, residual, trace, opts, "no descent direction")
            raise NoProgressError("preconditioned gradient is not a descent direction", report, problem.wrap(x))

        if prev_decrease is None:
            step = problem.step_cap
        else:
            step = min(problem.step_cap, STEP_GROWTH_CAP * 2.0 * prev_decrease / -slope)

        while True:
            trial = problem.retract(x, step, direction)
            if trial is None:
                report = _report(problem, x, iterations, residual, trace, opts, "degenerate normalization")
                raise NoProgressError(
                    f"|U + t D| fell below {NORMALIZATION_FLOOR:g} at step {step:.3e}",
                    report, problem.wrap(x),
                )
            trial_energy = problem.energy(trial)
            if math.isfinite(trial_energy) and trial_energy <= energy + ARMIJO_COEFFICIENT * step * slope:
                break
            step *= opts.step_shrink
            if step < MIN_STEP * problem.step_cap:
                report = _report(problem, x, iterations, residual, trace, opts, "line search stalled")
                raise NoProgressError(
                    f"line search stalled at iteration {iterations} (energy {energy:.12g}, residual {residual:.3e})",
                    report, problem.wrap(x),
                )

        prev_decrease = energy - trial_energy
        prev_grad, prev_pgrad = grad, pgrad
        x, energy = trial, trial_energy
        trace.append(energy)
        iterations += 1
        grad = problem.tangent(x, problem.gradient(x))
        residual = _residual(problem, grad)

        if iterations % opts.log_every == 0:
            logger.info(
                "iter %d: energy %.10g, residual %.3e, step %.3e", iterations, energy, residual, step
            )

    report = _report(problem, x, iterations, residual, trace, opts, stop_reason)
    if report.converged:
        logger.info("converged in %d iterations: energy %.10g, residual %.3e", iterations, energy, residual)
    else:
        logger.warning(
            "stopped after %d iterations without convergence: residual %.3e > %.3e",
            iterations, residual, opts.tol_residual,
        )
    return x, report


# =============================================================================
# Preconditioners
# =============================================================================


class _ModeSolver:
    """Solves (K + mu M) z = r on the free nodes, by sparse LU or by its diagonal."""

    def __init__(self, stiffness: sp.csr_matrix, mass: np.ndarray, mu: float):
        diagonal = stiffness.diagonal()
        self._diagonal = None
        self._lu = None
        if mu > 0.0 and mu * mass.min() >= DIAGONAL_MODE_RATIO * diagonal.max():
            self._diagonal = diagonal + mu * mass
        else:
            self._lu = spla.splu((stiffness + sp.diags(mu * mass)).tocsc())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._diagonal is not None:
            return rhs / (self._diagonal if rhs.ndim == 1 else self._diagonal[:, None])
        return self._lu.solve(rhs)


def _free_system(domain: Domain2D) -> tuple[np.ndarray, sp.csr_matrix, np.ndarray]:
    index = np.flatnonzero(domain.interior_mask.ravel())
    stiffness = domain.stiffness_matrix()[index][:, index].tocsr()
    mass = domain.mass_diagonal().ravel()[index]
    return index, stiffness, mass


class SlabPreconditioner:
    """
    Inverse of the quadratic part of the slab energy on the free nodes.

    The x3 coupling is diagonalized by a generalized eigenproblem against the
    trapezoid weights; each vertical mode is then a shifted planar Laplacian.
    The U3 component has its own modes because of the anchoring term.
    """

    def __init__(self, grid: Grid3D, p: ScalingParams, shift: float = 0.0):
        self._grid = grid
        self._index, stiffness, mass = _free_system(grid.base)
        nz = grid.n_layers
        tau = grid.layer_weights()

        lz = np.zeros((nz, nz))
        for k in range(nz - 1):
            lz[k, k] += 1.0
            lz[k + 1, k + 1] += 1.0
            lz[k, k + 1] -= 1.0
            lz[k + 1, k] -= 1.0
        planar = lz / (grid.hz * p.eta ** 2)
        ends = np.zeros((nz, nz))
        ends[0, 0] = ends[-1, -1] = 1.0 / p.eps ** 2

        self._modes = []
        cache: dict[float, _ModeSolver] = {}
        for coupling in (planar, planar + ends):
            lam, vectors = scipy.linalg.eigh(coupling, np.diag(tau))
            solvers = []
            for value in lam:
                mu = float(shift + max(value, 0.0))
                if mu not in cache:
                    cache[mu] = _ModeSolver(stiffness, mass, mu)
                solvers.append(cache[mu])
            self._modes.append((vectors, solvers))
        logger.debug("Slab preconditioner: %d distinct mode solvers", len(cache))

    def __call__(self, residual: np.ndarray) -> np.ndarray:
        Nx, Ny, Nz = self._grid.node_shape
        out = np.zeros_like(residual)
        for c in range(3):
            vectors, solvers = self._modes[0 if c < 2 else 1]
            rhs = residual[..., c].reshape(Nx * Ny, Nz)[self._index] @ vectors
            z = np.empty_like(rhs)
            for m, solver in enumerate(solvers):
                z[:, m] = solver.solve(rhs[:, m])
            component = np.zeros((Nx * Ny, Nz))
            component[self._index] = z @ vectors.T
            out[..., c] = component.reshape(Nx, Ny, Nz)
        return out


class PlanarPreconditioner:
    """Inverse of K + shift M on the free nodes of a cross-section."""

    def __init__(self, domain: Domain2D, shift: float = 0.0):
        self._domain = domain
        self._index, stiffness, mass = _free_system(domain)
        self._solver = _ModeSolver(stiffness, mass, float(shift))

    def __call__(self, residual: np.ndarray) -> np.ndarray:
        Nx, Ny = self._domain.node_shape
        flat = residual.reshape(Nx * Ny, -1)
        out = np.zeros_like(flat)
        out[self._index] = self._solver.solve(flat[self._index])
        return out.reshape(residual.shape)


def explicit_step_bound(grid: Grid3D, p: ScalingParams) -> float:
    """min(hx^2, hy^2, hz^2 eta^2, eps^2 hz) / 2, the step scale of the l2 metric."""
    hx, hy, hz = grid.spacing
    return EXPLICIT_STEP_FACTOR * min(hx ** 2, hy ** 2, hz ** 2 * p.eta ** 2, p.eps ** 2 * hz) / 2.0


# =============================================================================
# Initialization
# =============================================================================


def _datum_degree(g: BoundaryDatum) -> int:
    return int(g.power) if g.kind == DatumKind.POWER_LAW else g.degree


def _seeds(domain: Domain2D, degree: int, split_radius: float) -> list[tuple[np.ndarray, int]]:
    if degree == 0:
        return []
    center = domain.centroid
    if split_radius > 0.0 and abs(degree) >= 2:
        count = abs(degree)
        sign = 1 if degree > 0 else -1
        return [
            (center + split_radius * np.array([math.cos(2 * math.pi * k / count), math.sin(2 * math.pi * k / count)]), sign)
            for k in range(count)
        ]
    return [(center, degree)]


def _phase_and_core(domain: Domain2D, g: BoundaryDatum, split_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit complex phase of the seeds and the mollifier weight s in [0, 1] per node."""
    points = domain.points()
    z = np.ones(domain.node_shape, dtype=complex)
    distance = np.full(domain.node_shape, np.inf)
    for center, charge in _seeds(domain, _datum_degree(g), split_radius):
        rel = points - center
        r = np.hypot(rel[..., 0], rel[..., 1])
        unit = np.where(r > 0.0, (rel[..., 0] + 1j * rel[..., 1]) / np.where(r > 0.0, r, 1.0), 1.0)
        z *= unit ** charge
        distance = np.minimum(distance, r)

    # Align the seed phase with the datum
    bi, bj = domain.boundary_index.T
    if bi.size:
        target = g.values[:, 0] + 1j * g.values[:, 1]
        offset = np.sum(target * np.conj(z[bi, bj]))
        if abs(offset) > 0.0:
            z *= offset / abs(offset)

    radius = MOLLIFIER_CELLS * domain.cell_size
    core = np.clip(distance / radius, 0.0, 1.0) if np.isfinite(distance).any() else np.ones(domain.node_shape)
    return z, core


def initial_director(
    grid: Grid3D,
    g: BoundaryDatum,
    *,
    noise: float = 0.0,
    seed: int = 0,
    split_radius: float = 0.0,
) -> DirectorField:
    """
    Admissible, degree-correct starting field.

    In the plane the field follows exp(i d theta) about the centroid (or d unit
    seeds on a circle of radius split_radius) and tilts linearly onto +e3
    within MOLLIFIER_CELLS cells of each seed. Optional seeded Gaussian noise is
    added to the free nodes before normalization; the lateral nodes carry (g, 0).
    """
    domain = grid.base
    z, core = _phase_and_core(domain, g, split_radius)
    polar = 0.5 * math.pi * core
    column = np.stack([np.sin(polar) * z.real, np.sin(polar) * z.imag, np.cos(polar)], axis=-1)
    values = np.repeat(column[:, :, None, :], grid.n_layers, axis=2)

    free = grid.free_mask()
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        perturbation = noise * rng.standard_normal(values.shape)
        values[free] += perturbation[free]
        values[free] /= np.linalg.norm(values[free], axis=-1, keepdims=True)

    values[~domain.active_mask] = (1.0, 0.0, 0.0)
    bi, bj = domain.boundary_index.T
    values[bi, bj, :, :2] = g.values[:, None, :]
    values[bi, bj, :, 2] = 0.0
    return DirectorField(grid, values)


def initial_planar(
    domain: Domain2D,
    g: BoundaryDatum,
    *,
    noise: float = 0.0,
    seed: int = 0,
    split_radius: float = 0.0,
) -> PlanarField:
    """Planar analogue of initial_director: |u| ramps linearly from 0 at the seeds."""
    z, core = _phase_and_core(domain, g, split_radius)
    values = np.stack([core * z.real, core * z.imag], axis=-1)
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        free = domain.interior_mask
        values[free] += noise * rng.standard_normal(values.shape)[free]
    values[~domain.active_mask] = 0.0
    return PlanarField(domain, values).with_boundary(g)


# =============================================================================
# Slab minimization
# =============================================================================


def _tangent_projection(free: np.ndarray) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def tangent(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = v - np.sum(v * x, axis=-1, keepdims=True) * x
        out[~free] = 0.0
        return out
    return tangent


def _normalizing_retraction(free: np.ndarray) -> Callable[[np.ndarray, float, np.ndarray], Optional[np.ndarray]]:
    def retract(x: np.ndarray, t: float, d: np.ndarray) -> Optional[np.ndarray]:
        y = x + t * d
        norms = np.linalg.norm(y[free], axis=-1)
        if norms.size and norms.min() < NORMALIZATION_FLOOR:
            return None
        y[free] /= norms[:, None]
        return y
    return retract


def _slab_problem(grid: Grid3D, p: ScalingParams, opts: SolveOptions) -> _Problem:
    free = grid.free_mask()
    mass = grid.base.mass_diagonal()[:, :, None] * grid.layer_weights()[None, None, :]

    def energy(x):
        return energy_full(DirectorField(grid, x), p).total

    def gradient(x):
        return energy_gradient(DirectorField(grid, x), p)

    if opts.metric == DescentMetric.H1:
        precondition = SlabPreconditioner(grid, p, opts.shift)
        step_cap = opts.step_init
    else:
        safe_mass = np.where(free, mass, 1.0)[..., None]

        def precondition(r):
            return r / safe_mass
        step_cap = opts.step_init * explicit_step_bound(grid, p)

    return _Problem(
        energy=energy,
        gradient=gradient,
        tangent=_tangent_projection(free),
        retract=_normalizing_retraction(free),
        precondition=precondition,
        breakdown=lambda x: energy_full(DirectorField(grid, x), p),
        wrap=lambda x: DirectorField(grid, x),
        free=free,
        mass=mass,
        step_cap=step_cap,
    )


def _check_datum(domain: Domain2D, g: BoundaryDatum) -> None:
    if g.domain is not domain and g.domain.node_shape != domain.node_shape:
        raise ShapeError("boundary datum and field live on different grids")


def minimize_full(
    init: DirectorField,
    g: BoundaryDatum,
    p: ScalingParams,
    opts: Optional[SolveOptions] = None,
) -> tuple[DirectorField, SolveReport]:
    """
    Minimize the discrete slab energy over unit fields with lateral data (g, 0).

    Top and bottom faces are free: the discrete gradient there carries the
    anchoring term, which is the ghost-node form of the Robin boundary law.

    Raises:
        DivergedError: If the initial energy is not finite
        NoProgressError: If the line search cannot make progress (carries the partial report)
        ShapeError: If the datum does not belong to the field's grid
    """
    opts = opts or SolveOptions()
    grid = init.grid
    domain = grid.base
    _check_datum(domain, g)

    x = np.array(init.values)
    bi, bj = domain.boundary_index.T
    x[bi, bj, :, :2] = g.values[:, None, :]
    x[bi, bj, :, 2] = 0.0
    free = grid.free_mask()
    norms = np.linalg.norm(x[free], axis=-1)
    if norms.size and np.max(np.abs(norms - 1.0)) > 1e-12:
        logger.debug("Normalizing initial field (max deviation %.3e)", np.max(np.abs(norms - 1.0)))
        x[free] /= np.maximum(norms, NORMALIZATION_FLOOR)[:, None]

    if not p.bbh_regime:
        logger.warning("Minimizing outside the regime sqrt(2) eta <= eps: %s", p)
    logger.info("minimize_full on %s x %d layers, %s, metric %s", domain, grid.n_layers, p, opts.metric.value)

    problem = _slab_problem(grid, p, opts)
    x, report = _descend(problem, x, opts)
    return DirectorField(grid, x), report


def el_residual(U: DirectorField, p: ScalingParams) -> float:
    """
    Discrete L2 norm of the tangential Euler-Lagrange operator on the free nodes.

    This is sqrt(sum |(I - U U^T) G|^2 / m) over free nodes, with G the
    energy gradient and m the lumped node mass, so the Robin faces are included.
    """
    grid = U.grid
    free = grid.free_mask()
    mass = grid.base.mass_diagonal()[:, :, None] * grid.layer_weights()[None, None, :]
    grad = _tangent_projection(free)(U.values, energy_gradient(U, p))
    squared = np.sum(grad * grad, axis=-1)
    return math.sqrt(float(np.sum(squared[free] / mass[free]))) if free.any() else 0.0


def gradient_check(
    U: DirectorField,
    p: ScalingParams,
    direction: np.ndarray,
    steps: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
) -> GradientCheckReport:
    """
    Compare the assembled first variation with central differences along
    V(t) = (U + t Phi) / |U + t Phi|.

    Returns:
        GradientCheckReport with absolute mismatches per step and the observed
        order from a log-log fit over the steps above the roundoff floor (NaN
        when fewer than two steps qualify).

    Raises:
        InvalidPerturbationError: If Phi is not tangential or is nonzero off the free nodes
    """
    grid = U.grid
    phi = np.asarray(direction, dtype=float)
    if phi.shape != U.values.shape:
        raise InvalidPerturbationError(f"direction must have shape {U.values.shape}, got {phi.shape}")
    free = grid.free_mask()
    if np.any(phi[~free] != 0.0):
        i, j, k = np.argwhere(np.any(phi != 0.0, axis=-1) & ~free)[0]
        raise InvalidPerturbationError(f"direction moves the Dirichlet or exterior node ({i}, {j}, {k})")
    scale = max(1.0, float(np.max(np.abs(phi)))) if phi.size else 1.0
    normal_part = np.abs(np.sum(phi * U.values, axis=-1))
    if np.max(normal_part) > 1e-10 * scale:
        i, j, k = np.unravel_index(np.argmax(normal_part), normal_part.shape)
        raise InvalidPerturbationError(
            f"direction is not tangential at node ({i}, {j}, {k}): |Phi . U| = {normal_part[i, j, k]:.3e}"
        )

    mass = grid.base.mass_diagonal()[:, :, None] * grid.layer_weights()[None, None, :]
    direction_norm = math.sqrt(float(np.sum(mass * np.sum(phi * phi, axis=-1))))
    derivative = _inner(energy_gradient(U, p), phi)
    base_energy = energy_full(U, p).total

    def along(t: float) -> float:
        v = U.values + t * phi
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        return energy_full(DirectorField(grid, v), p).total

    differences, mismatches = [], []
    for t in steps:
        fd = (along(t) - along(-t)) / (2.0 * t) if direction_norm > 0.0 else 0.0
        differences.append(fd)
        mismatches.append(abs(fd - derivative))

    order = float("nan")
    if direction_norm > 0.0:
        floor = 100.0 * np.finfo(float).eps * max(abs(base_energy), 1.0)
        usable = [(t, m) for t, m in zip(steps, mismatches) if m > floor / t]
        if len(usable) >= 2:
            logt = np.log([t for t, _ in usable])
            logm = np.log([m for _, m in usable])
            order = float(np.polyfit(logt, logm, 1)[0])

    return GradientCheckReport(
        derivative=derivative,
        direction_norm=direction_norm,
        steps=tuple(float(t) for t in steps),
        finite_differences=tuple(differences),
        mismatches=tuple(mismatches),
        observed_order=order,
    )


# =============================================================================
# Planar Ginzburg-Landau minimization
# =============================================================================


def _gl_breakdown(u: PlanarField, eps: float) -> EnergyBreakdown:
    dirichlet = planar_dirichlet_energy(u)
    return EnergyBreakdown.from_parts(dirichlet, 0.0, gl_energy(u, eps) - dirichlet)


def minimize_gl(
    init: PlanarField,
    g: BoundaryDatum,
    eps: float,
    opts: Optional[SolveOptions] = None,
) -> tuple[PlanarField, SolveReport]:
    """
    Minimize GL_eps over planar fields with boundary trace g.

    The report's breakdown carries the Dirichlet part as bulk_horizontal and
    the potential part as anchoring.
    """
    opts = opts or SolveOptions()
    domain = init.domain
    _check_datum(domain, g)
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    x = np.array(init.with_boundary(g).values)
    free = domain.interior_mask
    mass = domain.mass_diagonal()

    if opts.metric == DescentMetric.H1:
        precondition = PlanarPreconditioner(domain, opts.shift)
        step_cap = opts.step_init
    else:
        safe_mass = np.where(free, mass, 1.0)[..., None]

        def precondition(r):
            return r / safe_mass
        step_cap = opts.step_init * EXPLICIT_STEP_FACTOR * min(domain.hx ** 2, domain.hy ** 2, eps ** 2) / 2.0

    def tangent(_x, v):
        out = np.array(v)
        out[~free] = 0.0
        return out

    problem = _Problem(
        energy=lambda v: gl_energy(PlanarField(domain, v), eps),
        gradient=lambda v: gl_energy_gradient(PlanarField(domain, v), eps),
        tangent=tangent,
        retract=lambda v, t, d: v + t * d,
        precondition=precondition,
        breakdown=lambda v: _gl_breakdown(PlanarField(domain, v), eps),
        wrap=lambda v: PlanarField(domain, v),
        free=free,
        mass=mass,
        step_cap=step_cap,
    )
    logger.info("minimize_gl on %s, eps=%g, metric %s", domain, eps, opts.metric.value)
    x, report = _descend(problem, x, opts)
    return PlanarField(domain, x), report
