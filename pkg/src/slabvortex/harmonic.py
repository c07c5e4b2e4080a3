"""
Canonical harmonic maps, the Psi Neumann problem and the renormalized energy.

Logarithmic singularities at the defects are handled analytically. Only the
harmonic remainders are approximated: each is a sum of fundamental solutions
log|x - z_k| with sources z_k on a scaled copy of the boundary, fitted by
least squares to Dirichlet (phase correction) or Neumann (Psi remainder)
data at boundary collocation points. The remainders are therefore exactly
harmonic and can be evaluated anywhere, including at the defects.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from slabvortex.constants import (
    BARRIER_CELLS,
    COLLOCATION_RATIO,
    DEFAULT_ENERGY_SUBSAMPLES,
    DEFAULT_SIGMA_LADDER,
    EXTRAPOLATION_DEGREE,
    INTEGER_TOLERANCE,
    MAX_SOURCES,
    MIN_SOURCES,
    PATTERN_INITIAL_FRACTION,
    PATTERN_MAX_EVALUATIONS,
    PATTERN_MIN_CELL_FRACTION,
    POLAR_ANGULAR_NODES,
    POLAR_RADIAL_NODES,
    SOURCE_SCALE,
)
from slabvortex.domain import BoundaryDatum, Disk, Domain2D, Rectangle
from slabvortex.fields import PlanarField, ScalarField2D
from slabvortex.models import DatumKind, DefectSet, RenormalizedOptimum, RenormalizedReport

logger = logging.getLogger(__name__)

_CHUNK = 2048
_PINV_RCOND = 1e-13


class IncompatibleDataError(ValueError):
    """Raised when defect charges do not add up to the degree of the boundary datum."""
    pass


class InvalidConfigurationError(ValueError):
    """Raised for coincident defects, defects outside the domain or unsupported domains."""
    pass


# =============================================================================
# Fundamental-solution expansions
# =============================================================================


def _log_kernel(points: np.ndarray, sources: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - sources[None, :, :]
    return 0.5 * np.log(diff[..., 0] ** 2 + diff[..., 1] ** 2)


def _log_kernel_gradient(points: np.ndarray, sources: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = points[:, None, :] - sources[None, :, :]
    r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return diff[..., 0] / r2, diff[..., 1] / r2


@dataclass(frozen=True, eq=False)
class HarmonicExpansion:
    """constant + sum_k coefficients[k] log|x - sources[k]|, sources outside the domain."""
    sources: np.ndarray
    coefficients: np.ndarray
    constant: float = 0.0

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, 2)
        out = np.empty(flat.shape[0])
        for start in range(0, flat.shape[0], _CHUNK):
            block = flat[start: start + _CHUNK]
            out[start: start + _CHUNK] = _log_kernel(block, self.sources) @ self.coefficients
        return (out + self.constant).reshape(points.shape[:-1])

    def gradient(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, 2)
        out = np.empty_like(flat)
        for start in range(0, flat.shape[0], _CHUNK):
            gx, gy = _log_kernel_gradient(flat[start: start + _CHUNK], self.sources)
            out[start: start + _CHUNK, 0] = gx @ self.coefficients
            out[start: start + _CHUNK, 1] = gy @ self.coefficients
        return out.reshape(points.shape)


class _BoundaryFit:
    """Collocation points, sources and cached least-squares operators of a simply connected domain."""

    def __init__(self, domain: Domain2D):
        shape = domain.shape
        if not shape.simply_connected:
            raise InvalidConfigurationError(f"{shape} is not simply connected")
        n_sources = int(np.clip(round(shape.perimeter / domain.cell_size), MIN_SOURCES, MAX_SOURCES))
        source_points, _, _ = shape.boundary_quadrature(n_sources)
        centroid = shape.centroid
        self.sources = centroid + SOURCE_SCALE * (source_points - centroid)
        self.points, self.normals, self.weights = shape.boundary_quadrature(COLLOCATION_RATIO * n_sources)
        self.tangents = np.stack([-self.normals[:, 1], self.normals[:, 0]], axis=-1)

        self.log_matrix = _log_kernel(self.points, self.sources)
        gx, gy = _log_kernel_gradient(self.points, self.sources)
        normal_matrix = gx * self.normals[:, 0:1] + gy * self.normals[:, 1:2]
        dirichlet = np.hstack([self.log_matrix, np.ones((self.points.shape[0], 1))])
        self.dirichlet_pinv = np.linalg.pinv(dirichlet, rcond=_PINV_RCOND)
        self.neumann_pinv = np.linalg.pinv(normal_matrix, rcond=_PINV_RCOND)
        logger.debug(
            "Boundary fit: %d sources, %d collocation points", self.sources.shape[0], self.points.shape[0]
        )

    def dirichlet(self, data: np.ndarray) -> HarmonicExpansion:
        solution = self.dirichlet_pinv @ data
        return HarmonicExpansion(self.sources, solution[:-1], float(solution[-1]))

    def neumann(self, data: np.ndarray) -> np.ndarray:
        return self.neumann_pinv @ data


# =============================================================================
# Data checks
# =============================================================================


def _datum_degree(g: BoundaryDatum) -> int:
    return int(g.power) if g.kind == DatumKind.POWER_LAW else g.degree


def _check_defects(domain: Domain2D, positions: np.ndarray, charges: np.ndarray, g: BoundaryDatum) -> None:
    degree = _datum_degree(g)
    if abs(float(np.sum(charges)) - degree) > INTEGER_TOLERANCE:
        raise IncompatibleDataError(
            f"defect charges sum to {int(np.sum(charges))} but the boundary datum has degree {degree}"
        )
    if positions.shape[0] == 0:
        return
    outside = domain.shape.signed_distance(positions) >= 0.0
    if outside.any():
        x, y = positions[np.argmax(outside)]
        raise InvalidConfigurationError(f"defect at ({x:.6g}, {y:.6g}) is not inside {domain.shape}")
    if positions.shape[0] > 1:
        gaps = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= 1e-12 * domain.shape.size:
            raise InvalidConfigurationError("coincident defects: the renormalized energy is infinite")


def _as_arrays(defects: DefectSet) -> tuple[np.ndarray, np.ndarray]:
    return defects.positions, defects.charges.astype(float)


def _singular_phase(points: np.ndarray, positions: np.ndarray, charges: np.ndarray) -> np.ndarray:
    """prod_j ((x - a_j) / |x - a_j|)^d_j as unit complex numbers; 0 exactly at a defect."""
    z = np.ones(points.shape[:-1], dtype=complex)
    hit = np.zeros(points.shape[:-1], dtype=bool)
    for a, d in zip(positions, charges):
        rel = (points[..., 0] - a[0]) + 1j * (points[..., 1] - a[1])
        r = np.abs(rel)
        at_defect = r == 0.0
        hit |= at_defect
        z *= np.where(at_defect, 1.0, rel / np.where(at_defect, 1.0, r)) ** int(d)
    z[hit] = 0.0
    return z


def _singular_gradient(points: np.ndarray, positions: np.ndarray, charges: np.ndarray) -> np.ndarray:
    """Gradient of sum_j d_j arg(x - a_j)."""
    out = np.zeros(points.shape)
    for a, d in zip(positions, charges):
        rel = points - a
        r2 = rel[..., 0] ** 2 + rel[..., 1] ** 2
        out[..., 0] += -d * rel[..., 1] / r2
        out[..., 1] += d * rel[..., 0] / r2
    return out


def _log_sum(points: np.ndarray, positions: np.ndarray, charges: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """sum_j d_j log max(|x - a_j|, floor)."""
    out = np.zeros(points.shape[:-1])
    for a, d in zip(positions, charges):
        r = np.hypot(points[..., 0] - a[0], points[..., 1] - a[1])
        out += d * np.log(np.maximum(r, floor) if floor > 0.0 else r)
    return out


def _datum_flux(g: BoundaryDatum, fit: _BoundaryFit) -> np.ndarray:
    """g x d_tau g at the collocation points."""
    flux = g.phase_derivative(fit.points, fit.tangents)
    if flux is not None:
        return flux
    # Sampled data: periodic differences of the boundary phase along the arc
    phase = g.phase(fit.points)
    step = np.linalg.norm(np.roll(fit.points, -1, axis=0) - fit.points, axis=-1)
    increment = (np.roll(phase, -1) - phase + np.pi) % (2.0 * np.pi) - np.pi
    forward = increment / step
    return 0.5 * (forward + np.roll(forward, 1))


# =============================================================================
# Canonical harmonic map
# =============================================================================


@dataclass(frozen=True, eq=False)
class CanonicalMap:
    """
    u* = exp(i phi) prod_j ((x - a_j)/|x - a_j|)^d_j with phi harmonic.

    evaluate() and phase_gradient() work at arbitrary points; field holds the
    map on the active grid nodes (zero on exterior nodes and exactly at a defect).
    """
    domain: Domain2D
    defects: DefectSet
    correction: HarmonicExpansion
    field: PlanarField
    trace_mismatch: float

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        positions, charges = _as_arrays(self.defects)
        z = np.exp(1j * self.correction.value(points)) * _singular_phase(points, positions, charges)
        return np.stack([z.real, z.imag], axis=-1)

    def phase_gradient(self, points: np.ndarray) -> np.ndarray:
        """Gradient of the phase; equals the current j(u*) away from the defects."""
        points = np.asarray(points, dtype=float)
        positions, charges = _as_arrays(self.defects)
        return self.correction.gradient(points) + _singular_gradient(points, positions, charges)


def _phase_correction(fit: _BoundaryFit, g: BoundaryDatum, positions: np.ndarray, charges: np.ndarray) -> HarmonicExpansion:
    g_values = g.at(fit.points)
    w = (g_values[:, 0] + 1j * g_values[:, 1]) * np.conj(_singular_phase(fit.points, positions, charges))
    return fit.dirichlet(np.unwrap(np.angle(w)))


def canonical_map(
    domain: Domain2D,
    defects: DefectSet,
    g: BoundaryDatum,
    _fit: Optional[_BoundaryFit] = None,
) -> CanonicalMap:
    """
    The canonical harmonic map with singularities (a, d) and trace g.

    Raises:
        IncompatibleDataError: If the charges do not sum to deg(g)
        InvalidConfigurationError: For defects outside the domain, coincident
            defects or a domain that is not simply connected
    """
    positions, charges = _as_arrays(defects)
    _check_defects(domain, positions, charges, g)
    fit = _fit or _BoundaryFit(domain)
    correction = _phase_correction(fit, g, positions, charges)

    nodes = domain.points()
    z = np.exp(1j * correction.value(nodes)) * _singular_phase(nodes, positions, charges)
    z[~domain.active_mask] = 0.0
    field = PlanarField.from_complex(domain, z)

    partial = CanonicalMap(domain, defects, correction, field, 0.0)
    trace = partial.evaluate(domain.boundary_points)
    mismatch = float(np.max(np.linalg.norm(trace - g.values, axis=-1))) if g.values.size else 0.0
    logger.debug("Canonical map for %s: trace mismatch %.3e", defects, mismatch)
    return CanonicalMap(domain, defects, correction, field, mismatch)


# =============================================================================
# Psi and the renormalized energy
# =============================================================================


@dataclass(frozen=True, eq=False)
class PsiSolution:
    """
    Psi = sum_j d_j log|x - a_j| + R with R harmonic, normalized to zero
    boundary mean. field samples Psi on the active grid nodes.
    """
    field: ScalarField2D
    regular: HarmonicExpansion
    defects: DefectSet
    boundary_points: np.ndarray
    boundary_weights: np.ndarray
    boundary_values: np.ndarray
    boundary_flux: np.ndarray
    compatibility_residual: float

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        positions, charges = _as_arrays(self.defects)
        return _log_sum(points, positions, charges) + self.regular.value(points)


@dataclass(frozen=True)
class _ClosedForm:
    pair: float
    boundary: float
    regular: float
    residual: float

    @property
    def total(self) -> float:
        return self.pair + self.boundary + self.regular


class RenormalizedEnergy:
    """
    Evaluator of W_g for one domain and datum.

    The least-squares operators are built once, so each closed-form
    evaluation costs a few matrix-vector products.
    """

    def __init__(self, domain: Domain2D, g: BoundaryDatum):
        self.domain = domain
        self.g = g
        self.degree = _datum_degree(g)
        self._fit = _BoundaryFit(domain)
        self._flux = _datum_flux(g, self._fit)

    # --- Psi ---

    def _regular_part(self, positions: np.ndarray, charges: np.ndarray) -> tuple[HarmonicExpansion, np.ndarray, float]:
        fit = self._fit
        data = self._flux.copy()
        for a, d in zip(positions, charges):
            rel = fit.points - a
            r2 = rel[:, 0] ** 2 + rel[:, 1] ** 2
            data -= d * np.sum(rel * fit.normals, axis=-1) / r2
        total_weight = fit.weights.sum()
        residual = abs(float(np.dot(data, fit.weights)))
        data -= np.dot(data, fit.weights) / total_weight

        coefficients = fit.neumann(data)
        psi_boundary = _log_sum(fit.points, positions, charges) + fit.log_matrix @ coefficients
        constant = -float(np.dot(psi_boundary, fit.weights)) / total_weight
        return HarmonicExpansion(fit.sources, coefficients, constant), psi_boundary + constant, residual

    def psi(self, defects: DefectSet) -> PsiSolution:
        positions, charges = _as_arrays(defects)
        _check_defects(self.domain, positions, charges, self.g)
        regular, boundary_values, residual = self._regular_part(positions, charges)
        if residual > 1e-6 * max(1.0, abs(self.degree)):
            logger.warning("Neumann compatibility residual %.3e", residual)

        nodes = self.domain.points()
        floor = 0.5 * self.domain.cell_size
        values = _log_sum(nodes, positions, charges, floor=floor) + regular.value(nodes)
        values[~self.domain.active_mask] = 0.0
        return PsiSolution(
            field=ScalarField2D(self.domain, values),
            regular=regular,
            defects=defects,
            boundary_points=self._fit.points,
            boundary_weights=self._fit.weights,
            boundary_values=boundary_values,
            boundary_flux=self._flux,
            compatibility_residual=residual,
        )

    # --- Closed form ---

    def closed_form(self, positions: np.ndarray, charges: np.ndarray) -> _ClosedForm:
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        charges = np.asarray(charges, dtype=float)
        _check_defects(self.domain, positions, charges, self.g)
        regular, boundary_values, residual = self._regular_part(positions, charges)

        pair = 0.0
        for i in range(positions.shape[0]):
            for j in range(positions.shape[0]):
                if i != j:
                    pair -= math.pi * charges[i] * charges[j] * math.log(
                        float(np.linalg.norm(positions[i] - positions[j]))
                    )
        boundary = 0.5 * float(np.sum(boundary_values * self._flux * self._fit.weights))
        regular_term = 0.0
        if positions.shape[0]:
            regular_term = -math.pi * float(np.dot(charges, regular.value(positions)))
        return _ClosedForm(pair, boundary, regular_term, residual)

    def __call__(self, positions: np.ndarray, charges: Optional[np.ndarray] = None) -> float:
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        if charges is None:
            charges = np.full(positions.shape[0], 1.0 if self.degree >= 0 else -1.0)
        return self.closed_form(positions, charges).total

    # --- Limit definition ---

    def truncated_energies(
        self,
        positions: np.ndarray,
        charges: np.ndarray,
        sigmas: Sequence[float],
        subsamples: int = DEFAULT_ENERGY_SUBSAMPLES,
    ) -> list[tuple[float, float]]:
        """
        (sigma, 1/2 int_{Omega minus sigma-disks} |grad u*|^2 + pi sum d^2 log sigma) per sigma.

        Raises:
            InvalidConfigurationError: If a sigma does not fit inside the defect cutoffs
        """
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        charges = np.asarray(charges, dtype=float)
        _check_defects(self.domain, positions, charges, self.g)
        shape = self.domain.shape
        correction = _phase_correction(self._fit, self.g, positions, charges)

        def density(points: np.ndarray) -> np.ndarray:
            grad = correction.gradient(points) + _singular_gradient(points, positions, charges)
            return 0.5 * np.sum(grad * grad, axis=-1)

        outer, inner = _cutoff_radii(shape, positions)
        if positions.shape[0] and max(sigmas) >= inner.min():
            raise InvalidConfigurationError(
                f"sigma {max(sigmas):g} exceeds the defect cutoff radius {inner.min():g}"
            )

        # Away from the defects: (1 - sum chi) |grad u*|^2 / 2 on a shape-fitted rule
        points, weights = _area_quadrature(self.domain, subsamples)
        cut = np.ones(points.shape[0])
        for a, r1, r2 in zip(positions, inner, outer):
            cut -= _smooth_cutoff(np.hypot(points[:, 0] - a[0], points[:, 1] - a[1]), r1, r2)
        keep = cut > 0.0
        far = float(np.sum(weights[keep] * cut[keep] * density(points[keep])))

        # Around each defect: polar rule in log r, split at the inner cutoff radius
        gl_nodes, gl_weights = roots_legendre(POLAR_RADIAL_NODES)
        theta = 2.0 * np.pi * np.arange(POLAR_ANGULAR_NODES) / POLAR_ANGULAR_NODES
        circle = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        d_theta = 2.0 * np.pi / POLAR_ANGULAR_NODES

        def ring(a, lo, hi, r1, r2, smooth):
            s = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl_nodes
            r = np.exp(s)
            pts = a + r[:, None, None] * circle[None, :, :]
            values = density(pts) * (r ** 2)[:, None]
            if smooth:
                values *= _smooth_cutoff(r, r1, r2)[:, None]
            return 0.5 * (hi - lo) * float(np.sum(gl_weights[:, None] * values)) * d_theta

        transition = sum(
            ring(a, math.log(r1), math.log(r2), r1, r2, True)
            for a, r1, r2 in zip(positions, inner, outer)
        )
        samples = []
        for sigma in sigmas:
            core = sum(
                ring(a, math.log(sigma), math.log(r1), r1, r2, False)
                for a, r1, r2 in zip(positions, inner, outer)
            )
            value = far + transition + core + math.pi * float(np.sum(charges ** 2)) * math.log(sigma)
            samples.append((float(sigma), value))
        return samples


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _smooth_cutoff(r: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """1 for r <= r1, 0 for r >= r2, smooth in between."""
    return _smooth_step((r2 - np.asarray(r, dtype=float)) / (r2 - r1))


def _cutoff_radii(shape, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outer radius 0.9 min(half separation, boundary distance) per defect, inner radius half of it."""
    if positions.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    limit = -shape.signed_distance(positions)
    if positions.shape[0] > 1:
        gaps = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        limit = np.minimum(limit, 0.5 * gaps.min(axis=1))
    outer = 0.9 * limit
    return outer, 0.5 * outer


def _area_quadrature(domain: Domain2D, subsamples: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule fitted to the shape, with `subsamples`
    nodes per grid cell along each direction.
    """
    shape = domain.shape
    h = domain.cell_size
    nodes, weights = roots_legendre(max(1, int(subsamples)))

    def composite(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        panels = max(1, int(math.ceil((hi - lo) / h)))
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        return (mid[:, None] + half[:, None] * nodes).ravel(), (half[:, None] * weights).ravel()

    if isinstance(shape, Disk):
        r, wr = composite(0.0, shape.radius)
        count = max(64, int(math.ceil(shape.perimeter / h)) * max(1, int(subsamples)))
        theta = 2.0 * np.pi * np.arange(count) / count
        pts = r[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None]
        w = (wr * r)[:, None] * np.full(count, 2.0 * np.pi / count)[None, :]
        return pts.reshape(-1, 2), w.ravel()
    if isinstance(shape, Rectangle):
        a, b = shape.half_extent
        x, wx = composite(-a, a)
        y, wy = composite(-b, b)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1), np.outer(wx, wy).ravel()
    raise InvalidConfigurationError(f"no area quadrature for {shape}")


# =============================================================================
# Public operations
# =============================================================================


def solve_psi(domain: Domain2D, defects: DefectSet, g: BoundaryDatum) -> PsiSolution:
    """
    Solve for Psi with dPsi/dnu = g x d_tau g and Laplace Psi = 2 pi sum d_j delta_{a_j}.

    Raises:
        IncompatibleDataError: If the charges do not sum to deg(g)
    """
    return RenormalizedEnergy(domain, g).psi(defects)


def _sigma_ladder(positions: np.ndarray, shape, sigmas: Optional[Sequence[float]]) -> list[float]:
    ladder = list(sigmas or DEFAULT_SIGMA_LADDER)
    if positions.shape[0] == 0:
        return ladder
    _, inner = _cutoff_radii(shape, positions)
    scale = min(1.0, 0.8 * float(inner.min()) / max(ladder))
    if scale < 1.0:
        logger.info("Scaling the sigma ladder by %.3g to fit inside the defect cutoffs", scale)
    return [s * scale for s in ladder]


def renormalized_energy(
    domain: Domain2D,
    defects: DefectSet,
    g: BoundaryDatum,
    sigmas: Optional[Sequence[float]] = None,
    subsamples: int = DEFAULT_ENERGY_SUBSAMPLES,
    evaluator: Optional[RenormalizedEnergy] = None,
) -> RenormalizedReport:
    """
    W_g by the closed form and by the truncated-energy limit.

    The limit value fits W + c1 sigma + c2 sigma^2 through the sigma samples
    and reports its intercept.

    Raises:
        IncompatibleDataError: If the charges do not sum to deg(g)
        InvalidConfigurationError: For coincident or outside defects
    """
    evaluator = evaluator or RenormalizedEnergy(domain, g)
    positions, charges = _as_arrays(defects)
    closed = evaluator.closed_form(positions, charges)
    ladder = _sigma_ladder(positions, domain.shape, sigmas)
    samples = evaluator.truncated_energies(positions, charges, ladder, subsamples)

    if positions.shape[0] == 0:
        w_limit = samples[0][1]
    else:
        s = np.array([t for t, _ in samples])
        v = np.array([w for _, w in samples])
        degree = min(EXTRAPOLATION_DEGREE, len(samples) - 1)
        w_limit = float(np.polyfit(s, v, degree)[-1]) if degree > 0 else float(v[0])

    report = RenormalizedReport(
        w_closed=closed.total,
        w_limit=w_limit,
        sigma_samples=tuple(samples),
        pair_term=closed.pair,
        boundary_term=closed.boundary,
        regular_term=closed.regular,
        compatibility_residual=closed.residual,
    )
    logger.info("%s: %s", defects, report)
    return report


# --- Minimization over positions ---


def _pattern_search(
    evaluator: RenormalizedEnergy,
    n_defects: int,
    charges: np.ndarray,
    seed: int,
    max_evaluations: int,
) -> RenormalizedOptimum:
    domain = evaluator.domain
    shape = domain.shape
    h = domain.cell_size
    barrier = BARRIER_CELLS * h
    evaluations = 0

    def objective(flat: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        pos = flat.reshape(n_defects, 2)
        if np.any(shape.signed_distance(pos) > -barrier):
            return math.inf
        if n_defects > 1:
            gaps = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            np.fill_diagonal(gaps, np.inf)
            if gaps.min() < barrier:
                return math.inf
        return evaluator(pos, charges)

    rng = np.random.default_rng(seed)
    hx, hy = shape.half_extent
    current, value = None, math.inf
    for _ in range(10000):
        candidate = (rng.uniform(-1.0, 1.0, size=(n_defects, 2)) * np.array([hx, hy]) + shape.centroid).ravel()
        value = objective(candidate)
        if math.isfinite(value):
            current = candidate
            break
    if current is None:
        raise InvalidConfigurationError(f"no admissible start for {n_defects} defects in {shape}")

    step = PATTERN_INITIAL_FRACTION * shape.size
    while step >= PATTERN_MIN_CELL_FRACTION * h and evaluations < max_evaluations:
        best_value, best_trial = value, None
        for coordinate in range(current.size):
            for sign in (1.0, -1.0):
                trial = current.copy()
                trial[coordinate] += sign * step
                trial_value = objective(trial)
                if trial_value < best_value:
                    best_value, best_trial = trial_value, trial
        if best_trial is None:
            step *= 0.5
        else:
            current, value = best_trial, best_value

    positions = tuple((float(p[0]), float(p[1])) for p in current.reshape(n_defects, 2))
    logger.debug("Pattern search seed %d: W=%.8g after %d evaluations", seed, value, evaluations)
    return RenormalizedOptimum(
        positions=positions, value=float(value), seed=int(seed), evaluations=evaluations, charge=int(charges[0])
    )


def minimize_renormalized(
    domain: Domain2D,
    g: BoundaryDatum,
    n_defects: int,
    seeds: Sequence[int] = (0, 1, 2),
    workers: int = 1,
    max_evaluations: int = PATTERN_MAX_EVALUATIONS,
) -> RenormalizedOptimum:
    """
    Minimize W_g over configurations of n_defects unit-charge defects.

    Compass pattern search from random starts, one per seed; configurations
    closer than BARRIER_CELLS cells to the boundary or to each other are
    rejected. Returns the best result over all seeds.

    Raises:
        IncompatibleDataError: If n_defects differs from |deg(g)|
    """
    evaluator = RenormalizedEnergy(domain, g)
    degree = evaluator.degree
    if n_defects != abs(degree) or n_defects == 0:
        raise IncompatibleDataError(
            f"expected |deg(g)| = {abs(degree)} unit defects (and at least one), got {n_defects}"
        )
    charges = np.full(n_defects, 1.0 if degree > 0 else -1.0)

    def run(seed: int) -> RenormalizedOptimum:
        return _pattern_search(evaluator, n_defects, charges, seed, max_evaluations)

    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(seed) for seed in seeds]

    best = min(results, key=lambda r: (r.value, r.seed))
    logger.info("Renormalized optimum over %d seeds: W=%.8g at %s", len(results), best.value, best.positions)
    return best


def scan_renormalized(domain: Domain2D, g: BoundaryDatum, n_points: int = 21) -> list[dict]:
    """
    Landscape rows of W_g on a grid of configurations.

    Degree +-1: one defect on an n_points x n_points grid (columns a1x, a1y, W).
    Degree +-2: symmetric pairs a, 2c - a with a in the right half (columns
    a1x, a1y, a2x, a2y, W). Inadmissible configurations are skipped.
    """
    evaluator = RenormalizedEnergy(domain, g)
    degree = evaluator.degree
    if abs(degree) not in (1, 2):
        raise InvalidConfigurationError(f"landscapes are available for degree +-1 or +-2, got {degree}")
    shape = domain.shape
    barrier = BARRIER_CELLS * domain.cell_size
    hx, hy = shape.half_extent
    center = shape.centroid
    sign = 1.0 if degree > 0 else -1.0
    xs = center[0] + np.linspace(-hx, hx, n_points)
    ys = center[1] + np.linspace(-hy, hy, n_points)

    rows = []
    for x in xs:
        for y in ys:
            a = np.array([x, y])
            if shape.signed_distance(a) > -barrier:
                continue
            if abs(degree) == 1:
                rows.append({"a1x": x, "a1y": y, "W": evaluator(a[None, :], np.array([sign]))})
                continue
            if x <= center[0]:
                continue
            b = 2.0 * center - a
            if np.linalg.norm(a - b) < barrier or shape.signed_distance(b) > -barrier:
                continue
            value = evaluator(np.stack([a, b]), np.array([sign, sign]))
            rows.append({"a1x": x, "a1y": y, "a2x": float(b[0]), "a2y": float(b[1]), "W": value})
    return rows
