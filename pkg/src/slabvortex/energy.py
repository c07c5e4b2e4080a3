"""
Discrete slab energy, the planar Ginzburg-Landau energy and the coupling checks.

Quadrature: edge differences weighted by the dual-strip area fractions in the
plane, trapezoid weights across the thickness, lumped node areas for the
vertical and anchoring terms. The 1/eta^2 and 1/eps^2 factors are applied at
assembly time only. Reductions run in a fixed order (numpy sums over C-ordered
arrays), so results are reproducible for a given input.
"""
import logging
import math
from typing import Optional

import numpy as np

from slabvortex.constants import CHECK_H2_SLACK, CHECK_RELATIVE_SLACK
from slabvortex.fields import DirectorField, PlanarField, ShapeError
from slabvortex.models import AverageBoundReport, EnergyBreakdown, GLBoundReport
from slabvortex.params import ScalingParams

logger = logging.getLogger(__name__)


# --- Stencil helpers ---


def _planar_dirichlet(values: np.ndarray, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Per-node-pair edge energies c_e |du|^2 for an (Nx, Ny, ..., c) array, summed over components."""
    dx = values[1:] - values[:-1]
    dy = values[:, 1:] - values[:, :-1]
    ex = np.sum(dx * dx, axis=-1)
    ey = np.sum(dy * dy, axis=-1)
    extra = (None,) * (ex.ndim - 2)
    return cx[(...,) + extra] * ex, cy[(...,) + extra] * ey


def _planar_gradient(values: np.ndarray, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Gradient of 1/2 sum c_e |du|^2 with respect to every node value."""
    extra = (None,) * (values.ndim - 2)
    fx = cx[(...,) + extra] * (values[1:] - values[:-1])
    fy = cy[(...,) + extra] * (values[:, 1:] - values[:, :-1])
    grad = np.zeros_like(values)
    grad[1:] += fx
    grad[:-1] -= fx
    grad[:, 1:] += fy
    grad[:, :-1] -= fy
    return grad


def _vertical_differences(values: np.ndarray) -> np.ndarray:
    dz = values[:, :, 1:] - values[:, :, :-1]
    return np.sum(dz * dz, axis=-1)


def _check_params(U: DirectorField, p: ScalingParams) -> None:
    if not isinstance(p, ScalingParams):
        raise ShapeError(f"expected ScalingParams, got {type(p).__name__}")
    if U.values.shape[:3] != U.grid.node_shape:
        raise ShapeError("director field does not match its grid")


# --- Slab energy ---


def _breakdown_per_node(U: DirectorField, p: ScalingParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Node-attributed contributions (Nx, Ny) of the three energy terms.

    Edge energies are split half to each endpoint, so summing over any node
    set gives a restriction that is additive over disjoint sets.
    """
    grid = U.grid
    domain = grid.base
    cx, cy = domain.edge_coefficients()
    tau = grid.layer_weights()
    area = domain.mass_diagonal()

    ex, ey = _planar_dirichlet(U.values, cx, cy)
    ex = 0.5 * np.tensordot(ex, tau, axes=([2], [0]))
    ey = 0.5 * np.tensordot(ey, tau, axes=([2], [0]))
    horizontal = np.zeros(domain.node_shape)
    horizontal[1:] += 0.5 * ex
    horizontal[:-1] += 0.5 * ex
    horizontal[:, 1:] += 0.5 * ey
    horizontal[:, :-1] += 0.5 * ey

    vertical = area * _vertical_differences(U.values).sum(axis=2) / (2.0 * p.eta ** 2 * grid.hz)

    u3 = U.perpendicular
    anchoring = area * (u3[:, :, 0] ** 2 + u3[:, :, -1] ** 2) / (2.0 * p.eps ** 2)
    return horizontal, vertical, anchoring


def energy_full(U: DirectorField, p: ScalingParams) -> EnergyBreakdown:
    """
    Discrete F_eps(U) = 1/2 int_Q |grad_eps U|^2 + 1/(2 eps^2) int_{top, bottom} (U . nu)^2.

    Raises:
        ShapeError: If the field and parameters do not fit together
    """
    _check_params(U, p)
    grid = U.grid
    domain = grid.base
    cx, cy = domain.edge_coefficients()
    tau = grid.layer_weights()
    area = domain.mass_diagonal()

    ex, ey = _planar_dirichlet(U.values, cx, cy)
    horizontal = 0.5 * float(np.dot(ex.sum(axis=(0, 1)), tau) + np.dot(ey.sum(axis=(0, 1)), tau))
    vertical = float(np.sum(area * _vertical_differences(U.values).sum(axis=2))) / (2.0 * p.eta ** 2 * grid.hz)
    u3 = U.perpendicular
    anchoring = float(np.sum(area * (u3[:, :, 0] ** 2 + u3[:, :, -1] ** 2))) / (2.0 * p.eps ** 2)
    return EnergyBreakdown.from_parts(horizontal, vertical, anchoring)


def energy_restricted(U: DirectorField, p: ScalingParams, nodes: np.ndarray) -> EnergyBreakdown:
    """
    Energy of B = A x (0, 1) for a set A of cross-section nodes.

    Args:
        U: Director field
        p: Scaling parameters
        nodes: Boolean mask (Nx, Ny) or an (n, 2) array of node indices

    Raises:
        ShapeError: If A contains exterior nodes
    """
    _check_params(U, p)
    domain = U.grid.base
    mask = np.zeros(domain.node_shape, dtype=bool)
    nodes = np.asarray(nodes)
    if nodes.dtype == bool:
        if nodes.shape != domain.node_shape:
            raise ShapeError(f"node mask must have shape {domain.node_shape}, got {nodes.shape}")
        mask = nodes
    elif nodes.size:
        nodes = nodes.reshape(-1, 2).astype(int)
        mask[nodes[:, 0], nodes[:, 1]] = True
    if not mask.any():
        return EnergyBreakdown.zero()

    outside = mask & ~domain.active_mask
    if outside.any():
        i, j = np.argwhere(outside)[0]
        raise ShapeError(f"node ({i}, {j}) lies outside the domain")

    horizontal, vertical, anchoring = _breakdown_per_node(U, p)
    return EnergyBreakdown.from_parts(
        float(horizontal[mask].sum()), float(vertical[mask].sum()), float(anchoring[mask].sum())
    )


def energy_gradient(U: DirectorField, p: ScalingParams) -> np.ndarray:
    """Euclidean gradient of the discrete F_eps with respect to all node values, (Nx, Ny, Nz, 3)."""
    grid = U.grid
    domain = grid.base
    cx, cy = domain.edge_coefficients()
    tau = grid.layer_weights()
    area = domain.mass_diagonal()

    grad = _planar_gradient(U.values, cx, cy) * tau[None, None, :, None]

    coeff = (area / (p.eta ** 2 * grid.hz))[:, :, None, None]
    flux = coeff * (U.values[:, :, 1:] - U.values[:, :, :-1])
    grad[:, :, 1:] += flux
    grad[:, :, :-1] -= flux

    grad[:, :, 0, 2] += area * U.values[:, :, 0, 2] / p.eps ** 2
    grad[:, :, -1, 2] += area * U.values[:, :, -1, 2] / p.eps ** 2
    return grad


# --- Averages and the planar energy ---


def vertical_average(U: DirectorField) -> PlanarField:
    """u_bar = int_0^1 (U1, U2) dx3 by the trapezoid rule."""
    tau = U.grid.layer_weights()
    return PlanarField(U.grid.base, np.tensordot(U.planar, tau, axes=([2], [0])))


def gl_energy(u: PlanarField, eps: float) -> float:
    """GL_eps(u) = 1/2 int |Du|^2 + 1/(4 eps^2) int (1 - |u|^2)^2."""
    domain = u.domain
    cx, cy = domain.edge_coefficients()
    ex, ey = _planar_dirichlet(u.values, cx, cy)
    dirichlet = 0.5 * float(ex.sum() + ey.sum())
    defect = 1.0 - np.sum(u.values * u.values, axis=-1)
    potential = float(np.sum(domain.mass_diagonal() * defect ** 2)) / (4.0 * eps ** 2)
    return dirichlet + potential


def gl_energy_gradient(u: PlanarField, eps: float) -> np.ndarray:
    """Euclidean gradient of the discrete GL_eps, (Nx, Ny, 2)."""
    domain = u.domain
    cx, cy = domain.edge_coefficients()
    grad = _planar_gradient(u.values, cx, cy)
    defect = 1.0 - np.sum(u.values * u.values, axis=-1)
    grad -= (domain.mass_diagonal() * defect / eps ** 2)[..., None] * u.values
    return grad


def planar_dirichlet_energy(u: PlanarField) -> float:
    """1/2 int |Du|^2 of a planar field."""
    cx, cy = u.domain.edge_coefficients()
    ex, ey = _planar_dirichlet(u.values, cx, cy)
    return 0.5 * float(ex.sum() + ey.sum())


def jensen_gap(U: DirectorField) -> float:
    """1/2 int_Q |Du|^2 - 1/2 int |D u_bar|^2, non-negative by convexity."""
    domain = U.grid.base
    cx, cy = domain.edge_coefficients()
    ex, ey = _planar_dirichlet(U.planar, cx, cy)
    tau = U.grid.layer_weights()
    layered = 0.5 * float(np.dot(ex.sum(axis=(0, 1)) + ey.sum(axis=(0, 1)), tau))
    return layered - planar_dirichlet_energy(vertical_average(U))


# --- Inequality checks ---


def _h2(U: DirectorField) -> float:
    hx, hy, hz = U.grid.spacing
    return max(hx, hy, hz) ** 2


def check_gl_bound(U: DirectorField, p: ScalingParams, c_star: Optional[float] = None) -> GLBoundReport:
    """
    Check GL_eps(u_bar) <= max(1, 2 eta^2 / eps^2) F_eps(U).

    With c_star given and 2 eta^2 <= (1 - c_star) eps^2, also checks the sharper
    GL_eps(u_bar) + c_star / (2 eta^2) int |d3 U|^2 <= F_eps(U).
    """
    u_bar = vertical_average(U)
    lhs = gl_energy(u_bar, p.eps)
    breakdown = energy_full(U, p)
    factor = p.growth_factor()
    rhs = factor * breakdown.total

    slack_relative = CHECK_RELATIVE_SLACK * abs(rhs)
    slack_h2 = CHECK_H2_SLACK * _h2(U)
    holds = lhs <= rhs + slack_relative + slack_h2
    if not holds:
        logger.warning("GL bound violated: %.10g > %.10g", lhs, rhs)

    sharp_lhs = sharp_holds = None
    if c_star is not None:
        if p.sharp_bound_applies(c_star):
            # bulk_vertical = 1/(2 eta^2) int |d3 U|^2
            sharp_lhs = lhs + c_star * breakdown.bulk_vertical
            sharp_holds = sharp_lhs <= breakdown.total + CHECK_RELATIVE_SLACK * abs(breakdown.total) + slack_h2
        else:
            logger.info("Sharp GL bound not applicable for %s with c*=%g", p, c_star)

    return GLBoundReport(
        lhs=lhs,
        rhs=rhs,
        factor=factor,
        slack_relative=slack_relative,
        slack_h2=slack_h2,
        holds=bool(holds),
        c_star=c_star,
        sharp_lhs=sharp_lhs,
        sharp_holds=None if sharp_holds is None else bool(sharp_holds),
    )


def check_average_bound(U: DirectorField) -> AverageBoundReport:
    """Layer-wise check of ||u_bar - u(., x3)||_L2 <= ||d3 U||_L2(Q) / sqrt(2)."""
    grid = U.grid
    area = grid.base.mass_diagonal()
    u_bar = vertical_average(U).values
    diff = U.planar - u_bar[:, :, None, :]
    layer_distances = np.sqrt(np.sum(area[:, :, None] * np.sum(diff * diff, axis=-1), axis=(0, 1)))

    derivative_norm = math.sqrt(float(np.sum(area * _vertical_differences(U.values).sum(axis=2))) / grid.hz)
    rhs = derivative_norm / math.sqrt(2.0)
    slack_relative = CHECK_RELATIVE_SLACK * rhs
    slack_h2 = CHECK_H2_SLACK * _h2(U)
    layer_holds = tuple(bool(d <= rhs + slack_relative + slack_h2) for d in layer_distances)
    return AverageBoundReport(
        layer_distances=tuple(float(d) for d in layer_distances),
        derivative_norm=derivative_norm,
        rhs=rhs,
        slack_relative=slack_relative,
        slack_h2=slack_h2,
        layer_holds=layer_holds,
    )
