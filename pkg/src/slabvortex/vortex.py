"""
Currents, Jacobians, loop degrees and defect location for planar fields.
"""
import logging
import math
from typing import Sequence

import numpy as np

from slabvortex.constants import (
    DEFAULT_CORE_THRESHOLD,
    DEGREE_NORM_FLOOR,
    INTEGER_TOLERANCE,
    ZERO_CHARGE_REPORT_DIAMETER,
)
from slabvortex.domain import Domain2D
from slabvortex.fields import PlanarField
from slabvortex.graph import PlaquetteGraph
from slabvortex.models import DegreeMethod, Defect, DefectSet, NodeKind, Provenance

logger = logging.getLogger(__name__)


class IllDefinedDegreeError(ValueError):
    """Raised when a loop passes through a defect core (|u| below the floor)."""
    pass


def _wrap(angle: np.ndarray) -> np.ndarray:
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def _centered(values: np.ndarray, domain: Domain2D) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences d/dx, d/dy at nodes with both neighbors on the grid; zero elsewhere."""
    dx = np.zeros_like(values)
    dy = np.zeros_like(values)
    dx[1:-1] = (values[2:] - values[:-2]) / (2.0 * domain.hx)
    dy[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * domain.hy)
    return dx, dy


def current(u: PlanarField) -> np.ndarray:
    """
    j(u) = u1 Du2 - u2 Du1 at interior nodes, shape (Nx, Ny, 2).

    Non-interior nodes get zero.
    """
    domain = u.domain
    u1, u2 = u.values[..., 0], u.values[..., 1]
    d1x, d1y = _centered(u1, domain)
    d2x, d2y = _centered(u2, domain)
    j = np.stack([u1 * d2x - u2 * d1x, u1 * d2y - u2 * d1y], axis=-1)
    j[~domain.interior_mask] = 0.0
    return j


def _curl_support(domain: Domain2D) -> np.ndarray:
    """Interior nodes whose four neighbors are interior too."""
    interior = domain.interior_mask
    support = np.zeros_like(interior)
    support[1:-1, 1:-1] = (
        interior[1:-1, 1:-1]
        & interior[2:, 1:-1] & interior[:-2, 1:-1]
        & interior[1:-1, 2:] & interior[1:-1, :-2]
    )
    return support


def jacobian(u: PlanarField) -> np.ndarray:
    """
    Ju = curl j(u) by centered differences, shape (Nx, Ny).

    Defined on interior nodes whose neighbors are interior; zero elsewhere.
    For smooth u this approximates 2 det Du to second order.
    """
    domain = u.domain
    j = current(u)
    _, djx_dy = _centered(j[..., 0], domain)
    djy_dx, _ = _centered(j[..., 1], domain)
    jac = djy_dx - djx_dy
    jac[~_curl_support(domain)] = 0.0
    return jac


def jacobian_support(domain: Domain2D) -> np.ndarray:
    """Mask of the nodes where jacobian() is defined."""
    return _curl_support(domain)


def divergence(field: PlanarField | np.ndarray, domain: Domain2D | None = None) -> np.ndarray:
    """Centered divergence of a planar vector field on the jacobian support; zero elsewhere."""
    if isinstance(field, PlanarField):
        domain = field.domain
        values = field.values
    else:
        values = np.asarray(field, dtype=float)
    dxx, _ = _centered(values[..., 0], domain)
    _, dyy = _centered(values[..., 1], domain)
    div = dxx + dyy
    div[~_curl_support(domain)] = 0.0
    return div


def square_loop(domain: Domain2D, center, half_width: int) -> list[tuple[int, int]]:
    """
    Counterclockwise node cycle around a square of half width (in cells).

    Args:
        domain: Grid the loop lives on
        center: Node index (i, j) or a point (x, y) snapped to the nearest node
        half_width: Half side length in cells, >= 1
    """
    if half_width < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width!r}")
    if all(isinstance(c, (int, np.integer)) for c in center):
        ci, cj = int(center[0]), int(center[1])
    else:
        ci, cj = domain.nearest_node(center)
    w = int(half_width)
    Nx, Ny = domain.node_shape
    if ci - w < 0 or cj - w < 0 or ci + w >= Nx or cj + w >= Ny:
        raise ValueError(f"loop of half width {w} around ({ci}, {cj}) leaves the grid")

    loop = []
    loop += [(ci + k, cj - w) for k in range(-w, w)]         # bottom, left to right
    loop += [(ci + w, cj + k) for k in range(-w, w)]         # right, upwards
    loop += [(ci - k, cj + w) for k in range(-w, w)]         # top, right to left
    loop += [(ci - w, cj - k) for k in range(-w, w)]         # left, downwards
    return loop


def degree_on_loop(
    u: PlanarField,
    loop: Sequence[tuple[int, int]],
    method: DegreeMethod = DegreeMethod.INCREMENTS,
) -> int:
    """
    Winding number of u along a closed node cycle.

    INCREMENTS sums branch-corrected angle increments of u/|u| (exact integer);
    CURRENT integrates j(u).tau / |u|^2 edge by edge and rounds, as a cross-check.

    Raises:
        IllDefinedDegreeError: If |u| < 0.5 at a loop node
    """
    index = np.asarray(loop, dtype=int).reshape(-1, 2)
    if index.shape[0] < 3:
        raise ValueError("a loop needs at least three nodes")
    values = u.values[index[:, 0], index[:, 1]]
    norms = np.hypot(values[:, 0], values[:, 1])
    low = np.flatnonzero(norms < DEGREE_NORM_FLOOR)
    if low.size:
        i, j = index[low[0]]
        raise IllDefinedDegreeError(
            f"|u| = {norms[low[0]]:.3g} < {DEGREE_NORM_FLOOR} at node ({i}, {j}); "
            "the loop crosses a defect core"
        )

    following = np.roll(values, -1, axis=0)
    if method == DegreeMethod.CURRENT:
        mid = 0.5 * (values + following)
        cross = values[:, 0] * following[:, 1] - values[:, 1] * following[:, 0]
        total = float(np.sum(cross / np.sum(mid * mid, axis=-1)))
    else:
        angle = np.arctan2(values[:, 1], values[:, 0])
        total = float(np.sum(_wrap(np.roll(angle, -1) - angle)))

    winding = total / (2.0 * math.pi)
    rounded = int(round(winding))
    if method == DegreeMethod.INCREMENTS and abs(winding - rounded) > INTEGER_TOLERANCE:
        logger.warning("Loop winding %.8f is not an integer", winding)
    return rounded


def plaquette_windings(u: PlanarField) -> tuple[np.ndarray, np.ndarray]:
    """
    Winding of every plaquette and whether all four corners are active.

    Returns:
        (windings (Nx-1, Ny-1) int, valid (Nx-1, Ny-1) bool)
    """
    domain = u.domain
    angle = np.arctan2(u.values[..., 1], u.values[..., 0])
    a00, a10 = angle[:-1, :-1], angle[1:, :-1]
    a11, a01 = angle[1:, 1:], angle[:-1, 1:]
    total = _wrap(a10 - a00) + _wrap(a11 - a10) + _wrap(a01 - a11) + _wrap(a00 - a01)
    windings = np.rint(total / (2.0 * math.pi)).astype(int)

    active = domain.active_mask
    valid = active[:-1, :-1] & active[1:, :-1] & active[1:, 1:] & active[:-1, 1:]
    windings[~valid] = 0
    return windings, valid


def locate_defects(u: PlanarField, core_threshold: float = DEFAULT_CORE_THRESHOLD) -> DefectSet:
    """
    Find point defects of a planar field.

    Plaquettes with a nonzero winding or a corner with |u| < core_threshold
    are grouped by 8-connectivity. Each cluster with a nonzero net winding
    becomes a defect at the centroid of its plaquettes weighted by
    (core_threshold - min corner |u|)+, or by |winding| when no corner is
    below the threshold.

    A Defect always carries a nonzero charge, so zero-charge clusters never
    become defects. Those at least ZERO_CHARGE_REPORT_DIAMETER (3) cells wide
    are reported through a warning on the result instead of being discarded
    silently; narrower ones are dropped. Clusters touching the boundary also
    leave a warning.
    """
    domain = u.domain
    windings, valid = plaquette_windings(u)
    norms = u.norms()
    corner_min = np.minimum.reduce([norms[:-1, :-1], norms[1:, :-1], norms[1:, 1:], norms[:-1, 1:]])
    flagged = valid & ((windings != 0) | (corner_min < core_threshold))

    boundary = domain.kinds == NodeKind.BOUNDARY
    corner_boundary = boundary[:-1, :-1] | boundary[1:, :-1] | boundary[1:, 1:] | boundary[:-1, 1:]
    cx = 0.5 * (domain.x[:-1] + domain.x[1:])
    cy = 0.5 * (domain.y[:-1] + domain.y[1:])

    graph = PlaquetteGraph()
    for i, j in np.argwhere(flagged):
        graph.add_plaquette(
            i, j,
            winding=int(windings[i, j]),
            weight=max(core_threshold - float(corner_min[i, j]), 0.0),
            center=(float(cx[i]), float(cy[j])),
            touches_boundary=bool(corner_boundary[i, j]),
        )
    graph.connect_neighbors()

    defects: list[Defect] = []
    warnings: list[str] = []
    for cluster in graph.clusters():
        charge = graph.cluster_charge(cluster)
        attrs = [graph.attributes(n) for n in cluster]
        if charge == 0:
            diameter = graph.cluster_diameter(cluster)
            if diameter >= ZERO_CHARGE_REPORT_DIAMETER:
                first = attrs[0]["center"]
                warnings.append(
                    f"zero-charge core of diameter {diameter} cells near ({first[0]:.4f}, {first[1]:.4f})"
                )
            continue

        weights = np.array([a["weight"] for a in attrs])
        if weights.sum() <= 0.0:
            weights = np.array([abs(a["winding"]) for a in attrs], dtype=float)
        centers = np.array([a["center"] for a in attrs])
        position = weights @ centers / weights.sum()
        defects.append(Defect(float(position[0]), float(position[1]), charge))

        if graph.touches_boundary(cluster):
            warnings.append(
                f"defect of charge {charge:+d} at ({position[0]:.4f}, {position[1]:.4f}) touches the boundary"
            )

    for message in warnings:
        logger.warning(message)
    logger.debug("Located %d defect(s) from %d flagged plaquettes", len(defects), len(graph))
    return DefectSet(items=tuple(defects), provenance=Provenance.DETECTED, warnings=tuple(warnings))
