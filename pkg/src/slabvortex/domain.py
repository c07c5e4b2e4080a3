"""
Cross-section geometry, masked Cartesian grids and lateral boundary data.

A Domain2D is a node grid over the bounding box of a shape. Every node carries
a kind (interior, boundary, exterior), an area weight and the weights of its
incident grid edges; the energies and solvers only ever see those weights,
so curved and straight shapes go through the same code path.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from slabvortex.constants import (
    CURVED_DOMAIN_PADDING,
    INSIDE_TOLERANCE,
    MIN_LAYERS,
    MIN_RESOLUTION,
    WEIGHT_SUBSAMPLES,
)
from slabvortex.models import DatumKind, DomainKind, NodeKind
from slabvortex.params import InvalidParameterError

logger = logging.getLogger(__name__)


class InvalidGeometryError(ValueError):
    """Raised when a shape has degenerate or inconsistent dimensions."""
    pass


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def _require_dimension(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidGeometryError(f"{name} must be a positive finite length, got {value!r}")
    return value


# =============================================================================
# Shapes
# =============================================================================


class Shape(ABC):
    """Analytic description of a cross-section centered at the origin."""

    kind: DomainKind

    @property
    def centroid(self) -> np.ndarray:
        return np.zeros(2)

    @property
    @abstractmethod
    def half_extent(self) -> tuple[float, float]:
        """Half width and half height of the bounding box."""

    @property
    @abstractmethod
    def area(self) -> float:
        """Analytic area."""

    @property
    @abstractmethod
    def perimeter(self) -> float:
        """Length of the outer boundary."""

    @property
    @abstractmethod
    def dims(self) -> dict:
        """Defining dimensions, keyed as in the run configuration."""

    @property
    def curved(self) -> bool:
        return True

    @property
    def simply_connected(self) -> bool:
        return True

    @property
    def size(self) -> float:
        """Diameter of the bounding box."""
        hx, hy = self.half_extent
        return 2.0 * math.hypot(hx, hy)

    @abstractmethod
    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to the boundary, negative inside. points has shape (..., 2)."""

    def contains(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        """Point containment; strict excludes a tolerance band around the boundary."""
        distance = self.signed_distance(points)
        if strict:
            return distance < -INSIDE_TOLERANCE * self.size
        return distance <= 0.0

    @abstractmethod
    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Nearest boundary point of each point.

        Returns:
            (projections, outward unit normals, component index) where the
            component is 0 for the outer boundary and 1 for an inner one
        """

    @abstractmethod
    def boundary_quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Quadrature of the outer boundary, counterclockwise.

        Returns:
            (points (n, 2), outward normals (n, 2), arc-length weights (n,))
        """


@dataclass(frozen=True)
class Disk(Shape):
    """Disk of the given radius about the origin."""
    radius: float
    kind = DomainKind.DISK

    def __post_init__(self):
        object.__setattr__(self, "radius", _require_dimension("radius", self.radius))

    def __str__(self) -> str:
        return f"disk(radius={self.radius:g})"

    @property
    def half_extent(self) -> tuple[float, float]:
        return (self.radius, self.radius)

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    @property
    def dims(self) -> dict:
        return {"radius": self.radius}

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.hypot(points[..., 0], points[..., 1]) - self.radius

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        r = np.hypot(points[..., 0], points[..., 1])
        safe = np.where(r > 0.0, r, 1.0)
        normals = np.where((r > 0.0)[..., None], points / safe[..., None], np.array([1.0, 0.0]))
        return self.radius * normals, normals, np.zeros(r.shape, dtype=int)

    def boundary_quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = 2.0 * np.pi * np.arange(n) / n
        normals = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        weights = np.full(n, self.perimeter / n)
        return self.radius * normals, normals, weights


@dataclass(frozen=True)
class Rectangle(Shape):
    """Axis-aligned rectangle centered at the origin."""
    width: float
    height: float
    kind = DomainKind.RECTANGLE

    def __post_init__(self):
        object.__setattr__(self, "width", _require_dimension("width", self.width))
        object.__setattr__(self, "height", _require_dimension("height", self.height))

    def __str__(self) -> str:
        return f"rectangle(width={self.width:g}, height={self.height:g})"

    @property
    def half_extent(self) -> tuple[float, float]:
        return (0.5 * self.width, 0.5 * self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def dims(self) -> dict:
        return {"width": self.width, "height": self.height}

    @property
    def curved(self) -> bool:
        return False

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        a, b = self.half_extent
        qx = np.abs(points[..., 0]) - a
        qy = np.abs(points[..., 1]) - b
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        a, b = self.half_extent
        x, y = points[..., 0], points[..., 1]
        clamped = np.stack([np.clip(x, -a, a), np.clip(y, -b, b)], axis=-1)
        is_outside = (np.abs(x) > a) | (np.abs(y) > b)

        # Inside: move to the nearest side
        gap_x = a - np.abs(x)
        gap_y = b - np.abs(y)
        to_side_x = gap_x <= gap_y
        inner = np.where(
            to_side_x[..., None],
            np.stack([np.copysign(a, x), y], axis=-1),
            np.stack([x, np.copysign(b, y)], axis=-1),
        )
        inner_normals = np.where(
            to_side_x[..., None],
            np.stack([np.copysign(1.0, x), np.zeros_like(x)], axis=-1),
            np.stack([np.zeros_like(y), np.copysign(1.0, y)], axis=-1),
        )

        offset = points - clamped
        length = np.hypot(offset[..., 0], offset[..., 1])
        outer_normals = offset / np.where(length > 0.0, length, 1.0)[..., None]

        projections = np.where(is_outside[..., None], clamped, inner)
        normals = np.where(is_outside[..., None], outer_normals, inner_normals)
        return projections, normals, np.zeros(x.shape, dtype=int)

    def boundary_quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a, b = self.half_extent
        # Sides counterclockwise from the bottom-right corner: right, top, left, bottom
        sides = [
            ((a, -b), (a, b), (1.0, 0.0)),
            ((a, b), (-a, b), (0.0, 1.0)),
            ((-a, b), (-a, -b), (-1.0, 0.0)),
            ((-a, -b), (a, -b), (0.0, -1.0)),
        ]
        points, normals, weights = [], [], []
        for start, end, normal in sides:
            start, end = np.array(start), np.array(end)
            length = float(np.linalg.norm(end - start))
            count = max(1, int(round(n * length / self.perimeter)))
            s = (np.arange(count) + 0.5) / count
            points.append(start + s[:, None] * (end - start))
            normals.append(np.tile(normal, (count, 1)))
            weights.append(np.full(count, length / count))
        return np.concatenate(points), np.concatenate(normals), np.concatenate(weights)


@dataclass(frozen=True)
class Annulus(Shape):
    """Ring r_in < |x| < r_out; only used for analytic fixtures and core checks."""
    r_in: float
    r_out: float
    kind = DomainKind.ANNULUS

    def __post_init__(self):
        object.__setattr__(self, "r_in", _require_dimension("r_in", self.r_in))
        object.__setattr__(self, "r_out", _require_dimension("r_out", self.r_out))
        if self.r_in >= self.r_out:
            raise InvalidGeometryError(
                f"annulus needs r_in < r_out, got r_in={self.r_in!r}, r_out={self.r_out!r}"
            )

    def __str__(self) -> str:
        return f"annulus(r_in={self.r_in:g}, r_out={self.r_out:g})"

    @property
    def half_extent(self) -> tuple[float, float]:
        return (self.r_out, self.r_out)

    @property
    def area(self) -> float:
        return math.pi * (self.r_out ** 2 - self.r_in ** 2)

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.r_out

    @property
    def dims(self) -> dict:
        return {"r_in": self.r_in, "r_out": self.r_out}

    @property
    def simply_connected(self) -> bool:
        return False

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        r = np.hypot(points[..., 0], points[..., 1])
        return np.maximum(r - self.r_out, self.r_in - r)

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        r = np.hypot(points[..., 0], points[..., 1])
        safe = np.where(r > 0.0, r, 1.0)
        radial = np.where((r > 0.0)[..., None], points / safe[..., None], np.array([1.0, 0.0]))
        inner = np.abs(r - self.r_in) < np.abs(r - self.r_out)
        radius = np.where(inner, self.r_in, self.r_out)
        normals = np.where(inner[..., None], -radial, radial)
        return radius[..., None] * radial, normals, inner.astype(int)

    def boundary_quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = 2.0 * np.pi * np.arange(n) / n
        normals = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return self.r_out * normals, normals, np.full(n, self.perimeter / n)


def shape_from_dims(kind: DomainKind | str, **dims: float) -> Shape:
    """Build a shape from its kind and configuration dimensions."""
    if isinstance(kind, str):
        kind = DomainKind.from_str(kind)
    try:
        if kind == DomainKind.DISK:
            return Disk(dims["radius"])
        if kind == DomainKind.RECTANGLE:
            return Rectangle(dims["width"], dims["height"])
        return Annulus(dims["r_in"], dims["r_out"])
    except KeyError as e:
        raise InvalidGeometryError(f"{kind.value} requires dimension {e.args[0]!r}") from None


# =============================================================================
# Domain2D
# =============================================================================


@dataclass(frozen=True, eq=False)
class Domain2D:
    """
    Masked node grid over the bounding box of a shape.

    Arrays are indexed [i, j] with i along x. Node weights are the area
    fractions of the dual cells inside the shape; edge weights are the area
    fractions of the dual strips around each grid edge. Boundary nodes are
    stored as the counterclockwise chain of the outer boundary followed by
    any inner-boundary nodes.
    """
    shape: Shape
    nx: int
    ny: int
    x: np.ndarray
    y: np.ndarray
    kinds: np.ndarray
    node_weight: np.ndarray
    edge_weight_x: np.ndarray
    edge_weight_y: np.ndarray
    boundary_index: np.ndarray
    boundary_points: np.ndarray
    boundary_normals: np.ndarray
    chain_length: int
    arc_length: np.ndarray

    def __str__(self) -> str:
        return f"{self.shape} on {self.nx}x{self.ny} cells ({self.kinds.size} nodes)"

    @property
    def kind(self) -> DomainKind:
        return self.shape.kind

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def cell_size(self) -> float:
        return max(self.hx, self.hy)

    @property
    def centroid(self) -> np.ndarray:
        return self.shape.centroid

    @property
    def interior_mask(self) -> np.ndarray:
        return self.kinds == NodeKind.INTERIOR

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.kinds == NodeKind.BOUNDARY

    @property
    def active_mask(self) -> np.ndarray:
        return self.kinds != NodeKind.EXTERIOR

    @property
    def chain_index(self) -> np.ndarray:
        """Node indices of the outer boundary chain, counterclockwise."""
        return self.boundary_index[: self.chain_length]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays X, Y of shape (Nx, Ny)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def points(self) -> np.ndarray:
        """Node coordinates as an (Nx, Ny, 2) array."""
        X, Y = self.coordinates()
        return np.stack([X, Y], axis=-1)

    def node_point(self, i: int, j: int) -> tuple[float, float]:
        return (float(self.x[i]), float(self.y[j]))

    def nearest_node(self, point) -> tuple[int, int]:
        """Grid node closest to a point (clamped to the grid)."""
        i = int(np.clip(np.rint((point[0] - self.x[0]) / self.hx), 0, self.x.size - 1))
        j = int(np.clip(np.rint((point[1] - self.y[0]) / self.hy), 0, self.y.size - 1))
        return i, j

    def mass_diagonal(self) -> np.ndarray:
        """Lumped node areas (Nx, Ny)."""
        return self.node_weight * (self.hx * self.hy)

    @property
    def area(self) -> float:
        """Discrete area: the sum of the lumped node areas."""
        return float(self.mass_diagonal().sum())

    def edge_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Stiffness coefficients of x-edges (Nx-1, Ny) and y-edges (Nx, Ny-1)."""
        return (
            self.edge_weight_x * (self.hy / self.hx),
            self.edge_weight_y * (self.hx / self.hy),
        )

    def stiffness_matrix(self) -> sp.csr_matrix:
        """
        Weighted 5-point Laplacian over all nodes, flattened in C order.

        The quadratic form u^T K u equals the sum over edges of c_e |u_a - u_b|^2.
        """
        cx, cy = self.edge_coefficients()
        Nx, Ny = self.node_shape
        index = np.arange(Nx * Ny).reshape(Nx, Ny)

        heads = [index[:-1, :].ravel(), index[:, :-1].ravel()]
        tails = [index[1:, :].ravel(), index[:, 1:].ravel()]
        coeffs = [cx.ravel(), cy.ravel()]
        a = np.concatenate(heads)
        b = np.concatenate(tails)
        c = np.concatenate(coeffs)

        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([c, c, -c, -c])
        return sp.csr_matrix((vals, (rows, cols)), shape=(Nx * Ny, Nx * Ny))

    def signed_chain_area(self) -> float:
        """Shoelace area of the projected outer chain; positive when counterclockwise."""
        p = self.boundary_points[: self.chain_length]
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def _normalize_resolution(resolution: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(resolution, (tuple, list)):
        if len(resolution) != 2:
            raise InvalidParameterError(f"resolution must be an int or (nx, ny), got {resolution!r}")
        nx, ny = int(resolution[0]), int(resolution[1])
    else:
        nx = ny = int(resolution)
    if min(nx, ny) < MIN_RESOLUTION:
        raise InvalidParameterError(
            f"resolution must be at least {MIN_RESOLUTION} cells per side, got ({nx}, {ny})"
        )
    return nx, ny


def _block_mean(fine: np.ndarray, rows: int, cols: int, s: int) -> np.ndarray:
    return fine.reshape(rows, s, cols, s).mean(axis=(1, 3))


def make_domain(shape: Shape, resolution: int | tuple[int, int]) -> Domain2D:
    """
    Build the masked grid of a shape.

    Args:
        shape: Cross-section (Disk, Rectangle or Annulus)
        resolution: Cells across the shape per axis, an int or (nx, ny)

    Returns:
        Domain2D with node kinds, quadrature weights and the boundary chain.
        Rectangles have nodes exactly on their sides; curved shapes get
        padding layers so that ghost nodes outside the boundary exist.

    Raises:
        InvalidParameterError: If the resolution is below the minimum
    """
    nx, ny = _normalize_resolution(resolution)
    a, b = shape.half_extent
    pad = CURVED_DOMAIN_PADDING if shape.curved else 0
    hx, hy = 2.0 * a / nx, 2.0 * b / ny
    x = np.linspace(-a - pad * hx, a + pad * hx, nx + 1 + 2 * pad)
    y = np.linspace(-b - pad * hy, b + pad * hy, ny + 1 + 2 * pad)
    Nx, Ny = x.size, y.size

    s = WEIGHT_SUBSAMPLES
    fx = x[0] - 0.5 * hx + (np.arange(Nx * s) + 0.5) * (hx / s)
    fy = y[0] - 0.5 * hy + (np.arange(Ny * s) + 0.5) * (hy / s)
    FX, FY = np.meshgrid(fx, fy, indexing="ij")
    fine = (shape.signed_distance(np.stack([FX, FY], axis=-1)) < 0.0).astype(float)
    del FX, FY

    node_weight = _block_mean(fine, Nx, Ny, s)
    half = s // 2
    edge_x = _block_mean(fine[half: half + (Nx - 1) * s, :], Nx - 1, Ny, s)
    edge_y = _block_mean(fine[:, half: half + (Ny - 1) * s], Nx, Ny - 1, s)

    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.stack([X, Y], axis=-1)
    inside = shape.contains(nodes, strict=True) & (node_weight > 0.0)

    active = node_weight > 0.0
    active[:-1, :] |= edge_x > 0.0
    active[1:, :] |= edge_x > 0.0
    active[:, :-1] |= edge_y > 0.0
    active[:, 1:] |= edge_y > 0.0
    # Neighbors of free nodes always carry data
    active[:-1, :] |= inside[1:, :]
    active[1:, :] |= inside[:-1, :]
    active[:, :-1] |= inside[:, 1:]
    active[:, 1:] |= inside[:, :-1]

    kinds = np.full((Nx, Ny), NodeKind.EXTERIOR, dtype=np.int8)
    kinds[active] = NodeKind.BOUNDARY
    kinds[inside] = NodeKind.INTERIOR

    bi, bj = np.nonzero(kinds == NodeKind.BOUNDARY)
    proj, normals, component = shape.project(nodes[bi, bj])
    rel = proj - shape.centroid
    angle = np.arctan2(rel[:, 1], rel[:, 0])
    radius = np.hypot(nodes[bi, bj, 0], nodes[bi, bj, 1])
    outer = np.flatnonzero(component == 0)
    outer = outer[np.lexsort((radius[outer], angle[outer]))]
    inner = np.flatnonzero(component != 0)
    inner = inner[np.lexsort((radius[inner], angle[inner]))]
    order = np.concatenate([outer, inner])

    boundary_index = np.stack([bi[order], bj[order]], axis=-1)
    chain_points = proj[outer]
    steps = np.linalg.norm(np.diff(chain_points, axis=0), axis=-1) if outer.size else np.zeros(0)
    arc_length = np.concatenate([[0.0], np.cumsum(steps)]) if outer.size else np.zeros(0)

    domain = Domain2D(
        shape=shape,
        nx=nx,
        ny=ny,
        x=_readonly(x),
        y=_readonly(y),
        kinds=_readonly(kinds),
        node_weight=_readonly(node_weight),
        edge_weight_x=_readonly(edge_x),
        edge_weight_y=_readonly(edge_y),
        boundary_index=_readonly(boundary_index),
        boundary_points=_readonly(proj[order]),
        boundary_normals=_readonly(normals[order]),
        chain_length=int(outer.size),
        arc_length=_readonly(arc_length),
    )
    logger.debug(
        "Built %s: %d interior, %d boundary nodes, area %.6g (analytic %.6g)",
        domain, int(inside.sum()), int(bi.size), domain.area, shape.area,
    )
    return domain


# =============================================================================
# Grid3D
# =============================================================================


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Extrusion of a Domain2D over x3 in [0, 1] with n_layers nodes."""
    base: Domain2D
    n_layers: int

    @property
    def hz(self) -> float:
        return 1.0 / (self.n_layers - 1)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.base.hx, self.base.hy, self.hz)

    @property
    def node_shape(self) -> tuple[int, int, int]:
        Nx, Ny = self.base.node_shape
        return (Nx, Ny, self.n_layers)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_layers)

    def layer_weights(self) -> np.ndarray:
        """Trapezoid weights in x3; they sum to one."""
        tau = np.full(self.n_layers, self.hz)
        tau[0] = tau[-1] = 0.5 * self.hz
        return tau

    def lateral_mask(self) -> np.ndarray:
        """Nodes carrying the Dirichlet datum, shape (Nx, Ny, Nz)."""
        return np.repeat(self.base.boundary_mask[:, :, None], self.n_layers, axis=2)

    def free_mask(self) -> np.ndarray:
        """Nodes updated by the solvers, including the top and bottom faces."""
        return np.repeat(self.base.interior_mask[:, :, None], self.n_layers, axis=2)

    def face_mask(self, face: str) -> np.ndarray:
        """Mask of the 'lateral', 'top' or 'bottom' face."""
        if face == "lateral":
            return self.lateral_mask()
        mask = np.zeros(self.node_shape, dtype=bool)
        if face == "top":
            mask[:, :, -1] = self.base.active_mask
        elif face == "bottom":
            mask[:, :, 0] = self.base.active_mask
        else:
            raise ValueError(f"Unknown face {face!r}")
        return mask

    @property
    def lateral_node_count(self) -> int:
        return int(self.base.boundary_index.shape[0]) * self.n_layers


def extrude(domain: Domain2D, n_layers: int) -> Grid3D:
    """
    Extrude a cross-section into the slab grid.

    Raises:
        InvalidParameterError: If n_layers < 2
    """
    if int(n_layers) != n_layers or n_layers < MIN_LAYERS:
        raise InvalidParameterError(f"n_layers must be an integer >= {MIN_LAYERS}, got {n_layers!r}")
    return Grid3D(base=domain, n_layers=int(n_layers))


# =============================================================================
# Boundary data
# =============================================================================


def _wrap(angle: np.ndarray) -> np.ndarray:
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    """
    Unit planar datum g on the boundary nodes of a domain.

    values follow domain.boundary_index. Power-law data g = exp(i(d theta + alpha))
    keep their analytic form so that they can be evaluated anywhere on the
    boundary; sampled data fall back to the nearest boundary node.
    """
    domain: Domain2D
    values: np.ndarray
    kind: DatumKind = DatumKind.SAMPLED
    power: Optional[int] = None
    rotation: float = 0.0
    _degree: Optional[int] = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.domain.boundary_index.shape[0], 2)
        if values.shape != expected:
            raise ValueError(f"datum values must have shape {expected}, got {values.shape}")
        norms = np.hypot(values[:, 0], values[:, 1])
        if values.size and np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("boundary datum must be unit-valued at every node")
        object.__setattr__(self, "values", _readonly(values))

    def __str__(self) -> str:
        if self.kind == DatumKind.POWER_LAW:
            return f"g = exp(i({self.power} theta + {self.rotation:g}))"
        return f"sampled datum of degree {self.degree}"

    @property
    def degree(self) -> int:
        """Winding number of g along the outer chain."""
        if self._degree is None:
            chain = self.values[: self.domain.chain_length]
            angle = np.arctan2(chain[:, 1], chain[:, 0])
            increments = _wrap(np.diff(np.concatenate([angle, angle[:1]])))
            object.__setattr__(self, "_degree", int(round(increments.sum() / (2.0 * np.pi))))
        return self._degree

    def phase(self, points: np.ndarray) -> np.ndarray:
        """Angle of g at boundary points (not unwrapped)."""
        g = self.at(points)
        return np.arctan2(g[..., 1], g[..., 0])

    def at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate g at arbitrary boundary points, shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        if self.kind == DatumKind.POWER_LAW:
            rel = points - self.domain.centroid
            theta = self.power * np.arctan2(rel[..., 1], rel[..., 0]) + self.rotation
            return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        flat = points.reshape(-1, 2)
        ref = self.domain.boundary_points
        nearest = np.argmin(
            (flat[:, None, 0] - ref[None, :, 0]) ** 2 + (flat[:, None, 1] - ref[None, :, 1]) ** 2,
            axis=1,
        )
        return self.values[nearest].reshape(points.shape)

    def phase_derivative(self, points: np.ndarray, tangents: np.ndarray) -> Optional[np.ndarray]:
        """
        Tangential derivative g x d_tau g at boundary points.

        Only power-law data have a closed form; returns None otherwise.
        """
        if self.kind != DatumKind.POWER_LAW:
            return None
        rel = np.asarray(points, dtype=float) - self.domain.centroid
        r2 = rel[..., 0] ** 2 + rel[..., 1] ** 2
        return self.power * (rel[..., 0] * tangents[..., 1] - rel[..., 1] * tangents[..., 0]) / r2

    def conjugate(self) -> "BoundaryDatum":
        """Complex conjugate datum, of degree -d."""
        values = self.values * np.array([1.0, -1.0])
        return BoundaryDatum(
            domain=self.domain,
            values=values,
            kind=self.kind,
            power=None if self.power is None else -self.power,
            rotation=-self.rotation,
        )

    def rotated(self, alpha: float) -> "BoundaryDatum":
        """Datum rotated by a constant planar angle alpha."""
        c, s = math.cos(alpha), math.sin(alpha)
        values = self.values @ np.array([[c, s], [-s, c]])
        return BoundaryDatum(
            domain=self.domain,
            values=values,
            kind=self.kind,
            power=self.power,
            rotation=self.rotation + alpha,
        )

    def to_grid(self) -> np.ndarray:
        """Datum scattered onto the node grid, (Nx, Ny, 2), zero off the boundary."""
        out = np.zeros(self.domain.node_shape + (2,))
        bi, bj = self.domain.boundary_index.T
        out[bi, bj] = self.values
        return out


def power_law_datum(domain: Domain2D, d: int, rotation: float = 0.0) -> BoundaryDatum:
    """
    The datum g = (cos(d theta + rotation), sin(d theta + rotation)).

    theta is the angle of each boundary node's projection about the centroid,
    so ghost nodes outside a curved boundary take the value of their
    nearest boundary point.
    """
    if int(d) != d:
        raise InvalidParameterError(f"degree must be an integer, got {d!r}")
    d = int(d)
    rel = domain.boundary_points - domain.centroid
    theta = d * np.arctan2(rel[:, 1], rel[:, 0]) + rotation
    values = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return BoundaryDatum(
        domain=domain,
        values=values,
        kind=DatumKind.POWER_LAW,
        power=d,
        rotation=float(rotation),
    )
