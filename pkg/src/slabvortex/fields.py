"""
Grid fields: director fields on the slab, planar and scalar fields on the cross-section.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from slabvortex.constants import UNIT_NORM_TOLERANCE
from slabvortex.domain import BoundaryDatum, Domain2D, Grid3D


class ShapeError(ValueError):
    """Raised when field values do not match their grid or are not finite."""
    pass


def _checked(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    values = np.array(values, dtype=float)
    if values.shape != shape:
        raise ShapeError(f"{what} values must have shape {shape}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = tuple(int(v) for v in np.argwhere(~np.isfinite(values))[0])
        raise ShapeError(f"{what} has a non-finite value at index {bad}")
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class DirectorField:
    """
    Unit vector field U = (U1, U2, U3) on the nodes of a slab grid.

    values has shape (Nx, Ny, Nz, 3). Exterior nodes carry an arbitrary unit
    vector and never enter an energy.
    """
    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        shape = self.grid.node_shape + (3,)
        object.__setattr__(self, "values", _checked(self.values, shape, "DirectorField"))

    @classmethod
    def constant(cls, grid: Grid3D, vector) -> "DirectorField":
        vector = np.asarray(vector, dtype=float)
        return cls(grid, np.broadcast_to(vector, grid.node_shape + (3,)))

    @classmethod
    def from_function(cls, grid: Grid3D, func: Callable) -> "DirectorField":
        """Sample func(X, Y, Z) -> (..., 3) on every node."""
        X, Y = grid.base.coordinates()
        Z = grid.z
        values = func(X[:, :, None], Y[:, :, None], Z[None, None, :])
        return cls(grid, np.broadcast_to(values, grid.node_shape + (3,)))

    @classmethod
    def from_planar(cls, grid: Grid3D, planar: "PlanarField") -> "DirectorField":
        """x3-independent extension (u, sqrt(1 - |u|^2)) of a planar field with |u| <= 1."""
        u = planar.values
        u3 = np.sqrt(np.clip(1.0 - np.sum(u * u, axis=-1), 0.0, None))
        column = np.concatenate([u, u3[..., None]], axis=-1)
        return cls(grid, np.broadcast_to(column[:, :, None, :], grid.node_shape + (3,)))

    @property
    def planar(self) -> np.ndarray:
        """Projection (U1, U2) onto the plane, shape (Nx, Ny, Nz, 2)."""
        return self.values[..., :2]

    @property
    def perpendicular(self) -> np.ndarray:
        """The out-of-plane component U3, shape (Nx, Ny, Nz)."""
        return self.values[..., 2]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def norm_violations(self, tol: float = UNIT_NORM_TOLERANCE) -> list[tuple[int, int, int, float]]:
        """Active nodes whose |U| differs from one by more than tol, as (i, j, k, |U|)."""
        active = np.repeat(self.grid.base.active_mask[:, :, None], self.grid.n_layers, axis=2)
        norms = self.norms()
        bad = np.argwhere(active & (np.abs(norms - 1.0) > tol))
        return [(int(i), int(j), int(k), float(norms[i, j, k])) for i, j, k in bad]

    def lateral_violations(self, datum: BoundaryDatum, tol: float = UNIT_NORM_TOLERANCE) -> list[tuple[int, int, int, float]]:
        """Lateral nodes whose value differs from (g, 0), as (i, j, k, deviation)."""
        bi, bj = datum.domain.boundary_index.T
        expected = np.concatenate([datum.values, np.zeros((datum.values.shape[0], 1))], axis=-1)
        deviation = np.linalg.norm(self.values[bi, bj, :, :] - expected[:, None, :], axis=-1)
        bad = np.argwhere(deviation > tol)
        return [
            (int(bi[n]), int(bj[n]), int(k), float(deviation[n, k]))
            for n, k in bad
        ]

    def with_values(self, values: np.ndarray) -> "DirectorField":
        return DirectorField(self.grid, values)

    def mirrored(self) -> "DirectorField":
        """The field (U1, -U2, U3)."""
        return self.with_values(self.values * np.array([1.0, -1.0, 1.0]))

    def symmetrized(self) -> "DirectorField":
        """The field (U1, U2, |U3|)."""
        values = self.values.copy()
        values[..., 2] = np.abs(values[..., 2])
        return self.with_values(values)

    def layer(self, k: int) -> "PlanarField":
        """Planar part of layer k."""
        return PlanarField(self.grid.base, self.values[:, :, k, :2])


@dataclass(frozen=True, eq=False)
class PlanarField:
    """R^2-valued field on the nodes of a cross-section, shape (Nx, Ny, 2)."""
    domain: Domain2D
    values: np.ndarray

    def __post_init__(self):
        shape = self.domain.node_shape + (2,)
        object.__setattr__(self, "values", _checked(self.values, shape, "PlanarField"))

    @classmethod
    def constant(cls, domain: Domain2D, vector) -> "PlanarField":
        vector = np.asarray(vector, dtype=float)
        return cls(domain, np.broadcast_to(vector, domain.node_shape + (2,)))

    @classmethod
    def from_function(cls, domain: Domain2D, func: Callable) -> "PlanarField":
        """Sample func(X, Y) -> (..., 2) on every node."""
        X, Y = domain.coordinates()
        return cls(domain, np.broadcast_to(func(X, Y), domain.node_shape + (2,)))

    @classmethod
    def from_complex(cls, domain: Domain2D, z: np.ndarray) -> "PlanarField":
        return cls(domain, np.stack([z.real, z.imag], axis=-1))

    def to_complex(self) -> np.ndarray:
        return self.values[..., 0] + 1j * self.values[..., 1]

    def norms(self) -> np.ndarray:
        return np.hypot(self.values[..., 0], self.values[..., 1])

    def with_values(self, values: np.ndarray) -> "PlanarField":
        return PlanarField(self.domain, values)

    def conjugate(self) -> "PlanarField":
        """The field (u1, -u2)."""
        return self.with_values(self.values * np.array([1.0, -1.0]))

    def with_boundary(self, datum: BoundaryDatum) -> "PlanarField":
        """Copy with the boundary nodes overwritten by the datum."""
        values = self.values.copy()
        bi, bj = datum.domain.boundary_index.T
        values[bi, bj] = datum.values
        return self.with_values(values)


@dataclass(frozen=True, eq=False)
class ScalarField2D:
    """Real field on the nodes of a cross-section, shape (Nx, Ny)."""
    domain: Domain2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _checked(self.values, self.domain.node_shape, "ScalarField2D")
        )

    def at_node(self, i: int, j: int) -> float:
        return float(self.values[i, j])
