"""
Tests for director, planar and scalar grid fields.
"""
import numpy as np
import pytest

from slabvortex.fields import DirectorField, PlanarField, ScalarField2D, ShapeError


class TestDirectorField:
    """Tests for DirectorField construction and transformations."""

    def test_shape_mismatch(self, slab_grid):
        """Values of the wrong shape raise ShapeError."""
        with pytest.raises(ShapeError):
            DirectorField(slab_grid, np.zeros((3, 3, 3, 3)))

    def test_non_finite_values(self, slab_grid):
        """A NaN anywhere raises ShapeError naming the index."""
        values = np.zeros(slab_grid.node_shape + (3,))
        values[..., 0] = 1.0
        values[2, 3, 1, 2] = np.nan
        with pytest.raises(ShapeError, match=r"\(2, 3, 1, 2\)"):
            DirectorField(slab_grid, values)

    def test_values_are_read_only(self, slab_grid):
        """Stored values cannot be modified in place."""
        U = DirectorField.constant(slab_grid, (1.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            U.values[0, 0, 0, 0] = 2.0

    def test_from_planar_lifts_to_sphere(self, slab_grid):
        """(u, sqrt(1 - |u|^2)) is unit-valued and x3-independent."""
        planar = PlanarField.constant(slab_grid.base, (0.6, 0.0))
        U = DirectorField.from_planar(slab_grid, planar)
        assert np.allclose(U.norms(), 1.0)
        assert np.allclose(U.perpendicular, 0.8)

    def test_mirrored_and_symmetrized(self, slab_grid):
        """mirrored flips U2; symmetrized takes |U3|."""
        U = DirectorField.constant(slab_grid, (0.0, 0.6, -0.8))
        assert np.allclose(U.mirrored().values[..., 1], -0.6)
        assert np.allclose(U.symmetrized().values[..., 2], 0.8)

    def test_norm_violations(self, slab_grid):
        """Active nodes off the sphere are listed with their norm."""
        values = np.zeros(slab_grid.node_shape + (3,))
        values[..., 0] = 1.0
        i, j = np.argwhere(slab_grid.base.interior_mask)[0]
        values[i, j, 2] = (2.0, 0.0, 0.0)
        violations = DirectorField(slab_grid, values).norm_violations()
        assert violations == [(int(i), int(j), 2, 2.0)]

    def test_lateral_violations(self, slab_grid, hedgehog):
        """Lateral nodes differing from (g, 0) are reported."""
        values = np.zeros(slab_grid.node_shape + (3,))
        values[..., 2] = 1.0
        bi, bj = slab_grid.base.boundary_index.T
        values[bi, bj, :, :2] = hedgehog.values[:, None, :]
        values[bi, bj, :, 2] = 0.0
        assert DirectorField(slab_grid, values).lateral_violations(hedgehog) == []

        values[bi[0], bj[0], 1] = (0.0, 0.0, 1.0)
        violations = DirectorField(slab_grid, values).lateral_violations(hedgehog)
        assert len(violations) == 1
        assert violations[0][:3] == (int(bi[0]), int(bj[0]), 1)

    def test_layer(self, slab_grid):
        """layer(k) returns the planar part of one layer."""
        U = DirectorField.from_function(
            slab_grid, lambda X, Y, Z: np.stack(np.broadcast_arrays(np.cos(Z), np.sin(Z), 0.0 * X), axis=-1)
        )
        layer = U.layer(slab_grid.n_layers - 1)
        assert np.allclose(layer.values[..., 0], np.cos(1.0))


class TestPlanarField:
    """Tests for PlanarField helpers."""

    def test_complex_round_trip(self, disk_domain):
        """from_complex and to_complex are inverse."""
        z = np.exp(1j * np.linspace(0.0, 1.0, disk_domain.kinds.size)).reshape(disk_domain.node_shape)
        assert np.allclose(PlanarField.from_complex(disk_domain, z).to_complex(), z)

    def test_with_boundary(self, disk_domain, hedgehog):
        """with_boundary writes the datum onto the boundary nodes only."""
        u = PlanarField.constant(disk_domain, (0.0, 0.0)).with_boundary(hedgehog)
        bi, bj = disk_domain.boundary_index.T
        assert np.allclose(u.values[bi, bj], hedgehog.values)
        assert np.allclose(u.values[disk_domain.interior_mask], 0.0)

    def test_conjugate(self, disk_domain):
        """conjugate negates the second component."""
        u = PlanarField.constant(disk_domain, (0.3, 0.4)).conjugate()
        assert np.allclose(u.values[..., 1], -0.4)


class TestScalarField2D:
    """Tests for ScalarField2D."""

    def test_shape_is_checked(self, disk_domain):
        """Values must match the node grid."""
        with pytest.raises(ShapeError):
            ScalarField2D(disk_domain, np.zeros(5))

    def test_at_node(self, disk_domain):
        """at_node returns a float."""
        field = ScalarField2D(disk_domain, np.ones(disk_domain.node_shape))
        assert field.at_node(3, 4) == 1.0
