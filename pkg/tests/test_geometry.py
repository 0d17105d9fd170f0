"""
Tests for the geometry service - shapes, Euler and normalized inertia tensors,
Monte-Carlo estimates and microstructure checks.
"""
import math

import numpy as np
import pytest

from app.errors import ModelError
from app.services.geometry import (
    Box,
    Circle,
    Ellipse,
    Ellipsoid,
    IsotropicMaterial,
    Microstructure,
    Polygon,
    Rectangle,
    Sphere,
    check_containment,
    euler_tensor,
    inertia_summary,
    monte_carlo_inertia,
    normalized_inertia,
    principal_inertia,
    rotate_shape,
    rve_inertia_decomposition,
    scale_shape,
    static_moment,
)
from app.services.tensor_core import OrthogonalTransform, SymMatrix

MATRIX = IsotropicMaterial(1.0, 1.0)


class TestShapes:
    """Tests for the closed-form measures and Euler tensors."""

    def test_rectangle_normalized_inertia(self):
        """B of an h1 x h2 rectangle is diag(h1^2, h2^2) / 12."""
        b = normalized_inertia(Rectangle(2.0, 1.0), 2.0)
        assert np.allclose(b.components, np.diag([1 / 3, 1 / 12]))

    def test_circle_euler_tensor(self):
        """E of a disc is pi r^4 / 4 on the diagonal."""
        e = euler_tensor(Circle(r=2.0))
        assert e.components[0, 0] == pytest.approx(math.pi * 16 / 4)
        assert e.components[0, 1] == 0.0

    def test_sphere_normalized_by_own_volume(self):
        """B of a sphere over its own volume is r^2 / 5 times the identity."""
        b = inertia_summary(Sphere(r=1.0)).normalized
        assert np.allclose(b.components, np.eye(3) / 5.0)

    def test_ellipse_aspect_ratio(self):
        """Lambda = b2 / b1."""
        assert Ellipse(2.0, 0.5).aspect_ratio == pytest.approx(0.25)

    def test_box_measure(self):
        """Volume of a box is the product of its sides."""
        assert Box(1.0, 2.0, 3.0).measure() == pytest.approx(6.0)

    def test_nonpositive_size_rejected(self):
        """Zero or negative lengths are refused."""
        with pytest.raises(ModelError, match="h2 must be positive"):
            Rectangle(1.0, 0.0)
        with pytest.raises(ModelError, match="r must be positive"):
            Sphere(r=-1.0)

    def test_square_polygon_matches_rectangle(self):
        """The polygon formulas agree with the rectangle closed form."""
        rect = Rectangle(2.0, 1.0)
        assert np.allclose(rect.as_polygon().euler(), rect.euler())
        assert rect.as_polygon().measure() == pytest.approx(2.0)

    def test_off_centre_polygon_rejected(self):
        """Polygons must have their centroid at the origin."""
        with pytest.raises(ModelError, match="centroid must be at the origin"):
            Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))

    def test_clockwise_polygon_rejected(self):
        """Clockwise vertices give a negative area."""
        with pytest.raises(ModelError, match="counter-clockwise"):
            Polygon(((-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, -1.0)))

    def test_closing_vertex_is_dropped(self):
        """A repeated first vertex at the end is accepted."""
        p = Polygon(((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)))
        assert len(p.vertices) == 4

    @pytest.mark.parametrize(
        "shape",
        [Rectangle(2.0, 1.0), Circle(r=1.0), Box(1.0, 2.0, 3.0), Rectangle(2.0, 1.0).as_polygon()],
    )
    def test_centred_shapes_have_zero_static_moment(self, shape):
        """First moments vanish for shapes centred at the origin."""
        assert np.allclose(static_moment(shape), 0.0)
        assert static_moment(shape).shape == (shape.dim,)


class TestScalingAndRotation:
    """Tests for scale_shape and rotate_shape."""

    @pytest.mark.parametrize("shape", [Rectangle(2.0, 1.0), Ellipse(1.0, 0.3), Box(1.0, 2.0, 3.0), Sphere(r=0.5)])
    def test_normalized_inertia_scales_with_length_squared(self, shape):
        """B(cS) = c^2 B(S) when normalized by the shape's own measure."""
        c = 2.5
        b = inertia_summary(shape).normalized.components
        scaled = inertia_summary(scale_shape(shape, c)).normalized.components
        assert np.allclose(scaled, c ** 2 * b)

    def test_rotated_polygon_inertia_rotates(self):
        """E(QS) = Q E(S) Q^T."""
        square = Rectangle(2.0, 1.0).as_polygon()
        q = OrthogonalTransform.rotation(0.4)
        rotated = rotate_shape(square, q)
        assert np.allclose(rotated.euler(), q.matrix @ square.euler() @ q.matrix.T)

    def test_rotated_polygon_keeps_principal_radii(self):
        """Principal radii are invariant under rotation."""
        square = Rectangle(2.0, 1.0).as_polygon()
        rotated = rotate_shape(square, OrthogonalTransform.rotation(1.1))
        before = inertia_summary(square).radii
        after = inertia_summary(rotated).radii
        assert np.allclose(before, after)

    def test_catalog_shapes_cannot_rotate(self):
        """Only polygons have a rotated representation."""
        with pytest.raises(ModelError, match="Only polygons"):
            rotate_shape(Ellipse(1.0, 0.5), OrthogonalTransform.rotation(0.3))


class TestPrincipalInertia:
    """Tests for principal radii and axes."""

    def test_radii_are_descending(self):
        """Radii come out largest first with matching axes."""
        p = principal_inertia(SymMatrix(np.diag([1.0, 4.0])))
        assert np.allclose(p.radii, [2.0, 1.0])
        assert np.allclose(np.abs(p.axes), [[0.0, 1.0], [1.0, 0.0]])

    def test_spherical_uses_identity_axes(self):
        """Equal radii report the coordinate axes."""
        p = principal_inertia(SymMatrix(2.0 * np.eye(3)))
        assert p.spherical
        assert np.array_equal(p.axes, np.eye(3))

    def test_reconstruction(self, rng):
        """The eigen-decomposition rebuilds the tensor."""
        a = rng.standard_normal((3, 3))
        b = SymMatrix(a @ a.T)
        assert np.allclose(principal_inertia(b).reconstruct(), b.components)

    def test_axes_are_right_handed(self, rng):
        """The principal frame has determinant +1."""
        a = rng.standard_normal((3, 3))
        p = principal_inertia(SymMatrix(a @ a.T))
        assert np.linalg.det(p.axes) == pytest.approx(1.0)

    def test_negative_eigenvalue_rejected(self):
        """An indefinite matrix is not an inertia tensor."""
        with pytest.raises(ModelError, match="negative eigenvalue"):
            principal_inertia(SymMatrix(np.diag([1.0, -1.0])))


class TestMonteCarlo:
    """Tests for the sampled inertia estimates."""

    @pytest.mark.parametrize(
        "shape", [Rectangle(2.0, 1.0), Circle(r=1.0), Ellipse(1.0, 0.5), Box(1.0, 2.0, 3.0), Sphere(r=1.0)]
    )
    def test_matches_analytic_euler_tensor(self, shape):
        """10^6 samples land within 0.5 % of the closed form."""
        estimate = monte_carlo_inertia(shape, samples=1_000_000, seed=3)
        exact = euler_tensor(shape).components
        assert np.linalg.norm(estimate.euler.components - exact) <= 5e-3 * np.linalg.norm(exact)

    def test_same_seed_same_estimate(self):
        """A fixed seed reproduces the estimate exactly."""
        a = monte_carlo_inertia(Ellipsoid(1.0, 0.5, 0.25), samples=20_000, seed=11)
        b = monte_carlo_inertia(Ellipsoid(1.0, 0.5, 0.25), samples=20_000, seed=11)
        assert np.array_equal(a.euler.components, b.euler.components)

    def test_reports_standard_errors(self):
        """Every estimate carries a standard error."""
        s = monte_carlo_inertia(Circle(r=1.0), samples=20_000, seed=1)
        assert s.measure_stderr > 0.0
        assert s.euler_stderr.shape == (2, 2)

    def test_too_few_samples_rejected(self):
        """Small sample counts are refused."""
        with pytest.raises(ModelError, match="at least"):
            monte_carlo_inertia(Circle(r=1.0), samples=100)


class TestMaterials:
    """Tests for isotropic moduli conversions."""

    def test_bulk_modulus_plane_strain(self):
        """K = lam + mu in 2D."""
        assert IsotropicMaterial(1.0, 2.0).bulk_modulus(2) == pytest.approx(3.0)

    def test_bulk_modulus_3d(self):
        """K = lam + 2 mu / 3 in 3D."""
        assert IsotropicMaterial(1.0, 3.0).bulk_modulus(3) == pytest.approx(3.0)

    def test_from_bulk_inverts_bulk_modulus(self):
        """from_bulk and bulk_modulus are inverse."""
        for dim in (2, 3):
            m = IsotropicMaterial.from_bulk(4.0, 1.5, dim)
            assert m.bulk_modulus(dim) == pytest.approx(4.0)

    def test_from_young(self):
        """E = 2.5, nu = 0.25 gives lam = mu = 1."""
        m = IsotropicMaterial.from_young(2.5, 0.25)
        assert m.lam == pytest.approx(1.0)
        assert m.mu == pytest.approx(1.0)

    def test_from_poisson_inverts_poisson_ratio(self):
        """nu = lam / (2 (lam + mu)) round-trips."""
        for nu in (-0.5, 0.0, 0.25, 0.4):
            assert IsotropicMaterial.from_poisson(nu, 1.0).poisson_ratio == pytest.approx(nu, abs=1e-15)

    def test_poisson_ratio_out_of_range(self):
        """nu must lie in (-1, 0.5)."""
        with pytest.raises(ModelError, match="Poisson ratio"):
            IsotropicMaterial.from_poisson(0.5, 1.0)


class TestMicrostructure:
    """Tests for volume fractions, dilute warnings and the inertia decomposition."""

    def test_volume_fraction_from_geometry(self):
        """f = inclusion measure / RVE measure."""
        m = Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.1), MATRIX)
        assert m.volume_fraction == pytest.approx(math.pi * 0.01)

    def test_inconsistent_fraction_names_both_values(self):
        """An explicit f that disagrees with the geometry is rejected with both numbers."""
        with pytest.raises(ModelError, match=r"f=0\.05.*0\.0314159"):
            Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.1), MATRIX, f=0.05)

    def test_consistent_fraction_accepted(self):
        """An explicit f within the tolerance passes."""
        m = Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.1), MATRIX, f=math.pi * 0.01)
        assert m.f == pytest.approx(m.volume_fraction)

    def test_dimension_mismatch(self):
        """A 3D inclusion in a 2D job is rejected."""
        with pytest.raises(ModelError, match="inclusion is 3D"):
            Microstructure(2, Rectangle(1.0, 1.0), Sphere(r=0.1), MATRIX)

    def test_dilute_warning(self):
        """f above the threshold produces a not_dilute warning."""
        m = Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.3), MATRIX)
        warnings = m.dilute_warnings(0.1)
        assert [w.code for w in warnings] == ["not_dilute"]
        assert m.dilute_warnings(0.5) == []

    def test_void_flag(self):
        """No inclusion material means a void."""
        assert Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.1), MATRIX).is_void

    def test_sum_rule(self):
        """B(matrix) + B(inclusion) = B(RVE) exactly."""
        m = Microstructure(3, Box(1.0, 2.0, 3.0), Sphere(r=0.3), MATRIX)
        split = rve_inertia_decomposition(m)
        assert np.allclose(split.b_matrix.components + split.b_inclusion.components, split.b_rve.components)

    def test_rve_inertia_ignores_the_inclusion(self):
        """B(RVE) depends only on the outer contour."""
        split = rve_inertia_decomposition(Microstructure(2, Rectangle(2.0, 1.0), Circle(r=0.1), MATRIX))
        assert np.allclose(split.b_rve.components, np.diag([1 / 3, 1 / 12]))

    def test_oversized_inclusion_rejected(self):
        """An inclusion with more inertia than the RVE cannot be contained."""
        m = Microstructure(2, Rectangle(1.0, 1.0), Ellipse(3.0, 0.1), MATRIX)
        with pytest.raises(ModelError, match="not contained"):
            rve_inertia_decomposition(m)

    def test_containment_sampling(self):
        """Sampled containment accepts a small disc and rejects a wide ellipse."""
        assert check_containment(Microstructure(2, Rectangle(1.0, 1.0), Circle(r=0.1), MATRIX))
        assert not check_containment(Microstructure(2, Rectangle(1.0, 1.0), Ellipse(0.8, 0.1), MATRIX))
