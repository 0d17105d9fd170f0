"""
Tests for the tensor core - symmetric tensor types, symmetrization, orthogonal
action, condensed matrices and symmetry classification.
"""
import math

import numpy as np
import pytest

from app.errors import ModelError
from app.services.tensor_core import (
    ElasticTensor,
    GradElasticTensor,
    OrthogonalTransform,
    QuadraticCoefficients,
    SymMatrix,
    classify_symmetry,
    condensed_matrix,
    condensed_vector,
    desymmetrize,
    grad_quadratic_form,
    is_positive_definite,
    make_isotropic_elastic,
    rotate,
    rotate_array,
    symmetrize,
    tensor_from_dict,
    tensor_to_dict,
)
from app.services.verification import random_beta, random_grad_tensor, random_unsymmetrized


def cubic_elastic(dim: int, anisotropy: float = 0.7) -> ElasticTensor:
    """Isotropic stiffness plus an equal e_k^4 term on every axis."""
    c = make_isotropic_elastic(1.0, 0.5, dim).components.copy()
    for e in np.eye(dim):
        c += anisotropy * np.einsum("i,j,h,k->ijhk", e, e, e, e)
    return ElasticTensor(c)


def orthotropic_elastic(dim: int) -> ElasticTensor:
    """Isotropic stiffness plus an e_1^4 term."""
    c = make_isotropic_elastic(1.0, 0.5, dim).components.copy()
    e1 = np.eye(dim)[0]
    c += 0.7 * np.einsum("i,j,h,k->ijhk", e1, e1, e1, e1)
    return ElasticTensor(c)


class TestTensorTypes:
    """Tests for construction-time validation of the tensor wrappers."""

    def test_sym_matrix_rejects_asymmetric_input(self):
        """A non-symmetric matrix should be rejected with the violated symmetry."""
        with pytest.raises(ModelError, match="violates index symmetry"):
            SymMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_unsupported_dimension_rejected(self):
        """Only 2D and 3D tensors exist."""
        with pytest.raises(ModelError, match="Unsupported dimension 4"):
            SymMatrix(np.eye(4))

    def test_wrong_order_rejected(self):
        """An ElasticTensor needs four indices."""
        with pytest.raises(ModelError, match="order-4"):
            ElasticTensor(np.eye(2))

    def test_non_finite_components_rejected(self):
        """NaN components are refused."""
        with pytest.raises(ModelError, match="finite"):
            SymMatrix(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_components_are_read_only(self):
        """Constructed tensors are immutable."""
        b = SymMatrix(np.eye(2))
        with pytest.raises(ValueError):
            b.components[0, 0] = 5.0

    def test_round_off_asymmetry_is_averaged_out(self):
        """Asymmetry below the construction tolerance is removed exactly."""
        b = SymMatrix(np.array([[1.0, 0.5 + 1e-15], [0.5, 1.0]]))
        assert b.components[0, 1] == b.components[1, 0]

    def test_checked_accepts_gaps_within_a_relaxed_tolerance(self):
        """A stiffness off by 5e-10 in one minor pair passes at tol 1e-6 and comes out symmetric."""
        c = make_isotropic_elastic(0.0, -1.0, 2).components.copy()
        c[0, 0, 0, 1] = 5e-10
        with pytest.raises(ModelError, match="ElasticTensor violates index symmetry"):
            ElasticTensor.checked(c)
        sym = ElasticTensor.checked(c, tol=1e-6).components
        for swap in ("jihk", "ijkh", "hkij"):
            assert np.allclose(sym, np.einsum(f"{swap}->ijhk", sym), rtol=0.0, atol=1e-15)
        assert sym[0, 0, 0, 1] == pytest.approx(sym[0, 1, 0, 0], abs=1e-20)

    def test_isotropic_elastic_components(self):
        """C_1111 = lam + 2 mu, C_1122 = lam, C_1212 = mu."""
        c = make_isotropic_elastic(2.0, 3.0, 3).components
        assert c[0, 0, 0, 0] == pytest.approx(8.0)
        assert c[0, 0, 1, 1] == pytest.approx(2.0)
        assert c[0, 1, 0, 1] == pytest.approx(3.0)

    def test_arithmetic_keeps_the_type(self):
        """Sums and scalar multiples stay in the same tensor kind."""
        c = make_isotropic_elastic(1.0, 1.0, 2)
        total = 2.0 * c - c
        assert isinstance(total, ElasticTensor)
        assert np.allclose(total.components, c.components)

    def test_mixed_dimensions_rejected(self):
        """Adding a 2D and a 3D tensor is a dimension mismatch."""
        with pytest.raises(ModelError, match="Dimension mismatch"):
            make_isotropic_elastic(1.0, 1.0, 2) + make_isotropic_elastic(1.0, 1.0, 3)


class TestOrthogonalTransform:
    """Tests for OrthogonalTransform constructors."""

    def test_non_orthogonal_matrix_rejected(self):
        """A shear matrix is not an orthogonal transform."""
        with pytest.raises(ModelError, match="not orthogonal"):
            OrthogonalTransform(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_random_rotation_is_proper(self, rng):
        """Random transforms have determinant +1."""
        q = OrthogonalTransform.random(3, rng)
        assert np.linalg.det(q.matrix) == pytest.approx(1.0)

    def test_rotation_about_axis(self):
        """A quarter turn about axis 2 maps e1 to e2."""
        q = OrthogonalTransform.rotation(math.pi / 2, axis=2, dim=3)
        assert np.allclose(q.matrix @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])


class TestSymmetrization:
    """Tests for symmetrize / desymmetrize and their commutation with rotations."""

    @pytest.mark.parametrize("dim", [2, 3])
    def test_roundtrip_recovers_tensor(self, rng, dim):
        """S(S^-1(A)) = A for Mindlin-symmetric A."""
        for _ in range(10):
            a = random_grad_tensor(rng, dim)
            back = symmetrize(desymmetrize(a))
            assert np.max(np.abs(back.components - a.components)) <= 1e-13 * np.max(np.abs(a.components))

    def test_symmetrize_rejects_missing_input_symmetry(self, rng):
        """Input without the h <-> i swap symmetry is refused."""
        with pytest.raises(ModelError, match="Unsymmetrized"):
            symmetrize(rng.standard_normal((2,) * 6))

    def test_symmetrize_result_has_mindlin_symmetries(self, rng):
        """The symmetrized tensor is symmetric in (i, j) and (l, m)."""
        a = symmetrize(random_unsymmetrized(rng, 3)).components
        assert np.allclose(a, np.einsum("jihlmn->ijhlmn", a))
        assert np.allclose(a, np.einsum("ijhmln->ijhlmn", a))

    @pytest.mark.parametrize("dim", [2, 3])
    def test_commutes_with_rotation(self, rng, dim):
        """S(Q(D)) = Q(S(D)) for orthogonal Q."""
        for _ in range(10):
            d = random_unsymmetrized(rng, dim)
            q = OrthogonalTransform.random(dim, rng)
            left = symmetrize(rotate_array(d, q)).components
            right = rotate_array(symmetrize(d).components, q)
            assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(right))

    @pytest.mark.parametrize("dim", [2, 3])
    def test_desymmetrize_output_carries_input_symmetries(self, rng, dim):
        """S^-1(A) is symmetric under h <-> i, l <-> n and the triple swap."""
        d = desymmetrize(random_grad_tensor(rng, dim))
        scale = np.max(np.abs(d))
        for swap in ("hjilmn", "ijhnml", "lmnijh"):
            assert np.max(np.abs(d - np.einsum(f"{swap}->ijhlmn", d))) <= 1e-14 * scale

    @pytest.mark.parametrize("dim", [2, 3])
    def test_desymmetrize_commutes_with_rotation(self, rng, dim):
        """S^-1(Q(A)) = Q(S^-1(A)) for orthogonal Q."""
        for _ in range(10):
            a = random_grad_tensor(rng, dim)
            q = OrthogonalTransform.random(dim, rng)
            left = desymmetrize(rotate(a, q))
            right = rotate_array(desymmetrize(a), q)
            assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(right))

    @pytest.mark.parametrize("dim", [2, 3])
    def test_quadratic_form_ignores_symmetrization(self, rng, dim):
        """Phi_S(D)(beta) = Phi_D(beta) for every symmetric beta."""
        d = random_unsymmetrized(rng, dim)
        a = symmetrize(d)
        for raw in random_beta(rng, dim, 20):
            beta = QuadraticCoefficients(raw)
            direct = np.einsum("jlikmh,ijl,hkm->", d, raw, raw)
            assert grad_quadratic_form(a, beta) == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestRotation:
    """Tests for the orthogonal action on tensors."""

    def test_isotropic_tensor_is_rotation_invariant(self, rng):
        """Rotating an isotropic stiffness leaves it unchanged."""
        c = make_isotropic_elastic(1.3, 0.7, 3)
        rotated = rotate(c, OrthogonalTransform.random(3, rng))
        assert np.allclose(rotated.components, c.components, atol=1e-13)

    def test_rotation_then_inverse_is_identity(self, rng):
        """Q^T undoes Q."""
        a = random_grad_tensor(rng, 2)
        q = OrthogonalTransform.random(2, rng)
        back = rotate(rotate(a, q), OrthogonalTransform(q.matrix.T))
        assert np.allclose(back.components, a.components, atol=1e-12)

    def test_dimension_mismatch_rejected(self, rng):
        """A 2D transform cannot act on a 3D tensor."""
        with pytest.raises(ModelError, match="Dimension mismatch"):
            rotate(make_isotropic_elastic(1.0, 1.0, 3), OrthogonalTransform.identity(2))


class TestCondensedForms:
    """Tests for condensed matrices, quadratic forms and definiteness."""

    @pytest.mark.parametrize("dim,size", [(2, 6), (3, 18)])
    def test_condensed_matrix_size(self, rng, dim, size):
        """Sixth-order tensors condense to 6 x 6 (2D) or 18 x 18 (3D)."""
        assert condensed_matrix(random_grad_tensor(rng, dim)).shape == (size, size)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_condensed_vector_reproduces_quadratic_form(self, rng, dim):
        """x . G . x equals the full contraction for any beta."""
        a = random_grad_tensor(rng, dim)
        g = condensed_matrix(a)
        for b in random_beta(rng, dim, 5):
            beta = QuadraticCoefficients(b)
            x = condensed_vector(beta)
            assert x @ g @ x == pytest.approx(grad_quadratic_form(a, beta), rel=1e-12, abs=1e-12)

    def test_positive_stiffness_is_positive_definite(self):
        """lam = mu = 1 gives a positive definite Mandel matrix."""
        positive, min_eig = is_positive_definite(make_isotropic_elastic(1.0, 1.0, 2))
        assert positive
        assert min_eig == pytest.approx(2.0)

    def test_zero_tensor_is_not_positive_definite(self):
        """The semidefinite boundary is classified as not positive definite."""
        positive, min_eig = is_positive_definite(GradElasticTensor(np.zeros((2,) * 6)))
        assert not positive
        assert min_eig == 0.0

    def test_negative_shear_is_not_positive_definite(self):
        """mu < 0 makes the stiffness indefinite."""
        positive, _ = is_positive_definite(make_isotropic_elastic(1.0, -0.5, 3))
        assert not positive


class TestClassification:
    """Tests for classify_symmetry."""

    @pytest.mark.parametrize("dim", [2, 3])
    def test_isotropic(self, dim):
        """An isotropic stiffness is labelled isotropic."""
        assert classify_symmetry(make_isotropic_elastic(1.0, 0.5, dim)) == "isotropic"

    def test_square_in_2d(self):
        """Equal axis terms give square symmetry in 2D."""
        assert classify_symmetry(cubic_elastic(2)) == "square"

    def test_cubic_in_3d(self):
        """Equal axis terms give cubic symmetry in 3D."""
        assert classify_symmetry(cubic_elastic(3)) == "cubic"

    @pytest.mark.parametrize("dim", [2, 3])
    def test_orthotropic(self, dim):
        """A single axis term gives orthotropy."""
        assert classify_symmetry(orthotropic_elastic(dim)) == "orthotropic"

    def test_rotated_orthotropic_is_generic(self):
        """Orthotropy about tilted axes fails the coordinate reflections."""
        rotated = rotate(orthotropic_elastic(2), OrthogonalTransform.rotation(0.3))
        assert classify_symmetry(rotated) == "generic"

    def test_diagonal_inertia_is_orthotropic(self):
        """A diagonal inertia tensor with distinct radii is orthotropic."""
        assert classify_symmetry(SymMatrix(np.diag([1.0, 2.0]))) == "orthotropic"


class TestTensorCodec:
    """Tests for the JSON tensor codec."""

    def test_roundtrip_is_exact(self, rng):
        """Components read back bit for bit."""
        a = random_grad_tensor(rng, 2)
        back = tensor_from_dict(tensor_to_dict(a))
        assert isinstance(back, GradElasticTensor)
        assert np.array_equal(back.components, a.components)

    def test_wrong_component_count_rejected(self):
        """The component list must match dim ** order."""
        with pytest.raises(ModelError, match="Expected 16 components"):
            tensor_from_dict({"dim": 2, "order": 4, "components": [0.0] * 15})

    def test_missing_key_rejected(self):
        """A document without components is malformed."""
        with pytest.raises(ModelError, match="Malformed"):
            tensor_from_dict({"dim": 2, "order": 4})

    def test_tolerance_applies_to_decoded_components(self):
        """A slightly asymmetric document is refused by default and accepted at a looser tol."""
        doc = {"dim": 2, "order": 2, "components": [1.0, 0.5 + 1e-9, 0.5, 1.0]}
        with pytest.raises(ModelError, match="SymMatrix violates index symmetry"):
            tensor_from_dict(doc)
        b = tensor_from_dict(doc, tol=1e-6)
        assert b.components[0, 1] == b.components[1, 0]
