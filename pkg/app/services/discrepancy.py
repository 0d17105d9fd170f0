"""
Discrepancy service - first-order discrepancy tensors C~ = (C_eq - C1) / f for
the documented dilute cases, from effective moduli, or from explicit values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from app.errors import ModelError, ModelWarning
from app.logging import get_logger
from app.services.tensor_core import (
    ElasticTensor,
    OrthogonalTransform,
    check_dim,
    is_positive_definite,
    make_isotropic_elastic,
    rotate,
)

logger = get_logger(__name__)

ISOTROPY_TOL = 1e-12


@dataclass(frozen=True)
class IsotropicDiscrepancy:
    lambda_tilde: float
    mu_tilde: float
    dim: int
    warnings: Tuple[ModelWarning, ...] = ()

    def __post_init__(self):
        check_dim(self.dim)

    @property
    def bulk_tilde(self) -> float:
        """K~ = lam~ + mu~ (N=2) or lam~ + 2 mu~ / 3 (N=3)."""
        if self.dim == 2:
            return self.lambda_tilde + self.mu_tilde
        return self.lambda_tilde + 2.0 * self.mu_tilde / 3.0


@dataclass(frozen=True)
class OrthotropicDiscrepancy:
    """Isotropic part plus the xi~ (shear-pair) and omega~ (axis-1) terms."""

    lambda_tilde: float
    mu_tilde: float
    xi_tilde: float
    omega_tilde: float
    dim: int = 2
    axes: Optional[np.ndarray] = None  # rows are the orthotropy directions, identity if None
    warnings: Tuple[ModelWarning, ...] = ()

    def __post_init__(self):
        check_dim(self.dim)
        axes = np.eye(self.dim) if self.axes is None else np.asarray(self.axes, dtype=float)
        if axes.shape != (self.dim, self.dim):
            raise ModelError(f"Orthotropy axes must be {self.dim}x{self.dim}, got {axes.shape}")
        object.__setattr__(self, "axes", OrthogonalTransform(axes).matrix)

    @property
    def bulk_tilde(self) -> float:
        return self.isotropic_part().bulk_tilde

    def isotropic_part(self) -> IsotropicDiscrepancy:
        return IsotropicDiscrepancy(self.lambda_tilde, self.mu_tilde, self.dim)

    def reduce(self) -> Union[IsotropicDiscrepancy, "OrthotropicDiscrepancy"]:
        if self.xi_tilde == 0.0 and self.omega_tilde == 0.0:
            return IsotropicDiscrepancy(self.lambda_tilde, self.mu_tilde, self.dim, self.warnings)
        return self


Discrepancy = Union[IsotropicDiscrepancy, OrthotropicDiscrepancy]


@dataclass(frozen=True)
class CrackParameters:
    """Finite nonlocal parameters of aligned cracks (C~ diverges, f C~ does not)."""

    a2: float
    a4: float
    a5: float
    a6: float
    a9: float


# -----------------------------------------------------------------------------
# Generic constructions
# -----------------------------------------------------------------------------

def from_effective(c_eq: ElasticTensor, c1: ElasticTensor, f: float) -> ElasticTensor:
    """C~ = (C_eq - C1) / f."""
    if not f > 0.0:
        raise ModelError(f"Volume fraction must be positive to form the discrepancy, got {f}")
    if c_eq.dim != c1.dim:
        raise ModelError(f"Dimension mismatch: {c_eq.dim} vs {c1.dim}")
    return (c_eq - c1) / f


def identify_isotropic(c: ElasticTensor, tol: float = ISOTROPY_TOL) -> Optional[IsotropicDiscrepancy]:
    """Read lam~ = C_1122, mu~ = C_1212 and confirm the tensor is isotropic."""
    lam, mu = float(c.components[0, 0, 1, 1]), float(c.components[0, 1, 0, 1])
    rebuilt = make_isotropic_elastic(lam, mu, c.dim)
    if (rebuilt - c).norm() > tol * max(c.norm(), 1e-300):
        return None
    return IsotropicDiscrepancy(lam, mu, c.dim)


def to_full_tensor(d: Discrepancy, dim: Optional[int] = None) -> ElasticTensor:
    """Assemble the fourth-order tensor; orthotropic terms are rotated onto d.axes."""
    dim = d.dim if dim is None else check_dim(dim)
    if dim != d.dim:
        raise ModelError(f"Discrepancy is {d.dim}D, requested {dim}D")
    c = make_isotropic_elastic(d.lambda_tilde, d.mu_tilde, dim).components.copy()
    if isinstance(d, OrthotropicDiscrepancy):
        e1, e2 = np.eye(dim)[0], np.eye(dim)[1]
        p = np.outer(e1, e2) + np.outer(e2, e1)
        c += d.xi_tilde * np.einsum("ij,hk->ijhk", p, p)
        c += d.omega_tilde * np.einsum("i,j,h,k->ijhk", e1, e1, e1, e1)
        # axes rows are the orthotropy directions in the global frame
        return rotate(ElasticTensor(c), OrthogonalTransform(d.axes.T))
    return ElasticTensor(c)


def is_negative_definite(d: Union[Discrepancy, ElasticTensor]) -> Tuple[bool, Dict[str, float]]:
    """K~ < 0 and mu~ < 0 for isotropic inputs, otherwise all condensed eigenvalues < 0."""
    if isinstance(d, IsotropicDiscrepancy):
        flag = d.bulk_tilde < 0.0 and d.mu_tilde < 0.0
        return flag, {"K_tilde": d.bulk_tilde, "mu_tilde": d.mu_tilde}
    tensor = d if isinstance(d, ElasticTensor) else to_full_tensor(d)
    flag, min_of_negated = is_positive_definite(-tensor)
    return flag, {"max_eigenvalue": -min_of_negated}


# -----------------------------------------------------------------------------
# Closed forms of the documented cases
# -----------------------------------------------------------------------------

def _check_phases(k1: float, mu1: float, k2: float, mu2: float) -> None:
    if not (k1 > 0.0 and mu1 > 0.0):
        raise ModelError(f"Matrix moduli must be positive, got K1={k1}, mu1={mu1}")
    if k2 < 0.0 or mu2 < 0.0:
        raise ModelError(f"Inclusion moduli must be non-negative, got K2={k2}, mu2={mu2}")


def _nonzero(name: str, value: float) -> float:
    if value == 0.0:
        raise ModelError(f"Zero denominator {name}")
    return value


def circular_inclusion(k1: float, mu1: float, k2: float, mu2: float) -> IsotropicDiscrepancy:
    """
    Circular inclusion in plane strain (K = lam + mu). K2 = mu2 = 0 is a void.

    Obtained by inverting the rectangular-RVE nonlocal parameters through
    a2 = -f rho^2 lam~ / 2, a4 = -f rho^2 mu~ / 2.
    """
    a2_bracket, a4_bracket = circle_brackets(k1, mu1, k2, mu2)
    return IsotropicDiscrepancy(lambda_tilde=-a2_bracket, mu_tilde=-a4_bracket, dim=2)


def circle_brackets(k1: float, mu1: float, k2: float, mu2: float) -> Tuple[float, float]:
    """Brackets of the rectangle-circle parameters, to be multiplied by pi r^2 h1 / (24 h2)."""
    _check_phases(k1, mu1, k2, mu2)
    bulk_term = (k1 - k2) * (k1 + mu1) / _nonzero("K2 + mu1", k2 + mu1)
    shear_term = mu1 * (mu1 - mu2) * (k1 + mu1) / _nonzero(
        "2 mu1 mu2 + K1 (mu1 + mu2)", 2.0 * mu1 * mu2 + k1 * (mu1 + mu2)
    )
    return bulk_term - shear_term, shear_term


def sphere_brackets(k1: float, mu1: float, k2: float, mu2: float, erratum_sign: bool = False) -> Tuple[float, float]:
    """
    The two brackets of the literal sphere-in-box parameters: (a2 bracket, a4 bracket),
    both to be multiplied by pi r^3 h1 / (18 h2 h3). With erratum_sign both
    difference factors take the orientation of the 2D formula.
    """
    _check_phases(k1, mu1, k2, mu2)
    d_bulk, d_shear = (k1 - k2, mu1 - mu2) if erratum_sign else (k2 - k1, mu2 - mu1)
    bulk_term = (3 * k1 + 4 * mu1) * d_bulk / _nonzero("3 K2 + 4 mu1", 3 * k2 + 4 * mu1)
    den = _nonzero(
        "mu1 (3 K1 + 4 mu2) + 2 (3 K1 + 4 mu1)(mu2 + mu1)",
        mu1 * (3 * k1 + 4 * mu2) + 2 * (3 * k1 + 4 * mu1) * (mu2 + mu1),
    )
    shear_term = 5 * mu1 * d_shear * (3 * k1 + 4 * mu1) / den
    return bulk_term - 2.0 / 3.0 * shear_term, shear_term


def spherical_inclusion(
    k1: float, mu1: float, k2: float, mu2: float, erratum_sign: bool = False
) -> IsotropicDiscrepancy:
    """
    Spherical inclusion (N=3), inverted from the sphere-in-box parameters.

    The literal parameters give a discrepancy that is not negative definite for
    inclusions softer than the matrix; that case is reported as a warning and
    erratum_sign=True switches to the sign convention of the 2D formula.
    """
    a2_bracket, a4_bracket = sphere_brackets(k1, mu1, k2, mu2, erratum_sign)
    d = IsotropicDiscrepancy(lambda_tilde=-a2_bracket, mu_tilde=-a4_bracket, dim=3)
    softer = mu2 < mu1 and k2 < k1
    negative, details = is_negative_definite(d)
    if softer and not negative:
        message = (
            "Sphere discrepancy is not negative definite for an inclusion softer than the matrix "
            f"(K~={details['K_tilde']:.6g}, mu~={details['mu_tilde']:.6g}) under the literal sign; "
            "rerun with the 3D erratum sign to restore definiteness"
        )
        logger.warning(message)
        d = IsotropicDiscrepancy(d.lambda_tilde, d.mu_tilde, 3, (ModelWarning("sphere_sign_conflict", message),))
    return d


def _check_matrix(lam1: float, mu1: float) -> None:
    if not mu1 > 0.0 or not lam1 + mu1 > 0.0:
        raise ModelError(f"Matrix needs mu1 > 0 and lam1 + mu1 > 0, got lam1={lam1}, mu1={mu1}")


def elliptic_hole(lam1: float, mu1: float, aspect_ratio: float) -> OrthotropicDiscrepancy:
    """
    Aligned elliptical void in plane strain; aspect_ratio = b2 / b1 in (0, 1],
    orthotropy axes along the ellipse semi-axes.
    """
    _check_matrix(lam1, mu1)
    ar = float(aspect_ratio)
    if ar == 0.0:
        raise ModelError("Aspect ratio 0 is a crack: use crack_products instead")
    if not 0.0 < ar <= 1.0:
        raise ModelError(
            f"Aspect ratio must lie in (0, 1], got {ar}: reorient the axes so that b1 is the major semi-axis"
        )
    stiff = lam1 + 2.0 * mu1
    lambda_tilde = -stiff * (lam1 * stiff * (1 + ar ** 2) - 2 * ar * mu1 ** 2) / (2 * ar * mu1 * (lam1 + mu1))
    mu_tilde = -(1 + ar) * stiff * (lam1 * (1 - ar) + 2 * mu1) / (2 * ar * (lam1 + mu1))
    xi_tilde = (1 - ar ** 2) * stiff / (2 * ar)
    omega_tilde = (1 - ar ** 2) * stiff / ar
    return OrthotropicDiscrepancy(lambda_tilde, mu_tilde, xi_tilde, omega_tilde)


def crack_products(lam1: float, mu1: float, b1: float, h: Optional[float] = None) -> CrackParameters:
    """
    Limit of the square-RVE elliptical-void parameters as b2/b1 -> 0 (cracks of
    length 2 b1). The RVE side h only has to fit the crack; the values do not
    depend on it.
    """
    _check_matrix(lam1, mu1)
    if not b1 > 0.0:
        raise ModelError(f"Crack half-length must be positive, got {b1}")
    if h is not None and not b1 < h / 2.0:
        raise ModelError(f"Crack of half-length {b1} does not fit a square RVE of side {h}")
    stiff = lam1 + 2.0 * mu1
    c = math.pi * b1 ** 2 / 48.0
    a4 = c * stiff ** 2 / (lam1 + mu1)
    a6 = -c * stiff
    return CrackParameters(
        a2=c * lam1 * stiff ** 2 / (mu1 * (lam1 + mu1)),
        a4=a4,
        a5=a4,
        a6=a6,
        a9=2.0 * a6,
    )
