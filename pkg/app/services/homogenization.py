"""
Homogenization service - the dilute equivalent second-gradient tensor
A_eq = S(-f C~ (x) B_RVE), its orthotropic nonlocal parameters, the documented
closed-form cases and the strain-energy annihilation check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from app.config import Settings, get_settings
from app.errors import ModelError, ModelWarning
from app.logging import get_logger
from app.services import discrepancy as disc
from app.services.geometry import (
    Box,
    Circle,
    Ellipse,
    InertiaDecomposition,
    Microstructure,
    Rectangle,
    Sphere,
    principal_inertia,
    rve_inertia_decomposition,
)
from app.services.tensor_core import (
    ElasticTensor,
    GradElasticTensor,
    QuadraticCoefficients,
    SymMatrix,
    canonical_probes,
    check_dim,
    classify_symmetry,
    grad_quadratic_form,
    intersect_profiles,
    invariance_profile,
    is_positive_definite,
    label_from_profile,
    make_isotropic_elastic,
    symmetrize,
)

logger = get_logger(__name__)

CLOSED_FORM_CASES = ("rect_circle", "box_sphere", "square_ellipse", "square_crack")
MODELS = ("generic",) + CLOSED_FORM_CASES + ("explicit_ctilde", "from_effective")

# Aspect ratio standing in for the crack limit when the elliptic chain is evaluated
CRACK_LIMIT_RATIO = 1e-8
CRACK_LIMIT_TOL = 1e-6
# Literal vs generic agreement; fixed, independent of Settings.consistency_tol
CLOSED_FORM_TOL = 1e-12
DEFAULT_RVE_TO_CRACK = 10.0


# -----------------------------------------------------------------------------
# Domain types
# -----------------------------------------------------------------------------

def _floats(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NonlocalParams:
    """
    Per-axis a2[k], a4[k], a5[k] (stress x length^2) along axes[k], plus the
    a6, a9 shear-pair and axis-1 terms (2D only, None in 3D).
    """

    a2: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    a6: Optional[float] = None
    a9: Optional[float] = None
    axes: Optional[np.ndarray] = None
    residual: float = 0.0

    def __post_init__(self):
        a2, a4, a5 = _floats(self.a2), _floats(self.a4), _floats(self.a5)
        dim = check_dim(len(a2))
        if len(a4) != dim or len(a5) != dim:
            raise ModelError("a2, a4 and a5 need one value per axis")
        if dim == 3 and (self.a6 or self.a9):
            raise ModelError("a6 and a9 are only defined in 2D")
        axes = np.eye(dim) if self.axes is None else np.asarray(self.axes, dtype=float)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "a4", a4)
        object.__setattr__(self, "a5", a5)
        object.__setattr__(self, "axes", _floats(axes).reshape(dim, dim))

    @property
    def dim(self) -> int:
        return len(self.a2)

    @classmethod
    def uniform(
        cls, a2: float, a4: float, a5: float, a6: float = 0.0, a9: float = 0.0, dim: int = 2
    ) -> "NonlocalParams":
        """Same a2, a4, a5 on every axis (spherical inertia)."""
        extra = (a6, a9) if check_dim(dim) == 2 else (None, None)
        return cls([a2] * dim, [a4] * dim, [a5] * dim, *extra)

    def values(self) -> np.ndarray:
        extra = [self.a6 or 0.0, self.a9 or 0.0] if self.dim == 2 else []
        return np.concatenate([self.a2, self.a4, self.a5, extra])

    def scaled(self, c: float) -> "NonlocalParams":
        def mul(x):
            return None if x is None else c * x

        return NonlocalParams(
            c * self.a2, c * self.a4, c * self.a5, mul(self.a6), mul(self.a9), self.axes, self.residual
        )

    def to_dict(self) -> Dict:
        data = {
            "axes": [[float(x) for x in row] for row in self.axes],
            "a2": [float(x) for x in self.a2],
            "a4": [float(x) for x in self.a4],
            "a5": [float(x) for x in self.a5],
        }
        if self.dim == 2:
            data["a6"] = float(self.a6 or 0.0)
            data["a9"] = float(self.a9 or 0.0)
        data["residual"] = float(self.residual)
        return data


def params_deviation(p: NonlocalParams, q: NonlocalParams) -> float:
    """Largest parameter difference relative to the largest parameter."""
    a, b = p.values(), q.values()
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    gap = float(np.max(np.abs(a - b)))
    return gap / scale if scale > 0.0 else gap


@dataclass(frozen=True)
class RatioTable:
    """a[k] / a[1] per parameter family and the (rho_k / rho_1)^2 they must equal."""

    a2: Optional[Tuple[float, ...]]
    a4: Optional[Tuple[float, ...]]
    a5: Optional[Tuple[float, ...]]
    consistent: bool

    @property
    def ratios(self) -> Tuple[float, ...]:
        return next(r for r in (self.a4, self.a2, self.a5) if r is not None)

    def to_dict(self) -> Dict:
        return {"a2": self.a2, "a4": self.a4, "a5": self.a5, "consistent": self.consistent}


@dataclass(frozen=True)
class HomogenizationResult:
    model: str
    aeq: GradElasticTensor
    ctilde: ElasticTensor
    b_rve: SymMatrix
    f: float
    params: Optional[NonlocalParams]
    positive_definite: bool
    min_eigenvalue: float
    symmetry: str
    symmetry_intersection: Optional[str] = None
    discrepancy: Optional[disc.Discrepancy] = None
    decomposition: Optional[InertiaDecomposition] = None
    literal_params: Optional[NonlocalParams] = None
    literal_deviation: Optional[float] = None
    warnings: Tuple[ModelWarning, ...] = field(default_factory=tuple)

    @property
    def structural(self) -> bool:
        return self.params is not None


# -----------------------------------------------------------------------------
# Equivalent second-gradient tensor
# -----------------------------------------------------------------------------

def _check_inertia(b: SymMatrix, tol: float = 1e-12) -> None:
    lowest = float(np.linalg.eigvalsh(b.components)[0])
    if lowest < -tol * max(float(np.max(np.abs(b.components))), 1e-300):
        raise ModelError(f"Inertia tensor must be positive semidefinite, lowest eigenvalue {lowest:.3e}")


def effective_grad_tensor(ctilde: ElasticTensor, b_rve: SymMatrix, f: float) -> GradElasticTensor:
    """
    A_ijhlmn = -(f/4)(C~_ihln B_jm + C~_ihmn B_jl + C~_jhln B_im + C~_jhmn B_il),
    formed as the symmetrization of D_ijhlmn = -f C~_ihln B_jm.
    """
    if ctilde.dim != b_rve.dim:
        raise ModelError(f"Dimension mismatch: C~ is {ctilde.dim}D, B is {b_rve.dim}D")
    if f < 0.0:
        raise ModelError(f"Volume fraction must be non-negative, got {f}")
    _check_inertia(b_rve)
    d = -f * np.einsum("ihln,jm->ijhlmn", ctilde.components, b_rve.components)
    return symmetrize(d)


def spherical_case(ctilde: ElasticTensor, rho: float, f: float) -> GradElasticTensor:
    """Spherical inertia B = rho^2 I: the four-term formula with Kronecker deltas."""
    if rho < 0.0 or f < 0.0:
        raise ModelError(f"Need rho >= 0 and f >= 0, got rho={rho}, f={f}")
    c = ctilde.components
    delta = np.eye(ctilde.dim)
    terms = (
        np.einsum("ihln,jm->ijhlmn", c, delta)
        + np.einsum("ihmn,jl->ijhlmn", c, delta)
        + np.einsum("jhln,im->ijhlmn", c, delta)
        + np.einsum("jhmn,il->ijhlmn", c, delta)
    )
    return GradElasticTensor(-(f * rho ** 2 / 4.0) * terms)


def annihilation_residual(
    ctilde: ElasticTensor,
    b_rve: SymMatrix,
    f: float,
    aeq: GradElasticTensor,
    beta: QuadraticCoefficients,
) -> float:
    """
    Strain-energy mismatch of a quadratic field at first order in f:
    r = f B_lm C~_ijhk beta_ijl beta_hkm + A_jlikmh beta_ijl beta_hkm.
    """
    dims = {ctilde.dim, b_rve.dim, aeq.dim, beta.dim}
    if len(dims) != 1:
        raise ModelError(f"Dimension mismatch among inputs: {sorted(dims)}")
    b = beta.components
    heterogeneity = f * float(np.einsum("lm,ijhk,ijl,hkm->", b_rve.components, ctilde.components, b, b))
    return heterogeneity + grad_quadratic_form(aeq, beta)


# -----------------------------------------------------------------------------
# Orthotropic parameter structure
# -----------------------------------------------------------------------------

def _axis_kernels(e: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit-coefficient a2, a4, a5 kernels for the axis e."""
    d = np.eye(len(e))
    # (d_ih e_j + d_jh e_i)
    left = np.einsum("ih,j->ijh", d, e) + np.einsum("jh,i->ijh", d, e)
    k2 = 0.5 * np.einsum("ijh,lmn->ijhlmn", left, left)
    k4 = 0.5 * np.einsum(
        "hn,ijlm->ijhlmn",
        d,
        np.einsum("j,im,l->ijlm", e, d, e)
        + np.einsum("j,il,m->ijlm", e, d, e)
        + np.einsum("i,jl,m->ijlm", e, d, e)
        + np.einsum("i,jm,l->ijlm", e, d, e),
    )
    k5 = 0.5 * (
        np.einsum("in,j,hl,m->ijhlmn", d, e, d, e)
        + np.einsum("in,j,hm,l->ijhlmn", d, e, d, e)
        + np.einsum("jn,i,hm,l->ijhlmn", d, e, d, e)
        + np.einsum("jn,i,hl,m->ijhlmn", d, e, d, e)
    )
    return k2, k4, k5


def _shear_pair_kernels(e1: np.ndarray, e2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-coefficient a6 and a9 kernels in the frame (e1, e2)."""
    d = np.eye(len(e1))
    p = np.outer(e1, e2) + np.outer(e2, e1)
    k6 = 0.5 * (
        np.einsum("ih,ln,jm->ijhlmn", p, p, d)
        + np.einsum("ih,mn,jl->ijhlmn", p, p, d)
        + np.einsum("jh,ln,im->ijhlmn", p, p, d)
        + np.einsum("jh,mn,il->ijhlmn", p, p, d)
    )
    k9 = 0.5 * np.einsum(
        "ijlm,h,n->ijhlmn",
        np.einsum("i,l,jm->ijlm", e1, e1, d)
        + np.einsum("i,m,jl->ijlm", e1, e1, d)
        + np.einsum("j,l,im->ijlm", e1, e1, d)
        + np.einsum("j,m,il->ijlm", e1, e1, d),
        e1,
        e1,
    )
    return k6, k9


def _basis(axes: np.ndarray) -> List[np.ndarray]:
    """Kernels ordered a2[1..N], a4[1..N], a5[1..N], then a6, a9 when N=2."""
    dim = axes.shape[0]
    per_axis = [_axis_kernels(axes[k]) for k in range(dim)]
    basis = [per_axis[k][family] for family in range(3) for k in range(dim)]
    if dim == 2:
        basis.extend(_shear_pair_kernels(axes[0], axes[1]))
    return basis


def _check_axes(axes: Optional[np.ndarray], dim: int) -> np.ndarray:
    axes = np.eye(dim) if axes is None else np.asarray(axes, dtype=float)
    if axes.shape != (dim, dim) or np.max(np.abs(axes @ axes.T - np.eye(dim))) > 1e-12:
        raise ModelError("Axes must be an orthonormal frame matching the tensor dimension")
    return axes


def assemble_from_params(p: NonlocalParams, dim: Optional[int] = None) -> GradElasticTensor:
    dim = p.dim if dim is None else check_dim(dim)
    if dim != p.dim:
        raise ModelError(f"Parameters are {p.dim}D, requested {dim}D")
    basis = _basis(p.axes)
    total = np.zeros((dim,) * 6)
    for coefficient, kernel in zip(p.values(), basis):
        total = total + coefficient * kernel
    return GradElasticTensor(total)


def extract_ortho_params(a: GradElasticTensor, axes: Optional[np.ndarray] = None) -> NonlocalParams:
    """
    Least-squares projection of A onto the orthotropic kernels of the frame.
    residual = ||A - assembled||; a small residual certifies the structure.
    """
    dim = a.dim
    axes = _check_axes(axes, dim)
    basis = np.array([k.ravel() for k in _basis(axes)]).T
    target = a.components.ravel()
    coefficients, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = float(np.linalg.norm(target - basis @ coefficients))
    a2, a4, a5 = (coefficients[k * dim:(k + 1) * dim] for k in range(3))
    a6, a9 = (float(coefficients[-2]), float(coefficients[-1])) if dim == 2 else (None, None)
    return NonlocalParams(a2, a4, a5, a6, a9, axes=axes, residual=residual)


def anisotropy_ratios(p: NonlocalParams, rtol: float = 1e-12) -> RatioTable:
    """a[k] / a[1] for each family; all families must share the same ratios."""
    families = {}
    for name in ("a2", "a4", "a5"):
        values = getattr(p, name)
        families[name] = None if values[0] == 0.0 else tuple(float(v / values[0]) for v in values)
    present = [r for r in families.values() if r is not None]
    if not present:
        raise ModelError("Anisotropy ratios need a2[1] or a4[1] to be nonzero")
    reference = np.array(present[0])
    consistent = all(np.allclose(r, reference, rtol=rtol, atol=0.0) for r in present)
    return RatioTable(consistent=consistent, **families)


def inertia_ratios(b_rve: SymMatrix, axes: Optional[np.ndarray] = None) -> Tuple[float, ...]:
    """(rho_k / rho_1)^2 along the rows of axes (coordinate axes by default)."""
    e = np.eye(b_rve.dim) if axes is None else np.asarray(axes, dtype=float)
    diag = np.einsum("ki,ij,kj->k", e, b_rve.components, e)
    return tuple(float(x / diag[0]) for x in diag)


# -----------------------------------------------------------------------------
# Closed-form cases (literal parameter formulas)
# -----------------------------------------------------------------------------

def _require(params: Mapping[str, float], *names: str) -> List[float]:
    missing = [n for n in names if n not in params]
    if missing:
        raise ModelError(f"Missing parameters: {', '.join(missing)}")
    return [float(params[n]) for n in names]


def _check_radius(r: float, *sides: float) -> None:
    if not r > 0.0:
        raise ModelError(f"Inclusion radius must be positive, got {r}")
    if r > min(sides) / 2.0:
        raise ModelError(f"Inclusion radius {r} does not fit the RVE of sides {list(sides)}")


def rect_circle_params(k1, mu1, k2, mu2, r, h1, h2) -> NonlocalParams:
    """Circular inclusion in an h1 x h2 rectangle; a[2] = (h2/h1)^2 a[1]."""
    _check_radius(r, h1, h2)
    a2_bracket, a4_bracket = disc.circle_brackets(k1, mu1, k2, mu2)
    c = math.pi * r ** 2 / 24.0 * h1 / h2
    a2, a4 = c * a2_bracket, c * a4_bracket
    ratio = (h2 / h1) ** 2
    return NonlocalParams([a2, ratio * a2], [a4, ratio * a4], [a4, ratio * a4], 0.0, 0.0)


def box_sphere_params(k1, mu1, k2, mu2, r, h1, h2, h3, erratum_sign: bool = False) -> NonlocalParams:
    """Spherical inclusion in an h1 x h2 x h3 box; a[k] = (h_k/h1)^2 a[1]."""
    _check_radius(r, h1, h2, h3)
    a2_bracket, a4_bracket = disc.sphere_brackets(k1, mu1, k2, mu2, erratum_sign)
    c = math.pi * r ** 3 / 18.0 * h1 / (h2 * h3)
    ratios = np.array([1.0, (h2 / h1) ** 2, (h3 / h1) ** 2])
    return NonlocalParams(c * a2_bracket * ratios, c * a4_bracket * ratios, c * a4_bracket * ratios)


def square_ellipse_params(lam1, mu1, b1, aspect_ratio) -> NonlocalParams:
    """Elliptical void (semi-axes b1, Lambda b1) in a square RVE; independent of the side."""
    disc.elliptic_hole(lam1, mu1, aspect_ratio)
    ar = aspect_ratio
    stiff = lam1 + 2.0 * mu1
    c = math.pi * b1 ** 2 / 48.0
    a2 = c * (lam1 * stiff * (1 + ar ** 2) - 2 * ar * mu1 ** 2) / (mu1 * (lam1 + mu1)) * stiff
    a4 = c * (lam1 * (1 - ar) + 2 * mu1) / (lam1 + mu1) * (1 + ar) * stiff
    a6 = -c * (1 - ar ** 2) * stiff
    return NonlocalParams.uniform(a2, a4, a4, a6, 2.0 * a6)


def square_crack_params(lam1, mu1, b1, h: Optional[float] = None) -> NonlocalParams:
    c = disc.crack_products(lam1, mu1, b1, h)
    return NonlocalParams.uniform(c.a2, c.a4, c.a5, c.a6, c.a9)


# -----------------------------------------------------------------------------
# Generic pipeline and result assembly
# -----------------------------------------------------------------------------

def _extraction_axes(b_rve: SymMatrix, d: Optional[disc.Discrepancy]) -> np.ndarray:
    """Coordinate axes when B is diagonal, else its principal axes."""
    b = b_rve.components
    off = b - np.diag(np.diag(b))
    if np.max(np.abs(off)) <= 1e-12 * np.max(np.abs(b)):
        if isinstance(d, disc.OrthotropicDiscrepancy) and principal_inertia(b_rve).spherical:
            return d.axes
        return np.eye(b_rve.dim)
    return principal_inertia(b_rve).axes


def homogenize(
    model: str,
    ctilde: ElasticTensor,
    b_rve: SymMatrix,
    f: float,
    settings: Optional[Settings] = None,
    aeq: Optional[GradElasticTensor] = None,
    d: Optional[disc.Discrepancy] = None,
    decomposition: Optional[InertiaDecomposition] = None,
    literal: Optional[NonlocalParams] = None,
    literal_tol: float = CLOSED_FORM_TOL,
    warnings: Tuple[ModelWarning, ...] = (),
) -> HomogenizationResult:
    """A_eq from C~, B and f, with parameters, definiteness and symmetry labels."""
    settings = settings or get_settings()
    warnings = list(warnings)
    generic = effective_grad_tensor(ctilde, b_rve, f)
    aeq = generic if aeq is None else aeq

    params = extract_ortho_params(generic, _extraction_axes(b_rve, d))
    if params.residual > settings.fit_tol * max(generic.norm(), 1e-300):
        logger.info(f"A_eq leaves the orthotropic span (residual {params.residual:.3e}); parameters omitted")
        params = None

    deviation = None
    if literal is not None and params is not None:
        deviation = params_deviation(literal, params)
        if deviation > literal_tol:
            message = f"Closed form and generic pipeline differ by {deviation:.3e} (tolerance {literal_tol:g})"
            logger.warning(message)
            warnings.append(ModelWarning("closed_form_mismatch", message))

    positive, min_eig = is_positive_definite(aeq, settings.definiteness_tol)
    probes = canonical_probes(aeq.dim)
    label = classify_symmetry(aeq, probes, settings.classify_tol)
    intersection = label_from_profile(
        intersect_profiles(
            invariance_profile(ctilde, probes, settings.classify_tol),
            invariance_profile(b_rve, probes, settings.classify_tol),
        ),
        aeq.dim,
    )
    logger.debug(f"{model}: symmetry {label}, positive definite {positive} (min eigenvalue {min_eig:.3e})")
    return HomogenizationResult(
        model=model,
        aeq=aeq,
        ctilde=ctilde,
        b_rve=b_rve,
        f=f,
        params=literal if literal is not None else params,
        positive_definite=positive,
        min_eigenvalue=min_eig,
        symmetry=label,
        symmetry_intersection=intersection,
        discrepancy=d,
        decomposition=decomposition,
        literal_params=literal,
        literal_deviation=deviation,
        warnings=tuple(warnings) + (d.warnings if d is not None else ()),
    )


def _rect(h1: float, h2: float) -> SymMatrix:
    return SymMatrix(np.diag([h1 ** 2, h2 ** 2]) / 12.0)


def closed_form_case(
    case: str,
    params: Mapping[str, float],
    erratum_sign: bool = False,
    settings: Optional[Settings] = None,
) -> HomogenizationResult:
    """
    Literal nonlocal parameters of a documented case, the A_eq they assemble,
    and their deviation from the generic discrepancy pipeline.

    Parameter names: rect_circle K1 mu1 K2 mu2 r h1 h2; box_sphere adds h3;
    square_ellipse lambda1 mu1 b1 aspect_ratio [h]; square_crack lambda1 mu1 b1 [h].
    """
    settings = settings or get_settings()
    if case == "rect_circle":
        k1, mu1, k2, mu2, r, h1, h2 = _require(params, "K1", "mu1", "K2", "mu2", "r", "h1", "h2")
        literal = rect_circle_params(k1, mu1, k2, mu2, r, h1, h2)
        d = disc.circular_inclusion(k1, mu1, k2, mu2)
        b, f = _rect(h1, h2), math.pi * r ** 2 / (h1 * h2)
        tol = CLOSED_FORM_TOL
    elif case == "box_sphere":
        k1, mu1, k2, mu2, r, h1, h2, h3 = _require(params, "K1", "mu1", "K2", "mu2", "r", "h1", "h2", "h3")
        literal = box_sphere_params(k1, mu1, k2, mu2, r, h1, h2, h3, erratum_sign)
        d = disc.spherical_inclusion(k1, mu1, k2, mu2, erratum_sign)
        b = SymMatrix(np.diag([h1 ** 2, h2 ** 2, h3 ** 2]) / 12.0)
        f = 4.0 * math.pi * r ** 3 / (3.0 * h1 * h2 * h3)
        tol = CLOSED_FORM_TOL
    elif case in ("square_ellipse", "square_crack"):
        lam1, mu1, b1 = _require(params, "lambda1", "mu1", "b1")
        h = float(params.get("h") or DEFAULT_RVE_TO_CRACK * b1)
        if not b1 < h / 2.0:
            raise ModelError(f"Semi-axis b1={b1} does not fit a square RVE of side {h}")
        if case == "square_ellipse":
            (ar,) = _require(params, "aspect_ratio")
            literal = square_ellipse_params(lam1, mu1, b1, ar)
            tol = CLOSED_FORM_TOL
        else:
            ar = CRACK_LIMIT_RATIO
            literal = square_crack_params(lam1, mu1, b1, h)
            tol = CRACK_LIMIT_TOL
        d = disc.elliptic_hole(lam1, mu1, ar)
        b, f = _rect(h, h), math.pi * b1 ** 2 * ar / h ** 2
    else:
        raise ModelError(f"Unknown closed-form case {case!r}; expected one of {', '.join(CLOSED_FORM_CASES)}")

    return homogenize(
        case,
        disc.to_full_tensor(d),
        b,
        f,
        settings,
        aeq=assemble_from_params(literal),
        d=d,
        literal=literal,
        literal_tol=tol,
    )


# -----------------------------------------------------------------------------
# End-to-end analysis
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSelection:
    """Provenance of C~: a named model, explicit values or effective moduli."""

    name: str = "generic"
    ctilde: Optional[Union[disc.Discrepancy, ElasticTensor]] = None
    effective: Optional[ElasticTensor] = None
    crack_half_length: Optional[float] = None
    erratum_sign: Optional[bool] = None

    def __post_init__(self):
        if self.name not in MODELS:
            raise ModelError(f"Unknown model {self.name!r}; expected one of {', '.join(MODELS)}")
        if self.name == "explicit_ctilde" and self.ctilde is None:
            raise ModelError("explicit_ctilde needs the discrepancy values")
        if self.name == "from_effective" and self.effective is None:
            raise ModelError("from_effective needs the effective stiffness")


def _generic_discrepancy(m: Microstructure, erratum_sign: bool) -> disc.Discrepancy:
    """Dispatch on the inclusion shape to the closed-form discrepancy."""
    inc, mat = m.inclusion, m.matrix
    k1 = mat.bulk_modulus(m.dim)
    if m.is_void:
        k2 = mu2 = 0.0
    else:
        k2, mu2 = m.inclusion_material.bulk_modulus(m.dim), m.inclusion_material.mu
    if isinstance(inc, Circle):
        return disc.circular_inclusion(k1, mat.mu, k2, mu2)
    if isinstance(inc, Sphere):
        return disc.spherical_inclusion(k1, mat.mu, k2, mu2, erratum_sign)
    if isinstance(inc, Ellipse):
        if not m.is_void:
            raise ModelError("Elliptical inclusions are only modelled as voids")
        if inc.b2 > inc.b1:
            raise ModelError(
                f"Ellipse semi-axes b1={inc.b1} < b2={inc.b2}: reorient the axes so that b1 is the major semi-axis"
            )
        return disc.elliptic_hole(mat.lam, mat.mu, inc.aspect_ratio)
    kind = "none" if inc is None else inc.kind
    raise ModelError(
        f"No closed-form discrepancy for inclusion {kind!r}; use explicit_ctilde or from_effective"
    )


def _closed_form_inputs(m: Microstructure, selection: ModelSelection) -> Dict[str, float]:
    """Read the closed-form parameters off a microstructure, checking its geometry."""
    case, rve, inc, mat = selection.name, m.rve, m.inclusion, m.matrix
    if case in ("rect_circle", "box_sphere"):
        rve_type, inc_type = (Rectangle, Circle) if case == "rect_circle" else (Box, Sphere)
        if not isinstance(rve, rve_type) or not isinstance(inc, inc_type):
            raise ModelError(f"{case} needs a {rve_type.kind} RVE and a {inc_type.kind} inclusion")
        k2, mu2 = (0.0, 0.0) if m.is_void else (
            m.inclusion_material.bulk_modulus(m.dim), m.inclusion_material.mu
        )
        sides = {"h1": rve.h1, "h2": rve.h2}
        if case == "box_sphere":
            sides["h3"] = rve.h3
        return {"K1": mat.bulk_modulus(m.dim), "mu1": mat.mu, "K2": k2, "mu2": mu2, "r": inc.r, **sides}
    if not isinstance(rve, Rectangle) or not math.isclose(rve.h1, rve.h2, rel_tol=1e-12):
        raise ModelError(f"{case} needs a square RVE")
    if not m.is_void:
        raise ModelError(f"{case} models voids only")
    if case == "square_ellipse":
        if not isinstance(inc, Ellipse):
            raise ModelError("square_ellipse needs an ellipse inclusion")
        if inc.b2 > inc.b1:
            raise ModelError(
                f"Ellipse semi-axes b1={inc.b1} < b2={inc.b2}: reorient the axes so that b1 is the major semi-axis"
            )
        return {"lambda1": mat.lam, "mu1": mat.mu, "b1": inc.b1, "aspect_ratio": inc.aspect_ratio, "h": rve.h1}
    if selection.crack_half_length is None:
        raise ModelError("square_crack needs the crack half-length b1")
    return {"lambda1": mat.lam, "mu1": mat.mu, "b1": selection.crack_half_length, "h": rve.h1}


def analyze(
    m: Microstructure,
    selection: Optional[ModelSelection] = None,
    settings: Optional[Settings] = None,
) -> HomogenizationResult:
    """Geometry, discrepancy, A_eq, parameter extraction and classification in one pass."""
    settings = settings or get_settings()
    selection = selection or ModelSelection()
    erratum = settings.erratum_sign_3d if selection.erratum_sign is None else selection.erratum_sign
    decomposition = rve_inertia_decomposition(m)
    warnings = tuple(m.dilute_warnings(settings.dilute_threshold))
    logger.info(f"Analyzing {m.dim}D microstructure with model {selection.name}, f={m.volume_fraction:.6g}")

    if selection.name in CLOSED_FORM_CASES:
        result = closed_form_case(selection.name, _closed_form_inputs(m, selection), erratum, settings)
        return replace(result, decomposition=decomposition, warnings=warnings + result.warnings)

    d: Optional[disc.Discrepancy] = None
    f = m.volume_fraction
    if selection.name == "generic":
        d = _generic_discrepancy(m, erratum)
        ctilde = disc.to_full_tensor(d)
    elif selection.name == "explicit_ctilde":
        if isinstance(selection.ctilde, ElasticTensor):
            ctilde = selection.ctilde
        else:
            d = selection.ctilde
            ctilde = disc.to_full_tensor(d)
    else:
        c1 = make_isotropic_elastic(m.matrix.lam, m.matrix.mu, m.dim)
        ctilde = disc.from_effective(selection.effective, c1, f)
    if ctilde.dim != m.dim:
        raise ModelError(f"Discrepancy is {ctilde.dim}D but the microstructure is {m.dim}D")
    return homogenize(
        selection.name,
        ctilde,
        decomposition.b_rve,
        f,
        settings,
        d=d,
        decomposition=decomposition,
        warnings=warnings,
    )
