"""
Geometry service - static moments, Euler tensors of inertia, normalized
inertia tensors and their principal axes for the RVE shape catalog, plus
microstructure admissibility checks.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import ModelError, ModelWarning
from app.logging import get_logger
from app.services.tensor_core import OrthogonalTransform, SymMatrix, check_dim

logger = get_logger(__name__)

# Static moment tolerance relative to measure x characteristic length
CENTROID_TOL = 1e-9
SPECTRUM_TOL = 1e-13
CONTAINMENT_TOL = 1e-12
MIN_MC_SAMPLES = 10_000
DEFAULT_DILUTE_THRESHOLD = 0.1


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ModelError(f"{name} must be positive, got {value}")
    return value


# -----------------------------------------------------------------------------
# Shapes (all centred at the origin, axis-aligned unless a polygon)
# -----------------------------------------------------------------------------

class Shape(ABC):
    """A region with its centroid at the origin."""

    kind: str = ""

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def measure(self) -> float:
        """Area (N=2) or volume (N=3)."""

    @abstractmethod
    def euler(self) -> np.ndarray:
        """Second moment E = integral of x (x) x over the region."""

    @abstractmethod
    def half_widths(self) -> np.ndarray:
        """Half widths of the axis-aligned bounding box."""

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for an (n, dim) array of points."""

    @abstractmethod
    def scaled(self, c: float) -> "Shape": ...

    def static_moment(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class Rectangle(Shape):
    h1: float
    h2: float
    kind = "rectangle"

    def __post_init__(self):
        _positive("h1", self.h1)
        _positive("h2", self.h2)

    @property
    def dim(self) -> int:
        return 2

    def measure(self) -> float:
        return self.h1 * self.h2

    def euler(self) -> np.ndarray:
        return np.diag([self.h1 ** 3 * self.h2 / 12.0, self.h1 * self.h2 ** 3 / 12.0])

    def half_widths(self) -> np.ndarray:
        return np.array([self.h1, self.h2]) / 2.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(np.abs(points) <= self.half_widths(), axis=1)

    def scaled(self, c: float) -> "Rectangle":
        return Rectangle(self.h1 * c, self.h2 * c)

    def as_polygon(self) -> "Polygon":
        a, b = self.h1 / 2.0, self.h2 / 2.0
        return Polygon(((-a, -b), (a, -b), (a, b), (-a, b)))


@dataclass(frozen=True)
class Box(Shape):
    h1: float
    h2: float
    h3: float
    kind = "box"

    def __post_init__(self):
        for name in ("h1", "h2", "h3"):
            _positive(name, getattr(self, name))

    @property
    def dim(self) -> int:
        return 3

    def measure(self) -> float:
        return self.h1 * self.h2 * self.h3

    def euler(self) -> np.ndarray:
        return self.measure() * np.diag([self.h1 ** 2, self.h2 ** 2, self.h3 ** 2]) / 12.0

    def half_widths(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3]) / 2.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(np.abs(points) <= self.half_widths(), axis=1)

    def scaled(self, c: float) -> "Box":
        return Box(self.h1 * c, self.h2 * c, self.h3 * c)


@dataclass(frozen=True)
class Ellipse(Shape):
    b1: float
    b2: float
    kind = "ellipse"

    def __post_init__(self):
        _positive("b1", self.b1)
        _positive("b2", self.b2)

    @property
    def dim(self) -> int:
        return 2

    @property
    def aspect_ratio(self) -> float:
        """Lambda = b2 / b1."""
        return self.b2 / self.b1

    def measure(self) -> float:
        return math.pi * self.b1 * self.b2

    def euler(self) -> np.ndarray:
        return self.measure() / 4.0 * np.diag([self.b1 ** 2, self.b2 ** 2])

    def half_widths(self) -> np.ndarray:
        return np.array([self.b1, self.b2])

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.sum((points / self.half_widths()) ** 2, axis=1) <= 1.0

    def scaled(self, c: float) -> "Ellipse":
        return replace(self, b1=self.b1 * c, b2=self.b2 * c)


@dataclass(frozen=True)
class Circle(Ellipse):
    b1: float = field(init=False, repr=False)
    b2: float = field(init=False, repr=False)
    r: float = 0.0
    kind = "circle"

    def __post_init__(self):
        _positive("r", self.r)
        object.__setattr__(self, "b1", float(self.r))
        object.__setattr__(self, "b2", float(self.r))

    def scaled(self, c: float) -> "Circle":
        return Circle(r=self.r * c)


@dataclass(frozen=True)
class Ellipsoid(Shape):
    b1: float
    b2: float
    b3: float
    kind = "ellipsoid"

    def __post_init__(self):
        for name in ("b1", "b2", "b3"):
            _positive(name, getattr(self, name))

    @property
    def dim(self) -> int:
        return 3

    def measure(self) -> float:
        return 4.0 * math.pi * self.b1 * self.b2 * self.b3 / 3.0

    def euler(self) -> np.ndarray:
        return self.measure() / 5.0 * np.diag([self.b1 ** 2, self.b2 ** 2, self.b3 ** 2])

    def half_widths(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3])

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.sum((points / self.half_widths()) ** 2, axis=1) <= 1.0

    def scaled(self, c: float) -> "Ellipsoid":
        return replace(self, b1=self.b1 * c, b2=self.b2 * c, b3=self.b3 * c)


@dataclass(frozen=True)
class Sphere(Ellipsoid):
    b1: float = field(init=False, repr=False)
    b2: float = field(init=False, repr=False)
    b3: float = field(init=False, repr=False)
    r: float = 0.0
    kind = "sphere"

    def __post_init__(self):
        _positive("r", self.r)
        for name in ("b1", "b2", "b3"):
            object.__setattr__(self, name, float(self.r))

    def scaled(self, c: float) -> "Sphere":
        return Sphere(r=self.r * c)


@dataclass(frozen=True)
class Polygon(Shape):
    """Simple polygon, vertices counter-clockwise, centroid at the origin."""

    vertices: Tuple[Tuple[float, float], ...]
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ModelError("Polygon needs at least 3 vertices given as [x, y] pairs")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        object.__setattr__(self, "vertices", tuple(tuple(float(c) for c in p) for p in v))
        area = self.measure()
        if area <= 0.0:
            raise ModelError(f"Polygon must be counter-clockwise with positive area, got {area:.6g}")
        size = float(np.max(np.abs(v)))
        s = self._raw_static_moment()
        if np.max(np.abs(s)) > CENTROID_TOL * area * size:
            logger.warning(f"Rejected off-centre polygon, static moment {s.tolist()}")
            raise ModelError(
                f"Polygon centroid must be at the origin; centroid is {(s / area).tolist()}"
            )

    @property
    def dim(self) -> int:
        return 2

    def _edges(self):
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        return x, y, xn, yn, x * yn - xn * y

    def measure(self) -> float:
        *_, cross = self._edges()
        return 0.5 * float(np.sum(cross))

    def _raw_static_moment(self) -> np.ndarray:
        x, y, xn, yn, cross = self._edges()
        return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / 6.0

    def static_moment(self) -> np.ndarray:
        return self._raw_static_moment()

    def euler(self) -> np.ndarray:
        x, y, xn, yn, cross = self._edges()
        exx = np.sum((x ** 2 + x * xn + xn ** 2) * cross) / 12.0
        eyy = np.sum((y ** 2 + y * yn + yn ** 2) * cross) / 12.0
        exy = np.sum((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * cross) / 24.0
        return np.array([[exx, exy], [exy, eyy]])

    def half_widths(self) -> np.ndarray:
        return np.max(np.abs(np.asarray(self.vertices)), axis=0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        # Crossing-number test, vectorised over points
        px, py = points[:, 0], points[:, 1]
        inside = np.zeros(len(points), dtype=bool)
        x, y, xn, yn, _ = self._edges()
        for x0, y0, x1, y1 in zip(x, y, xn, yn):
            straddles = (y0 > py) != (y1 > py)
            dy = y1 - y0 if y1 != y0 else 1.0
            x_cross = x0 + (py - y0) * (x1 - x0) / dy
            inside ^= straddles & (px < x_cross)
        return inside

    def scaled(self, c: float) -> "Polygon":
        return Polygon(tuple((x * c, y * c) for x, y in self.vertices))


def scale_shape(shape: Shape, c: float) -> Shape:
    return shape.scaled(_positive("scale factor", c))


def rotate_shape(shape: Shape, q: OrthogonalTransform) -> Shape:
    """Rotate a polygon about the origin. Catalog shapes stay axis-aligned."""
    if not isinstance(shape, Polygon):
        raise ModelError(f"Only polygons can be rotated, got {shape.kind}")
    if q.dim != 2:
        raise ModelError("Polygon rotation needs a 2D transform")
    v = np.asarray(shape.vertices) @ q.matrix.T
    if np.linalg.det(q.matrix) < 0:
        v = v[::-1]
    return Polygon(tuple(map(tuple, v)))


# -----------------------------------------------------------------------------
# Inertia
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalInertia:
    radii_squared: np.ndarray
    axes: np.ndarray  # rows are the unit vectors e_[k]
    spherical: bool

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(self.radii_squared)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", self.radii_squared, self.axes, self.axes)


@dataclass(frozen=True)
class InertiaSummary:
    measure: float
    static_moment: np.ndarray
    euler: SymMatrix
    normalized: SymMatrix
    principal: PrincipalInertia
    measure_stderr: Optional[float] = None
    static_moment_stderr: Optional[np.ndarray] = None
    euler_stderr: Optional[np.ndarray] = None

    @property
    def radii(self) -> np.ndarray:
        return self.principal.radii

    @property
    def axes(self) -> np.ndarray:
        return self.principal.axes


def static_moment(shape: Shape) -> np.ndarray:
    return shape.static_moment()


def euler_tensor(shape: Shape) -> SymMatrix:
    if shape.measure() <= 0.0:
        raise ModelError(f"Degenerate {shape.kind}: zero measure")
    return SymMatrix(shape.euler())


def normalized_inertia(shape: Shape, rve_measure: float) -> SymMatrix:
    """B = E / Omega_RVE."""
    if rve_measure <= 0.0:
        raise ModelError(f"RVE measure must be positive, got {rve_measure}")
    return SymMatrix(euler_tensor(shape).components / rve_measure)


def _canonical_axes(vectors: np.ndarray) -> np.ndarray:
    """Fix eigenvector signs deterministically and make the frame right-handed."""
    axes = np.array(vectors, dtype=float)
    for k in range(len(axes) - 1):
        if axes[k][np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    if len(axes) == 2:
        axes[1] = np.array([-axes[0][1], axes[0][0]])
    else:
        axes[2] = np.cross(axes[0], axes[1])
    return axes


def principal_inertia(b: SymMatrix, tol: float = SPECTRUM_TOL) -> PrincipalInertia:
    """Radii of gyration squared (descending) and principal axes of B."""
    values, vectors = np.linalg.eigh(b.components)
    values, vectors = values[::-1], vectors[:, ::-1]
    scale = float(np.max(np.abs(values)))
    if values[-1] < -tol * max(scale, 1.0):
        raise ModelError(f"Inertia tensor has negative eigenvalue {values[-1]:.3e}")
    values = np.clip(values, 0.0, None)
    spherical = bool(values[0] - values[-1] <= 1e-12 * scale)
    axes = np.eye(b.dim) if spherical else _canonical_axes(vectors.T)
    return PrincipalInertia(radii_squared=values, axes=axes, spherical=spherical)


def inertia_summary(shape: Shape, rve_measure: Optional[float] = None) -> InertiaSummary:
    """Analytic summary; normalized by rve_measure (the shape's own measure by default)."""
    omega = shape.measure()
    b = normalized_inertia(shape, rve_measure if rve_measure is not None else omega)
    return InertiaSummary(
        measure=omega,
        static_moment=static_moment(shape),
        euler=euler_tensor(shape),
        normalized=b,
        principal=principal_inertia(b),
    )


def monte_carlo_inertia(
    shape: Shape,
    samples: int = 1_000_000,
    seed: int = 0,
    rve_measure: Optional[float] = None,
) -> InertiaSummary:
    """
    Hit-or-miss estimate of measure, static moment and Euler tensor over the
    bounding box. Reports the standard error of each estimate; a fixed seed
    reproduces the estimate bit for bit.
    """
    if samples < MIN_MC_SAMPLES:
        raise ModelError(f"Monte-Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}")
    rng = np.random.default_rng(seed)
    hw = shape.half_widths()
    box = float(np.prod(2.0 * hw))
    pts = rng.uniform(-hw, hw, size=(samples, shape.dim))
    w = shape.contains(pts) * box

    def estimate(values: np.ndarray) -> Tuple[float, float]:
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))

    measure, measure_err = estimate(w)
    s = np.zeros(shape.dim)
    s_err = np.zeros(shape.dim)
    e = np.zeros((shape.dim, shape.dim))
    e_err = np.zeros((shape.dim, shape.dim))
    for i in range(shape.dim):
        s[i], s_err[i] = estimate(w * pts[:, i])
        for j in range(i, shape.dim):
            e[i, j], e_err[i, j] = estimate(w * pts[:, i] * pts[:, j])
            e[j, i], e_err[j, i] = e[i, j], e_err[i, j]
    b = SymMatrix(e / (rve_measure if rve_measure is not None else measure))
    logger.debug(f"Monte-Carlo inertia of {shape.kind}: {samples} samples, measure {measure:.6g}")
    return InertiaSummary(
        measure=measure,
        static_moment=s,
        euler=SymMatrix(e),
        normalized=b,
        principal=principal_inertia(b),
        measure_stderr=measure_err,
        static_moment_stderr=s_err,
        euler_stderr=e_err,
    )


# -----------------------------------------------------------------------------
# Materials and microstructure
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class IsotropicMaterial:
    """Isotropic Cauchy phase given by its Lame moduli (plane strain when N=2)."""

    lam: float
    mu: float

    def bulk_modulus(self, dim: int) -> float:
        """K = lam + mu (N=2), lam + 2 mu / 3 (N=3)."""
        return self.lam + self.mu if check_dim(dim) == 2 else self.lam + 2.0 * self.mu / 3.0

    @property
    def poisson_ratio(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    @classmethod
    def from_bulk(cls, bulk: float, mu: float, dim: int) -> "IsotropicMaterial":
        lam = bulk - mu if check_dim(dim) == 2 else bulk - 2.0 * mu / 3.0
        return cls(lam, mu)

    @classmethod
    def from_young(cls, young: float, nu: float) -> "IsotropicMaterial":
        if not -1.0 < nu < 0.5:
            raise ModelError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
        return cls(young * nu / ((1 + nu) * (1 - 2 * nu)), young / (2 * (1 + nu)))

    @classmethod
    def from_poisson(cls, nu: float, mu: float) -> "IsotropicMaterial":
        """lam = 2 mu nu / (1 - 2 nu), inverse of nu = lam / (2 (lam + mu))."""
        if not -1.0 < nu < 0.5:
            raise ModelError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
        return cls(2.0 * mu * nu / (1.0 - 2.0 * nu), mu)


@dataclass(frozen=True)
class Microstructure:
    """
    Dilute two-phase RVE: outer contour, one centred inclusion (None for a
    homogeneous RVE) and the phase materials. inclusion_material None is a void.
    """

    dim: int
    rve: Shape
    inclusion: Optional[Shape]
    matrix: IsotropicMaterial
    inclusion_material: Optional[IsotropicMaterial] = None
    f: Optional[float] = None
    consistency_tol: float = 1e-9

    def __post_init__(self):
        check_dim(self.dim)
        for name, shape in (("rve", self.rve), ("inclusion", self.inclusion)):
            if shape is not None and shape.dim != self.dim:
                raise ModelError(f"{name} is {shape.dim}D but the job is {self.dim}D")
        if self.f is not None:
            derived = self.derived_fraction
            if self.f < 0.0:
                raise ModelError(f"Volume fraction must be non-negative, got {self.f}")
            if abs(self.f - derived) > self.consistency_tol * max(derived, abs(self.f)):
                raise ModelError(
                    f"Volume fraction f={self.f!r} is inconsistent with geometry "
                    f"(inclusion/RVE measure = {derived!r})"
                )

    @property
    def derived_fraction(self) -> float:
        if self.inclusion is None:
            return 0.0
        return self.inclusion.measure() / self.rve.measure()

    @property
    def volume_fraction(self) -> float:
        return self.derived_fraction

    @property
    def is_void(self) -> bool:
        return self.inclusion_material is None

    def dilute_warnings(self, threshold: float = DEFAULT_DILUTE_THRESHOLD) -> List[ModelWarning]:
        f = self.volume_fraction
        if f > threshold:
            message = f"Volume fraction f={f:.6g} exceeds the dilute threshold {threshold:g}"
            logger.warning(message)
            return [ModelWarning("not_dilute", message)]
        return []


@dataclass(frozen=True)
class InertiaDecomposition:
    b_matrix: SymMatrix
    b_inclusion: SymMatrix
    b_rve: SymMatrix


def rve_inertia_decomposition(m: Microstructure, tol: float = CONTAINMENT_TOL) -> InertiaDecomposition:
    """B^RVE from the outer contour, B^(2) from the inclusion, B^(1) = B^RVE - B^(2)."""
    omega = m.rve.measure()
    for name, shape in (("RVE", m.rve), ("inclusion", m.inclusion)):
        if shape is None:
            continue
        bound = CENTROID_TOL * shape.measure() * float(np.max(shape.half_widths()))
        if np.any(np.abs(shape.static_moment()) > bound):
            raise ModelError(f"{name} centroid is not at the origin")
    b_rve = normalized_inertia(m.rve, omega)
    if m.inclusion is None:
        b_inc = SymMatrix(np.zeros((m.dim, m.dim)))
    else:
        b_inc = normalized_inertia(m.inclusion, omega)
    b_mat = b_rve.components - b_inc.components
    lowest = float(np.linalg.eigvalsh(b_mat)[0])
    if lowest < -tol * float(np.max(np.abs(b_rve.components))):
        raise ModelError(f"Matrix inertia has eigenvalue {lowest:.3e} < 0: inclusion not contained in the RVE")
    return InertiaDecomposition(b_matrix=SymMatrix(b_mat), b_inclusion=b_inc, b_rve=b_rve)


def check_containment(m: Microstructure, samples: int = MIN_MC_SAMPLES, seed: int = 0) -> bool:
    """Sample points of the inclusion and test that the RVE contains all of them."""
    if m.inclusion is None:
        return True
    rng = np.random.default_rng(seed)
    hw = m.inclusion.half_widths()
    pts = rng.uniform(-hw, hw, size=(samples, m.dim))
    pts = pts[m.inclusion.contains(pts)]
    return bool(np.all(m.rve.contains(pts)))
