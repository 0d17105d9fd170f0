"""
Tensor core - dense second-, fourth- and sixth-order tensors with the index
symmetries of strain-gradient elasticity, plus the symmetrization operators,
orthogonal actions, condensed matrices and probe-based symmetry classification.

Index conventions: a GradElasticTensor A[i, j, h, l, m, n] pairs with the
second displacement gradient u_{h,ij}, so (i, j) and (l, m) are the
symmetric derivative pairs and h, n the displacement components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.errors import ModelError

SUPPORTED_DIMS = (2, 3)

# Relative tolerances (see app.config.Settings for the overridable copies)
CONSTRUCTION_TOL = 1e-12
CLASSIFY_TOL = 1e-9
DEFINITENESS_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-12

PROBE_SEED = 8
GENERIC_PROBE_COUNT = 8

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def check_dim(dim: int) -> int:
    if dim not in SUPPORTED_DIMS:
        raise ModelError(f"Unsupported dimension {dim}; expected 2 or 3")
    return dim


def _permute(arr: np.ndarray, source: str, target: str) -> np.ndarray:
    """Return R with R[target] = arr[source], e.g. _permute(C, 'jihk', 'ijhk')."""
    return np.einsum(f"{source}->{target}", arr)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    gap = float(np.max(np.abs(a - b))) if a.size else 0.0
    if scale == 0.0:
        return gap
    return gap / scale


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


# Index swaps that define each symmetry group, as (source, target) einsum pairs
_ELASTIC_SWAPS = (("jihk", "ijhk"), ("ijkh", "ijhk"), ("hkij", "ijhk"))
_MINDLIN_SWAPS = (("jihlmn", "ijhlmn"), ("ijhmln", "ijhlmn"), ("lmnijh", "ijhlmn"))
# Symmetries the unsymmetrized tensor must carry before symmetrization
_PRE_MINDLIN_SWAPS = (("hjilmn", "ijhlmn"), ("ijhnml", "ijhlmn"), ("lmnijh", "ijhlmn"))


def _transposition(source: str, target: str) -> Tuple[int, ...]:
    """Axes such that arr.transpose(axes) == _permute(arr, source, target)."""
    return tuple(source.index(c) for c in target)


@lru_cache(maxsize=None)
def _group(swaps) -> Tuple[Tuple[int, ...], ...]:
    """Every axis permutation generated by the swaps, identity included."""
    order = len(swaps[0][0])
    generators = [_transposition(source, target) for source, target in swaps]
    group = {tuple(range(order))}
    frontier = list(group)
    while frontier:
        p = frontier.pop()
        for g in generators:
            q = tuple(p[k] for k in g)
            if q not in group:
                group.add(q)
                frontier.append(q)
    return tuple(sorted(group))


def _enforce(arr: np.ndarray, swaps, tol: float, what: str) -> np.ndarray:
    """Reject arrays violating the swaps beyond tol, then project onto the symmetric subspace."""
    for source, target in swaps:
        gap = _relative_gap(arr, _permute(arr, source, target))
        if gap > tol:
            raise ModelError(f"{what} violates index symmetry {target}={source} (relative gap {gap:.3e})")
    group = _group(swaps)
    return sum(arr.transpose(p) for p in group) / len(group)


# -----------------------------------------------------------------------------
# Domain types
# -----------------------------------------------------------------------------

class _DenseTensor:
    """Shared behaviour for the immutable tensor wrappers."""

    order: int = 0
    components: np.ndarray

    @classmethod
    def checked(cls, components, tol: float = CONSTRUCTION_TOL):
        """Build from outside components, accepting symmetry gaps up to tol (relative)."""
        arr = _validated(components, cls.order)
        return cls(_enforce(arr, cls.swaps, tol, cls.__name__))

    @property
    def dim(self) -> int:
        return int(self.components.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def _wrap(self, arr: np.ndarray):
        return type(self)(arr)

    def __add__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        _same_dim(self, other)
        return self._wrap(self.components + other.components)

    def __sub__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        _same_dim(self, other)
        return self._wrap(self.components - other.components)

    def __mul__(self, scalar: float):
        return self._wrap(float(scalar) * self.components)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float):
        return self._wrap(self.components / float(scalar))

    def __neg__(self):
        return self._wrap(-self.components)


def _same_dim(a, b) -> None:
    if a.dim != b.dim:
        raise ModelError(f"Dimension mismatch: {a.dim} vs {b.dim}")


def _validated(arr, order: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != order:
        raise ModelError(f"Expected an order-{order} array, got order {arr.ndim}")
    dim = check_dim(arr.shape[0])
    if arr.shape != (dim,) * order:
        raise ModelError(f"Expected shape {(dim,) * order}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError("Tensor components must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class SymMatrix(_DenseTensor):
    """Symmetric N x N matrix (normalized inertia tensors, Euler tensors)."""

    components: np.ndarray
    order = 2
    swaps = (("ji", "ij"),)

    def __post_init__(self):
        arr = _validated(self.components, 2)
        arr = _enforce(arr, self.swaps, CONSTRUCTION_TOL, "SymMatrix")
        object.__setattr__(self, "components", _frozen(arr))


@dataclass(frozen=True, eq=False)
class ElasticTensor(_DenseTensor):
    """Fourth-order stiffness with minor and major symmetries."""

    components: np.ndarray
    order = 4
    swaps = _ELASTIC_SWAPS

    def __post_init__(self):
        arr = _validated(self.components, 4)
        arr = _enforce(arr, self.swaps, CONSTRUCTION_TOL, "ElasticTensor")
        object.__setattr__(self, "components", _frozen(arr))


@dataclass(frozen=True, eq=False)
class GradElasticTensor(_DenseTensor):
    """Sixth-order nonlocal stiffness with the Mindlin symmetries."""

    components: np.ndarray
    order = 6
    swaps = _MINDLIN_SWAPS

    def __post_init__(self):
        arr = _validated(self.components, 6)
        arr = _enforce(arr, self.swaps, CONSTRUCTION_TOL, "GradElasticTensor")
        object.__setattr__(self, "components", _frozen(arr))


@dataclass(frozen=True, eq=False)
class QuadraticCoefficients(_DenseTensor):
    """beta_ijk of the quadratic displacement u_i = beta_ijk x_j x_k."""

    components: np.ndarray
    order = 3
    swaps = (("ikj", "ijk"),)

    def __post_init__(self):
        arr = _validated(self.components, 3)
        arr = _enforce(arr, self.swaps, CONSTRUCTION_TOL, "QuadraticCoefficients")
        object.__setattr__(self, "components", _frozen(arr))


@dataclass(frozen=True, eq=False)
class OrthogonalTransform:
    """Orthogonal N x N matrix Q acting on every index of a tensor."""

    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ModelError(f"Orthogonal transform must be square, got shape {q.shape}")
        check_dim(q.shape[0])
        if np.max(np.abs(q.T @ q - np.eye(q.shape[0]))) > ORTHOGONALITY_TOL:
            raise ModelError("Matrix is not orthogonal within 1e-12")
        object.__setattr__(self, "matrix", _frozen(q))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "OrthogonalTransform":
        return cls(np.eye(check_dim(dim)), name="identity")

    @classmethod
    def rotation(cls, angle: float, axis: int = 2, dim: int = 2) -> "OrthogonalTransform":
        """Rotation by angle (radians). In 3D, about coordinate axis `axis` (0, 1 or 2)."""
        c, s = math.cos(angle), math.sin(angle)
        if check_dim(dim) == 2:
            return cls(np.array([[c, -s], [s, c]]), name=f"rotation({angle:.6g})")
        a, b = [k for k in range(3) if k != axis]
        q = np.eye(3)
        q[a, a], q[a, b], q[b, a], q[b, b] = c, -s, s, c
        return cls(q, name=f"rotation({angle:.6g}, axis={axis})")

    @classmethod
    def reflection(cls, axis: int, dim: int) -> "OrthogonalTransform":
        q = np.eye(check_dim(dim))
        q[axis, axis] = -1.0
        return cls(q, name=f"reflection(axis={axis})")

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "OrthogonalTransform":
        """Proper rotation from the QR factorisation of a Gaussian matrix."""
        q, r = np.linalg.qr(rng.standard_normal((check_dim(dim), dim)))
        q = q @ np.diag(np.sign(np.diag(r)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return cls(q, name="random")


TensorLike = Union[SymMatrix, ElasticTensor, GradElasticTensor, QuadraticCoefficients]


# -----------------------------------------------------------------------------
# Constructors and orthogonal action
# -----------------------------------------------------------------------------

def make_isotropic_elastic(lam: float, mu: float, dim: int) -> ElasticTensor:
    """C_ijhk = lam d_ij d_hk + mu (d_ih d_jk + d_ik d_jh)."""
    d = np.eye(check_dim(dim))
    c = (
        lam * np.einsum("ij,hk->ijhk", d, d)
        + mu * (np.einsum("ih,jk->ijhk", d, d) + np.einsum("ik,jh->ijhk", d, d))
    )
    return ElasticTensor(c)


def rotate_array(arr: np.ndarray, q: OrthogonalTransform) -> np.ndarray:
    """Contract one Q per index: R_{a b ...} = Q_{a p} Q_{b q} ... T_{p q ...}."""
    arr = np.asarray(arr, dtype=float)
    order = arr.ndim
    if any(size != q.dim for size in arr.shape):
        raise ModelError(f"Dimension mismatch: tensor of size {arr.shape[0]} vs transform of size {q.dim}")
    out, inner = _LETTERS[:order], _LETTERS[order:2 * order]
    operands = ",".join(f"{o}{i}" for o, i in zip(out, inner))
    return np.einsum(f"{operands},{inner}->{out}", *([q.matrix] * order), arr, optimize=True)


def rotate(tensor: TensorLike, q: OrthogonalTransform) -> TensorLike:
    """Orthogonal action on any tensor kind; returns the same kind."""
    return type(tensor)(rotate_array(tensor.components, q))


# -----------------------------------------------------------------------------
# Symmetrization and its inverse
# -----------------------------------------------------------------------------

def symmetrize(d: np.ndarray, tol: float = CONSTRUCTION_TOL) -> GradElasticTensor:
    """
    A_ijhlmn = (D_ijhlmn + D_ijhmln + D_jihlmn + D_jihmln) / 4.

    The input must carry D_ijhlmn = D_lmnijh = D_hjilmn = D_ijhnml.
    """
    arr = _validated(d, 6)
    arr = _enforce(arr, _PRE_MINDLIN_SWAPS, tol, "Unsymmetrized sixth-order tensor")
    a = 0.25 * (
        arr
        + _permute(arr, "ijhmln", "ijhlmn")
        + _permute(arr, "jihlmn", "ijhlmn")
        + _permute(arr, "jihmln", "ijhlmn")
    )
    return GradElasticTensor(a)


def desymmetrize(a: GradElasticTensor) -> np.ndarray:
    """Inverse symmetrization: the nine-term combination recovering D from A."""
    arr = a.components
    terms = (
        (+1, "ijhlmn"), (+1, "jhimnl"), (+1, "hijnlm"),
        (-1, "ijhnlm"), (-1, "hijlmn"), (+1, "ijhmnl"),
        (+1, "jhilmn"), (-1, "jhinlm"), (-1, "hijmnl"),
    )
    d = np.zeros_like(arr)
    for sign, source in terms:
        # D_ijhlmn accumulates A taken at the permuted index string
        d = d + sign * _permute(arr, source, "ijhlmn")
    return d


# -----------------------------------------------------------------------------
# Quadratic forms and condensed matrices
# -----------------------------------------------------------------------------

def grad_quadratic_form(a: GradElasticTensor, beta: QuadraticCoefficients) -> float:
    """Phi_A(beta) = A_jlikmh beta_ijl beta_hkm."""
    _same_dim(a, beta)
    return float(np.einsum("jlikmh,ijl,hkm->", a.components, beta.components, beta.components))


def _pairs(dim: int) -> List[Tuple[int, int]]:
    diagonal = [(i, i) for i in range(dim)]
    off = [(i, j) for i, j in combinations_with_replacement(range(dim), 2) if i != j]
    return diagonal + off


def condensed_basis(dim: int, order: int) -> np.ndarray:
    """
    Orthonormal basis of arrays symmetric in their first index pair, one row per
    basis element (flattened row-major). Off-diagonal pairs carry 1/sqrt(2) on
    each of the two entries, so coordinates carry the usual sqrt(2) weight.
    """
    check_dim(dim)
    trailing = [()] if order == 2 else [(h,) for h in range(dim)]
    rows = []
    for i, j in _pairs(dim):
        for tail in trailing:
            e = np.zeros((dim,) * (2 + len(tail)))
            w = 1.0 if i == j else 1.0 / math.sqrt(2.0)
            e[(i, j) + tail] = w
            e[(j, i) + tail] = w
            rows.append(e.ravel())
    return np.array(rows)


def condensed_matrix(tensor: Union[ElasticTensor, GradElasticTensor]) -> np.ndarray:
    """
    Matrix G of the quadratic form on the symmetric-pair space: 3 or 6 rows for
    fourth-order tensors (Mandel form), 6 or 18 rows for sixth-order tensors.
    """
    if isinstance(tensor, GradElasticTensor):
        half = 3
    elif isinstance(tensor, ElasticTensor):
        half = 2
    else:
        raise ModelError(f"No condensed form for {type(tensor).__name__}")
    dim = tensor.dim
    size = dim ** half
    p = condensed_basis(dim, half)
    g = p @ tensor.components.reshape(size, size) @ p.T
    return 0.5 * (g + g.T)


def condensed_vector(beta: QuadraticCoefficients) -> np.ndarray:
    """Coordinates x with x.G.x = Phi_A(beta): X_ijh = beta_hij in the condensed basis."""
    x = _permute(beta.components, "hij", "ijh")
    return condensed_basis(beta.dim, 3) @ x.ravel()


def is_positive_definite(
    tensor: Union[ElasticTensor, GradElasticTensor],
    tol: float = DEFINITENESS_TOL,
) -> Tuple[bool, float]:
    """Eigenvalues of the condensed matrix; positive iff min > tol x spectral scale."""
    eigenvalues = np.linalg.eigvalsh(condensed_matrix(tensor))
    scale = float(np.sum(np.abs(eigenvalues)))
    min_eigenvalue = float(eigenvalues[0])
    return (scale > 0.0 and min_eigenvalue > tol * scale), min_eigenvalue


# -----------------------------------------------------------------------------
# Symmetry classification
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeSet:
    """Fixed probe transforms grouped by the symmetry they test for."""

    reflections: Tuple[OrthogonalTransform, ...]
    quarter_turns: Tuple[OrthogonalTransform, ...]
    generic: Tuple[OrthogonalTransform, ...]

    @property
    def dim(self) -> int:
        return self.reflections[0].dim

    def all(self) -> Tuple[OrthogonalTransform, ...]:
        return self.reflections + self.quarter_turns + self.generic


def canonical_probes(dim: int, seed: int = PROBE_SEED) -> ProbeSet:
    """Axis reflections, 90 degree axis rotations and 8 seeded generic rotations."""
    check_dim(dim)
    reflections = tuple(OrthogonalTransform.reflection(k, dim) for k in range(dim))
    if dim == 2:
        quarter_turns: Tuple[OrthogonalTransform, ...] = (OrthogonalTransform.rotation(math.pi / 2),)
    else:
        quarter_turns = tuple(OrthogonalTransform.rotation(math.pi / 2, axis=k, dim=3) for k in range(3))
    rng = np.random.default_rng(seed)
    generic = tuple(OrthogonalTransform.random(dim, rng) for _ in range(GENERIC_PROBE_COUNT))
    return ProbeSet(reflections, quarter_turns, generic)


def is_invariant(tensor: TensorLike, q: OrthogonalTransform, tol: float = CLASSIFY_TOL) -> bool:
    """||Q(T) - T|| <= tol ||T||."""
    t = tensor.components
    return float(np.linalg.norm(rotate_array(t, q) - t)) <= tol * float(np.linalg.norm(t))


def invariance_profile(
    tensor: TensorLike,
    probes: Optional[ProbeSet] = None,
    tol: float = CLASSIFY_TOL,
) -> Dict[str, Tuple[bool, ...]]:
    """Per-probe invariance flags, grouped as in the ProbeSet."""
    probes = probes or canonical_probes(tensor.dim)
    return {
        "reflections": tuple(is_invariant(tensor, q, tol) for q in probes.reflections),
        "quarter_turns": tuple(is_invariant(tensor, q, tol) for q in probes.quarter_turns),
        "generic": tuple(is_invariant(tensor, q, tol) for q in probes.generic),
    }


def intersect_profiles(*profiles: Dict[str, Tuple[bool, ...]]) -> Dict[str, Tuple[bool, ...]]:
    """Probe-wise AND: the transforms leaving every tensor invariant."""
    keys = profiles[0].keys()
    return {k: tuple(all(flags) for flags in zip(*(p[k] for p in profiles))) for k in keys}


def label_from_profile(profile: Dict[str, Tuple[bool, ...]], dim: int) -> str:
    if not all(profile["reflections"]):
        return "generic"
    if not all(profile["quarter_turns"]):
        return "orthotropic"
    if not all(profile["generic"]):
        return "square" if dim == 2 else "cubic"
    return "isotropic"


def classify_symmetry(
    tensor: TensorLike,
    probes: Optional[ProbeSet] = None,
    tol: float = CLASSIFY_TOL,
) -> str:
    """Label in {isotropic, square (2D) / cubic (3D), orthotropic, generic}."""
    return label_from_profile(invariance_profile(tensor, probes, tol), tensor.dim)


# -----------------------------------------------------------------------------
# JSON codec
# -----------------------------------------------------------------------------

_KIND_BY_ORDER = {2: SymMatrix, 3: QuadraticCoefficients, 4: ElasticTensor, 6: GradElasticTensor}


def tensor_to_dict(tensor: TensorLike) -> Dict:
    """Flat row-major components with dim/order header."""
    return {
        "dim": tensor.dim,
        "order": tensor.order,
        "components": [float(x) for x in tensor.components.ravel()],
    }


def tensor_from_dict(data: Dict, tol: float = CONSTRUCTION_TOL) -> TensorLike:
    """Inverse of tensor_to_dict; symmetry gaps up to tol are projected out."""
    try:
        dim, order, flat = int(data["dim"]), int(data["order"]), data["components"]
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"Malformed tensor document: {e}")
    if order not in _KIND_BY_ORDER:
        raise ModelError(f"Unsupported tensor order {order}")
    check_dim(dim)
    if len(flat) != dim ** order:
        raise ModelError(f"Expected {dim ** order} components, got {len(flat)}")
    return _KIND_BY_ORDER[order].checked(np.array(flat, dtype=float).reshape((dim,) * order), tol)
