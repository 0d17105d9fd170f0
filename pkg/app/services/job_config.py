"""
Job config service - loads and validates job documents (schema_version 1) and
turns them into microstructures and model selections.
"""
from __future__ import annotations

import copy
import json
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.config import Settings
from app.errors import ConfigError, ModelError
from app.logging import get_logger
from app.services import discrepancy as disc
from app.services.geometry import (
    Box,
    Circle,
    Ellipse,
    Ellipsoid,
    IsotropicMaterial,
    Microstructure,
    Polygon,
    Rectangle,
    Shape,
    Sphere,
)
from app.services.homogenization import ModelSelection
from app.services.tensor_core import CONSTRUCTION_TOL, ElasticTensor, make_isotropic_elastic

logger = get_logger(__name__)

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# -----------------------------------------------------------------------------
# Shapes
# -----------------------------------------------------------------------------

class RectangleSpec(_Strict):
    kind: Literal["rectangle"]
    h1: float
    h2: float


class BoxSpec(_Strict):
    kind: Literal["box"]
    h1: float
    h2: float
    h3: float


class CircleSpec(_Strict):
    kind: Literal["circle"]
    r: float


class EllipseSpec(_Strict):
    kind: Literal["ellipse"]
    b1: float
    b2: float


class SphereSpec(_Strict):
    kind: Literal["sphere"]
    r: float


class EllipsoidSpec(_Strict):
    kind: Literal["ellipsoid"]
    b1: float
    b2: float
    b3: float


class PolygonSpec(_Strict):
    kind: Literal["polygon"]
    vertices: List[List[float]]


class CrackSpec(_Strict):
    """Aligned crack of half-length b1 along axis 1 (square_crack only)."""

    kind: Literal["crack"]
    b1: float


ShapeSpec = Annotated[
    Union[RectangleSpec, BoxSpec, CircleSpec, EllipseSpec, SphereSpec, EllipsoidSpec, PolygonSpec, CrackSpec],
    Field(discriminator="kind"),
]

_SHAPE_DIMS = {
    "rectangle": 2, "circle": 2, "ellipse": 2, "polygon": 2, "crack": 2,
    "box": 3, "sphere": 3, "ellipsoid": 3,
}


def build_shape(spec) -> Shape:
    if isinstance(spec, RectangleSpec):
        return Rectangle(spec.h1, spec.h2)
    if isinstance(spec, BoxSpec):
        return Box(spec.h1, spec.h2, spec.h3)
    if isinstance(spec, CircleSpec):
        return Circle(r=spec.r)
    if isinstance(spec, EllipseSpec):
        return Ellipse(spec.b1, spec.b2)
    if isinstance(spec, SphereSpec):
        return Sphere(r=spec.r)
    if isinstance(spec, EllipsoidSpec):
        return Ellipsoid(spec.b1, spec.b2, spec.b3)
    if isinstance(spec, PolygonSpec):
        return Polygon(tuple(tuple(v) for v in spec.vertices))
    raise ModelError(f"Shape kind {spec.kind!r} has no region")


# -----------------------------------------------------------------------------
# Materials and discrepancy values
# -----------------------------------------------------------------------------

class MaterialSpec(_Strict):
    """Isotropic moduli as (lambda, mu), (K, mu) or (E, nu)."""

    lam: Optional[float] = Field(default=None, alias="lambda")
    mu: Optional[float] = None
    K: Optional[float] = None
    E: Optional[float] = None
    nu: Optional[float] = None

    @model_validator(mode="after")
    def _one_pair(self) -> "MaterialSpec":
        given = {k for k in ("lam", "mu", "K", "E", "nu") if getattr(self, k) is not None}
        if given not in ({"lam", "mu"}, {"K", "mu"}, {"E", "nu"}):
            names = sorted("lambda" if k == "lam" else k for k in given)
            raise ValueError(f"material needs exactly one of (lambda, mu), (K, mu), (E, nu); got {names}")
        return self

    def build(self, dim: int) -> IsotropicMaterial:
        if self.lam is not None:
            return IsotropicMaterial(self.lam, self.mu)
        if self.K is not None:
            return IsotropicMaterial.from_bulk(self.K, self.mu, dim)
        return IsotropicMaterial.from_young(self.E, self.nu)


class InclusionSpec(_Strict):
    shape: ShapeSpec
    material: Union[Literal["void"], MaterialSpec]


class CtildeSpec(_Strict):
    """Discrepancy values, isotropic/orthotropic parameters or full components."""

    lambda_tilde: Optional[float] = None
    mu_tilde: Optional[float] = None
    xi_tilde: Optional[float] = None
    omega_tilde: Optional[float] = None
    components: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_form(self) -> "CtildeSpec":
        scalars = self.lambda_tilde is not None and self.mu_tilde is not None
        if scalars == (self.components is not None):
            raise ValueError("ctilde needs either (lambda_tilde, mu_tilde[, xi_tilde, omega_tilde]) or components")
        return self

    def build(self, dim: int, symmetry_tol: float = CONSTRUCTION_TOL) -> Union[disc.Discrepancy, ElasticTensor]:
        if self.components is not None:
            if len(self.components) != dim ** 4:
                raise ModelError(f"ctilde components must hold {dim ** 4} values, got {len(self.components)}")
            return ElasticTensor.checked(np.array(self.components, dtype=float).reshape((dim,) * 4), symmetry_tol)
        if self.xi_tilde is None and self.omega_tilde is None:
            return disc.IsotropicDiscrepancy(self.lambda_tilde, self.mu_tilde, dim)
        if dim != 2:
            raise ModelError("xi_tilde and omega_tilde are only defined in 2D")
        return disc.OrthotropicDiscrepancy(
            self.lambda_tilde, self.mu_tilde, self.xi_tilde or 0.0, self.omega_tilde or 0.0
        ).reduce()


class FlagsSpec(_Strict):
    erratum_sign_3d: Optional[bool] = None
    seed: Optional[int] = None
    tol_symmetry: Optional[float] = None
    tol_classify: Optional[float] = None
    tol_definiteness: Optional[float] = None
    tol_fit: Optional[float] = None
    tol_consistency: Optional[float] = None

    def overrides(self) -> Dict[str, Any]:
        return {
            "erratum_sign_3d": self.erratum_sign_3d,
            "seed": self.seed,
            "symmetry_tol": self.tol_symmetry,
            "classify_tol": self.tol_classify,
            "definiteness_tol": self.tol_definiteness,
            "fit_tol": self.tol_fit,
            "consistency_tol": self.tol_consistency,
        }


# -----------------------------------------------------------------------------
# Job document
# -----------------------------------------------------------------------------

class JobConfig(_Strict):
    schema_version: Literal[1]
    dimension: Literal[2, 3]
    rve: ShapeSpec
    inclusion: Optional[InclusionSpec] = None
    matrix: MaterialSpec
    model: Literal[
        "generic", "rect_circle", "box_sphere", "square_ellipse", "square_crack", "explicit_ctilde", "from_effective"
    ] = "generic"
    f: Optional[float] = None
    ctilde: Optional[CtildeSpec] = None
    effective: Optional[MaterialSpec] = None
    flags: FlagsSpec = Field(default_factory=FlagsSpec)

    def settings(self, base: Settings) -> Settings:
        return base.with_overrides(**self.flags.overrides())

    def _is_crack(self) -> bool:
        return self.inclusion is not None and isinstance(self.inclusion.shape, CrackSpec)

    def microstructure(self, consistency_tol: float = 1e-9) -> Microstructure:
        inclusion = inclusion_material = None
        if self.inclusion is not None and not self._is_crack():
            inclusion = build_shape(self.inclusion.shape)
        if self.inclusion is not None and self.inclusion.material != "void":
            inclusion_material = self.inclusion.material.build(self.dimension)
        return Microstructure(
            dim=self.dimension,
            rve=build_shape(self.rve),
            inclusion=inclusion,
            matrix=self.matrix.build(self.dimension),
            inclusion_material=inclusion_material,
            f=self.f,
            consistency_tol=consistency_tol,
        )

    def selection(self, symmetry_tol: float = CONSTRUCTION_TOL) -> ModelSelection:
        effective = None
        if self.effective is not None:
            c = self.effective.build(self.dimension)
            effective = make_isotropic_elastic(c.lam, c.mu, self.dimension)
        return ModelSelection(
            name=self.model,
            ctilde=self.ctilde.build(self.dimension, symmetry_tol) if self.ctilde is not None else None,
            effective=effective,
            crack_half_length=self.inclusion.shape.b1 if self._is_crack() else None,
            erratum_sign=self.flags.erratum_sign_3d,
        )

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


def _format_validation_error(e: ValidationError) -> List[str]:
    violations = []
    for err in e.errors():
        where = ".".join(str(part) for part in err["loc"]) or "<root>"
        violations.append(f"{where}: {err['msg']}")
    return violations


def _semantic_violations(cfg: JobConfig) -> List[str]:
    """Cross-field rules pydantic cannot see on its own."""
    violations = []
    dim = cfg.dimension
    if _SHAPE_DIMS[cfg.rve.kind] != dim:
        violations.append(f"rve: {cfg.rve.kind} is not a {dim}D shape")
    if cfg.inclusion is not None and _SHAPE_DIMS[cfg.inclusion.shape.kind] != dim:
        violations.append(f"inclusion.shape: {cfg.inclusion.shape.kind} is not a {dim}D shape")
    if cfg.rve.kind == "crack":
        violations.append("rve: a crack cannot be the RVE contour")
    crack = cfg._is_crack()
    if crack and cfg.model != "square_crack":
        violations.append("inclusion.shape: crack inclusions need model square_crack")
    if cfg.model == "square_crack" and not crack:
        violations.append("model: square_crack needs an inclusion of kind crack")
    if (cfg.ctilde is not None) != (cfg.model == "explicit_ctilde"):
        violations.append("ctilde: given exactly when model is explicit_ctilde")
    if (cfg.effective is not None) != (cfg.model == "from_effective"):
        violations.append("effective: given exactly when model is from_effective")
    if cfg.inclusion is None:
        violations.append(f"inclusion: model {cfg.model} needs an inclusion")
    if cfg.model == "square_ellipse" and cfg.inclusion is not None:
        shape = cfg.inclusion.shape
        if isinstance(shape, EllipseSpec) and shape.b2 > shape.b1:
            violations.append(
                f"inclusion.shape: aspect ratio b2/b1 = {shape.b2 / shape.b1:.6g} > 1; "
                "reorient the axes so that b1 is the major semi-axis"
            )
    return violations


def _without_unknown_keys(data: Dict[str, Any], e: ValidationError) -> Optional[Dict[str, Any]]:
    """The document minus its unknown keys, or None when other schema errors remain."""
    errors = e.errors()
    if any(err["type"] != "extra_forbidden" for err in errors):
        return None
    pruned = copy.deepcopy(data)
    for err in errors:
        *path, key = err["loc"]
        node = pruned
        for part in path:
            # union tags ("circle", ...) appear in loc without a matching key
            if isinstance(node, dict) and part in node:
                node = node[part]
            elif isinstance(node, list) and isinstance(part, int) and part < len(node):
                node = node[part]
        if isinstance(node, dict):
            node.pop(key, None)
    return pruned


def _job_violations(cfg: JobConfig, base: Settings) -> List[str]:
    violations = _semantic_violations(cfg)
    if violations:
        return violations
    settings = cfg.settings(base)
    for what, build in (
        ("geometry", lambda: cfg.microstructure(settings.consistency_tol)),
        ("model", lambda: cfg.selection(settings.symmetry_tol)),
    ):
        try:
            build()
        except ModelError as e:
            violations.append(f"{what}: {e}")
    return violations


def parse_config_data(data: Any, base: Optional[Settings] = None) -> JobConfig:
    """
    Validate a decoded job document, collecting every violation.

    Cross-field rules need a parsed document: they also run when the only
    schema errors are unknown keys, otherwise the schema errors are reported alone.
    """
    if not isinstance(data, dict):
        raise ConfigError(["<root>: job config must be a JSON object"])
    base = base or Settings()
    try:
        cfg = JobConfig.model_validate(data)
        violations = _job_violations(cfg, base)
    except ValidationError as e:
        violations = _format_validation_error(e)
        pruned = _without_unknown_keys(data, e)
        if pruned is not None:
            try:
                violations += _job_violations(JobConfig.model_validate(pruned), base)
            except ValidationError:
                pass
    if violations:
        for v in violations:
            logger.warning(f"Config violation: {v}")
        raise ConfigError(violations)
    return cfg


def parse_config(path: str, base: Optional[Settings] = None) -> JobConfig:
    """
    Load a job configuration from a JSON file.

    Raises:
        ConfigError: unreadable file, invalid JSON, or any schema/consistency violation
    """
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError([f"Config file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigError([f"Invalid JSON in config file: {e}"])
    cfg = parse_config_data(data, base)
    logger.info(f"Loaded {cfg.dimension}D job with model {cfg.model} from {path}")
    return cfg
