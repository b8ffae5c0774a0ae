"""Phantom geometry, the material library, Young's modulus fitting and the
synthetic rail-conformity model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property, lru_cache
from importlib import resources
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DataError, DomainError, InsufficientDataError, NotFoundError
from .fiber import ConstantCurvatureField, CurvatureField, CurvatureSample

MATERIALS_SCHEMA_VERSION = 1
RIGID = "RIGID"
PHANTOM_KINDS = ("groove_plate", "rigid_block", "soft_block", "kidney_surface")
GROOVE_RADII_MM = (30.0, 50.0, 70.0, 90.0, 110.0)
SOFT_RADII_MM = (30.0, 110.0)
RADIUS_BOUNDS_MM = (20.0, 200.0)
STEP_ELEVATION_MM = 15.0
MODULUS_WINDOW = (0.075, 0.15)


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    shore_hardness: str
    youngs_modulus: float  # MPa
    modulus_uncertainty: float = 0.0  # MPa
    aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.youngs_modulus > 0.0):
            raise DomainError(f"{self.name}: Young's modulus must be positive")
        if not (self.modulus_uncertainty >= 0.0):
            raise DomainError(f"{self.name}: modulus uncertainty must be >= 0")
        object.__setattr__(self, "aliases", tuple(self.aliases))


def _norm(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


def materials_to_json(materials: Sequence[MaterialSpec]) -> str:
    doc = {
        "schema_version": MATERIALS_SCHEMA_VERSION,
        "units": {"youngs_modulus": "MPa", "modulus_uncertainty": "MPa"},
        "materials": [{**asdict(m), "aliases": list(m.aliases)} for m in materials],
    }
    return json.dumps(doc, indent=2) + "\n"


def materials_from_json(text: str) -> list[MaterialSpec]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"material library is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != MATERIALS_SCHEMA_VERSION:
        raise DataError(f"unsupported material schema version {doc.get('schema_version')!r}")
    try:
        return [MaterialSpec(**entry) for entry in doc["materials"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed material entry: {exc}") from exc


@lru_cache(maxsize=1)
def _builtin() -> tuple[MaterialSpec, ...]:
    text = resources.files("fbgrail.data").joinpath("materials.json").read_text(encoding="utf-8")
    return tuple(materials_from_json(text))


def builtin_materials() -> list[MaterialSpec]:
    """Measured stiffness of the kidney samples and silicones, in MPa."""
    return list(_builtin())


def find_material(name: str, library: Sequence[MaterialSpec] | None = None) -> MaterialSpec:
    key = _norm(name)
    for m in library if library is not None else _builtin():
        if key == _norm(m.name) or key in {_norm(a) for a in m.aliases}:
            return m
    raise NotFoundError(f"unknown material {name!r}")


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "groove_plate"
    radii: tuple[float, ...] = GROOVE_RADII_MM
    material: MaterialSpec | str = RIGID
    step_elevation: float | None = None

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise DomainError(f"unknown phantom kind {self.kind!r}; expected one of {PHANTOM_KINDS}")
        radii = tuple(float(r) for r in self.radii)
        lo, hi = RADIUS_BOUNDS_MM
        if not radii or any(not lo <= r <= hi for r in radii):
            raise DomainError(f"phantom radii must lie in [{lo}, {hi}] mm, got {radii}")
        object.__setattr__(self, "radii", radii)
        if self.kind == "rigid_block" and self.step_elevation is None:
            object.__setattr__(self, "step_elevation", STEP_ELEVATION_MM)
        if self.kind != "rigid_block" and self.step_elevation is not None:
            raise DomainError("step_elevation only applies to the rigid curvature block")
        if isinstance(self.material, str) and self.material != RIGID:
            object.__setattr__(self, "material", find_material(self.material))

    @property
    def is_rigid(self) -> bool:
        return self.material == RIGID

    @property
    def material_name(self) -> str:
        return RIGID if self.is_rigid else self.material.name

    def radius(self, radius_index: int | None) -> float:
        if radius_index is None:
            return math.inf
        if not 0 <= radius_index < len(self.radii):
            raise DomainError(f"radius index {radius_index} out of range 0..{len(self.radii) - 1}")
        return self.radii[radius_index]


def groove_plate() -> PhantomSpec:
    return PhantomSpec("groove_plate", GROOVE_RADII_MM, RIGID)


def rigid_block() -> PhantomSpec:
    return PhantomSpec("rigid_block", GROOVE_RADII_MM, RIGID)


def soft_block(material: str) -> PhantomSpec:
    return PhantomSpec("soft_block", SOFT_RADII_MM, find_material(material))


def groove_curvature_field(phantom: PhantomSpec, radius_index: int | None) -> ConstantCurvatureField:
    """Constant in-plane curvature 1/R; ``radius_index=None`` is the straight reference."""
    if phantom.kind == "kidney_surface":
        raise DomainError("the kidney surface has no constant-radius grooves; use KidneySurface")
    r = phantom.radius(radius_index)
    return ConstantCurvatureField(kappa=0.0 if math.isinf(r) else 1.0 / r, phi=0.0)


@dataclass(frozen=True)
class KidneySurface(CurvatureField):
    """Superellipse cross-section |x/a|^n + |y/b|^n = 1 traversed counter-clockwise.

    With the default exponent 2 the semi-axes follow from the requested
    principal radius range: a/b^2 = 1/r_min and b/a^2 = 1/r_max.
    """

    r_min: float = 30.0
    r_max: float = 110.0
    exponent: float = 2.0
    start_angle: float = -math.pi / 2  # parameter of the first point, rad
    n_dense: int = 20001

    @property
    def semi_axes(self) -> tuple[float, float]:
        b = (self.r_min**2 * self.r_max) ** (1.0 / 3.0)
        return b * b / self.r_min, b

    def points(self, t) -> np.ndarray:
        a, b = self.semi_axes
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        e = 2.0 / self.exponent
        return np.column_stack([a * np.sign(c) * np.abs(c) ** e, b * np.sign(s) * np.abs(s) ** e])

    @cached_property
    def _table(self):
        t = self.start_angle + np.linspace(0.0, 2.0 * math.pi, self.n_dense)
        p = self.points(t)
        # pad by two samples each side so the closed curve gets central differences at the seam
        h = t[1] - t[0]
        tp = np.concatenate([t[:1] - 2 * h, t[:1] - h, t, t[-1:] + h, t[-1:] + 2 * h])
        pp = self.points(tp)
        d1 = np.gradient(pp, tp, axis=0)
        d2 = np.gradient(d1, tp, axis=0)[2:-2]
        d1 = d1[2:-2]
        speed = np.hypot(d1[:, 0], d1[:, 1])
        kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
        seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        return s, p, kappa

    @property
    def perimeter(self) -> float:
        return float(self._table[0][-1])

    def at(self, s: float) -> CurvatureSample:
        table_s, _, kappa = self._table
        k = float(np.interp(s % table_s[-1], table_s, kappa))
        return CurvatureSample(s=s, kappa=max(k, 0.0), phi=0.0)

    def sample(self, positions):
        table_s, _, kappa = self._table
        k = np.interp(np.mod(positions, table_s[-1]), table_s, kappa)
        return [CurvatureSample(s=float(s), kappa=max(float(v), 0.0), phi=0.0) for s, v in zip(positions, k)]


@dataclass(frozen=True, eq=False)
class StressStrainCurve:
    strain: np.ndarray
    stress: np.ndarray  # MPa
    max_compression: float | None = None

    def __post_init__(self):
        e = np.array(self.strain, dtype=float)
        s = np.array(self.stress, dtype=float)
        if e.ndim != 1 or e.shape != s.shape or e.size < 2:
            raise DataError("strain and stress must be matching 1-D arrays with >= 2 samples")
        if e[0] != 0.0 or np.any(np.diff(e) <= 0.0):
            raise DataError("strain must start at 0 and increase strictly")
        if np.any(s < 0.0):
            raise DataError("stress must be non-negative")
        e.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "strain", e)
        object.__setattr__(self, "stress", s)
        if self.max_compression is None:
            object.__setattr__(self, "max_compression", float(e[-1]))
        elif not (self.max_compression > 0.0):
            raise DataError("max_compression must be positive")


def estimate_youngs_modulus(
    curve: StressStrainCurve,
    window: tuple[float, float] = MODULUS_WINDOW,
    degree: int = 1,
    min_samples: int = 5,
) -> tuple[float, float]:
    """(E, standard error) in MPa from a fit inside a window of the maximum compression.

    Degree 1 returns the slope of the line; higher degrees return the
    polynomial's derivative at the window centre.
    """
    lo, hi = window[0] * curve.max_compression, window[1] * curve.max_compression
    mask = (curve.strain >= lo) & (curve.strain <= hi)
    n = int(np.count_nonzero(mask))
    if n < max(min_samples, degree + 3):
        raise InsufficientDataError(
            f"{n} samples inside the fit window [{lo:.4g}, {hi:.4g}]; need at least {max(min_samples, degree + 3)}"
        )
    x, y = curve.strain[mask], curve.stress[mask]
    if degree == 1:
        fit = stats.linregress(x, y)
        return float(fit.slope), float(fit.stderr)
    coef, cov = np.polyfit(x, y, degree, cov=True)
    x0 = 0.5 * (lo + hi)
    powers = np.arange(degree, -1, -1)
    grad = np.where(powers > 0, powers * x0 ** np.maximum(powers - 1, 0), 0.0)
    return float(grad @ coef), float(math.sqrt(max(grad @ cov @ grad, 0.0)))


def synthetic_curve(
    youngs_modulus: float,
    max_compression: float = 0.5,
    n_samples: int = 101,
    stiffening_onset: float = 0.2,
    stiffening: float = 4.0,
) -> StressStrainCurve:
    """Linear up to ``stiffening_onset`` strain, then quadratic stiffening."""
    e = np.linspace(0.0, max_compression, n_samples)
    excess = np.clip(e - stiffening_onset, 0.0, None)
    s = youngs_modulus * e + stiffening * youngs_modulus * excess**2
    return StressStrainCurve(e, s, max_compression)


@dataclass(frozen=True)
class RailSpec:
    material: MaterialSpec | str = "DragonSkin 30"
    grating_groups_in_rail: int = 8
    first_group_offset: float = 3.0  # mm from the rail's proximal end
    first_group_index: int = 0
    vacuum_pressure_kpa: float = 7.325  # recorded only

    def __post_init__(self):
        if isinstance(self.material, str):
            object.__setattr__(self, "material", find_material(self.material))
        if self.grating_groups_in_rail < 2:
            raise DomainError("a rail needs at least two grating groups")
        if self.first_group_offset < 0.0 or self.first_group_index < 0:
            raise DomainError("rail offsets must be non-negative")

    @property
    def grating_subset(self) -> tuple[int, ...]:
        return tuple(range(self.first_group_index, self.first_group_index + self.grating_groups_in_rail))


@dataclass(frozen=True)
class ConformityParams:
    """Synthetic rail/target conformity model.

    With x = kappa * reference_length and m = |ln(E_rail / E_target)|:
        bias        = kappa * x * (bias_curvature_gain + bias_mismatch_gain * m)
        noise_scale = 1 + x * (noise_curvature_gain + noise_mismatch_gain * m)
    A rigid target is not deformed by the rail, so m = 0 there.
    """

    reference_length_mm: float = 30.0
    bias_curvature_gain: float = 0.10
    bias_mismatch_gain: float = 0.05
    noise_curvature_gain: float = 0.5
    noise_mismatch_gain: float = 0.25
    synthetic: bool = True

    def __post_init__(self):
        if not self.reference_length_mm > 0.0:
            raise DomainError("reference_length_mm must be positive")
        for name in ("bias_curvature_gain", "bias_mismatch_gain", "noise_curvature_gain", "noise_mismatch_gain"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0 to keep the model monotone")


def modulus_mismatch(rail: RailSpec, phantom: PhantomSpec) -> float:
    if phantom.is_rigid:
        return 0.0
    return abs(math.log(rail.material.youngs_modulus / phantom.material.youngs_modulus))


def conformity_bias(
    rail: RailSpec,
    phantom: PhantomSpec,
    radius: float,
    params: ConformityParams = ConformityParams(),
) -> tuple[float, float]:
    """(curvature bias 1/mm, noise scale) for a rail laid on a target of radius ``radius`` mm."""
    if not radius > 0.0:
        raise DomainError(f"radius must be positive, got {radius}")
    kappa = 0.0 if math.isinf(radius) else 1.0 / radius
    x = kappa * params.reference_length_mm
    m = modulus_mismatch(rail, phantom)
    bias = kappa * x * (params.bias_curvature_gain + params.bias_mismatch_gain * m)
    scale = 1.0 + x * (params.noise_curvature_gain + params.noise_mismatch_gain * m)
    return bias, scale


def conformed_field(field: ConstantCurvatureField, bias: float) -> ConstantCurvatureField:
    """Curvature the rail actually takes: the target curvature less the bias."""
    return ConstantCurvatureField(kappa=max(field.kappa - bias, 0.0), phi=field.phi)
