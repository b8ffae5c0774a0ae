"""
Experiment configuration.

The config file is YAML with a ``schema_version`` key. Unknown keys are
rejected and every default reproduces the canonical protocol (30 frames per
batch at 100 Hz, 8 batches, 8 in-rail grating groups, radii 30-110 mm).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import calibration
from .errors import ConfigError
from .fiber import DEFAULT_EFFECTIVE_INDEX, DEFAULT_FRAME_RATE, DEFAULT_PITCHES_NM, FiberSpec, NoiseModel
from .kinematics import Pose
from .phantoms import GROOVE_RADII_MM, RIGID, ConformityParams, PhantomSpec, RailSpec
from .reconstruction import DEFAULT_CORES, MAD_FLOOR, OUTLIER_K

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class FiberConfig(_Section):
    outer_core_count: int = 7
    core_radial_offset_um: float = 35.0
    has_central_core: bool = True
    gratings_per_core: int = 25
    grating_spacing_mm: float = 10.0
    effective_index: float = DEFAULT_EFFECTIVE_INDEX
    grating_pitch_nm: list[float] = Field(default_factory=lambda: list(DEFAULT_PITCHES_NM))
    strain_optic_coefficient: float = 0.22

    def build(self) -> FiberSpec:
        return FiberSpec(**{**self.model_dump(), "grating_pitch_nm": tuple(self.grating_pitch_nm)})


class RailConfig(_Section):
    material: str = "DragonSkin 30"
    grating_groups_in_rail: int = 8
    first_group_offset_mm: float = 3.0
    first_group_index: int = 0
    vacuum_pressure_kpa: float = 7.325

    def build(self) -> RailSpec:
        return RailSpec(
            material=self.material,
            grating_groups_in_rail=self.grating_groups_in_rail,
            first_group_offset=self.first_group_offset_mm,
            first_group_index=self.first_group_index,
            vacuum_pressure_kpa=self.vacuum_pressure_kpa,
        )


class PhantomConfig(_Section):
    kind: Literal["groove_plate", "rigid_block", "soft_block", "kidney_surface"] = "groove_plate"
    radii_mm: list[float] = Field(default_factory=lambda: list(GROOVE_RADII_MM))
    material: str = RIGID
    # index into radii_mm of the groove in use; null is the straight reference surface
    radius_index: Optional[int] = 4

    def build(self) -> PhantomSpec:
        return PhantomSpec(kind=self.kind, radii=tuple(self.radii_mm), material=self.material)


class NoiseConfig(_Section):
    wavelength_sigma_nm: float = calibration.CALIBRATED_WAVELENGTH_SIGMA_NM
    common_mode_sigma_nm: float = calibration.CALIBRATED_COMMON_MODE_SIGMA_NM
    strain_gain_sigma: float = calibration.CALIBRATED_STRAIN_GAIN_SIGMA

    def build(self, seed: int) -> NoiseModel:
        return NoiseModel(self.wavelength_sigma_nm, self.common_mode_sigma_nm, self.strain_gain_sigma, seed)


class ProtocolConfig(_Section):
    frames_per_batch: int = Field(30, ge=1)
    reference_frames: int = Field(30, ge=1)
    batches: int = Field(8, ge=1)
    frame_rate_hz: float = Field(DEFAULT_FRAME_RATE, gt=0)
    # null selects the in-rail grating groups
    grating_subset: Optional[list[int]] = None
    cores: list[int] = Field(default_factory=lambda: list(DEFAULT_CORES))
    outlier_k: float = Field(OUTLIER_K, gt=0)
    mad_floor_per_mm: float = Field(MAD_FLOOR, ge=0)


class ShapeConfig(_Section):
    segment_length_mm: float = Field(10.0, gt=0)
    planarity_tolerance_rad: float = Field(0.1, gt=0)


class PlanConfig(_Section):
    attach_position_mm: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    attach_orientation_xyzw: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 1.0])
    resample_spacing_mm: Optional[float] = Field(None, gt=0)
    frame: str = "base"

    @field_validator("attach_position_mm")
    @classmethod
    def _three(cls, v):
        if len(v) != 3:
            raise ValueError("needs 3 values (x, y, z)")
        return v

    @field_validator("attach_orientation_xyzw")
    @classmethod
    def _four(cls, v):
        if len(v) != 4:
            raise ValueError("needs 4 values (qx, qy, qz, qw)")
        return v

    def attach_pose(self) -> Pose:
        return Pose(self.attach_position_mm, self.attach_orientation_xyzw)


class ScanConfig(_Section):
    detach_threshold_mm: float = Field(1.0, gt=0)
    probe_element_offset_mm: float = Field(30.0, ge=0)
    element_side: Literal[-1, 1] = -1
    # execute a straight-line plan of the same length instead of the sensed shape
    assume_flat: bool = False


class ConformityConfig(_Section):
    enabled: bool = False
    reference_length_mm: float = 30.0
    bias_curvature_gain: float = 0.10
    bias_mismatch_gain: float = 0.05
    noise_curvature_gain: float = 0.5
    noise_mismatch_gain: float = 0.25

    def build(self) -> ConformityParams:
        return ConformityParams(**self.model_dump(exclude={"enabled"}))


class ExperimentConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "runs/default"
    fiber: FiberConfig = Field(default_factory=FiberConfig)
    rail: RailConfig = Field(default_factory=RailConfig)
    phantom: PhantomConfig = Field(default_factory=PhantomConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    shape: ShapeConfig = Field(default_factory=ShapeConfig)
    plan: PlanConfig = Field(default_factory=PlanConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    conformity: ConformityConfig = Field(default_factory=ConformityConfig)

    def grating_subset(self) -> list[int]:
        if self.protocol.grating_subset is not None:
            return list(self.protocol.grating_subset)
        return list(self.rail.build().grating_subset)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False, default_flow_style=None)


def _format_validation(exc: ValidationError, source: str) -> str:
    lines = [f"invalid config {source}:"]
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"cannot parse config {source}{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {source} must be a mapping at the top level")
    if "schema_version" not in data:
        raise ConfigError(f"config {source}: schema_version: missing (expected {SCHEMA_VERSION})")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc, source)) from exc
    validate_domain(cfg, source)
    return cfg


def validate_domain(cfg: ExperimentConfig, source: str = "<config>") -> None:
    """Build every domain object once so model-level invariants surface as config errors."""
    checks = [
        ("fiber", cfg.fiber.build),
        ("rail", cfg.rail.build),
        ("phantom", cfg.phantom.build),
        ("noise", lambda: cfg.noise.build(cfg.seed)),
        ("conformity", cfg.conformity.build),
        ("plan.attach_orientation_xyzw", cfg.plan.attach_pose),
    ]
    for name, build in checks:
        try:
            build()
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config {source}:\n  {name}: {exc}") from exc
    if cfg.phantom.radius_index is not None and not 0 <= cfg.phantom.radius_index < len(cfg.phantom.radii_mm):
        raise ConfigError(f"invalid config {source}:\n  phantom.radius_index: out of range")
    fiber = cfg.fiber.build()
    subset = cfg.grating_subset()
    if not subset or min(subset) < 0 or max(subset) >= fiber.gratings_per_core:
        raise ConfigError(f"invalid config {source}:\n  protocol.grating_subset: outside the fibre's gratings")
    if any(c < 0 or c >= fiber.total_core_count for c in cfg.protocol.cores):
        raise ConfigError(f"invalid config {source}:\n  protocol.cores: outside the fibre's cores")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def default_config() -> ExperimentConfig:
    return ExperimentConfig()
