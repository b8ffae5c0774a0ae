"""
Forward model of a multicore FBG fibre.

A curvature field imposed on the fibre is turned into per-core bending
strains, Bragg-wavelength shifts and finally noisy interrogator frames.

Units: mm along the fibre, um for the core offset (converted internally),
nm for wavelengths, 1/mm for curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError

TWO_PI = 2.0 * math.pi
KAPPA_MAX = 1.0 / 5.0  # 1/mm, tightest bend the model accepts
SMALL_STRAIN_LIMIT = 1e-2
WAVELENGTH_BAND_NM = (1200.0, 1700.0)
DEFAULT_FRAME_RATE = 100.0

# Pitches 516..540 nm with n_eff 1.468 place the 25 gratings at 1515-1586 nm.
DEFAULT_EFFECTIVE_INDEX = 1.468
DEFAULT_PITCHES_NM = tuple(516.0 + i for i in range(25))


def wrap_angle(phi: float) -> float:
    """Map an angle onto [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    if out >= TWO_PI:
        out = 0.0
    return out


def bragg_wavelength(n_eff: float, pitch: float) -> float:
    """Centre wavelength (nm) reflected by a grating of the given pitch (nm)."""
    if not (n_eff > 0.0) or not (pitch > 0.0):
        raise DomainError(f"n_eff and pitch must be positive, got n_eff={n_eff}, pitch={pitch}")
    return 2.0 * n_eff * pitch


@dataclass(frozen=True)
class CurvatureSample:
    """Curvature magnitude and bend direction at one axial position."""

    s: float
    kappa: float
    phi: float = 0.0
    direction_defined: bool | None = None
    kappa_max: float = field(default=KAPPA_MAX, repr=False, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.kappa) or self.kappa < 0.0:
            raise DomainError(f"curvature must be finite and >= 0, got {self.kappa}")
        if self.kappa > self.kappa_max:
            raise DomainError(
                f"curvature {self.kappa:.6g} 1/mm exceeds the physical bound {self.kappa_max:.6g} 1/mm"
            )
        if not math.isfinite(self.phi):
            raise DomainError(f"bend direction must be finite, got {self.phi}")
        defined = self.kappa > 0.0 if self.direction_defined is None else bool(self.direction_defined)
        if self.kappa == 0.0 and defined:
            raise DomainError("bend direction cannot be defined for zero curvature")
        object.__setattr__(self, "direction_defined", defined)
        object.__setattr__(self, "phi", wrap_angle(self.phi))


class CurvatureField:
    """A curvature field queryable at any axial position (mm)."""

    def at(self, s: float) -> CurvatureSample:
        raise NotImplementedError

    def sample(self, positions: Sequence[float]) -> list[CurvatureSample]:
        return [self.at(float(s)) for s in positions]


@dataclass(frozen=True)
class ConstantCurvatureField(CurvatureField):
    kappa: float
    phi: float = 0.0

    def at(self, s: float) -> CurvatureSample:
        return CurvatureSample(s=s, kappa=self.kappa, phi=self.phi)


@dataclass(frozen=True)
class FiberSpec:
    """Geometry and optics of the multicore fibre.

    Core index 0 is the central core when ``has_central_core`` is set; the
    outer cores follow, core ``k`` sitting at angle ``2*pi*k/outer_core_count``.
    Base wavelengths are derived from the effective index and per-grating
    pitch, so the two can never disagree.
    """

    outer_core_count: int = 7
    core_radial_offset_um: float = 35.0
    has_central_core: bool = True
    gratings_per_core: int = 25
    grating_spacing_mm: float = 10.0
    effective_index: float = DEFAULT_EFFECTIVE_INDEX
    grating_pitch_nm: tuple[float, ...] = DEFAULT_PITCHES_NM
    strain_optic_coefficient: float = 0.22

    def __post_init__(self):
        object.__setattr__(self, "grating_pitch_nm", tuple(float(p) for p in self.grating_pitch_nm))
        if self.outer_core_count < 3:
            raise DomainError("at least three outer cores are needed to resolve a bend")
        if self.gratings_per_core < 1:
            raise DomainError("gratings_per_core must be >= 1")
        if not (self.core_radial_offset_um > 0.0):
            raise DomainError("core_radial_offset_um must be positive")
        if not (self.grating_spacing_mm > 0.0):
            raise DomainError("grating_spacing_mm must be positive")
        if not (0.0 <= self.strain_optic_coefficient < 1.0):
            raise DomainError("strain_optic_coefficient must lie in [0, 1)")
        if len(self.grating_pitch_nm) != self.gratings_per_core:
            raise DomainError(
                f"{len(self.grating_pitch_nm)} pitches given for {self.gratings_per_core} gratings"
            )
        lo, hi = WAVELENGTH_BAND_NM
        for lam in self.base_wavelengths:
            if not lo <= lam <= hi:
                raise DomainError(f"base wavelength {lam} nm outside the {lo}-{hi} nm band")

    @classmethod
    def from_base_wavelengths(cls, base_wavelengths_nm: Sequence[float], **kwargs) -> "FiberSpec":
        n_eff = kwargs.pop("effective_index", DEFAULT_EFFECTIVE_INDEX)
        pitches = tuple(lam / (2.0 * n_eff) for lam in base_wavelengths_nm)
        kwargs.setdefault("gratings_per_core", len(pitches))
        return cls(effective_index=n_eff, grating_pitch_nm=pitches, **kwargs)

    @property
    def sensing_length_mm(self) -> float:
        return (self.gratings_per_core - 1) * self.grating_spacing_mm

    @property
    def total_core_count(self) -> int:
        return self.outer_core_count + int(self.has_central_core)

    @property
    def base_wavelengths(self) -> tuple[float, ...]:
        return tuple(bragg_wavelength(self.effective_index, p) for p in self.grating_pitch_nm)

    @property
    def core_angles(self) -> tuple[float, ...]:
        """Angles of the outer cores only."""
        n = self.outer_core_count
        return tuple(TWO_PI * i / n for i in range(n))

    def core_layout(self) -> tuple[np.ndarray, np.ndarray]:
        """(angle rad, radial offset mm) for every core index."""
        angles = list(self.core_angles)
        offsets = [self.core_radial_offset_um * 1e-3] * self.outer_core_count
        if self.has_central_core:
            angles.insert(0, 0.0)
            offsets.insert(0, 0.0)
        return np.array(angles), np.array(offsets)

    def grating_positions(self) -> np.ndarray:
        return np.arange(self.gratings_per_core) * self.grating_spacing_mm


@dataclass(frozen=True, eq=False)
class WavelengthFrame:
    """One interrogator snapshot, wavelengths[grating, core] in nm."""

    timestamp: float
    wavelengths: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        arr = np.array(self.wavelengths, dtype=float)
        if arr.ndim != 2:
            raise DataError(f"frame wavelengths must be 2-D (grating, core), got shape {arr.shape}")
        lo, hi = WAVELENGTH_BAND_NM
        if not np.all((arr >= lo) & (arr <= hi)):
            raise DataError(f"frame at t={self.timestamp} has wavelengths outside {lo}-{hi} nm")
        arr.setflags(write=False)
        object.__setattr__(self, "wavelengths", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.wavelengths.shape

    def check_matches(self, fiber: FiberSpec) -> None:
        expected = (fiber.gratings_per_core, fiber.total_core_count)
        if self.shape != expected:
            raise DataError(f"frame shape {self.shape} does not match fibre layout {expected}")


@dataclass(frozen=True)
class NoiseModel:
    """Interrogator noise.

    ``wavelength_sigma_nm`` is i.i.d. per channel and frame,
    ``common_mode_sigma_nm`` is one shift shared by every channel of a frame
    (temperature drift), and ``strain_gain_sigma`` is a relative error on
    each channel's strain sensitivity, drawn once per sequence.
    """

    wavelength_sigma_nm: float = 0.0
    common_mode_sigma_nm: float = 0.0
    strain_gain_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("wavelength_sigma_nm", "common_mode_sigma_nm", "strain_gain_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")

    @property
    def is_silent(self) -> bool:
        return self.wavelength_sigma_nm == 0.0 and self.common_mode_sigma_nm == 0.0 and self.strain_gain_sigma == 0.0

    def stream(self, index: int) -> np.random.Generator:
        """Index-addressed generator; stream 0 is the sequence, k+1 is frame k."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(index,))))


def strain_at_core(sample: CurvatureSample, core_angle: float, core_offset_um: float) -> float:
    """Bending strain of an off-axis core: -kappa * r * cos(angle - phi)."""
    if core_offset_um < 0.0:
        raise DomainError(f"core offset must be >= 0, got {core_offset_um}")
    if core_offset_um == 0.0 or sample.kappa == 0.0:
        return 0.0
    r_mm = core_offset_um * 1e-3
    return -sample.kappa * r_mm * math.cos(core_angle - sample.phi)


def wavelength_shift_from_strain(strain, base_wavelength, p_e: float = 0.22):
    """Bragg shift (nm) produced by a strain, linear strain-optic response."""
    eps = np.asarray(strain, dtype=float)
    if np.any(~np.isfinite(eps)) or np.any(np.abs(eps) >= SMALL_STRAIN_LIMIT):
        raise DomainError(f"strain outside the small-strain regime |eps| < {SMALL_STRAIN_LIMIT}")
    out = np.asarray(base_wavelength, dtype=float) * (1.0 - p_e) * eps
    return float(out) if out.ndim == 0 else out


def bending_strains(fiber: FiberSpec, samples: Sequence[CurvatureSample]) -> np.ndarray:
    """Strain matrix [grating, core] for a field sampled at the grating positions."""
    if len(samples) != fiber.gratings_per_core:
        raise DataError(f"field has {len(samples)} samples, fibre has {fiber.gratings_per_core} gratings")
    angles, offsets = fiber.core_layout()
    kappa = np.array([smp.kappa for smp in samples])
    phi = np.array([smp.phi for smp in samples])
    return -kappa[:, None] * offsets[None, :] * np.cos(angles[None, :] - phi[:, None])


def simulate_wavelengths(
    fiber: FiberSpec,
    samples: Sequence[CurvatureSample],
    noise: NoiseModel,
    n_frames: int,
) -> np.ndarray:
    """Noisy wavelengths[frame, grating, core] in nm for a static curvature field.

    Frame ``k`` draws its noise from stream ``k + 1`` of the seed, so frames
    can be generated in any order (or in parallel) with identical results.
    """
    if n_frames < 1:
        raise DomainError(f"n_frames must be >= 1, got {n_frames}")
    strains = bending_strains(fiber, samples)
    if noise.strain_gain_sigma > 0.0:
        strains = strains * (1.0 + noise.strain_gain_sigma * noise.stream(0).standard_normal(strains.shape))
    base = np.array(fiber.base_wavelengths)[:, None]
    clean = base + wavelength_shift_from_strain(strains, base, fiber.strain_optic_coefficient)
    out = np.repeat(clean[None], n_frames, axis=0)
    if noise.wavelength_sigma_nm > 0.0 or noise.common_mode_sigma_nm > 0.0:
        for k in range(n_frames):
            rng = noise.stream(k + 1)
            out[k] += noise.wavelength_sigma_nm * rng.standard_normal(clean.shape)
            out[k] += noise.common_mode_sigma_nm * rng.standard_normal()
    return out


def simulate_sequence(
    fiber: FiberSpec,
    samples: Sequence[CurvatureSample],
    noise: NoiseModel,
    n_frames: int,
    frame_rate: float = DEFAULT_FRAME_RATE,
    start_time: float = 0.0,
) -> list[WavelengthFrame]:
    """``n_frames`` interrogator frames spaced ``1/frame_rate`` s apart."""
    if not (frame_rate > 0.0):
        raise DomainError("frame_rate must be positive")
    wl = simulate_wavelengths(fiber, samples, noise, n_frames)
    return [
        WavelengthFrame(timestamp=start_time + k / frame_rate, wavelengths=wl[k], frame_rate=frame_rate)
        for k in range(n_frames)
    ]


def simulate_frame(fiber: FiberSpec, samples: Sequence[CurvatureSample], noise: NoiseModel) -> WavelengthFrame:
    return simulate_sequence(fiber, samples, noise, 1)[0]
