"""Wavelength frames -> strains -> per-grating curvature, with batch averaging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError, InsufficientDataError, NoValidDataError, RankDeficiencyError
from .fiber import (
    KAPPA_MAX,
    SMALL_STRAIN_LIMIT,
    TWO_PI,
    CurvatureSample,
    FiberSpec,
    WavelengthFrame,
)

MAD_SCALE = 1.4826
OUTLIER_K = 5.0
MAD_FLOOR = 1e-6  # 1/mm
MIN_FRAMES_FOR_REJECTION = 5

# central core plus outer cores at 0, 4pi/7 and 8pi/7: four gratings per position
DEFAULT_CORES = (0, 1, 3, 5)


@dataclass(frozen=True)
class StrainSample:
    grating_index: int
    core_index: int
    strain: float

    def __post_init__(self):
        if not abs(self.strain) < SMALL_STRAIN_LIMIT:
            raise DomainError(f"strain {self.strain} outside the small-strain regime")


@dataclass(frozen=True)
class CurvatureProfile:
    samples: tuple[CurvatureSample, ...]
    grating_indices: tuple[int, ...]
    source_frame_count: int
    rejected_frame_indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "grating_indices", tuple(int(i) for i in self.grating_indices))
        object.__setattr__(self, "rejected_frame_indices", tuple(int(i) for i in self.rejected_frame_indices))
        if not self.samples:
            raise DataError("a curvature profile needs at least one sample")
        if len(self.samples) != len(self.grating_indices):
            raise DataError("one grating index is needed per sample")
        s = [smp.s for smp in self.samples]
        if any(b <= a for a, b in zip(s, s[1:])):
            raise DataError("profile axial positions must be strictly increasing")

    @property
    def kappa(self) -> np.ndarray:
        return np.array([smp.kappa for smp in self.samples])

    @property
    def phi(self) -> np.ndarray:
        return np.array([smp.phi for smp in self.samples])

    @property
    def positions(self) -> np.ndarray:
        return np.array([smp.s for smp in self.samples])


def strain_from_shift(shift, base_wavelength, p_e: float = 0.22):
    base = np.asarray(base_wavelength, dtype=float)
    if np.any(base <= 0.0) or not p_e < 1.0:
        raise DomainError("base wavelength must be positive and p_e < 1")
    out = np.asarray(shift, dtype=float) / (base * (1.0 - p_e))
    return float(out) if out.ndim == 0 else out


def shifted_mean(x: np.ndarray, axis: int = 0) -> np.ndarray:
    # mean about the first element: identical inputs give that element back bit-for-bit
    x = np.asarray(x, dtype=float)
    ref = np.take(x, [0], axis=axis)
    return np.squeeze(ref, axis=axis) + np.mean(x - ref, axis=axis)


def stack_frames(frames: Sequence[WavelengthFrame], fiber: FiberSpec | None = None) -> np.ndarray:
    if len(frames) == 0:
        raise InsufficientDataError("at least one frame is required")
    shape = frames[0].shape
    for i, fr in enumerate(frames):
        if fr.shape != shape:
            raise DataError(f"frame {i} has shape {fr.shape}, expected {shape}")
    if fiber is not None:
        frames[0].check_matches(fiber)
    return np.stack([fr.wavelengths for fr in frames])


def set_reference(frames: Sequence[WavelengthFrame], fiber: FiberSpec | None = None) -> np.ndarray:
    """Per-channel mean wavelength of straight-fibre frames, shape (grating, core)."""
    ref = shifted_mean(stack_frames(frames, fiber), axis=0)
    ref.setflags(write=False)
    return ref


class CurvatureFitter:
    """Least-squares fit of eps_i = -kappa r_i cos(theta_i - phi) + c.

    Solved linearly for (kappa cos phi, kappa sin phi, c). A core with zero
    offset (the central core) only constrains the common-mode term ``c``.
    The pseudo-inverse is built once, so fitting broadcasts over any number
    of frames and gratings.
    """

    def __init__(self, angles, offsets_mm, intercept: bool = True):
        angles = np.asarray(angles, dtype=float)
        offsets = np.asarray(offsets_mm, dtype=float)
        if angles.shape != offsets.shape or angles.ndim != 1:
            raise DataError("angles and offsets must be matching 1-D sequences")
        if np.count_nonzero(offsets > 0.0) < 3:
            raise InsufficientDataError(
                f"at least 3 off-axis cores are needed, got {np.count_nonzero(offsets > 0.0)}"
            )
        cols = [-offsets * np.cos(angles), -offsets * np.sin(angles)]
        if intercept:
            cols.append(np.ones_like(angles))
        design = np.column_stack(cols)
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise RankDeficiencyError(
                f"core angle set is degenerate (design rank {rank} < {design.shape[1]})"
            )
        self.design = design
        self.pinv = np.linalg.pinv(design)
        self.intercept = intercept

    def fit(self, strains) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """strains[..., core] -> (kappa, phi, common_mode), each of shape strains.shape[:-1]."""
        coef = np.einsum("pc,...c->...p", self.pinv, np.asarray(strains, dtype=float))
        a, b = coef[..., 0], coef[..., 1]
        kappa = np.hypot(a, b)
        phi = np.mod(np.arctan2(b, a), TWO_PI)
        phi = np.where(phi >= TWO_PI, 0.0, phi)
        c = coef[..., 2] if self.intercept else np.zeros_like(kappa)
        return kappa, phi, c


def curvature_at_grating(
    strains: Sequence[tuple[float, float]],
    core_offset_um: float,
    axial_position: float = 0.0,
) -> CurvatureSample:
    """Curvature from (core_angle, strain) pairs of the off-axis cores at one grating."""
    if len(strains) < 3:
        raise InsufficientDataError(f"at least 3 cores are needed, got {len(strains)}")
    angles = np.array([a for a, _ in strains], dtype=float)
    eps = np.array([e for _, e in strains], dtype=float)
    fitter = CurvatureFitter(angles, np.full(angles.shape, core_offset_um * 1e-3))
    kappa, phi, _ = fitter.fit(eps)
    return CurvatureSample(s=axial_position, kappa=float(kappa), phi=float(phi) if kappa > 0 else 0.0)


def reject_outliers(
    per_frame_curvatures,
    k: float = OUTLIER_K,
    mad_floor: float = MAD_FLOOR,
    min_frames: int = MIN_FRAMES_FOR_REJECTION,
) -> np.ndarray:
    """Keep-mask over frames; a frame goes if any grating sits beyond k scaled MADs of its median."""
    kap = np.asarray(per_frame_curvatures, dtype=float)
    if kap.ndim == 1:
        kap = kap[:, None]
    n = kap.shape[0]
    if n < min_frames:
        return np.ones(n, dtype=bool)
    med = np.median(kap, axis=0)
    dev = np.abs(kap - med)
    scale = np.maximum(MAD_SCALE * np.median(dev, axis=0), mad_floor)
    return ~np.any(dev > k * scale, axis=1)


def frame_curvatures(
    wavelengths: np.ndarray,
    reference: np.ndarray,
    fiber: FiberSpec,
    grating_subset: Sequence[int],
    cores: Sequence[int] = DEFAULT_CORES,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (kappa, phi) for stacked wavelengths[frame, grating, core].

    Also returns a validity mask flagging frames that leave the small-strain
    regime or exceed the physical curvature bound.
    """
    subset = np.asarray(grating_subset, dtype=int)
    cores = np.asarray(cores, dtype=int)
    angles, offsets = fiber.core_layout()
    if cores.min() < 0 or cores.max() >= fiber.total_core_count:
        raise DomainError(f"core selection {cores.tolist()} out of range")
    base = np.array(fiber.base_wavelengths)[subset]
    shifts = (wavelengths - reference)[:, subset][:, :, cores]
    strains = strain_from_shift(shifts, base[None, :, None], fiber.strain_optic_coefficient)
    fitter = CurvatureFitter(angles[cores], offsets[cores])
    kappa, phi, _ = fitter.fit(strains)
    valid = np.all(np.abs(strains) < SMALL_STRAIN_LIMIT, axis=(1, 2)) & np.all(kappa <= KAPPA_MAX, axis=1)
    return kappa, phi, valid


def average_samples(kappa: np.ndarray, phi: np.ndarray, positions) -> list[CurvatureSample]:
    """Arithmetic mean of kappa and kappa-weighted circular mean of phi, per grating."""
    k_mean = shifted_mean(kappa, axis=0)
    phi0 = phi[0]
    dphi = phi - phi0
    ang = np.arctan2(np.sum(kappa * np.sin(dphi), axis=0), np.sum(kappa * np.cos(dphi), axis=0))
    out = []
    for j, s in enumerate(positions):
        kj = max(float(k_mean[j]), 0.0)
        weight = float(np.sum(kappa[:, j]))
        pj = float(phi0[j] + ang[j]) if weight > 0.0 and kj > 0.0 else 0.0
        out.append(CurvatureSample(s=float(s), kappa=kj, phi=pj))
    return out


def profile_from_sequence(
    frames: Sequence[WavelengthFrame],
    reference,
    fiber: FiberSpec,
    grating_subset: Sequence[int],
    cores: Sequence[int] = DEFAULT_CORES,
    outlier_k: float = OUTLIER_K,
    mad_floor: float = MAD_FLOOR,
) -> CurvatureProfile:
    """Batch-averaged curvature profile over a grating subset."""
    return profile_from_array(
        stack_frames(frames, fiber), reference, fiber, grating_subset, cores, outlier_k, mad_floor
    )


def profile_from_array(
    wavelengths: np.ndarray,
    reference,
    fiber: FiberSpec,
    grating_subset: Sequence[int],
    cores: Sequence[int] = DEFAULT_CORES,
    outlier_k: float = OUTLIER_K,
    mad_floor: float = MAD_FLOOR,
) -> CurvatureProfile:
    """Same as :func:`profile_from_sequence` on stacked wavelengths[frame, grating, core]."""
    if len(grating_subset) == 0:
        raise DomainError("grating_subset is empty")
    subset = [int(i) for i in grating_subset]
    if min(subset) < 0 or max(subset) >= fiber.gratings_per_core:
        raise DomainError(f"grating subset {subset} outside 0..{fiber.gratings_per_core - 1}")
    if any(b <= a for a, b in zip(subset, subset[1:])):
        raise DomainError("grating_subset must be strictly increasing")
    wl = np.asarray(wavelengths, dtype=float)
    expected = (fiber.gratings_per_core, fiber.total_core_count)
    if wl.ndim != 3 or wl.shape[1:] != expected or wl.shape[0] == 0:
        raise DataError(f"wavelength stack shape {wl.shape} does not match (frames, *{expected})")
    reference = np.asarray(reference, dtype=float)
    if reference.shape != expected:
        raise DataError(f"reference shape {reference.shape} does not match frames {expected}")

    n = wl.shape[0]
    kappa, phi, valid = frame_curvatures(wl, reference, fiber, subset, cores)
    keep = np.zeros(n, dtype=bool)
    idx = np.flatnonzero(valid)
    if idx.size:
        keep[idx] = reject_outliers(kappa[idx], k=outlier_k, mad_floor=mad_floor)
    if not keep.any():
        raise NoValidDataError(f"all {n} frames were rejected")

    positions = fiber.grating_positions()[subset]
    samples = average_samples(kappa[keep], phi[keep], positions)
    return CurvatureProfile(
        samples=tuple(samples),
        grating_indices=tuple(subset),
        source_frame_count=n,
        rejected_frame_indices=tuple(np.flatnonzero(~keep).tolist()),
    )
