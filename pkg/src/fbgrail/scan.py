"""Probe-along-rail scan simulation with geometric contact-loss detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DataError, DomainError, FrameMismatchError
from .kinematics import ScanTrajectory
from .phantoms import PhantomSpec, RailSpec
from .surfaces import Surface

PROBE_ELEMENT_OFFSET_MM = 30.0


def phantom_id(phantom: PhantomSpec) -> str:
    radii = ",".join(f"{r:g}" for r in phantom.radii)
    return f"{phantom.kind}:{phantom.material_name}:{radii}"


@dataclass(frozen=True)
class ScanScenario:
    phantom: PhantomSpec
    rail: RailSpec
    trajectory: ScanTrajectory
    detach_threshold: float = 1.0  # mm
    probe_element_offset: float = PROBE_ELEMENT_OFFSET_MM
    # +1 puts the imaging element on the pose's +y side, -1 on the -y side
    element_side: float = -1.0

    def __post_init__(self):
        if self.probe_element_offset < 0.0:
            raise DomainError("probe_element_offset must be >= 0")
        if not self.detach_threshold > 0.0:
            raise DomainError("detach_threshold must be positive")
        if self.element_side not in (-1.0, 1.0):
            raise DomainError("element_side must be +1 or -1")


@dataclass(frozen=True, eq=False)
class ScanReport:
    phantom_id: str
    contact_length: float
    arc_length: float
    detach_index: int | None
    max_surface_deviation: float
    deviations: np.ndarray
    element_track: np.ndarray
    contact_points: np.ndarray
    synthetic_flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.contact_length > self.arc_length + 1e-9:
            raise DataError("contact length cannot exceed the trajectory length")

    @property
    def detached(self) -> bool:
        return self.detach_index is not None


def _crossing(cum: np.ndarray, dev: np.ndarray, threshold: float) -> tuple[int | None, float]:
    over = np.flatnonzero(dev > threshold)
    if over.size == 0:
        return None, float(cum[-1])
    i = int(over[0])
    if i == 0:
        return 0, 0.0
    # linear interpolation of the deviation between the last contact and the detach waypoint
    frac = (threshold - dev[i - 1]) / (dev[i] - dev[i - 1])
    return i, float(cum[i - 1] + frac * (cum[i] - cum[i - 1]))


def element_offsets(traj: ScanTrajectory, offset: float, side: float) -> np.ndarray:
    """Waypoints moved ``offset`` mm along each pose's in-plane normal."""
    normals = Rotation.from_quat(traj.orientations).apply(np.array([0.0, side, 0.0]))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return traj.positions + offset * normals


def execute_scan(scenario: ScanScenario, true_surface: Surface) -> ScanReport:
    """Walk the waypoints in order; contact is lost where the surface deviation first exceeds the threshold.

    The contact length is measured along the waypoint polyline, with the
    crossing point interpolated between the last in-contact waypoint and the
    first detached one.
    """
    traj = scenario.trajectory
    if traj.frame != true_surface.frame:
        raise FrameMismatchError(f"trajectory frame {traj.frame!r} differs from surface frame {true_surface.frame!r}")
    dev = true_surface.distance(traj.positions)
    cum = traj.cumulative_length
    detach, contact = _crossing(cum, dev, scenario.detach_threshold) if math.isfinite(
        scenario.detach_threshold
    ) else (None, float(cum[-1]))
    flags = []
    if not scenario.phantom.is_rigid:
        flags.append("SYNTHETIC: soft-target conformity model")
    return ScanReport(
        phantom_id=phantom_id(scenario.phantom),
        contact_length=contact,
        arc_length=float(cum[-1]),
        detach_index=detach,
        max_surface_deviation=float(dev.max()),
        deviations=dev,
        element_track=element_offsets(traj, scenario.probe_element_offset, scenario.element_side),
        contact_points=traj.positions,
        synthetic_flags=tuple(flags),
    )


@dataclass(frozen=True)
class ScanComparison:
    contact_length_delta: float
    max_deviation_delta: float
    mean_deviation_delta: float
    detach_index_a: int | None
    detach_index_b: int | None


def compare_scans(a: ScanReport, b: ScanReport) -> ScanComparison:
    """Differences a - b of two scans over the same phantom."""
    if a.phantom_id != b.phantom_id:
        raise DataError(f"cannot compare scans of different phantoms ({a.phantom_id} vs {b.phantom_id})")
    return ScanComparison(
        contact_length_delta=a.contact_length - b.contact_length,
        max_deviation_delta=a.max_surface_deviation - b.max_surface_deviation,
        mean_deviation_delta=float(np.mean(a.deviations) - np.mean(b.deviations)),
        detach_index_a=a.detach_index,
        detach_index_b=b.detach_index,
    )
