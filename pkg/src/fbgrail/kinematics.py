"""
Planar shape integration and probe trajectory generation.

Each curvature sample is treated as a circular arc of constant curvature,
integrated in closed form, so a constant-curvature profile lands exactly on
a circle. The planar shape is then lifted into 3-D through the pose at
which the probe was attached to the rail.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import DataError, DomainError, PlanarityError
from .fiber import TWO_PI
from .reconstruction import CurvatureProfile

PLANARITY_TOLERANCE = 0.1  # rad
QUAT_NORM_TOL = 1e-9
_DUPLICATE_TOL = 1e-9  # mm


@dataclass(frozen=True, eq=False)
class PlanarShape:
    points: np.ndarray  # (n+1, 2) mm
    tangents: np.ndarray  # (n+1,) rad
    arc_length: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        tan = np.array(self.tangents, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2 or tan.shape != (len(pts),):
            raise DataError("a planar shape needs n+1 points (x, y) and one tangent per point")
        pts.setflags(write=False)
        tan.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tangents", tan)

    @property
    def chord_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass(frozen=True, eq=False)
class Pose:
    """Position (mm) and unit quaternion (x, y, z, w)."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        q = np.array(self.orientation, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            raise DomainError(f"orientation quaternion is not unit length (norm {np.linalg.norm(q)})")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    @classmethod
    def from_rotation(cls, position, rotation: Rotation) -> "Pose":
        return cls(position, rotation.as_quat())

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        """self * other, i.e. ``other`` expressed in this pose's frame."""
        r = self.rotation
        return Pose.from_rotation(self.position + r.apply(other.position), r * other.rotation)


@dataclass(frozen=True, eq=False)
class ScanTrajectory:
    positions: np.ndarray  # (n, 3) mm
    orientations: np.ndarray  # (n, 4) quaternions x, y, z, w
    spacing: float
    source_profile_hash: str = ""
    attach_pose: Pose | None = None
    frame: str = "base"

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        quat = np.array(self.orientations, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or quat.shape != (len(pos), 4) or len(pos) < 1:
            raise DataError("trajectory needs matching (n, 3) positions and (n, 4) quaternions")
        if np.any(np.abs(np.linalg.norm(quat, axis=1) - 1.0) > QUAT_NORM_TOL):
            raise DomainError("trajectory orientations must be unit quaternions")
        pos.setflags(write=False)
        quat.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orientations", quat)

    def __len__(self):
        return len(self.positions)

    @property
    def poses(self) -> list[Pose]:
        return [Pose(p, q) for p, q in zip(self.positions, self.orientations)]

    @property
    def cumulative_length(self) -> np.ndarray:
        d = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(d)])

    @property
    def arc_length(self) -> float:
        return float(self.cumulative_length[-1])


def profile_hash(profile: CurvatureProfile) -> str:
    h = hashlib.sha256()
    for gi, smp in zip(profile.grating_indices, profile.samples):
        h.update(f"{gi},{smp.s!r},{smp.kappa!r},{smp.phi!r},{int(smp.direction_defined)}\n".encode())
    return h.hexdigest()[:16]


def signed_curvatures(profile: CurvatureProfile, tolerance: float = PLANARITY_TOLERANCE) -> np.ndarray:
    """Project each bend direction onto the plane: phi near 0 gives +kappa, near pi gives -kappa."""
    out = []
    for smp in profile.samples:
        if not smp.direction_defined or smp.kappa == 0.0:
            out.append(0.0)
            continue
        d0 = min(smp.phi, TWO_PI - smp.phi)
        dpi = abs(smp.phi - math.pi)
        if d0 <= tolerance:
            out.append(smp.kappa)
        elif dpi <= tolerance:
            out.append(-smp.kappa)
        else:
            raise PlanarityError(
                f"bend direction {smp.phi:.4f} rad at s={smp.s} mm is more than {tolerance} rad out of plane"
            )
    return np.array(out)


def integrate_arcs(kappa_signed: Sequence[float], segment_length: float) -> PlanarShape:
    """Chain constant-curvature arcs from the origin, initial tangent along +x."""
    k = np.asarray(kappa_signed, dtype=float)
    if k.size == 0:
        raise DataError("nothing to integrate")
    if not (segment_length > 0.0):
        raise DomainError(f"segment_length must be positive, got {segment_length}")
    turn = k * segment_length
    theta = np.concatenate([[0.0], np.cumsum(turn)])
    # chord of an arc is L*sin(kL/2)/(kL/2), pointing along the mid-arc tangent
    chord = segment_length * np.sinc(turn / (2.0 * math.pi))
    mid = theta[:-1] + 0.5 * turn
    steps = np.column_stack([chord * np.cos(mid), chord * np.sin(mid)])
    points = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return PlanarShape(points=points, tangents=theta, arc_length=k.size * segment_length)


def integrate_shape(
    profile: CurvatureProfile,
    segment_length: float = 10.0,
    planarity_tolerance: float = PLANARITY_TOLERANCE,
) -> PlanarShape:
    return integrate_arcs(signed_curvatures(profile, planarity_tolerance), segment_length)


def shape_to_trajectory(
    shape: PlanarShape,
    attach_pose: Pose | None = None,
    source_profile_hash: str = "",
    frame: str = "base",
) -> ScanTrajectory:
    """Lift the planar shape into the attach frame (z = 0 there).

    Each pose's x axis follows the local shape tangent, rotated about the
    attach frame's z axis; the attach pose itself is the first waypoint.
    """
    attach = attach_pose if attach_pose is not None else Pose.identity()
    local = np.column_stack([shape.points, np.zeros(len(shape.points))])
    r_attach = attach.rotation
    positions = attach.position + r_attach.apply(local)
    rots = r_attach * Rotation.from_euler("z", shape.tangents)
    quats = _canonical_quats(rots.as_quat())
    steps = np.linalg.norm(np.diff(shape.points, axis=0), axis=1)
    return ScanTrajectory(
        positions=positions,
        orientations=quats,
        spacing=float(np.mean(steps)),
        source_profile_hash=source_profile_hash,
        attach_pose=attach,
        frame=frame,
    )


def _canonical_quats(q: np.ndarray) -> np.ndarray:
    # keep consecutive quaternions in the same hemisphere
    q = np.array(q, dtype=float)
    for i in range(1, len(q)):
        if np.dot(q[i - 1], q[i]) < 0.0:
            q[i] = -q[i]
    return q


def resample(traj: ScanTrajectory, spacing: float) -> ScanTrajectory:
    """Waypoints every ``spacing`` mm of polyline length; the endpoint is always kept.

    When the length is not a multiple of the spacing the last interval is
    shorter than ``spacing``.
    """
    if not (spacing > 0.0):
        raise DomainError(f"spacing must be positive, got {spacing}")
    cum = traj.cumulative_length
    total = float(cum[-1])
    if spacing > total + _DUPLICATE_TOL:
        raise DomainError(f"spacing {spacing} mm exceeds the trajectory length {total:.6g} mm")
    n_full = int(math.floor(total / spacing + 1e-12))
    targets = spacing * np.arange(n_full + 1)
    targets = targets[targets <= total + _DUPLICATE_TOL]
    if total - targets[-1] > _DUPLICATE_TOL:
        targets = np.append(targets, total)
    else:
        targets[-1] = total

    # drop zero-length legs so the interpolants stay well defined
    keep = np.concatenate([[True], np.diff(cum) > 0.0])
    cum_k = cum[keep]
    pos_k = traj.positions[keep]
    quat_k = traj.orientations[keep]
    positions = np.column_stack([np.interp(targets, cum_k, pos_k[:, i]) for i in range(3)])
    if len(cum_k) > 1:
        rots = Slerp(cum_k, Rotation.from_quat(quat_k))(np.clip(targets, cum_k[0], cum_k[-1]))
        quats = _canonical_quats(rots.as_quat())
    else:
        quats = np.repeat(quat_k[:1], len(targets), axis=0)
    return ScanTrajectory(
        positions=positions,
        orientations=quats,
        spacing=float(spacing),
        source_profile_hash=traj.source_profile_hash,
        attach_pose=traj.attach_pose,
        frame=traj.frame,
    )
