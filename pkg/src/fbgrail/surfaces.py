"""True-surface descriptions used by the scan executor.

A surface is a planar curve extruded along the normal of its plane, so only
the in-plane distance of a point counts. ``plane_pose`` places the curve's
plane in the world frame (identity: the world xy plane).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .kinematics import PlanarShape, Pose
from .phantoms import KidneySurface


@dataclass(frozen=True, eq=False)
class Surface:
    frame: str = field(default="base", kw_only=True)
    plane_pose: Pose | None = field(default=None, kw_only=True)

    def local_xy(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != 3:
            raise DataError("surface queries take (n, 3) points")
        if self.plane_pose is not None:
            pts = self.plane_pose.rotation.inv().apply(pts - self.plane_pose.position)
        return pts[:, :2]

    def distance(self, points) -> np.ndarray:
        return self._distance_xy(self.local_xy(points))

    def _distance_xy(self, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ArcSurface(Surface):
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 110.0

    def __post_init__(self):
        if not self.radius > 0.0:
            raise DomainError("surface radius must be positive")

    def _distance_xy(self, xy):
        return np.abs(np.hypot(xy[:, 0] - self.center[0], xy[:, 1] - self.center[1]) - self.radius)


@dataclass(frozen=True, eq=False)
class LineSurface(Surface):
    point: tuple[float, float] = (0.0, 0.0)
    direction: tuple[float, float] = (1.0, 0.0)

    def _distance_xy(self, xy):
        d = np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        rel = xy - np.asarray(self.point, dtype=float)
        return np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0])


@dataclass(frozen=True, eq=False)
class PolylineSurface(Surface):
    vertices: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise DataError("a polyline surface needs at least two (x, y) vertices")
        object.__setattr__(self, "vertices", v)

    def _distance_xy(self, xy):
        a = self.vertices[:-1][None, :, :]
        ab = np.diff(self.vertices, axis=0)[None, :, :]
        ap = xy[:, None, :] - a
        denom = np.maximum(np.sum(ab * ab, axis=2), 1e-300)
        t = np.clip(np.sum(ap * ab, axis=2) / denom, 0.0, 1.0)
        d = np.linalg.norm(ap - t[..., None] * ab, axis=2)
        return d.min(axis=1)


def arc_through_origin(radius: float, bend_sign: float = 1.0, **kw) -> ArcSurface:
    """Circle tangent to +x at the origin; positive sign bends towards +y like a positive curvature."""
    return ArcSurface(center=(0.0, math.copysign(radius, bend_sign)), radius=radius, **kw)


def shape_surface(shape: PlanarShape, **kw) -> PolylineSurface:
    return PolylineSurface(vertices=shape.points, **kw)


def kidney_polyline(kidney: KidneySurface, **kw) -> PolylineSurface:
    """Kidney cross-section shifted and rotated so its first point is the origin, heading +x."""
    _, pts, _ = kidney._table
    d = pts[1] - pts[0]
    ang = math.atan2(d[1], d[0])
    c, s = math.cos(-ang), math.sin(-ang)
    rel = pts - pts[0]
    local = np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]])
    return PolylineSurface(vertices=local, **kw)
