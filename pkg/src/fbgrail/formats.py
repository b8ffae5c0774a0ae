"""CSV readers and writers for frames, profiles, shapes, trajectories, curves and scan reports.

All files are UTF-8 with LF line endings. Floats are written with ``repr``,
the shortest text that parses back to the identical double. Metadata lines
start with ``#`` and hold ``key: value`` pairs.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .fiber import DEFAULT_FRAME_RATE, CurvatureSample, FiberSpec, WavelengthFrame
from .kinematics import PlanarShape, Pose, ScanTrajectory
from .phantoms import StressStrainCurve
from .reconstruction import CurvatureProfile
from .scan import ScanReport

WAVELENGTH_HEADER = ("timestamp_s", "grating_index", "core_index", "wavelength_nm")
PROFILE_HEADER = ("grating_index", "axial_position_mm", "kappa_per_mm", "phi_rad", "direction_defined")
TRAJECTORY_HEADER = ("index", "x_mm", "y_mm", "z_mm", "qx", "qy", "qz", "qw")
SHAPE_HEADER = ("index", "x_mm", "y_mm", "tangent_rad")
CURVE_HEADER = ("strain", "stress_mpa")
TRACK_HEADER = ("index", "x_mm", "y_mm", "z_mm")


def _f(x) -> str:
    return repr(float(x))


def _write(path, lines: Iterable[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _read(path, header: Sequence[str]) -> tuple[dict[str, str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing input file {path}")
    meta: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(c.strip() for c in rows[0]) != tuple(header):
        got = rows[0] if rows else "nothing"
        raise DataError(f"{path}: expected header {','.join(header)}, got {got}")
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: data row {n} has {len(row)} fields, expected {len(header)}")
    return meta, rows[1:]


def _floats(path, rows, cols) -> np.ndarray:
    try:
        return np.array([[float(r[c]) for c in cols] for r in rows], dtype=float).reshape(len(rows), len(cols))
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from exc


# wavelength logs ---------------------------------------------------------

def wavelength_log_lines(frames: Sequence[WavelengthFrame]) -> list[str]:
    lines = [",".join(WAVELENGTH_HEADER)]
    for fr in frames:
        t = _f(fr.timestamp)
        g_n, c_n = fr.shape
        for g in range(g_n):
            for c in range(c_n):
                lines.append(f"{t},{g},{c},{_f(fr.wavelengths[g, c])}")
    return lines


def write_wavelength_log(path, frames: Sequence[WavelengthFrame]) -> None:
    _write(path, wavelength_log_lines(frames))


def read_wavelength_log(path, fiber: FiberSpec | None = None) -> list[WavelengthFrame]:
    """Parse a wavelength log; rows may come in any order but every (grating, core) must be present."""
    _, rows = _read(path, WAVELENGTH_HEADER)
    if not rows:
        raise DataError(f"{path}: no frames")
    try:
        parsed = [(float(r[0]), int(r[1]), int(r[2]), float(r[3])) for r in rows]
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    times = sorted({p[0] for p in parsed})
    n_g = max(p[1] for p in parsed) + 1
    n_c = max(p[2] for p in parsed) + 1
    if fiber is not None and (n_g, n_c) != (fiber.gratings_per_core, fiber.total_core_count):
        raise DataError(
            f"{path}: log has {n_g} gratings x {n_c} cores, fibre has "
            f"{fiber.gratings_per_core} x {fiber.total_core_count}"
        )
    slot = {t: i for i, t in enumerate(times)}
    data = np.full((len(times), n_g, n_c), np.nan)
    for t, g, c, w in parsed:
        if g < 0 or c < 0:
            raise DataError(f"{path}: negative grating/core index")
        data[slot[t], g, c] = w
    if np.isnan(data).any():
        raise DataError(f"{path}: incomplete frames (missing grating/core entries)")
    rate = DEFAULT_FRAME_RATE
    if len(times) > 1:
        rate = (len(times) - 1) / (times[-1] - times[0])
    return [WavelengthFrame(timestamp=t, wavelengths=data[i], frame_rate=rate) for i, t in enumerate(times)]


# curvature profiles ------------------------------------------------------

def profile_lines(profile: CurvatureProfile) -> list[str]:
    rejected = ",".join(str(i) for i in profile.rejected_frame_indices)
    lines = [
        f"# source_frame_count: {profile.source_frame_count}",
        f"# rejected_frame_indices: {rejected}",
        ",".join(PROFILE_HEADER),
    ]
    for g, s in zip(profile.grating_indices, profile.samples):
        lines.append(f"{g},{_f(s.s)},{_f(s.kappa)},{_f(s.phi)},{int(s.direction_defined)}")
    return lines


def write_profile(path, profile: CurvatureProfile) -> None:
    _write(path, profile_lines(profile))


def read_profile(path) -> CurvatureProfile:
    meta, rows = _read(path, PROFILE_HEADER)
    vals = _floats(path, rows, range(5))
    samples = [CurvatureSample(s=v[1], kappa=v[2], phi=v[3], direction_defined=bool(int(v[4]))) for v in vals]
    rejected = meta.get("rejected_frame_indices", "")
    return CurvatureProfile(
        samples=tuple(samples),
        grating_indices=tuple(int(v[0]) for v in vals),
        source_frame_count=int(meta.get("source_frame_count", 0)),
        rejected_frame_indices=tuple(int(x) for x in rejected.split(",") if x.strip()),
    )


# planar shapes -----------------------------------------------------------

def write_shape(path, shape: PlanarShape, meta: dict | None = None) -> None:
    lines = [f"# arc_length_mm: {_f(shape.arc_length)}"]
    lines += [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(SHAPE_HEADER))
    for i, ((x, y), t) in enumerate(zip(shape.points, shape.tangents)):
        lines.append(f"{i},{_f(x)},{_f(y)},{_f(t)}")
    _write(path, lines)


def read_shape(path) -> tuple[PlanarShape, dict[str, str]]:
    meta, rows = _read(path, SHAPE_HEADER)
    vals = _floats(path, rows, (1, 2, 3))
    try:
        arc = float(meta["arc_length_mm"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: missing arc_length_mm metadata") from exc
    return PlanarShape(points=vals[:, :2], tangents=vals[:, 2], arc_length=arc), meta


# trajectories ------------------------------------------------------------

def trajectory_lines(traj: ScanTrajectory) -> list[str]:
    attach = traj.attach_pose or Pose.identity()
    lines = [
        f"# spacing_mm: {_f(traj.spacing)}",
        f"# source_profile_hash: {traj.source_profile_hash}",
        f"# frame: {traj.frame}",
        "# attach_position_mm: " + " ".join(_f(v) for v in attach.position),
        "# attach_orientation_xyzw: " + " ".join(_f(v) for v in attach.orientation),
        ",".join(TRAJECTORY_HEADER),
    ]
    for i, (p, q) in enumerate(zip(traj.positions, traj.orientations)):
        lines.append(f"{i}," + ",".join(_f(v) for v in (*p, *q)))
    return lines


def write_trajectory(path, traj: ScanTrajectory) -> None:
    _write(path, trajectory_lines(traj))


def read_trajectory(path) -> ScanTrajectory:
    meta, rows = _read(path, TRAJECTORY_HEADER)
    vals = _floats(path, rows, range(1, 8))
    try:
        attach = Pose(
            [float(v) for v in meta["attach_position_mm"].split()],
            [float(v) for v in meta["attach_orientation_xyzw"].split()],
        )
        spacing = float(meta["spacing_mm"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: incomplete trajectory metadata ({exc})") from exc
    return ScanTrajectory(
        positions=vals[:, :3],
        orientations=vals[:, 3:],
        spacing=spacing,
        source_profile_hash=meta.get("source_profile_hash", ""),
        attach_pose=attach,
        frame=meta.get("frame", "base"),
    )


# stress-strain curves ----------------------------------------------------

def write_curve(path, curve: StressStrainCurve) -> None:
    lines = [",".join(CURVE_HEADER)]
    lines += [f"{_f(e)},{_f(s)}" for e, s in zip(curve.strain, curve.stress)]
    _write(path, lines)


def read_curve(path, max_compression: float | None = None) -> StressStrainCurve:
    _, rows = _read(path, CURVE_HEADER)
    vals = _floats(path, rows, (0, 1))
    return StressStrainCurve(vals[:, 0], vals[:, 1], max_compression)


# scan reports ------------------------------------------------------------

def scan_report_text(report: ScanReport) -> str:
    out = io.StringIO()
    detach = "none" if report.detach_index is None else str(report.detach_index)
    out.write(f"phantom: {report.phantom_id}\n")
    out.write(f"contact_length_mm: {_f(report.contact_length)}\n")
    out.write(f"trajectory_length_mm: {_f(report.arc_length)}\n")
    out.write(f"detach_index: {detach}\n")
    out.write(f"max_surface_deviation_mm: {_f(report.max_surface_deviation)}\n")
    out.write(f"mean_surface_deviation_mm: {_f(np.mean(report.deviations))}\n")
    out.write("synthetic_flags:" + ("\n" if report.synthetic_flags else " none\n"))
    for f in report.synthetic_flags:
        out.write(f"  - {f}\n")
    return out.getvalue()


def write_scan_report(out_dir, report: ScanReport) -> tuple[Path, Path]:
    out = Path(out_dir)
    txt, track = out / "scan_report.txt", out / "element_track.csv"
    _write(txt, scan_report_text(report).splitlines())
    lines = [",".join(TRACK_HEADER)]
    lines += [f"{i}," + ",".join(_f(v) for v in p) for i, p in enumerate(report.element_track)]
    _write(track, lines)
    return txt, track


def read_scan_summary(path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if ":" in line and not line.startswith(" "):
            k, _, v = line.partition(":")
            meta[k.strip()] = v.strip()
    return meta
