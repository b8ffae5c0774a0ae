"""
Run-directory steps behind the command line.

Layout of a run directory::

    config.yaml                 effective configuration
    references/batch_NN.csv     straight-fibre reference frames per batch
    logs/batch_NN.csv           measurement frames per batch
    profiles/batch_NN.csv       averaged curvature profile per batch
    profiles/rejections.csv     rejected frame indices per batch
    shape.csv                   integrated planar shape
    trajectory.csv              probe poses
    scan/                       scan_report.txt, element_track.csv
    report/                     report.md, tables/*.csv, provenance.txt
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import formats
from .analysis import accuracy_profile, curvature_errors, render_report, write_bundle
from .calibration import derive_seed
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericalError
from .fiber import ConstantCurvatureField, CurvatureField, simulate_sequence
from .kinematics import (
    ScanTrajectory,
    integrate_arcs,
    integrate_shape,
    profile_hash,
    resample,
    shape_to_trajectory,
)
from .phantoms import (
    KidneySurface,
    conformed_field,
    conformity_bias,
    estimate_youngs_modulus,
    find_material,
    groove_curvature_field,
    synthetic_curve,
)
from .reconstruction import CurvatureProfile, average_samples, profile_from_sequence, set_reference
from .scan import ScanScenario, execute_scan
from .surfaces import LineSurface, Surface, arc_through_origin, kidney_polyline

CONFIG_NAME = "config.yaml"


def batch_name(b: int) -> str:
    return f"batch_{b + 1:02d}.csv"


def write_config(cfg: ExperimentConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / CONFIG_NAME
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_yaml())
    return path


def run_config(out: Path, explicit: str | None = None) -> ExperimentConfig:
    if explicit:
        return load_config(explicit)
    if (out / CONFIG_NAME).is_file():
        return load_config(out / CONFIG_NAME)
    raise ConfigError(f"no --config given and {out / CONFIG_NAME} does not exist")


def synthetic_flags(cfg: ExperimentConfig) -> list[str]:
    flags = []
    n = cfg.noise
    if n.wavelength_sigma_nm or n.common_mode_sigma_nm or n.strain_gain_sigma:
        flags.append("SYNTHETIC: simulated interrogator noise (calibrated model)")
    if cfg.conformity.enabled:
        flags.append("SYNTHETIC: rail conformity bias model")
    if cfg.phantom.kind == "kidney_surface":
        flags.append("SYNTHETIC: superellipse kidney surface")
    return flags


def curvature_field(cfg: ExperimentConfig) -> tuple[CurvatureField, float]:
    """Field imposed on the fibre and the noise scale that goes with it."""
    phantom = cfg.phantom.build()
    if phantom.kind == "kidney_surface":
        lo, hi = min(phantom.radii), max(phantom.radii)
        field: CurvatureField = KidneySurface(r_min=lo, r_max=hi)
        radius = math.inf
    else:
        field = groove_curvature_field(phantom, cfg.phantom.radius_index)
        radius = phantom.radius(cfg.phantom.radius_index)
    scale = 1.0
    if cfg.conformity.enabled and isinstance(field, ConstantCurvatureField):
        bias, scale = conformity_bias(cfg.rail.build(), phantom, radius, cfg.conformity.build())
        field = conformed_field(field, bias)
    return field, scale


def geometric_curvature(cfg: ExperimentConfig) -> float | None:
    if cfg.phantom.kind == "kidney_surface" or cfg.phantom.radius_index is None:
        return None
    return 1.0 / cfg.phantom.radii_mm[cfg.phantom.radius_index]


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def simulate(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> list[Path]:
    fiber = cfg.fiber.build()
    field, scale = curvature_field(cfg)
    noise = cfg.noise.build(cfg.seed)
    noise = replace(
        noise,
        wavelength_sigma_nm=noise.wavelength_sigma_nm * scale,
        strain_gain_sigma=noise.strain_gain_sigma * scale,
    )
    pos = fiber.grating_positions()
    bent = field.sample(pos)
    straight = ConstantCurvatureField(0.0).sample(pos)
    p = cfg.protocol
    write_config(cfg, out)

    def one(b: int):
        ref = simulate_sequence(
            fiber, straight, replace(noise, seed=derive_seed(cfg.seed, b, 0)), p.reference_frames, p.frame_rate_hz
        )
        meas = simulate_sequence(
            fiber, bent, replace(noise, seed=derive_seed(cfg.seed, b, 1)), p.frames_per_batch, p.frame_rate_hz
        )
        return formats.wavelength_log_lines(ref), formats.wavelength_log_lines(meas)

    written = []
    for b, (ref_lines, meas_lines) in enumerate(_map(one, range(p.batches), jobs)):
        formats._write(out / "references" / batch_name(b), ref_lines)
        formats._write(out / "logs" / batch_name(b), meas_lines)
        written.append(out / "logs" / batch_name(b))
    return written


def reconstruct(cfg: ExperimentConfig, out: Path, jobs: int = 1, logs: Sequence[Path] | None = None) -> list[Path]:
    fiber = cfg.fiber.build()
    subset = cfg.grating_subset()
    p = cfg.protocol
    if logs is None:
        logs = [out / "logs" / batch_name(b) for b in range(p.batches)]

    def one(log: Path) -> CurvatureProfile:
        ref_path = log.parent.parent / "references" / log.name
        frames = formats.read_wavelength_log(log, fiber)
        if ref_path.is_file():
            reference = set_reference(formats.read_wavelength_log(ref_path, fiber), fiber)
        else:
            # replayed exports without a reference: the fibre's nominal base wavelengths
            reference = np.repeat(np.array(fiber.base_wavelengths)[:, None], fiber.total_core_count, axis=1)
        return profile_from_sequence(
            frames, reference, fiber, subset, p.cores, outlier_k=p.outlier_k, mad_floor=p.mad_floor_per_mm
        )

    profiles = _map(one, list(logs), jobs)
    written = []
    rej = ["batch,source_frame_count,rejected_frame_indices"]
    for log, prof in zip(logs, profiles):
        path = out / "profiles" / Path(log).name
        formats.write_profile(path, prof)
        written.append(path)
        idx = " ".join(str(i) for i in prof.rejected_frame_indices)
        rej.append(f"{Path(log).stem},{prof.source_frame_count},{idx}")
    formats._write(out / "profiles" / "rejections.csv", rej)
    return written


def load_profiles(out: Path) -> list[CurvatureProfile]:
    paths = sorted((out / "profiles").glob("batch_*.csv"))
    if not paths:
        raise DataError(f"no curvature profiles under {out / 'profiles'}; run reconstruct first")
    return [formats.read_profile(p) for p in paths]


def pooled_profile(profiles: Sequence[CurvatureProfile]) -> CurvatureProfile:
    """Average of per-batch profiles over the same gratings."""
    ids = profiles[0].grating_indices
    if any(p.grating_indices != ids for p in profiles):
        raise DataError("batch profiles cover different gratings")
    kappa = np.array([p.kappa for p in profiles])
    phi = np.array([p.phi for p in profiles])
    samples = average_samples(kappa, phi, profiles[0].positions)
    return CurvatureProfile(
        samples=tuple(samples),
        grating_indices=ids,
        source_frame_count=sum(p.source_frame_count for p in profiles),
    )


def shape(cfg: ExperimentConfig, out: Path) -> Path:
    prof = pooled_profile(load_profiles(out))
    shp = integrate_shape(prof, cfg.shape.segment_length_mm, cfg.shape.planarity_tolerance_rad)
    path = out / "shape.csv"
    formats.write_shape(path, shp, {"source_profile_hash": profile_hash(prof)})
    return path


def plan(cfg: ExperimentConfig, out: Path) -> ScanTrajectory:
    shp, meta = formats.read_shape(out / "shape.csv")
    traj = shape_to_trajectory(shp, cfg.plan.attach_pose(), meta.get("source_profile_hash", ""), cfg.plan.frame)
    if cfg.plan.resample_spacing_mm:
        traj = resample(traj, cfg.plan.resample_spacing_mm)
    formats.write_trajectory(out / "trajectory.csv", traj)
    return traj


def follow(traj: ScanTrajectory, path: Path, rate_hz: float, sleep: Callable[[float], None] = time.sleep) -> int:
    """Append poses one at a time at ``rate_hz``, the file-based stand-in for live pose publishing."""
    lines = formats.trajectory_lines(traj)
    header, rows = lines[: -len(traj)], lines[-len(traj):]
    formats._write(path, header)
    period = 1.0 / rate_hz
    for row in rows:
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(row + "\n")
            fh.flush()
        sleep(period)
    return len(rows)


def true_surface(cfg: ExperimentConfig, traj: ScanTrajectory) -> Surface:
    attach = traj.attach_pose
    phantom = cfg.phantom.build()
    kw = {"frame": cfg.plan.frame, "plane_pose": attach}
    if phantom.kind == "kidney_surface":
        return kidney_polyline(KidneySurface(r_min=min(phantom.radii), r_max=max(phantom.radii)), **kw)
    r = phantom.radius(cfg.phantom.radius_index)
    if math.isinf(r):
        return LineSurface(**kw)
    return arc_through_origin(r, 1.0, **kw)


def flat_trajectory(traj: ScanTrajectory) -> ScanTrajectory:
    """Straight line of the same polyline length, as planned without shape sensing."""
    n = len(traj)
    length = traj.arc_length
    flat = integrate_arcs(np.zeros(n - 1), length / (n - 1))
    return shape_to_trajectory(flat, traj.attach_pose, traj.source_profile_hash, traj.frame)


def scan_sim(cfg: ExperimentConfig, out: Path):
    traj = formats.read_trajectory(out / "trajectory.csv")
    if cfg.scan.assume_flat:
        traj = flat_trajectory(traj)
    scenario = ScanScenario(
        phantom=cfg.phantom.build(),
        rail=cfg.rail.build(),
        trajectory=traj,
        detach_threshold=cfg.scan.detach_threshold_mm,
        probe_element_offset=cfg.scan.probe_element_offset_mm,
        element_side=float(cfg.scan.element_side),
    )
    report = execute_scan(scenario, true_surface(cfg, traj))
    formats.write_scan_report(out / ("scan_flat" if cfg.scan.assume_flat else "scan"), report)
    return report


def fit_modulus(curve_path: str | None, material: str | None, window=(0.075, 0.15), degree: int = 1):
    if curve_path:
        curve = formats.read_curve(curve_path)
    elif material:
        curve = synthetic_curve(find_material(material).youngs_modulus)
    else:
        from importlib import resources

        ref = resources.files("fbgrail.data").joinpath("dragonskin_30_synthetic.csv")
        with resources.as_file(ref) as p:
            curve = formats.read_curve(p)
    try:
        return estimate_youngs_modulus(curve, window, degree)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"modulus fit failed: {exc}") from exc


def report(runs: Sequence[Path], out: Path, grating_range: tuple[int, int] | None = None) -> list[Path]:
    tables: dict[str, list] = {"all_gratings": []}
    if grating_range is not None:
        tables[f"gratings_{grating_range[0]}_{grating_range[1]}"] = []
    by_radius: dict[float, list[CurvatureProfile]] = {}
    flags: set[str] = set()
    snapshots = []
    seeds = []
    for run in runs:
        cfg = run_config(Path(run))
        snapshots.append(cfg.model_dump(mode="json"))
        seeds.append(cfg.seed)
        flags.update(synthetic_flags(cfg))
        kappa_geo = geometric_curvature(cfg)
        if kappa_geo is None:
            continue
        profs = load_profiles(Path(run))
        tables["all_gratings"].append(curvature_errors(profs, kappa_geo))
        if grating_range is not None:
            tables[f"gratings_{grating_range[0]}_{grating_range[1]}"].append(
                curvature_errors(profs, kappa_geo, grating_range)
            )
        by_radius.setdefault(1.0 / kappa_geo, []).extend(profs)
    for rows in tables.values():
        rows.sort(key=lambda r: r.radius)
    profiles = {"accuracy": accuracy_profile(by_radius)} if by_radius else {}
    seed = seeds[0] if len(set(seeds)) == 1 else None
    files = render_report(tables, profiles, snapshots, seed, sorted(flags))
    return write_bundle(files, out)
