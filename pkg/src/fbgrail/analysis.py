"""Curvature-error metrology, circle fitting and deterministic report bundles."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .errors import DataError, DomainError
from .reconstruction import CurvatureProfile

REPORT_FORMAT_VERSION = 1


def _fmean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _fstd(values) -> float:
    # sample (n-1) standard deviation; a single repetition has no spread
    values = list(values)
    if len(values) < 2:
        return 0.0
    m = _fmean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


@dataclass(frozen=True)
class ErrorRow:
    """One row of the sensed-curvature error table (curvatures in 1/mm).

    ``*_std`` spreads are across repetitions; ``mean_abs_std_gratings`` is
    the spread across gratings, averaged over repetitions.
    """

    radius: float
    kappa_geo: float
    repetitions: int
    gratings: int
    max_abs: float
    max_abs_std: float
    max_pct: float
    mean_abs: float
    mean_abs_std: float
    mean_pct: float
    mean_abs_std_gratings: float


def _select(profile: CurvatureProfile, grating_range: tuple[int, int] | None) -> np.ndarray:
    if grating_range is None:
        return profile.kappa
    lo, hi = grating_range
    idx = [j for j, g in enumerate(profile.grating_indices) if lo <= g <= hi]
    if not idx:
        raise DataError(f"no gratings of the profile fall in range {lo}..{hi}")
    return profile.kappa[idx]


def curvature_errors(
    sensed: CurvatureProfile | Sequence[CurvatureProfile],
    kappa_geo: float,
    grating_range: tuple[int, int] | None = None,
) -> ErrorRow:
    """Max and mean absolute error to the geometric curvature, over repetitions."""
    if not kappa_geo > 0.0:
        raise DomainError("geometric curvature must be positive to express percentage errors")
    reps = [sensed] if isinstance(sensed, CurvatureProfile) else list(sensed)
    if not reps:
        raise DataError("no sensed profiles given")
    maxes, means, spreads, n_gratings = [], [], [], None
    for prof in reps:
        err = np.abs(_select(prof, grating_range) - kappa_geo)
        maxes.append(float(err.max()))
        means.append(_fmean(err.tolist()))
        spreads.append(_fstd(err.tolist()))
        n_gratings = len(err)
    max_abs, mean_abs = _fmean(maxes), _fmean(means)
    return ErrorRow(
        radius=1.0 / kappa_geo,
        kappa_geo=kappa_geo,
        repetitions=len(reps),
        gratings=n_gratings,
        max_abs=max_abs,
        max_abs_std=_fstd(maxes),
        max_pct=max_abs / kappa_geo * 100.0,
        mean_abs=mean_abs,
        mean_abs_std=_fstd(means),
        mean_pct=mean_abs / kappa_geo * 100.0,
        mean_abs_std_gratings=_fmean(spreads),
    )


@dataclass(frozen=True)
class AccuracyProfile:
    """Sensed/geometric curvature ratio per grating, pooled over radii."""

    grating_indices: tuple[int, ...]
    mean_ratio: tuple[float, ...]
    std_ratio: tuple[float, ...]
    overall_mean: float
    overall_std: float
    mean_relative_error_pct: float
    radii: tuple[float, ...] = ()


def accuracy_profile(runs: Mapping[float, Sequence[CurvatureProfile]]) -> AccuracyProfile:
    """``runs`` maps radius (mm) to the repetitions sensed at that radius."""
    if not runs:
        raise DataError("accuracy profile needs at least one radius")
    radii = sorted(runs)
    grating_ids = None
    per_radius = []  # (radius, gratings) ratio matrix, repetitions averaged
    rel_errors = []
    for r in radii:
        reps = list(runs[r])
        if not reps:
            raise DataError(f"no repetitions for radius {r}")
        ids = reps[0].grating_indices
        if grating_ids is None:
            grating_ids = ids
        if any(p.grating_indices != grating_ids for p in reps):
            raise DataError("all profiles must cover the same gratings")
        ratios = np.array([p.kappa * r for p in reps])
        rel_errors.extend(np.abs(ratios - 1.0).ravel().tolist())
        per_radius.append([_fmean(col) for col in ratios.T.tolist()])
    mat = np.array(per_radius)
    return AccuracyProfile(
        grating_indices=tuple(grating_ids),
        mean_ratio=tuple(_fmean(col) for col in mat.T.tolist()),
        std_ratio=tuple(_fstd(col) for col in mat.T.tolist()),
        overall_mean=_fmean(mat.ravel().tolist()),
        overall_std=_fstd(mat.ravel().tolist()),
        mean_relative_error_pct=100.0 * _fmean(rel_errors),
        radii=tuple(float(r) for r in radii),
    )


def fit_circle(points) -> tuple[np.ndarray, float, float]:
    """Least-squares circle through 2-D points: (centre, radius, max |residual|).

    Algebraic (Kasa) fit as the starting point, refined on geometric
    distances.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise DataError("circle fit needs at least three 2-D points")
    shift = p.mean(axis=0)
    q = p - shift
    a = np.column_stack([2 * q, np.ones(len(q))])
    b = np.sum(q * q, axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    c0 = sol[:2]
    r0 = math.sqrt(max(sol[2] + c0 @ c0, 0.0))

    def resid(x):
        return np.hypot(q[:, 0] - x[0], q[:, 1] - x[1]) - x[2]

    res = optimize.least_squares(resid, np.array([c0[0], c0[1], r0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    cx, cy, r = res.x
    return np.array([cx, cy]) + shift, float(abs(r)), float(np.max(np.abs(resid(res.x))))


def config_hash(config_snapshot) -> str:
    text = config_snapshot if isinstance(config_snapshot, str) else json.dumps(config_snapshot, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _num(x: float) -> str:
    return repr(float(x))


def error_table_csv(rows: Sequence[ErrorRow]) -> str:
    head = ",".join(ErrorRow.__dataclass_fields__)
    lines = [head]
    for r in rows:
        vals = [getattr(r, k) for k in ErrorRow.__dataclass_fields__]
        lines.append(",".join(str(v) if isinstance(v, int) else _num(v) for v in vals))
    return "\n".join(lines) + "\n"


def accuracy_csv(profile: AccuracyProfile) -> str:
    lines = ["grating_index,mean_ratio,std_ratio"]
    for g, m, s in zip(profile.grating_indices, profile.mean_ratio, profile.std_ratio):
        lines.append(f"{g},{_num(m)},{_num(s)}")
    return "\n".join(lines) + "\n"


def render_report(
    tables: Mapping[str, Sequence[ErrorRow]] | None,
    profiles: Mapping[str, AccuracyProfile] | None,
    config_snapshot=None,
    seed: int | None = None,
    synthetic_flags: Sequence[str] = (),
) -> dict[str, str]:
    """Markdown report plus CSV tables, keyed by relative path. Output is a pure function of the inputs."""
    tables = dict(tables or {})
    profiles = dict(profiles or {})
    files: dict[str, str] = {}
    md = ["# Curvature sensing report", ""]

    md += ["## Error tables", ""]
    if not any(tables.values()):
        md += ["No data.", ""]
    for name in sorted(tables):
        rows = tables[name]
        if not rows:
            continue
        files[f"tables/{name}.csv"] = error_table_csv(rows)
        md += [
            f"### {name}",
            "",
            "| R (mm) | Max err (x1e-2 1/mm) | Max (%) | Mean err (x1e-2 1/mm) | Mean (%) | reps |",
            "|---|---|---|---|---|---|",
        ]
        for r in rows:
            md.append(
                f"| {r.radius:g} | {100 * r.max_abs:.3f} ± {100 * r.max_abs_std:.3f} | {r.max_pct:.2f} "
                f"| {100 * r.mean_abs:.3f} ± {100 * r.mean_abs_std:.3f} | {r.mean_pct:.2f} | {r.repetitions} |"
            )
        md.append("")

    md += ["## Accuracy profiles", ""]
    if not profiles:
        md += ["No data.", ""]
    for name in sorted(profiles):
        p = profiles[name]
        files[f"tables/accuracy_{name}.csv"] = accuracy_csv(p)
        md += [
            f"### {name}",
            "",
            f"Overall sensed/geometric ratio {p.overall_mean:.4f} ± {p.overall_std:.4f} "
            f"(mean relative error {p.mean_relative_error_pct:.2f}%) over radii "
            + ", ".join(f"{r:g}" for r in p.radii)
            + " mm.",
            "",
        ]

    snapshot_text = "" if config_snapshot is None else (
        config_snapshot if isinstance(config_snapshot, str) else json.dumps(config_snapshot, sort_keys=True, indent=2)
    )
    flags = sorted(set(synthetic_flags))
    prov = [
        f"report_format_version: {REPORT_FORMAT_VERSION}",
        f"seed: {seed if seed is not None else 'none'}",
        f"config_sha256: {config_hash(snapshot_text)}",
        "synthetic_flags:" + ("" if flags else " none"),
    ]
    prov += [f"  - {f}" for f in flags]
    files["provenance.txt"] = "\n".join(prov) + "\n"
    md += ["## Provenance", "", "```", *prov, "```", ""]
    files["report.md"] = "\n".join(md)
    return files


def write_bundle(files: Mapping[str, str], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    for rel in sorted(files):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(files[rel])
        written.append(path)
    return written
