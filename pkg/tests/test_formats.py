import random

import numpy as np
import pytest

from fbgrail import formats
from fbgrail.errors import DataError
from fbgrail.fiber import FiberSpec, NoiseModel
from fbgrail.kinematics import Pose, integrate_arcs, shape_to_trajectory
from fbgrail.phantoms import synthetic_curve
from fbgrail.reconstruction import profile_from_sequence

from conftest import groove_frames, straight_reference


@pytest.fixture
def frames(fiber):
    return groove_frames(fiber, 70.0, NoiseModel(0.04, 0.01, 0.04, seed=5), n_frames=4)


def test_wavelength_log_round_trip_is_exact(tmp_path, fiber, frames):
    path = tmp_path / "log.csv"
    formats.write_wavelength_log(path, frames)
    back = formats.read_wavelength_log(path, fiber)
    assert len(back) == 4
    for a, b in zip(frames, back):
        assert a.timestamp == b.timestamp
        assert np.array_equal(a.wavelengths, b.wavelengths)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"timestamp_s,grating_index,core_index,wavelength_nm"
    assert len(raw.splitlines()) == 1 + 4 * 25 * 8


def test_shuffled_export_parses(tmp_path, fiber, frames):
    # a replayed export need not be ordered
    lines = formats.wavelength_log_lines(frames)
    body = lines[1:]
    random.Random(0).shuffle(body)
    path = tmp_path / "export.csv"
    path.write_text("\n".join([lines[0], *body]) + "\n")
    back = formats.read_wavelength_log(path, fiber)
    assert all(np.array_equal(a.wavelengths, b.wavelengths) for a, b in zip(frames, back))


def test_log_errors(tmp_path, fiber, frames):
    with pytest.raises(DataError):
        formats.read_wavelength_log(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("time,g,c,w\n0,0,0,1550\n")
    with pytest.raises(DataError):
        formats.read_wavelength_log(bad)
    lines = formats.wavelength_log_lines(frames)
    short = tmp_path / "short.csv"
    short.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DataError):
        formats.read_wavelength_log(short, fiber)
    with pytest.raises(DataError):
        formats.read_wavelength_log(_write_other(tmp_path), fiber)


def _write_other(tmp_path):
    other = FiberSpec(outer_core_count=6)
    path = tmp_path / "other.csv"
    formats.write_wavelength_log(path, groove_frames(other, 70.0, n_frames=1))
    return path


def test_profile_round_trip(tmp_path, fiber, frames):
    prof = profile_from_sequence(frames, straight_reference(fiber), fiber, range(3, 11))
    path = tmp_path / "p.csv"
    formats.write_profile(path, prof)
    back = formats.read_profile(path)
    assert back == prof


def test_shape_and_trajectory_round_trip(tmp_path):
    shape = integrate_arcs([1 / 90] * 8, 10.0)
    formats.write_shape(tmp_path / "s.csv", shape, {"source_profile_hash": "abc"})
    back, meta = formats.read_shape(tmp_path / "s.csv")
    assert np.array_equal(back.points, shape.points) and back.arc_length == 80.0
    assert meta["source_profile_hash"] == "abc"

    attach = Pose([1.0, 2.0, 3.0], [0.0, 0.0, np.sin(0.2), np.cos(0.2)])
    traj = shape_to_trajectory(shape, attach, "abc", "base")
    formats.write_trajectory(tmp_path / "t.csv", traj)
    t2 = formats.read_trajectory(tmp_path / "t.csv")
    assert np.array_equal(t2.positions, traj.positions)
    assert np.array_equal(t2.orientations, traj.orientations)
    assert t2.spacing == traj.spacing and t2.source_profile_hash == "abc"
    assert np.array_equal(t2.attach_pose.position, attach.position)


def test_curve_round_trip(tmp_path):
    curve = synthetic_curve(7.66)
    formats.write_curve(tmp_path / "c.csv", curve)
    back = formats.read_curve(tmp_path / "c.csv")
    assert np.array_equal(back.strain, curve.strain) and np.array_equal(back.stress, curve.stress)


def test_non_numeric_field(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("strain,stress_mpa\n0,0\n0.1,abc\n")
    with pytest.raises(DataError):
        formats.read_curve(path)
