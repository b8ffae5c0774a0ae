import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbgrail.analysis import (
    accuracy_profile,
    curvature_errors,
    fit_circle,
    render_report,
    write_bundle,
)
from fbgrail.errors import DataError, DomainError
from fbgrail.fiber import CurvatureSample
from fbgrail.reconstruction import CurvatureProfile


def prof(kappas, start=0):
    samples = [CurvatureSample(s=10.0 * i, kappa=k) for i, k in enumerate(kappas)]
    return CurvatureProfile(samples, range(start, start + len(kappas)), 30)


K = 1 / 110


def test_max_and_mean_of_two_errors():
    row = curvature_errors(prof([K + 0.001, K - 0.003]), K)
    assert row.max_abs == pytest.approx(0.003, rel=1e-12)
    assert row.mean_abs == pytest.approx(0.002, rel=1e-12)


def test_percentage_error():
    row = curvature_errors(prof([1.029 * K] * 8), K)
    assert row.mean_pct == pytest.approx(2.9, rel=1e-9)
    assert row.max_pct == pytest.approx(2.9, rel=1e-9)


def test_grating_range_selects_inclusive():
    p = prof([K, K, 2 * K, 2 * K, K], start=10)
    row = curvature_errors(p, K, (12, 13))
    assert row.gratings == 2 and row.mean_abs == pytest.approx(K)
    with pytest.raises(DataError):
        curvature_errors(p, K, (0, 5))


def test_needs_positive_geometric_curvature():
    with pytest.raises(DomainError):
        curvature_errors(prof([K]), 0.0)


def test_std_uses_sample_normalisation():
    row = curvature_errors([prof([K + 0.001]), prof([K + 0.003])], K)
    assert row.repetitions == 2
    assert row.max_abs_std == pytest.approx(np.std([0.001, 0.003], ddof=1), rel=1e-9)
    assert curvature_errors(prof([K + 0.001]), K).max_abs_std == 0.0


kappa_lists = st.lists(st.floats(min_value=1e-4, max_value=0.05), min_size=2, max_size=12)


@settings(max_examples=80, deadline=None)
@given(reps=st.lists(kappa_lists.filter(lambda x: len(x) == 6), min_size=1, max_size=5), data=st.data())
def test_permutation_invariance(reps, data):
    base = curvature_errors([prof(r) for r in reps], K)
    shuffled = [data.draw(st.permutations(r)) for r in data.draw(st.permutations(reps))]
    other = curvature_errors([prof(r) for r in shuffled], K)
    assert other == base


@settings(max_examples=80, deadline=None)
@given(kappas=kappa_lists, radius=st.floats(min_value=20.0, max_value=200.0))
def test_pct_matches_absolute(kappas, radius):
    row = curvature_errors(prof(kappas), 1 / radius)
    assert abs(row.max_pct - row.max_abs * radius * 100) <= 1e-12 * max(1.0, row.max_pct)
    assert abs(row.mean_pct - row.mean_abs * radius * 100) <= 1e-12 * max(1.0, row.mean_pct)


def test_accuracy_profile_ratio():
    runs = {110.0: [prof([1.02 * K] * 4), prof([1.04 * K] * 4)], 30.0: [prof([1.03 / 30] * 4)]}
    acc = accuracy_profile(runs)
    assert acc.overall_mean == pytest.approx(1.03, rel=1e-12)
    assert acc.mean_relative_error_pct == pytest.approx(3.0, rel=1e-9)
    assert acc.radii == (30.0, 110.0)
    assert np.allclose(acc.mean_ratio, 1.03)


def test_fit_circle_exact_and_noisy():
    t = np.linspace(0.0, 1.2, 9)
    pts = np.column_stack([3.0 + 110 * np.cos(t), -4.0 + 110 * np.sin(t)])
    c, r, res = fit_circle(pts)
    assert r == pytest.approx(110.0, abs=1e-9) and c == pytest.approx([3.0, -4.0], abs=1e-8)
    assert res <= 1e-9
    with pytest.raises(DataError):
        fit_circle(pts[:2])


def sample_report(config=None):
    rows = [curvature_errors([prof([1.02 * K] * 8)], K)]
    acc = accuracy_profile({110.0: [prof([1.02 * K] * 8)]})
    return render_report({"all": rows}, {"acc": acc}, config or {"seed": 1}, 1, ["SYNTHETIC: x"])


def test_report_is_deterministic(tmp_path):
    a, b = sample_report(), sample_report()
    assert a == b
    write_bundle(a, tmp_path / "a")
    write_bundle(b, tmp_path / "b")
    for rel in a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert set(a) == {"report.md", "provenance.txt", "tables/all.csv", "tables/accuracy_acc.csv"}


def test_empty_report_has_no_data_sections():
    files = render_report({}, {})
    assert files["report.md"].count("No data.") == 2
    assert "seed: none" in files["provenance.txt"]


def test_config_change_changes_hash():
    a = sample_report({"seed": 1})["provenance.txt"]
    b = sample_report({"seed": 2})["provenance.txt"]
    line = lambda text: [ln for ln in text.splitlines() if ln.startswith("config_sha256")][0]  # noqa: E731
    assert line(a) != line(b)
    assert "SYNTHETIC: x" in a
