import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from diapol import cli, units
from diapol.analysis import (
    AnalysisError,
    classify_regions,
    find_magic,
    find_tuneout,
    ratio_at,
    resonance_windows,
)
from diapol.models import EffectiveModel, effective_alpha, effective_model, effective_spectrum, tuneout_closed_form
from diapol.response import TransitionTable, core_model, empty_table, scan, simple_table

cm = units.cm1_to_hartree


def const(value):
    return lambda w: np.full(np.shape(w), float(value))


@pytest.fixture(scope="module")
def rbcs():
    return effective_model("RbCs")


@pytest.fixture(scope="module")
def pair(data_dir):
    job = cli.job_from_raw(cli.read_config(data_dir / "pair" / "magic.cfg"))
    return job, cli.atom_pair_alpha(job)


# ---------------------------------------------------------------------------
# magic frequencies


def test_magic_offset_has_no_roots(rbcs):
    f = effective_spectrum(rbcs)
    report = find_magic(lambda w: f(w) + 1.0, f, (0.0, 20000.0), step_cm=0.5)
    assert report.roots == []
    assert report.diagnostic is None


def test_magic_against_constant(rbcs):
    report = find_magic(effective_spectrum(rbcs), const(600.0), (0.0, 20000.0))
    assert report.roots
    for root in report.roots:
        a = effective_alpha(rbcs, cm(root.omega_cm))
        assert abs(a - 600.0) <= 1e-9 * 600.0
        assert root.alpha_au == 600.0
        assert root.alpha_mhz == pytest.approx(units.au_to_mhz(600.0), rel=1e-15)
    # the poles change sign too but are rejected, not reported
    poles = [units.hartree_to_cm1(x) for x in (rbcs.omega_sigma, rbcs.omega_pi)]
    rejected = [r.omega_cm for r in report.excluded if r.reason == "pole or resonance"]
    for p in poles:
        assert any(abs(r - p) < 0.05 for r in rejected)


def test_magic_sensitivity_definition(rbcs):
    report = find_magic(effective_spectrum(rbcs), const(600.0), (10000.0, 13000.0))
    root = report.roots[0]
    g5 = effective_alpha(rbcs, cm(root.omega_cm + 5.0))
    assert root.sensitivity_pct == pytest.approx(100 * (g5 - 600.0) / 600.0, rel=1e-6)


def test_magic_identical_inputs_diagnostic(rbcs):
    f = effective_spectrum(rbcs)
    report = find_magic(f, f, (0.0, 1000.0))
    assert report.roots == []
    assert "identical" in report.diagnostic


def test_magic_excluded_windows_segregate(rbcs):
    report = find_magic(effective_spectrum(rbcs), const(3000.0), (0.0, 20000.0),
                        excluded=rbcs.excluded_windows, step_cm=0.1)
    inside = [r for r in report.excluded if r.reason == "inside excluded window"]
    assert inside
    for root in report.roots:
        assert not any(lo <= root.omega_cm <= hi for lo, hi in rbcs.excluded_windows)


def test_magic_bundled_pair(rbcs, pair):
    job, fesh = pair
    report = find_magic(effective_spectrum(rbcs), fesh, (5000.0, 13000.0))
    smooth = [r for r in report.roots if abs(r.omega_cm - 9390.0) < 1.0]
    assert len(smooth) == 1
    root = smooth[0]
    assert root.omega_cm == pytest.approx(9390.0, abs=1e-6)
    assert abs(root.sensitivity_pct) < 0.5
    for r in report.roots:
        w = cm(r.omega_cm)
        g, f = effective_alpha(rbcs, w), float(np.real(fesh(np.array([w])))[0])
        assert abs(g - f) <= 1e-9 * abs(f)


def test_magic_root_count_refinement(rbcs, pair):
    _, fesh = pair
    coarse = find_magic(effective_spectrum(rbcs), fesh, (5000.0, 13000.0), step_cm=0.02)
    fine = find_magic(effective_spectrum(rbcs), fesh, (5000.0, 13000.0), step_cm=0.005)
    assert len(coarse.roots) == len(fine.roots)
    for a, b in zip(coarse.roots, fine.roots):
        assert a.omega_cm == pytest.approx(b.omega_cm, abs=1e-6)


def test_magic_report_outputs(rbcs, pair):
    _, fesh = pair
    report = find_magic(effective_spectrum(rbcs), fesh, (9000.0, 9800.0))
    assert set(report.ratios) == {"1064", "1550"}
    assert set(report.alpha_at) == {"1064", "1550"}
    doc = json.loads(report.to_json())
    assert doc["roots"][0]["omega_cm"] == pytest.approx(9390.0, abs=1e-6)
    assert doc["units"]["omega"] == "cm-1"
    lines = report.table().splitlines()
    assert lines[0].split()[0] == "omega0" and len(lines) == 1 + len(report.roots)


def test_magic_rejects_bad_range(rbcs):
    with pytest.raises(AnalysisError):
        find_magic(effective_spectrum(rbcs), const(1.0), (100.0, 100.0))
    with pytest.raises(AnalysisError):
        find_magic(effective_spectrum(rbcs), const(1.0), (0.0, 100.0), step_cm=0.0)


# ---------------------------------------------------------------------------
# tune-out


def test_tuneout_two_pole_closed_form():
    m = effective_model("RbCs", with_core=False)
    roots = find_tuneout(effective_spectrum(m), (0.0, 20000.0))
    assert len(roots) == 1
    exact = units.hartree_to_cm1(tuneout_closed_form(m))
    assert exact == pytest.approx(11958.03, abs=0.01)
    assert abs(roots[0] - exact) < 1e-6


def test_tuneout_with_core(rbcs):
    roots = find_tuneout(effective_spectrum(rbcs), (0.0, 20000.0))
    between = [r for r in roots if cm(r) > rbcs.omega_sigma and cm(r) < rbcs.omega_pi]
    assert len(between) == 1
    assert abs(between[0] - 11956.0) <= 15.0
    assert abs(effective_alpha(rbcs, cm(between[0]))) < 1e-9 * effective_alpha(rbcs, 0.0)


def test_tuneout_single_pole():
    m = EffectiveModel(cm(11000.0), 2.5, cm(30000.0), 0.0)
    assert find_tuneout(effective_spectrum(m), (0.0, 10999.0)) == []


# ---------------------------------------------------------------------------
# ratios


def test_ratio_identity(rbcs):
    f = effective_spectrum(rbcs)
    assert ratio_at(f, f, 1550.0) == 1.0


def test_ratio_construction(rbcs, pair):
    _, fesh = pair

    def model(s):
        return EffectiveModel(rbcs.omega_sigma, s * rbcs.d_sigma, rbcs.omega_pi,
                              s * rbcs.d_pi, rbcs.core)

    target = 0.68
    s = brentq(lambda s: ratio_at(effective_spectrum(model(s)), fesh, 1550.0) - target,
               0.1, 1.5, xtol=1e-15, rtol=1e-15)
    assert ratio_at(effective_spectrum(model(s)), fesh, 1550.0) == pytest.approx(target, abs=1e-9)
    # the 1064 nm column comes along in the report
    report = find_magic(effective_spectrum(model(s)), fesh, (9000.0, 9100.0), step_cm=1.0)
    assert report.ratios["1550"] == pytest.approx(target, abs=1e-9)
    assert report.ratios["1064"] == pytest.approx(
        effective_alpha(model(s), units.wavelength_nm_to_hartree(1064.0))
        / float(np.real(fesh(np.array([units.wavelength_nm_to_hartree(1064.0)])))[0]),
        rel=1e-12,
    )


def test_ratio_division_guard(rbcs):
    with pytest.raises(AnalysisError):
        ratio_at(effective_spectrum(rbcs), const(0.0), 1064.0)


# ---------------------------------------------------------------------------
# regions


def test_regions_core_only():
    spec = scan(empty_table(), core_model("K", "Rb"), cm(np.arange(0.0, 20000.0, 10.0)))
    assert classify_regions(spec) == [((0.0, 19990.0), "I")]


@pytest.fixture(scope="module")
def lorentzian():
    w0, width = 10000.0, 5.0
    table = simple_table([(cm(w0), 2.0, cm(width), "parallel")])
    return w0, width, scan(table, core_model(), cm(np.arange(0.0, 20000.0, 1.0)))


def test_regions_lorentzian(lorentzian):
    w0, width, spec = lorentzian
    # the tails must drop below threshold x median within 5 linewidths
    regions = classify_regions(spec, threshold=1e5)
    assert [label for _, label in regions] == ["I", "II", "III"]
    (lo, hi), _ = regions[1]
    assert lo <= w0 <= hi
    assert w0 - 5 * width <= lo and hi <= w0 + 5 * width
    assert regions[0][0][0] == 0.0 and regions[2][0][1] == 19999.0


def test_regions_infinite_threshold(lorentzian):
    _, _, spec = lorentzian
    labels = [label for _, label in classify_regions(spec, threshold=math.inf)]
    assert labels == ["I", "III"]


# ---------------------------------------------------------------------------
# resonance windows


def test_resonance_windows():
    rows = [("A", 9000.0, 1e-6, True), ("A", 10000.0, 1.0, True), ("A", 10500.0, 0.5, True),
            ("B", 14000.0, 1.0, False), ("C", 10400.0, 0.2, True)]
    state, w, d2, par = zip(*rows)
    n = len(rows)
    table = TransitionTable(
        np.array(state, dtype=object), np.arange(n), cm(np.array(w)), np.array(d2),
        np.full(n, 1e-9), np.array(par), np.array(["electronic"] * n, dtype=object),
    )
    # the weak A line is dropped, C overlaps A and merges, B opens the top window
    assert resonance_windows(table, rel=1e-3, pad_cm=50.0) == [
        pytest.approx((9950.0, 10550.0)), pytest.approx((13950.0, math.inf))
    ]
    closed = resonance_windows(table, rel=1e-3, pad_cm=50.0, open_above_pi=False)
    assert closed[-1] == pytest.approx((13950.0, 14050.0))
    assert len(resonance_windows(table, rel=1e-7, pad_cm=50.0)) == 2
    assert resonance_windows(table, rel=1e-7, pad_cm=50.0)[0][0] == pytest.approx(8950.0)
