import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diapol import units
from diapol.curves import (
    CurveFormatError,
    CurveValidationError,
    DipoleFunction,
    PotentialCurve,
    SpinOrbitCoupling,
    evaluate,
    evaluate_dipole,
    harmonic,
    load_curve,
    load_dipole,
    load_spin_orbit,
    model_curve,
    morse,
    write_curve,
    write_dipole,
    write_spin_orbit,
)


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_morse_model_file(tmp_path):
    R = np.linspace(4.0, 20.0, 81)
    path = _write(tmp_path / "m.pec", ["# units: bohr hartree", "# model morse De=0.02 a=0.7 Re=7.0"]
                  + [f"{r:.17g} 0" for r in R])
    c = load_curve(path)
    assert np.allclose(c.V, morse(R, 0.02, 0.7, 7.0), atol=0, rtol=0)
    assert c.asymptote == 0.02
    assert c.minimum[0] == pytest.approx(7.0, abs=1e-2)


def test_c6_tail_from_file(tmp_path):
    R = np.linspace(5.0, 30.0, 51)
    V = -1.0e4 / R**6
    path = _write(tmp_path / "t.pec", ["# units: bohr hartree", "# asymptote 0.0", "# C6 1.0e4"]
                  + [f"{r:.17g} {v:.17g}" for r, v in zip(R, V)])
    c = load_curve(path)
    assert abs(c(100.0) - (0.0 - 1e4 / 100.0**6)) < 1e-12
    assert c(60.0) == 0.0 - 1e4 / 60.0**6


def test_decreasing_R_names_line(tmp_path):
    path = _write(tmp_path / "bad.pec", ["# units: bohr cm-1", "3.0 10", "3.1 8", "3.05 7", "3.2 6"])
    with pytest.raises(CurveFormatError) as info:
        load_curve(path)
    assert info.value.line == 4
    assert "bad.pec" in str(info.value) and "4" in str(info.value)


def test_malformed_rows(tmp_path):
    with pytest.raises(CurveFormatError):
        load_curve(_write(tmp_path / "a.pec", ["3.0 1", "3.1 x"]))
    with pytest.raises(CurveFormatError):
        load_curve(_write(tmp_path / "b.pec", ["3.0 1", "3.1 1 2"]))
    with pytest.raises(CurveFormatError):
        load_curve(_write(tmp_path / "c.pec", ["# units: parsec cm-1"] + [f"{i} 1" for i in range(10)]))
    with pytest.raises(FileNotFoundError):
        load_curve(tmp_path / "missing.pec")


def test_validation():
    R = np.linspace(1, 10, 10)
    with pytest.raises(CurveValidationError):
        PotentialCurve("X", R[:5], R[:5])
    with pytest.raises(CurveValidationError):
        PotentialCurve("X", R, R, symmetry="Delta")
    with pytest.raises(CurveValidationError):
        PotentialCurve("X", R, R, long_range=((6, 1.0),))


def test_node_identity_and_units(tmp_path):
    R = np.linspace(3.0, 15.0, 25)
    V_cm = 1000.0 * (R - 7.0) ** 2
    path = _write(tmp_path / "x.pec", ["# units: angstrom cm-1"] + [f"{r:.17g} {v:.17g}" for r, v in zip(R, V_cm)])
    c = load_curve(path)
    R_bohr = R / (10 * units.NM_PER_BOHR)
    assert np.allclose(c.R, R_bohr, rtol=1e-15)
    assert np.allclose(c(c.R), units.cm1_to_hartree(V_cm), rtol=1e-14, atol=0)


def test_harmonic_midpoints():
    mu, w, Re = 1.0, 1.0, 5.0
    R = np.arange(2.0, 8.0 + 1e-9, 0.01)
    c = PotentialCurve("X", R, harmonic(R, mu * w**2, Re))
    mid = 0.5 * (R[1:] + R[:-1])
    assert np.max(np.abs(c(mid) - 0.5 * mu * w**2 * (mid - Re) ** 2)) < 1e-9


def test_tail_beyond_table_and_stitch():
    R = np.linspace(4.0, 25.0, 200)
    C6, asym = 5.0e3, 0.01
    V = asym - C6 / R**6 + 1e-3 * np.exp(-(R - 4.0))
    c = PotentialCurve("X", R, V, long_range=((6, C6),), asymptote=asym, stitch_R=20.0)
    assert evaluate(c, 2 * c.R_max) == asym - C6 / (2 * c.R_max) ** 6
    eps = 1e-7
    s = c.stitch_R
    assert abs(c(s + eps) - c(s - eps)) < 1e-8
    assert abs(c.derivative(s + eps) - c.derivative(s - eps)) < 1e-8
    assert abs(c.stitch_mismatch) < 1e-7


def test_inner_wall_is_repulsive():
    R = np.linspace(4.0, 20.0, 100)
    c = model_curve("morse", R, De=0.02, a=0.9, Re=6.0)
    inner = c(np.array([2.0, 3.0, 3.9]))
    assert np.all(np.diff(inner) < 0) and inner[-1] > c(4.0)


def test_dipole_rules():
    R = np.linspace(3.0, 12.0, 46)
    d = DipoleFunction("X", "A", 0, R, 1.5 - 0.2 * R)
    assert np.allclose(evaluate_dipole(d, R), 1.5 - 0.2 * R, atol=1e-14)
    assert d(20.0) == pytest.approx(1.5 - 0.2 * 12.0, abs=1e-14)
    assert d(1.0) == pytest.approx(1.5 - 0.2 * 3.0, abs=1e-14)
    mid = 0.5 * (R[1:] + R[:-1])
    assert np.max(np.abs(d(mid) - (1.5 - 0.2 * mid))) < 1e-12
    assert not d.permanent
    assert DipoleFunction("X", "X", 0, R, R).permanent


@settings(max_examples=20, deadline=None)
@given(De=st.floats(0.005, 0.05), a=st.floats(0.3, 1.5), Re=st.floats(4.0, 9.0))
def test_curve_file_round_trip(tmp_path_factory, De, a, Re):
    tmp = tmp_path_factory.mktemp("rt")
    R = np.linspace(2.5, 30.0, 120)
    c = model_curve("morse", R, label="A", asymptote=0.05, De=De, a=a, Re=Re)
    c = PotentialCurve("A", c.R, c.V, symmetry="Pi", asymptote=0.05, long_range=((6, 2e3),),
                       stitch_R=25.0)
    write_curve(tmp / "a.pec", c)
    back = load_curve(tmp / "a.pec")
    assert back.symmetry == "Pi" and back.long_range == ((6, 2e3),)
    assert back.stitch_R == 25.0
    x = np.linspace(2.0, 40.0, 333)
    assert np.allclose(back(x), c(x), rtol=1e-13, atol=1e-15)


def test_dipole_and_soc_round_trip(tmp_path):
    R = np.linspace(3.0, 12.0, 20)
    d = DipoleFunction("X", "B", 1, R, np.cos(R))
    write_dipole(tmp_path / "d.dip", d)
    back = load_dipole(tmp_path / "d.dip")
    assert (back.from_state, back.to_state, back.q) == ("X", "B", 1)
    assert np.array_equal(back.d, d.d)
    s = SpinOrbitCoupling("A", "b", R, 1e-4 * np.ones_like(R))
    write_spin_orbit(tmp_path / "s.so", s)
    back = load_spin_orbit(tmp_path / "s.so")
    assert (back.state_a, back.state_b) == ("A", "b") and np.array_equal(back.W, s.W)
    with pytest.raises(CurveFormatError):
        load_dipole(_write(tmp_path / "nofrom.dip", [f"{r} 1" for r in R]))
