import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diapol import units
from diapol.angular import rotational_weights
from diapol.curves import DipoleFunction, DomainError, PotentialCurve, harmonic
from diapol.response import (
    CoreModel,
    DataError,
    alpha_sum,
    atom_alpha,
    atomic_lines,
    build_transition_table,
    core_alpha,
    core_model,
    empty_table,
    feshbach_alpha,
    longrange_alpha,
    longrange_fixed,
    m_averaged,
    scan,
    simple_table,
)
from diapol.solver import GridConfig, GridError, build_grid, solve_single, uniform_grid


@pytest.fixture(scope="module")
def displaced_pair():
    """Unit oscillator and an excited copy displaced by delta, 10 hartree higher."""
    delta = 0.7
    R = np.linspace(0.5, 19.5, 1901)
    X = PotentialCurve("X", R, harmonic(R, 1.0, 10.0), asymptote=1e3)
    A = PotentialCurve("A", R, harmonic(R, 1.0, 10.0 + delta) + 10.0, asymptote=1e3)
    grid = build_grid([X, A], 1.0, E_max=[40.0, 45.0], config=GridConfig(mapping="uniform"))
    return delta, R, solve_single(X, grid, 1.0), solve_single(A, grid, 1.0)


def test_pdm_orthogonality(displaced_pair):
    _, R, X, _ = displaced_pair
    pdm = DipoleFunction("X", "X", 0, R, np.full_like(R, 0.8))
    t = build_transition_table(X, 0, ground_pdm=pdm)
    off = t.d2[t.v != 0]
    assert np.max(off) < 1e-16
    assert t.d2[t.v == 0][0] == pytest.approx(0.64, rel=1e-12)
    assert t.omega[t.v == 0][0] == pytest.approx(2 * X.B[0], rel=1e-14)
    assert np.all(t.parallel) and np.all(t.omega > 0)


def test_franck_condon_linear_dipole(displaced_pair):
    delta, R, X, A = displaced_pair
    d0, d1 = 1.0, 0.3
    dip = DipoleFunction("X", "A", 0, R, d0 + d1 * (R - 10.0))
    t = build_transition_table(X, 0, [(A, dip)], rotation=False)
    s2 = delta**2 / 2.0
    n = np.arange(12)
    fc = np.exp(-s2) * s2**n / np.array([math.factorial(k) for k in n])
    expected = fc * (d0 + d1 * (delta / 2.0 - n / delta)) ** 2
    assert np.max(np.abs(t.d2[:12] - expected)) < 1e-8
    assert np.allclose(t.omega[:12], 10.0 + n, rtol=1e-9)


def test_lifetime_width(displaced_pair):
    _, R, X, A = displaced_pair
    dip = DipoleFunction("X", "A", 0, R, np.ones_like(R))
    t = build_transition_table(X, 0, [(A, dip)], lifetime_ns=10.0)
    assert np.all(t.gamma == units.AU_TIME_S / 10e-9)
    t2 = build_transition_table(X, 0, [(A, dip)], lifetimes={"A": 0.5})
    assert np.all(t2.gamma == units.width_from_lifetime(0.5))


def test_table_errors(displaced_pair):
    _, R, X, A = displaced_pair
    below = PotentialCurve("L", R, harmonic(R, 1.0, 10.0) - 1.0, asymptote=1e3)
    low = solve_single(below, X.grid, 1.0)
    with pytest.raises(DataError):
        build_transition_table(X, 0, [(low, DipoleFunction("X", "L", 0, R, np.ones_like(R)))])
    pi = PotentialCurve("P", R, harmonic(R, 1.0, 10.0) + 5.0, symmetry="Pi", asymptote=1e3)
    p = solve_single(pi, X.grid, 1.0)
    with pytest.raises(DataError):
        build_transition_table(X, 0, [(p, DipoleFunction("X", "P", 0, R, np.ones_like(R)))])
    shifted = PotentialCurve("B", R, harmonic(R, 1.0, 10.0) + 3.0, asymptote=1e3)
    other = solve_single(shifted, uniform_grid(1.0, 19.0, 300), 1.0)
    with pytest.raises(GridError):
        build_transition_table(X, 0, [(other, DipoleFunction("X", "B", 0, R, np.ones_like(R)))])
    with pytest.raises(IndexError):
        build_transition_table(X, 10_000)


def test_harmonic_sum_rule(displaced_pair):
    _, R, X, _ = displaced_pair
    pdm = DipoleFunction("X", "X", 0, R, R - 10.0)
    t = build_transition_table(X, 0, ground_pdm=pdm, rotation=False)
    assert t.static()[0] == pytest.approx(1.0, rel=1e-6)


def test_two_level_examples():
    t = simple_table([(0.1, 1.0, 1e-9, "parallel")])
    par, perp = alpha_sum(t, 0.0)
    assert par.real == pytest.approx(20.0, rel=1e-6) and perp == 0
    assert par.imag == pytest.approx(1e-9 / (0.01 + 1e-18 / 4), rel=1e-12)
    par_m, _ = alpha_sum(t, 0.0, "opposite-sign")
    assert par_m.imag == 0.0
    par, _ = alpha_sum(t, 0.05)
    assert par.real == pytest.approx(1 / 0.05 + 1 / 0.15, rel=1e-9)


def test_core_statics():
    assert core_alpha(core_model("Cs"), 0.0).real == pytest.approx(15.34, rel=1e-3)
    assert core_alpha(core_model("K"), 0.0).real == pytest.approx(3.89, rel=1e-3)
    assert core_alpha(core_model("Rb"), 0.0).real == pytest.approx(8.91, rel=1e-3)
    assert core_alpha(core_model("Rb", "Cs"), 0.0).real == pytest.approx(24.25, rel=1e-3)
    assert core_alpha(core_model("Li", "Na"), 0.3) == 0
    assert core_alpha(core_model("Cs"), 0.01).imag == 0


def test_core_domain():
    core = core_model("K")
    w0 = core.transitions[0][0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(DomainError):
            core_alpha(core, w0)
    with pytest.warns(RuntimeWarning):
        core_alpha(core, 1.05 * w0)
    with pytest.raises(KeyError):
        core_model("Fr")


def _mixed_table():
    rows = [(0.05, 2.0, None, "parallel"), (0.07, 1.0, None, "perpendicular"),
            (0.09, 0.5, None, "parallel"), (0.002, 3.0, None, "parallel", "ground-rovib")]
    return simple_table(rows, lifetime_ns=0.01)


def test_scan_routing_and_identities():
    core = core_model("Rb")
    w = np.linspace(0.0, 0.12, 301)
    sp = scan(empty_table(), core, w)
    assert np.array_equal(sp.alpha_iso, core_alpha(core, w) / 3 + 2 * core_alpha(core, w) / 3)
    perp_only = simple_table([(0.07, 1.0, None, "perpendicular")])
    sp = scan(perp_only, core, w)
    assert np.array_equal(sp.alpha_par, core_alpha(core, w))
    sp = scan(_mixed_table(), core, w)
    assert np.allclose(sp.alpha_iso, sp.alpha_par / 3 + 2 * sp.alpha_perp / 3, rtol=1e-12)
    assert np.array_equal(sp.gamma_aniso, sp.alpha_par - sp.alpha_perp)
    assert np.allclose(sp.alpha_gr + sp.alpha_exc, sp.alpha_iso, rtol=1e-12, atol=1e-12)
    assert np.array_equal(sp.alpha_JM, sp.alpha_iso) or np.allclose(sp.alpha_JM, sp.alpha_iso, rtol=1e-15)
    with pytest.raises(ValueError):
        scan(empty_table(), core, w[::-1])


def test_symmetry_properties():
    t = _mixed_table()
    w = np.linspace(0.0, 0.12, 501)
    for conv, parity in (("constant-sign", 1.0), ("opposite-sign", -1.0)):
        p_pos, q_pos = alpha_sum(t, w, conv)
        p_neg, q_neg = alpha_sum(t, -w, conv)
        scale = np.max(np.abs(p_pos))
        assert np.max(np.abs(p_pos.real - p_neg.real)) <= 1e-12 * scale
        assert np.max(np.abs(p_pos.imag - parity * p_neg.imag)) <= 1e-12 * scale
        assert np.max(np.abs(q_pos.imag - parity * q_neg.imag)) <= 1e-12 * scale
    a, _ = alpha_sum(t, w, "constant-sign")
    b, _ = alpha_sum(t, w, "opposite-sign")
    assert np.all(np.abs(a.real - b.real) <= 1e-14 * np.abs(a.real))


@settings(max_examples=25, deadline=None)
@given(J=st.integers(0, 8))
def test_m_average(J):
    sp = scan(_mixed_table(), core_model("Cs"), np.linspace(0.0, 0.1, 41))
    assert np.allclose(m_averaged(sp, J), sp.alpha_iso, rtol=1e-12, atol=0)
    for M in range(-J, J + 1):
        w = rotational_weights(J, M)
        sp_jm = scan(_mixed_table(), core_model("Cs"), sp.frequencies, weights=w)
        assert np.allclose(sp_jm.alpha_JM, float(w.w_par) * sp.alpha_par + float(w.w_perp) * sp.alpha_perp)


def test_atoms():
    line = atomic_lines([("D", 10000.0, 3.0)])
    w0 = units.cm1_to_hartree(10000.0)
    assert atom_alpha(line, 0.0).real == pytest.approx(2 * 9.0 / w0, rel=1e-12)
    other = atomic_lines([("D", 12000.0, 2.0, 25.0)])
    w = np.linspace(0, 0.03, 7)
    assert np.allclose(feshbach_alpha(line, other, w), atom_alpha(line, w) + atom_alpha(other, w))
    assert other[0].gamma == units.width_from_lifetime(25.0)
    with pytest.raises(ValueError):
        atom_alpha([], 0.0)


def test_longrange_fixed():
    par, perp = longrange_fixed(100.0, 100.0, 100.0)
    # 6e4/1e6 + 3e4 * 200/1e12
    assert par - perp == pytest.approx(0.060006, rel=1e-12)
    par, perp = longrange_fixed(50.0, 80.0, 1e6)
    assert par == pytest.approx(130.0, rel=1e-12) and perp == pytest.approx(130.0, rel=1e-12)


@given(a1=st.floats(1.0, 500.0), a2=st.floats(1.0, 500.0), R=st.floats(5.0, 200.0))
def test_longrange_isotropic_cancellation(a1, a2, R):
    par, perp = longrange_fixed(a1, a2, R)
    iso = (par + 2 * perp) / 3
    expected = a1 + a2 + 2 * a1 * a2 * (a1 + a2) / R**6
    assert iso == pytest.approx(expected, rel=1e-13)


def test_longrange_average(displaced_pair):
    _, _, X, _ = displaced_pair
    par, perp = longrange_alpha(100.0, 200.0, X, 0)
    rho = X.vectors[0, 0] ** 2
    R = X.grid.nodes
    assert (par + 2 * perp) / 3 == pytest.approx(300.0 + 2 * 2e4 * 300.0 * np.sum(rho / R**6), rel=1e-12)
    with pytest.raises(ValueError):
        longrange_alpha(-1.0, 1.0, X, 0)


# ---------------------------------------------------------------------------
# four-state pair model: Feshbach molecule against free atoms

LINE_A, D_A = 13000.0, 4.0
LINE_B, D_B = 16500.0, 3.5


@pytest.fixture(scope="module")
def pair_model():
    mu = units.amu_to_me(5.4)
    R = np.concatenate([np.linspace(2.5, 20.0, 1751)[:-1], np.linspace(20.0, 60.0, 401)])
    wA, wB = units.cm1_to_hartree(LINE_A), units.cm1_to_hartree(LINE_B)

    def well(De, a, Re, T):
        return T - De + De * (1 - np.exp(-a * (R - Re))) ** 2

    states = {
        "X": (well(0.020, 0.60, 6.0, 0.0), "Sigma", 0.0),
        "A": (well(0.0322, 0.45, 6.6, wA), "Sigma", wA),
        "B": (well(0.01624, 0.50, 6.4, wA), "Pi", wA),
        "C": (well(0.0228, 0.45, 7.0, wB), "Sigma", wB),
        "D": (well(0.00833, 0.50, 6.8, wB), "Pi", wB),
    }
    curves = {k: PotentialCurve(k, R, V, symmetry=s, asymptote=T) for k, (V, s, T) in states.items()}
    bump = lambda c, R0: 1 + c * np.exp(-(((R - R0) / 3.0) ** 2))
    dips = {
        "A": DipoleFunction("X", "A", 0, R, D_A * bump(0.25, 6.5)),
        "B": DipoleFunction("X", "B", 1, R, D_A * bump(0.15, 6.5)),
        "C": DipoleFunction("X", "C", 0, R, D_B * bump(0.3, 7.0)),
        "D": DipoleFunction("X", "D", 1, R, D_B * bump(-0.2, 7.0)),
    }
    grid = build_grid(list(curves.values()), mu, config=GridConfig(R_max=45.0))
    bases = {k: solve_single(c, grid, mu) for k, c in curves.items()}
    return bases, dips


def test_feshbach_matches_last_bound_level(pair_model):
    bases, dips = pair_model
    X = bases["X"]
    v_last = X.n_bound - 1
    assert X.expectation(lambda r: r)[v_last] > 15.0
    t = build_transition_table(X, v_last, [(bases[k], dips[k]) for k in "ABCD"])
    w = units.cm1_to_hartree(np.array([3000.0, 6000.0, 8000.0, 20000.0]))
    mol = scan(t, CoreModel(), w).alpha_exc.real
    atoms = feshbach_alpha(atomic_lines([("A", LINE_A, D_A)]), atomic_lines([("B", LINE_B, D_B)]), w).real
    assert np.all(np.abs(mol / atoms - 1) < 0.05)


def test_continuum_cutoff_convergence(toy_job):
    from diapol.curves import load_curve, load_dipole

    curves = [load_curve(p) for p in toy_job.curves]
    dips = {d.to_state: d for d in map(load_dipole, toy_job.dipoles)}
    core = core_model(*toy_job.core)
    static = []
    for margin in (0.05, 0.075):
        grid = build_grid(curves, toy_job.reduced_mass, E_max=[c.asymptote + margin for c in curves],
                          config=GridConfig(R_max=toy_job.R_max))
        b = {c.label: solve_single(c, grid, toy_job.reduced_mass) for c in curves}
        t = build_transition_table(b["X"], 0, [(b[k], dips[k]) for k in "AB"], dips["X"])
        static.append(scan(t, core, [0.0]).alpha_exc[0].real)
    assert abs(static[1] / static[0] - 1) < 5e-3
