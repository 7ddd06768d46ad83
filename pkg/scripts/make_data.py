"""Regenerate the bundled example data under src/diapol/data/.

    python3 scripts/make_data.py

toy/    three-curve toy molecule (X Sigma ground, A Sigma and B Pi excited)
morse/  a single analytic Morse curve for level checks
pair/   RbCs effective model with an atom pair whose magic crossing sits at
        9390 cm-1 by construction
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from diapol import units
from diapol.analysis import resonance_windows
from diapol.curves import DipoleFunction, PotentialCurve, write_curve, write_dipole
from diapol.models import effective_alpha, effective_model
from diapol.response import atom_alpha, atomic_lines, build_transition_table, core_alpha, core_model
from diapol.solver import GridConfig, build_grid, solve_single

DATA = Path(__file__).resolve().parents[1] / "src" / "diapol" / "data"

TOY_MASS_AMU = 20.0
TOY_R_MAX = 45.0
TOY_LINE_CM, TOY_LINE_D = 13000.0, 4.0
TOY_PAD_CM = 150.0

# label: (De, a, Re) in atomic units, symmetry, asymptote in cm-1
TOY_STATES = {
    "X": ((0.020, 0.60, 6.0), "Sigma", 0.0),
    "A": ((0.02974, 0.45, 6.3), "Sigma", TOY_LINE_CM),
    "B": ((0.01562, 0.50, 6.2), "Pi", TOY_LINE_CM),
}
# transition dipoles d(R) = d_atom (1 + c exp(-((R - R0)/3)^2))
TOY_TDM = {"A": (0.25, 6.5, 0), "B": (0.15, 6.5, 1)}

PAIR_MAGIC_CM = 9390.0


def toy_grid():
    return np.concatenate([np.linspace(2.5, 20.0, 1751)[:-1], np.linspace(20.0, 60.0, 401)])


def write_cfg(path: Path, entries: list[tuple[str, str]], comment: str) -> None:
    lines = [f"# {comment}"] + [f"{k} = {v}" for k, v in entries]
    path.write_text("\n".join(lines) + "\n")


def make_toy() -> None:
    out = DATA / "toy"
    out.mkdir(parents=True, exist_ok=True)
    R = toy_grid()
    curves = {}
    for label, ((De, a, Re), sym, T_cm) in TOY_STATES.items():
        T = units.cm1_to_hartree(T_cm)
        V = T - De + De * (1.0 - np.exp(-a * (R - Re))) ** 2
        curves[label] = PotentialCurve(label, R, V, symmetry=sym, asymptote=T)
        write_curve(out / f"{label}.pec", curves[label])
    dipoles = {}
    for label, (c, R0, q) in TOY_TDM.items():
        d = TOY_LINE_D * (1.0 + c * np.exp(-(((R - R0) / 3.0) ** 2)))
        dipoles[label] = DipoleFunction("X", label, q, R, d)
        write_dipole(out / f"X-{label}.dip", dipoles[label])
    pdm = DipoleFunction("X", "X", 0, R, 0.5 * R * np.exp(-R / 4.0))
    write_dipole(out / "X-X.dip", pdm)
    (out / "atom.lines").write_text(
        "# label  energy (cm-1)  |d| (a.u.)\n" f"P  {TOY_LINE_CM:.1f}  {TOY_LINE_D:.1f}\n"
    )

    # declared windows: strong bands of the computed table, padded
    mu = units.amu_to_me(TOY_MASS_AMU)
    grid = build_grid(list(curves.values()), mu, config=GridConfig(R_max=TOY_R_MAX))
    bases = {k: solve_single(c, grid, mu) for k, c in curves.items()}
    table = build_transition_table(bases["X"], 0, [(bases[k], dipoles[k]) for k in "AB"], pdm)
    windows = resonance_windows(table, rel=1e-4, pad_cm=TOY_PAD_CM)
    spans = " ".join(
        f"{math.floor(lo):d}:{'inf' if math.isinf(hi) else math.ceil(hi)}" for lo, hi in windows
    )
    write_cfg(out / "toy.cfg", [
        ("molecule", "toy"),
        ("mass_amu", f"{TOY_MASS_AMU:g}"),
        ("curves", "X.pec A.pec B.pec"),
        ("dipoles", "X-X.dip X-A.dip X-B.dip"),
        ("ground", "X"),
        ("core", "K Rb"),
        ("R_max", f"{TOY_R_MAX:g}"),
        ("atom_lines", "atom.lines"),
        ("windows", spans),
        ("output", "out"),
    ], "synthetic toy molecule")


def make_morse() -> None:
    out = DATA / "morse"
    out.mkdir(parents=True, exist_ok=True)
    R = np.concatenate([np.linspace(2.0, 20.0, 1801)[:-1], np.linspace(20.0, 150.0, 261)])
    lines = ["# units: bohr hartree", "# label: X", "# symmetry: Sigma",
             "# model morse De=0.02 a=0.9 Re=5.0"]
    lines += [f"{r:.17g} 0" for r in R]
    (out / "X.pec").write_text("\n".join(lines) + "\n")
    write_cfg(out / "morse.cfg", [
        ("molecule", "morse"),
        ("mass_me", "9790"),
        ("curves", "X.pec"),
        ("ground", "X"),
        ("R_max", "40"),
        ("output", "out"),
    ], "analytic Morse well, De = 0.02 hartree, a = 0.9/bohr, Re = 5 bohr")


def make_pair() -> None:
    out = DATA / "pair"
    out.mkdir(parents=True, exist_ok=True)
    model = effective_model("RbCs")
    model.save(out / "RbCs.json")
    w = units.cm1_to_hartree(PAIR_MAGIC_CM)
    target = float(np.real(effective_alpha(model, w)))
    core = core_model("Rb", "Cs")
    rb = [("D1", 12578.950, 2.992), ("D2", 12816.545, 4.227)]
    cs = [("D1", 11178.268, 3.189), ("D2", 11732.307, 4.489)]

    def scaled(lines, s):
        return [(l, e, s * d) for l, e, d in lines]

    def pair_alpha(s):
        total = atom_alpha(atomic_lines(scaled(rb, s)), w) + atom_alpha(atomic_lines(scaled(cs, s)), w)
        return float(np.real(total + core_alpha(core, w)))

    s = brentq(lambda x: pair_alpha(x) - target, 0.1, 2.0, xtol=1e-15, rtol=1e-15)
    for name, lines in (("Rb", rb), ("Cs", cs)):
        (out / f"{name}.lines").write_text(
            "# label  energy (cm-1)  |d| (a.u.); dipoles share a scale factor that puts\n"
            f"# the crossing with the RbCs effective model at {PAIR_MAGIC_CM:g} cm-1\n"
            + "".join(f"{l} {e:.3f} {d:.17g}\n" for l, e, d in scaled(lines, s))
        )
    write_cfg(out / "magic.cfg", [
        ("molecule", "RbCs"),
        ("effective_model", "RbCs.json"),
        ("core", "Rb Cs"),
        ("atom_lines", "Rb.lines Cs.lines"),
        ("feshbach", "atom-pair"),
        ("scan_lo", "5000"),
        ("scan_hi", "13000"),
        ("output", "out"),
    ], "effective RbCs ground state against a free Rb + Cs pair")


if __name__ == "__main__":
    make_morse()
    make_pair()
    make_toy()
