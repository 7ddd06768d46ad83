"""Sum-over-states dynamic dipole polarizabilities.

All energies, widths and frequencies are in hartree, dipoles in atomic units
and polarizabilities in a.u. The two imaginary-part conventions differ only in
the sign of i*gamma/2 in the anti-resonant term:

* ``constant-sign``: Im alpha is even in omega and finite at omega = 0;
* ``opposite-sign``: Im alpha is odd in omega and vanishes at omega = 0.

The real part is the same for both.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import units
from .angular import RotationalWeights, rotational_weights
from .curves import CurveFormatError, DipoleFunction, DomainError
from .solver import GridError, LevelBasis

log = logging.getLogger(__name__)

CONVENTIONS = ("constant-sign", "opposite-sign")
DEFAULT_LIFETIME_NS = 10.0
# entries x frequencies evaluated per block
_BLOCK = 2_000_000


class DataError(ValueError):
    """Input data that cannot describe a physical transition table."""


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


# ---------------------------------------------------------------------------
# core electrons

# effective transitions of the closed-shell ions, (cm-1, d^2 in a.u.)
CORE_IONS: dict[str, tuple[tuple[float, float], ...]] = {
    "K": ((157105.0, 0.304), (199440.0, 1.383)),
    "Rb": ((165912.0, 2.728), (362918.0, 1.401)),
    "Cs": ((142044.0, 4.488), (553515.0, 1.860)),
    # Li+ and Na+ are small enough to be neglected
    "Li": (),
    "Na": (),
}


@dataclass(frozen=True)
class CoreModel:
    """Effective core transitions: per ion, tuples of (omega_k, d_k^2) in a.u."""

    ions: tuple[tuple[str, tuple[tuple[float, float], ...]], ...] = ()

    @property
    def transitions(self) -> list[tuple[float, float]]:
        return [t for _, ts in self.ions for t in ts]

    @property
    def empty(self) -> bool:
        return not self.transitions

    def static(self) -> float:
        return float(sum(2.0 * d2 / w for w, d2 in self.transitions))

    def to_dict(self) -> dict:
        return {
            ion: [[units.hartree_to_cm1(w), d2] for w, d2 in ts] for ion, ts in self.ions
        }


def core_model(*ions: str) -> CoreModel:
    """Core model of the named ions (e.g. ``core_model("Rb", "Cs")``)."""
    out = []
    for ion in ions:
        key = ion.rstrip("+")
        if key not in CORE_IONS:
            raise KeyError(f"no core parameters for {ion!r}")
        ts = tuple((units.cm1_to_hartree(w), d2) for w, d2 in CORE_IONS[key])
        out.append((key, ts))
    return CoreModel(tuple(out))


def core_alpha(core: CoreModel, omega):
    """Core polarizability sum_k 2 w_k d_k^2 / (w_k^2 - omega^2); purely real."""
    omega = np.asarray(omega, dtype=float)
    total = np.zeros_like(omega)
    if core.empty:
        return total + 0j if omega.ndim else 0j
    w_min = min(w for w, _ in core.transitions)
    if np.any(np.abs(omega) >= w_min):
        warnings.warn("frequency above the lowest core transition", RuntimeWarning)
    for w, d2 in core.transitions:
        if np.any(np.abs(np.abs(omega) - w) < 1e-12):
            raise DomainError(f"frequency on a core resonance at {w} hartree")
        total = total + 2.0 * w * d2 / (w * w - omega * omega)
    return total + 0j if omega.ndim else complex(total)


# ---------------------------------------------------------------------------
# transition tables


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Flat table of transitions from one ground level.

    ``parallel`` is True for Sigma-Sigma (q = 0) entries; ``origin`` is one
    of ``ground-rovib``, ``electronic`` or ``core``.
    """

    state: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    d2: np.ndarray
    gamma: np.ndarray
    parallel: np.ndarray
    origin: np.ndarray
    ground_energy: float = 0.0

    def __post_init__(self):
        n = len(self.omega)
        for name in ("state", "v", "d2", "gamma", "parallel", "origin"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column {name} has the wrong length")
        if np.any(self.d2 < 0):
            raise DataError("negative squared dipole")
        if not np.all(np.isfinite(self.omega)) or not np.all(np.isfinite(self.d2)):
            raise DataError("non-finite transition data")
        excited = self.origin != "ground-rovib"
        if np.any(self.gamma[excited] <= 0):
            raise DataError("every excited entry needs a positive width")

    def __len__(self) -> int:
        return len(self.omega)

    def select(self, mask) -> "TransitionTable":
        mask = np.asarray(mask, dtype=bool)
        return TransitionTable(
            self.state[mask], self.v[mask], self.omega[mask], self.d2[mask],
            self.gamma[mask], self.parallel[mask], self.origin[mask], self.ground_energy,
        )

    def with_lifetime(self, lifetime_ns: float) -> "TransitionTable":
        gamma = np.full(len(self), units.width_from_lifetime(lifetime_ns))
        return TransitionTable(
            self.state, self.v, self.omega, self.d2, gamma, self.parallel,
            self.origin, self.ground_energy,
        )

    def static(self) -> tuple[float, float]:
        """Static (omega = 0, gamma -> 0) parallel and perpendicular sums."""
        terms = 2.0 * self.d2 / self.omega
        return float(terms[self.parallel].sum()), float(terms[~self.parallel].sum())

    @property
    def electronic_resonances(self) -> np.ndarray:
        return np.sort(self.omega[self.origin == "electronic"])

    @staticmethod
    def concatenate(tables: Sequence["TransitionTable"]) -> "TransitionTable":
        if not tables:
            return empty_table()
        cat = lambda name: np.concatenate([getattr(t, name) for t in tables])
        return TransitionTable(
            cat("state"), cat("v"), cat("omega"), cat("d2"), cat("gamma"),
            cat("parallel"), cat("origin"), tables[0].ground_energy,
        )


def empty_table() -> TransitionTable:
    e = np.array([], dtype=float)
    return TransitionTable(
        np.array([], dtype=object), np.array([], dtype=int), e, e, e,
        np.array([], dtype=bool), np.array([], dtype=object),
    )


def simple_table(entries: Iterable[tuple], lifetime_ns: float | None = None) -> TransitionTable:
    """Table from tuples (omega, d2, gamma, channel[, origin]).

    ``channel`` is ``"parallel"`` or ``"perpendicular"``; a None gamma takes
    the width of ``lifetime_ns`` (default 10 ns).
    """
    default_gamma = units.width_from_lifetime(lifetime_ns or DEFAULT_LIFETIME_NS)
    rows = []
    for e in entries:
        omega, d2, gamma, channel = e[:4]
        origin = e[4] if len(e) > 4 else "electronic"
        if channel not in ("parallel", "perpendicular"):
            raise DataError(f"unknown channel {channel!r}")
        rows.append((omega, d2, default_gamma if gamma is None else gamma,
                     channel == "parallel", origin))
    if not rows:
        return empty_table()
    omega, d2, gamma, par, origin = zip(*rows)
    n = len(rows)
    return TransitionTable(
        np.array(["model"] * n, dtype=object), np.arange(n), np.array(omega, dtype=float),
        np.array(d2, dtype=float), np.array(gamma, dtype=float), np.array(par, dtype=bool),
        np.array(origin, dtype=object),
    )


def _dipole_channel(basis: LevelBasis, dipole: DipoleFunction, ground_label: str) -> int:
    """Channel of ``basis`` that the dipole connects to the ground state."""
    for label in (dipole.to_state, dipole.from_state):
        if label != ground_label and label in basis.channels:
            return basis.channel_index(label)
    if len(basis.channels) == 1:
        return 0
    raise DataError(
        f"dipole {dipole.from_state}-{dipole.to_state} matches no channel of {basis.state}"
    )


def _check_symmetry(basis: LevelBasis, channel: int, dipole: DipoleFunction) -> None:
    if not basis.symmetries:
        return
    sym = basis.symmetries[channel].lower()
    if sym.startswith("sigma") and dipole.q != 0:
        raise DataError(f"{basis.channels[channel]} is Sigma but dipole has q={dipole.q}")
    if sym.startswith("pi") and dipole.q == 0:
        raise DataError(f"{basis.channels[channel]} is Pi but dipole has q=0")


def build_transition_table(
    ground: LevelBasis,
    v: int,
    excited: Sequence[tuple[LevelBasis, DipoleFunction]] = (),
    ground_pdm: DipoleFunction | None = None,
    lifetime_ns: float = DEFAULT_LIFETIME_NS,
    lifetimes: dict[str, float] | None = None,
    rotation: bool = True,
) -> TransitionTable:
    """Transitions out of level (v, J=0) of ``ground``.

    Vibrational integrals are plain sums over the shared grid nodes. Within
    the ground state the pure rotational entry sits at 2B_v and the
    rovibrational ones at E_v' - E_v + 2B_v'; ``rotation=False`` drops the
    rotational terms and the (then zero-frequency) pure rotational entry.
    ``lifetimes`` overrides the lifetime per excited state label.
    """
    if not 0 <= v < len(ground):
        raise IndexError(f"ground level v={v} not available ({len(ground)} levels)")
    lifetimes = lifetimes or {}
    nodes = ground.grid.nodes
    c0 = ground.vectors[v, 0]
    E0 = float(ground.energies[v])
    gamma0 = units.width_from_lifetime(lifetime_ns)
    tables = []

    if ground_pdm is not None:
        d = ground_pdm(nodes)
        amp = ground.vectors[:, 0, :] @ (d * c0)
        omega = ground.energies - E0
        if rotation:
            omega = omega + 2.0 * ground.B
            omega[v] = 2.0 * ground.B[v]
        keep = np.ones(len(ground), dtype=bool)
        if not rotation:
            keep[v] = False
        n = int(keep.sum())
        tables.append(TransitionTable(
            np.array([ground.state] * n, dtype=object), np.arange(len(ground))[keep],
            omega[keep], amp[keep] ** 2,
            np.full(n, units.width_from_lifetime(lifetimes.get(ground.state, lifetime_ns))),
            np.ones(n, dtype=bool), np.array(["ground-rovib"] * n, dtype=object), E0,
        ))

    for basis, dipole in excited:
        if not basis.grid.same_as(ground.grid):
            raise GridError(f"{basis.state} is not on the ground-state grid")
        ch = _dipole_channel(basis, dipole, ground.state)
        _check_symmetry(basis, ch, dipole)
        amp = basis.vectors[:, ch, :] @ (dipole(nodes) * c0)
        omega = basis.energies - E0
        if np.any(omega <= 0):
            bad = int(np.argmax(omega <= 0))
            raise DataError(
                f"level {bad} of {basis.state} lies below ground level v={v}; "
                "check curve energy origins"
            )
        n = len(basis)
        gamma = units.width_from_lifetime(lifetimes.get(basis.state, lifetime_ns))
        tables.append(TransitionTable(
            np.array([basis.state] * n, dtype=object), np.arange(n), omega, amp**2,
            np.full(n, gamma), np.full(n, dipole.q == 0), np.array(["electronic"] * n, dtype=object),
            E0,
        ))
    table = TransitionTable.concatenate(tables)
    return TransitionTable(
        table.state, table.v, table.omega, table.d2, table.gamma, table.parallel,
        table.origin, E0,
    ) if tables else table


def core_table(core: CoreModel) -> TransitionTable:
    """Core transitions as zero-width parallel+perpendicular table entries.

    Only for inspection; :func:`scan` adds the core analytically.
    """
    rows = [(w, d2, 0.0, "parallel", "core") for w, d2 in core.transitions]
    return simple_table(rows)


# ---------------------------------------------------------------------------
# sums


def _lorentz_sums(omega_t, d2, gamma, omega, convention):
    """Complex sum over entries for every frequency in ``omega``."""
    out = np.zeros(omega.shape, dtype=complex)
    if len(omega_t) == 0:
        return out
    sign = 1.0 if convention == "constant-sign" else -1.0
    step = max(1, _BLOCK // len(omega_t))
    wt, d2, hw = omega_t[:, None], d2[:, None], 0.5 * gamma[:, None]
    for lo in range(0, omega.size, step):
        w = omega[lo : lo + step][None, :]
        dm = wt - w
        dp = wt + w
        lm = dm * dm + hw * hw
        lp = dp * dp + hw * hw
        re = np.sum(d2 * (dm / lm + dp / lp), axis=0)
        im = np.sum(d2 * hw * (1.0 / lm + sign / lp), axis=0)
        out[lo : lo + step] = re + 1j * im
    return out


def alpha_sum(table: TransitionTable, omega, convention: str = "constant-sign"):
    """Parallel and perpendicular sums over the table (no core)."""
    _check_convention(convention)
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    par = table.parallel
    a_par = _lorentz_sums(table.omega[par], table.d2[par], table.gamma[par], w, convention)
    a_perp = _lorentz_sums(table.omega[~par], table.d2[~par], table.gamma[~par], w, convention)
    if scalar:
        return complex(a_par[0]), complex(a_perp[0])
    return a_par, a_perp


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class ResponseSpectrum:
    frequencies: np.ndarray
    alpha_par: np.ndarray
    alpha_perp: np.ndarray
    alpha_gr: np.ndarray
    alpha_exc: np.ndarray
    convention: str
    weights: RotationalWeights = field(default_factory=lambda: rotational_weights(0, 0))
    resonances: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def alpha_iso(self) -> np.ndarray:
        return self.alpha_par / 3.0 + 2.0 * self.alpha_perp / 3.0

    @property
    def gamma_aniso(self) -> np.ndarray:
        return self.alpha_par - self.alpha_perp

    @property
    def alpha_JM(self) -> np.ndarray:
        w = self.weights
        return float(w.w_par) * self.alpha_par + float(w.w_perp) * self.alpha_perp

    @property
    def first_resonance(self) -> float | None:
        return float(self.resonances[0]) if len(self.resonances) else None


def scan(
    table: TransitionTable,
    core: CoreModel,
    omega_grid,
    convention: str = "constant-sign",
    weights: RotationalWeights | None = None,
) -> ResponseSpectrum:
    """Evaluate the table plus the core on a sorted frequency grid."""
    _check_convention(convention)
    w = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if np.any(np.diff(w) < 0):
        raise ValueError("frequency grid must be sorted")
    a_core = core_alpha(core, w)
    gr_mask = table.origin == "ground-rovib"
    gr_par, gr_perp = alpha_sum(table.select(gr_mask), w, convention)
    ex_par, ex_perp = alpha_sum(table.select(~gr_mask), w, convention)
    alpha_par = gr_par + ex_par + a_core
    alpha_perp = gr_perp + ex_perp + a_core
    alpha_gr = gr_par / 3.0 + 2.0 * gr_perp / 3.0
    alpha_exc = ex_par / 3.0 + 2.0 * ex_perp / 3.0 + a_core
    return ResponseSpectrum(
        frequencies=w,
        alpha_par=alpha_par,
        alpha_perp=alpha_perp,
        alpha_gr=alpha_gr,
        alpha_exc=alpha_exc,
        convention=convention,
        weights=weights or rotational_weights(0, 0),
        resonances=table.electronic_resonances,
    )


def m_averaged(spectrum: ResponseSpectrum, J: int) -> np.ndarray:
    """alpha_{vJM} averaged over M = -J..J (equals alpha_iso)."""
    wp = sum((rotational_weights(J, M).w_par for M in range(-J, J + 1)), Fraction(0))
    wq = sum((rotational_weights(J, M).w_perp for M in range(-J, J + 1)), Fraction(0))
    n = 2 * J + 1
    return float(wp / n) * spectrum.alpha_par + float(wq / n) * spectrum.alpha_perp


# ---------------------------------------------------------------------------
# atoms and Feshbach molecules


@dataclass(frozen=True)
class AtomicLine:
    label: str
    omega: float  # hartree
    d2: float
    gamma: float


def atomic_lines(rows: Iterable[tuple], lifetime_ns: float = DEFAULT_LIFETIME_NS) -> list[AtomicLine]:
    """Lines from (label, energy cm-1, |d| a.u.[, lifetime ns]) tuples."""
    out = []
    for row in rows:
        label, e_cm, d = row[:3]
        tau = row[3] if len(row) > 3 and row[3] is not None else lifetime_ns
        out.append(AtomicLine(str(label), units.cm1_to_hartree(float(e_cm)), float(d) ** 2,
                              units.width_from_lifetime(float(tau))))
    return out


def load_atomic_lines(path, lifetime_ns: float = DEFAULT_LIFETIME_NS) -> list[AtomicLine]:
    """Read a whitespace-separated line list: label, cm-1, |d| (a.u.), [lifetime ns]."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise CurveFormatError("file not found", path) from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise CurveFormatError(f"expected 3 or 4 columns, got {len(parts)}", path, lineno)
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise CurveFormatError("non-numeric column", path, lineno) from None
        if values[0] <= 0 or (len(values) == 3 and values[2] <= 0):
            raise CurveFormatError("energy and lifetime must be positive", path, lineno)
        rows.append((parts[0], *values))
    if not rows:
        raise CurveFormatError("no lines", path)
    return atomic_lines(rows, lifetime_ns)


def atom_alpha(lines: Sequence[AtomicLine], omega, convention: str = "constant-sign"):
    """Atomic polarizability from a line list (same formulas as molecules)."""
    _check_convention(convention)
    if not lines:
        raise ValueError("empty line list")
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    out = _lorentz_sums(
        np.array([l.omega for l in lines]), np.array([l.d2 for l in lines]),
        np.array([l.gamma for l in lines]), np.atleast_1d(w), convention,
    )
    return complex(out[0]) if scalar else out


def feshbach_alpha(lines_a, lines_b, omega, convention: str = "constant-sign"):
    """Feshbach molecule as a pair of free atoms: alpha_A + alpha_B."""
    return atom_alpha(lines_a, omega, convention) + atom_alpha(lines_b, omega, convention)


# ---------------------------------------------------------------------------
# long range


def longrange_fixed(alpha1: float, alpha2: float, R):
    """Parallel and perpendicular static polarizability of an atom pair at R."""
    R = np.asarray(R, dtype=float)
    s = alpha1 + alpha2
    p = alpha1 * alpha2
    par = s + 4.0 * p / R**3 + 4.0 * p * s / R**6
    perp = s - 2.0 * p / R**3 + p * s / R**6
    return par, perp


def longrange_alpha(alpha1: float, alpha2: float, levels: LevelBasis, v: int) -> tuple[float, float]:
    """Long-range pair formula averaged over |psi_v|^2."""
    if alpha1 <= 0 or alpha2 <= 0:
        raise ValueError("atomic polarizabilities must be positive")
    if not 0 <= v < len(levels):
        raise IndexError(f"level {v} not available")
    rho = np.sum(levels.vectors[v] ** 2, axis=0)
    par, perp = longrange_fixed(alpha1, alpha2, levels.grid.nodes)
    return float(rho @ par), float(rho @ perp)
