"""Two-level model with a time-integration oracle, and the effective model.

The effective model keeps one Sigma and one Pi transition plus the core:

    alpha_eff(w) = 2 w_S d_S^2/(w_S^2 - w^2) + 2 w_P d_P^2/(w_P^2 - w^2) + core(w)
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import units
from .curves import DomainError
from .response import (
    CONVENTIONS,
    CoreModel,
    ResponseSpectrum,
    TransitionTable,
    core_alpha,
    core_model,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# two-level system


class OracleError(RuntimeError):
    """The time integration cannot deliver a clean steady-state response."""


@dataclass(frozen=True)
class TwoLevel:
    E1: float
    E2: float
    d12: float
    gamma2: float
    amplitude: float = 1e-5
    ramp_time: float | None = None

    @property
    def omega12(self) -> float:
        return self.E2 - self.E1

    @property
    def weak_field(self) -> bool:
        return abs(self.d12 * self.amplitude) < 1e-3 * self.omega12

    def off_resonant(self, omega: float) -> bool:
        return abs(self.omega12 - abs(omega)) > 10.0 * self.gamma2 / 2.0


def twolevel_alpha(tl: TwoLevel, omega, convention: str = "constant-sign"):
    """Closed-form two-level polarizability of the lower level."""
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if tl.gamma2 < 0:
        raise ValueError("width must be non-negative")
    w = np.asarray(omega, dtype=float)
    a = tl.omega12 - 0.5j * tl.gamma2
    anti = a if convention == "constant-sign" else np.conj(a)
    out = tl.d12**2 * (1.0 / (a - w) + 1.0 / (anti + w))
    return complex(out) if w.ndim == 0 else out


@dataclass(frozen=True)
class OracleResult:
    constant_sign: complex
    opposite_sign: complex
    contamination: float
    ramp_time: float
    window_cycles: int

    def get(self, convention: str) -> complex:
        return self.constant_sign if convention == "constant-sign" else self.opposite_sign


def _step(x: float) -> float:
    """C-infinity switch from 0 at x <= 0 to 1 at x >= 1.

    All derivatives vanish at both ends, so the transient left by the ramp
    falls off faster than any power of (ramp time x detuning).
    """
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    f = math.exp(-1.0 / x)
    g = math.exp(-1.0 / (1.0 - x))
    return f / (f + g)


def _envelope(t: float, ramp: float, plateau: float) -> float:
    """Smooth ramp up, flat plateau, smooth ramp down."""
    if t < ramp + plateau:
        return _step(t / ramp)
    return 1.0 - _step((t - ramp - plateau) / ramp)


def twolevel_oracle(
    tl: TwoLevel,
    omega: float,
    window_cycles: int = 20,
    samples_per_cycle: int = 32,
    rtol: float = 1e-9,
    max_contamination: float = 2e-4,
) -> OracleResult:
    """Polarizability from direct integration of the amplitude equations.

    The right state is propagated forward from the lower level; the left
    state (needed for the non-Hermitian expectation value) is propagated
    backward from the end of the pulse, where it is stable. The response is
    the e^{-i w t} Fourier component of <d>(t) over an integer number of
    cycles on the plateau. Both prescriptions are returned:

    * constant-sign: <L|d|R> / <L|R>
    * opposite-sign: <R|d|R> / <R|R>
    """
    if omega <= 0:
        raise ValueError("oracle needs a positive frequency")
    if not tl.weak_field:
        raise OracleError("field too strong for linear response")
    if not tl.off_resonant(omega):
        raise OracleError("frequency within a few linewidths of the resonance")
    w12 = tl.omega12
    detuning = min(abs(w12 - omega), w12 + omega)
    period = 2.0 * math.pi / omega
    ramp = tl.ramp_time
    if ramp is None:
        ramp = max(50.0 * period, 250.0 / detuning)
        ramp = math.ceil(ramp / period) * period
    plateau = window_cycles * period
    t_end = 2.0 * ramp + plateau
    F, d = tl.amplitude, tl.d12
    h22 = w12 - 0.5j * tl.gamma2

    def field_at(t):
        return F * _envelope(t, ramp, plateau) * math.cos(omega * t)

    # amplitudes in the frame rotating at E1
    def right(t, y):
        c = -d * field_at(t)
        return [-1j * (c * y[1]), -1j * (h22 * y[1] + c * y[0])]

    def left(t, y):
        c = -d * field_at(t)
        return [1j * (c * y[1]), 1j * (h22 * y[1] + c * y[0])]

    n = window_cycles * samples_per_cycle
    t_win = ramp + period * np.arange(n) / samples_per_cycle
    max_step = period / 16.0
    atol = 1e-6 * rtol * abs(d * F / detuning)
    kw = dict(method="DOP853", rtol=rtol, atol=atol, max_step=max_step)
    fw = solve_ivp(right, (0.0, t_end), [1.0 + 0j, 0j], t_eval=t_win, **kw)
    bw = solve_ivp(left, (t_end, 0.0), [1.0 + 0j, 0j], t_eval=t_win[::-1], **kw)
    if not (fw.success and bw.success):
        raise OracleError(f"integration failed: {fw.message} / {bw.message}")
    a1, a2 = fw.y
    b1, b2 = bw.y[:, ::-1]

    d_plus = d * (b1 * a2 + b2 * a1) / (b1 * a1 + b2 * a2)
    d_minus = 2.0 * d * np.real(np.conj(a1) * a2) / (np.abs(a1) ** 2 + np.abs(a2) ** 2)
    phase = np.exp(1j * omega * t_win)

    def extract(signal, sl=slice(None)):
        return 2.0 * np.mean(signal[sl] * phase[sl]) / F

    alpha_p = extract(d_plus)
    alpha_m = extract(d_minus)
    half = n // 2
    if window_cycles % 2 == 0:
        first, second = slice(0, half), slice(half, n)
        spread = max(
            abs(extract(s, first) - extract(s, second)) / abs(extract(s))
            for s in (d_plus, d_minus)
        )
    else:
        spread = 0.0
    if spread > max_contamination:
        raise OracleError(
            f"transient contamination {spread:.2e} exceeds {max_contamination:.1e}; "
            "use a longer ramp"
        )
    return OracleResult(complex(alpha_p), complex(alpha_m), spread, ramp, window_cycles)


# ---------------------------------------------------------------------------
# effective model

# (w_Sigma cm-1, d_Sigma, w_Pi cm-1, d_Pi, rms %) for v = 0
EFFECTIVE_PARAMS: dict[str, tuple[float, float, float, float, float]] = {
    "RbCs": (10694.77, 2.68, 13854.92, 3.08, 0.466),
    "KCs": (10758.38, 2.62, 14225.92, 2.99, 0.404),
    "KRb": (11583.60, 2.58, 15069.77, 2.90, 0.428),
    "NaCs": (11450.68, 2.32, 15681.56, 2.63, 1.755),
    "NaRb": (12725.97, 2.33, 16891.66, 2.61, 1.083),
    "NaK": (13164.20, 2.30, 17399.39, 2.59, 1.127),
    "LiCs": (11683.62, 2.31, 16088.54, 2.50, 1.338),
    "LiRb": (12326.08, 2.26, 17237.94, 2.42, 1.316),
    "LiK": (12918.45, 2.22, 17783.19, 2.41, 1.019),
    "LiNa": (14862.75, 2.00, 20475.26, 2.25, 1.979),
}

# static excited-state part alpha_exc(0) of the full sums, a.u.
ALPHA_EXC_STATIC: dict[str, float] = {
    "RbCs": 621.5, "KCs": 572.5, "KRb": 513.1, "NaCs": 423.2, "NaRb": 378.6,
    "NaK": 350.4, "LiCs": 377.1, "LiRb": 346.1, "LiK": 318.8, "LiNa": 233.5,
}

# excluded resonance ranges (cm-1); None as upper bound means "and above"
EXCLUDED_RANGES: dict[str, tuple[tuple[float, float | None], ...]] = {
    "RbCs": ((8574.19, 9123.21), (9886.05, 12030.45), (13215.42, None)),
    "KCs": ((8675.89, 9314.17), (9940.45, 12326.32), (13635.89, None)),
    "KRb": ((9584.94, 10115.96), (10767.00, 13325.37), (14318.42, None)),
    "NaCs": ((10069.66, 13419.82), (15013.11, None)),
    "NaRb": ((11156.77, 14890.54), (16276.57, None)),
    "NaK": ((11396.48, 15463.52), (16798.45, None)),
    "LiCs": ((9018.60, 14510.36), (15637.97, None)),
    "LiRb": ((9938.34, 15210.24), (16837.77, None)),
    "LiK": ((10281.32, 11397.07), (11880.73, 16416.37), (17305.20, None)),
    "LiNa": ((14033.41, 18589.43), (19929.10, None)),
}

_ATOMS = ("Li", "Na", "K", "Rb", "Cs")


def molecule_ions(name: str) -> tuple[str, str]:
    """Split 'RbCs' into ('Rb', 'Cs')."""
    for a in _ATOMS:
        if name.startswith(a) and name[len(a):] in _ATOMS:
            return a, name[len(a):]
    raise KeyError(f"cannot parse molecule name {name!r}")


@dataclass(frozen=True)
class EffectiveModel:
    omega_sigma: float
    d_sigma: float
    omega_pi: float
    d_pi: float
    core: CoreModel = field(default_factory=CoreModel)
    excluded_windows: tuple[tuple[float, float], ...] = ()
    fit_rms: float | None = None
    name: str = ""
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.omega_sigma > 0 and self.omega_pi > 0):
            raise ValueError("effective transition energies must be positive")

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "omega_sigma_cm-1": units.hartree_to_cm1(self.omega_sigma),
            "d_sigma_au": self.d_sigma,
            "omega_pi_cm-1": units.hartree_to_cm1(self.omega_pi),
            "d_pi_au": self.d_pi,
            "core_cm-1_au2": self.core.to_dict(),
            "excluded_windows_cm-1": [list(w) for w in self.excluded_windows],
            "rms_percent": self.fit_rms,
            "flags": list(self.flags),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EffectiveModel":
        doc = json.loads(text)
        ions = tuple(
            (ion, tuple((units.cm1_to_hartree(w), d2) for w, d2 in ts))
            for ion, ts in doc.get("core_cm-1_au2", {}).items()
        )
        return cls(
            omega_sigma=units.cm1_to_hartree(doc["omega_sigma_cm-1"]),
            d_sigma=doc["d_sigma_au"],
            omega_pi=units.cm1_to_hartree(doc["omega_pi_cm-1"]),
            d_pi=doc["d_pi_au"],
            core=CoreModel(ions),
            excluded_windows=tuple(tuple(w) for w in doc.get("excluded_windows_cm-1", [])),
            fit_rms=doc.get("rms_percent"),
            name=doc.get("name", ""),
            flags=tuple(doc.get("flags", [])),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "EffectiveModel":
        return cls.from_json(Path(path).read_text())


def effective_model(name: str, with_core: bool = True) -> EffectiveModel:
    """Tabulated v = 0 effective model of a heteronuclear alkali dimer."""
    ws, ds, wp, dp, rms = EFFECTIVE_PARAMS[name]
    windows = tuple((lo, hi if hi is not None else math.inf) for lo, hi in EXCLUDED_RANGES[name])
    core = core_model(*molecule_ions(name)) if with_core else CoreModel()
    return EffectiveModel(
        units.cm1_to_hartree(ws), ds, units.cm1_to_hartree(wp), dp, core, windows, rms, name
    )


def _near_pole(m: EffectiveModel, w) -> np.ndarray:
    near = np.zeros(np.shape(w), dtype=bool)
    for pole in (m.omega_sigma, m.omega_pi):
        near |= np.abs(np.abs(w) - pole) <= 1e-9
    return near


def _guard(m: EffectiveModel, w, strict: bool) -> np.ndarray:
    near = _near_pole(m, w)
    if strict and np.any(near):
        raise DomainError("frequency within 1e-9 hartree of an effective pole")
    return near


def _two_pole(ws, ds, wp, dp, w):
    return 2.0 * ws * ds**2 / (ws**2 - w**2) + 2.0 * wp * dp**2 / (wp**2 - w**2)


def effective_alpha(m: EffectiveModel, omega, strict: bool = True):
    """Real effective isotropic polarizability (a.u.).

    Within 1e-9 hartree of a pole this raises, or returns NaN when
    ``strict`` is False (convenient for scans).
    """
    w = np.asarray(omega, dtype=float)
    near = _guard(m, w, strict)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _two_pole(m.omega_sigma, m.d_sigma, m.omega_pi, m.d_pi, w)
    if not m.core.empty:
        out = out + np.real(core_alpha(m.core, w))
    out = np.where(near, np.nan, out)
    return float(out) if w.ndim == 0 else out


def effective_anisotropy(m: EffectiveModel, omega, strict: bool = True):
    """Effective anisotropy: Sigma counts as parallel, Pi as perpendicular."""
    w = np.asarray(omega, dtype=float)
    near = _guard(m, w, strict)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (6.0 * m.omega_sigma * m.d_sigma**2 / (m.omega_sigma**2 - w**2)
               - 3.0 * m.omega_pi * m.d_pi**2 / (m.omega_pi**2 - w**2))
    out = np.where(near, np.nan, out)
    return float(out) if w.ndim == 0 else out


def effective_spectrum(m: EffectiveModel):
    """Callable for the analysis scans (NaN at the poles instead of raising)."""
    return lambda w: effective_alpha(m, w, strict=False)


def tuneout_closed_form(m: EffectiveModel) -> float:
    """Zero of the two-pole part (no core), between the two poles."""
    a = m.omega_sigma * m.d_sigma**2
    b = m.omega_pi * m.d_pi**2
    return math.sqrt((a * m.omega_pi**2 + b * m.omega_sigma**2) / (a + b))


# ---------------------------------------------------------------------------
# fitting


class FitError(RuntimeError):
    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = list(trace)


class PoleContaminationWarning(RuntimeWarning):
    pass


def in_windows(omega_cm, windows) -> np.ndarray:
    omega_cm = np.asarray(omega_cm, dtype=float)
    mask = np.zeros(omega_cm.shape, dtype=bool)
    for lo, hi in windows:
        mask |= (omega_cm >= lo) & (omega_cm <= hi)
    return mask


def initial_guess(table: TransitionTable) -> tuple[float, float, float, float]:
    """Starting parameters from the strongest Sigma and Pi states.

    The energy is the dipole-weighted centroid of the dominant state of each
    symmetry; the dipole collects all states of that symmetry with the
    isotropic shares 1/3 (parallel) and 2/3 (perpendicular).
    """
    elec = table.origin == "electronic"
    out = []
    for par, share in ((True, 1.0 / 3.0), (False, 2.0 / 3.0)):
        mask = elec & (table.parallel == par)
        if table.d2[mask].sum() <= 0:
            raise FitError("table has no Sigma or no Pi transition for the initial guess")
        states = sorted(set(table.state[mask]))
        strength = [table.d2[mask & (table.state == s)].sum() for s in states]
        top = mask & (table.state == states[int(np.argmax(strength))])
        d2 = table.d2[top]
        out.append(float(np.sum(d2 * table.omega[top]) / d2.sum()))
        out.append(math.sqrt(share * float(table.d2[mask].sum())))
    return tuple(out)


def fit_samples(frequencies, lo_cm=1000.0, hi_cm=20000.0, n=400, windows=()) -> np.ndarray:
    """Indices of log-spaced sample frequencies on an existing grid."""
    f_cm = units.hartree_to_cm1(np.asarray(frequencies, dtype=float))
    targets = np.geomspace(lo_cm, hi_cm, n)
    idx = np.clip(np.searchsorted(f_cm, targets), 0, len(f_cm) - 1)
    idx = np.unique(idx)
    keep = (f_cm[idx] >= lo_cm) & (f_cm[idx] <= hi_cm) & ~in_windows(f_cm[idx], windows)
    return idx[keep]


def _levenberg(resid, jac, p0, max_iter, tol=1e-13):
    p = np.array(p0, dtype=float)
    r = resid(p)
    cost = float(r @ r)
    lam = 1e-3
    trace = [cost]
    for _ in range(max_iter):
        J = jac(p)
        A = J.T @ J
        g = J.T @ r
        while True:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A)), -g)
            trial = p + step
            if trial[0] > 0 and trial[2] > 0:
                r_new = resid(trial)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new <= cost:
                    break
            lam *= 4.0
            if lam > 1e12:
                return p, cost, trace, True
        done = cost - cost_new <= tol * max(cost, 1e-300) or np.all(
            np.abs(step) <= 1e-11 * np.abs(p)
        )
        p, r, cost = trial, r_new, cost_new
        trace.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if done:
            return p, cost, trace, True
    return p, cost, trace, False


def fit_effective(
    spectrum: ResponseSpectrum,
    core: CoreModel,
    windows: Sequence[tuple[float, float]] = (),
    table: TransitionTable | None = None,
    initial: tuple[float, float, float, float] | None = None,
    lo_cm: float = 1000.0,
    hi_cm: float = 20000.0,
    n_samples: int = 400,
    zero_guard: float = 0.05,
    max_iter: int = 200,
    name: str = "",
) -> EffectiveModel:
    """Fit the four effective parameters to Re alpha_iso - core.

    Residuals are relative. Samples where the target is within
    ``zero_guard`` times its median magnitude of zero are skipped, since a
    relative residual is meaningless at a zero crossing.
    """
    windows = tuple((float(lo), float(hi)) for lo, hi in windows)
    idx = fit_samples(spectrum.frequencies, lo_cm, hi_cm, n_samples, windows)
    if len(idx) < 8:
        raise FitError(f"only {len(idx)} usable samples outside the excluded windows")
    w = spectrum.frequencies[idx]
    target = np.real(spectrum.alpha_iso[idx]) - np.real(core_alpha(core, w))
    keep = np.abs(target) > zero_guard * np.median(np.abs(target))
    w, target = w[keep], target[keep]
    if len(w) < 8:
        raise FitError(f"only {len(w)} usable samples outside the excluded windows")

    if initial is None:
        if table is not None:
            initial = initial_guess(table)
        else:
            r = spectrum.first_resonance or units.cm1_to_hartree(hi_cm)
            initial = (1.1 * r, 2.0, 1.4 * r, 2.0)

    def resid(p):
        return _two_pole(p[0], p[1], p[2], p[3], w) / target - 1.0

    def jac(p):
        ws, ds, wp, dp = p
        out = np.empty((len(w), 4))
        for col, (om, dd) in ((0, (ws, ds)), (2, (wp, dp))):
            den = om**2 - w**2
            out[:, col] = -2.0 * dd**2 * (om**2 + w**2) / den**2
            out[:, col + 1] = 4.0 * om * dd / den
        return out / target[:, None]

    p, cost, trace, converged = _levenberg(resid, jac, initial, max_iter)
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", trace)
    rms = 100.0 * math.sqrt(cost / len(w))
    flags = []
    if p[0] >= p[2]:
        warnings.warn("fitted Sigma energy not below the Pi energy", RuntimeWarning)
        flags.append("degenerate-order")
    res = np.asarray(spectrum.resonances)
    lo_h, hi_h = units.cm1_to_hartree(lo_cm), units.cm1_to_hartree(hi_cm)
    inside = res[(res >= lo_h) & (res <= hi_h)]
    uncovered = inside[~in_windows(units.hartree_to_cm1(inside), windows)]
    if rms > 10.0 or (len(uncovered) and rms > 2.0):
        warnings.warn(
            f"fit rms {rms:.1f}% with {len(uncovered)} resonances outside the "
            "excluded windows: pole contamination",
            PoleContaminationWarning,
        )
        flags.append("pole-contamination")
    ws, ds, wp, dp = p
    return EffectiveModel(
        float(ws), abs(float(ds)), float(wp), abs(float(dp)), core, windows, rms, name,
        tuple(flags),
    )
