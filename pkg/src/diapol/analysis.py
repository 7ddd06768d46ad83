"""Post-processing of polarizability spectra.

Frequencies passed to the spectrum callables are in hartree; ranges, windows
and reported roots are in cm-1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import units
from .response import ResponseSpectrum, TransitionTable

Spectrum = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEP_CM = 0.02
SENSITIVITY_OFFSET_CM = 5.0
ROOT_TOL_CM = 1e-9
_CHUNK = 200_000


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Root:
    omega_cm: float
    alpha_au: float
    alpha_mhz: float
    sensitivity_pct: float | None = None


@dataclass(frozen=True)
class RejectedRoot:
    omega_cm: float
    reason: str


@dataclass
class MagicReport:
    roots: list[Root] = field(default_factory=list)
    excluded: list[RejectedRoot] = field(default_factory=list)
    windows: list[tuple[float, float]] = field(default_factory=list)
    ratios: dict[str, float] = field(default_factory=dict)
    alpha_at: dict[str, float] = field(default_factory=dict)
    diagnostic: str | None = None

    def to_json(self) -> str:
        doc = asdict(self)
        doc["units"] = {"omega": "cm-1", "alpha_au": "au", "alpha_mhz": "MHz/(W/cm2)",
                        "sensitivity_pct": "percent"}
        return json.dumps(doc, indent=2, default=float)

    def table(self) -> str:
        """Fixed-width text: root, alpha, sensitivity, alpha at 1064/1550 nm, ratio."""
        head = (f"{'omega0 (cm-1)':>16} {'alpha0 (MHz/(W/cm2))':>22} {'sens +5cm-1 (%)':>16} "
                f"{'alpha(1064nm)':>14} {'alpha(1550nm)':>14} {'ratio(1550nm)':>14}")
        a1 = self.alpha_at.get("1064", math.nan)
        a2 = self.alpha_at.get("1550", math.nan)
        r = self.ratios.get("1550", math.nan)
        lines = [head]
        if not self.roots:
            lines.append(f"{'-':>16} {'-':>22} {'-':>16} {a1:14.6e} {a2:14.6e} {r:14.6f}")
        for root in self.roots:
            s = math.nan if root.sensitivity_pct is None else root.sensitivity_pct
            lines.append(f"{root.omega_cm:16.6f} {root.alpha_mhz:22.6e} {s:16.4f} "
                         f"{a1:14.6e} {a2:14.6e} {r:14.6f}")
        return "\n".join(lines)


def _real(f: Spectrum, w) -> np.ndarray:
    return np.real(np.asarray(f(w)))


def _in_window(x_cm: float, windows) -> bool:
    return any(lo <= x_cm <= hi for lo, hi in windows)


def _bisect(f, a, b, fa, tol_h):
    """Bisection to an interval of ``tol_h`` hartree; returns the midpoint."""
    while b - a > tol_h:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _scan_roots(diff, scale, lo_cm, hi_cm, step_cm, windows, jump_ratio):
    """Bracket sign changes of ``diff`` on a uniform grid and polish them.

    A bracket whose end values add up to more than ``jump_ratio`` times the
    local scale is a pole or a resonance, not a smooth crossing.
    """
    if not hi_cm > lo_cm or step_cm <= 0:
        raise AnalysisError("need lo < hi and step > 0")
    n = int(round((hi_cm - lo_cm) / step_cm)) + 1
    grid_cm = lo_cm + step_cm * np.arange(n)
    grid_cm[-1] = min(grid_cm[-1], hi_cm)
    tol_h = units.cm1_to_hartree(ROOT_TOL_CM)
    f_scalar = lambda x: float(diff(np.array([x]))[0])

    roots, rejected = [], []
    zeros = 0
    prev_w = prev_f = None
    for start in range(0, n, _CHUNK):
        w = units.cm1_to_hartree(grid_cm[start : start + _CHUNK])
        f = diff(w)
        zeros += int(np.sum(f == 0.0))
        if prev_w is not None:
            w = np.concatenate([prev_w, w])
            f = np.concatenate([prev_f, f])
        # non-finite samples (a grid point on a pole) are stepped over; a
        # sign change across them is a pole
        ok = np.nonzero(np.isfinite(f))[0]
        sa, sb = np.sign(f[ok[:-1]]), np.sign(f[ok[1:]])
        hits = np.nonzero((sa * sb < 0) | ((sa == 0) & (sb != 0)))[0]
        for k in hits:
            i, j = ok[k], ok[k + 1]
            a, b = w[i], w[j]
            s = scale(np.array([a, b])).max()
            if j > i + 1 or abs(f[i]) + abs(f[j]) > jump_ratio * s:
                rejected.append(RejectedRoot(float(units.hartree_to_cm1(0.5 * (a + b))), "pole or resonance"))
                continue
            x = a if f[i] == 0.0 else _bisect(f_scalar, a, b, f[i], tol_h)
            x_cm = float(units.hartree_to_cm1(x))
            if _in_window(x_cm, windows):
                rejected.append(RejectedRoot(x_cm, "inside excluded window"))
            else:
                roots.append(x)
        # carry everything from the last finite sample into the next chunk
        last = int(ok[-1]) if len(ok) else 0
        prev_w, prev_f = w[last:], f[last:]
    return roots, rejected, zeros, n


def find_magic(
    alpha_g: Spectrum,
    alpha_f: Spectrum,
    range_cm: tuple[float, float] = (0.0, 20000.0),
    excluded: Sequence[tuple[float, float]] = (),
    step_cm: float = DEFAULT_STEP_CM,
    jump_ratio: float = 0.5,
    ratio_wavelengths: Sequence[float] = (1064.0, 1550.0),
) -> MagicReport:
    """Frequencies where Re alpha_g = Re alpha_f.

    Sensitivity is 100 (alpha_g - alpha_f)/alpha_f evaluated 5 cm-1 above
    each root.
    """
    diff = lambda w: _real(alpha_g, w) - _real(alpha_f, w)
    scale = lambda w: np.abs(_real(alpha_f, w))
    windows = [(float(lo), float(hi)) for lo, hi in excluded]
    roots, rejected, zeros, n = _scan_roots(diff, scale, *range_cm, step_cm, windows, jump_ratio)
    report = MagicReport(windows=windows)
    if zeros > max(10, n // 100):
        report.diagnostic = (
            f"difference vanishes identically on {zeros} of {n} grid points; "
            "the two spectra appear identical"
        )
        return report
    report.excluded = rejected
    for x in roots:
        a = float(_real(alpha_f, np.array([x]))[0])
        x5 = x + units.cm1_to_hartree(SENSITIVITY_OFFSET_CM)
        g5 = float(_real(alpha_g, np.array([x5]))[0])
        f5 = float(_real(alpha_f, np.array([x5]))[0])
        sens = 100.0 * (g5 - f5) / f5 if f5 != 0 else None
        report.roots.append(Root(float(units.hartree_to_cm1(x)), a, float(units.au_to_mhz(a)), sens))
    for wl in ratio_wavelengths:
        key = f"{wl:g}"
        try:
            report.ratios[key] = ratio_at(alpha_g, alpha_f, wl)
            w = np.array([units.wavelength_nm_to_hartree(wl)])
            report.alpha_at[key] = units.au_to_mhz(float(_real(alpha_g, w)[0]))
        except AnalysisError:
            pass
    return report


def find_tuneout(
    alpha: Spectrum,
    range_cm: tuple[float, float] = (0.0, 20000.0),
    excluded: Sequence[tuple[float, float]] = (),
    step_cm: float = DEFAULT_STEP_CM,
    jump_ratio: float = 0.5,
) -> list[float]:
    """Frequencies (cm-1) where Re alpha crosses zero outside poles.

    With no reference polarizability the pole test uses the median of
    |Re alpha| over a coarse pass of the range as its scale.
    """
    lo, hi = range_cm
    coarse = units.cm1_to_hartree(np.linspace(lo, hi, 2001))
    med = float(np.median(np.abs(_real(alpha, coarse))))
    scale = lambda w: np.full(len(w), med)
    windows = [(float(a), float(b)) for a, b in excluded]
    roots, _, _, _ = _scan_roots(
        lambda w: _real(alpha, w), scale, lo, hi, step_cm, windows, jump_ratio
    )
    return [float(units.hartree_to_cm1(x)) for x in roots]


def ratio_at(alpha_g: Spectrum, alpha_f: Spectrum, wavelength_nm: float) -> float:
    """Re alpha_g / Re alpha_f at the given laser wavelength."""
    w = np.array([units.wavelength_nm_to_hartree(wavelength_nm)])
    f = float(_real(alpha_f, w)[0])
    if abs(f) < 1e-12:
        raise AnalysisError(f"reference polarizability vanishes at {wavelength_nm} nm")
    return float(_real(alpha_g, w)[0]) / f


# ---------------------------------------------------------------------------
# regions


def classify_regions(
    spectrum: ResponseSpectrum, threshold: float = 1000.0
) -> list[tuple[tuple[float, float], str]]:
    """Split the scan into regions I (below resonances), II (resonant), III.

    II covers contiguous frequencies where Im alpha_iso exceeds ``threshold``
    times its median over the scan. Everything below the first electronic
    resonance (or the first II window) is I, everything else III.
    """
    w_cm = units.hartree_to_cm1(spectrum.frequencies)
    im = np.abs(np.imag(spectrum.alpha_iso))
    med = float(np.median(im))
    if math.isinf(threshold) or med == 0.0:
        resonant = np.zeros(len(w_cm), dtype=bool) if math.isinf(threshold) else im > 0
    else:
        resonant = im > threshold * med
    first = spectrum.first_resonance
    first_cm = units.hartree_to_cm1(first) if first is not None else math.inf
    if resonant.any():
        first_cm = min(first_cm, float(w_cm[np.argmax(resonant)]))
    labels = np.where(resonant, "II", np.where(w_cm < first_cm, "I", "III"))

    regions = []
    start = 0
    for i in range(1, len(w_cm) + 1):
        if i == len(w_cm) or labels[i] != labels[start]:
            regions.append(((float(w_cm[start]), float(w_cm[i - 1])), str(labels[start])))
            start = i
    return regions


# ---------------------------------------------------------------------------
# resonance windows from a transition table


def resonance_windows(
    table: TransitionTable, rel: float = 1e-3, pad_cm: float = 50.0, open_above_pi: bool = True
) -> list[tuple[float, float]]:
    """Frequency bands (cm-1) of the strong electronic lines of each state.

    A band spans the lines whose squared dipole exceeds ``rel`` times the
    strongest line of the same state, padded on both sides. With
    ``open_above_pi`` everything above the onset of the lowest Pi band is one
    open window, as the two-transition model only describes the region
    below it. Overlapping bands are merged.
    """
    bands = []
    pi_onset = math.inf
    elec = table.origin == "electronic"
    for state in sorted(set(table.state[elec])):
        m = elec & (table.state == state)
        d2 = table.d2[m]
        if d2.max() <= 0:
            continue
        strong = units.hartree_to_cm1(table.omega[m][d2 >= rel * d2.max()])
        lo, hi = float(strong.min()) - pad_cm, float(strong.max()) + pad_cm
        if open_above_pi and not table.parallel[m][0]:
            pi_onset = min(pi_onset, lo)
        bands.append((lo, hi))
    if open_above_pi and math.isfinite(pi_onset):
        bands = [(lo, min(hi, pi_onset)) for lo, hi in bands if lo < pi_onset]
        bands.append((pi_onset, math.inf))
    bands.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in bands:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged
