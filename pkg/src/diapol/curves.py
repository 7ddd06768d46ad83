"""Potential energy curves, dipole functions and spin-orbit couplings.

Text format (all three kinds)::

    # units: bohr cm-1        (length unit, then energy or dipole unit)
    # label: X
    # symmetry: Sigma
    # asymptote: 0.0          (file energy unit)
    # C6: 4.7e3               (atomic units, hartree * bohr^6; repeatable)
    # stitch_R: 25.0
    3.0   1.2e4
    3.1   1.0e4
    ...

Dipole files carry ``# from:``, ``# to:`` and ``# q:`` directives, spin-orbit
files ``# states: A b``. A ``# model morse De=.. a=.. Re=..`` or
``# model harmonic k=.. Re=..`` directive (parameters in atomic units) replaces
the energy column by the analytic model sampled on the file grid.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import units

MIN_POINTS = 8


class CurveError(ValueError):
    """Base class for problems with curve data."""


class CurveFormatError(CurveError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class CurveValidationError(CurveError):
    pass


class DomainError(ValueError):
    pass


def _check_grid(R: np.ndarray, what: str) -> None:
    if R.ndim != 1 or len(R) < MIN_POINTS:
        raise CurveValidationError(f"{what}: need at least {MIN_POINTS} points")
    if not np.all(np.diff(R) > 0):
        k = int(np.argmin(np.diff(R) > 0)) + 1
        raise CurveValidationError(
            f"{what}: R must be strictly increasing (point {k + 1}, R={R[k]})"
        )
    if R[0] <= 0:
        raise CurveValidationError(f"{what}: R must be positive")


def _positive_R(R):
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise DomainError("R must be positive")
    return R


# ---------------------------------------------------------------------------
# potential curves


def _fit_wall(R: np.ndarray, V: np.ndarray):
    """A, b, c of A exp(-b R) + c through the three innermost points.

    Returns None when the points are not repulsive and convex, in which case
    the caller extrapolates linearly.
    """
    r0, r1, r2 = R[:3]
    v0, v1, v2 = V[:3]
    if not (v0 > v1 > v2):
        return None
    target = (v0 - v1) / (v1 - v2)

    def ratio(b):
        e0, e1, e2 = math.exp(-b * (r0 - r0)), math.exp(-b * (r1 - r0)), math.exp(-b * (r2 - r0))
        return (e0 - e1) / (e1 - e2)

    # b -> 0 gives the linear ratio; larger b gives a steeper wall
    lo, hi = 1e-9, 1.0
    if target <= ratio(lo) * (1 + 1e-12):
        return None
    while ratio(hi) < target:
        hi *= 2.0
        if hi > 1e4:
            return None
    b = brentq(lambda x: ratio(x) - target, lo, hi, xtol=1e-14, rtol=1e-15)
    # A measured relative to r0 to keep the exponentials in range
    A = (v0 - v1) / (1.0 - math.exp(-b * (r1 - r0)))
    c = v0 - A
    return A, b, c


@dataclass(frozen=True, eq=False)
class PotentialCurve:
    """One electronic state's potential, in bohr and hartree.

    Inside the table the curve is a cubic spline. Beyond ``stitch_R`` it is
    the analytic tail ``asymptote - sum C_n / R^n``; the spline is clamped to
    the tail value and slope there, so the join is C1. Below the first point
    an exponential wall through the three innermost points is used.
    """

    label: str
    R: np.ndarray
    V: np.ndarray
    symmetry: str = "Sigma"
    spin: str = "singlet"
    long_range: tuple[tuple[int, float], ...] = ()
    asymptote: float | None = None
    stitch_R: float | None = None
    _spline: CubicSpline = field(init=False, repr=False)
    _wall: tuple | None = field(init=False, repr=False)

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        V = np.array(self.V, dtype=float)
        if R.shape != V.shape:
            raise CurveValidationError(f"{self.label}: R and V lengths differ")
        _check_grid(R, self.label)
        if self.symmetry not in ("Sigma", "Pi"):
            raise CurveValidationError(f"{self.label}: symmetry must be Sigma or Pi")
        if self.spin not in ("singlet", "triplet"):
            raise CurveValidationError(f"{self.label}: spin must be singlet or triplet")
        long_range = tuple((int(n), float(c)) for n, c in self.long_range)
        for n, _ in long_range:
            if n < 3:
                raise CurveValidationError(f"{self.label}: C_n needs n >= 3, got {n}")
        if long_range and self.asymptote is None:
            raise CurveValidationError(
                f"{self.label}: long-range coefficients given without an asymptote"
            )
        asymptote = float(V[-1]) if self.asymptote is None else float(self.asymptote)
        stitch = float(R[-1]) if self.stitch_R is None else float(self.stitch_R)
        if long_range and not (R[0] < stitch <= R[-1]):
            raise CurveValidationError(f"{self.label}: stitch_R outside the table")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "long_range", long_range)
        object.__setattr__(self, "asymptote", asymptote)
        object.__setattr__(self, "stitch_R", stitch if long_range else float(R[-1]))

        if long_range:
            keep = R < stitch
            nodes = np.append(R[keep], stitch)
            values = np.append(V[keep], self.tail(stitch))
            if len(nodes) < 4:
                raise CurveValidationError(f"{self.label}: too few points below stitch_R")
            spline = CubicSpline(
                nodes, values, bc_type=("not-a-knot", (1, self.tail_derivative(stitch)))
            )
        else:
            spline = CubicSpline(R, V, bc_type="not-a-knot")
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_wall", _fit_wall(R, V))

    @property
    def R_min(self) -> float:
        return float(self.R[0])

    @property
    def R_max(self) -> float:
        return float(self.R[-1])

    @property
    def stitch_mismatch(self) -> float:
        """Tabulated minus tail value at the stitch point (0 without a tail)."""
        if not self.long_range:
            return 0.0
        k = np.searchsorted(self.R, self.stitch_R)
        if k < len(self.R) and self.R[k] == self.stitch_R:
            return float(self.V[k] - self.tail(self.stitch_R))
        return float(np.interp(self.stitch_R, self.R, self.V) - self.tail(self.stitch_R))

    def tail(self, R):
        R = np.asarray(R, dtype=float)
        out = np.full_like(R, self.asymptote)
        for n, c in self.long_range:
            out = out - c / R**n
        return out if out.ndim else float(out)

    def tail_derivative(self, R):
        R = np.asarray(R, dtype=float)
        out = np.zeros_like(R)
        for n, c in self.long_range:
            out = out + n * c / R ** (n + 1)
        return out if out.ndim else float(out)

    def _wall_value(self, R):
        if self._wall is None:
            slope = float(self._spline(self.R[0], 1))
            return self.V[0] + slope * (R - self.R[0])
        A, b, c = self._wall
        return A * np.exp(-b * (R - self.R[0])) + c

    def __call__(self, R):
        return evaluate(self, R)

    def derivative(self, R):
        R = _positive_R(R)
        scalar = R.ndim == 0
        R = np.atleast_1d(R)
        out = np.asarray(self._spline(R, 1), dtype=float)
        if self.long_range:
            out = np.where(R > self.stitch_R, self.tail_derivative(R), out)
        else:
            out = np.where(R > self.R_max, 0.0, out)
        inner = R < self.R_min
        if np.any(inner):
            if self._wall is None:
                out[inner] = float(self._spline(self.R[0], 1))
            else:
                A, b, _ = self._wall
                out[inner] = -A * b * np.exp(-b * (R[inner] - self.R[0]))
        return float(out[0]) if scalar else out

    @property
    def minimum(self) -> tuple[float, float]:
        """(R, V) of the lowest tabulated point, refined on the spline."""
        fine = np.linspace(self.R_min, self.R_max, 20 * len(self.R))
        v = self(fine)
        k = int(np.argmin(v))
        return float(fine[k]), float(v[k])


def evaluate(curve: PotentialCurve, R):
    """Potential in hartree at R (bohr); scalars in, scalars out."""
    R = _positive_R(R)
    scalar = R.ndim == 0
    R = np.atleast_1d(R)
    out = np.asarray(curve._spline(R), dtype=float)
    if curve.long_range:
        outer = R > curve.stitch_R
        out[outer] = curve.tail(R[outer])
    else:
        out[R > curve.R_max] = curve.V[-1]
    inner = R < curve.R_min
    if np.any(inner):
        out[inner] = curve._wall_value(R[inner])
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# R-dependent couplings: dipoles and spin-orbit


class _Tabulated:
    """Spline with constant extrapolation beyond both ends."""

    def _build(self, R, y, what):
        R = np.array(R, dtype=float)
        y = np.array(y, dtype=float)
        if R.shape != y.shape:
            raise CurveValidationError(f"{what}: column lengths differ")
        _check_grid(R, what)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "_spline", CubicSpline(R, y, bc_type="not-a-knot"))
        return y

    def __call__(self, R):
        R = _positive_R(R)
        scalar = R.ndim == 0
        Rc = np.clip(np.atleast_1d(R), self.R[0], self.R[-1])
        out = np.asarray(self._spline(Rc), dtype=float)
        return float(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class DipoleFunction(_Tabulated):
    """Permanent (from == to) or transition dipole in atomic units.

    ``q`` is the molecular-frame component: 0 for parallel (Sigma-Sigma),
    +-1 for perpendicular (Sigma-Pi).
    """

    from_state: str
    to_state: str
    q: int
    R: np.ndarray
    d: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        if self.q not in (0, 1, -1):
            raise CurveValidationError(f"dipole q must be 0 or +-1, got {self.q}")
        d = self._build(self.R, self.d, f"dipole {self.from_state}-{self.to_state}")
        object.__setattr__(self, "d", d)

    @property
    def permanent(self) -> bool:
        return self.from_state == self.to_state


def evaluate_dipole(dipole: DipoleFunction, R):
    return dipole(R)


@dataclass(frozen=True, eq=False)
class SpinOrbitCoupling(_Tabulated):
    state_a: str
    state_b: str
    R: np.ndarray
    W: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        W = self._build(self.R, self.W, f"spin-orbit {self.state_a}/{self.state_b}")
        object.__setattr__(self, "W", W)


# ---------------------------------------------------------------------------
# analytic model curves


def morse(R, De: float, a: float, Re: float):
    """Morse potential with its minimum at zero and asymptote De."""
    return De * (1.0 - np.exp(-a * (np.asarray(R, dtype=float) - Re))) ** 2


def harmonic(R, k: float, Re: float):
    return 0.5 * k * (np.asarray(R, dtype=float) - Re) ** 2


_MODELS = {"morse": (morse, ("De", "a", "Re")), "harmonic": (harmonic, ("k", "Re"))}


def model_curve(kind: str, R, label: str = "X", asymptote: float | None = None, **params):
    """A PotentialCurve sampling an analytic model on the grid R."""
    try:
        func, names = _MODELS[kind]
    except KeyError:
        raise CurveValidationError(f"unknown model {kind!r}") from None
    missing = [n for n in names if n not in params]
    if missing:
        raise CurveValidationError(f"model {kind} missing parameters {missing}")
    V = func(R, **{n: float(params[n]) for n in names})
    if kind == "morse":
        De = float(params["De"])
        if asymptote is None:
            asymptote = De
        V = V + (asymptote - De)
    return PotentialCurve(label=label, R=np.asarray(R, dtype=float), V=V, asymptote=asymptote)


# ---------------------------------------------------------------------------
# file parsing

_DIRECTIVE = re.compile(r"^#\s*([A-Za-z_][\w]*)\s*:?\s*(.*)$")


@dataclass
class _Table:
    path: str
    header: dict
    lines: list[int]
    columns: list[list[float]]
    long_range: list[tuple[int, float]]


def _read_table(path) -> _Table:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None
    header: dict = {}
    long_range: list[tuple[int, float]] = []
    lines: list[int] = []
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _DIRECTIVE.match(line)
            if not m:
                continue
            key, value = m.group(1), m.group(2).strip()
            cn = re.fullmatch(r"C(\d+)", key)
            if cn:
                try:
                    long_range.append((int(cn.group(1)), float(value.split()[0])))
                except (ValueError, IndexError):
                    raise CurveFormatError(f"bad {key} value {value!r}", path, lineno) from None
            else:
                header[key.lower()] = value
            continue
        parts = line.split()
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise CurveFormatError(f"cannot parse {raw.strip()!r}", path, lineno) from None
        if rows and len(row) != len(rows[0]):
            raise CurveFormatError(
                f"expected {len(rows[0])} columns, got {len(row)}", path, lineno
            )
        if rows and not row[0] > rows[-1][0]:
            raise CurveFormatError(
                f"R not strictly increasing ({row[0]} after {rows[-1][0]})", path, lineno
            )
        rows.append(row)
        lines.append(lineno)
    if not rows:
        raise CurveFormatError("no data rows", path)
    columns = [list(c) for c in zip(*rows)]
    return _Table(str(path), header, lines, columns, long_range)


def _units(table: _Table, default_length: str, default_second: str) -> tuple[str, str]:
    spec = table.header.get("units", "").split()
    length = spec[0] if len(spec) > 0 else default_length
    second = spec[1] if len(spec) > 1 else default_second
    return length, second


def _to_au(values, unit: str):
    return np.array([units.convert(v, unit, "au") for v in values], dtype=float)


def _float_header(table: _Table, key: str) -> float | None:
    if key not in table.header:
        return None
    try:
        return float(table.header[key].split()[0])
    except (ValueError, IndexError):
        raise CurveFormatError(f"bad {key} value {table.header[key]!r}", table.path) from None


def load_curve(path) -> PotentialCurve:
    """Read a potential curve file into bohr/hartree."""
    table = _read_table(path)
    length_unit, energy_unit = _units(table, "bohr", "cm-1")
    try:
        R = _to_au(table.columns[0], length_unit)
        label = table.header.get("label", Path(path).stem)
        asymptote = _float_header(table, "asymptote")
        if asymptote is not None:
            asymptote = units.convert(asymptote, energy_unit, "au")
        stitch = _float_header(table, "stitch_r")
        if stitch is not None:
            stitch = units.convert(stitch, length_unit, "au")
        model = table.header.get("model")
        if model:
            kind, *args = model.split()
            params = {}
            for arg in args:
                k, _, v = arg.partition("=")
                params[k] = float(v)
            V = model_curve(kind, R, label=label, asymptote=asymptote, **params).V
            if asymptote is None and kind == "morse":
                asymptote = params["De"]
        else:
            if len(table.columns) < 2:
                raise CurveFormatError("need two columns R V", table.path)
            V = _to_au(table.columns[1], energy_unit)
        return PotentialCurve(
            label=label,
            R=R,
            V=V,
            symmetry=table.header.get("symmetry", "Sigma"),
            spin=table.header.get("spin", "singlet"),
            long_range=tuple(table.long_range),
            asymptote=asymptote,
            stitch_R=stitch,
        )
    except (CurveValidationError, units.UnitError) as exc:
        raise CurveFormatError(str(exc), table.path) from None


def load_dipole(path) -> DipoleFunction:
    table = _read_table(path)
    length_unit, dipole_unit = _units(table, "bohr", "au")
    if len(table.columns) < 2:
        raise CurveFormatError("need two columns R d", table.path)
    try:
        from_state = table.header["from"].split()[0]
        to_state = table.header.get("to", from_state).split()[0]
    except KeyError:
        raise CurveFormatError("dipole file needs a '# from:' directive", table.path) from None
    q = int(float(table.header.get("q", "0").split()[0]))
    try:
        return DipoleFunction(
            from_state=from_state,
            to_state=to_state,
            q=q,
            R=_to_au(table.columns[0], length_unit),
            d=_to_au(table.columns[1], dipole_unit),
        )
    except (CurveValidationError, units.UnitError) as exc:
        raise CurveFormatError(str(exc), table.path) from None


def load_spin_orbit(path) -> SpinOrbitCoupling:
    table = _read_table(path)
    length_unit, energy_unit = _units(table, "bohr", "cm-1")
    states = table.header.get("states", "").split()
    if len(states) != 2:
        raise CurveFormatError("spin-orbit file needs '# states: <a> <b>'", table.path)
    if len(table.columns) < 2:
        raise CurveFormatError("need two columns R W", table.path)
    try:
        return SpinOrbitCoupling(
            state_a=states[0],
            state_b=states[1],
            R=_to_au(table.columns[0], length_unit),
            W=_to_au(table.columns[1], energy_unit),
        )
    except (CurveValidationError, units.UnitError) as exc:
        raise CurveFormatError(str(exc), table.path) from None


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_curve(path, curve: PotentialCurve, energy_unit: str = "cm-1") -> None:
    """Write a curve in the text format (lengths in bohr)."""
    lines = [
        f"# units: bohr {energy_unit}",
        f"# label: {curve.label}",
        f"# symmetry: {curve.symmetry}",
        f"# spin: {curve.spin}",
        f"# asymptote: {_fmt(units.convert(curve.asymptote, 'hartree', energy_unit))}",
    ]
    for n, c in curve.long_range:
        lines.append(f"# C{n}: {_fmt(c)}")
    if curve.long_range and curve.stitch_R != curve.R_max:
        lines.append(f"# stitch_R: {_fmt(curve.stitch_R)}")
    for r, v in zip(curve.R, curve.V):
        lines.append(f"{_fmt(r)} {_fmt(units.convert(float(v), 'hartree', energy_unit))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_dipole(path, dipole: DipoleFunction) -> None:
    lines = [
        "# units: bohr au",
        f"# from: {dipole.from_state}",
        f"# to: {dipole.to_state}",
        f"# q: {dipole.q}",
    ]
    lines += [f"{_fmt(r)} {_fmt(d)}" for r, d in zip(dipole.R, dipole.d)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_spin_orbit(path, soc: SpinOrbitCoupling) -> None:
    lines = ["# units: bohr hartree", f"# states: {soc.state_a} {soc.state_b}"]
    lines += [f"{_fmt(r)} {_fmt(w)}" for r, w in zip(soc.R, soc.W)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
