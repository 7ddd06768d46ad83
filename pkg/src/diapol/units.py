"""Physical constants and unit conversions.

Every module takes its constants from here. Internally everything is in
atomic units (hbar = e = m_e = a0 = 1).
"""

from __future__ import annotations

import math

# Conversion factors as printed with the polarizability tables.
CM1_PER_HARTREE = 219474.63137
NM_PER_BOHR = 0.052917721092
DEBYE_PER_AU = 2.54158059
MHZ_W_CM2_PER_AU = 4.6883572e-8

HARTREE_PER_CM1 = 1.0 / CM1_PER_HARTREE
BOHR_PER_NM = 1.0 / NM_PER_BOHR

# CODATA 2010, same adjustment as the length/energy factors above.
AU_TIME_S = 2.418884326502e-17
ME_PER_AMU = 1822.8884845

# tag -> (dimension class, number of these units in one atomic unit)
_UNITS: dict[str, tuple[str, float]] = {
    "hartree": ("energy", 1.0),
    "cm-1": ("energy", CM1_PER_HARTREE),
    "bohr": ("length", 1.0),
    "nm": ("length", NM_PER_BOHR),
    "angstrom": ("length", 10.0 * NM_PER_BOHR),
    "debye": ("dipole", DEBYE_PER_AU),
    "MHz/(W/cm2)": ("polarizability", MHZ_W_CM2_PER_AU),
}
_ALIASES = {
    "cm^-1": "cm-1",
    "cm1": "cm-1",
    "a0": "bohr",
    "D": "debye",
    "MHz/[W/cm2]": "MHz/(W/cm2)",
}
# Bare "au" is the atomic unit of whatever class the other tag belongs to.
ATOMIC = ("au", "a.u.")


class UnitError(ValueError):
    """Raised for unknown tags or conversions across dimension classes."""


def _lookup(tag: str) -> tuple[str, float]:
    tag = _ALIASES.get(tag, tag)
    try:
        return _UNITS[tag]
    except KeyError:
        raise UnitError(f"unknown unit {tag!r}") from None


def dimension(tag: str) -> str | None:
    """Dimension class of a unit tag; None for the class-agnostic 'au'."""
    if tag in ATOMIC:
        return None
    return _lookup(tag)[0]


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between two units of the same dimension class.

    ``"au"`` takes the class of the other argument, so
    ``convert(1.0, "au", "MHz/(W/cm2)")`` converts a polarizability.
    """
    src = None if dimension(from_unit) is None else _lookup(from_unit)
    dst = None if dimension(to_unit) is None else _lookup(to_unit)
    if src is not None and dst is not None and src[0] != dst[0]:
        raise UnitError(
            f"cannot convert {from_unit!r} ({src[0]}) to {to_unit!r} ({dst[0]})"
        )
    if from_unit == to_unit:
        return value
    # one division into atomic units, one multiplication out of them
    if src is not None and src[1] != 1.0:
        value = value / src[1]
    if dst is not None and dst[1] != 1.0:
        value = value * dst[1]
    return value


def cm1_to_hartree(x):
    return x / CM1_PER_HARTREE


def hartree_to_cm1(x):
    return x * CM1_PER_HARTREE


def au_to_mhz(alpha):
    """Polarizability in a.u. to MHz/(W/cm^2)."""
    return alpha * MHZ_W_CM2_PER_AU


def width_from_lifetime(lifetime_ns: float) -> float:
    """Energy width hbar/tau in hartree for a lifetime in nanoseconds."""
    if not lifetime_ns > 0:
        raise ValueError(f"lifetime must be positive, got {lifetime_ns}")
    return AU_TIME_S / (lifetime_ns * 1e-9)


def wavelength_nm_to_hartree(wavelength_nm: float) -> float:
    if not wavelength_nm > 0:
        raise ValueError("wavelength must be positive")
    return cm1_to_hartree(1e7 / wavelength_nm)


def amu_to_me(mass_amu: float) -> float:
    return mass_amu * ME_PER_AMU


def reduced_mass_amu(m1: float, m2: float) -> float:
    return m1 * m2 / (m1 + m2)
