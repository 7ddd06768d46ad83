"""Wigner 3-j symbols in exact arithmetic and rotational prefactors.

The rotational weights turn the molecular-frame parallel and perpendicular
polarizabilities of a vibrational level into the laboratory-frame
polarizability of a given (J, M) sublevel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real


@dataclass(frozen=True)
class SqrtRational:
    """Exact number ``sign * sqrt(square)`` with a rational ``square``."""

    sign: int
    square: Fraction

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.sqrt(self.square)

    def __eq__(self, other):
        if isinstance(other, SqrtRational):
            return self.signed_square() == other.signed_square()
        if other == 0:
            return self.sign == 0
        return NotImplemented

    def __hash__(self):
        return hash(self.signed_square())

    def signed_square(self) -> Fraction:
        return self.sign * self.square

    def __neg__(self):
        return SqrtRational(-self.sign, self.square)


ZERO = SqrtRational(0, Fraction(0))


def _twice(x) -> int:
    """2x as an int, rejecting anything that is not a (half-)integer."""
    if isinstance(x, Fraction):
        two = 2 * x
        if two.denominator != 1:
            raise ValueError(f"{x} is not a half-integer")
        return int(two)
    if isinstance(x, Real):
        two = 2 * float(x)
        if two != round(two):
            raise ValueError(f"{x} is not a half-integer")
        return int(round(two))
    raise TypeError(f"expected a number, got {type(x).__name__}")


def wigner3j(j1, j2, j3, m1, m2, m3) -> SqrtRational:
    """Wigner 3-j symbol (j1 j2 j3; m1 m2 m3) by the Racah formula.

    All factorials are Python integers, so the result is exact. Couplings
    that violate a selection rule give exactly zero rather than an error.
    """
    tj1, tj2, tj3 = _twice(j1), _twice(j2), _twice(j3)
    tm1, tm2, tm3 = _twice(m1), _twice(m2), _twice(m3)

    if min(tj1, tj2, tj3) < 0:
        return ZERO
    if tm1 + tm2 + tm3 != 0:
        return ZERO
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return ZERO
    if (tj1 - tm1) % 2 or (tj2 - tm2) % 2 or (tj3 - tm3) % 2:
        return ZERO
    if tj3 < abs(tj1 - tj2) or tj3 > tj1 + tj2 or (tj1 + tj2 + tj3) % 2:
        return ZERO

    # integer arguments of the factorials below
    a = (tj1 + tj2 - tj3) // 2
    b = (tj1 - tj2 + tj3) // 2
    c = (-tj1 + tj2 + tj3) // 2
    total = (tj1 + tj2 + tj3) // 2
    f = math.factorial
    triangle = Fraction(f(a) * f(b) * f(c), f(total + 1))
    square = triangle * (
        f((tj1 + tm1) // 2) * f((tj1 - tm1) // 2)
        * f((tj2 + tm2) // 2) * f((tj2 - tm2) // 2)
        * f((tj3 + tm3) // 2) * f((tj3 - tm3) // 2)
    )

    t1 = (tj2 - tj3 - tm1) // 2
    t2 = (tj1 - tj3 + tm2) // 2
    t3 = a
    t4 = (tj1 - tm1) // 2
    t5 = (tj2 + tm2) // 2
    tmin = max(0, t1, t2)
    tmax = min(t3, t4, t5)
    series = Fraction(0)
    for t in range(tmin, tmax + 1):
        denom = f(t) * f(t - t1) * f(t - t2) * f(t3 - t) * f(t4 - t) * f(t5 - t)
        series += Fraction((-1) ** t, denom)
    if series == 0:
        return ZERO

    phase = (tj1 - tj2 - tm3) // 2
    sign = (-1) ** (phase % 2) * (1 if series > 0 else -1)
    return SqrtRational(sign, square * series * series)


def wigner3j_float(j1, j2, j3, m1, m2, m3) -> float:
    return float(wigner3j(j1, j2, j3, m1, m2, m3))


@dataclass(frozen=True)
class RotationalWeights:
    J: int
    M: int
    w_par: Fraction
    w_perp: Fraction


def _check_jm(J: int, M: int) -> None:
    if J < 0 or abs(M) > J:
        raise ValueError(f"need 0 <= |M| <= J, got J={J}, M={M}")


def rotational_weights(J: int, M: int) -> RotationalWeights:
    """Weights of the parallel and perpendicular parts in alpha_{vJM}.

    J = 0 goes through the same closed form (the denominator is -3).
    """
    _check_jm(J, M)
    denom = (2 * J + 3) * (2 * J - 1)
    w_par = Fraction(2 * J * J + 2 * J - 1 - 2 * M * M, denom)
    w_perp = Fraction(2 * J * J + 2 * J - 2 + 2 * M * M, denom)
    return RotationalWeights(J, M, w_par, w_perp)


def anisotropy_weight(J: int, M: int) -> Fraction:
    """Coefficient of the anisotropy in alpha_{vJM} = iso + weight * gamma."""
    _check_jm(J, M)
    return Fraction(2 * J * (J + 1) - 6 * M * M, 3 * (2 * J + 3) * (2 * J - 1))


def weights_from_3j(J: int, M: int) -> tuple[Fraction, Fraction]:
    """Parallel/perpendicular weights summed directly from 3-j symbols.

    Sums |d_nn'|^2 over J' (and q = +-1 for the perpendicular part) for a
    Sigma ground level, with the (2J+1)(2J'+1) reduced-matrix-element factor
    and all J' levels treated as degenerate. Serves as a cross-check of the
    closed forms above.
    """
    _check_jm(J, M)
    par = Fraction(0)
    perp = Fraction(0)
    for Jp in (J - 1, J, J + 1):
        if Jp < 0:
            continue
        lab = wigner3j(Jp, 1, J, -M, 0, M).square
        deg = (2 * J + 1) * (2 * Jp + 1)
        par += deg * lab * wigner3j(Jp, 1, J, 0, 0, 0).square
        for q in (1, -1):
            perp += deg * lab * wigner3j(Jp, 1, J, -q, q, 0).square
    # perpendicular weight refers to |d_x|^2; each of q = +-1 carries it once
    return par, perp
