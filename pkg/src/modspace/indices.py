"""Dilation exponents of M^{p,q}, their region tables, and critical orders.

Everything here works on reciprocal exponents (1/p, 1/q) in [0, 1]^2 and
uses exact rational arithmetic whenever the inputs are rational, so that
boundary agreement between the piecewise formulas is an equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

from .grid import PreconditionError

__all__ = [
    "ExponentPair",
    "RegionLabel",
    "CriticalOrder",
    "mu1",
    "mu2",
    "mu1_piecewise",
    "mu2_piecewise",
    "gap",
    "gap_piecewise",
    "region",
    "critical_order",
]

HALF = Fraction(1, 2)


def _reciprocal(p) -> Fraction | float:
    if isinstance(p, Real) and math.isinf(p):
        return Fraction(0)
    if isinstance(p, Rational):
        r = 1 / Fraction(p)
    elif isinstance(p, float):
        # repr round-trips, so 1.5 becomes exactly 3/2
        r = 1 / Fraction(repr(p))
    else:
        raise TypeError(f"exponent must be a real number, got {p!r}")
    if not 0 <= r <= 1:
        raise PreconditionError(f"exponent must lie in [1, inf], got {p}")
    return r


@dataclass(frozen=True)
class ExponentPair:
    """Exponents (p, q) stored through their exact reciprocals."""

    inv_p: Fraction
    inv_q: Fraction

    def __init__(self, p, q):
        object.__setattr__(self, "inv_p", _reciprocal(p))
        object.__setattr__(self, "inv_q", _reciprocal(q))

    @classmethod
    def from_reciprocals(cls, inv_p, inv_q) -> "ExponentPair":
        a, b = Fraction(inv_p), Fraction(inv_q)
        if not (0 <= a <= 1 and 0 <= b <= 1):
            raise PreconditionError(f"reciprocals must lie in [0, 1], got ({a}, {b})")
        obj = cls.__new__(cls)
        object.__setattr__(obj, "inv_p", a)
        object.__setattr__(obj, "inv_q", b)
        return obj

    @property
    def p(self) -> float:
        return math.inf if self.inv_p == 0 else float(1 / self.inv_p)

    @property
    def q(self) -> float:
        return math.inf if self.inv_q == 0 else float(1 / self.inv_q)

    @property
    def inv_p_conj(self) -> Fraction:
        return 1 - self.inv_p

    @property
    def inv_q_conj(self) -> Fraction:
        return 1 - self.inv_q

    @property
    def p_conj(self) -> float:
        return math.inf if self.inv_p == 1 else float(1 / (1 - self.inv_p))

    @property
    def q_conj(self) -> float:
        return math.inf if self.inv_q == 1 else float(1 / (1 - self.inv_q))

    def conjugate(self) -> "ExponentPair":
        return ExponentPair.from_reciprocals(self.inv_p_conj, self.inv_q_conj)

    def __repr__(self):
        return f"ExponentPair(p={_fmt(self.inv_p)}, q={_fmt(self.inv_q)})"


def _fmt(inv: Fraction) -> str:
    return "inf" if inv == 0 else str(1 / inv)


def mu1(e: ExponentPair) -> Fraction:
    a, b = e.inv_p, e.inv_q
    return max(Fraction(0), b - min(a, 1 - a)) - a


def mu2(e: ExponentPair) -> Fraction:
    a, b = e.inv_p, e.inv_q
    return min(Fraction(0), b - max(a, 1 - a)) - a


def gap(e: ExponentPair) -> Fraction:
    return mu1(e) - mu2(e)


@dataclass(frozen=True)
class RegionLabel:
    """Every I, I* and J region whose closure contains (1/p, 1/q).

    Interior points carry one label per family; boundary points carry all
    of the regions that meet there.
    """

    i_regions: frozenset
    i_star_regions: frozenset
    j_regions: frozenset

    @property
    def boundary_flags(self) -> frozenset:
        flags = set()
        for fam in (self.i_regions, self.i_star_regions, self.j_regions):
            if len(fam) > 1:
                flags |= fam
        return frozenset(flags)


def _i_regions(a: Fraction, b: Fraction) -> frozenset:
    out = set()
    if min(b, HALF) >= a:
        out.add("I1")
    if min(a, 1 - a) >= b:
        out.add("I2")
    if min(b, HALF) >= 1 - a:
        out.add("I3")
    return frozenset(out)


def _i_star_regions(a: Fraction, b: Fraction) -> frozenset:
    out = set()
    if max(b, HALF) <= a:
        out.add("I1*")
    if max(a, 1 - a) <= b:
        out.add("I2*")
    if max(b, HALF) <= 1 - a:
        out.add("I3*")
    return frozenset(out)


_J_PAIRS = {
    "J1": (("I1", "I2*"), ("I2", "I1*")),
    "J2": (("I1", "I3*"), ("I3", "I1*")),
    "J3": (("I2", "I3*"), ("I3", "I2*")),
}


def region(e: ExponentPair) -> RegionLabel:
    a, b = e.inv_p, e.inv_q
    ii, istar = _i_regions(a, b), _i_star_regions(a, b)
    jj = frozenset(
        name for name, pairs in _J_PAIRS.items() if any(u in ii and v in istar for u, v in pairs)
    )
    return RegionLabel(ii, istar, jj)


_MU_BRANCH = {
    "1": lambda a, b: -2 * a + b,
    "2": lambda a, b: -a,
    "3": lambda a, b: b - 1,
}

_GAP_BRANCH = {
    "J1": lambda a, b: abs(a - b),
    "J2": lambda a, b: abs(2 * a - 1),
    "J3": lambda a, b: abs(a + b - 1),
}


def mu1_piecewise(e: ExponentPair) -> dict[str, Fraction]:
    """mu1 evaluated by every branch of the I-table that applies."""
    a, b = e.inv_p, e.inv_q
    return {r: _MU_BRANCH[r[1]](a, b) for r in sorted(_i_regions(a, b))}


def mu2_piecewise(e: ExponentPair) -> dict[str, Fraction]:
    a, b = e.inv_p, e.inv_q
    return {r: _MU_BRANCH[r[1]](a, b) for r in sorted(_i_star_regions(a, b))}


def gap_piecewise(e: ExponentPair) -> dict[str, Fraction]:
    a, b = e.inv_p, e.inv_q
    return {r: _GAP_BRANCH[r](a, b) for r in sorted(region(e).j_regions)}


@dataclass(frozen=True)
class CriticalOrder:
    """Largest order m for which Op(S^m_{rho,delta}) is bounded on M^{p,q}."""

    exponents: ExponentPair
    delta: Fraction | float
    n: int
    value: Fraction | float


def critical_order(e: ExponentPair, delta, n: int = 1) -> CriticalOrder:
    """-(mu1 - mu2) * delta * n; requires 0 <= delta < 1."""
    if not 0 <= delta < 1:
        raise PreconditionError(f"delta must satisfy 0 <= delta < 1, got {delta}")
    if n < 1:
        raise PreconditionError(f"dimension must be positive, got {n}")
    d = Fraction(delta) if isinstance(delta, Rational) else delta
    value = -gap(e) * d * n
    return CriticalOrder(e, d, n, value)
