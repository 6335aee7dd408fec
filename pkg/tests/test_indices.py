from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from modspace import ExponentPair, PreconditionError, critical_order, gap, mu1, mu2, region
from modspace.indices import gap_piecewise, mu1_piecewise, mu2_piecewise

recips = st.fractions(min_value=0, max_value=1, max_denominator=60)


def oracle_mu1(a, b):
    return max(Fraction(0), b - min(a, 1 - a)) - a


def oracle_mu2(a, b):
    return min(Fraction(0), b - max(a, 1 - a)) - a


@given(recips, recips)
def test_closed_forms_match_independent_oracle(a, b):
    e = ExponentPair.from_reciprocals(a, b)
    assert mu1(e) == oracle_mu1(a, b)
    assert mu2(e) == oracle_mu2(a, b)


@given(recips, recips)
def test_every_region_branch_agrees(a, b):
    e = ExponentPair.from_reciprocals(a, b)
    assert set(mu1_piecewise(e).values()) == {mu1(e)}
    assert set(mu2_piecewise(e).values()) == {mu2(e)}
    assert set(gap_piecewise(e).values()) == {gap(e)}


@given(recips, recips)
def test_gap_nonnegative_and_symmetric_under_conjugation(a, b):
    e = ExponentPair.from_reciprocals(a, b)
    assert gap(e) >= 0
    assert gap(e.conjugate()) == gap(e)


@given(recips)
def test_p2_gap_is_distance_to_half(b):
    e = ExponentPair.from_reciprocals(Fraction(1, 2), b)
    assert gap(e) == abs(b - Fraction(1, 2))


@pytest.mark.parametrize(
    "p,q,m1,m2",
    [
        (2, 2, Fraction(-1, 2), Fraction(-1, 2)),
        (2, 4, Fraction(-1, 2), Fraction(-3, 4)),
        (1, 1, Fraction(0), Fraction(-1)),
        (float("inf"), float("inf"), Fraction(0), Fraction(-1)),
        (float("inf"), 1, Fraction(1), Fraction(0)),
    ],
)
def test_tabulated_values(p, q, m1, m2):
    e = ExponentPair(p, q)
    assert (mu1(e), mu2(e)) == (m1, m2)


def test_regions_at_center_touch_everything():
    lab = region(ExponentPair(2, 2))
    assert len(lab.i_regions) == 3 and len(lab.j_regions) == 3


def test_critical_order():
    c = critical_order(ExponentPair(2, 6), Fraction(1, 2), 1)
    assert c.value == Fraction(-1, 6)
    assert critical_order(ExponentPair(2, 2), 0.5).value == 0
    with pytest.raises(PreconditionError):
        critical_order(ExponentPair(2, 6), 1)


def test_float_exponents_are_exact():
    assert ExponentPair(1.5, 3.0).inv_p == Fraction(2, 3)
    with pytest.raises(PreconditionError):
        ExponentPair(0.5, 2)
