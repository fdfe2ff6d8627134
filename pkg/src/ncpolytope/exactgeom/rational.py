"""Rational scalars and vectors.

``fractions.Fraction`` already keeps numerator/denominator in lowest terms
with a positive denominator over arbitrary-precision integers, so it is used
directly as the rational type. This module only adds the conversions and
the ASCII form used in files ("p/q" or "p").
"""
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Rational = Fraction
RVector = tuple  # tuple[Fraction, ...]


def to_rational(value) -> Fraction:
    """Convert ints, Fractions and strings such as ``"3/4"`` exactly.

    Floats are rejected unless they are integral, since a binary float rarely
    denotes the rational the caller had in mind.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float) and value.is_integer():
        return Fraction(int(value))
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def rvec(values: Iterable) -> tuple:
    return tuple(to_rational(v) for v in values)


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def lcm_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        d = v.denominator
        out = out * d // gcd(out, d)
    return out


def integer_row(values: Sequence[Fraction]) -> list:
    """Scale a rational vector by a positive factor to coprime integers."""
    m = lcm_denominators(values)
    ints = [int(v * m) for v in values]
    return primitive(ints)


def primitive(ints: Sequence[int]) -> list:
    g = 0
    for v in ints:
        g = gcd(g, v)
        if g == 1:
            break
    if g <= 1:
        return list(ints)
    return [v // g for v in ints]
