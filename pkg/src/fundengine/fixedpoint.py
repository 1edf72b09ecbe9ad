"""Scale-18 fixed-point decimals backed by integer mantissas.

Every money, token and price quantity in the engine is a ``FixedPoint``.
Addition, subtraction and comparison are exact.  Multiplication and division
truncate toward zero at 18 fractional digits, so the fund never mints or pays
out more than owed.  ``mul_div`` evaluates a*b/c with the intermediate product
held exactly (Python ints are unbounded), one truncation at the end.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import DivisionByZero, FixedPointOverflow

SCALE = 18
ONE = 10**SCALE

# Mantissa bound roughly matching a 256-bit word; anything past this is a bug
# in the caller, not a meaningful quantity.
_MAX_MANTISSA = 10**59

_DEC_RE = re.compile(r"^[+-]?(\d+)(?:\.(\d+))?$")


def _trunc_div(n: int, d: int) -> int:
    # Python's // floors; financial rounding here is toward zero.
    q = abs(n) // abs(d)
    if (n < 0) != (d < 0):
        q = -q
    return q


def _check(m: int) -> int:
    if abs(m) > _MAX_MANTISSA:
        raise FixedPointOverflow(f"mantissa out of range: {m}")
    return m


class FixedPoint:
    """An exact decimal with 18 fractional digits."""

    __slots__ = ("m",)

    def __init__(self, value: "int | str | FixedPoint" = 0):
        if isinstance(value, FixedPoint):
            self.m = value.m
        elif isinstance(value, int):
            self.m = _check(value * ONE)
        elif isinstance(value, str):
            self.m = _check(_parse(value))
        else:
            raise TypeError(f"cannot build FixedPoint from {type(value).__name__}")

    @classmethod
    def from_mantissa(cls, m: int) -> "FixedPoint":
        fp = cls.__new__(cls)
        fp.m = _check(m)
        return fp

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint.from_mantissa(self.m + other.m)

    def __sub__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint.from_mantissa(self.m - other.m)

    def __neg__(self) -> "FixedPoint":
        return FixedPoint.from_mantissa(-self.m)

    def __abs__(self) -> "FixedPoint":
        return FixedPoint.from_mantissa(abs(self.m))

    def __mul__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint.from_mantissa(_trunc_div(self.m * other.m, ONE))

    def __truediv__(self, other: "FixedPoint") -> "FixedPoint":
        if other.m == 0:
            raise DivisionByZero("fixed-point division by zero")
        return FixedPoint.from_mantissa(_trunc_div(self.m * ONE, other.m))

    # -- comparisons --------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FixedPoint) and self.m == other.m

    def __lt__(self, other: "FixedPoint") -> bool:
        return self.m < other.m

    def __le__(self, other: "FixedPoint") -> bool:
        return self.m <= other.m

    def __gt__(self, other: "FixedPoint") -> bool:
        return self.m > other.m

    def __ge__(self, other: "FixedPoint") -> bool:
        return self.m >= other.m

    def __hash__(self) -> int:
        return hash(("FixedPoint", self.m))

    def __bool__(self) -> bool:
        return self.m != 0

    # -- views --------------------------------------------------------------

    @property
    def is_negative(self) -> bool:
        return self.m < 0

    @property
    def is_zero(self) -> bool:
        return self.m == 0

    def __str__(self) -> str:
        sign = "-" if self.m < 0 else ""
        whole, frac = divmod(abs(self.m), ONE)
        if frac == 0:
            return f"{sign}{whole}"
        return f"{sign}{whole}.{frac:0{SCALE}d}".rstrip("0")

    def __repr__(self) -> str:
        return f"FixedPoint('{self}')"

    def __float__(self) -> float:
        # Only for approximate display; never used in protocol math.
        return self.m / ONE


def _parse(text: str) -> int:
    match = _DEC_RE.match(text.strip().replace("_", ""))
    if not match:
        raise ValueError(f"not an exact decimal literal: {text!r}")
    whole, frac = match.group(1), match.group(2) or ""
    if len(frac) > SCALE:
        raise ValueError(f"more than {SCALE} fractional digits: {text!r}")
    m = int(whole) * ONE + int(frac.ljust(SCALE, "0"))
    return -m if text.strip().startswith("-") else m


def fp(value: "int | str | FixedPoint") -> FixedPoint:
    """Shorthand constructor."""
    return FixedPoint(value)


ZERO = FixedPoint(0)
FP_ONE = FixedPoint(1)


def mul_div(a: FixedPoint, b: FixedPoint, c: FixedPoint) -> FixedPoint:
    """a * b / c with a single truncation toward zero at the end."""
    if c.m == 0:
        raise DivisionByZero("mul_div by zero")
    return FixedPoint.from_mantissa(_trunc_div(a.m * b.m, c.m))


def to_fraction(x: FixedPoint) -> Fraction:
    return Fraction(x.m, ONE)


def from_fraction(f: Fraction) -> FixedPoint:
    """Exact rational to scale-18, truncated toward zero."""
    return FixedPoint.from_mantissa(_trunc_div(f.numerator * ONE, f.denominator))


def fp_min(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    return a if a.m <= b.m else b


def fp_max(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    return a if a.m >= b.m else b
