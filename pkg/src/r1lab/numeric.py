"""Exact rational scalars and certified interval enclosures.

Every quantity the library reports is either an exact rational (a
``fractions.Fraction``) or an :class:`Enclosure`, a closed rational interval
certified to contain the true value.  No floating point enters the
computational core; heights reach ~10**6 and level widths ~1/10**6, so all
arithmetic rides on Python's arbitrary-precision integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

#: Exact rational scalar.  ``fractions.Fraction`` keeps values in canonical
#: reduced form (positive denominator, gcd 1), its arithmetic is exact and
#: values are immutable, which is exactly the contract the rest of the
#: library builds on.
Rational = Fraction

RationalLike = Union[Fraction, int, str]


def as_rational(value: RationalLike) -> Fraction:
    """Coerce an int, Fraction or ``"p/q"`` string to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def render_rational(value: Fraction) -> str:
    """Render as ``"p/q"`` (plain ``"n"`` for integers); inverse of as_rational."""
    return str(value)


def decimal_approx(value: Fraction, digits: int) -> str:
    """Decimal approximation with exactly ``digits`` fractional digits.

    Rounds half to even.  Consumers must carry the digit count alongside the
    string; the exact value is available via :func:`render_rational`.
    """
    if digits < 0:
        raise ValueError("digits must be nonnegative")
    n, d = value.numerator, value.denominator
    sign = "-" if n < 0 else ""
    scaled, rem = divmod(abs(n) * 10**digits, d)
    if 2 * rem > d or (2 * rem == d and scaled % 2 == 1):
        scaled += 1
    text = str(scaled).rjust(digits + 1, "0")
    if digits == 0:
        return sign + text
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


@dataclass(frozen=True, order=False)
class Enclosure:
    """Closed rational interval ``[lo, hi]`` containing a true quantity.

    Enclosures make "a value, up to an explicitly bounded error" a first
    class object: arithmetic combines the bounds so that the result is
    again certified to contain the true value.  Instances are immutable and
    safe to share between workers.
    """

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", as_rational(self.lo))
        object.__setattr__(self, "hi", as_rational(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"invalid enclosure: lo={self.lo} > hi={self.hi}")

    @classmethod
    def exact(cls, value: RationalLike) -> "Enclosure":
        """Degenerate enclosure [v, v] of an exactly known value."""
        v = as_rational(value)
        return cls(v, v)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    def contains(self, value: RationalLike) -> bool:
        v = as_rational(value)
        return self.lo <= v <= self.hi

    def encloses(self, other: "Enclosure") -> bool:
        """True when ``other`` is a subinterval of this enclosure."""
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "Enclosure") -> "Enclosure":
        """Meet with another certified bound for the same quantity.

        The result is never wider than either operand.  Raises if the
        intervals are disjoint, since then at least one bound was wrong.
        """
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise ValueError(f"disjoint enclosures {self} and {other}")
        return Enclosure(lo, hi)

    def __add__(self, other: "Enclosure | RationalLike") -> "Enclosure":
        if isinstance(other, Enclosure):
            return Enclosure(self.lo + other.lo, self.hi + other.hi)
        v = as_rational(other)
        return Enclosure(self.lo + v, self.hi + v)

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo)

    def __sub__(self, other: "Enclosure | RationalLike") -> "Enclosure":
        if isinstance(other, Enclosure):
            return Enclosure(self.lo - other.hi, self.hi - other.lo)
        v = as_rational(other)
        return Enclosure(self.lo - v, self.hi - v)

    def __rsub__(self, other: RationalLike) -> "Enclosure":
        return (-self) + as_rational(other)

    def __mul__(self, other: "Enclosure | RationalLike") -> "Enclosure":
        if isinstance(other, Enclosure):
            products = (
                self.lo * other.lo,
                self.lo * other.hi,
                self.hi * other.lo,
                self.hi * other.hi,
            )
            return Enclosure(min(products), max(products))
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, factor: RationalLike) -> "Enclosure":
        c = as_rational(factor)
        if c >= 0:
            return Enclosure(self.lo * c, self.hi * c)
        return Enclosure(self.hi * c, self.lo * c)

    def __abs__(self) -> "Enclosure":
        # |x| over [a, b]: keep nonnegative intervals, mirror nonpositive
        # ones, and collapse the lower bound to 0 when the interval
        # straddles zero.
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return Enclosure(-self.hi, -self.lo)
        return Enclosure(Fraction(0), max(-self.lo, self.hi))

    def squared(self) -> "Enclosure":
        a = abs(self)
        return Enclosure(a.lo * a.lo, a.hi * a.hi)

    @staticmethod
    def sum(items: Iterable["Enclosure"]) -> "Enclosure":
        """Bound-wise sum; the sum of the true values lies inside."""
        lo = Fraction(0)
        hi = Fraction(0)
        for item in items:
            lo += item.lo
            hi += item.hi
        return Enclosure(lo, hi)

    def render(self) -> tuple[str, str]:
        return render_rational(self.lo), render_rational(self.hi)

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"
