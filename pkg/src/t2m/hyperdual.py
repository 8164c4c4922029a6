"""Hyper-dual numbers for exact second-order forward propagation.

A hyper-dual number ``a + b e1 + c e2 + d e1e2`` with ``e1**2 = e2**2 = 0``
carries a value, two independent directional derivatives and the mixed
second derivative.  Seeding ``y + u e1 + v e2`` through a smooth expression
``f`` yields ``f(y)``, ``df(y)u``, ``df(y)v`` and ``d2f(y)(u, v)`` with no
truncation error.
"""

from __future__ import annotations

import math
import numbers


class HyperDual:
    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a: float, b: float = 0.0, c: float = 0.0, d: float = 0.0):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)

    def __repr__(self) -> str:
        return f"HyperDual({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"

    def _chain(self, f0: float, f1: float, f2: float) -> HyperDual:
        # Scalar chain rule truncated at the e1e2 term.
        return HyperDual(f0, f1 * self.b, f1 * self.c, f1 * self.d + f2 * self.b * self.c)

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)
        if isinstance(other, numbers.Real):
            return HyperDual(self.a + other, self.b, self.c, self.d)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.a, -self.b, -self.c, -self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, (HyperDual, numbers.Real)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.a * other.a,
                self.a * other.b + self.b * other.a,
                self.a * other.c + self.c * other.a,
                self.a * other.d + self.b * other.c + self.c * other.b + self.d * other.a,
            )
        if isinstance(other, numbers.Real):
            return HyperDual(self.a * other, self.b * other, self.c * other, self.d * other)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> HyperDual:
        if self.a == 0.0:
            raise ZeroDivisionError("hyper-dual division by a number with zero real part")
        inv = 1.0 / self.a
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        if isinstance(other, numbers.Real):
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return self.reciprocal() * other
        return NotImplemented

    def __pow__(self, exponent):
        if isinstance(exponent, HyperDual):
            return exp(exponent * log(self))
        if not isinstance(exponent, numbers.Real):
            return NotImplemented
        if float(exponent).is_integer():
            n = int(exponent)
            if n < 0:
                return _int_power(self, -n).reciprocal()
            return _int_power(self, n)
        p = float(exponent)
        a = self.a
        return self._chain(a**p, p * a ** (p - 1.0), p * (p - 1.0) * a ** (p - 2.0))

    def __rpow__(self, base):
        if isinstance(base, numbers.Real):
            return exp(self * math.log(base))
        return NotImplemented


def _int_power(x: HyperDual, n: int) -> HyperDual:
    result = HyperDual(1.0)
    base = x
    while n:
        if n & 1:
            result = result * base
        base = base * base
        n >>= 1
    return result


def sin(x):
    if isinstance(x, HyperDual):
        s, c = math.sin(x.a), math.cos(x.a)
        return x._chain(s, c, -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, HyperDual):
        s, c = math.sin(x.a), math.cos(x.a)
        return x._chain(c, -s, -c)
    return math.cos(x)


def tan(x):
    if isinstance(x, HyperDual):
        t = math.tan(x.a)
        sec2 = 1.0 + t * t
        return x._chain(t, sec2, 2.0 * t * sec2)
    return math.tan(x)


def exp(x):
    if isinstance(x, HyperDual):
        e = math.exp(x.a)
        return x._chain(e, e, e)
    return math.exp(x)


def log(x):
    if isinstance(x, HyperDual):
        if x.a <= 0.0:
            raise ValueError("log of a non-positive real part")
        inv = 1.0 / x.a
        return x._chain(math.log(x.a), inv, -inv * inv)
    return math.log(x)


def sqrt(x):
    if isinstance(x, HyperDual):
        if x.a <= 0.0:
            raise ValueError("sqrt is not differentiable at a non-positive real part")
        r = math.sqrt(x.a)
        return x._chain(r, 0.5 / r, -0.25 / (r * x.a))
    return math.sqrt(x)


def atan(x):
    if isinstance(x, HyperDual):
        q = 1.0 / (1.0 + x.a * x.a)
        return x._chain(math.atan(x.a), q, -2.0 * x.a * q * q)
    return math.atan(x)


def atan2(y, x):
    if not isinstance(y, HyperDual) and not isinstance(x, HyperDual):
        return math.atan2(y, x)
    y = y if isinstance(y, HyperDual) else HyperDual(y)
    x = x if isinstance(x, HyperDual) else HyperDual(x)
    theta0 = math.atan2(y.a, x.a)
    # Angle relative to the real part: cross/dot has zero real part, so the
    # principal branch of atan is exact here.
    cross = x.a * y - y.a * x
    dot = x.a * x + y.a * y
    return atan(cross / dot) + theta0


def real(x) -> float:
    return x.a if isinstance(x, HyperDual) else float(x)


def parts(x) -> tuple[float, float, float, float]:
    if isinstance(x, HyperDual):
        return x.a, x.b, x.c, x.d
    return float(x), 0.0, 0.0, 0.0
