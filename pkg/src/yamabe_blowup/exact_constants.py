"""Exact and high-precision scalar constants.

Every constant used by the reduced-energy computations is a product of a
rational number, a power of pi and a few rational powers of small primes.
:class:`ExactValue` stores exactly that monomial, so identities between
constants can be tested with ``==`` instead of tolerances.  Floating point
values are produced through mpmath at 50 significant digits.

The radial integrals

    I_p^q = int_0^inf r^q (1 + r)^(-p) dr = Beta(q + 1, p - q - 1)

are exact monomials whenever 2p and 2q are integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Tuple, Union

import mpmath

DPS = 50

Number = Union[int, Fraction, float]


def _prime_factors(m: int) -> Dict[int, int]:
    """Trial-division factorization of a positive integer."""
    out: Dict[int, int] = {}
    d = 2
    while d * d <= m:
        while m % d == 0:
            out[d] = out.get(d, 0) + 1
            m //= d
        d += 1
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


@dataclass(frozen=True)
class ExactValue:
    """The monomial ``coeff * pi**pi_exp * prod(p**e for p, e in radicals)``.

    Radical exponents are kept in the open interval (0, 1); integer parts
    are absorbed into ``coeff``.  Instances are hashable and compare
    exactly.
    """

    coeff: Fraction
    pi_exp: Fraction = Fraction(0)
    radicals: Tuple[Tuple[int, Fraction], ...] = field(default=())

    @staticmethod
    def rational(x: Number) -> "ExactValue":
        return ExactValue(Fraction(x))

    @staticmethod
    def pi(power: Number = 1) -> "ExactValue":
        return ExactValue(Fraction(1), Fraction(power))

    @staticmethod
    def _build(coeff: Fraction, pi_exp: Fraction, rad: Dict[int, Fraction]) -> "ExactValue":
        items = []
        for p in sorted(rad):
            e = rad[p]
            whole = math.floor(e)
            frac = e - whole
            if whole:
                coeff *= Fraction(p) ** whole
            if frac:
                items.append((p, frac))
        return ExactValue(coeff, pi_exp, tuple(items))

    @staticmethod
    def power(base: Number, exponent: Number) -> "ExactValue":
        """Exact ``base**exponent`` for a positive rational base."""
        base = Fraction(base)
        exponent = Fraction(exponent)
        if base <= 0:
            raise ValueError("power() needs a positive base")
        if exponent.denominator == 1:
            return ExactValue(base ** int(exponent))
        rad: Dict[int, Fraction] = {}
        for p, k in _prime_factors(base.numerator).items():
            rad[p] = rad.get(p, Fraction(0)) + k * exponent
        for p, k in _prime_factors(base.denominator).items():
            rad[p] = rad.get(p, Fraction(0)) - k * exponent
        return ExactValue._build(Fraction(1), Fraction(0), rad)

    def _as_exact(self, other) -> "ExactValue":
        if isinstance(other, ExactValue):
            return other
        if isinstance(other, (int, Fraction)):
            return ExactValue(Fraction(other))
        return NotImplemented

    def same_basis(self, other: "ExactValue") -> bool:
        return self.pi_exp == other.pi_exp and self.radicals == other.radicals

    def __mul__(self, other):
        other = self._as_exact(other)
        if other is NotImplemented:
            return NotImplemented
        rad = dict(self.radicals)
        for p, e in other.radicals:
            rad[p] = rad.get(p, Fraction(0)) + e
        return ExactValue._build(self.coeff * other.coeff, self.pi_exp + other.pi_exp, rad)

    __rmul__ = __mul__

    def inverse(self) -> "ExactValue":
        if self.coeff == 0:
            raise ZeroDivisionError("inverse of zero")
        rad = {p: -e for p, e in self.radicals}
        return ExactValue._build(1 / self.coeff, -self.pi_exp, rad)

    def __truediv__(self, other):
        other = self._as_exact(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._as_exact(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, k: Number) -> "ExactValue":
        k = Fraction(k)
        if k.denominator == 1:
            rad = {p: e * k for p, e in self.radicals}
            return ExactValue._build(self.coeff ** int(k), self.pi_exp * k, rad)
        if self.coeff <= 0:
            raise ValueError("fractional power of a non-positive value")
        base = ExactValue.power(self.coeff, k)
        rad = dict(base.radicals)
        for p, e in self.radicals:
            rad[p] = rad.get(p, Fraction(0)) + e * k
        return ExactValue._build(base.coeff, self.pi_exp * k, rad)

    def __add__(self, other):
        other = self._as_exact(other)
        if other is NotImplemented:
            return NotImplemented
        if other.coeff == 0:
            return self
        if self.coeff == 0:
            return other
        if not self.same_basis(other):
            raise TypeError("sum of exact values with different transcendental parts")
        return ExactValue(self.coeff + other.coeff, self.pi_exp, self.radicals)

    __radd__ = __add__

    def __neg__(self) -> "ExactValue":
        return ExactValue(-self.coeff, self.pi_exp, self.radicals)

    def __sub__(self, other):
        other = self._as_exact(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __eq__(self, other) -> bool:
        other = self._as_exact(other)
        if other is NotImplemented:
            return False
        if self.coeff == 0 or other.coeff == 0:
            return self.coeff == other.coeff
        return (self.coeff, self.pi_exp, self.radicals) == (other.coeff, other.pi_exp, other.radicals)

    def __hash__(self) -> int:
        return hash((self.coeff, self.pi_exp, self.radicals))

    def is_rational(self) -> bool:
        return self.pi_exp == 0 and not self.radicals

    def mpf(self, dps: int = DPS) -> mpmath.mpf:
        with mpmath.workdps(dps + 10):
            v = mpmath.mpf(self.coeff.numerator) / self.coeff.denominator
            if self.pi_exp:
                v *= mpmath.pi ** (mpmath.mpf(self.pi_exp.numerator) / self.pi_exp.denominator)
            for p, e in self.radicals:
                v *= mpmath.mpf(p) ** (mpmath.mpf(e.numerator) / e.denominator)
            return +v

    def __float__(self) -> float:
        return float(self.mpf())

    def __str__(self) -> str:
        parts = [str(self.coeff)]
        if self.pi_exp:
            parts.append(f"pi^({self.pi_exp})" if self.pi_exp.denominator != 1 else f"pi^{self.pi_exp}")
        for p, e in self.radicals:
            parts.append(f"{p}^({e})")
        return " * ".join(parts)


def _as_half_integer(x: Number) -> Fraction | None:
    f = Fraction(x)
    if (2 * f).denominator == 1:
        return f
    return None


@lru_cache(maxsize=None)
def exact_gamma(x: Fraction) -> ExactValue:
    """Gamma at a positive integer or half-integer, as an exact monomial."""
    x = Fraction(x)
    if x <= 0 or (2 * x).denominator != 1:
        raise ValueError(f"exact_gamma needs a positive half-integer, got {x}")
    if x.denominator == 1:
        return ExactValue(Fraction(math.factorial(int(x) - 1)))
    m = int(x - Fraction(1, 2))
    # Gamma(m + 1/2) = (2m)! / (4^m m!) sqrt(pi)
    c = Fraction(math.factorial(2 * m), 4 ** m * math.factorial(m))
    return ExactValue(c, Fraction(1, 2))


def radial_integral(p: Number, q: Number):
    """I_p^q = int_0^inf r^q (1+r)^(-p) dr = Beta(q+1, p-q-1).

    Parameters
    ----------
    p, q : int, Fraction or float
        Exponents.  Half-integers give an :class:`ExactValue`; anything
        else falls back to a 50-digit ``mpmath.mpf``.

    Raises
    ------
    ValueError
        If ``p - q <= 1`` (divergent at infinity) or ``q < 0``.
    """
    if Fraction(p) - Fraction(q) <= 1:
        raise ValueError(f"radial integral diverges: p - q = {Fraction(p) - Fraction(q)} <= 1")
    if Fraction(q) < 0:
        raise ValueError(f"radial integral needs q >= 0, got {q}")
    hp, hq = _as_half_integer(p), _as_half_integer(q)
    if hp is not None and hq is not None:
        return exact_gamma(hq + 1) * exact_gamma(hp - hq - 1) / exact_gamma(hp)
    with mpmath.workdps(DPS):
        return mpmath.beta(mpmath.mpf(q) + 1, mpmath.mpf(p) - mpmath.mpf(q) - 1)


class RadialIntegralTable:
    """Radial integrals of dimension ``n`` as rational multiples of I_n^((n-2)/2).

    Ratios are computed lazily and cached; they are pure rationals whenever
    (p, q) is an integer shift of (n, (n-2)/2).
    """

    def __init__(self, n: int):
        if n < 3:
            raise ValueError("dimension must be at least 3")
        self.n = n
        self.base_p = Fraction(n)
        self.base_q = Fraction(n - 2, 2)
        self.base = radial_integral(self.base_p, self.base_q)
        self._ratios: Dict[Tuple[Fraction, Fraction], Fraction] = {}

    def ratio(self, p: Number, q: Number) -> Fraction:
        key = (Fraction(p), Fraction(q))
        if key not in self._ratios:
            if (key[0] - self.base_p).denominator != 1 or (key[1] - self.base_q).denominator != 1:
                raise ValueError("ratio is rational only for integer shifts of (n, (n-2)/2)")
            r = radial_integral(*key) / self.base
            if not r.is_rational():
                raise ArithmeticError("unexpected transcendental ratio")
            self._ratios[key] = r.coeff
        return self._ratios[key]

    def value(self, p: Number, q: Number) -> ExactValue:
        return self.base * self.ratio(p, q)


def sphere_volume(n: int) -> ExactValue:
    """Volume omega_{n-1} = 2 pi^(n/2) / Gamma(n/2) of the unit sphere in R^n."""
    if n < 2:
        raise ValueError("sphere_volume needs n >= 2")
    return 2 * ExactValue.pi(Fraction(n, 2)) / exact_gamma(Fraction(n, 2))


def _check_dim(n: int, minimum: int = 3) -> None:
    if int(n) != n or n < minimum:
        raise ValueError(f"dimension must be an integer >= {minimum}, got {n}")


def conformal_scale(n: int) -> int:
    """The recurring constant n(n-2)."""
    return n * (n - 2)


def sobolev_mass(n: int) -> ExactValue:
    """K_n^(-n), the energy of the standard bubble in R^n."""
    _check_dim(n)
    c = conformal_scale(n)
    return sphere_volume(n) / 2 * ExactValue.power(c, Fraction(n, 2)) * radial_integral(n, Fraction(n - 2, 2))


def lambda_constant(n: int) -> ExactValue:
    """Lambda(n) = int (1 + |x|^2/(n(n-2)))^(-(n+2)/2) dx."""
    _check_dim(n)
    c = conformal_scale(n)
    return sphere_volume(n) / 2 * ExactValue.power(c, Fraction(n, 2)) \
        * radial_integral(Fraction(n + 2, 2), Fraction(n - 2, 2))


def conformal_laplacian_constant(n: int) -> Fraction:
    """c_n = (n-2)/(4(n-1))."""
    _check_dim(n)
    return Fraction(n - 2, 4 * (n - 1))


def pohozaev_constant(n: int) -> ExactValue:
    """a_n = n(n-2)^2 / (6(n-6)(n-4)) K_n^(-n)."""
    _check_dim(n, 7)
    return Fraction(n * (n - 2) ** 2, 6 * (n - 6) * (n - 4)) * sobolev_mass(n)


def pohozaev_constant_integral_form(n: int) -> ExactValue:
    """a_n from its defining radial integral, reduced to Beta functions.

    The integrand (1+s)^(1-n) (s-1) s with s = |y|^2/(n(n-2)) splits into
    I_{n-1}^{(n+2)/2} - I_{n-1}^{n/2}.
    """
    _check_dim(n, 7)
    c = conformal_scale(n)
    radial = radial_integral(n - 1, Fraction(n + 2, 2)) - radial_integral(n - 1, Fraction(n, 2))
    pref = conformal_laplacian_constant(n) / 24 * (n - 2) ** 2
    return pref * sphere_volume(n) / 2 * ExactValue.power(c, Fraction(n, 2)) * radial


@dataclass(frozen=True)
class ConstantsBundle:
    """All scalar constants of a dimension, exact and as floats."""

    n: int
    omega: float
    kn_pow: float
    lambda_n: float
    cn: float
    an: float | None
    exact: Dict[str, ExactValue]

    def as_dict(self, with_exact: bool = False) -> dict:
        out = {"n": self.n, "omega": self.omega, "kn_pow": self.kn_pow,
               "lambda_n": self.lambda_n, "cn": self.cn, "an": self.an}
        if with_exact:
            out["exact"] = {k: str(v) for k, v in self.exact.items()}
        return out


@lru_cache(maxsize=None)
def constants_bundle(n: int) -> ConstantsBundle:
    _check_dim(n)
    exact = {
        "omega": sphere_volume(n),
        "kn_pow": sobolev_mass(n),
        "lambda_n": lambda_constant(n),
        "cn": ExactValue(conformal_laplacian_constant(n)),
    }
    if n >= 7:
        exact["an"] = pohozaev_constant(n)
    return ConstantsBundle(
        n=n,
        omega=float(exact["omega"]),
        kn_pow=float(exact["kn_pow"]),
        lambda_n=float(exact["lambda_n"]),
        cn=float(exact["cn"]),
        an=float(exact["an"]) if "an" in exact else None,
        exact=exact,
    )


def dimension_ten_relation() -> Tuple[ExactValue, ExactValue]:
    """Both sides of 2 * 10^-4 * 8^-6 * a_10 = (5/567) * omega_9."""
    lhs = Fraction(2, 10 ** 4 * 8 ** 6) * pohozaev_constant(10)
    rhs = Fraction(5, 567) * sphere_volume(10)
    return lhs, rhs
