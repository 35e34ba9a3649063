"""Which geometries allow sign-changing blow-up at the minimal energy level.

Two pieces live here.  The leading Pohozaev balance

    balance(mu) = (1/2) n^((n-2)/2) (n-2)^((n+2)/2) omega_{n-1} u0 mu^((n-6)/2)
                  - a_n |Weyl|^2 mu^2

compares the mass-type term with the Weyl obstruction; a blow-up needs it to
vanish to leading order.  The classifier turns the resulting dimension and
geometry conditions into a verdict together with the rule that fired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from scipy.optimize import brentq

from .exact_constants import ExactValue, pohozaev_constant, sobolev_mass, sphere_volume

COMPACT = "compact_below_minimal_level"
NOT_EXCLUDED = "blowup_not_excluded"
CONSTRUCTIBLE = "blowup_constructible"
VERDICTS = (COMPACT, NOT_EXCLUDED, CONSTRUCTIBLE)

THRESHOLD_STATES = ("above", "below", "equal_somewhere", "unknown")
PERTURBATION_SIGNS = ("none", "nonneg", "nonpos", "mixed")

# u0 is compared against this multiple of |Weyl|^2 in dimension ten
DIMENSION_TEN_THRESHOLD = Fraction(5, 567)


@dataclass(frozen=True)
class GeometrySpec:
    n: int
    lcf: bool
    weyl_everywhere_nonzero: bool
    u0_vs_threshold: str = "unknown"
    perturbation_sign: str = "none"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        if self.u0_vs_threshold not in THRESHOLD_STATES:
            raise ValueError(f"u0_vs_threshold must be one of {THRESHOLD_STATES}")
        if self.perturbation_sign not in PERTURBATION_SIGNS:
            raise ValueError(f"perturbation_sign must be one of {PERTURBATION_SIGNS}")
        if self.lcf and self.weyl_everywhere_nonzero:
            raise ValueError("a locally conformally flat metric has vanishing Weyl tensor")
        if self.lcf and self.n == 10 and self.u0_vs_threshold in ("below", "equal_somewhere"):
            raise ValueError("with vanishing Weyl tensor the positive u0 lies above the threshold")


@dataclass(frozen=True)
class RegimeVerdict:
    verdict: str
    rule: str

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "rule": self.rule}


def _classify_unperturbed(s: GeometrySpec) -> RegimeVerdict:
    n = s.n
    if s.lcf:
        return RegimeVerdict(COMPACT, "locally conformally flat")
    if n <= 9:
        return RegimeVerdict(COMPACT, "n <= 9")
    if n == 10:
        if s.u0_vs_threshold in ("above", "below"):
            return RegimeVerdict(COMPACT, "n = 10 and u0 differs from (5/567)|Weyl|^2 everywhere")
        return RegimeVerdict(NOT_EXCLUDED, "n = 10 and u0 may meet (5/567)|Weyl|^2")
    if s.weyl_everywhere_nonzero:
        return RegimeVerdict(COMPACT, "n >= 11 and Weyl nonzero everywhere")
    return RegimeVerdict(CONSTRUCTIBLE, "n >= 11 and Weyl vanishing somewhere on a non-lcf metric")


def _classify_perturbed(s: GeometrySpec) -> RegimeVerdict:
    n, h = s.n, s.perturbation_sign
    # nonpos and mixed mean min h < 0; nonneg and mixed mean max h > 0
    if n <= 6:
        return RegimeVerdict(COMPACT, "3 <= n <= 6")
    if n <= 9:
        if h == "nonneg":
            return RegimeVerdict(COMPACT, "h >= 0 and 7 <= n <= 9")
        return RegimeVerdict(CONSTRUCTIBLE, "min h < 0 and 7 <= n <= 9")
    if n == 10:
        if s.u0_vs_threshold == "above":
            if h == "nonneg":
                return RegimeVerdict(COMPACT, "h >= 0, n = 10 and u0 above the threshold")
            return RegimeVerdict(CONSTRUCTIBLE, "min h < 0, n = 10 and u0 above the threshold")
        if s.u0_vs_threshold == "below":
            if h == "nonpos":
                return RegimeVerdict(COMPACT, "h <= 0, n = 10 and u0 below the threshold")
            return RegimeVerdict(CONSTRUCTIBLE, "max h > 0, n = 10 and u0 below the threshold")
        return RegimeVerdict(NOT_EXCLUDED, "n = 10 and u0 may meet the threshold")
    if s.lcf:
        if h == "nonneg":
            return RegimeVerdict(COMPACT, "h >= 0, n >= 11 and locally conformally flat")
        return RegimeVerdict(CONSTRUCTIBLE, "min h < 0, n >= 11 and locally conformally flat")
    if s.weyl_everywhere_nonzero:
        if h == "nonpos":
            return RegimeVerdict(COMPACT, "h <= 0, n >= 11 and Weyl nonzero everywhere")
        return RegimeVerdict(CONSTRUCTIBLE, "max h > 0, n >= 11 and Weyl nonzero everywhere")
    return RegimeVerdict(NOT_EXCLUDED, "n >= 11 with Weyl vanishing somewhere on a non-lcf metric")


def classify(spec: GeometrySpec) -> RegimeVerdict:
    """Verdict for a geometry, with the rule that decided it."""
    if spec.perturbation_sign == "none":
        return _classify_unperturbed(spec)
    return _classify_perturbed(spec)


def all_specs(dims=range(3, 16)):
    """Every consistent GeometrySpec over the given dimensions."""
    for n, lcf, wnz, u0, h in product(dims, (False, True), (False, True), THRESHOLD_STATES,
                                      PERTURBATION_SIGNS):
        try:
            yield GeometrySpec(n, lcf, wnz, u0, h)
        except ValueError:
            continue


@dataclass(frozen=True)
class BalanceInput:
    n: int
    u0_at_blowup: float
    weyl_norm_sq_at_blowup: float
    mu: float

    def __post_init__(self):
        if self.n < 7:
            raise ValueError("the balance is stated for n >= 7")
        if not (self.u0_at_blowup > 0 and self.mu > 0 and self.weyl_norm_sq_at_blowup >= 0):
            raise ValueError("need u0 > 0, mu > 0 and |Weyl|^2 >= 0")


def mass_coefficient(n: int) -> ExactValue:
    """(1/2) n^((n-2)/2) (n-2)^((n+2)/2) omega_{n-1}."""
    return (Fraction(1, 2) * ExactValue.power(n, Fraction(n - 2, 2))
            * ExactValue.power(n - 2, Fraction(n + 2, 2)) * sphere_volume(n))


def balance(inp: BalanceInput) -> float:
    n = inp.n
    mass = float(mass_coefficient(n)) * inp.u0_at_blowup * inp.mu ** ((n - 6) / 2)
    return mass - float(pohozaev_constant(n)) * inp.weyl_norm_sq_at_blowup * inp.mu ** 2


def balance_root(n: int, u0: float, weyl_norm_sq: float) -> float:
    """The positive mu where the balance vanishes, for n != 10 and |Weyl| > 0."""
    if n == 10:
        raise ValueError("in dimension ten both terms scale like mu^2")
    if not (u0 > 0 and weyl_norm_sq > 0):
        raise ValueError("need u0 > 0 and |Weyl|^2 > 0 for a positive root")
    ratio = float(pohozaev_constant(n)) * weyl_norm_sq / (float(mass_coefficient(n)) * u0)
    return ratio ** (2.0 / (n - 10))


def balance_root_bisection(n: int, u0: float, weyl_norm_sq: float, lo: float = 1e-12,
                           hi: float = 1e12) -> float:
    """Same root located numerically, in log(mu)."""
    def f(s):
        mu = math.exp(s)
        return balance(BalanceInput(n, u0, weyl_norm_sq, mu)) / mu ** 2

    return math.exp(brentq(f, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-15))


def dimension_ten_threshold_exact() -> ExactValue:
    """u0 / |Weyl|^2 at which both n = 10 terms cancel: a_10 over the mass coefficient."""
    return pohozaev_constant(10) / mass_coefficient(10)


def dimension_ten_threshold_numeric() -> float:
    """The same ratio found by root-finding the n = 10 balance at mu = 1."""
    return brentq(lambda r: balance(BalanceInput(10, r, 1.0, 1.0)), 1e-6, 1.0,
                  xtol=1e-16, rtol=4 * 2.0 ** -52)


def minimal_energy_gap(n: int, yamabe_m: float) -> float:
    """Y(M)^(n/2) + Y(S^n)^(n/2), using Y(S^n)^(n/2) = K_n^(-n)."""
    if not yamabe_m > 0:
        raise ValueError("the Yamabe invariant must be positive")
    return yamabe_m ** (n / 2) + float(sobolev_mass(n))
