"""Rigorous evaluation of real parameters and integer-linear expressions.

Every real quantity in this package is either an exact rational or a
two-sided rational enclosure [lo, hi] guaranteed to contain the true
value.  Enclosures shrink under refinement (more bits) but never exclude
the truth, so every comparison made through this module is a theorem
about the exact real numbers involved, not about floating-point shadows.

Supported parameter kinds: exact rationals, square roots of non-square
integers, base-2 logarithms of integers that are not powers of two, the
named constants e / pi / golden, and decimal literals with a declared
uncertainty radius (never treated as exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import mpmath

RationalLike = Union[int, Fraction]

#: Hard ceiling for refinement; predicates that cannot be decided at this
#: precision return UNDECIDED instead of looping forever.
DEFAULT_PRECISION_CAP = 4096

#: Starting precision for escalation loops.
START_BITS = 64

HALF = Fraction(1, 2)


class CapExceeded(Exception):
    """Raised when an operation needs more precision than the configured cap."""


class DecimalLiteralError(Exception):
    """Raised when an operation requiring irrationality meets a decimal literal."""


class DependenceError(Exception):
    """Raised when a linear form over supposedly independent parameters is 0."""

    def __init__(self, witness, message="rational dependence detected"):
        super().__init__(f"{message}: witness {witness}")
        self.witness = witness


class Comparison(Enum):
    LT = "LT"
    GT = "GT"
    EQ = "EQ"
    UNDECIDED = "UNDECIDED"


def _mpf_to_fraction(x) -> Fraction:
    """Exact conversion of an mpmath float (binary rational) to Fraction."""
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    if man == 0:
        return Fraction(0)
    val = Fraction(man, 1)
    if exp >= 0:
        val *= 1 << exp
    else:
        val /= 1 << (-exp)
    return -val if sign else val


# ---------------------------------------------------------------------------
# Enclosures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Enclosure:
    """Closed rational interval [lo, hi] certified to contain a real value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")

    @staticmethod
    def exact(value: RationalLike) -> "Enclosure":
        v = Fraction(value)
        return Enclosure(v, v)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    def contains(self, value: RationalLike) -> bool:
        return self.lo <= value <= self.hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def __add__(self, other):
        if isinstance(other, Enclosure):
            return Enclosure(self.lo + other.lo, self.hi + other.hi)
        v = Fraction(other)
        return Enclosure(self.lo + v, self.hi + v)

    __radd__ = __add__

    def __neg__(self):
        return Enclosure(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Enclosure) else -Fraction(other))

    def __mul__(self, other):
        if isinstance(other, Enclosure):
            cands = [self.lo * other.lo, self.lo * other.hi,
                     self.hi * other.lo, self.hi * other.hi]
            return Enclosure(min(cands), max(cands))
        v = Fraction(other)
        if v >= 0:
            return Enclosure(self.lo * v, self.hi * v)
        return Enclosure(self.hi * v, self.lo * v)

    __rmul__ = __mul__

    def reciprocal(self) -> "Enclosure":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("enclosure straddles zero")
        return Enclosure(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        if isinstance(other, Enclosure):
            return self * other.reciprocal()
        return self * (Fraction(1) / Fraction(other))

    def power(self, k: int) -> "Enclosure":
        if k == 0:
            return Enclosure.exact(1)
        if k < 0:
            return self.power(-k).reciprocal()
        lo, hi = self.lo ** k, self.hi ** k
        if k % 2 == 0 and self.lo < 0:
            if self.hi <= 0:
                lo, hi = hi, lo
            else:
                lo, hi = Fraction(0), max(hi, self.lo ** k)
        return Enclosure(min(lo, hi), max(lo, hi))

    def quantize(self, bits: int) -> "Enclosure":
        """Round outward onto the 2^-bits grid.

        Keeps denominators bounded in long accumulations without losing
        rigor: the result contains the original interval.
        """
        scale = 1 << bits
        lo = Fraction(math.floor(self.lo * scale), scale)
        hi = Fraction(math.ceil(self.hi * scale), scale)
        return Enclosure(lo, hi)

    def compare(self, t: RationalLike) -> Comparison:
        t = Fraction(t)
        if self.hi < t:
            return Comparison.LT
        if self.lo > t:
            return Comparison.GT
        if self.lo == t == self.hi:
            return Comparison.EQ
        return Comparison.UNDECIDED

    def __float__(self):
        return float(self.mid)

    def __repr__(self):
        if self.is_exact:
            return f"Enclosure({self.lo})"
        return f"Enclosure({float(self.lo):.17g}, {float(self.hi):.17g})"


def enclosure_sum(items: Iterable[Enclosure]) -> Enclosure:
    lo = Fraction(0)
    hi = Fraction(0)
    for e in items:
        lo += e.lo
        hi += e.hi
    return Enclosure(lo, hi)


def enclosure_min(a: Enclosure, b: Enclosure) -> Enclosure:
    return Enclosure(min(a.lo, b.lo), min(a.hi, b.hi))


def enclosure_max(a: Enclosure, b: Enclosure) -> Enclosure:
    return Enclosure(max(a.lo, b.lo), max(a.hi, b.hi))


# ---------------------------------------------------------------------------
# Low-level rigorous kernels (integer arithmetic only)
# ---------------------------------------------------------------------------

def sqrt_enclosure(n: int, bits: int) -> Enclosure:
    """Enclosure of sqrt(n) with width <= 2^-bits, via integer isqrt."""
    scale = 1 << bits
    s = math.isqrt(n << (2 * bits))
    return Enclosure(Fraction(s, scale), Fraction(s + 1, scale))


def _log2_frac_floor(x0: int, work: int, nbits: int) -> int:
    """Truncating digit extraction: returns f with
    f/2^nbits <= log2(x0 / 2^work) <= f/2^nbits + nbits*2^(2-work) + 2^-nbits
    for x0/2^work in [1, 2).  Truncation only ever lowers the result."""
    one = 1 << work
    x = x0
    frac = 0
    for _ in range(nbits):
        x = (x * x) >> work
        frac <<= 1
        if x >= 2 * one:
            frac |= 1
            x >>= 1
    return frac


def log2_enclosure(n: int, bits: int) -> Enclosure:
    """Enclosure of log2(n) with width <= 2^-bits, n >= 1, integers only.

    Splits log2(n) = k + log2(m) with m = n/2^k in [1, 2) and extracts the
    fractional bits by repeated squaring of scaled integers, truncating
    downward; the upper bound reruns the extraction on the next grid point
    and pads by the accumulated truncation error.
    """
    if n < 1:
        raise ValueError("log2 needs n >= 1")
    if n & (n - 1) == 0:
        return Enclosure.exact(n.bit_length() - 1)
    k = n.bit_length() - 1
    nb = bits + 3
    work = nb + 16
    x0 = (n << work) >> k          # floor(m * 2^work), m = n / 2^k in (1, 2)
    lo = Fraction(_log2_frac_floor(x0, work, nb), 1 << nb)
    # truncation loses at most 2^(1-work) relatively per squaring step
    pad = Fraction(4 * nb, 1 << work) + Fraction(2, 1 << nb)
    hi = Fraction(_log2_frac_floor(x0 + 1, work, nb), 1 << nb) + pad
    return Enclosure(Fraction(k) + lo, Fraction(k) + min(hi, Fraction(1)))


def nth_root_enclosure(x: Fraction, s: int, bits: int) -> Enclosure:
    """Enclosure of x**(1/s) for x >= 0 and integer s >= 1."""
    if x < 0:
        raise ValueError("nth root of a negative rational")
    if s == 1:
        return Enclosure.exact(x)
    scale = 1 << bits
    # floor(root) of x * 2^(s*bits), done on a single integer
    num = x.numerator * (scale ** s)
    whole = num // x.denominator
    if hasattr(math, "isqrt") and s == 2:
        r = math.isqrt(whole)
    else:
        r = _integer_nth_root(whole, s)
    return Enclosure(Fraction(r, scale), Fraction(r + 1, scale))


def _integer_nth_root(n: int, s: int) -> int:
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 0
    r = 1 << ((n.bit_length() + s - 1) // s)
    while True:
        nr = ((s - 1) * r + n // r ** (s - 1)) // s
        if nr >= r:
            break
        r = nr
    while r ** s > n:
        r -= 1
    return r


def rational_power(e: Enclosure, num: int, den: int, bits: int = 64) -> Enclosure:
    """e^(num/den) for e >= 0 and num, den >= 1, with outward rounding."""
    if e.lo < 0:
        raise ValueError("rational power needs a nonnegative enclosure")
    lo = nth_root_enclosure(e.lo ** num, den, bits).lo if e.lo > 0 else Fraction(0)
    hi = nth_root_enclosure(e.hi ** num, den, bits).hi
    return Enclosure(lo, hi)


def neg_log2_enclosure(x: Enclosure, bits: int = 64) -> Enclosure:
    """-log2 of a positive rational interval via integer log2 of num/den."""
    if x.lo <= 0:
        raise ValueError("-log2 needs a positive interval")

    def neg_log2(fr: Fraction, round_up: bool) -> Fraction:
        lq = log2_enclosure(fr.denominator, bits)
        lp = log2_enclosure(fr.numerator, bits)
        return lq.hi - lp.lo if round_up else lq.lo - lp.hi

    return Enclosure(neg_log2(x.hi, False), neg_log2(x.lo, True))


def _const_enclosure(name: str, bits: int) -> Enclosure:
    if name == "golden":
        root5 = sqrt_enclosure(5, bits + 2)
        return Enclosure((1 + root5.lo) / 2, (1 + root5.hi) / 2)
    old = mpmath.iv.prec
    try:
        mpmath.iv.prec = bits + 12
        val = mpmath.iv.e if name == "e" else mpmath.iv.pi
        return Enclosure(_mpf_to_fraction(val.a), _mpf_to_fraction(val.b))
    finally:
        mpmath.iv.prec = old


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

_CONST_NAMES = ("e", "pi", "golden")


@dataclass(frozen=True)
class RealParam:
    """A single symbolic real parameter.

    kind is one of "rational", "sqrt", "log2", "const", "decimal".
    """

    kind: str
    value: Fraction = Fraction(0)   # rational / decimal midpoint
    arg: int = 0                    # sqrt / log2 argument
    name: str = ""                  # const name
    radius: Fraction = Fraction(0)  # decimal uncertainty

    @staticmethod
    def rational(value: RationalLike) -> "RealParam":
        return RealParam("rational", value=Fraction(value))

    @staticmethod
    def sqrt(n: int) -> "RealParam":
        if n < 2 or math.isqrt(n) ** 2 == n:
            raise ValueError(f"sqrt parameter needs a non-square integer >= 2, got {n}")
        return RealParam("sqrt", arg=n)

    @staticmethod
    def log2(n: int) -> "RealParam":
        if n < 3 or n & (n - 1) == 0:
            raise ValueError(f"log2 parameter needs n >= 3 not a power of two, got {n}")
        return RealParam("log2", arg=n)

    @staticmethod
    def const(name: str) -> "RealParam":
        if name not in _CONST_NAMES:
            raise ValueError(f"unknown constant {name!r}; choose from {_CONST_NAMES}")
        return RealParam("const", name=name)

    @staticmethod
    def decimal(text: str, radius: RationalLike) -> "RealParam":
        mid = Fraction(text)
        rad = Fraction(radius)
        if rad <= 0:
            raise ValueError("decimal literal needs a positive uncertainty radius")
        return RealParam("decimal", value=mid, radius=rad)

    @property
    def is_rational(self) -> bool:
        return self.kind == "rational"

    @property
    def is_irrational(self) -> bool:
        return self.kind in ("sqrt", "log2", "const")

    @property
    def is_decimal(self) -> bool:
        return self.kind == "decimal"

    def enclosure(self, bits: int) -> Enclosure:
        if self.kind == "rational":
            return Enclosure.exact(self.value)
        if self.kind == "sqrt":
            return sqrt_enclosure(self.arg, bits)
        if self.kind == "log2":
            return log2_enclosure(self.arg, bits)
        if self.kind == "const":
            return _const_enclosure(self.name, bits)
        # decimal: the declared radius is a hard floor on the width
        return Enclosure(self.value - self.radius, self.value + self.radius)

    def canonical(self) -> str:
        if self.kind == "rational":
            return f"rat:{self.value}"
        if self.kind == "sqrt":
            return f"sqrt:{self.arg}"
        if self.kind == "log2":
            return f"log2:{self.arg}"
        if self.kind == "const":
            return f"const:{self.name}"
        return f"dec:{self.value}@{self.radius}"

    def __str__(self):
        return self.canonical()


def parse_param(text: str) -> RealParam:
    """Parse the parameter grammar: sqrt:2, log2:3, rat:3/7, const:golden,
    dec:1.4142135@1e-7."""
    if ":" not in text:
        raise ValueError(f"parameter {text!r} is not of the form kind:value")
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    rest = rest.strip()
    if kind == "sqrt":
        return RealParam.sqrt(int(rest))
    if kind == "log2":
        return RealParam.log2(int(rest))
    if kind == "rat":
        return RealParam.rational(Fraction(rest))
    if kind == "const":
        return RealParam.const(rest)
    if kind == "dec":
        mid, _, rad = rest.partition("@")
        if not rad:
            raise ValueError(f"decimal literal {text!r} must declare a radius: dec:x@r")
        return RealParam.decimal(mid, Fraction(_decimal_to_fraction(rad)))
    raise ValueError(f"unknown parameter kind {kind!r} in {text!r}")


def _decimal_to_fraction(text: str) -> Fraction:
    # Fraction() accepts "1e-7" only via Decimal-style parsing in 3.11+;
    # normalize scientific notation by hand for 3.10.
    text = text.strip().lower()
    if "e" in text:
        mant, _, expo = text.partition("e")
        return Fraction(mant) * Fraction(10) ** int(expo)
    return Fraction(text)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealExpr:
    """Integer-linear combination of parameters plus a rational offset.

    Identical parameters are merged on construction, so e.g. sqrt(2) -
    sqrt(2) collapses to the exact rational 0 and equality against
    rationals becomes decidable for such degenerate inputs.
    """

    terms: tuple  # ordered tuple of (coeff: int, RealParam), coeff != 0
    offset: Fraction = Fraction(0)

    @staticmethod
    def build(terms: Sequence, offset: RationalLike = 0) -> "RealExpr":
        merged: dict = {}
        off = Fraction(offset)
        for coeff, param in terms:
            coeff = int(coeff)
            if coeff == 0:
                continue
            if param.is_rational:
                off += coeff * param.value
                continue
            key = param.canonical()
            if key in merged:
                old_c, _ = merged[key]
                merged[key] = (old_c + coeff, param)
            else:
                merged[key] = (coeff, param)
        kept = tuple(sorted(
            ((c, p) for c, p in merged.values() if c != 0),
            key=lambda cp: cp[1].canonical()))
        return RealExpr(kept, off)

    @staticmethod
    def of(param: RealParam, coeff: int = 1, offset: RationalLike = 0) -> "RealExpr":
        return RealExpr.build([(coeff, param)], offset)

    @staticmethod
    def constant(value: RationalLike) -> "RealExpr":
        return RealExpr.build([], value)

    @property
    def is_rational(self) -> bool:
        return not self.terms

    @property
    def has_decimal(self) -> bool:
        return any(p.is_decimal for _, p in self.terms)

    @property
    def rational_value(self) -> Fraction:
        if not self.is_rational:
            raise ValueError("expression is not rational")
        return self.offset

    def __add__(self, other):
        if isinstance(other, RealExpr):
            return RealExpr.build(list(self.terms) + list(other.terms),
                                  self.offset + other.offset)
        return RealExpr.build(self.terms, self.offset + Fraction(other))

    def __neg__(self):
        return RealExpr.build([(-c, p) for c, p in self.terms], -self.offset)

    def __sub__(self, other):
        if isinstance(other, RealExpr):
            return self + (-other)
        return self + (-Fraction(other))

    def scale(self, k: int) -> "RealExpr":
        return RealExpr.build([(k * c, p) for c, p in self.terms], k * self.offset)

    def eval(self, bits: int, cap: int = DEFAULT_PRECISION_CAP) -> Enclosure:
        """Enclosure of width <= 2^-bits (unless limited by decimal literals)."""
        if bits > cap:
            raise CapExceeded(f"requested {bits} bits exceeds cap {cap}")
        if not self.terms:
            return Enclosure.exact(self.offset)
        total = sum(abs(c) for c, _ in self.terms)
        inner = bits + max(total.bit_length(), 1) + 1
        acc = Enclosure.exact(self.offset)
        for coeff, param in self.terms:
            acc = acc + param.enclosure(inner) * coeff
        return acc

    def canonical(self) -> str:
        parts = []
        for c, p in self.terms:
            parts.append(f"{c:+d}*{p.canonical()}")
        if self.offset or not parts:
            parts.append(f"{'+' if self.offset >= 0 else ''}{self.offset}")
        return "".join(parts)

    def __str__(self):
        return self.canonical()


# ---------------------------------------------------------------------------
# Derived refinable quantities and decision procedures
# ---------------------------------------------------------------------------

class Refinable:
    """A real number known only through a bits -> Enclosure oracle."""

    def __init__(self, fn: Callable[[int], Enclosure], exact: Fraction | None = None):
        self._fn = fn
        self.exact_value = exact

    @staticmethod
    def of_exact(value: RationalLike) -> "Refinable":
        v = Fraction(value)
        return Refinable(lambda bits: Enclosure.exact(v), exact=v)

    def eval(self, bits: int) -> Enclosure:
        return self._fn(bits)


def _escalation(bits: int, cap: int):
    b = max(bits, 8)
    while True:
        yield min(b, cap)
        if b >= cap:
            return
        b *= 2


def compare(x: RealExpr, t: RationalLike, cap: int = DEFAULT_PRECISION_CAP) -> Comparison:
    """Decide x <=> t.  EQ is only reported on the exact rational path;
    an irrational x is separated from t by refinement or, at the cap,
    reported UNDECIDED."""
    t = Fraction(t)
    if x.is_rational:
        v = x.rational_value
        if v < t:
            return Comparison.LT
        if v > t:
            return Comparison.GT
        return Comparison.EQ
    for bits in _escalation(START_BITS, cap):
        e = x.eval(bits, cap=cap)
        if e.hi < t:
            return Comparison.LT
        if e.lo > t:
            return Comparison.GT
        if e.width == 0:
            break
    return Comparison.UNDECIDED


def compare_refinable(x: Refinable, t: RationalLike,
                      cap: int = DEFAULT_PRECISION_CAP) -> Comparison:
    t = Fraction(t)
    if x.exact_value is not None:
        v = x.exact_value
        return Comparison.LT if v < t else Comparison.GT if v > t else Comparison.EQ
    for bits in _escalation(START_BITS, cap):
        e = x.eval(bits)
        if e.hi < t:
            return Comparison.LT
        if e.lo > t:
            return Comparison.GT
    return Comparison.UNDECIDED


def _nearest_int_window(e: Enclosure):
    """Candidate nearest integers for values in e under the (-1/2, 1/2]
    signed-fractional-part convention (ties resolved downward)."""
    zlo = math.ceil(e.lo - HALF)
    zhi = math.ceil(e.hi - HALF)
    return zlo, zhi


def _dist_of_interval(e: Enclosure) -> Enclosure:
    """Exact interval image of x -> distance to nearest integer over e.

    The map is continuous and piecewise linear with minima 0 at integers
    and maxima 1/2 at half-odd-integers, so the image is determined by the
    endpoint values plus whether either kind of critical point lies inside.
    """
    if e.width >= 1:
        return Enclosure(Fraction(0), HALF)

    def d(v: Fraction) -> Fraction:
        fr = v - math.floor(v)
        return min(fr, 1 - fr)

    lo = min(d(e.lo), d(e.hi))
    hi = max(d(e.lo), d(e.hi))
    if math.ceil(e.lo) <= math.floor(e.hi):          # integer inside
        lo = Fraction(0)
    two_lo, two_hi = math.ceil(2 * e.lo), math.floor(2 * e.hi)
    if any(k % 2 != 0 for k in range(two_lo, two_hi + 1)):  # half-odd inside
        hi = HALF
    return Enclosure(lo, min(hi, HALF))


def frac_and_dist(x: RealExpr, bits: int,
                  cap: int = DEFAULT_PRECISION_CAP):
    """Signed fractional part {x} in (-1/2, 1/2] and distance ||x|| in [0, 1/2].

    For rational x both are exact.  Otherwise the nearest integer is decided
    by refinement starting from `bits`; if it cannot be separated within the
    cap, a widened pair of enclosures still containing the truth is returned
    (||x|| stays tight because it is continuous across the tie).
    """
    if x.is_rational:
        v = x.rational_value
        z = math.ceil(v - HALF)
        fr = v - z
        return Enclosure.exact(fr), Enclosure.exact(abs(fr))
    e = None
    for b in _escalation(bits, cap):
        e = x.eval(b, cap=cap)
        zlo, zhi = _nearest_int_window(e)
        if zlo == zhi:
            fr = e - zlo
            dist = _dist_of_interval(e)
            return fr, dist
    dist = _dist_of_interval(e)
    return Enclosure(Fraction(-1, 2), HALF), dist


def dist_refinable(x: RealExpr, cap: int = DEFAULT_PRECISION_CAP) -> Refinable:
    """||x|| as a refinable quantity."""
    if x.is_rational:
        v = x.rational_value
        z = math.ceil(v - HALF)
        return Refinable.of_exact(abs(v - z))
    return Refinable(lambda bits: _dist_of_interval(x.eval(bits, cap=cap)))


def pow_compare(x: Refinable, s: int, threshold: Fraction,
                cap: int = DEFAULT_PRECISION_CAP) -> Comparison:
    """Decide x^s <=> threshold for x >= 0, s >= 1 integer.

    Used for memberships of the form ||q*beta - g'|| >= q^(-p/s): raising
    both sides to the s-th power turns the irrational threshold into the
    rational `threshold`, keeping the decision exact."""
    t = Fraction(threshold)
    if x.exact_value is not None:
        v = x.exact_value ** s
        return Comparison.LT if v < t else Comparison.GT if v > t else Comparison.EQ
    for bits in _escalation(START_BITS, cap):
        e = x.eval(bits)
        lo = max(e.lo, Fraction(0))
        if e.hi ** s < t:
            return Comparison.LT
        if lo ** s > t:
            return Comparison.GT
    return Comparison.UNDECIDED


# ---------------------------------------------------------------------------
# Scaled-integer fast lane for orbit sweeps
# ---------------------------------------------------------------------------

class FormEvaluator:
    """Fast rigorous evaluation of ||k1*x1 + ... + kn*xn + c|| over many
    integer coefficient vectors.

    Each parameter is pinned once as a scaled integer floor(x * 2^B) from a
    certified enclosure; a coefficient vector then costs a handful of big-int
    operations, with a rigorous error window that callers can escalate when a
    decision is too close to call.
    """

    def __init__(self, params: Sequence[RealParam], offset: RationalLike = 0,
                 bits: int = 128, cap: int = DEFAULT_PRECISION_CAP):
        self.params = tuple(params)
        self.offset = Fraction(offset)
        self.cap = cap
        self._tables: dict = {}
        self.bits = bits
        self._pin(bits)

    def _pin(self, bits: int):
        if bits in self._tables:
            return
        scale = 1 << bits
        pins = []
        for p in self.params:
            e = p.enclosure(bits + 4)
            lo_scaled = math.floor(e.lo * scale)
            # units of 2^-bits covering [lo, hi]
            spread = math.ceil(e.hi * scale) - lo_scaled
            pins.append((lo_scaled, spread))
        off_lo = math.floor(self.offset * scale)
        off_err = 1 if self.offset * scale != off_lo else 0
        self._tables[bits] = (pins, off_lo, off_err)

    def dist_window(self, coeffs: Sequence[int], bits: int | None = None):
        """(d_lo, d_hi, scale_bits): rigorous integer window for
        ||sum k_i x_i + c|| scaled by 2^scale_bits."""
        b = self.bits if bits is None else bits
        self._pin(b)
        pins, off_lo, off_err = self._tables[b]
        scale = 1 << b
        acc = off_lo
        err = off_err
        for k, (pin, spread) in zip(coeffs, pins):
            acc += k * pin
            err += abs(k) * spread
        m = acc % scale
        d = min(m, scale - m)
        # distance to nearest integer is 1-Lipschitz in the argument
        return max(0, d - err), min(scale >> 1, d + err), b

    def dist_enclosure(self, coeffs: Sequence[int], bits: int | None = None) -> Enclosure:
        lo, hi, b = self.dist_window(coeffs, bits)
        scale = 1 << b
        return Enclosure(Fraction(lo, scale), Fraction(hi, scale))

    def _expr(self, coeffs: Sequence[int]) -> RealExpr:
        return RealExpr.build(list(zip(coeffs, self.params)), self.offset)

    def dist_refinable(self, coeffs: Sequence[int]) -> Refinable:
        coeffs = tuple(coeffs)
        expr = self._expr(coeffs)
        if expr.is_rational:
            return dist_refinable(expr, cap=self.cap)

        def fn(bits: int) -> Enclosure:
            return self.dist_enclosure(coeffs, min(bits, self.cap))

        return Refinable(fn)

    def dist_is_zero_exact(self, coeffs: Sequence[int]) -> bool:
        """True iff the linear form collapses syntactically to an integer."""
        expr = self._expr(coeffs)
        return expr.is_rational and expr.rational_value.denominator == 1

    def dist_compare(self, coeffs: Sequence[int], t: RationalLike) -> Comparison:
        """Decide ||form|| <=> t with escalation to the cap."""
        t = Fraction(t)
        expr = self._expr(coeffs)
        if expr.is_rational:
            v = expr.rational_value
            d = abs(v - math.ceil(v - HALF))
            return Comparison.LT if d < t else Comparison.GT if d > t else Comparison.EQ
        for bits in _escalation(self.bits, self.cap):
            lo, hi, b = self.dist_window(coeffs, bits)
            scale = 1 << b
            if Fraction(hi, scale) < t:
                return Comparison.LT
            if Fraction(lo, scale) > t:
                return Comparison.GT
        return Comparison.UNDECIDED

    def dist_pow_compare(self, coeffs: Sequence[int], s: int,
                         threshold: Fraction) -> Comparison:
        """Decide ||form||^s <=> threshold (rational), s >= 1."""
        t = Fraction(threshold)
        expr = self._expr(coeffs)
        if expr.is_rational:
            v = expr.rational_value
            d = abs(v - math.ceil(v - HALF)) ** s
            return Comparison.LT if d < t else Comparison.GT if d > t else Comparison.EQ
        for bits in _escalation(self.bits, self.cap):
            lo, hi, b = self.dist_window(coeffs, bits)
            scale = 1 << b
            if Fraction(hi ** s, scale ** s) < t:
                return Comparison.LT
            if Fraction(lo ** s, scale ** s) > t:
                return Comparison.GT
        return Comparison.UNDECIDED

    def require_irrational(self, context: str):
        for p in self.params:
            if p.is_decimal:
                raise DecimalLiteralError(
                    f"{context}: decimal literal {p} is secretly rational; "
                    "pass allow_decimal=True to override")
