"""Experiment layer: approximation functions, the fibre-truncated quotient
function, dyadic censuses, stratified counting sums, divisor-weight moments,
Borel-Cantelli ratios, union measures, and multiplicative hit counting.

The central object is psi'(q) = psi(q) / ||q*beta - g'|| restricted to the
support ||q*beta - g'|| in [q^-omega, 1); everything downstream (censuses,
moment sums, second-moment ratios, Monte-Carlo surveys) consumes it through
one shared per-q evaluation that carries rigorous enclosures and flags any
membership the precision cap cannot decide.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import arith
from .cfrac import omega_schedule, omega_schedule_lemma3
from .circlesets import (
    AqFamily,
    CircleSet,
    aq_pair_measure_raw,
    build_Aq,
    union as arc_union,
)
from .realnum import (
    DEFAULT_PRECISION_CAP,
    Comparison,
    DependenceError,
    Enclosure,
    FormEvaluator,
    RealParam,
    log2_enclosure,
    neg_log2_enclosure,
    rational_power,
)

RationalLike = Union[int, Fraction]

HALF = Fraction(1, 2)
_U64 = 1 << 64


# ---------------------------------------------------------------------------
# Approximation functions
# ---------------------------------------------------------------------------

_FAMILY_EXPONENTS = {
    # tag: (a, b, d) in c / (q^a (log2 q)^b (log2 log2 q)^d)
    "const": (0, 0, 0),
    "overq": (1, 0, 0),
    "ev": (1, 1, 2),
    "mono2": (1, 2, Fraction(1, 2)),
    "log2sq": (1, 2, 0),
}


@dataclass(frozen=True)
class ApproxFunction:
    """Radius schedule psi with 0 < psi(q) < 1/2 on q >= q0.

    Formula families: const c; c/q; c/(q log2 q (log2 log2 q)^2);
    c/(q (log2 q)^2 (log2 log2 q)^(1/2)); c/(q (log2 q)^2); or an explicit
    table (which, unlike the formulas, may carry zero entries for excluded
    indices)."""

    tag: str
    c: Fraction = Fraction(0)
    table: Optional[tuple] = None   # ((q, value), ...) sorted

    @staticmethod
    def const(c: RationalLike) -> "ApproxFunction":
        return ApproxFunction._formula("const", c)

    @staticmethod
    def over_q(c: RationalLike) -> "ApproxFunction":
        return ApproxFunction._formula("overq", c)

    @staticmethod
    def ev_shape(c: RationalLike) -> "ApproxFunction":
        return ApproxFunction._formula("ev", c)

    @staticmethod
    def mono2_shape(c: RationalLike) -> "ApproxFunction":
        return ApproxFunction._formula("mono2", c)

    @staticmethod
    def log2sq_shape(c: RationalLike) -> "ApproxFunction":
        return ApproxFunction._formula("log2sq", c)

    @staticmethod
    def _formula(tag: str, c: RationalLike) -> "ApproxFunction":
        c = Fraction(c)
        if c <= 0:
            raise ValueError("formula families need c > 0")
        return ApproxFunction(tag, c)

    @staticmethod
    def from_table(values: dict) -> "ApproxFunction":
        items = tuple(sorted((int(q), Fraction(v)) for q, v in values.items()))
        for q, v in items:
            if not (0 <= v < HALF):
                raise ValueError(f"table value psi({q})={v} outside [0, 1/2)")
        return ApproxFunction("table", table=items)

    @property
    def q0(self) -> int:
        """Smallest index where the formula is defined and psi < 1/2."""
        if self.tag == "table":
            return self.table[0][0] if self.table else 1
        a, b, d = _FAMILY_EXPONENTS[self.tag]
        q = 1
        if b or d:
            q = 2
        if d:
            q = 3   # log2 log2 q must be positive
        while True:
            v = self.eval(q)
            if v.hi < HALF:
                return q
            q += 1
            if q > 10 ** 9:
                raise ValueError("no valid domain start below 1e9")

    @property
    def is_monotone(self) -> bool:
        return self.tag != "table"

    def eval(self, q: int, bits: int = 64) -> Enclosure:
        """psi(q) as an enclosure (exact for const/overq/table)."""
        if q < 1:
            raise ValueError("q must be >= 1")
        if self.tag == "table":
            for qq, v in self.table:
                if qq == q:
                    return Enclosure.exact(v)
            raise KeyError(f"table has no entry for q={q}")
        a, b, d = _FAMILY_EXPONENTS[self.tag]
        if self.tag == "const":
            return Enclosure.exact(self.c)
        if self.tag == "overq":
            return Enclosure.exact(self.c / q)
        if q < (3 if d else 2):
            raise ValueError(f"psi family {self.tag} undefined at q={q}")
        lg = log2_enclosure(q, bits)
        den = Enclosure.exact(Fraction(q ** a))
        den = den * lg.power(int(b)) if b else den
        if d:
            llg = neg_log2_enclosure(Enclosure(1 / lg.hi, 1 / lg.lo), bits)
            if llg.lo <= 0:
                raise ValueError(f"psi family {self.tag} undefined at q={q}")
            if d == Fraction(1, 2):
                llg_pow = rational_power(llg, 1, 2, bits=bits)
            else:
                llg_pow = llg.power(int(d))
            den = den * llg_pow
        return (Enclosure.exact(self.c) / den).quantize(96)

    def eval_checked(self, q: int, bits: int = 64) -> Enclosure:
        v = self.eval(q, bits)
        if not v.hi < HALF:
            raise ValueError(f"psi({q}) = {v} reaches 1/2; domain starts at {self.q0}")
        return v

    def canonical(self) -> str:
        if self.tag == "table":
            items = ",".join(f"{q}={v}" for q, v in self.table)
            return f"table:{items}"
        return f"{self.tag}:{self.c}"


def parse_psi(text: str) -> ApproxFunction:
    """Grammar: const:1/10, overq:1/4, ev:1, mono2:1, log2sq:1/2,
    table:2=1/8,3=0,5=1/9."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind == "table":
        entries = {}
        for item in rest.split(","):
            qtxt, _, vtxt = item.partition("=")
            entries[int(qtxt)] = Fraction(vtxt)
        return ApproxFunction.from_table(entries)
    if kind not in _FAMILY_EXPONENTS:
        raise ValueError(f"unknown psi family {kind!r}")
    return ApproxFunction._formula(kind, Fraction(rest))


# ---------------------------------------------------------------------------
# The truncated quotient function psi'
# ---------------------------------------------------------------------------

OmegaSpec = Union[None, Fraction, tuple]  # tuple = ("main2"|"lemma3", c)


@dataclass(frozen=True)
class PsiPrime:
    """psi'(q) = psi(q)/||q beta - g'|| on the support
    ||q beta - g'|| in [q^-omega(q), 1), zero elsewhere.

    omega None means no truncation (the raw product set); a Fraction is a
    constant exponent; ("main2", c) and ("lemma3", c) select the named
    shrinking schedules."""

    psi: ApproxFunction
    beta: RealParam
    gamma_prime: RealParam
    omega: OmegaSpec = None

    def omega_at(self, q: int) -> Optional[Fraction]:
        if self.omega is None:
            return None
        if isinstance(self.omega, tuple):
            name, c = self.omega
            if name == "main2":
                return omega_schedule(q, Fraction(c))
            if name == "lemma3":
                return omega_schedule_lemma3(q, Fraction(c))
            raise ValueError(f"unknown omega schedule {name!r}")
        return Fraction(self.omega)

    def canonical(self) -> str:
        if self.omega is None:
            om = "none"
        elif isinstance(self.omega, tuple):
            om = f"{self.omega[0]}@{self.omega[1]}"
        else:
            om = str(self.omega)
        return (f"psi={self.psi.canonical()};beta={self.beta.canonical()};"
                f"gp={self.gamma_prime.canonical()};omega={om}")


class SupportState:
    IN = "IN"
    OUT = "OUT"
    UNDECIDED = "UNDECIDED"


class FibreContext:
    """Shared rigorous evaluation of ||q beta - g'|| and the psi' values.

    Pow-comparisons keep support decisions exact for small omega
    denominators; schedule omegas with dyadic denominators fall back to
    interval log2 comparisons (undecidable cases are flagged, never guessed).
    """

    def __init__(self, pp: PsiPrime, cap: int = DEFAULT_PRECISION_CAP):
        self.pp = pp
        self.cap = cap
        params = [pp.beta]
        self._gp_in_form = False
        if pp.gamma_prime.is_rational:
            offset = -pp.gamma_prime.value
        else:
            params.append(pp.gamma_prime)
            offset = 0
            self._gp_in_form = True
        self.fe = FormEvaluator(params, offset, cap=cap)

    def _coeffs(self, q: int):
        return (q, -1) if self._gp_in_form else (q,)

    def dist(self, q: int, bits: Optional[int] = None) -> Enclosure:
        return self.fe.dist_enclosure(self._coeffs(q), bits)

    def dist_is_zero(self, q: int) -> bool:
        return self.fe.dist_is_zero_exact(self._coeffs(q))

    def support_state(self, q: int) -> str:
        """Is ||q beta - g'|| inside [q^-omega(q), 1)?  (1 is never reached:
        the distance is at most 1/2.)"""
        om = self.pp.omega_at(q)
        if om is None:
            return SupportState.IN
        if om <= 0:
            return SupportState.IN if not self.dist_is_zero(q) else SupportState.OUT
        c = self._cmp_dist_vs_power(q, om)
        if c is None:
            return SupportState.UNDECIDED
        return SupportState.IN if c >= 0 else SupportState.OUT

    def _cmp_dist_vs_power(self, q: int, om: Fraction,
                           extra_pow2: int = 0) -> Optional[int]:
        """sign of ||q beta - g'|| - 2^extra_pow2 * q^-om, or None."""
        p, s = om.numerator, om.denominator
        coeffs = self._coeffs(q)
        if s <= 64:
            thr = Fraction(2 ** (extra_pow2 * s), q ** p) if extra_pow2 >= 0 \
                else Fraction(1, q ** p * 2 ** (-extra_pow2 * s))
            c = self.fe.dist_pow_compare(coeffs, s, thr)
            if c == Comparison.UNDECIDED:
                return None
            return {Comparison.LT: -1, Comparison.EQ: 0, Comparison.GT: 1}[c]
        # schedule omega: compare -log2(dist) against om*log2(q) - extra
        lgq = log2_enclosure(q, 96)
        rhs = Enclosure(lgq.lo * om, lgq.hi * om) - Fraction(extra_pow2)
        bits = 128
        while True:
            d = self.dist(q, bits)
            if d.lo <= 0:
                if self.dist_is_zero(q):
                    return -1    # zero distance sits below any positive power
            else:
                nl = neg_log2_enclosure(d, 96)
                if nl.hi < rhs.lo:
                    return 1      # dist > threshold
                if nl.lo > rhs.hi:
                    return -1
            if bits >= self.cap:
                return None
            bits = min(2 * bits, self.cap)

    def psi_prime(self, q: int):
        """(value enclosure, support state).  Zero outside the support."""
        state = self.support_state(q)
        if state == SupportState.OUT:
            return Enclosure.exact(0), state
        if state == SupportState.UNDECIDED:
            return Enclosure.exact(0), state
        psi_v = self.pp.psi.eval(q)
        if psi_v.hi == 0:
            return Enclosure.exact(0), state
        if self.dist_is_zero(q):
            raise DependenceError((q,), "||q beta - g'|| vanishes")
        bits = 128
        while True:
            d = self.dist(q, bits)
            if d.lo > 0:
                return (psi_v / d).quantize(128), state
            if bits >= self.cap:
                raise DependenceError((q,), "distance cannot be separated from 0")
            bits = min(2 * bits, self.cap)

    def cell_of(self, q: int) -> Optional[int]:
        """Index l with ||q beta - g'|| in [2^l q^-om, 2^(l+1) q^-om), or
        None when outside the support / undecided (query support first)."""
        om = self.pp.omega_at(q)
        if om is None or om <= 0:
            raise ValueError("census cells need a positive omega")
        d = self.dist(q)
        if d.lo <= 0:
            d = self.dist(q, 512)
            if d.lo <= 0:
                return None
        # float guess, then rigorous confirmation of both walls
        guess = math.log2(float(d.mid)) + float(om) * math.log2(q)
        for l in sorted({math.floor(guess), math.floor(guess) - 1,
                         math.floor(guess) + 1}):
            if l < 0:
                continue
            lo_cmp = self._cmp_dist_vs_power(q, om, extra_pow2=l)
            hi_cmp = self._cmp_dist_vs_power(q, om, extra_pow2=l + 1)
            if lo_cmp is None or hi_cmp is None:
                return None
            if lo_cmp >= 0 and hi_cmp < 0:
                return l
        return None


def psi_prime(pp: PsiPrime, q: int, cap: int = DEFAULT_PRECISION_CAP):
    """One-shot evaluation; sweeps should hold a FibreContext instead."""
    return FibreContext(pp, cap=cap).psi_prime(q)


@dataclass
class DivergenceResult:
    Q: int
    total: Enclosure
    contributing: int
    undecided: int


def divergence_sum(pp: PsiPrime, Q: int,
                   cap: int = DEFAULT_PRECISION_CAP) -> DivergenceResult:
    """sum over q <= Q on the support of psi(q)/||q beta - g'||; undecided
    memberships are excluded from the sum and counted separately."""
    ctx = FibreContext(pp, cap=cap)
    q0 = pp.psi.q0
    lo = Fraction(0)
    hi = Fraction(0)
    contributing = 0
    undecided = 0
    for q in range(max(1, q0), Q + 1):
        v, state = ctx.psi_prime(q)
        if state == SupportState.UNDECIDED:
            undecided += 1
            continue
        if v.hi > 0:
            contributing += 1
            lo += v.lo
            hi += v.hi
    return DivergenceResult(Q, Enclosure(lo, hi), contributing, undecided)


# ---------------------------------------------------------------------------
# Census of the dyadic distance cells
# ---------------------------------------------------------------------------

@dataclass
class GlCensus:
    Q: int
    cells: dict                    # l -> sorted list of q
    undecided: list = field(default_factory=list)

    def members(self, l: int) -> list:
        return self.cells.get(l, [])


def gl_census(beta: RealParam, gamma_prime, omega, Q: int,
              psi: Optional[ApproxFunction] = None,
              cap: int = DEFAULT_PRECISION_CAP) -> GlCensus:
    """Half-open census: q is in cell l iff ||q beta - g'|| lands in
    [2^l q^-omega, 2^(l+1) q^-omega); the cells partition the support."""
    gp = gamma_prime if isinstance(gamma_prime, RealParam) \
        else RealParam.rational(Fraction(gamma_prime))
    pp = PsiPrime(psi or ApproxFunction.const(Fraction(1, 4)), beta, gp, omega)
    ctx = FibreContext(pp, cap=cap)
    cells: dict = {}
    undecided = []
    for q in range(1, Q + 1):
        state = ctx.support_state(q)
        if state == SupportState.UNDECIDED:
            undecided.append(q)
            continue
        if state == SupportState.OUT:
            continue
        l = ctx.cell_of(q)
        if l is None:
            undecided.append(q)
            continue
        cells.setdefault(l, []).append(q)
    return GlCensus(Q, cells, undecided)


# ---------------------------------------------------------------------------
# Stratified counting sums
# ---------------------------------------------------------------------------

class NotADivisor(ValueError):
    pass


@dataclass
class SklrResult:
    count: int
    members: list
    undecided: int


def sklr_sum(pp: PsiPrime, gamma, q: int, k: int, l: int, r: int,
             cap: int = DEFAULT_PRECISION_CAP) -> SklrResult:
    """Count q' with gcd(q', q) = r, q' in the census cell l, q' in the
    dyadic band [q/2^(k+1), q/2^k], and the center-difference indicator
    I_{Delta(q',q)/r}({gamma (q'-q)/r}) equal to 1, where Delta uses psi'.
    """
    if q % r != 0:
        raise NotADivisor(f"{r} does not divide {q}")
    if k < 0 or l < 0:
        raise ValueError("k and l must be >= 0")
    ctx = FibreContext(pp, cap=cap)
    gexpr_fe = None
    if isinstance(gamma, RealParam) and gamma.is_irrational:
        gexpr_fe = FormEvaluator([gamma], 0, cap=cap)
    lo_band = -((-q) // (1 << (k + 1)))    # ceil(q / 2^(k+1))
    hi_band = q // (1 << k)
    psq, st_q = ctx.psi_prime(q)
    undecided = 1 if st_q == SupportState.UNDECIDED else 0
    members = []
    for qp in range(max(1, lo_band), hi_band + 1):
        if qp == q or math.gcd(qp, q) != r:
            continue
        state = ctx.support_state(qp)
        if state == SupportState.UNDECIDED:
            undecided += 1
            continue
        if state == SupportState.OUT:
            continue
        if ctx.cell_of(qp) != l:
            continue
        pspq, _ = ctx.psi_prime(qp)
        delta = pspq * q + psq * qp
        thr = delta * Fraction(1, r)
        m = (qp - q) // r
        if gexpr_fe is not None:
            ind = _indicator_closed(gexpr_fe, m, thr, cap)
        else:
            gv = gamma.value if isinstance(gamma, RealParam) else Fraction(gamma)
            x = gv * m
            dist = abs(x - round(x))
            if dist <= thr.lo:
                ind = 1
            elif dist > thr.hi:
                ind = 0
            else:
                ind = None   # lands inside the threshold's own error bar
        if ind is None:
            undecided += 1
        elif ind:
            members.append(qp)
    return SklrResult(len(members), members, undecided)


def _indicator_closed(fe: FormEvaluator, m: int, thr: Enclosure,
                      cap: int) -> Optional[int]:
    """1 iff ||m gamma|| <= thr (closed ball), decided by interval
    separation; None when the enclosures cannot be pulled apart."""
    bits = fe.bits
    while True:
        d = fe.dist_enclosure((m,), bits)
        if d.hi <= thr.lo:
            return 1
        if d.lo > thr.hi:
            return 0
        if bits >= cap:
            return None
        bits = min(2 * bits, cap)


def f_moment_sum(beta: RealParam, gamma_prime, omega, Q: int, l: int, K: int,
                 cap: int = DEFAULT_PRECISION_CAP):
    """(sum of F(q)^K over the census cell l intersected with [Q/2, Q],
    reference value Q^(1-omega) 2^(l+1)) as enclosures."""
    if Q < 2 or K < 1:
        raise ValueError("need Q >= 2 and K >= 1")
    if isinstance(omega, tuple):
        raise ValueError("moment sums need a constant omega exponent")
    om = Fraction(omega)
    census = gl_census(beta, gamma_prime, om, Q, cap=cap)
    lo = Fraction(0)
    hi = Fraction(0)
    for q in census.members(l):
        if q < Fraction(Q, 2) or q > Q:
            continue
        f = arith.F_of(q).power(K)
        lo += f.lo
        hi += f.hi
    p, s = om.numerator, om.denominator
    # reference shape Q^(1-omega) * 2^(l+1)
    if om < 1:
        ref = rational_power(Enclosure.exact(Q), s - p, s, bits=96) \
            * Fraction(2 ** (l + 1))
    elif om == 1:
        ref = Enclosure.exact(Fraction(2 ** (l + 1)))
    else:
        ref = rational_power(Enclosure.exact(Q), p - s, s, bits=96) \
            .reciprocal() * Fraction(2 ** (l + 1))
    return Enclosure(lo, hi), ref


# ---------------------------------------------------------------------------
# Borel-Cantelli series and unions
# ---------------------------------------------------------------------------

def _radius_table(psi_or_pp, Q: int, cap: int):
    """Per-q half-measures min(1/2, psi'(q)) as enclosures, plus flags.

    Returns (values, undecided_count) where values[q] is the enclosure of
    psi'(q) (or psi(q) for a plain ApproxFunction), clamped below 1/2 only
    implicitly: callers clamp measures via min(1, 2 psi')."""
    values = {}
    undecided = 0
    if isinstance(psi_or_pp, PsiPrime):
        ctx = FibreContext(psi_or_pp, cap=cap)
        q0 = psi_or_pp.psi.q0
        for q in range(1, Q + 1):
            if q < q0:
                values[q] = Enclosure.exact(0)
                continue
            v, state = ctx.psi_prime(q)
            if state == SupportState.UNDECIDED:
                undecided += 1
                values[q] = Enclosure.exact(0)
            else:
                values[q] = v
    else:
        psi = psi_or_pp
        q0 = psi.q0
        for q in range(1, Q + 1):
            values[q] = psi.eval(q) if q >= q0 else Enclosure.exact(0)
    return values, undecided


@dataclass
class BCSeries:
    Q: int
    mass: list          # mass[i] = enclosure of sum_{q<=i+1} |A_q|
    pair_mass: list     # pair_mass[i] = enclosure of sum_{q,q'<=i+1} |A_q ∩ A_q'|
    ratio: Enclosure
    undecided: int = 0

    @property
    def final_mass(self) -> Enclosure:
        return self.mass[-1]

    @property
    def final_pair_mass(self) -> Enclosure:
        return self.pair_mass[-1]


def bc_ratio(psi_or_pp, gamma, Q: int, bits: int = 96,
             cap: int = DEFAULT_PRECISION_CAP,
             checkpoint_every: int = 0) -> BCSeries:
    """(sum |A_q|)^2 / sum |A_q intersect A_q'| over q, q' <= Q with the
    diagonal included; the divergence-type lower bound for the limsup mass.

    psi' values of 1/2 or more make A_q the full circle; the measure terms
    clamp accordingly.  Exact rationals when gamma and psi are rational,
    outward dyadic accumulation otherwise.
    """
    if Q < 2:
        raise ValueError("Q must be >= 2")
    values, undecided = _radius_table(psi_or_pp, Q, cap)
    gq = gamma if isinstance(gamma, RealParam) else RealParam.rational(Fraction(gamma))
    if gq.is_rational:
        g, gslack = gq.value % 1, Fraction(0)
    else:
        e = gq.enclosure(bits)
        g, gslack = e.mid % 1, e.width / 2

    exact_mode = gslack == 0 and all(v.is_exact for v in values.values())
    shift = 192
    scale = 1 << shift

    def clamp_measure(v: Enclosure) -> Enclosure:
        return Enclosure(min(Fraction(1), 2 * v.lo), min(Fraction(1), 2 * v.hi))

    mass_list = []
    pair_list = []
    mass_lo = Fraction(0)
    mass_hi = Fraction(0)
    pair_lo_acc = 0
    pair_hi_acc = 0
    pair_lo_fr = Fraction(0)
    full = {q: 2 * values[q].lo >= 1 for q in values}
    radii = {q: values[q] * Fraction(1, q) for q in values}

    mark = checkpoint_every if checkpoint_every > 0 else 1
    for q in range(1, Q + 1):
        mq = clamp_measure(values[q])
        mass_lo += mq.lo
        mass_hi += mq.hi
        # diagonal |A_q ∩ A_q| = |A_q|
        if exact_mode:
            pair_lo_fr += mq.lo
        else:
            pair_lo_acc += (mq.lo.numerator * scale) // mq.lo.denominator
            pair_hi_acc += -((-mq.hi.numerator * scale) // mq.hi.denominator)
        for qp in range(1, q):
            inter = _pair_measure_clamped(radii, values, full, q, qp, g, gslack)
            if exact_mode:
                pair_lo_fr += 2 * inter.lo
            else:
                pair_lo_acc += 2 * ((inter.lo.numerator * scale)
                                    // inter.lo.denominator)
                pair_hi_acc += 2 * (-((-inter.hi.numerator * scale)
                                      // inter.hi.denominator))
        if q % mark == 0 or q == Q:
            mass_list.append(Enclosure(mass_lo, mass_hi))
            if exact_mode:
                pair_list.append(Enclosure(pair_lo_fr, pair_lo_fr))
            else:
                pair_list.append(Enclosure(Fraction(max(pair_lo_acc, 0), scale),
                                           Fraction(pair_hi_acc, scale)))
    num = mass_list[-1]
    den = pair_list[-1]
    if den.hi <= 0:
        raise ZeroDivisionError("all psi values are zero")
    num_sq = Enclosure(num.lo ** 2, num.hi ** 2)
    lo = num_sq.lo / den.hi
    hi = num_sq.hi / den.lo if den.lo > 0 else Fraction(1)
    ratio = Enclosure(lo, min(hi, Fraction(1)) if lo <= 1 else hi)
    return BCSeries(Q, mass_list, pair_list, ratio, undecided)


def _pair_measure_clamped(radii, values, full, q, qp, g, gslack) -> Enclosure:
    vq, vqp = values[q], values[qp]
    if vq.hi == 0 or vqp.hi == 0:
        return Enclosure.exact(0)
    if full[q] or full[qp]:
        other = vqp if full[q] else vq
        m = Enclosure(min(Fraction(1), 2 * other.lo), min(Fraction(1), 2 * other.hi))
        if full[q] and full[qp]:
            return Enclosure.exact(1)
        return m
    if 2 * vq.hi >= 1 or 2 * vqp.hi >= 1:
        # possibly-full but not certainly: bracket crudely
        cap_m = min(Fraction(1), 2 * min(vq.hi, vqp.hi))
        return Enclosure(Fraction(0), cap_m)
    lo_i, hi_i, CD = aq_pair_measure_raw(radii[q], radii[qp], q, qp, g, gslack)
    return Enclosure(Fraction(lo_i, CD), Fraction(hi_i, CD))


def union_series(psi_or_pp, gamma, Q0: int, Q: int, bits: int = 64,
                 cap: int = DEFAULT_PRECISION_CAP) -> Enclosure:
    """Measure of the union of A_q for Q0 <= q <= Q, by exact arc folding."""
    if Q0 > Q:
        raise ValueError("need Q0 <= Q")
    values, _ = _radius_table(psi_or_pp, Q, cap)
    acc = CircleSet.empty()
    for q in range(Q0, Q + 1):
        v = values[q]
        if v.hi == 0:
            continue
        if 2 * v.lo >= 1:
            return Enclosure.exact(1)
        s = build_Aq(v, gamma, q, bits=bits)
        acc = arc_union(acc, s)
    return acc.measure_bounds()


# ---------------------------------------------------------------------------
# Hit counting and Monte-Carlo surveys
# ---------------------------------------------------------------------------

def counter_sample(seed: int, index: int) -> int:
    """Counter-based uniform draw on [0, 2^64): keyed blake2b of the index,
    so streams are reproducible and independent of evaluation order."""
    h = hashlib.blake2b(index.to_bytes(8, "little"),
                        key=(seed % _U64).to_bytes(8, "little"),
                        digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass
class HitResult:
    count: int
    undecided: int
    degenerate: list    # q with ||q beta - g'|| = 0 exactly (product test
    #                     trivially satisfied; flagged, still counted)


class _HitSweep:
    """Precomputed per-q thresholds for counting q <= Q with
    ||q x - gamma|| < psi'(q), vectorized over dyadic samples x = k/2^64."""

    def __init__(self, gamma, pp: PsiPrime, Q: int, direct: bool,
                 cap: int = DEFAULT_PRECISION_CAP):
        self.cap = cap
        self.Q = Q
        gq = gamma if isinstance(gamma, RealParam) \
            else RealParam.rational(Fraction(gamma))
        self.gamma = gq
        ge = gq.enclosure(80) if not gq.is_rational else None
        if ge is None:
            gv = gq.value % 1
            self.G = (gv.numerator * _U64) // gv.denominator
            self.gwidth = 0 if gv.denominator & (gv.denominator - 1) == 0 \
                and gv.denominator <= _U64 else 1
        else:
            self.G = math.floor(ge.lo * _U64)
            self.gwidth = math.ceil(ge.hi * _U64) - self.G
        self.undecided_q = []
        self.degenerate = []
        thr_lo = np.zeros(Q + 1, dtype=np.uint64)
        thr_hi = np.zeros(Q + 1, dtype=np.uint64)
        q0 = pp.psi.q0
        ctx = None if direct else FibreContext(pp, cap=cap)
        self._exact_thresholds = {}
        for q in range(max(1, q0), Q + 1):
            if direct:
                t = pp.psi.eval(q)
            else:
                if ctx.dist_is_zero(q):
                    self.degenerate.append(q)
                    t = Enclosure.exact(1)   # product is 0 < psi: always hit
                else:
                    v, state = ctx.psi_prime(q)
                    if state == SupportState.UNDECIDED:
                        self.undecided_q.append(q)
                        continue
                    t = v
            if t.hi == 0:
                continue
            self._exact_thresholds[q] = t
            thr_lo[q] = min(_U64 - 1, (t.lo.numerator * _U64) // t.lo.denominator)
            thr_hi[q] = min(_U64 - 1, -((-t.hi.numerator * _U64)
                                        // t.hi.denominator))
        self.thr_lo = thr_lo
        self.thr_hi = thr_hi
        self.qs = np.arange(Q + 1, dtype=np.uint64)
        self.margin = np.zeros(Q + 1, dtype=np.uint64)
        self.margin[1:] = self.gwidth + 1

    def expected(self) -> Enclosure:
        lo = Fraction(0)
        hi = Fraction(0)
        for q, t in self._exact_thresholds.items():
            lo += min(Fraction(1), 2 * t.lo)
            hi += min(Fraction(1), 2 * t.hi)
        for _ in self.undecided_q:
            hi += Fraction(1)   # undecided support: contribution in [0, 1]
        return Enclosure(lo, hi)

    def count_for(self, k: int) -> HitResult:
        with np.errstate(over="ignore"):
            # gamma enters once, not per q: (q x - gamma) 2^64 = q k - G - theta
            M = self.qs * np.uint64(k % _U64) - np.uint64(self.G % _U64)
            dmin = np.minimum(M, -M)  # uint64 wraparound: min(M, 2^64 - M)
        sure = (dmin + self.margin < self.thr_lo) & (self.thr_lo > 0)
        maybe = (dmin < self.thr_hi + self.margin) & (self.thr_hi > 0) & ~sure
        count = int(np.sum(sure[1:]))
        undecided = 0
        x = Fraction(k, _U64)
        for q in np.nonzero(maybe[1:])[0] + 1:
            q = int(q)
            res = self._exact_hit(q, x)
            if res is None:
                undecided += 1
            elif res:
                count += 1
        return HitResult(count, undecided + len(self.undecided_q),
                         list(self.degenerate))

    def _exact_hit(self, q: int, x: Fraction) -> Optional[bool]:
        t = self._exact_thresholds.get(q)
        if t is None:
            return False
        if self.gamma.is_rational:
            v = q * x - self.gamma.value
            d = abs(v - round(v))
            if d < t.lo:
                return True
            if d >= t.hi:
                return False
            return None if not t.is_exact else d < t.lo
        fe = FormEvaluator([self.gamma], q * x, cap=self.cap)
        bits = 128
        while True:
            d = fe.dist_enclosure((-1,), bits)
            if d.hi < t.lo:
                return True
            if d.lo >= t.hi:
                return False
            if bits >= self.cap:
                return None
            bits = min(2 * bits, self.cap)


def hit_count(x, gamma, pp: PsiPrime, Q: int, direct: bool = False,
              cap: int = DEFAULT_PRECISION_CAP) -> HitResult:
    """#{q <= Q : ||q x - gamma|| * ||q beta - g'|| < psi(q)} for a rational
    sample x (with the omega truncation when pp carries one); `direct=True`
    ignores the fibre and tests ||q x - gamma|| < psi(q).

    q with ||q beta - g'|| exactly 0 satisfy the product test vacuously;
    they are counted and flagged as degenerate.
    """
    x = Fraction(x) if not isinstance(x, RealParam) else x
    if isinstance(x, RealParam):
        if not x.is_rational:
            raise ValueError("hit counting samples must be rational")
        x = x.value
    sweep = _HitSweep(gamma, pp, Q, direct, cap=cap)
    if x.denominator & (x.denominator - 1) == 0 and x.denominator <= _U64:
        k = x.numerator * (_U64 // x.denominator) % _U64
        return sweep.count_for(k)
    # non-dyadic sample: exact per-q path
    count = 0
    undecided = 0
    for q in range(1, Q + 1):
        res = sweep._exact_hit(q, x)
        if res is None:
            undecided += 1
        elif res:
            count += 1
    return HitResult(count, undecided + len(sweep.undecided_q),
                     list(sweep.degenerate))


@dataclass
class McSurvey:
    samples: int
    mean: Fraction
    expected: Enclosure
    deviation: Fraction
    undecided: int


def mc_survey(gamma, pp: PsiPrime, Q: int, samples: int, seed: int,
              direct: bool = False,
              cap: int = DEFAULT_PRECISION_CAP) -> McSurvey:
    """Mean hit count over `samples` uniform dyadic x versus the exact
    expectation sum_q min(1, 2 psi'(q)); deterministic given the seed."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sweep = _HitSweep(gamma, pp, Q, direct, cap=cap)
    total = 0
    undecided = 0
    for i in range(samples):
        res = sweep.count_for(counter_sample(seed, i))
        total += res.count
        undecided += res.undecided
    mean = Fraction(total, samples)
    expected = sweep.expected()
    return McSurvey(samples, mean, expected, mean - expected.mid, undecided)


# ---------------------------------------------------------------------------
# Doubly metric sampling
# ---------------------------------------------------------------------------

@dataclass
class DoublyMetricResult:
    samples: int
    failures: int
    fraction: Fraction
    witnesses: dict      # sample index -> (k1, k2) worst witness
    union_bound: Enclosure


def doubly_metric_union_bound(N: int, H_prime: Fraction) -> Enclosure:
    """sum_{k <= N} 4 k^(1 - H') (exact for integer H')."""
    Hp = Fraction(H_prime)
    if Hp.denominator == 1:
        e = int(Hp) - 1
        v = sum(Fraction(4, k ** e) for k in range(1, N + 1))
        return Enclosure.exact(v)
    lo = Fraction(0)
    hi = Fraction(0)
    p, s = (Hp - 1).numerator, (Hp - 1).denominator
    for k in range(1, N + 1):
        t = rational_power(Enclosure.exact(Fraction(k)), p, s, bits=48)
        lo += 4 / t.hi
        hi += 4 / t.lo
    return Enclosure(lo, hi)


def doubly_metric_sample(gamma: RealParam, H_prime, N: int, samples: int,
                         seed: int, force_beta: Optional[RealParam] = None,
                         cap: int = DEFAULT_PRECISION_CAP) -> DoublyMetricResult:
    """Fraction of sampled beta admitting a pair (k1, k2), k1 k2 != 0 and
    2 <= max(|k1|, |k2|) <= N, with ||k1 gamma + k2 beta|| <=
    max(|k1|,|k2|)^(-H'); the almost-sure complement of joint Diophantinity.

    A forced beta that coincides with gamma is reported as a failure through
    the syntactic witness (1, -1).  H' must exceed 2 for the union bound to
    converge.
    """
    Hp = Fraction(H_prime)
    if Hp <= 2:
        raise ValueError("H' must be larger than 2")
    if Hp.denominator != 1:
        raise ValueError("integer H' only (the threshold must stay rational)")
    Hp = int(Hp)
    if not gamma.is_irrational:
        raise ValueError("gamma must be irrational")
    ge = gamma.enclosure(96)
    scale_bits = 64
    pairs = [(k1, k2) for k2 in range(1, N + 1)
             for k1 in list(range(-N, 0)) + list(range(1, N + 1))
             if max(abs(k1), k2) >= 2]
    k1s = np.array([p[0] for p in pairs], dtype=np.int64)
    k2s = np.array([p[1] for p in pairs], dtype=np.uint64)
    # k1*gamma scaled to 2^64, with one window per pair
    g_lo = math.floor(ge.lo * _U64)
    g_spread = math.ceil(ge.hi * _U64) - g_lo
    with np.errstate(over="ignore"):
        K1G = (k1s.astype(np.uint64) * np.uint64(g_lo % _U64))
    marg = (np.abs(k1s).astype(np.uint64) * np.uint64(g_spread)
            + np.uint64(2))
    heights = np.maximum(np.abs(k1s), k2s.astype(np.int64)).astype(object)
    thr = np.array([min(_U64 - 1, _U64 // int(h) ** Hp) for h in heights],
                   dtype=np.uint64)
    thr_hi = thr + np.uint64(1)

    fe = None
    failures = 0
    witnesses = {}
    for i in range(samples):
        if force_beta is not None:
            beta = force_beta
            if fe is None:
                fe = FormEvaluator([gamma, beta], 0, cap=cap)
            if fe.dist_is_zero_exact((1, -1)):
                failures += 1
                witnesses[i] = (1, -1)
                continue
            be = beta.enclosure(96)
            k = math.floor(((be.lo + be.hi) / 2 % 1) * _U64)
            b_spread = 2
        else:
            k = counter_sample(seed, i)
            b_spread = 0
        with np.errstate(over="ignore"):
            M = K1G + k2s * np.uint64(k)
        dmin = np.minimum(M, -M)
        tot_marg = marg + k2s * np.uint64(b_spread)
        sure = dmin + tot_marg <= thr
        maybe = (dmin <= thr_hi + tot_marg) & ~sure
        fail = bool(np.any(sure))
        witness = None
        if fail:
            idx = np.nonzero(sure)[0]
            # worst witness: smallest dist/threshold ratio
            ratios = dmin[idx].astype(np.float64) / \
                np.maximum(thr[idx].astype(np.float64), 1.0)
            j = int(idx[int(np.argmin(ratios))])
            witness = (int(k1s[j]), int(k2s[j]))
        elif np.any(maybe):
            x = Fraction(k, _U64) if force_beta is None else None
            for j in np.nonzero(maybe)[0]:
                k1, k2 = int(k1s[j]), int(k2s[j])
                h = max(abs(k1), k2)
                t = Fraction(1, h ** Hp)
                dec = _doubly_exact(gamma, force_beta, x, k1, k2, t, cap)
                if dec:
                    fail = True
                    witness = (k1, k2)
                    break
        if fail:
            failures += 1
            witnesses[i] = witness
    frac = Fraction(failures, samples)
    return DoublyMetricResult(samples, failures, frac, witnesses,
                              doubly_metric_union_bound(N, Hp))


def _doubly_exact(gamma, force_beta, x, k1, k2, thr, cap) -> bool:
    if force_beta is not None:
        fe = FormEvaluator([gamma, force_beta], 0, cap=cap)
        c = fe.dist_compare((k1, k2), thr)
    else:
        fe = FormEvaluator([gamma], k2 * x, cap=cap)
        c = fe.dist_compare((k1,), thr)
    return c in (Comparison.LT, Comparison.EQ)


# ---------------------------------------------------------------------------
# Experiment records
# ---------------------------------------------------------------------------

CSV_HEADER = ("experiment", "params", "q_or_Q", "value_num", "value_den",
              "err_num", "err_den", "undecided_count")


@dataclass(frozen=True)
class ExperimentRecord:
    """One serializable experiment datum with full parameter provenance."""

    experiment: str
    params: str
    q_or_Q: str
    value: Fraction
    err: Fraction = Fraction(0)
    undecided: int = 0

    @staticmethod
    def of_enclosure(experiment: str, params: str, q_or_Q,
                     e: Enclosure, undecided: int = 0) -> "ExperimentRecord":
        return ExperimentRecord(experiment, params, str(q_or_Q),
                                e.mid, e.width / 2, undecided)

    def to_csv_row(self) -> list:
        return [self.experiment, self.params, self.q_or_Q,
                str(self.value.numerator), str(self.value.denominator),
                str(self.err.numerator), str(self.err.denominator),
                str(self.undecided)]

    def to_json_obj(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "q_or_Q": self.q_or_Q,
            "value_num": str(self.value.numerator),
            "value_den": str(self.value.denominator),
            "err_num": str(self.err.numerator),
            "err_den": str(self.err.denominator),
            "undecided_count": self.undecided,
        }
