"""Counting Kronecker orbits in boxes, exact 1D star discrepancy, 2D grid
discrepancy brackets, and Erdos-Turan-Koksma bounds.

The orbit of an irrational rotation visits every box with frequency equal
to its volume; the error term E = count - Q*volume is what the bounds in
this module control.  Star (anchored) discrepancy is the exact primitive;
free-interval discrepancy sits between it and twice it, and the 2D
free-box supremum is bracketed by a grid scan plus slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .realnum import (
    DEFAULT_PRECISION_CAP,
    CapExceeded,
    Comparison,
    DependenceError,
    Enclosure,
    FormEvaluator,
    RealParam,
    log2_enclosure,
    rational_power,
)

RationalLike = Union[int, Fraction]


class OrbitTable:
    """Scaled-integer windows for the fractional parts {q*alpha}, q <= Q.

    frac_window(q) returns (lo, hi, scale_bits) with the true fractional
    part inside [lo, hi]/2^scale_bits; the window may straddle an integer
    boundary only for the first/last few grid units, which membership tests
    escalate through the exact path.
    """

    def __init__(self, alpha: RealParam, bits: int = 128,
                 cap: int = DEFAULT_PRECISION_CAP):
        self.alpha = alpha
        self.bits = bits
        self.cap = cap
        self._pins: dict = {}
        self._pin(bits)

    def _pin(self, bits: int):
        if bits in self._pins:
            return
        e = self.alpha.enclosure(bits + 4)
        scale = 1 << bits
        lo = math.floor(e.lo * scale)
        spread = math.ceil(e.hi * scale) - lo
        self._pins[bits] = (lo, spread)

    def frac_window(self, q: int, bits: Optional[int] = None):
        b = self.bits if bits is None else b_cap(bits, self.cap)
        self._pin(b)
        lo, spread = self._pins[b]
        scale = 1 << b
        u = (q * lo) % scale
        return u, u + q * spread, b

    def in_interval(self, q: int, a: Fraction, b: Fraction) -> Comparison:
        """Decide {q*alpha} in [a, b) rigorously (escalates to the cap)."""
        bits = self.bits
        while True:
            u_lo, u_hi, bb = self.frac_window(q, bits)
            scale = 1 << bb
            # the window is an absolute range for q*alpha mod scale; compare
            # against both [a,b) and its shift by one period to cover wrap
            decided = self._interval_decision(u_lo, u_hi, scale, a, b)
            if decided is not None:
                return decided
            if bits >= self.cap:
                if self.alpha.is_rational or self.alpha.is_decimal:
                    return self._exact_decision(q, a, b)
                return Comparison.UNDECIDED
            bits = min(2 * bits, self.cap)

    @staticmethod
    def _interval_decision(u_lo, u_hi, scale, a, b):
        """LT = inside [a,b), GT = outside, None = window straddles an edge."""
        asc, bsc = a * scale, b * scale
        for shift in (0, scale):
            lo, hi = u_lo + shift, u_hi + shift
            if lo >= asc and hi < bsc:            # entirely in [a, b)
                return Comparison.LT
            if lo >= bsc and hi < asc + scale:    # entirely in [b, a+1)
                return Comparison.GT
        return None

    def _exact_decision(self, q, a, b):
        if not self.alpha.is_rational:
            raise CapExceeded("membership undecided at the precision cap")
        v = (q * self.alpha.value) % 1
        return Comparison.LT if a <= v < b else Comparison.GT

    def all_windows(self, Q: int):
        """Vectorized windows for q = 1..Q (numpy arrays of Python ints
        avoided: returns base pin so callers can run their own loops)."""
        self._pin(self.bits)
        return self._pins[self.bits], self.bits


def b_cap(bits: int, cap: int) -> int:
    return min(bits, cap)


@dataclass
class BoxCountResult:
    Q: int
    box: tuple                 # ((a, b), ...) half-open per axis
    count: int
    error: Fraction            # count - Q * volume
    undecided: int = 0

    @property
    def volume(self) -> Fraction:
        v = Fraction(1)
        for a, b in self.box:
            v *= (b - a)
        return v


def box_count(params: Sequence[RealParam], Q: int, box,
              cap: int = DEFAULT_PRECISION_CAP) -> BoxCountResult:
    """Exact count of q <= Q with ({q a_1}, ..., {q a_k}) in the half-open
    box; memberships are decided rigorously, undecidable ones (possible only
    at the precision cap) are counted separately."""
    params = list(params)
    if not 1 <= len(params) <= 2:
        raise ValueError("box counting supports dimension 1 or 2")
    boxes = [(Fraction(a), Fraction(b)) for a, b in box]
    if len(boxes) != len(params):
        raise ValueError("box dimension mismatch")
    for a, b in boxes:
        if not (0 <= a <= b <= 1):
            raise ValueError("box sides must satisfy 0 <= a <= b <= 1")
    tables = [OrbitTable(p, cap=cap) for p in params]
    count = 0
    undecided = 0
    for q in range(1, Q + 1):
        inside = True
        for t, (a, b) in zip(tables, boxes):
            if a == b:
                inside = False
                break
            if a == 0 and b == 1:
                continue
            res = t.in_interval(q, a, b)
            if res == Comparison.UNDECIDED:
                undecided += 1
                inside = False
                break
            if res != Comparison.LT:
                inside = False
                break
        if inside:
            count += 1
    vol = Fraction(1)
    for a, b in boxes:
        vol *= (b - a)
    return BoxCountResult(Q, tuple(boxes), count, count - Q * vol, undecided)


# ---------------------------------------------------------------------------
# Exact star discrepancy (1D)
# ---------------------------------------------------------------------------

def star_discrepancy_1d(alpha: RealParam, Q: int, bits: int = 128,
                        cap: int = DEFAULT_PRECISION_CAP,
                        allow_decimal: bool = False) -> Enclosure:
    """Exact anchored (star) discrepancy D* of {q*alpha}, q = 1..Q:
    D* = 1/(2Q) + max_i |x_(i) - (2i-1)/(2Q)| on the sorted points.

    Returned as a rigorous enclosure; the free-interval supremum lies in
    [D*, 2 D*].  Count-error conversion is Q * D*.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    if alpha.is_decimal and not allow_decimal:
        raise ValueError("decimal literal is secretly rational; pass "
                         "allow_decimal=True to accept the approximation")
    if not alpha.is_irrational and not alpha.is_decimal:
        raise ValueError("star discrepancy needs an irrational parameter")
    while True:
        table = OrbitTable(alpha, bits=bits, cap=cap)
        (lo_pin, spread), b = table.all_windows(Q)
        scale = 1 << b
        err = Q * spread  # absolute window width in grid units
        us = sorted(((q * lo_pin) % scale) for q in range(1, Q + 1))
        # sorting by window midpoints is exact if adjacent windows separate
        ok = all(us[i + 1] - us[i] > 2 * err for i in range(Q - 1))
        ok = ok and us[0] > err and scale - us[-1] > err  # no wrap ambiguity
        if ok:
            break
        if b >= cap:
            raise CapExceeded("cannot separate orbit points at the cap")
        bits = min(2 * b, cap)
    max_lo = 0
    max_hi = 0
    for i, u in enumerate(us, start=1):
        v = abs(u * 2 * Q - (2 * i - 1) * scale)
        lo = max(0, v - 2 * Q * err)
        hi = v + 2 * Q * err
        if lo > max_lo:
            max_lo = lo
        if hi > max_hi:
            max_hi = hi
    den = 2 * Q * scale
    return Enclosure(Fraction(1, 2 * Q) + Fraction(max_lo, den),
                     Fraction(1, 2 * Q) + Fraction(max_hi, den))


# ---------------------------------------------------------------------------
# 2D grid discrepancy bracket
# ---------------------------------------------------------------------------

def disc2d_grid(alpha: RealParam, beta: RealParam, Q: int, m: int,
                cap: int = DEFAULT_PRECISION_CAP):
    """(lower, upper) bracket for the free-box count-error supremum of the
    orbit ({q a}, {q b}) at resolution m: `lower` is the exact maximum of
    |E| over all grid-aligned boxes [a1/m,b1/m) x [a2/m,b2/m); `upper` adds
    the 4Q/m slack covering boxes with off-grid sides."""
    if m < 1:
        raise ValueError("m must be >= 1")
    import numpy as np
    ta, tb = OrbitTable(alpha, cap=cap), OrbitTable(beta, cap=cap)
    cells = np.zeros((m, m), dtype=np.int64)
    for q in range(1, Q + 1):
        i = _cell_index(ta, q, m)
        j = _cell_index(tb, q, m)
        cells[i, j] += 1
    pref = np.zeros((m + 1, m + 1), dtype=np.int64)
    pref[1:, 1:] = np.cumsum(np.cumsum(cells, axis=0), axis=1)
    # max over all (a1<b1, a2<b2) of |m^2 * count - Q*(b1-a1)(b2-a2)|, exact
    # in units of 1/m^2; count via 2D prefix sums
    best = 0
    idx = np.arange(m + 1)
    a2g, b2g = np.meshgrid(idx, idx, indexing="ij")
    mask = b2g > a2g
    width2 = (b2g - a2g)[mask]
    for a1 in range(m):
        for b1 in range(a1 + 1, m + 1):
            line = pref[b1, :] - pref[a1, :]
            counts = (line[b2g] - line[a2g])[mask]
            vals = np.abs(m * m * counts - Q * (b1 - a1) * width2)
            v = int(vals.max())
            if v > best:
                best = v
    lower = Fraction(best, m * m)
    upper = lower + Fraction(4 * Q, m)
    return lower, upper


def _cell_index(table: OrbitTable, q: int, m: int) -> int:
    bits = table.bits
    while True:
        lo, hi, b = table.frac_window(q, bits)
        scale = 1 << b
        i_lo = (lo % scale) * m // scale
        i_hi = (hi % scale) * m // scale if hi < scale else m + 1
        if i_lo == i_hi:
            return int(i_lo)
        if b >= table.cap:
            raise CapExceeded("orbit point sits on a grid line at the cap")
        bits = min(2 * bits, table.cap)


# ---------------------------------------------------------------------------
# Erdos-Turan-Koksma bounds
# ---------------------------------------------------------------------------

@dataclass
class EtkBound:
    N: int
    H: int
    bound: Enclosure
    shell_terms: tuple   # shell_terms[h-1] = enclosure of the |k|=h (or
    #                      max(|k1|,|k2|)=h) frequency-sum contribution
    implied_constant: Optional[Enclosure] = None


def _dist_positive(fe: FormEvaluator, coeffs, cap: int) -> Enclosure:
    witness = tuple(-k for k in coeffs) if coeffs[0] < 0 else tuple(coeffs)
    if fe.dist_is_zero_exact(coeffs):
        raise DependenceError(witness)
    bits = fe.bits
    while True:
        e = fe.dist_enclosure(coeffs, bits)
        if e.lo > 0:
            return e
        if bits >= cap:
            raise DependenceError(witness)
        bits = min(2 * bits, cap)


def _etk_shells_1d(fe: FormEvaluator, Hmax: int, cap: int):
    """shell h contribution (both signs k = +-h) to
    sum 2/(|k|+1) * 2/||k alpha||, as outward-rounded enclosures."""
    shells = []
    for h in range(1, Hmax + 1):
        d = _dist_positive(fe, (h,), cap)
        term = Fraction(8, h + 1) * d.reciprocal()
        shells.append(term.quantize(96))
    return shells


def _etk_shells_2d(fe: FormEvaluator, Hmax: int, cap: int):
    """shell h: pairs with max(|k1|,|k2|) = h of
    4/((|k1|+1)(|k2|+1)) * 2/||k1 a + k2 b||, signs folded (factor 2)."""
    shift = 96
    scale = 1 << shift
    shells = []
    for h in range(1, Hmax + 1):
        lo_acc = 0
        hi_acc = 0
        pairs = [(k1, h) for k1 in range(-h, h + 1)]
        pairs += [(h, k2) for k2 in range(-h + 1, h)]
        for k1, k2 in pairs:
            d = _dist_positive(fe, (k1, k2), cap)
            # each (k1,k2) stands for the sign pair {(k1,k2), (-k1,-k2)}
            w = Fraction(16, (abs(k1) + 1) * (abs(k2) + 1))
            lo_acc += (w.numerator * d.hi.denominator * scale) // \
                (w.denominator * d.hi.numerator)
            num = w.numerator * d.lo.denominator * scale
            den = w.denominator * d.lo.numerator
            hi_acc += -(-num // den)
        shells.append(Enclosure(Fraction(lo_acc, scale), Fraction(hi_acc, scale)))
    return shells


def etk_bound(params: Sequence[RealParam], N: int, H: int,
              cap: int = DEFAULT_PRECISION_CAP) -> EtkBound:
    """The Erdos-Turan-Koksma count-error bound at truncation H:
    1D: 9N(1/H + sum_{0<|k|<=H} (2/(|k|+1)) (2/(N ||k a||)));
    2D: 9N(1/H + sum' (4/((|k1|+1)(|k2|+1))) (2/(N ||k1 a + k2 b||))).
    """
    bounds = etk_bound_sweep(params, N, H, cap=cap)
    return bounds[-1]


def etk_bound_sweep(params: Sequence[RealParam], N: int, Hmax: int,
                    cap: int = DEFAULT_PRECISION_CAP) -> list:
    """EtkBound for every H = 1..Hmax, sharing one pass of shell sums."""
    params = list(params)
    if not 1 <= len(params) <= 2:
        raise ValueError("dimension 1 or 2 only")
    if N < 1 or Hmax < 1:
        raise ValueError("N and H must be >= 1")
    fe = FormEvaluator(params, 0, cap=cap)
    if len(params) == 1:
        shells = _etk_shells_1d(fe, Hmax, cap)
    else:
        shells = _etk_shells_2d(fe, Hmax, cap)
    out = []
    acc = Enclosure.exact(0)
    for H in range(1, Hmax + 1):
        acc = (acc + shells[H - 1]).quantize(96)
        total = (Fraction(9 * N, H) + acc * Fraction(9, 1))
        out.append(EtkBound(N, H, total, tuple(shells[:H])))
    return out


def etk_autoH(gamma: RealParam, beta: RealParam, N: int, sigma_N: Fraction,
              cap: int = DEFAULT_PRECISION_CAP) -> EtkBound:
    """Optimized truncation: H is the smallest positive integer with
    1/H <= (8000 sigma / N) * log2(H) * H^sigma, and the returned bound is
    9N(1/H + (8000 sigma/N) log2(H) H^sigma).

    The implied constant reported is bound / (N^(s/(s+1)) (log2 N)^(1/(s+1)))
    with s = sigma_N.
    """
    sigma = Fraction(sigma_N)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    p, s = sigma.numerator, sigma.denominator
    coef = Fraction(8000) * sigma / N
    H = 1
    while True:
        # 1/H <= coef * log2(H) * H^sigma  <=>  1 <= coef log2(H) H^(sigma+1)
        if H == 1:
            ok = False  # log2(1) = 0
        else:
            lg = log2_enclosure(H, 96)
            hpow = rational_power(Enclosure.exact(H), p + s, s, bits=96)
            rhs = lg * hpow * coef
            c = rhs.compare(1)
            if c == Comparison.UNDECIDED:
                raise CapExceeded(f"H-threshold comparison undecided at H={H}")
            ok = c in (Comparison.GT, Comparison.EQ)
        if ok:
            break
        H += 1
        if H > 10 ** 9:
            raise RuntimeError("optimized H not found below 1e9")
    lg = log2_enclosure(H, 96) if H > 1 else Enclosure.exact(0)
    hsig = rational_power(Enclosure.exact(H), p, s, bits=96)
    bound = (Fraction(1, H) + coef * lg * hsig) * (9 * N)
    # reference shape: C * N^(sigma/(sigma+1)) * (log2 N)^(1/(sigma+1))
    npow = rational_power(Enclosure.exact(N), p, p + s, bits=96)
    lgn = log2_enclosure(N, 96) if N > 1 else Enclosure.exact(1)
    lpow = rational_power(lgn, s, p + s, bits=96) if N > 2 else Enclosure.exact(1)
    denom = npow * lpow
    implied = bound / denom if denom.lo > 0 else None
    return EtkBound(N, H, bound.quantize(96), (), implied)
