import math
from fractions import Fraction

import numpy as np
import pytest

from mdl.discrepancy import (
    BoxCountResult,
    box_count,
    disc2d_grid,
    etk_autoH,
    etk_bound,
    etk_bound_sweep,
    star_discrepancy_1d,
)
from mdl.realnum import DependenceError, RealParam

F = Fraction
SQRT2 = math.sqrt(2)
SQRT3 = math.sqrt(3)
PHI = (1 + 5**0.5) / 2


def test_box_count_examples(sqrt2):
    r = box_count([sqrt2], 3, [(F(0), F(1, 2))])
    assert r.count == 2 and r.error == F(1, 2)
    r = box_count([sqrt2], 10, [(F(0), F(1))])
    assert r.count == 10 and r.error == 0
    r = box_count([sqrt2], 10, [(F(1, 3), F(1, 3))])
    assert r.count == 0 and r.error == 0


def test_box_count_float_oracle(sqrt2, sqrt3):
    Q = 300
    a1, b1 = F(1, 10), F(3, 7)
    r = box_count([sqrt2], Q, [(a1, b1)])
    xs = (np.arange(1, Q + 1) * SQRT2) % 1.0
    assert r.count == int(np.sum((xs >= float(a1)) & (xs < float(b1))))
    a2, b2 = F(2, 9), F(5, 6)
    r2 = box_count([sqrt2, sqrt3], Q, [(a1, b1), (a2, b2)])
    ys = (np.arange(1, Q + 1) * SQRT3) % 1.0
    cnt = int(np.sum((xs >= float(a1)) & (xs < float(b1))
                     & (ys >= float(a2)) & (ys < float(b2))))
    assert r2.count == cnt
    assert r2.undecided == 0


def test_box_count_identity():
    """S = Q|I| + E holds by construction."""
    r = box_count([RealParam.sqrt(5)], 57, [(F(1, 4), F(2, 3))])
    assert r.count == 57 * r.volume + r.error


def test_star_discrepancy_examples(golden):
    d1 = star_discrepancy_1d(golden, 1)
    assert float(d1.mid) == pytest.approx(PHI - 1, abs=1e-9)
    d2 = star_discrepancy_1d(golden, 2)
    assert float(d2.mid) == pytest.approx(2 - PHI, abs=1e-9)


def test_star_discrepancy_lower_bound(sqrt2):
    for Q in (1, 2, 7, 100):
        assert star_discrepancy_1d(sqrt2, Q).lo >= F(1, 2 * Q)


def test_star_discrepancy_float_oracle(sqrt2, golden):
    for alpha, av in ((sqrt2, SQRT2), (golden, PHI)):
        for Q in (10, 100, 2000):
            d = star_discrepancy_1d(alpha, Q)
            xs = sorted((q * av) % 1.0 for q in range(1, Q + 1))
            oracle = 1 / (2 * Q) + max(abs(x - (2 * i - 1) / (2 * Q))
                                       for i, x in enumerate(xs, 1))
            assert float(d.mid) == pytest.approx(oracle, abs=1e-9)
            assert float(d.width) < 1e-15


def test_star_discrepancy_rejects_rational():
    with pytest.raises(ValueError):
        star_discrepancy_1d(RealParam.rational(F(2, 3)), 5)


def test_disc2d_examples(sqrt2, sqrt3):
    lo, up = disc2d_grid(sqrt2, sqrt3, 3, 1)
    assert lo == 0 and up == lo + 12
    lo2, _ = disc2d_grid(sqrt2, sqrt3, 3, 2)
    # brute force over the 9 anchored-grid boxes at m = 2
    xs = [(q * SQRT2) % 1 for q in (1, 2, 3)]
    ys = [(q * SQRT3) % 1 for q in (1, 2, 3)]
    best = 0.0
    for A1 in range(2):
        for B1 in range(A1 + 1, 3):
            for A2 in range(2):
                for B2 in range(A2 + 1, 3):
                    c = sum(1 for x, y in zip(xs, ys)
                            if A1 / 2 <= x < B1 / 2 and A2 / 2 <= y < B2 / 2)
                    best = max(best, abs(c - 3 * (B1 - A1) * (B2 - A2) / 4))
    assert float(lo2) == pytest.approx(best, abs=1e-12)


def test_disc2d_monotone_and_bracket(sqrt2, sqrt3):
    prev_lo = F(0)
    prev_up = None
    for m in (1, 2, 4, 8):
        lo, up = disc2d_grid(sqrt2, sqrt3, 50, m)
        assert lo <= up
        assert lo >= prev_lo            # finer grids see more boxes
        if prev_up is not None:
            assert lo <= prev_up        # brackets stay consistent
        prev_lo, prev_up = lo, up


def test_etk_1d_closed_form(golden):
    # H = 1: bound = 9N + 36/||phi||, and ||phi|| = 2 - phi
    b = etk_bound([golden], 10, 1)
    expect = 90 + 36 / (2 - PHI)
    assert float(b.bound.mid) == pytest.approx(expect, rel=1e-9)
    assert float(b.bound.mid) == pytest.approx(184.249, abs=1e-3)
    assert b.bound.lo >= 90


def test_etk_lower_bound(sqrt2):
    for H in (1, 2, 17):
        b = etk_bound([sqrt2], 100, H)
        assert b.bound.lo >= F(9 * 100, H)


def test_etk_dependence(sqrt2):
    with pytest.raises(DependenceError) as exc:
        etk_bound([sqrt2, sqrt2], 5, 3)
    assert exc.value.witness == (1, -1)


def test_etk_2d_float_oracle(sqrt2, sqrt3):
    H, N = 5, 9
    eb = etk_bound([sqrt2, sqrt3], N, H)
    tot = 0.0
    for k1 in range(-H, H + 1):
        for k2 in range(-H, H + 1):
            if k1 == 0 and k2 == 0:
                continue
            v = (k1 * SQRT2 + k2 * SQRT3) % 1.0
            d = min(v, 1 - v)
            tot += 4 / ((abs(k1) + 1) * (abs(k2) + 1)) * 2 / (N * d)
    assert float(eb.bound.mid) == pytest.approx(9 * N * (1 / H + tot), rel=1e-9)


def test_etk_sweep_consistent(sqrt2):
    sweep = etk_bound_sweep([sqrt2], 50, 40)
    for H in (1, 7, 40):
        single = etk_bound([sqrt2], 50, H)
        assert sweep[H - 1].bound.overlaps(single.bound)


def test_exact_disc_below_etk_small(sqrt2, golden):
    """Upper-bound property on a small sweep (the acceptance suite runs the
    full one)."""
    for alpha in (sqrt2, golden):
        N = 100
        nd = star_discrepancy_1d(alpha, N) * N
        for b in etk_bound_sweep([alpha], N, 50):
            assert nd.lo <= b.bound.hi, (alpha, b.H)


def test_scaling_inequality_anchored(sqrt2, golden):
    """Count-error form of the dilation inequality, in 1D where both sides
    are exactly computable: N D*(M alpha) <= 2 M N D*(alpha)."""
    for alpha, n in ((sqrt2, 2), (sqrt2, 3), (golden, 2), (golden, 3)):
        N = 500
        base = star_discrepancy_1d(alpha, N)
        scaled_param = RealParam.sqrt(alpha.arg * n * n) if alpha.kind == "sqrt" \
            else None
        if scaled_param is None:
            continue
        scaled = star_discrepancy_1d(scaled_param, N)
        assert scaled.lo * N <= 2 * n * N * base.hi


def test_etk_autoH_example(sqrt2, sqrt3):
    b = etk_autoH(sqrt2, sqrt3, 2, F(1))
    assert b.H == 2
    assert b.bound.lo >= F(9 * 2, 2)
    assert b.implied_constant is not None


def test_etk_autoH_sweep(sqrt2, sqrt3):
    """Implied constant stays finite over a small N sweep."""
    from mdl.cfrac import sigma_pair
    for N in (10, 100, 1000):
        s = sigma_pair(sqrt2, sqrt3, min(N, 60)).value
        sN = F(math.ceil(float(s.hi) * 16), 16)
        b = etk_autoH(sqrt2, sqrt3, N, sN)
        assert b.implied_constant.hi < F(10**9)
        assert b.H >= 1
