import math

import numpy as np
import pytest

from eqlab import msp

F = msp.FourierSupport.from_lists


def test_staircase_is_1_msp():
    rep = msp.is_l_msp(F([[1], [1, 2], [1, 2, 3]]), 1)
    assert rep.satisfies
    assert rep.ordering == [0b1, 0b11, 0b111]
    assert rep.minimal_leap == 1


def test_two_step_staircase():
    s = F([[1, 2], [1, 2, 3]])
    rep = msp.is_l_msp(s, 1)
    assert not rep.satisfies
    assert rep.violating_sets == [0b11, 0b111]
    assert msp.is_l_msp(s, 2).satisfies


def test_disjoint_example():
    s = F([[1, 2, 3], [4]])
    rep = msp.is_l_msp(s, 2)
    assert not rep.satisfies
    assert rep.closure == 0b1000
    assert rep.violating_sets == [0b111]
    assert msp.is_l_msp(s, 3).satisfies


def test_minimal_leap_examples():
    assert msp.minimal_leap(F([[1], [1, 2], [1, 2, 3]])) == 1
    assert msp.minimal_leap(F([[1, 2, 3]])) == 3
    s = F([[1], [2, 3]])
    assert msp.minimal_leap(s) == 2
    assert not msp.exhaustive_msp(list(s.sets), 1) and msp.exhaustive_msp(list(s.sets), 2)


def random_support(rng):
    P = int(rng.integers(1, 7))
    k = int(rng.integers(1, min(6, (1 << P) - 1) + 1))
    return msp.FourierSupport(P, tuple(int(m) for m in rng.choice(np.arange(1, 1 << P), size=k, replace=False)))


def test_greedy_matches_exhaustive_and_certificates():
    rng = np.random.default_rng(0)
    for _ in range(150):
        s = random_support(rng)
        prev = False
        for l in range(1, s.P + 1):
            rep = msp.is_l_msp(s, l)
            assert rep.satisfies == msp.exhaustive_msp(list(s.sets), l)
            assert not (prev and not rep.satisfies)  # monotone in l
            prev = rep.satisfies
            covered = 0
            for m in rep.ordering:
                assert bin(m & ~covered).count("1") <= l
                covered |= m
            assert covered == rep.closure
            for m in rep.violating_sets:
                assert bin(m & ~rep.closure).count("1") >= l + 1


def test_adding_covered_singleton_keeps_leap():
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = random_support(rng)
        L = msp.minimal_leap(s)
        closure = msp.is_l_msp(s, L).closure
        for i in range(s.P):
            m = 1 << i
            if closure & m and m not in s.sets:
                bigger = msp.FourierSupport(s.P, s.sets + (m,))
                assert msp.minimal_leap(bigger) <= L


def test_necessity_bound_formula():
    s = F([[1, 2]], coeffs=[1.0])
    nb = msp.necessity_bound(s, d=8, l=1, eta=1.0, R=1.0, tau=1.0, k=64)
    C_h = 2.0**4
    A = C_h / 8**2
    assert nb.C_h == C_h and nb.c_h == 1.0 and nb.eps0 == 0.5
    assert nb.terms["gd_term"] == pytest.approx(0.5 * math.sqrt(64 * A))
    assert nb.terms["junk_term"] == pytest.approx(A / 0.5)
    assert nb.bound == 1.0  # clamped


def test_necessity_bound_limits():
    s = F([[1, 2, 3]], coeffs=[2.0])
    d, l = 12, 2
    A = 2.0**6 * 4.0 / d**3
    nb0 = msp.necessity_bound(s, d, l, eta=1.0, R=1.0, tau=1.0, k=0)
    assert nb0.bound == pytest.approx(A / 2.0)
    nb_inf = msp.necessity_bound(s, d, l, eta=1.0, R=1.0, tau=1e12, k=100)
    assert nb_inf.bound == pytest.approx(A / 2.0, rel=1e-6)


def test_necessity_bound_rejects_msp_targets():
    with pytest.raises(ValueError):
        msp.necessity_bound(F([[1], [1, 2]]), 8, 1, 1, 1, 1, 10)


def test_support_validation():
    with pytest.raises(ValueError):
        msp.FourierSupport(2, (0b100,))
    with pytest.raises(ValueError):
        msp.FourierSupport(2, (0b1,), coeffs=(0.0,))
