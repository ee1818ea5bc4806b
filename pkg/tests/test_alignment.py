from math import comb

import numpy as np
import pytest

from eqlab import alignment as al
from eqlab import boolean_fourier as bf


def spectrum(f):
    return bf.wht_forward(f)


@pytest.mark.parametrize("d,k", [(5, 1), (5, 2), (5, 3), (6, 4)])
def test_parity_sign_perm_alignment(d, k):
    f = bf.parity(d, list(range(k)))
    rep = al.sign_perm_alignment(spectrum(f))
    assert rep.value == pytest.approx(1 / comb(d, k))
    assert rep.witness["level"] == k


def test_parity_brute_force_d5():
    f = bf.parity(5, [1, 3])
    assert al.brute_force_alignment(f, al.GroupSpec("sign_perm", 5)).value == pytest.approx(1 / 10)


def test_chi12_sign_perm_d4():
    f = bf.parity(4, [0, 1])
    assert al.brute_force_alignment(f, al.GroupSpec("sign_perm", 4)).value == pytest.approx(1 / 6)


def test_zero_function():
    z = bf.HypercubeFunction(4, np.zeros(16))
    assert al.sign_perm_alignment(spectrum(z)).value == 0.0
    assert al.sign_alignment(spectrum(z)).value == 0.0
    assert al.perm_subgroup_alignment(spectrum(z), 0).value == 0.0


def test_constant_handling():
    c = bf.HypercubeFunction(3, np.full(8, 2.0))
    assert al.sign_alignment(spectrum(c)).value == 4.0
    rep = al.sign_perm_alignment(spectrum(c))
    assert rep.value == 0.0 and rep.level0 == 4.0
    assert al.sign_perm_alignment(spectrum(c), include_constant=True).value == 4.0


@pytest.mark.parametrize("d", [3, 4, 5])
def test_closed_form_matches_brute_force(d):
    rng = np.random.default_rng(d)
    G = al.GroupSpec("sign_perm", d)
    for _ in range(6):
        f = bf.random_function(d, rng)
        s = spectrum(f)
        assert abs(al.sign_perm_alignment(s).value - al.brute_force_alignment(f, G, center=True).value) <= 1e-9
        assert abs(al.sign_perm_alignment(s, include_constant=True).value
                   - al.brute_force_alignment(f, G).value) <= 1e-9


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_sign_closed_form_matches_brute_force(d):
    rng = np.random.default_rng(10 + d)
    for _ in range(4):
        f = bf.random_function(d, rng)
        assert abs(al.sign_alignment(spectrum(f)).value
                   - al.brute_force_alignment(f, al.GroupSpec("sign", d)).value) <= 1e-9


def test_parity_sign_alignment_is_one():
    assert al.sign_alignment(spectrum(bf.parity(5, [0, 4]))).value == 1.0


def test_parity_mod4_sign_alignment_d6():
    f = bf.parity_mod4(6)
    assert al.sign_alignment(spectrum(f)).value == 2.0**-6
    assert al.brute_force_alignment(f, al.GroupSpec("sign", 6)).value == pytest.approx(2.0**-6, abs=1e-15)


@pytest.mark.parametrize("d", range(4, 11))
def test_parity_mod4_sign_perm_bound(d):
    assert al.sign_perm_alignment(spectrum(bf.parity_mod4(d))).value <= 2.0**-d


def test_trivial_group():
    f = bf.parity(4, [0])
    G = al.GroupSpec("perm_fixing", 4, 0b1111)
    assert al.brute_force_alignment(f, G).value == pytest.approx(1.0)


def test_witness_reevaluates():
    rng = np.random.default_rng(7)
    f = bf.random_function(4, rng)
    G = al.GroupSpec("perm", 4)
    rep = al.brute_force_alignment(f, G)
    assert al.evaluate_witness(f, G, rep.witness) == pytest.approx(rep.value, abs=1e-9)


def test_perm_subgroup_examples():
    d = 7
    T = [0, 1]
    assert al.perm_subgroup_alignment(spectrum(bf.parity(d, T)), T).value == pytest.approx(1.0)
    f = bf.parity(d, T + [4])
    assert al.perm_subgroup_alignment(spectrum(f), T).value == pytest.approx(1 / (d - len(T)))


def test_perm_subgroup_matches_brute_force():
    rng = np.random.default_rng(8)
    for T in (0, 0b1, 0b101):
        f = bf.random_function(5, rng)
        exact = al.perm_subgroup_alignment(spectrum(f), T).value
        brute = al.brute_force_alignment(f, al.GroupSpec("perm_fixing", 5, T)).value
        assert abs(exact - brute) <= 1e-9


def test_subgroup_monotonicity():
    rng = np.random.default_rng(9)
    d = 4
    for _ in range(5):
        f = bf.random_function(d, rng)
        sp = al.brute_force_alignment(f, al.GroupSpec("sign_perm", d)).value
        p = al.brute_force_alignment(f, al.GroupSpec("perm", d)).value
        assert sp <= p + 1e-12
        for T in (0b1, 0b11, 0b1111):
            assert p <= al.brute_force_alignment(f, al.GroupSpec("perm_fixing", d, T)).value + 1e-12
        assert sp <= bf.l2_norm_sq(f) + 1e-12


def test_monte_carlo_perm_subgroup_is_labelled():
    rep = al.perm_subgroup_alignment(spectrum(bf.parity(11, [0, 1])), 0, n_samples=2000, exact_cap=8)
    assert rep.method == "monte_carlo" and rep.std_error is not None
    assert rep.value == pytest.approx(1 / comb(11, 2), rel=0.5)


def test_msp_alignment_bound_examples():
    assert al.msp_alignment_bound({(0, 1): 1.0}, 0, 1, 2, 8) == pytest.approx(1 / 4)
    assert al.msp_alignment_bound({}, 0, 1, 2, 8) == 0.0
    v = al.msp_alignment_bound({(0, 1, 2): 1.0, (3,): 1.0}, [3], 2, 4, 12)
    assert v == pytest.approx(2.0**8 / 12**3)
    with pytest.raises(ValueError):
        al.msp_alignment_bound({(0, 1): 1.0}, 0, 2, 2, 8)


def test_msp_bound_dominates_exact_alignment():
    d = 8
    f = bf.parity(d, [0, 1])
    exact = al.perm_subgroup_alignment(spectrum(f), 0).value
    assert exact <= al.msp_alignment_bound({(0, 1): 1.0}, 0, 1, 2, d)


def test_family_closed_forms():
    assert al.family_parity_closed_forms(4, 2) == (pytest.approx(1 / 6), pytest.approx(1 / 6))
    assert al.family_parity_closed_forms(7, 0) == (1.0, 1.0)
    assert al.family_parity_closed_forms(6, 3) == (pytest.approx(1 / 20), pytest.approx(1 / 20))


def test_family_alignment_exact():
    fam = al.parity_family(5, 2)
    rep = al.family_alignment(fam, al.GroupSpec("perm_fixing", 5, 0b11111))
    assert rep.value == pytest.approx(1 / 10)


def test_cross_predictability_parities():
    fam = al.parity_family(6, 2)
    trivial = al.GroupSpec("perm_fixing", 6, 0b111111)
    est, se = al.cross_predictability(fam, trivial, 100_000, seed=1)
    assert abs(est - 1 / 15) <= 3 * se


def test_cross_predictability_constant():
    fam = al.single_family(bf.HypercubeFunction(4, np.ones(16)))
    est, se = al.cross_predictability(fam, al.GroupSpec("sign_perm", 4), 1000, seed=0)
    assert est == 1.0 and se == 0.0


def test_alignment_below_root_cross_predictability():
    for d, k, kind in ((5, 2, "perm"), (4, 1, "sign"), (5, 3, "sign_perm")):
        fam = al.parity_family(d, k)
        G = al.GroupSpec(kind, d)
        align = al.family_alignment(fam, G).value
        cp, se = al.cross_predictability(fam, G, 20_000, seed=d)
        assert align <= np.sqrt(cp) + 3 * se


def test_rotation_rejected_on_cube():
    with pytest.raises(ValueError):
        al.brute_force_alignment(bf.parity(3, [0]), al.GroupSpec("rot", 3))


@pytest.mark.parametrize("d", [5, 7, 9, 11])
def test_parity_mod4_sign_alignment_odd_d(d):
    # f = Im(i^{#plus}); each coefficient of i^{#plus} has modulus 2^{-d/2} and,
    # at odd d, phase an odd multiple of pi/4, so fhat(S)^2 = 2^{-(d+1)}.
    X = bf.points(d)
    zeta = 1j ** np.sum(X > 0, axis=1)
    chis = np.prod(np.where(((np.arange(1 << d)[:, None] >> np.arange(d)) & 1)[:, None, :], X[None, :, :], 1), axis=2)
    coeffs = (chis @ zeta.imag) / (1 << d)
    assert np.max(coeffs**2) == pytest.approx(2.0 ** -(d + 1), rel=1e-12)
    assert al.sign_alignment(spectrum(bf.parity_mod4(d))).value == pytest.approx(2.0 ** -(d + 1), rel=1e-12)
