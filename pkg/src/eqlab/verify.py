"""End-to-end checks shared by ``eqlab verify`` and the acceptance tests.

Each check returns a CheckResult. ``quick=True`` shrinks trial counts so the
whole suite runs in well under a minute; the default sizes are the ones the
acceptance suite uses.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import stats

from . import alignment as al
from . import boolean_fourier as bf
from . import gd_engine as gd
from . import msp
from . import reductions as rd
from . import sphere_harmonics as sh


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name} ({self.seconds:.1f}s) {self.detail}"


def _timed(number, name):
    def deco(fn):
        def run(quick: bool = False) -> CheckResult:
            t = time.perf_counter()
            passed, detail = fn(quick)
            return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t)
        run.number = number
        run.check_name = name
        return run
    return deco


@_timed(1, "fourier roundtrip, Parseval, fast vs naive")
def check_fourier(quick=False):
    rng = np.random.default_rng(1)
    worst_rt = worst_pv = 0.0
    for i in range(20 if quick else 50):
        d = 3 + i % 10
        f = bf.random_function(d, rng)
        spec = bf.wht_forward(f)
        worst_rt = max(worst_rt, float(np.max(np.abs(bf.wht_inverse(spec).values - f.values))))
        worst_pv = max(worst_pv, abs(float(np.sum(spec.coeffs**2)) - bf.l2_norm_sq(f)))
    exact = True
    worst_naive = 0.0
    for d in range(1, 9):
        g = bf.HypercubeFunction(d, rng.integers(-50, 50, size=1 << d).astype(float))
        exact &= bool(np.array_equal(bf.wht_forward(g).coeffs, bf.wht_naive(g).coeffs))
        h = bf.random_function(d, rng)
        worst_naive = max(worst_naive, float(np.max(np.abs(bf.wht_forward(h).coeffs - bf.wht_naive(h).coeffs))))
    ok = worst_rt <= 1e-10 and worst_pv <= 1e-10 and exact and worst_naive <= 1e-12
    return ok, {"roundtrip": worst_rt, "parseval": worst_pv, "integer_tables_equal": exact, "real_tables_gap": worst_naive}


@_timed(2, "sign_perm closed form equals brute force")
def check_sign_perm_brute(quick=False):
    rng = np.random.default_rng(2)
    worst = 0.0
    for d in (3, 4, 5):
        G = al.GroupSpec("sign_perm", d)
        for _ in range(5 if quick else 20):
            f = bf.random_function(d, rng)
            spec = bf.wht_forward(f)
            worst = max(worst,
                        abs(al.sign_perm_alignment(spec).value - al.brute_force_alignment(f, G, center=True).value),
                        abs(al.sign_perm_alignment(spec, include_constant=True).value
                            - al.brute_force_alignment(f, G).value))
    return worst <= 1e-9, {"max_gap": worst}


def parity_mod4_sign_alignment_exact(d: int) -> float:
    """max_S fhat(S)^2 for parity_mod4, from fhat(S) = 2^{-d/2} sin(pi (d + 2|S|) / 4)."""
    return 2.0**-d if d % 2 == 0 else 2.0 ** -(d + 1)


@_timed(3, "parity_mod4 alignments")
def check_parity_mod4(quick=False):
    ok = True
    rows = {}
    for d in range(4, 13):
        spec = bf.wht_forward(bf.parity_mod4(d))
        sp = al.sign_perm_alignment(spec).value
        sg = al.sign_alignment(spec).value
        exact = parity_mod4_sign_alignment_exact(d)
        ok &= sp <= 2.0**-d and sg == exact and sg <= 2.0**-d
        rows[d] = {"sign_perm": sp, "sign": sg, "2^-d": 2.0**-d}
    brute = {}
    for d in (4, 5, 6):
        f = bf.parity_mod4(d)
        b = al.brute_force_alignment(f, al.GroupSpec("sign", d)).value
        ok &= abs(b - parity_mod4_sign_alignment_exact(d)) <= 1e-12
        brute[d] = b
    even_equal = all(rows[d]["sign"] == 2.0**-d for d in rows if d % 2 == 0)
    return ok, {"sign_equals_2^-d_at_even_d": even_equal, "brute_force_sign": brute,
                "odd_d_value": "2^-(d+1)"}


@_timed(4, "MSP examples and greedy vs exhaustive")
def check_msp(quick=False):
    F = msp.FourierSupport.from_lists
    ex = [
        (msp.is_l_msp(F([[1], [1, 2], [1, 2, 3]]), 1).satisfies, True),
        (msp.is_l_msp(F([[1, 2], [1, 2, 3]]), 1).satisfies, False),
        (msp.is_l_msp(F([[1, 2], [1, 2, 3]]), 2).satisfies, True),
        (msp.is_l_msp(F([[1, 2, 3], [4]]), 2).satisfies, False),
        (msp.is_l_msp(F([[1, 2, 3], [4]]), 3).satisfies, True),
    ]
    examples_ok = all(a == b for a, b in ex)
    rng = np.random.default_rng(4)
    mismatches = 0
    n = 50 if quick else 200
    for _ in range(n):
        P = int(rng.integers(1, 7))
        k = int(rng.integers(1, min(6, (1 << P) - 1) + 1))
        sets = [int(m) for m in rng.choice(np.arange(1, 1 << P), size=k, replace=False)]
        sup = msp.FourierSupport(P, tuple(sets))
        for l in range(1, P + 1):
            mismatches += msp.is_l_msp(sup, l).satisfies != msp.exhaustive_msp(sets, l)
    return examples_ok and mismatches == 0, {"examples_ok": examples_ok, "supports": n, "mismatches": mismatches}


@_timed(5, "mod-8 identity, exhaustive")
def check_mod8(quick=False):
    rng = np.random.default_rng(5)
    failures = 0
    checked = 0
    for d in range(2, 13 if not quick else 9):
        X = bf.points(d).astype(np.int64)
        for _ in range(20):
            S = rd.random_subset(rng, d, d // 2)
            failures += int(np.sum(~rd.mod8_identity_holds(X, S)))
            checked += len(X)
    return failures == 0, {"points_checked": checked, "failures": failures}


def lpgn_to_sfsm8_trials(n_trials, d=20, gamma=0.1, n=200, seed=61):
    wins = 0
    for i in range(n_trials):
        rng = rd.trial_rng(seed, i)
        inst = rd.gen_lpgn(d, n, gamma, rng)
        orc = rd.CandidateOracle("mod8", [rd.signs_from_subset(d, inst.S)], threshold=1.0)
        wins += rd.reduce_lpgn_to_sfsm8(inst.q, inst.X, inst.y, orc, d // 2, rd.trial_rng(seed, i, 1)) == inst.answer
    return wins


def promise_to_lpgn_trials(n_trials, d=16, n=200, gamma=0.5, seed=62):
    cfg = rd.kernel_config_for(gamma, n)
    wins = 0
    for i in range(n_trials):
        rng = rd.trial_rng(seed, i)
        inst = rd.gen_promise_lpn(d, n, cfg.rho, rng)
        orc = rd.CandidateOracle("parity", [inst.S], threshold=0.5, promise_size=d // 2)
        wins += rd.reduce_promise_lpn_to_lpgn(inst.q, inst.X, inst.y, orc, cfg, rd.trial_rng(seed, i, 1)) == inst.answer
    return wins, cfg


def lpn_to_promise_trials(n_trials, d=10, rho=0.8, T=200, n_A=30, seed=63):
    recovered = wins = 0
    for i in range(n_trials):
        rng = rd.trial_rng(seed, i)
        inst = rd.gen_lpn(d, rd.lpn_to_promise_samples_needed(d, T, n_A), rho, rng)
        orc = rd.CandidateOracle("parity", rd.padded_candidates(d, inst.S), threshold=rho / 2, promise_size=d)
        ans, r_hat, _ = rd.reduce_lpn_to_promise_lpn(inst.q, inst.X, inst.y, orc, n_A, T, rd.trial_rng(seed, i, 1))
        recovered += r_hat == d - bin(inst.S).count("1")
        wins += ans == inst.answer
    return recovered, wins


def pipeline_trials(n_trials, d=8, config=rd.PipelineConfig(), seed=64, shift=0):
    wins = 0
    for i in range(n_trials):
        rng = rd.trial_rng(seed, i)
        n = rd.lpn_to_promise_samples_needed(d, config.T, config.n_A)
        inst = rd.gen_lpn(d, n, rd.pipeline_rho(config), rng)
        cands = [rd.signs_from_subset(2 * d, S) for S in rd.padded_candidates(d, inst.S)]
        term = rd.CandidateOracle("mod8", cands, threshold=1.0)
        if shift:
            term = rd.shifted_oracle(term, shift)
        ans, _ = rd.pipeline_lpn_to_sfsm8(inst, term, config, rd.trial_rng(seed, i, 1))
        wins += ans == inst.answer
    return wins


@_timed(6, "reductions with test oracles")
def check_reductions(quick=False):
    s = 0.2 if quick else 1.0
    n1, n2, n3, n4 = int(1000 * s), int(500 * s), int(100 * s), int(100 * s)
    a = lpgn_to_sfsm8_trials(n1)
    b, cfg = promise_to_lpgn_trials(n2)
    r, c = lpn_to_promise_trials(n3)
    p = pipeline_trials(n4)
    detail = {
        "lpgn_to_sfsm8": rd.binomial_summary(a, n1),
        "promise_lpn_to_lpgn": rd.binomial_summary(b, n2),
        "lpn_to_promise_r_hat": rd.binomial_summary(r, n3),
        "lpn_to_promise_answer": rd.binomial_summary(c, n3),
        "pipeline": rd.binomial_summary(p, n4),
        "kernel_delta": cfg.delta,
    }
    ok = a / n1 >= 0.9 and b / n2 >= 0.9 and r / n3 >= 0.9 and p / n4 >= 0.8
    return ok, detail


@_timed(7, "rejection kernel KS distance")
def check_kernel(quick=False):
    n = 20_000 if quick else 100_000
    out = {}
    ok = True
    for gamma, n_lpn in ((0.5, 100), (1.0, 100), (2.0, 50)):
        cfg = rd.kernel_config_for(gamma, n_lpn)
        rng = np.random.default_rng([7, int(gamma * 10)])
        b_p = np.where(rng.random(n) < 1 - cfg.delta, 1, -1)
        b_q = np.where(rng.random(n) < cfg.delta, 1, -1)
        ks_p = stats.kstest(rd.rejection_kernel(b_p, cfg, rng), "norm", args=(1, gamma)).statistic
        ks_q = stats.kstest(rd.rejection_kernel(b_q, cfg, rng), "norm", args=(-1, gamma)).statistic
        ok &= ks_p <= 0.02 and ks_q <= 0.02
        out[f"gamma={gamma}"] = {"delta": cfg.delta, "N": cfg.N, "ks_plus": float(ks_p), "ks_minus": float(ks_q),
                                 "tv_bound": cfg.tv_bound()}
    return ok, out


def coupling_deviations(d=8, k=50, m=16, seed=8):
    rng = np.random.default_rng(seed)
    f = bf.random_function(d, rng)
    probes = bf.points(d)[rng.integers(1 << d, size=100)]
    cfg = gd.TrainConfig(eta=0.5, tau=0.05, R=2.0, k=k, seed=seed)
    out = {}
    # permutations with i.i.d. (non-symmetric) init
    M = gd.signed_permutation_matrix(rng.permutation(d))
    net = gd.TwoLayerNet(rng.exponential(1.0, (m, d)), rng.exponential(0.3, m), "tanh")
    out["perm"] = gd.equivariance_coupling_check(
        net, M, gd.hypercube_data(f), cfg, probes, gd.hypercube_data(gd.transform_hypercube_target(f, M)))
    # signed permutations with symmetric init
    M = gd.signed_permutation_matrix(rng.permutation(d), rng.choice([-1, 1], d))
    net = gd.init_net(d, m, rng, gd.InitSpec("three_point", 0.5), gd.InitSpec("rademacher"), "tanh")
    out["sign_perm"] = gd.equivariance_coupling_check(
        net, M, gd.hypercube_data(f), cfg, probes, gd.hypercube_data(gd.transform_hypercube_target(f, M)))
    # rotations with Gaussian init on sphere data
    M = sh.haar_rotation(d, rng)
    X = sh.sample_sphere(512, d, rng)
    y = np.tanh(X @ rng.standard_normal(d))
    net = gd.init_net(d, m, rng, gd.InitSpec("gaussian", 1.0), gd.InitSpec("gaussian", 0.3), "relu")
    out["rot"] = gd.equivariance_coupling_check(net, M, gd.sample_data(X, y), cfg, sh.sample_sphere(100, d, rng))
    return out


@_timed(8, "equivariance couplings")
def check_coupling(quick=False):
    dev = coupling_deviations(k=10 if quick else 50)
    return max(dev.values()) <= 1e-8, dev


@_timed(9, "junk-gradient identity")
def check_junk(quick=False):
    rng = np.random.default_rng(9)
    worst = 0.0
    acts = ("tanh", "relu", "monomial", "bump")
    for i in range(10 if quick else 50):
        d = 3 + i % 6
        net = gd.init_net(d, int(rng.integers(1, 12)), rng, gd.InitSpec("gaussian", 1.0), gd.InitSpec("gaussian", 1.0),
                          acts[i % 4], degree=2)
        f, alpha = bf.random_function(d, rng), bf.random_function(d, rng)
        a, b = gd.junk_gradient_difference(net, f, alpha, float(rng.uniform(0.1, 5.0)))
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst <= 1e-10, {"max_gap": worst}


@_timed(10, "weak learning with bump units")
def check_weak_learn(quick=False):
    d = 8
    f = bf.parity(d, [0, 1])
    claimed = 1.0 / (d**4 * comb(d, 2) ** 2)
    est, se = gd.bump_correlation_moment(f, 0.25, 20_000 if quick else 100_000, seed=10)
    z = (est - claimed) / se
    m = 4000
    n_seeds = 10 if quick else 50
    drops = [gd.weak_learn_boolean(f, 2, m, 1 / (8 * m), 1e-8, seed)["loss_after"] < 1.0 for seed in range(n_seeds)]
    frac = sum(drops) / n_seeds
    return z >= 3 and frac >= 0.9, {"estimate": est, "std_error": se, "claimed": claimed, "z": z,
                                    "loss_below_norm_fraction": frac}


LOWER_BOUND_SETTINGS = (
    {"eta": 0.1, "R": 1.0, "tau": 0.2, "k": 50, "eps": 0.1},
    {"eta": 0.05, "R": 1.0, "tau": 0.1, "k": 100, "eps": 0.2},
)


@_timed(11, "lower-bound experiment consistency")
def check_lower_bound(quick=False):
    d = 10
    f = bf.parity(d, [0, 1, 2])
    C = 1.0 / comb(d, 3)
    G = al.GroupSpec("sign_perm", d)
    out = []
    ok = True
    for j, s in enumerate(LOWER_BOUND_SETTINGS):
        cfg = gd.TrainConfig(s["eta"], s["tau"], s["R"], s["k"])

        def factory(rng):
            return gd.init_net(d, 20, rng, gd.InitSpec("gaussian", 1 / np.sqrt(d)), gd.InitSpec("gaussian", 0.1), "tanh")

        rep = gd.lower_bound_experiment(f, G, factory, cfg, 40 if quick else 200, s["eps"], C, seed=11 + j)
        ok &= rep["consistent"] and rep["bound"] < 0.5
        out.append(rep)
    return ok, {"settings": out}


@_timed(12, "sphere harmonics")
def check_sphere(quick=False):
    dims_ok = all(sh.dim_harmonic(d, l) == sh.harmonic_kernel_dim(d, l) for d in range(2, 9) for l in range(5))
    rng = np.random.default_rng(12)
    worst_lap = worst_orth = worst_norm = 0.0
    for i in range(4 if quick else 12):
        d = int(rng.integers(2, 7))
        deg = int(rng.integers(1, 6))
        terms = {}
        for _ in range(4):
            alpha = np.zeros(d, dtype=int)
            for j in rng.integers(0, d, size=int(rng.integers(0, deg + 1))):
                alpha[j] += 1
            terms[tuple(alpha)] = float(rng.standard_normal())
        p = sh.SpherePolynomial(d, terms)
        dec = sh.harmonic_decompose(p)
        for c in dec.components:
            lap = sh.laplacian(c.poly)
            worst_lap = max(worst_lap, max((abs(v) for v in lap.terms.values()), default=0.0))
        for a, b in itertools.combinations(dec.components, 2):
            worst_orth = max(worst_orth, abs(sh.inner_product(a.poly, b.poly)))
        worst_norm = max(worst_norm, abs(sum(c.norm_sq for c in dec.components) - sh.norm_sq(p)))
    d = 6
    p = sh.coordinate(d, 0)
    value, _ = sh.rotation_alignment(p)
    est, se, _ = sh.mc_rotation_alignment(p, 2000 if quick else 10_000, seed=12)
    mc_ok = abs(est - value) <= 3 * se and abs(value - 1 / d**2) <= 1e-15
    ok = dims_ok and worst_lap <= 1e-9 and worst_orth <= 1e-9 and worst_norm <= 1e-9 and mc_ok
    return ok, {"dims_match": dims_ok, "laplacian": worst_lap, "orthogonality": worst_orth,
                "completeness": worst_norm, "rotation_alignment": value, "mc_estimate": est, "mc_se": se}


CHECKS = (check_fourier, check_sign_perm_brute, check_parity_mod4, check_msp, check_mod8, check_reductions,
          check_kernel, check_coupling, check_junk, check_weak_learn, check_lower_bound, check_sphere)


def run_suite(quick: bool = True, only=None) -> list[CheckResult]:
    return [c(quick) for c in CHECKS if only is None or c.number in only]
