from dataclasses import replace
from math import comb, sqrt

import numpy as np
import pytest

from eqlab import boolean_fourier as bf
from eqlab import gd_engine as gd
from eqlab import sphere_harmonics as sh
from eqlab.alignment import GroupSpec


def random_net(rng, d, m, act):
    return gd.TwoLayerNet(rng.standard_normal((m, d)) * 0.7, rng.standard_normal(m), act, 3)


@pytest.mark.parametrize("act", ["tanh", "monomial", "relu"])
def test_per_sample_grads_match_finite_differences(act):
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(100):
        d, m = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        net = random_net(rng, d, m, act)
        x = rng.standard_normal((1, d))
        dW, da = gd.per_sample_grads(net, x)
        analytic = np.concatenate([dW[0].ravel(), da[0]])
        th = net.theta()
        fd = np.empty_like(th)
        for i in range(len(th)):
            e = np.zeros_like(th)
            e[i] = h
            fd[i] = (net.with_theta(th + e)(x)[0] - net.with_theta(th - e)(x)[0]) / (2 * h)
        if act == "relu" and np.min(np.abs(x @ net.W.T)) < 1e-3:
            continue  # kink inside the stencil
        assert np.linalg.norm(fd - analytic) <= 1e-5 * max(1.0, np.linalg.norm(analytic))


def test_bump_gradient_wrt_W_is_zero():
    d, m = 8, 50
    rng = np.random.default_rng(1)
    net = gd.init_net(d, m, rng, gd.InitSpec("three_point", 0.25), gd.InitSpec("zero"), "bump")
    g = gd.population_gradient(net, gd.hypercube_data(bf.parity(d, [0, 1])))
    assert np.all(g[: m * d] == 0.0)


def test_zero_radius_gives_zero_gradient():
    rng = np.random.default_rng(2)
    net = random_net(rng, 4, 3, "tanh")
    g = gd.population_gradient(net, gd.hypercube_data(bf.random_function(4, rng)), R=0.0)
    assert np.all(g == 0.0)


def test_linear_neuron_second_layer_gradient():
    w = np.array([[0.3, -1.2, 0.5]])
    net = gd.TwoLayerNet(w, np.zeros(1), "monomial", 1)
    g = gd.population_gradient(net, gd.hypercube_data(bf.parity(3, [0])), R=1e9)
    assert g[-1] == pytest.approx(-0.3, abs=1e-15)


def test_clip_factors_contract():
    rng = np.random.default_rng(3)
    net = random_net(rng, 5, 4, "tanh")
    X = rng.standard_normal((200, 5))
    dW, da = gd.per_sample_grads(net, X)
    G = np.concatenate([dW.reshape(200, -1), da], axis=1)
    nrm = np.linalg.norm(G, axis=1)
    for R in (0.1, 1.0, 10.0):
        clipped = gd.clip_factors(net, X, R)[:, None] * G
        assert np.allclose(np.linalg.norm(clipped, axis=1), np.minimum(nrm, R), rtol=1e-12)


def test_population_gradient_matches_explicit_sum():
    rng = np.random.default_rng(4)
    d = 5
    net = random_net(rng, d, 3, "tanh")
    f = bf.random_function(d, rng)
    R = 0.8
    X = bf.points(d)
    dW, da = gd.per_sample_grads(net, X)
    G = np.concatenate([dW.reshape(len(X), -1), da], axis=1)
    nrm = np.linalg.norm(G, axis=1)
    clip = np.minimum(1.0, R / nrm)
    expect = -((f.values - net(X)) * clip) @ G / len(X)
    assert np.allclose(gd.population_gradient(net, gd.hypercube_data(f), R), expect, atol=1e-13)


def test_frozen_when_eta_and_tau_zero():
    rng = np.random.default_rng(5)
    net = random_net(rng, 4, 3, "tanh")
    traj = gd.gd_run(net, gd.hypercube_data(bf.random_function(4, rng)), gd.TrainConfig(0.0, 0.0, 1.0, 5))
    for th in traj.thetas:
        assert np.array_equal(th, net.theta())


def test_single_step_definition():
    rng = np.random.default_rng(6)
    net = random_net(rng, 4, 3, "tanh")
    data = gd.hypercube_data(bf.random_function(4, rng))
    cfg = gd.TrainConfig(0.3, 0.05, 2.0, 1, seed=9)
    xi_W, xi_a = gd.step_noise(cfg, 0, net)
    expect = net.theta() - 0.3 * gd.population_gradient(net, data, 2.0) + np.concatenate([xi_W.ravel(), xi_a])
    assert np.array_equal(gd.gd_run(net, data, cfg).thetas[-1], expect)


def test_determinism():
    rng = np.random.default_rng(7)
    net = random_net(rng, 5, 4, "relu")
    data = gd.hypercube_data(bf.random_function(5, rng))
    cfg = gd.TrainConfig(0.1, 0.1, 1.0, 10, seed=3)
    a, b = gd.gd_run(net, data, cfg), gd.gd_run(net, data, cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.thetas, b.thetas))
    c = gd.gd_run(net, data, replace(cfg, seed=4))
    assert not np.array_equal(a.thetas[-1], c.thetas[-1])


def test_divergence_is_reported():
    net = gd.TwoLayerNet(np.ones((1, 2)), np.ones(1), "monomial", 3)
    data = gd.hypercube_data(bf.HypercubeFunction(2, np.full(4, 100.0)))
    with pytest.raises(gd.DivergenceError):
        gd.gd_run(net, data, gd.TrainConfig(1e3, 0.0, np.inf, 50))


def test_loss_identity_via_parseval():
    rng = np.random.default_rng(8)
    d = 6
    net = random_net(rng, d, 5, "tanh")
    f = bf.random_function(d, rng)
    resid = bf.HypercubeFunction(d, f.values - net(bf.points(d)))
    loss = gd.population_loss(net, gd.hypercube_data(f))
    assert loss == pytest.approx(float(np.sum(bf.wht_forward(resid).coeffs ** 2)), abs=1e-10)
    assert gd.population_loss(net, gd.hypercube_data(f, gamma=0.5)) == pytest.approx(loss + 0.25)


def test_sgd_identity_cases():
    rng = np.random.default_rng(9)
    net = random_net(rng, 3, 2, "tanh")
    assert np.array_equal(gd.sgd_run(net, np.zeros((0, 3)), np.zeros(0), 0.1).final.theta(), net.theta())
    X = rng.standard_normal((5, 3))
    assert np.array_equal(gd.sgd_run(net, X, rng.standard_normal(5), 0.0).final.theta(), net.theta())


def test_sgd_step_matches_finite_differences():
    net = gd.TwoLayerNet(np.array([[0.4, -0.2, 0.9]]), np.array([0.7]), "monomial", 1)
    x = np.array([[1.0, -1.0, 1.0]])
    y = np.array([0.3])
    eta = 0.05
    th = net.theta()
    h = 1e-6

    def loss(t):
        return float((y[0] - net.with_theta(t)(x)[0]) ** 2)

    grad = np.array([(loss(th + h * e) - loss(th - h * e)) / (2 * h) for e in np.eye(len(th))])
    got = gd.sgd_run(net, x, y, eta).final.theta()
    assert np.allclose(got, th - eta * grad, atol=1e-6)


def test_junk_gradient_identity():
    rng = np.random.default_rng(10)
    d = 6
    for _ in range(5):
        net = random_net(rng, d, 4, "tanh")
        f, alpha = bf.random_function(d, rng), bf.random_function(d, rng)
        a, b = gd.junk_gradient_difference(net, f, alpha, float(rng.uniform(0.1, 3)))
        assert np.max(np.abs(a - b)) <= 1e-10
    a, _ = gd.junk_gradient_difference(net, f, f, 1.0)
    assert np.all(a == 0)


def test_theorem_bound_examples():
    assert gd.theorem_bound(1, 1, 1, 10, 0.0, 0.5) == 0.0
    assert gd.theorem_bound(1, 1, 1, 0, 0.01, 1.0) == pytest.approx(0.01)
    assert gd.theorem_bound(1, 1, 1, 100, 1e-4, 0.1) == pytest.approx(0.051)
    assert gd.theorem_bound(1, 1, 0, 100, 1e-4, 0.1, clamp=False) == float("inf")
    assert gd.theorem_bound(1, 1, 1e-3, 100, 1e-4, 0.1) == 1.0


def test_kl_budget_examples():
    assert gd.kl_budget(1, 1, 1, 5, 0.0) == (0.0, 0.0)
    kl, tv = gd.kl_budget(1, 1, 1, 1, 2.0)
    assert kl == pytest.approx(1.0) and tv == pytest.approx(sqrt(2) / 2)
    assert gd.kl_budget(0.3, 2, 0.7, 20, 0.1)[0] == pytest.approx(2 * gd.kl_budget(0.3, 2, 0.7, 10, 0.1)[0])
    # the TV bound equals the gradient term of the theorem bound
    assert gd.kl_budget(0.3, 2, 0.7, 20, 0.1)[1] == pytest.approx(gd.theorem_bound(0.3, 2, 0.7, 20, 0.1, 1e12, False))


def test_coupling_identity_matrix_is_exact():
    rng = np.random.default_rng(11)
    net = random_net(rng, 4, 3, "tanh")
    data = gd.hypercube_data(bf.random_function(4, rng))
    dev = gd.equivariance_coupling_check(net, np.eye(4), data, gd.TrainConfig(0.1, 0.1, 1.0, 10), bf.points(4))
    assert dev == 0.0


def test_coupling_coordinate_swap():
    d = 6
    rng = np.random.default_rng(12)
    net = gd.init_net(d, 8, rng, gd.InitSpec("three_point", 0.5), gd.InitSpec("gaussian", 0.1), "tanh")
    f = bf.random_function(d, rng)
    perm = [1, 0, 2, 3, 4, 5]
    M = gd.signed_permutation_matrix(perm)
    td = gd.hypercube_data(gd.transform_hypercube_target(f, M))
    dev = gd.equivariance_coupling_check(net, M, gd.hypercube_data(f), gd.TrainConfig(0.2, 0.05, 2.0, 20),
                                         bf.points(d), transformed_data=td)
    assert dev <= 1e-8


def test_coupling_rotation_on_sphere():
    d = 5
    rng = np.random.default_rng(13)
    net = gd.init_net(d, 6, rng, gd.InitSpec("gaussian", 0.5), gd.InitSpec("gaussian", 0.1), "relu")
    X = sh.sample_sphere(300, d, rng)
    data = gd.sample_data(X, X[:, 0] * X[:, 1])
    M = sh.haar_rotation(d, rng)
    dev = gd.equivariance_coupling_check(net, M, data, gd.TrainConfig(0.2, 0.05, 2.0, 20), X[:50])
    assert dev <= 1e-8


def test_coupling_rejects_non_orthogonal():
    net = gd.TwoLayerNet(np.ones((1, 2)), np.ones(1))
    data = gd.hypercube_data(bf.parity(2, [0]))
    with pytest.raises(ValueError):
        gd.equivariance_coupling_check(net, np.array([[2.0, 0], [0, 1]]), data, gd.TrainConfig(0.1, 0, 1, 1), bf.points(2))


def test_r_s_example():
    f = bf.parity(8, [0, 1])
    assert gd.r_s(bf.wht_forward(f), 2) == pytest.approx(1 / (64 * 28))


def test_weak_learn_boolean_examples():
    zero = bf.HypercubeFunction(6, np.zeros(64))
    rep = gd.weak_learn_boolean(zero, 2, 50, 0.5, 0.0, seed=0)
    assert rep["gradient_norm_sq"] == 0.0 and rep["loss_drop"] == 0.0
    full = bf.full_parity(6)
    rep = gd.weak_learn_boolean(full, 6, 50, 1 / 400, 0.0, seed=0)
    assert rep["gradient_norm_sq"] > 0 and rep["loss_drop"] > 0


def test_weak_learn_sphere_linear_target():
    p = sh.coordinate(8, 0)
    drops = [gd.weak_learn_sphere(p, 1, 2000, 1 / 2000, seed=s, n_samples=5000)["loss_drop"] for s in range(10)]
    assert sum(v > 0 for v in drops) >= 9


def test_weak_learn_sphere_orthogonal_target_is_null():
    d = 6
    p = sh.coordinate(d, 0) * sh.coordinate(d, 1) * sh.coordinate(d, 2)  # pure degree-3 harmonic
    rep = gd.weak_learn_sphere(p, 1, 200, 0.05, seed=1, n_samples=20_000)
    assert rep["gradient_norm_sq"] <= 3 * rep["null_level"]
    signal = gd.weak_learn_sphere(sh.coordinate(d, 0), 1, 200, 0.05, seed=1, n_samples=20_000)
    assert signal["gradient_norm_sq"] > 20 * signal["null_level"]


def test_weak_learn_sphere_no_neurons():
    rep = gd.weak_learn_sphere(sh.coordinate(4, 0), 1, 0, 0.1, seed=0, n_samples=1000)
    assert rep["loss_drop"] == 0.0


def test_init_specs():
    rng = np.random.default_rng(14)
    v = gd.InitSpec("three_point", 0.4).sample(200_000, rng)
    assert set(np.unique(v)) <= {-1.0, 0.0, 1.0}
    assert np.mean(v == 0) == pytest.approx(0.6, abs=0.01)
    assert np.mean(v == 1) == pytest.approx(0.2, abs=0.01)
    with pytest.raises(ValueError):
        gd.InitSpec("three_point", 1.5)


def test_invariant_baseline():
    rng = np.random.default_rng(15)
    f = bf.random_function(5, rng)
    base = gd.invariant_baseline(f, GroupSpec("sign_perm", 5))
    assert np.allclose(base.values, f.values.mean())
    T = 0b011
    b2 = bf.wht_forward(gd.invariant_baseline(f, GroupSpec("perm_fixing", 5, T)))
    spec = bf.wht_forward(f)
    for m in range(32):
        assert b2.coeffs[m] == pytest.approx(spec.coeffs[m] if m & ~T == 0 else 0.0, abs=1e-14)


def tanh_factory(d):
    def make(rng):
        return gd.init_net(d, 10, rng, gd.InitSpec("gaussian", 1 / np.sqrt(d)), gd.InitSpec("gaussian", 0.1))
    return make


def test_lower_bound_huge_noise():
    d = 8
    f = bf.parity(d, [0, 1, 2])
    rep = gd.lower_bound_experiment(f, GroupSpec("sign_perm", d), tanh_factory(d),
                                    gd.TrainConfig(0.1, 1e3, 1.0, 5), 20, 0.1, 1 / comb(d, 3), seed=0)
    assert rep["fraction"] == 0.0 and rep["consistent"]


def test_lower_bound_zero_steps():
    d = 8
    f = bf.parity(d, [0, 1, 2])
    C = 1 / comb(d, 3)
    rep = gd.lower_bound_experiment(f, GroupSpec("sign_perm", d), tanh_factory(d),
                                    gd.TrainConfig(0.1, 0.1, 1.0, 0), 30, 0.1, C, seed=1)
    assert rep["bound"] == pytest.approx(C / 0.1)
    assert rep["fraction"] <= rep["bound"] + 3 * rep["std_error"]


def test_binomial_se_floor():
    assert gd.binomial_se(0, 100) == pytest.approx(sqrt(0.25 / 100) / 10)
    assert gd.binomial_se(50, 100) == pytest.approx(0.05)
