"""Noisy clipped gradient descent on two-layer networks f(x) = a^T sigma(W x).

The GD update is

    theta <- theta - eta * g_D(theta) + xi,   xi ~ N(0, tau^2 I)
    g_D(theta) = -E[(y - f(x)) * clip_R(grad_theta f(x))]

where clip_R projects the whole per-sample parameter gradient onto the ball
of radius R. Expectations over the hypercube are exact weighted sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb, sqrt
from typing import Callable

import numpy as np

from . import boolean_fourier as bf

ACTIVATIONS = ("bump", "monomial", "relu", "tanh")
EXACT_DIM_CAP = 16


# networks --------------------------------------------------------------------

@dataclass(frozen=True)
class TwoLayerNet:
    W: np.ndarray
    a: np.ndarray
    activation: str = "tanh"
    degree: int = 1  # exponent for the monomial activation

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        W = np.asarray(self.W, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if W.ndim != 2 or a.shape != (W.shape[0],):
            raise ValueError(f"shape mismatch: W {W.shape}, a {a.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def sigma(self, z: np.ndarray) -> np.ndarray:
        return activation_value(self.activation, z, self.degree)

    def dsigma(self, z: np.ndarray) -> np.ndarray:
        return activation_deriv(self.activation, z, self.degree)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.sigma(np.atleast_2d(X) @ self.W.T) @ self.a

    def theta(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.a])

    def with_theta(self, theta: np.ndarray) -> TwoLayerNet:
        md = self.W.size
        return replace(self, W=theta[:md].reshape(self.W.shape), a=theta[md:].copy())


def activation_value(name: str, z: np.ndarray, degree: int = 1) -> np.ndarray:
    if name == "bump":
        return ((z >= -0.5) & (z <= 1.5)).astype(float)
    if name == "monomial":
        return z**degree
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def activation_deriv(name: str, z: np.ndarray, degree: int = 1) -> np.ndarray:
    if name == "bump":
        return np.zeros_like(z)
    if name == "monomial":
        return degree * z ** (degree - 1) if degree > 0 else np.zeros_like(z)
    if name == "relu":
        return (z > 0).astype(float)
    return 1.0 - np.tanh(z) ** 2


@dataclass(frozen=True)
class InitSpec:
    kind: str = "gaussian"
    scale: float = 1.0  # std for gaussian, p for three_point

    def __post_init__(self):
        if self.kind not in ("gaussian", "three_point", "rademacher", "zero"):
            raise ValueError(f"unknown init {self.kind!r}")
        if self.kind == "three_point" and not 0 <= self.scale <= 1:
            raise ValueError("three_point needs p in [0, 1]")

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(shape)
        if self.kind == "rademacher":
            return rng.choice([-1.0, 1.0], size=shape)
        if self.kind == "three_point":
            u = rng.random(shape)
            p = self.scale
            return np.where(u < p / 2, 1.0, np.where(u < p, -1.0, 0.0))
        return np.zeros(shape)


def init_net(d: int, m: int, rng: np.random.Generator, w_init: InitSpec = InitSpec(),
             a_init: InitSpec = InitSpec("zero"), activation: str = "tanh", degree: int = 1) -> TwoLayerNet:
    return TwoLayerNet(w_init.sample((m, d), rng), a_init.sample(m, rng), activation, degree)


# data ------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """A finite distribution over (x, y): points, labels, probability weights.

    ``gamma`` is the std of independent Gaussian label noise; it shifts the
    loss by gamma^2 and leaves the population gradient unchanged.
    """
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    gamma: float = 0.0
    exact: bool = True

    @property
    def d(self) -> int:
        return self.X.shape[1]


def hypercube_data(f: bf.HypercubeFunction, gamma: float = 0.0) -> Dataset:
    bf.check_dim(f.d, EXACT_DIM_CAP)
    n = 1 << f.d
    return Dataset(bf.points(f.d), np.asarray(f.values), np.full(n, 1.0 / n), gamma)


def sample_data(X: np.ndarray, y: np.ndarray) -> Dataset:
    n = len(X)
    return Dataset(np.asarray(X, dtype=float), np.asarray(y, dtype=float), np.full(n, 1.0 / n), exact=False)


def quantize_labels(y: np.ndarray, bits: int | None) -> np.ndarray:
    """Round labels to a fixed-point grid with ``bits`` fractional bits."""
    if bits is None:
        return y
    scale = 2.0**bits
    return np.round(np.asarray(y) * scale) / scale


# gradients -------------------------------------------------------------------

def per_sample_grads(net: TwoLayerNet, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of f(x; theta): dW with shape (n, m, d) and da with shape (n, m)."""
    Z = X @ net.W.T
    da = net.sigma(Z)
    coef = net.a * net.dsigma(Z)
    dW = coef[:, :, None] * X[:, None, :]
    return dW, da


def clip_factors(net: TwoLayerNet, X: np.ndarray, R: float, Z=None) -> np.ndarray:
    """min(1, R / ||grad f(x)||) per sample, from closed-form gradient norms."""
    Z = X @ net.W.T if Z is None else Z
    s = net.sigma(Z)
    c = net.a * net.dsigma(Z)
    nrm = np.sqrt(np.sum(s * s, axis=1) + np.sum(c * c, axis=1) * np.sum(X * X, axis=1))
    with np.errstate(divide="ignore"):
        return np.where(nrm > R, R / np.where(nrm > 0, nrm, 1.0), 1.0)


def population_gradient(net: TwoLayerNet, data: Dataset, R: float = np.inf, mode: str = "network",
                        chunk: int = 4096) -> np.ndarray:
    """g_D(theta) = -E[(y - f) clip_R(grad f)], flattened like ``net.theta()``.

    ``mode='loss'`` clips the per-sample loss gradient -(y - f) grad f instead.
    """
    if mode not in ("network", "loss"):
        raise ValueError("mode must be 'network' or 'loss'")
    gW = np.zeros_like(net.W)
    ga = np.zeros_like(net.a)
    for lo in range(0, len(data.X), chunk):
        X = data.X[lo:lo + chunk]
        Z = X @ net.W.T
        s = net.sigma(Z)
        r = data.y[lo:lo + chunk] - s @ net.a
        if mode == "network":
            k = clip_factors(net, X, R, Z)
        else:
            k = clip_factors(net, X, R / np.maximum(np.abs(r), 1e-300), Z)
        coef = data.w[lo:lo + chunk] * r * k
        ga -= coef @ s
        gW -= ((coef[:, None] * net.a * net.dsigma(Z)).T @ X)
    return np.concatenate([gW.ravel(), ga])


def population_loss(net: TwoLayerNet, data: Dataset) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        r = data.y - net(data.X)
    return float(data.w @ (r * r) + data.gamma**2)


# training --------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    eta: float
    tau: float
    R: float
    k: int
    seed: int = 0
    clip_mode: str = "network"
    record_every: int = 1

    def __post_init__(self):
        if self.eta < 0 or self.tau < 0 or self.R < 0 or self.k < 0:
            raise ValueError("eta, tau, R and k must be nonnegative")


@dataclass
class Trajectory:
    steps: list[int] = field(default_factory=list)
    thetas: list[np.ndarray] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    final: TwoLayerNet | None = None


class DivergenceError(FloatingPointError):
    """Raised when parameters stop being finite."""


def step_noise(config: TrainConfig, step: int, net: TwoLayerNet) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([config.seed, step])
    xi_W = config.tau * rng.standard_normal(net.W.shape)
    xi_a = config.tau * rng.standard_normal(net.a.shape)
    return xi_W, xi_a


def gd_run(net: TwoLayerNet, data: Dataset, config: TrainConfig,
           noise_map: Callable | None = None) -> Trajectory:
    """Run k noisy clipped GD steps; ``noise_map`` transforms (xi_W, xi_a)."""
    traj = Trajectory()

    def record(step, net):
        traj.steps.append(step)
        traj.thetas.append(net.theta())
        traj.losses.append(population_loss(net, data))

    record(0, net)
    for t in range(config.k):
        with np.errstate(over="ignore", invalid="ignore"):
            g = population_gradient(net, data, config.R, config.clip_mode)
        xi_W, xi_a = step_noise(config, t, net)
        if noise_map is not None:
            xi_W, xi_a = noise_map(xi_W, xi_a)
        with np.errstate(over="ignore", invalid="ignore"):
            theta = net.theta() - config.eta * g + np.concatenate([xi_W.ravel(), xi_a])
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"non-finite parameters at step {t + 1}")
        net = net.with_theta(theta)
        if (t + 1) % config.record_every == 0 or t + 1 == config.k:
            record(t + 1, net)
    traj.final = net
    return traj


def sgd_run(net: TwoLayerNet, X: np.ndarray, y: np.ndarray, eta: float) -> Trajectory:
    """One pass of plain SGD on the squared loss, one fresh sample per step."""
    traj = Trajectory()
    traj.steps.append(0)
    traj.thetas.append(net.theta())
    for t in range(len(X)):
        x = X[t:t + 1]
        dW, da = per_sample_grads(net, x)
        r = float(y[t] - net(x)[0])
        grad = -2.0 * r * np.concatenate([dW[0].ravel(), da[0]])
        net = net.with_theta(net.theta() - eta * grad)
        traj.steps.append(t + 1)
        traj.thetas.append(net.theta())
    traj.final = net
    return traj


# junk trajectory and bounds ---------------------------------------------------

def junk_gradient_difference(net: TwoLayerNet, f: bf.HypercubeFunction, alpha: bf.HypercubeFunction,
                             R: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (g_junk - g_f, E[(f - alpha) clip_R(grad f_NN)]) computed separately.

    The first comes from two population gradients; the second from explicit
    per-sample gradient tensors clipped by their Euclidean norm.
    """
    g_f = population_gradient(net, hypercube_data(f), R)
    g_junk = population_gradient(net, hypercube_data(alpha), R)
    X = bf.points(f.d)
    dW, da = per_sample_grads(net, X)
    G = np.concatenate([dW.reshape(len(X), -1), da], axis=1)
    nrm = np.linalg.norm(G, axis=1)
    scale = np.minimum(1.0, R / np.where(nrm > 0, nrm, 1.0))
    direct = ((f.values - alpha.values) * scale) @ G / len(X)
    return g_junk - g_f, direct


def theorem_bound(eta: float, R: float, tau: float, k: int, C: float, eps: float, clamp: bool = True) -> float:
    """eta R sqrt(k C) / (2 tau) + C / eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if tau == 0:
        return 1.0 if clamp else float("inf")
    v = eta * R * sqrt(k * C) / (2 * tau) + C / eps
    return min(1.0, v) if clamp else v


def kl_budget(eta: float, R: float, tau: float, k: int, C: float) -> tuple[float, float]:
    """KL between the junk and real trajectories, and the Pinsker TV bound."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    kl = k * eta**2 * R**2 * C / (2 * tau**2)
    return kl, sqrt(kl / 2)


# equivariance couplings ---------------------------------------------------------

def equivariance_coupling_check(net0: TwoLayerNet, M: np.ndarray, data: Dataset, config: TrainConfig,
                                probes: np.ndarray, transformed_data: Dataset | None = None) -> float:
    """Run GD on D and on M.D with coupled init and noise; return the worst gap.

    Run two starts from (W0 M^T, a0) and uses noise (xi_W M^T, xi_a). If GD is
    equivariant, f(x; theta_k) = f(M x; theta~_k) at every x.
    ``transformed_data`` lets the caller supply M.D built independently (for
    example by re-tabulating the target on the cube); by default the points
    are mapped x -> M x.
    """
    M = np.asarray(M, dtype=float)
    d = net0.d
    if M.shape != (d, d) or not np.allclose(M @ M.T, np.eye(d), atol=1e-12):
        raise ValueError("M must be an orthogonal d x d matrix")
    if transformed_data is None:
        transformed_data = replace(data, X=data.X @ M.T)
    run1 = gd_run(net0, data, config)
    net0_t = replace(net0, W=net0.W @ M.T)
    run2 = gd_run(net0_t, transformed_data, config, noise_map=lambda xw, xa: (xw @ M.T, xa))
    P = np.atleast_2d(probes)
    return float(np.max(np.abs(run1.final(P) - run2.final(P @ M.T))))


def signed_permutation_matrix(perm, signs=None) -> np.ndarray:
    """Matrix with (M x)_i = s_i x_{perm[i]}."""
    d = len(perm)
    M = np.zeros((d, d))
    M[np.arange(d), perm] = 1.0 if signs is None else np.asarray(signs, dtype=float)
    return M


def transform_hypercube_target(f: bf.HypercubeFunction, M: np.ndarray) -> bf.HypercubeFunction:
    """The target x' -> f(M^T x') tabulated on the standard point order."""
    X = bf.points(f.d)
    return bf.HypercubeFunction(f.d, f.values[bf.point_codes(X @ M)])


# weak learning --------------------------------------------------------------------

def r_s(spec: bf.FourierSpectrum, s: int) -> float:
    d = spec.d
    lvl = bf.level_sizes(d) == s
    return float(np.max(np.abs(spec.coeffs[lvl]))) / (d**2 * comb(d, s))


def bump_correlation_moment(f: bf.HypercubeFunction, p: float, n_samples: int, seed: int,
                            batch: int = 5000) -> tuple[float, float]:
    """Monte-Carlo E_w[E_x[f(x) bump(<w, x>)]^2] for w ~ three_point(p)."""
    rng = np.random.default_rng(seed)
    X = bf.points(f.d)
    init = InitSpec("three_point", p)
    vals = []
    left = n_samples
    while left:
        b = min(batch, left)
        Wb = init.sample((b, f.d), rng)
        c = activation_value("bump", Wb @ X.T) @ f.values / len(X)
        vals.append(c * c)
        left -= b
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


def weak_learn_boolean(f: bf.HypercubeFunction, s: int, m: int, eta: float, tau: float, seed: int,
                       R: float = np.inf) -> dict:
    """One noisy GD step from a = 0 with bump units and three_point(s/d) first layer."""
    d = f.d
    rng = np.random.default_rng([seed, 0])
    net = init_net(d, m, rng, InitSpec("three_point", s / d), InitSpec("zero"), "bump")
    data = hypercube_data(f)
    before = population_loss(net, data)
    g = population_gradient(net, data, R)
    traj = gd_run(net, data, TrainConfig(eta, tau, R, 1, seed=seed))
    after = traj.losses[-1]
    return {
        "loss_before": before,
        "loss_after": after,
        "loss_drop": before - after,
        "gradient_norm_sq": float(g @ g),
        "gradient_W_norm_sq": float(g[: m * d] @ g[: m * d]),
        "r_s": r_s(bf.wht_forward(f), s),
    }


def weak_learn_sphere(p, l: int, m: int, eta: float, seed: int, n_samples: int = 20_000) -> dict:
    """One GD step on the second layer with sigma(t) = t^l and Gaussian rows.

    Expectations are sample averages over ``n_samples`` sphere points for the
    gradient and an independent set of the same size for the loss. The
    ``null_level`` entry is the expected squared gradient norm produced by
    sampling error alone when the true gradient is zero.
    """
    from .sphere_harmonics import sample_sphere

    d = p.d
    rng = np.random.default_rng([seed, 0])
    W = rng.standard_normal((m, d)) * d ** (-0.25)  # rows ~ N(0, I_d / sqrt(d))
    net = TwoLayerNet(W, np.zeros(m), "monomial", l)
    Xg = sample_sphere(n_samples, d, rng)
    Xl = sample_sphere(n_samples, d, rng)
    S = net.sigma(Xg @ W.T)
    yg = p(Xg)
    terms = yg[:, None] * S
    ga = -terms.mean(axis=0)
    null = float(np.sum(terms.var(axis=0, ddof=1)) / n_samples)
    new = replace(net, a=-eta * ga)
    yl = p(Xl)
    before = float(np.mean(yl**2))
    after = float(np.mean((yl - new(Xl)) ** 2))
    return {
        "loss_before": before,
        "loss_after": after,
        "loss_drop": before - after,
        "gradient_norm_sq": float(ga @ ga),
        "null_level": null,
        "n_samples": n_samples,
    }


# lower-bound experiment --------------------------------------------------------------

def binomial_se(k: int, n: int) -> float:
    p = k / n
    return sqrt(max(p * (1 - p), 0.25 / n) / n)


def invariant_baseline(f: bf.HypercubeFunction, group) -> bf.HypercubeFunction:
    """The part of f on sets inside the fixed coordinates of the group.

    That is the constant term for sign, perm and sign_perm groups, and the
    part supported on subsets of T for perm_fixing(T).
    """
    spec = bf.wht_forward(f)
    T = group.T if group.kind == "perm_fixing" else 0
    masks = np.arange(len(spec.coeffs))
    kept = np.where((masks & ~T) == 0, spec.coeffs, 0.0)
    return bf.wht_inverse(bf.FourierSpectrum(f.d, kept))


def lower_bound_experiment(f: bf.HypercubeFunction, group, net_factory: Callable, config: TrainConfig,
                           n_trials: int, eps: float, C: float, alpha: bf.HypercubeFunction | None = None,
                           seed: int = 0, jobs: int = 1) -> dict:
    """Train on f o g for random g in the group and on the junk labels alpha.

    A run succeeds when its final loss is at most ||f - alpha||^2 - eps.
    ``alpha`` defaults to ``invariant_baseline(f, group)``. The
    standard error is floored at the p = 1/2 rate over n so that zero observed
    successes still leave an honest margin.
    """
    from .alignment import random_group_maps

    bf.check_dim(f.d, 12)
    alpha = alpha if alpha is not None else invariant_baseline(f, group)
    threshold = float(np.mean((f.values - alpha.values) ** 2)) - eps

    def trial(i):
        rng = np.random.default_rng([seed, i, 0])
        gmap = random_group_maps(group, rng, 1)[0]
        target = bf.HypercubeFunction(f.d, f.values[gmap])
        net = net_factory(np.random.default_rng([seed, i, 1]))
        cfg = replace(config, seed=int(np.random.default_rng([seed, i, 2]).integers(2**31)))
        real = gd_run(net, hypercube_data(target), cfg).losses[-1]
        junk = gd_run(net, hypercube_data(alpha), cfg).final
        junk_loss = float(np.mean((target.values - junk(bf.points(f.d))) ** 2))
        return real <= threshold, junk_loss <= threshold

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(trial, range(n_trials)))
    else:
        results = [trial(i) for i in range(n_trials)]
    wins = sum(r for r, _ in results)
    junk_wins = sum(j for _, j in results)
    bound = theorem_bound(config.eta, config.R, config.tau, config.k, C, eps)
    se = binomial_se(wins, n_trials)
    frac = wins / n_trials
    return {
        "fraction": frac,
        "junk_fraction": junk_wins / n_trials,
        "std_error": se,
        "bound": bound,
        "threshold": threshold,
        "n_trials": n_trials,
        "consistent": frac <= bound + 3 * se,
    }
