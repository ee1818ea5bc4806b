"""Reductions LPN -> promise-LPN -> LPGN -> SFSM8, run against test oracles.

Points are int8 arrays of +-1 with shape (n, d). Secrets are 0-indexed
bitmasks. Randomness comes from ``np.random.Generator`` objects passed in
explicitly; trial harnesses derive one per (seed, trial, stage).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

ERROR = "error"


# instances -------------------------------------------------------------------

def mask_indices(mask: int) -> np.ndarray:
    return np.array([i for i in range(int(mask).bit_length()) if (mask >> i) & 1], dtype=np.int64)


def parity_of(X: np.ndarray, mask: int) -> np.ndarray:
    """chi_S evaluated on the rows of X."""
    X = np.atleast_2d(X)
    idx = mask_indices(mask)
    if idx.size == 0:
        return np.ones(len(X), dtype=np.int64)
    return np.prod(X[:, idx].astype(np.int64), axis=1)


def parities_of(X: np.ndarray, masks: Sequence[int]) -> np.ndarray:
    """chi_S on the rows of X for several masks at once, shape (n, len(masks))."""
    X = np.atleast_2d(X)
    d = X.shape[1]
    bits = np.array([[(m >> j) & 1 for j in range(d)] for m in masks], dtype=np.int64)
    return 1 - 2 * (((X < 0).astype(np.int64) @ bits.T) & 1)


def f_mod8(X: np.ndarray) -> np.ndarray:
    return np.atleast_2d(X).astype(np.int64).sum(axis=1) % 8


def random_points(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return (1 - 2 * rng.integers(0, 2, size=(n, d))).astype(np.int8)


def random_subset(rng: np.random.Generator, d: int, size: int | None = None) -> int:
    if size is None:
        return int(sum(1 << i for i in range(d) if rng.random() < 0.5))
    return int(sum(1 << int(i) for i in rng.choice(d, size=size, replace=False)))


@dataclass(frozen=True)
class LpnInstance:
    d: int
    rho: float
    S: int
    q: np.ndarray
    X: np.ndarray
    y: np.ndarray

    @property
    def answer(self) -> int:
        return int(parity_of(self.q, self.S)[0])


@dataclass(frozen=True)
class LpgnInstance:
    d: int
    gamma: float
    S: int
    q: np.ndarray
    X: np.ndarray
    y: np.ndarray

    @property
    def answer(self) -> int:
        return int(parity_of(self.q, self.S)[0])


@dataclass(frozen=True)
class Sfsm8Instance:
    d: int
    gamma: float
    s: np.ndarray  # hidden sign vector
    q: np.ndarray
    X: np.ndarray  # observed points x_i * s
    y: np.ndarray

    @property
    def answer(self) -> int:
        return int(f_mod8(self.q * self.s)[0])


def _lpn_labels(rng, X, S, rho):
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    zeta = np.where(rng.random(len(X)) < (1 + rho) / 2, 1, -1)
    return parity_of(X, S) * zeta


def gen_lpn(d: int, n: int, rho: float, rng: np.random.Generator, S: int | None = None) -> LpnInstance:
    S = random_subset(rng, d) if S is None else S
    X = random_points(rng, n, d)
    q = random_points(rng, 1, d)[0]
    return LpnInstance(d, rho, S, q, X, _lpn_labels(rng, X, S, rho))


def gen_promise_lpn(d: int, n: int, rho: float, rng: np.random.Generator) -> LpnInstance:
    return gen_lpn(d, n, rho, rng, S=random_subset(rng, d, d // 2))


def gen_lpgn(d: int, n: int, gamma: float, rng: np.random.Generator, S: int | None = None) -> LpgnInstance:
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    S = random_subset(rng, d, d // 2) if S is None else S
    X = random_points(rng, n, d)
    q = random_points(rng, 1, d)[0]
    y = parity_of(X, S) + gamma * rng.standard_normal(n)
    return LpgnInstance(d, gamma, S, q, X, y)


def gen_sfsm8(d: int, n: int, gamma: float, rng: np.random.Generator, s: np.ndarray | None = None) -> Sfsm8Instance:
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    s = random_points(rng, 1, d)[0] if s is None else np.asarray(s, dtype=np.int8)
    Xraw = random_points(rng, n, d)
    y = f_mod8(Xraw) + gamma * rng.standard_normal(n)
    q = random_points(rng, 1, d)[0]
    return Sfsm8Instance(d, gamma, s, q, (Xraw * s).astype(np.int8), y)


def signs_from_subset(d: int, S: int) -> np.ndarray:
    """s_j = +1 for j in S and -1 otherwise."""
    return np.array([1 if (S >> j) & 1 else -1 for j in range(d)], dtype=np.int8)


def mod8_identity_holds(X: np.ndarray, S: int) -> np.ndarray:
    """Row-wise sum_j x_j s_j == 2 chi_S(x) + 2|S| - 2 - sum_j x_j (mod 8)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    s = signs_from_subset(X.shape[1], S).astype(np.int64)
    lhs = (X @ s) % 8
    rhs = (2 * parity_of(X, S) + 2 * bin(S).count("1") - 2 - X.sum(axis=1)) % 8
    return lhs == rhs


def mod8_identity_check(x, S: int) -> bool:
    return bool(mod8_identity_holds(x, S)[0])


# oracles ---------------------------------------------------------------------

Oracle = Callable[[np.ndarray, np.ndarray, np.ndarray, np.random.Generator], object]


def wrap8(v: np.ndarray) -> np.ndarray:
    """Reduce reals mod 8 into (-4, 4]."""
    return 4.0 - np.mod(4.0 - v, 8.0)


@dataclass
class CandidateOracle:
    """Answers by fitting a short list of candidate secrets to the samples.

    This stands in for a solver that is good on a known set of instances.
    ``kind`` is 'parity' (LPN or LPGN labels, candidates are masks) or
    'mod8' (SFSM8 labels, candidates are sign vectors). The best candidate is
    used when its fit passes ``threshold`` and, for parity problems, when its
    size matches ``promise_size``; otherwise the answer is a coin flip (or a
    uniform residue mod 8). ``error_rate`` corrupts answers on purpose.
    With ``fit_offset`` a mod-8 oracle also fits a constant residue c and
    answers f_mod8(q * s) + c, so it stays right when the labels are shifted.
    """
    kind: str
    candidates: Sequence
    threshold: float = 0.5
    promise_size: int | None = None
    error_rate: float = 0.0
    fit_offset: bool = False

    def __call__(self, q, X, y, rng):
        if self.kind == "parity":
            ans = self._parity(q, X, y, rng)
            if self.error_rate and rng.random() < self.error_rate:
                ans = -ans
            return ans
        ans = self._mod8(q, X, y, rng)
        if self.error_rate and rng.random() < self.error_rate:
            ans = int((ans + rng.integers(1, 8)) % 8)
        return ans

    def _parity(self, q, X, y, rng):
        if len(X):
            corrs = np.mean(y[:, None] * parities_of(X, self.candidates), axis=0)
            best = int(np.argmax(corrs))
            S = self.candidates[best]
            ok = corrs[best] >= self.threshold
            if self.promise_size is not None:
                ok = ok and bin(S).count("1") == self.promise_size
            if ok:
                return int(parity_of(q, S)[0])
        return int(rng.choice([-1, 1]))

    def _mod8(self, q, X, y, rng):
        if len(X):
            offsets = np.arange(8) if self.fit_offset else np.zeros(1)
            fits = np.array([np.mean(wrap8(y[:, None] - f_mod8(X * s)[:, None] - offsets) ** 2, axis=0)
                             for s in self.candidates])
            best, c = np.unravel_index(int(np.argmin(fits)), fits.shape)
            if fits[best, c] <= self.threshold:
                return int((f_mod8(q * self.candidates[best])[0] + offsets[c]) % 8)
        return int(rng.integers(8))


def constant_oracle(value) -> Oracle:
    return lambda q, X, y, rng: value


def shifted_oracle(inner: Oracle, shift: int) -> Oracle:
    """An SFSM8 oracle that is always off by ``shift`` (mod 8)."""
    return lambda q, X, y, rng: int((inner(q, X, y, rng) + shift) % 8)


def wrap_equivariant_learner_as_solver(trainer: Callable, kind: str = "lpgn", rounding: bool = True) -> Oracle:
    """Turn ``trainer(X, y) -> predictor`` into an LPGN or SFSM8 solver.

    LPGN answers with the sign of the prediction at q (0 maps to +1); SFSM8
    answers with the prediction rounded to the nearest integer, mod 8.
    """
    if kind not in ("lpgn", "sfsm8"):
        raise ValueError("kind must be 'lpgn' or 'sfsm8'")

    def solve(q, X, y, rng):
        pred = float(np.asarray(trainer(np.asarray(X, dtype=float), np.asarray(y, dtype=float))(
            np.asarray(q, dtype=float)[None, :])).ravel()[0])
        if kind == "lpgn":
            return 1 if pred >= 0 else -1
        v = round(pred) if rounding else pred
        return int(v) % 8

    return solve


# LPGN -> SFSM8 -------------------------------------------------------------------

def lpgn_to_sfsm8_labels(X: np.ndarray, y: np.ndarray, S_size: int) -> np.ndarray:
    """Step 1: map LPGN labels to SFSM8 labels with the t_i case table."""
    t = (2 * S_size - 2 - X.astype(np.int64).sum(axis=1)) % 8
    return np.where((t >= 2) & (t <= 5), t + 2 * y,
                    np.where(t <= 1, t + 4 - 2 * y, t - 4 - 2 * y))


def reduce_lpgn_to_sfsm8(q, X, y, oracle: Oracle, S_size: int, rng: np.random.Generator):
    """Returns +1, -1 or ERROR."""
    ytil = lpgn_to_sfsm8_labels(X, y, S_size)
    raw = oracle(q, X, ytil, rng)
    ans = (int(raw) - 2 * S_size + 2 + int(np.sum(q))) % 8
    if ans == 2:
        return 1
    if ans == 6:
        return -1
    return ERROR


# rejection kernel -------------------------------------------------------------------

@dataclass(frozen=True)
class RejectionKernelConfig:
    delta: float
    gamma: float
    N: int

    def __post_init__(self):
        if not 0 <= self.delta < 0.1:
            raise ValueError("delta must lie in [0, 0.1)")
        if self.N < 1 or self.gamma <= 0:
            raise ValueError("need N >= 1 and gamma > 0")

    @property
    def log_ratio(self) -> float:
        """log(delta / (1 - delta)), -inf when delta = 0."""
        if self.delta == 0:
            return -math.inf
        return math.log(self.delta) - math.log1p(-self.delta)

    @property
    def half_width(self) -> float:
        """The acceptance set is |x| <= half_width."""
        return -self.gamma**2 * self.log_ratio / 2

    @property
    def rho(self) -> float:
        return 1 - 2 * self.delta

    def tv_bound(self) -> float:
        """P_{N(1,g^2)}[x not in S] + (P_{N(-1,g^2)}[x not in S] + delta/(1-delta))^N."""
        w, g = self.half_width, self.gamma
        out1 = stats.norm.sf(w, loc=1, scale=g) + stats.norm.cdf(-w, loc=1, scale=g)
        out2 = stats.norm.sf(w, loc=-1, scale=g) + stats.norm.cdf(-w, loc=-1, scale=g)
        r = math.exp(self.log_ratio) if self.delta else 0.0
        return float(out1 + (out2 + r) ** self.N)


def delta_threshold(gamma: float, n: int) -> float:
    """min(exp(-10 sqrt(log(1/eps)) / gamma^2), exp(-10 sqrt(log(1/eps)) gamma^2)), eps = 1/(2000 n^2)."""
    root = math.sqrt(math.log(2000 * n * n))
    return min(math.exp(-10 * root / gamma**2), math.exp(-10 * root * gamma**2))


def kernel_config_for(gamma: float, n: int, slack: float = 0.5) -> RejectionKernelConfig:
    """A config strictly below the delta threshold with N = ceil(log(2000 n^2))."""
    return RejectionKernelConfig(slack * delta_threshold(gamma, n), gamma, math.ceil(math.log(2000 * n * n)))


def rejection_kernel(b, config: RejectionKernelConfig, rng: np.random.Generator) -> np.ndarray:
    """Map +-1 inputs to reals so that Rad(1-delta) -> N(1, g^2) and Rad(delta) -> N(-1, g^2).

    For input b the proposal is N(b, g^2), accepted on the set S with
    probability 1 - (delta/(1-delta)) * L^{-b}, L(x) = exp(2x/g^2). Inputs
    still unaccepted after N rounds get a draw from N(b, g^2) restricted to S.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    g = config.gamma
    lr = config.log_ratio
    w = config.half_width
    out = np.empty_like(b)
    pending = np.arange(len(b))
    for _ in range(config.N):
        if pending.size == 0:
            break
        x = b[pending] + g * rng.standard_normal(pending.size)
        inside = np.abs(x) <= w
        with np.errstate(over="ignore", under="ignore"):
            reject_p = np.exp(np.minimum(lr - b[pending] * 2 * x / g**2, 0.0))
        acc = inside & (rng.random(pending.size) >= reject_p)
        out[pending[acc]] = x[acc]
        pending = pending[~acc]
    if pending.size:
        mu = b[pending]
        lo, hi = (-w - mu) / g, (w - mu) / g
        out[pending] = stats.truncnorm.rvs(lo, hi, loc=mu, scale=g, random_state=rng)
    return out


def reduce_promise_lpn_to_lpgn(q, X, y, oracle: Oracle, config: RejectionKernelConfig, rng: np.random.Generator):
    ytil = rejection_kernel(y, config, rng) if len(y) else np.zeros(0)
    return oracle(q, X, ytil, rng)


# LPN -> promise-LPN ------------------------------------------------------------------

def paper_T(d: int, rho: float) -> int:
    return math.ceil(10000 * math.log(d) / rho**2)


def desk_T(d: int, rho: float, cap: int = 500) -> int:
    return min(paper_T(d, rho), cap)


def lpn_to_promise_samples_needed(d: int, T: int, n_A: int) -> int:
    """(d + 1) T (n_A + 1) + n_A: one block per padding size r in 0..d."""
    return (d + 1) * T * (n_A + 1) + n_A


def _padded_call(oracle, q, X, y, r, rng):
    d = X.shape[1]
    Z = random_points(rng, len(X) + 1, d)
    zq = Z[-1]
    Zs = Z[:-1]
    sign_s = np.prod(Zs[:, :r].astype(np.int64), axis=1) if r else np.ones(len(X), dtype=np.int64)
    sign_q = int(np.prod(zq[:r].astype(np.int64))) if r else 1
    Xp = np.concatenate([X, Zs], axis=1)
    qp = np.concatenate([q, zq])
    return oracle(qp, Xp, y * sign_s, rng) * sign_q


def reduce_lpn_to_promise_lpn(q, X, y, oracle: Oracle, n_A: int, T: int, rng: np.random.Generator):
    """Returns (answer, r_hat, p_hat). Needs lpn_to_promise_samples_needed(d, T, n_A) samples."""
    d = X.shape[1]
    need = lpn_to_promise_samples_needed(d, T, n_A)
    if len(X) < need:
        raise ValueError(f"need {need} samples, got {len(X)}")
    p_hat = np.zeros(d + 1)
    pos = 0
    for r in range(d + 1):
        hits = 0
        for _ in range(T):
            Xb, yb = X[pos:pos + n_A + 1], y[pos:pos + n_A + 1]
            pos += n_A + 1
            ans = _padded_call(oracle, Xb[-1], Xb[:-1], yb[:-1], r, rng)
            hits += ans == yb[-1]
        p_hat[r] = hits / T
    r_hat = int(np.argmax(p_hat))
    ans = _padded_call(oracle, q, X[pos:pos + n_A], y[pos:pos + n_A], r_hat, rng)
    return ans, r_hat, p_hat


# chained oracles and the full pipeline ------------------------------------------------

def lpgn_oracle_from_sfsm8(sfsm8_oracle: Oracle, S_size: int) -> Oracle:
    """An LPGN solver built by one call to an SFSM8 solver; ERROR becomes a coin flip."""

    def solve(q, X, y, rng):
        ans = reduce_lpgn_to_sfsm8(q, X, y, sfsm8_oracle, S_size, rng)
        return int(rng.choice([-1, 1])) if ans == ERROR else ans

    return solve


def promise_oracle_from_lpgn(lpgn_oracle: Oracle, config: RejectionKernelConfig) -> Oracle:
    return lambda q, X, y, rng: reduce_promise_lpn_to_lpgn(q, X, y, lpgn_oracle, config, rng)


@dataclass(frozen=True)
class PipelineConfig:
    n_A: int = 40
    T: int = 100
    gamma: float = 0.25  # LPGN noise; the SFSM8 stage sees 2 * gamma


def pipeline_oracle(terminal: Oracle, d: int, config: PipelineConfig) -> Oracle:
    """The promise-LPN solver on 2d coordinates obtained from an SFSM8 solver."""
    kernel = kernel_config_for(config.gamma, config.n_A)
    lpgn = lpgn_oracle_from_sfsm8(terminal, d)  # promise size floor(2d / 2) = d
    return promise_oracle_from_lpgn(lpgn, kernel)


def pipeline_lpn_to_sfsm8(inst: LpnInstance, terminal: Oracle, config: PipelineConfig, rng: np.random.Generator):
    """LPN on d -> promise-LPN on 2d -> LPGN -> SFSM8. Returns (answer, r_hat)."""
    ans, r_hat, _ = reduce_lpn_to_promise_lpn(inst.q, inst.X, inst.y, pipeline_oracle(terminal, inst.d, config),
                                              config.n_A, config.T, rng)
    return ans, r_hat


def padded_candidates(d: int, S: int) -> list[int]:
    """S union {d+1..d+r} for r = 0..d, as masks over 2d coordinates."""
    return [S | (((1 << r) - 1) << d) for r in range(d + 1)]


def pipeline_rho(config: PipelineConfig) -> float:
    """The LPN correlation the rejection-kernel stage expects."""
    return kernel_config_for(config.gamma, config.n_A).rho


# trial harness ----------------------------------------------------------------------

def trial_rng(seed: int, trial: int, stage: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, trial, stage])


def run_trials(fn: Callable[[int], dict], n_trials: int, jobs: int = 1) -> list[dict]:
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, range(n_trials)))
    return [fn(i) for i in range(n_trials)]


def binomial_summary(k: int, n: int) -> dict:
    ci = stats.binomtest(k, n).proportion_ci(0.95, method="wilson")
    return {"successes": k, "trials": n, "rate": k / n, "ci95": [float(ci.low), float(ci.high)]}


def trials_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
