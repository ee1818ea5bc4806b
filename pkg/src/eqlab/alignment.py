"""G-alignment of hypercube functions.

The alignment of f under a group G is

    sup_{||h|| = 1} E_g[ <f o g, h>^2 ]

which is a quadratic form in the Fourier coefficients of h, so it equals the
top eigenvalue of M = E_g[c(g) c(g)^T] where c(g) is the spectrum of f o g.
Closed forms exist for sign flips and signed permutations; everything else goes
through that eigenproblem, either by enumerating the group or by sampling it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np

from . import boolean_fourier as bf

GROUP_KINDS = ("perm", "sign", "sign_perm", "perm_fixing", "rot")
BRUTE_FORCE_PERM_CAP = 6
EXACT_PERM_CAP = 8


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    d: int
    T: int = 0  # fixed coordinates, only used by perm_fixing

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group {self.kind!r}; choose from {', '.join(GROUP_KINDS)}")
        if self.T >> self.d:
            raise ValueError("perm_fixing requires T inside [d]")

    @property
    def moved(self) -> list[int]:
        """Coordinates the permutations act on."""
        if self.kind in ("perm", "sign_perm"):
            return list(range(self.d))
        if self.kind == "perm_fixing":
            return [i for i in range(self.d) if not (self.T >> i) & 1]
        return []

    @property
    def has_signs(self) -> bool:
        return self.kind in ("sign", "sign_perm")


@dataclass
class AlignmentReport:
    value: float
    witness: dict
    method: str
    level0: float | None = None
    std_error: float | None = None

    def to_dict(self) -> dict:
        out = {"value": self.value, "witness": self.witness, "method": self.method}
        if self.level0 is not None:
            out["level0"] = self.level0
        if self.std_error is not None:
            out["std_error"] = self.std_error
        return out


# closed forms ---------------------------------------------------------------

def sign_perm_alignment(spec: bf.FourierSpectrum, include_constant: bool = False) -> AlignmentReport:
    """max over levels k of (level-k weight) / C(d, k).

    By default k ranges over 1..d and the constant's weight is reported
    separately as ``level0``; ``include_constant`` adds k = 0 to the max,
    which is what a brute-force computation on an uncentred f returns.
    """
    d = spec.d
    w = bf.level_weights(spec)
    ratios = np.array([w[k] / comb(d, k) for k in range(d + 1)])
    lo = 0 if include_constant else 1
    k = lo + int(np.argmax(ratios[lo:]))  # argmax picks the smallest k on ties
    value = float(ratios[k])
    sizes = bf.level_sizes(d)
    at_level = np.flatnonzero(sizes == k)
    mask = int(at_level[np.argmax(spec.coeffs[at_level] ** 2)]) if value > 0 else int(at_level[0])
    return AlignmentReport(value, {"level": k, "set": bf.mask_to_set(mask)}, "closed_form", level0=float(w[0]))


def sign_alignment(spec: bf.FourierSpectrum) -> AlignmentReport:
    """max_S fhat(S)^2 over all S, the empty set included."""
    sq = spec.coeffs**2
    mask = int(np.argmax(sq))
    return AlignmentReport(float(sq[mask]), {"set": bf.mask_to_set(mask)}, "closed_form",
                           level0=float(sq[0]))


def family_parity_closed_forms(d: int, k: int) -> tuple[float, float]:
    """Alignment and cross-predictability of the uniform family of size-k parities."""
    if not 0 <= k <= d:
        raise ValueError(f"need 0 <= k <= d, got k={k}, d={d}")
    v = 1.0 / comb(d, k)
    return v, v


# group enumeration ------------------------------------------------------------

def _perm_point_maps(d: int, perms: np.ndarray) -> np.ndarray:
    """For each permutation pi (row), the code of x' with x'_i = x_{pi(i)}."""
    codes = np.arange(1 << d, dtype=np.int64)
    bits = (codes[None, :, None] >> perms[:, None, :]) & 1  # (P, 2^d, d)
    return np.sum(bits << np.arange(d), axis=2)


def _perms_of(d: int, moved: list[int]) -> np.ndarray:
    base = np.arange(d)
    out = []
    for p in itertools.permutations(moved):
        row = base.copy()
        row[moved] = p
        out.append(row)
    return np.array(out, dtype=np.int64)


def group_point_maps(G: GroupSpec) -> np.ndarray:
    """Index maps for every group element: table of f o g is f.values[map]."""
    d = G.d
    if G.kind == "rot":
        raise ValueError("the rotation group is infinite; use sphere_harmonics")
    moved = G.moved
    perms = _perms_of(d, moved) if moved else np.arange(d)[None, :]
    maps = _perm_point_maps(d, perms)
    if G.has_signs:
        flips = np.arange(1 << d, dtype=np.int64)
        maps = (maps[None, :, :] ^ flips[:, None, None]).reshape(-1, 1 << d)
    return maps


def _top_eigen(M: np.ndarray) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(M)
    v = vecs[:, -1]
    v = v * np.sign(v[np.argmax(np.abs(v))])
    return float(max(vals[-1], 0.0)), v


def _eigen_report(C: np.ndarray, masks: np.ndarray, method: str, std_error=None) -> AlignmentReport:
    M = C.T @ C / C.shape[0]
    value, v = _top_eigen(M)
    keep = np.abs(v) > 1e-9
    witness = {"spectrum": {str(bf.mask_to_set(int(m))): float(c) for m, c in zip(masks[keep], v[keep])}}
    return AlignmentReport(value, witness, method, std_error=std_error)


def brute_force_alignment(f: bf.HypercubeFunction, G: GroupSpec, center: bool = False) -> AlignmentReport:
    """Enumerate G, build truth tables of f o g and take the top eigenvalue.

    ``center`` subtracts the mean of f first (alignment of f - E f).
    """
    if G.d != f.d:
        raise ValueError("group and function dimensions differ")
    if len(G.moved) > BRUTE_FORCE_PERM_CAP:
        raise bf.DimensionError(f"brute force enumerates |G| >= {len(G.moved)}!; limit is d <= {BRUTE_FORCE_PERM_CAP}")
    if G.has_signs:
        bf.check_dim(f.d, 12)
    vals = f.values - f.values.mean() if center else f.values
    maps = group_point_maps(G)
    C = bf.fwht_batch(vals[maps])
    support = np.flatnonzero(np.any(np.abs(C) > 1e-14, axis=0))
    if support.size == 0:
        return AlignmentReport(0.0, {"spectrum": {}}, "brute_force")
    return _eigen_report(C[:, support], support, "brute_force")


def evaluate_witness(f: bf.HypercubeFunction, G: GroupSpec, witness: dict) -> float:
    """Re-evaluate E_g <f o g, h>^2 for a reported unit-norm witness."""
    h = np.zeros(1 << f.d)
    for key, c in witness["spectrum"].items():
        h[bf.as_mask(eval_set(key))] = c
    h /= np.linalg.norm(h)
    C = bf.fwht_batch(f.values[group_point_maps(G)])
    return float(np.mean((C @ h) ** 2))


def eval_set(key: str) -> list[int]:
    key = key.strip("[] ")
    return [int(t) for t in key.split(",")] if key else []


def _permute_masks(masks: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Image of subset masks under i -> perm[i]."""
    out = np.zeros_like(masks)
    for i, j in enumerate(perm):
        out |= ((masks >> i) & 1) << int(j)
    return out


def perm_subgroup_alignment(spec: bf.FourierSpectrum, T, n_samples: int = 20_000, seed: int = 0,
                            exact_cap: int = EXACT_PERM_CAP) -> AlignmentReport:
    """Alignment under permutations fixing T pointwise.

    The action is worked out on the spectrum side: f o sigma has coefficient
    fhat(S) at sigma^{-1}(S). Exact enumeration when d - |T| <= exact_cap,
    otherwise a Monte-Carlo estimate of M from sampled permutations (labelled
    monte_carlo, with a batch-means standard error).
    """
    d = spec.d
    T = bf.as_mask(T)
    moved = [i for i in range(d) if not (T >> i) & 1]
    sup = np.array(spec.support(), dtype=np.int64)
    if sup.size == 0:
        return AlignmentReport(0.0, {"spectrum": {}}, "eigen")
    vals = spec.coeffs[sup]

    exact = len(moved) <= exact_cap
    if exact:
        perms = _perms_of(d, moved)
    else:
        rng = np.random.default_rng(seed)
        perms = np.tile(np.arange(d), (n_samples, 1))
        for r in range(n_samples):
            perms[r, moved] = rng.permutation(moved)
    images = np.stack([_permute_masks(sup, p) for p in perms])  # (|G|, |supp|)
    masks, inv = np.unique(images, return_inverse=True)
    inv = inv.reshape(images.shape)
    C = np.zeros((len(perms), len(masks)))
    rows = np.repeat(np.arange(len(perms)), len(sup))
    np.add.at(C, (rows, inv.ravel()), np.tile(vals, len(perms)))
    if exact:
        return _eigen_report(C, masks, "eigen")
    batches = np.array_split(np.arange(len(perms)), 10)
    ests = [_top_eigen(C[b].T @ C[b] / len(b))[0] for b in batches]
    rep = _eigen_report(C, masks, "monte_carlo", std_error=float(np.std(ests, ddof=1) / np.sqrt(len(ests))))
    return rep


def msp_alignment_bound(coeffs: dict, T, l: int, P: int, d: int) -> float:
    """2^{2P} * (sum of fhat(S)^2 over S not inside T) / d^{l+1}.

    ``coeffs`` maps subsets (0-indexed masks or coordinate lists) to
    coefficients. Sets contained in T form the invariant baseline and are
    dropped; every remaining set must leave T by at least l + 1 coordinates.
    """
    T = bf.as_mask(T)
    if d < 2 * P:
        raise ValueError(f"bound needs d >= 2P, got d={d}, P={P}")
    total = 0.0
    for s, c in coeffs.items():
        m = bf.as_mask(s)
        if c == 0 or m & ~T == 0:
            continue
        if bin(m & ~T).count("1") <= l:
            raise ValueError(f"set {bf.mask_to_set(m)} leaves T by only {bin(m & ~T).count('1')} <= l={l} coordinates")
        total += c * c
    return 4.0**P * total / d ** (l + 1)


# families and cross-predictability -------------------------------------------

@dataclass
class FunctionFamily:
    """A distribution over hypercube functions.

    ``sample_tables(rng, n)`` returns an (n, 2^d) array of truth tables.
    ``members`` optionally lists the support of a uniform finite family.
    """
    d: int
    sample_tables: Callable[[np.random.Generator, int], np.ndarray]
    members: list[np.ndarray] | None = None
    name: str = "family"


def parity_family(d: int, k: int) -> FunctionFamily:
    masks = [sum(1 << i for i in c) for c in itertools.combinations(range(d), k)]
    tables = np.stack([bf.chi(m, d) for m in masks])

    def sample(rng, n):
        return tables[rng.integers(len(masks), size=n)]

    return FunctionFamily(d, sample, list(tables), name=f"parities_k{k}")


def single_family(f: bf.HypercubeFunction) -> FunctionFamily:
    def sample(rng, n):
        return np.broadcast_to(f.values, (n, f.values.size))

    return FunctionFamily(f.d, sample, [f.values], name="single")


def random_group_maps(G: GroupSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    d = G.d
    if G.kind == "rot":
        raise ValueError("rotations do not act on the hypercube")
    moved = G.moved
    perms = np.tile(np.arange(d), (n, 1))
    if moved:
        keys = rng.random((n, len(moved)))
        perms[:, moved] = np.asarray(moved)[np.argsort(keys, axis=1)]
    maps = _perm_point_maps(d, perms)
    if G.has_signs:
        maps ^= rng.integers(1 << d, size=n)[:, None]
    return maps


def cross_predictability(family: FunctionFamily, G: GroupSpec, n_samples: int, seed: int,
                         batch: int = 4096, n_inner: int = 4096) -> tuple[float, float]:
    """Monte-Carlo estimate of E_{f,f',g,g'}[ E_x[f(gx) f'(g'x)]^2 ].

    The inner expectation is an exact sum over the cube when d <= 14 and a
    sampled average over ``n_inner`` points otherwise.
    """
    if n_samples < 2:
        raise ValueError("n_samples >= 2 required")
    d = family.d
    rng = np.random.default_rng(seed)
    vals = []
    left = n_samples
    while left > 0:
        b = min(batch, left)
        A = family.sample_tables(rng, b)
        B = family.sample_tables(rng, b)
        ga = random_group_maps(G, rng, b)
        gb = random_group_maps(G, rng, b)
        if d <= 14:
            fa = np.take_along_axis(A, ga, axis=1)
            fb = np.take_along_axis(B, gb, axis=1)
            corr = np.mean(fa * fb, axis=1)
        else:
            pts = rng.integers(1 << d, size=(b, n_inner))
            fa = np.take_along_axis(A, np.take_along_axis(ga, pts, axis=1), axis=1)
            fb = np.take_along_axis(B, np.take_along_axis(gb, pts, axis=1), axis=1)
            corr = np.mean(fa * fb, axis=1)
        vals.append(corr**2)
        left -= b
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


def family_alignment(family: FunctionFamily, G: GroupSpec) -> AlignmentReport:
    """Exact family alignment for a finite uniform family and a finite group."""
    if family.members is None:
        raise ValueError("family alignment needs an enumerable family")
    maps = group_point_maps(G)
    n = 1 << family.d
    M = np.zeros((n, n))
    for t in family.members:
        C = bf.fwht_batch(np.asarray(t)[maps])
        M += C.T @ C / C.shape[0]
    M /= len(family.members)
    value, v = _top_eigen(M)
    keep = np.flatnonzero(np.abs(v) > 1e-9)
    return AlignmentReport(value, {"spectrum": {str(bf.mask_to_set(int(m))): float(v[m]) for m in keep}}, "eigen")


def group_order(G: GroupSpec) -> int:
    n = factorial(len(G.moved))
    return n * (1 << G.d) if G.has_signs else n
