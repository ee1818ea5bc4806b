"""Polynomials on the unit sphere S^{d-1}: exact L2 inner products, harmonic
decomposition and rotation-group alignment.

Inner products use the closed-form monomial moments of the uniform measure on
the sphere, so everything here is exact up to float rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, prod

import numpy as np

DEGREE_CAP = 8
DIM_CAP = 12

Exponent = tuple[int, ...]


@dataclass(frozen=True)
class SpherePolynomial:
    d: int
    terms: dict[Exponent, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"sphere polynomials need d >= 2, got {self.d}")
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.d or min(alpha) < 0:
                raise ValueError(f"bad exponent {alpha} for d={self.d}")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0.0) + float(c)
        object.__setattr__(self, "terms", {a: c for a, c in clean.items() if c != 0})

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __add__(self, other: SpherePolynomial) -> SpherePolynomial:
        _check_same(self, other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0.0) + c
        return SpherePolynomial(self.d, out)

    def __sub__(self, other: SpherePolynomial) -> SpherePolynomial:
        return self + other.scale(-1.0)

    def __mul__(self, other: SpherePolynomial) -> SpherePolynomial:
        _check_same(self, other)
        out: dict[Exponent, float] = {}
        for a, c in self.terms.items():
            for b, e in other.terms.items():
                k = tuple(i + j for i, j in zip(a, b))
                out[k] = out.get(k, 0.0) + c * e
        return SpherePolynomial(self.d, out)

    def scale(self, c: float) -> SpherePolynomial:
        return SpherePolynomial(self.d, {a: c * v for a, v in self.terms.items()})

    def homogeneous_part(self, k: int) -> SpherePolynomial:
        return SpherePolynomial(self.d, {a: c for a, c in self.terms.items() if sum(a) == k})

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for a, c in self.terms.items():
            out += c * np.prod(X ** np.asarray(a), axis=1)
        return out


def _check_same(p, q):
    if p.d != q.d:
        raise ValueError(f"dimension mismatch: {p.d} vs {q.d}")


def monomial(d: int, alpha, coeff: float = 1.0) -> SpherePolynomial:
    return SpherePolynomial(d, {tuple(alpha): coeff})


def coordinate(d: int, i: int) -> SpherePolynomial:
    a = [0] * d
    a[i] = 1
    return monomial(d, a)


def constant(d: int, c: float = 1.0) -> SpherePolynomial:
    return monomial(d, [0] * d, c)


def norm_power(d: int, j: int) -> SpherePolynomial:
    """|x|^{2j} expanded by the multinomial theorem."""
    out = {}
    for combo in itertools.combinations_with_replacement(range(d), j):
        a = [0] * d
        for i in combo:
            a[i] += 2
        out[tuple(a)] = out.get(tuple(a), 0.0) + 0.0
    terms = {}
    for a in out:
        ks = [e // 2 for e in a]
        terms[a] = float(_multinomial(ks))
    return SpherePolynomial(d, terms)


def _multinomial(ks) -> int:
    n = sum(ks)
    r = 1
    for k in ks:
        r *= comb(n, k)
        n -= k
    return r


def laplacian(p: SpherePolynomial) -> SpherePolynomial:
    out: dict[Exponent, float] = {}
    for a, c in p.terms.items():
        for i, e in enumerate(a):
            if e >= 2:
                b = list(a)
                b[i] -= 2
                b = tuple(b)
                out[b] = out.get(b, 0.0) + c * e * (e - 1)
    return SpherePolynomial(p.d, out)


# moments and inner products -------------------------------------------------

def _double_factorial_odd(n: int) -> int:
    # (n-1)!! for even n, i.e. 1*3*...*(n-1)
    return prod(range(1, n, 2)) if n > 0 else 1


@lru_cache(maxsize=200_000)
def monomial_moment_exact(alpha: Exponent, d: int) -> Fraction:
    if any(a % 2 for a in alpha):
        return Fraction(0)
    num = prod(_double_factorial_odd(a) for a in alpha)
    half = sum(alpha) // 2
    den = prod(d + 2 * j for j in range(half))
    return Fraction(num, den)


def monomial_moment(alpha, d: int) -> float:
    """E over the uniform sphere S^{d-1} of prod_i x_i^alpha_i."""
    if d < 2:
        raise ValueError("d >= 2 required")
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != d:
        raise ValueError(f"exponent length {len(alpha)} != d={d}")
    return float(monomial_moment_exact(alpha, d))


def inner_product(p: SpherePolynomial, q: SpherePolynomial) -> float:
    _check_same(p, q)
    d = p.d
    total = 0.0
    for a, c in p.terms.items():
        for b, e in q.terms.items():
            s = tuple(i + j for i, j in zip(a, b))
            if any(x % 2 for x in s):
                continue
            total += c * e * float(monomial_moment_exact(s, d))
    return total


def norm_sq(p: SpherePolynomial) -> float:
    return inner_product(p, p)


# harmonic decomposition ------------------------------------------------------

def dim_harmonic(d: int, l: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^{d-1}."""
    if l < 0:
        raise ValueError("l >= 0 required")
    if l == 0:
        return 1
    num = (2 * l + d - 2) * comb(l + d - 3, l - 1)
    assert num % l == 0
    return num // l


def dim_homogeneous(d: int, l: int) -> int:
    return comb(l + d - 1, d - 1) if l >= 0 else 0


def exponents_of_degree(d: int, l: int) -> list[Exponent]:
    out = []
    for combo in itertools.combinations_with_replacement(range(d), l):
        a = [0] * d
        for i in combo:
            a[i] += 1
        out.append(tuple(a))
    return out


def laplacian_matrix(d: int, l: int) -> np.ndarray:
    """Matrix of the Laplacian Hom_l -> Hom_{l-2} in the monomial bases."""
    cols = exponents_of_degree(d, l)
    rows = exponents_of_degree(d, l - 2) if l >= 2 else []
    row_idx = {a: i for i, a in enumerate(rows)}
    L = np.zeros((len(rows), len(cols)))
    for j, a in enumerate(cols):
        for b, c in laplacian(monomial(d, a)).terms.items():
            L[row_idx[b], j] += c
    return L


def harmonic_kernel_dim(d: int, l: int) -> int:
    """dim ker(Laplacian on Hom_l), by matrix rank."""
    L = laplacian_matrix(d, l)
    rank = np.linalg.matrix_rank(L) if L.size else 0
    return int(dim_homogeneous(d, l) - rank)


def harmonic_part(p: SpherePolynomial, m: int) -> SpherePolynomial:
    """Harmonic component of a homogeneous degree-m polynomial p.

    p - K[p] lies in |x|^2 Hom_{m-2}; K[p] = sum_j c_j |x|^{2j} Lap^j p with
    c_{j+1} = -c_j / (2 (j+1) (d + 2m - 2j - 4)).
    """
    d = p.d
    out = SpherePolynomial(d, {})
    c = 1.0
    u = p
    j = 0
    while not u.is_zero():
        out = out + (norm_power(d, j) * u).scale(c) if j else out + u
        c = -c / (2 * (j + 1) * (d + 2 * m - 2 * j - 4)) if (d + 2 * m - 2 * j - 4) else 0.0
        u = laplacian(u)
        j += 1
        if 2 * j > m:
            break
    return out


@dataclass(frozen=True)
class HarmonicComponent:
    degree: int
    poly: SpherePolynomial
    norm_sq: float


@dataclass(frozen=True)
class HarmonicDecomposition:
    d: int
    components: tuple[HarmonicComponent, ...]

    def norms(self) -> dict[int, float]:
        return {c.degree: c.norm_sq for c in self.components}

    def component(self, l: int) -> SpherePolynomial:
        for c in self.components:
            if c.degree == l:
                return c.poly
        return SpherePolynomial(self.d, {})


def harmonic_decompose(p: SpherePolynomial, degree_cap: int = DEGREE_CAP) -> HarmonicDecomposition:
    d = p.d
    if p.degree > degree_cap:
        raise ValueError(f"degree {p.degree} exceeds cap {degree_cap}")
    if d > DIM_CAP:
        raise ValueError(f"d={d} exceeds decomposition cap {DIM_CAP}")
    by_level: dict[int, SpherePolynomial] = {}
    for m in range(p.degree + 1):
        pm = p.homogeneous_part(m)
        if pm.is_zero():
            continue
        u = pm
        for k in range(m // 2 + 1):
            l = m - 2 * k
            # Lap^k(|x|^{2k} h) = A * h for h harmonic of degree l
            A = prod(2 * j * (2 * l + d + 2 * j - 2) for j in range(1, k + 1))
            h = harmonic_part(u, l).scale(1.0 / A)
            by_level[l] = by_level.get(l, SpherePolynomial(d, {})) + h
            u = laplacian(u)
    comps = []
    for l in sorted(by_level):
        h = by_level[l]
        if h.is_zero(1e-15):
            continue
        comps.append(HarmonicComponent(l, h, norm_sq(h)))
    return HarmonicDecomposition(d, tuple(comps))


def rotation_alignment(p: SpherePolynomial, decomposition: HarmonicDecomposition | None = None):
    """max_l |Pi_l p|^2 / dim V_{d,l}; returns (value, argmax level), ties to smaller l."""
    dec = decomposition or harmonic_decompose(p)
    best, best_l = 0.0, 0
    for c in dec.components:
        v = c.norm_sq / dim_harmonic(p.d, c.degree)
        if v > best:
            best, best_l = v, c.degree
    return best, best_l


def weak_learnable_sphere_verdict(p: SpherePolynomial, C: float) -> bool:
    dec = harmonic_decompose(p)
    low = sum(c.norm_sq for c in dec.components if c.degree <= C)
    return low >= p.d ** (-C)


# Monte-Carlo helpers ---------------------------------------------------------

def sample_sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def haar_rotation(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed element(s) of SO(d) via sign-corrected QR."""
    n = 1 if size is None else size
    Z = rng.standard_normal((n, d, d))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.diagonal(R, axis1=1, axis2=2))[:, None, :]
    neg = np.linalg.det(Q) < 0
    Q[neg, :, 0] *= -1
    return Q[0] if size is None else Q


def rotated_inner_products(p: SpherePolynomial, h: SpherePolynomial, G: np.ndarray) -> np.ndarray:
    """<p o g, h> for each rotation g in the batch G (shape (B, d, d)).

    p o g is expanded as a product of the linear forms (g x)_i, contracted
    against the tensor of moments <x_{j1}...x_{jk}, h>.
    """
    d = p.d
    G = np.asarray(G, dtype=float)
    out = np.zeros(G.shape[0])
    for k in range(p.degree + 1):
        pk = p.homogeneous_part(k)
        if pk.is_zero():
            continue
        if k == 0:
            out += pk.terms[(0,) * d] * _h_against(h, (0,) * d)
            continue
        V = np.zeros((d,) * k)
        for idx in itertools.product(range(d), repeat=k):
            a = [0] * d
            for i in idx:
                a[i] += 1
            V[idx] = _h_against(h, tuple(a))
        letters = "abcdefghijkl"[:k]
        spec = ",".join(f"z{c}" for c in letters) + f",{letters}->z"
        for alpha, c in pk.terms.items():
            rows = [i for i, e in enumerate(alpha) for _ in range(e)]
            out += c * np.einsum(spec, *[G[:, r, :] for r in rows], V, optimize=True)
    return out


def _h_against(h: SpherePolynomial, beta: Exponent) -> float:
    d = h.d
    total = 0.0
    for g, c in h.terms.items():
        s = tuple(i + j for i, j in zip(beta, g))
        if any(x % 2 for x in s):
            continue
        total += c * float(monomial_moment_exact(s, d))
    return total


def mc_rotation_alignment(p: SpherePolynomial, n_rotations: int, seed: int, batch: int = 2000):
    """Monte-Carlo estimate of E_g[<p o g, h>^2] at the optimal witness h.

    Returns (estimate, standard error, level used for the witness).
    """
    _, l_star = rotation_alignment(p)
    h = harmonic_decompose(p).component(l_star)
    nrm = np.sqrt(norm_sq(h))
    if nrm == 0:
        return 0.0, 0.0, l_star
    h = h.scale(1.0 / nrm)
    rng = np.random.default_rng(seed)
    vals = []
    left = n_rotations
    while left > 0:
        b = min(batch, left)
        G = haar_rotation(p.d, rng, size=b)
        vals.append(rotated_inner_products(p, h, G) ** 2)
        left -= b
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))), l_star


def from_json(obj: dict) -> SpherePolynomial:
    d = int(obj["d"])
    terms = {}
    for t in obj["terms"]:
        a = tuple(int(x) for x in t["alpha"])
        terms[a] = terms.get(a, 0.0) + float(t["coeff"])
    return SpherePolynomial(d, terms)


def to_json(p: SpherePolynomial) -> dict:
    return {"d": p.d, "terms": [{"alpha": list(a), "coeff": c} for a, c in sorted(p.terms.items())]}
