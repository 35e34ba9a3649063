"""Independent numerical integration over R^n and the unit sphere.

Integrals over R^n use a product rule.  Directions are sampled uniformly on
S^{n-1} (normalized Gaussian vectors).  The radial half-line is mapped to
(0, 1) by r = L s / (1 - s) and integrated with a Gauss-Jacobi rule carrying
the weight s^(n-1).  Directions are drawn in batches.  Batch ``b`` draws from
its own Philox stream keyed by ``(seed, b)``, and batch sums are reduced in
batch order.  A result is therefore bit-identical for a fixed seed and
budget, whatever the number of worker threads.

The reported standard error combines a delete-one jackknife over batches
with an estimate of the radial quadrature error.  The radial error estimate
compares the rule against a coarser one.

Exact sphere moments and the two quartic moment formulas for the deformation
field live here as well, next to their Monte Carlo cross-checks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .exact_constants import ExactValue, exact_gamma, sphere_volume
from .weyl_algebra import DeformationField, WeylForm, contraction

MIN_BUDGET = 1000
DEFAULT_BATCHES = 16
RADIAL_NODES = 64
COARSE_NODES = 40
CHUNK = 2048


@dataclass(frozen=True)
class Integrand:
    """Integrand on R^n given in polar form.

    ``func(theta, r)`` receives unit directions ``theta`` of shape (D, n) and
    radii ``r`` of shape (R,), and returns an array of shape (D, R, *value_shape).

    Parameters
    ----------
    func : callable
        Polar evaluation as described above.
    n : int
        Ambient dimension.
    decay : float
        Exponent d with f = O(|x|^-d) at infinity; must exceed n.
    scale : float
        Radial length scale L used by the compactification.
    smooth : bool
        Informational flag.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n: int
    decay: float
    scale: float = 1.0
    smooth: bool = True

    def __post_init__(self):
        if not self.decay > self.n:
            raise ValueError(f"integrand decays like |x|^-{self.decay}, not integrable in R^{self.n}")
        if not self.scale > 0:
            raise ValueError("radial scale must be positive")

    @staticmethod
    def from_points(f: Callable[[np.ndarray], np.ndarray], n: int, decay: float,
                    scale: float = 1.0) -> "Integrand":
        """Wrap a pointwise integrand ``f(x)`` with x of shape (N, n)."""

        def polar(theta, r):
            X = theta[:, None, :] * r[None, :, None]
            vals = np.asarray(f(X.reshape(-1, n)))
            return vals.reshape(theta.shape[0], r.shape[0], *vals.shape[1:])

        return Integrand(polar, n, decay, scale)


@dataclass
class OracleResult:
    value: np.ndarray | float
    standard_error: np.ndarray | float
    samples_used: int
    method: str
    batch_values: Optional[np.ndarray] = field(default=None, repr=False)
    batch_counts: Optional[np.ndarray] = field(default=None, repr=False)
    quadrature_error: np.ndarray | float = 0.0

    def __getitem__(self, idx) -> "OracleResult":
        """Component of a vector-valued result, keeping the batch data."""
        return OracleResult(
            value=np.asarray(self.value)[idx],
            standard_error=np.asarray(self.standard_error)[idx],
            samples_used=self.samples_used,
            method=self.method,
            batch_values=None if self.batch_values is None else self.batch_values[(slice(None),) + np.index_exp[idx]],
            batch_counts=self.batch_counts,
            quadrature_error=np.asarray(self.quadrature_error)[idx] if np.ndim(self.quadrature_error) else self.quadrature_error,
        )

    def combine(self, weights) -> "OracleResult":
        """Linear combination over the trailing value axis, sharing samples.

        The jackknife is recomputed on the combined batch values, so
        correlated pieces are handled correctly.
        """
        w = np.asarray(weights, dtype=float)
        bv = np.tensordot(self.batch_values, w, axes=([-1], [-1]))
        quad = np.broadcast_to(np.asarray(self.quadrature_error, dtype=float), np.shape(self.value))
        qe = np.tensordot(quad, np.abs(w), axes=([-1], [-1]))
        value, jack = _jackknife(bv, self.batch_counts)
        return OracleResult(value, np.sqrt(jack ** 2 + qe ** 2), self.samples_used, self.method, bv,
                            self.batch_counts, qe)

    def as_dict(self) -> dict:
        return {"value": _jsonable(self.value), "standard_error": _jsonable(self.standard_error),
                "samples": self.samples_used, "method": self.method}


def _jsonable(v):
    return np.asarray(v).tolist()


def _jackknife(batch_means: np.ndarray, counts: np.ndarray):
    """Weighted mean of batch means and its delete-one jackknife standard error."""
    counts = np.asarray(counts, dtype=float)
    shape = (-1,) + (1,) * (batch_means.ndim - 1)
    c = counts.reshape(shape)
    total = np.sum(batch_means * c, axis=0)
    N = counts.sum()
    mean = total / N
    B = len(counts)
    loo = (total[None] - batch_means * c) / (N - c)
    jbar = loo.mean(axis=0)
    se = np.sqrt((B - 1) / B * np.sum((loo - jbar[None]) ** 2, axis=0))
    return mean, se


def batch_directions(n: int, count: int, seed: int, batch: int) -> np.ndarray:
    """Uniform directions for one batch, from a counter-based stream keyed by (seed, batch)."""
    gen = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(batch)]))
    g = gen.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@lru_cache(maxsize=None)
def radial_rule(n: int, nodes: int):
    """Nodes s_i in (0, 1) and weights for int_0^1 g(s) s^(n-1) ds."""
    x, w = roots_jacobi(nodes, 0.0, n - 1.0)
    s = (x + 1.0) / 2.0
    return s, w / 2.0 ** n


def _radial_points(n: int, nodes: int, scale: float):
    s, w = radial_rule(n, nodes)
    r = scale * s / (1.0 - s)
    # r^(n-1) dr = L^n s^(n-1) (1-s)^(-(n+1)) ds
    weights = w * scale ** n / (1.0 - s) ** (n + 1)
    return r, weights


def _batch_sizes(budget: int, batches: int):
    base, extra = divmod(budget, batches)
    return [base + (1 if b < extra else 0) for b in range(batches)]


def integrate_rn(f: Integrand, budget: int = 100_000, seed: int = 0,
                 batches: int = DEFAULT_BATCHES, radial_nodes: int = RADIAL_NODES,
                 workers: int = 1) -> OracleResult:
    """Integrate ``f`` over R^n.

    Parameters
    ----------
    f : Integrand
        Polar integrand.
    budget : int
        Number of sampled directions (at least 1000).  Each direction is
        paired with the full radial rule.
    seed : int
        Stream seed.
    batches : int
        Number of jackknife batches.
    radial_nodes : int
        Size of the Gauss-Jacobi rule.
    workers : int
        Threads used for batches.  Results do not depend on it.

    Returns
    -------
    OracleResult
        Value (scalar or array), standard error and batch data.
    """
    if budget < MIN_BUDGET:
        raise ValueError(f"budget {budget} below the minimum of {MIN_BUDGET} directions")
    n = f.n
    omega = float(sphere_volume(n))
    r, wr = _radial_points(n, radial_nodes, f.scale)
    sizes = _batch_sizes(budget, batches)

    def run(b):
        theta = batch_directions(n, sizes[b], seed, b)
        acc = 0.0
        for s in range(0, sizes[b], CHUNK):
            vals = np.asarray(f.func(theta[s:s + CHUNK], r))
            acc = acc + np.tensordot(wr, vals.sum(axis=0), axes=([0], [0]))
        return omega * acc / sizes[b]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(run, range(batches)))
    else:
        means = [run(b) for b in range(batches)]
    batch_values = np.stack([np.asarray(m, dtype=float) for m in means])
    value, jack = _jackknife(batch_values, np.array(sizes))

    # radial rule error, estimated on the first batch against a coarser rule
    theta0 = batch_directions(n, min(sizes[0], CHUNK), seed, 0)
    rc, wc = _radial_points(n, COARSE_NODES, f.scale)
    fine = omega * np.tensordot(wr, np.asarray(f.func(theta0, r)).mean(axis=0), axes=([0], [0]))
    coarse = omega * np.tensordot(wc, np.asarray(f.func(theta0, rc)).mean(axis=0), axes=([0], [0]))
    quad = np.abs(fine - coarse) + 1e-14 * np.abs(fine)
    se = np.sqrt(jack ** 2 + quad ** 2)
    if np.ndim(value) == 0:
        value, se, quad = float(value), float(se), float(quad)
    return OracleResult(value, se, int(budget), "sphere_radial_product", batch_values,
                        np.array(sizes), quad)


def integrate_sphere(f: Callable[[np.ndarray], np.ndarray], n: int, budget: int = 1_000_000,
                     seed: int = 0, batches: int = DEFAULT_BATCHES) -> OracleResult:
    """Monte Carlo integral of ``f(theta)`` over S^{n-1} with surface measure."""
    if budget < MIN_BUDGET:
        raise ValueError(f"budget {budget} below the minimum of {MIN_BUDGET} samples")
    omega = float(sphere_volume(n))
    sizes = _batch_sizes(budget, batches)
    means = []
    for b in range(batches):
        theta = batch_directions(n, sizes[b], seed, b)
        acc = 0.0
        for s in range(0, sizes[b], 65536):
            acc = acc + np.asarray(f(theta[s:s + 65536])).sum(axis=0)
        means.append(omega * acc / sizes[b])
    batch_values = np.stack([np.asarray(m, dtype=float) for m in means])
    value, se = _jackknife(batch_values, np.array(sizes))
    if np.ndim(value) == 0:
        value, se = float(value), float(se)
    return OracleResult(value, se, int(budget), "monte_carlo", batch_values, np.array(sizes))


def integrate_sphere_poly(alpha: Sequence[int]) -> ExactValue:
    """Exact int_{S^{n-1}} x^alpha dσ with n = len(alpha).

    Zero if any exponent is odd, else 2 prod Gamma((a_i+1)/2) / Gamma((n+|a|)/2).
    """
    alpha = [int(a) for a in alpha]
    if any(a < 0 for a in alpha):
        raise ValueError("exponents must be non-negative")
    if any(a % 2 for a in alpha):
        return ExactValue(Fraction(0))
    n = len(alpha)
    out = ExactValue(Fraction(2))
    for a in alpha:
        out = out * exact_gamma(Fraction(a + 1, 2))
    return out / exact_gamma(Fraction(n + sum(alpha), 2))


@lru_cache(maxsize=None)
def _moment_pattern(n: int, pattern: tuple) -> float:
    alpha = list(pattern) + [0] * (n - len(pattern))
    return float(integrate_sphere_poly(alpha))


@lru_cache(maxsize=None)
def fourth_moment_tensor(n: int) -> np.ndarray:
    """M[a, b, c, d] = int_{S^{n-1}} x_a x_b x_c x_d dσ, assembled from exact moments."""
    M = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(a, n):
            for c in range(b, n):
                for d in range(c, n):
                    counts = np.bincount([a, b, c, d], minlength=n)
                    pattern = tuple(sorted((int(k) for k in counts if k), reverse=True))
                    v = _moment_pattern(n, pattern)
                    if v:
                        for idx in set(permutations((a, b, c, d))):
                            M[idx] = v
    M.setflags(write=False)
    return M


def brendle_moment_a(W: WeylForm, k: int, l: int) -> float:
    """int_{S^{n-1}} sum_p h_kp h_pl dσ by exact expansion of the quartic polynomial."""
    M = fourth_moment_tensor(W.n)
    c = W.components
    return float(np.einsum("apb,pcd,abcd->", c[k], c[:, :, l, :], M)) / 9.0


def brendle_moment_b(W: WeylForm, a: int, b: int, c: int, d: int) -> float:
    """int_{S^{n-1}} h_ab h_cd dσ by exact expansion of the quartic polynomial."""
    M = fourth_moment_tensor(W.n)
    w = W.components
    return float(np.einsum("pq,rs,pqrs->", w[a, :, b, :], w[c, :, d, :], M)) / 9.0


def brendle_moment_a_closed(W: WeylForm, k: int, l: int) -> float:
    """omega_{n-1} / (18 n (n+2)) T_kl."""
    n = W.n
    return float(sphere_volume(n)) / (18 * n * (n + 2)) * float(contraction(W).T[k, l])


def brendle_moment_b_closed(W: WeylForm, a: int, b: int, c: int, d: int) -> float:
    """omega_{n-1} / (9 n (n+2)) sum_pq W_apbq (W_cpdq + W_cqdp)."""
    n = W.n
    w = W.components
    s = np.sum(w[a, :, b, :] * (w[c, :, d, :] + w[c, :, d, :].T))
    return float(sphere_volume(n)) / (9 * n * (n + 2)) * float(s)


def brendle_moment_a_mc(W: WeylForm, k: int, l: int, samples: int = 1_000_000,
                        seed: int = 0) -> OracleResult:
    field_ = DeformationField(W)

    def f(theta):
        H = field_.h(theta)
        return np.einsum("Np,Np->N", H[:, k, :], H[:, :, l])

    return integrate_sphere(f, W.n, samples, seed)


def brendle_moment_b_mc(W: WeylForm, a: int, b: int, c: int, d: int,
                        samples: int = 1_000_000, seed: int = 0) -> OracleResult:
    field_ = DeformationField(W)

    def f(theta):
        H = field_.h(theta)
        return H[:, a, b] * H[:, c, d]

    return integrate_sphere(f, W.n, samples, seed)
