"""Weyl-type four-linear forms and the quadratic deformation field they induce.

A Weyl-type form W on R^n is a rank-4 array with

    W_ijkl = -W_jikl = -W_ijlk = W_klij,
    W_ijkl + W_jkil + W_kijl = 0,
    sum_i W_ijil = 0.

It induces the symmetric matrix field h(x)_ij = (1/3) sum_pq W_ipjq x_p x_q,
which is trace free, divergence free and annihilates the radial direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import minimize

CHUNK = 4096


@dataclass(frozen=True)
class WeylForm:
    """Dense Weyl-type tensor with components ``W[i, j, k, l]`` (0-indexed)."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise ValueError(f"Weyl form needs shape (n, n, n, n), got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def n(self) -> int:
        return self.components.shape[0]

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.components ** 2))

    def is_zero(self) -> bool:
        return not np.any(self.components)

    @staticmethod
    def zero(n: int) -> "WeylForm":
        return WeylForm(np.zeros((n, n, n, n)))


@dataclass(frozen=True)
class ValidationReport:
    """Maximum absolute violation of each symmetry family."""

    antisym_first: float
    antisym_second: float
    pair: float
    bianchi: float
    trace: float
    scale: float
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.antisym_first, self.antisym_second, self.pair, self.bianchi, self.trace)

    @property
    def accepted(self) -> bool:
        return self.max_residual <= self.tolerance * self.scale

    norm_zero: bool = False

    @property
    def trivial(self) -> bool:
        return self.norm_zero

    def as_dict(self) -> dict:
        return {
            "antisym_first": self.antisym_first,
            "antisym_second": self.antisym_second,
            "pair": self.pair,
            "bianchi": self.bianchi,
            "trace": self.trace,
            "accepted": self.accepted,
            "trivial": self.trivial,
        }


def _bianchi_sum(c: np.ndarray) -> np.ndarray:
    # W_ijkl + W_jkil + W_kijl
    return c + np.transpose(c, (2, 0, 1, 3)) + np.transpose(c, (1, 2, 0, 3))


def validate_weyl(W, tol: float = 1e-12) -> ValidationReport:
    """Residuals of every Weyl symmetry; accepted iff all are below ``tol*max(1,|W|)``."""
    c = W.components if isinstance(W, WeylForm) else np.asarray(W, dtype=float)
    if c.ndim != 4 or len(set(c.shape)) != 1:
        raise ValueError(f"expected an n^4 array, got shape {c.shape}")
    norm = float(np.sqrt(np.sum(c ** 2)))
    return ValidationReport(
        antisym_first=float(np.max(np.abs(c + np.transpose(c, (1, 0, 2, 3))))),
        antisym_second=float(np.max(np.abs(c + np.transpose(c, (0, 1, 3, 2))))),
        pair=float(np.max(np.abs(c - np.transpose(c, (2, 3, 0, 1))))),
        bianchi=float(np.max(np.abs(_bianchi_sum(c)))),
        trace=float(np.max(np.abs(np.einsum("ijil->jl", c)))),
        scale=max(1.0, norm),
        tolerance=tol,
        norm_zero=norm == 0.0,
    )


def kulkarni_nomizu(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a ⊙ b)_ijkl = a_ik b_jl + a_jl b_ik - a_il b_jk - a_jk b_il."""
    return (np.einsum("ik,jl->ijkl", a, b) + np.einsum("jl,ik->ijkl", a, b)
            - np.einsum("il,jk->ijkl", a, b) - np.einsum("jk,il->ijkl", a, b))


def weyl_part(R: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
    """Trace-free part of an algebraic curvature tensor.

    Traces are taken over the first and third slot, so the round sphere
    ``R = g_ik g_jl - g_il g_jk`` has Ricci tensor ``(n-1) g``.
    """
    n = R.shape[0]
    g = np.eye(n) if g is None else g
    ginv = np.linalg.inv(g)
    ric = np.einsum("ik,ijkl->jl", ginv, R)
    scal = float(np.einsum("jl,jl->", ginv, ric))
    return (R - kulkarni_nomizu(ric, g) / (n - 2)
            + scal / (2 * (n - 1) * (n - 2)) * kulkarni_nomizu(g, g))


def project_weyl(X: np.ndarray) -> WeylForm:
    """Project an arbitrary rank-4 array onto the Weyl symmetry class."""
    X = np.asarray(X, dtype=float)
    R = 0.5 * (X - np.transpose(X, (1, 0, 2, 3)))
    R = 0.5 * (R - np.transpose(R, (0, 1, 3, 2)))
    R = 0.5 * (R + np.transpose(R, (2, 3, 0, 1)))
    R = R - _bianchi_sum(R) / 3.0
    return WeylForm(weyl_part(R))


def random_weyl(n: int, rng: np.random.Generator, normalize: bool = True) -> WeylForm:
    if n < 4:
        raise ValueError("nonzero Weyl forms need n >= 4")
    W = project_weyl(rng.standard_normal((n, n, n, n)))
    if normalize:
        W = WeylForm(W.components / np.sqrt(W.norm_sq))
    return W


def diagonal_weyl(A) -> WeylForm:
    """W_ijkl = (A_ij/2)(δ_ik δ_jl - δ_jk δ_il) for an admissible matrix A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    problems = []
    if A.shape != (n, n):
        problems.append("A must be square")
    else:
        if not np.allclose(A, A.T, rtol=0, atol=1e-14):
            problems.append("A must be symmetric")
        if np.any(np.diag(A) != 0):
            problems.append("A must have zero diagonal")
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.any(np.abs(A.sum(axis=1)) > 1e-12 * scale):
            problems.append("rows of A must sum to zero")
        off = A[~np.eye(n, dtype=bool)]
        if np.any(off == 0):
            problems.append("off-diagonal entries of A must be nonzero")
    if problems:
        raise ValueError("; ".join(problems))
    d = np.eye(n)
    W = 0.5 * A[:, :, None, None] * (np.einsum("ik,jl->ijkl", d, d) - np.einsum("jk,il->ijkl", d, d))
    return WeylForm(W)


def circulant_matrix(n: int) -> np.ndarray:
    """Admissible matrix for :func:`diagonal_weyl`.

    Circulant with value 1 at index distance ±1 and -2/(n-3) elsewhere
    off the diagonal; for n = 4 this is the pattern (1, -2, 1).
    """
    if n < 4:
        raise ValueError("no admissible matrix exists for n < 4")
    row = np.full(n, -2.0 / (n - 3))
    row[0] = 0.0
    row[1] = row[n - 1] = 1.0
    return np.array([np.roll(row, i) for i in range(n)])


def default_weyl(n: int) -> WeylForm:
    return diagonal_weyl(circulant_matrix(n))


def weyl_from_spec(spec: dict) -> WeylForm:
    """Build a form from ``{"kind": "diagonal", "A": ...}`` or ``{"kind": "full", ...}``.

    Full specs list 0-based ``[i, j, k, l, value]`` entries; the array is
    projected onto the Weyl class afterwards.
    """
    kind = spec.get("kind")
    if kind == "diagonal":
        return diagonal_weyl(spec["A"])
    if kind == "full":
        n = int(spec["n"])
        X = np.zeros((n, n, n, n))
        for i, j, k, l, v in spec.get("entries", []):
            X[int(i), int(j), int(k), int(l)] = float(v)
        return project_weyl(X)
    if kind == "circulant":
        return default_weyl(int(spec["n"]))
    raise ValueError(f"unknown Weyl spec kind {kind!r}")


def load_weyl_spec(path) -> WeylForm:
    with open(Path(path)) as fh:
        return weyl_from_spec(json.load(fh))


@dataclass(frozen=True)
class ContractionTensor:
    T: np.ndarray
    three_form_residual: float
    trace_residual: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.T))


def contraction(W: WeylForm) -> ContractionTensor:
    """T_kl = sum_pqr (W_kpqr + W_krqp)(W_lpqr + W_lrqp)."""
    c = W.components
    S = c + np.transpose(c, (0, 3, 2, 1))
    T = np.einsum("kpqr,lpqr->kl", S, S)
    T3 = 3.0 * np.einsum("kpqr,lpqr->kl", c, c)
    scale = max(1.0, float(np.max(np.abs(T))))
    return ContractionTensor(
        T=T,
        three_form_residual=float(np.max(np.abs(T - T3))) / scale,
        trace_residual=abs(float(np.trace(T)) - 3.0 * W.norm_sq) / max(1.0, 3.0 * W.norm_sq),
    )


class DeformationField:
    """The field h(x)_ij = (1/3) sum W_ipjq x_p x_q, evaluated in batches.

    Points are arrays of shape ``(n,)`` or ``(N, n)``.
    """

    def __init__(self, weyl: WeylForm):
        self.weyl = weyl
        self.n = weyl.n
        c = weyl.components
        # h(x) = x^T Q x with Q[p, q] the matrix (1/3) W[:, p, :, q]
        self._wp = np.ascontiguousarray(np.transpose(c, (1, 0, 2, 3))).reshape(self.n, -1) / 3.0
        # d_i h_jl(x) = G[i, j, l, p] x_p
        G = (np.transpose(c, (1, 0, 2, 3)) + np.transpose(c, (3, 0, 2, 1))) / 3.0
        self._grad = np.ascontiguousarray(G).reshape(-1, self.n)

    def _batched(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        return np.atleast_2d(x), single

    def partial(self, x) -> np.ndarray:
        """M(x)[i, j, q] = (1/3) sum_p W_ipjq x_p, linear in x."""
        X, single = self._batched(x)
        M = (X @ self._wp).reshape(-1, self.n, self.n, self.n)
        return M[0] if single else M

    def h(self, x) -> np.ndarray:
        X, single = self._batched(x)
        out = np.empty((X.shape[0], self.n, self.n))
        for s in range(0, X.shape[0], CHUNK):
            xs = X[s:s + CHUNK]
            M = (xs @ self._wp).reshape(-1, self.n, self.n, self.n)
            out[s:s + CHUNK] = np.einsum("Nijq,Nq->Nij", M, xs)
        return out[0] if single else out

    def bilinear(self, x, y) -> np.ndarray:
        """H(x, y)_ij = (1/3) sum W_ipjq x_p y_q, so h(x) = H(x, x)."""
        X, single = self._batched(x)
        y = np.asarray(y, dtype=float)
        Wy = np.einsum("ipjq,q->pij", self.weyl.components, y).reshape(self.n, -1) / 3.0
        out = (X @ Wy).reshape(-1, self.n, self.n)
        return out[0] if single else out

    def gradient(self, x) -> np.ndarray:
        """Array D[..., i, j, l] = d_i h_jl(x)."""
        X, single = self._batched(x)
        out = (X @ self._grad.T).reshape(-1, self.n, self.n, self.n)
        return out[0] if single else out

    def sum_sq(self, x) -> np.ndarray:
        """sum_pq h_pq(x)^2."""
        H = self.h(x)
        return np.sum(H ** 2, axis=(-2, -1))

    def sum_sq_grad(self, x) -> np.ndarray:
        """Gradient of sum_pq h_pq(x)^2 with respect to x."""
        X, single = self._batched(x)
        H = self.h(X)
        # d_k h_pq(x) = gradient[k, p, q]
        D = self.gradient(X)
        out = 2.0 * np.einsum("Npq,Nkpq->Nk", H, D)
        return out[0] if single else out


def h_eval(W: WeylForm, x) -> np.ndarray:
    return DeformationField(W).h(x)


def h_gradient(W: WeylForm, x) -> np.ndarray:
    return DeformationField(W).gradient(x)


def diagonal_h(A, z) -> np.ndarray:
    """Closed form of h for the diagonal family: (1/6)(δ_ij sum_p A_ip z_p^2 - A_ij z_i z_j)."""
    A = np.asarray(A, dtype=float)
    z = np.asarray(z, dtype=float)
    return (np.diag(A @ z ** 2) - A * np.outer(z, z)) / 6.0


@dataclass(frozen=True)
class CoercivityResult:
    minimum: float
    argmin: np.ndarray
    sweep_minimum: float
    maximum: float

    @property
    def sampling_gap(self) -> float:
        return self.sweep_minimum - self.minimum


def _unit(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def coercivity_check(W: WeylForm, samples: int = 100_000, starts: int = 64,
                     seed: int = 0) -> CoercivityResult:
    """Minimum of sum_pq h_pq(z)^2 over the unit sphere.

    A random sweep is followed by local descent (on the radial projection)
    from the best ``starts`` sweep points.  The minimum is evidenced, not
    certified.
    """
    field = DeformationField(W)
    n = W.n
    if W.is_zero():
        return CoercivityResult(0.0, np.eye(n)[0], 0.0, 0.0)
    rng = np.random.default_rng(seed)
    pts = _unit(rng, samples, n)
    vals = field.sum_sq(pts)
    order = np.argsort(vals, kind="stable")

    def obj(z):
        r = np.linalg.norm(z)
        u = z / r
        v = float(field.sum_sq(u))
        g = field.sum_sq_grad(u)
        return v, (g - np.dot(g, u) * u) / r

    best_val, best_z = float(vals[order[0]]), pts[order[0]]
    for idx in order[:starts]:
        res = minimize(obj, pts[idx], jac=True, method="L-BFGS-B",
                       options={"maxiter": 500, "gtol": 1e-13, "ftol": 1e-15})
        z = res.x / np.linalg.norm(res.x)
        v = float(field.sum_sq(z))
        if v < best_val:
            best_val, best_z = v, z
    return CoercivityResult(best_val, best_z, float(vals[order[0]]), float(np.max(vals)))
