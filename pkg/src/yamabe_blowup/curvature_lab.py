"""Curvature of the deformed metric exp(eps * chi * h) by finite differences.

Conventions: Christoffel symbols G[l, i, j] = Γ^l_ij, and

    R^r_{smn} = ∂_m Γ^r_ns - ∂_n Γ^r_ms + Γ^r_ml Γ^l_ns - Γ^r_nl Γ^l_ms,
    R_{asmn}  = g_ar R^r_{smn},

so that the round sphere has R_ijij > 0 and Ric_jl = sum_i R_ijil.  With this
sign the metric exp(eps h) has Weyl tensor -eps W at the center.

Derivatives use nested fourth-order central stencils, so the metric is
evaluated at (4n + 1) * 4n points per curvature evaluation.  Every routine
accepts ``dtype``; extended precision (``np.longdouble``) pushes the
rounding floor of the second derivatives low enough to resolve the O(eps^3)
remainders at eps ~ 1e-3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .weyl_algebra import DeformationField, WeylForm, weyl_part

STENCIL = np.array([-2.0, -1.0, 1.0, 2.0])


def smooth_step(s) -> np.ndarray:
    """C-infinity cutoff equal to 1 on [0, 1] and 0 on [2, inf)."""
    s = np.asarray(s, dtype=float)

    def psi(u):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = psi(2.0 - s), psi(s - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class MetricField:
    n: int
    eps: float
    weyl: WeylForm
    radius: float = 1.0
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.weyl.n != self.n:
            raise ValueError("Weyl form dimension does not match n")
        if self.eps < 0 or self.radius <= 0:
            raise ValueError("eps must be nonnegative and radius positive")
        c = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.n,):
            raise ValueError("center must be a point of R^n")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "_field", DeformationField(self.weyl))

    def exponent(self, X: np.ndarray, dtype=np.float64) -> np.ndarray:
        """eps * chi(|x - y| / r) * h(x - y) for a batch of points."""
        Y = np.atleast_2d(np.asarray(X, dtype=dtype)) - self.center.astype(dtype)
        chi = smooth_step(np.linalg.norm(Y.astype(float), axis=1) / self.radius).astype(dtype)
        Q = self.weyl.components.astype(dtype) / 3
        H = np.einsum("ipjq,Np,Nq->Nij", Q, Y, Y)
        return dtype(self.eps) * chi[:, None, None] * H


def expm_symmetric(S: np.ndarray) -> np.ndarray:
    """Batched matrix exponential by scaling and squaring of the Taylor series.

    Works in the dtype of ``S``, including ``np.longdouble``.
    """
    S = np.asarray(S)
    tiny = np.finfo(S.dtype).eps
    norm = float(np.max(np.sum(np.abs(S), axis=-1))) if S.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    A = S / S.dtype.type(2.0 ** squarings)
    eye = np.broadcast_to(np.eye(S.shape[-1], dtype=S.dtype), S.shape)
    out = eye + A
    term = A
    for k in range(2, 40):
        term = term @ A / S.dtype.type(k)
        out = out + term
        if float(np.max(np.abs(term))) <= tiny * 1e-2:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def metric_batch(m: MetricField, X: np.ndarray, dtype=np.float64):
    """Metric exp(S) and its inverse exp(-S) at each row of X."""
    S = m.exponent(X, dtype)
    return expm_symmetric(S), expm_symmetric(-S)


def metric_eval(m: MetricField, x, dtype=np.float64):
    """(g, g^-1) at a single point."""
    g, gi = metric_batch(m, np.asarray(x, dtype=dtype)[None], dtype)
    return g[0], gi[0]


def _offsets(n: int, step: float, dtype=np.float64) -> np.ndarray:
    """Stencil displacements, shape (n, 4, n)."""
    return dtype(step) * np.einsum("a,mk->mak", STENCIL.astype(dtype), np.eye(n, dtype=dtype))


def _christoffel_batch(m: MetricField, P: np.ndarray, step: float, dtype=np.float64):
    """Metric, inverse and Christoffel symbols at the points P (M, n)."""
    n = m.n
    P = np.asarray(P, dtype=dtype)
    off = _offsets(n, step, dtype)
    pts = P[:, None, None, :] + off[None]
    g_st, _ = metric_batch(m, pts.reshape(-1, n), dtype)
    g_st = g_st.reshape(len(P), n, 4, n, n)
    weights = np.array([1, -8, 8, -1], dtype=dtype) / dtype(12)
    dg = np.einsum("Mmaij,a->Mmij", g_st, weights) / dtype(step)
    g, ginv = metric_batch(m, P, dtype)
    # Γ^l_ij = (1/2) g^lk (∂_i g_jk + ∂_j g_ik - ∂_k g_ij)
    lower = dg + np.transpose(dg, (0, 2, 1, 3)) - np.transpose(dg, (0, 2, 3, 1))
    G = np.einsum("Mlk,Mijk->Mlij", ginv, lower) / dtype(2)
    return g, ginv, dg, G


@dataclass
class CurvaturePack:
    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    weyl_part: np.ndarray
    step: float

    def symmetry_residual(self) -> float:
        R = self.riemann
        res = [R + np.transpose(R, (1, 0, 2, 3)), R + np.transpose(R, (0, 1, 3, 2)),
               R - np.transpose(R, (2, 3, 0, 1)),
               R + np.transpose(R, (2, 0, 1, 3)) + np.transpose(R, (1, 2, 0, 3)),
               self.ricci - self.ricci.T]
        return float(max(np.max(np.abs(r)) for r in res))

    def weyl_trace_residual(self) -> float:
        return float(np.max(np.abs(np.einsum("ik,ijkl->jl", self.inverse, self.weyl_part))))


def curvature(m: MetricField, x, step: float = 1e-2, dtype=np.float64) -> CurvaturePack:
    """Curvature tensors at x from fourth-order nested stencils.

    All arrays are returned in float64; ``scalar`` keeps the working dtype.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = m.n
    x = np.asarray(x, dtype=dtype)
    off = _offsets(n, step, dtype).reshape(-1, n)
    P = np.vstack([x[None], x[None] + off])
    g, ginv, _, G = _christoffel_batch(m, P, step, dtype)
    G0 = G[0]
    Gst = G[1:].reshape(n, 4, n, n, n)
    weights = np.array([1, -8, 8, -1], dtype=dtype) / dtype(12)
    dG = np.einsum("maijk,a->mijk", Gst, weights) / dtype(step)  # dG[m, r, a, b] = ∂_m Γ^r_ab
    Rup = (np.einsum("mrns->rsmn", dG) - np.einsum("nrms->rsmn", dG)
           + np.einsum("rml,lns->rsmn", G0, G0) - np.einsum("rnl,lms->rsmn", G0, G0))
    R = np.einsum("ar,rsmn->asmn", g[0], Rup)
    ric = np.einsum("rsrn->sn", Rup)
    scal = np.einsum("sn,sn->", ginv[0], ric)
    f = lambda a: np.asarray(a, dtype=float)  # noqa: E731
    return CurvaturePack(f(g[0]), f(ginv[0]), f(G0), f(R), f(ric), scal,
                         weyl_part(f(R), f(g[0])), step)


def discretization_error(m: MetricField, x, step: float = 1e-2) -> float:
    """Richardson-style estimate: max change of the Riemann tensor between step and 2*step."""
    a = curvature(m, x, step).riemann
    b = curvature(m, x, 2 * step).riemann
    return float(np.max(np.abs(a - b))) / 15.0


def inverse_remainder(m: MetricField, x, dtype=np.float64) -> float:
    """max |g^ij - (δ - eps h + eps^2 h^2 / 2)_ij|."""
    _, gi = metric_eval(m, x, dtype)
    H = m.exponent(np.asarray(x, dtype=dtype)[None], dtype)[0]
    return float(np.max(np.abs(gi - (np.eye(m.n, dtype=dtype) - H + H @ H / dtype(2)))))


def christoffel_remainder(m: MetricField, x, step: float = 1e-2, dtype=np.float64) -> float:
    """max |Γ^l_ij - (eps/2)(∂_i h_jl + ∂_j h_il - ∂_l h_ij)| inside the region chi = 1."""
    x = np.asarray(x, dtype=float)
    _, _, _, G = _christoffel_batch(m, x[None], step, dtype)
    D = m._field.gradient(x - m.center)  # D[i, j, l] = ∂_i h_jl
    lin = 0.5 * m.eps * (np.transpose(D, (2, 0, 1)) + np.transpose(D, (2, 1, 0))
                         - np.transpose(D, (0, 1, 2)))
    # lin[l, i, j] = (eps/2)(∂_i h_jl + ∂_j h_il - ∂_l h_ij)
    return float(np.max(np.abs(G[0] - lin)))


def scalar_remainder(m: MetricField, x, step: float = 1e-2, dtype=np.float64,
                     relative: bool = False) -> float:
    """|Scal + (eps^2/4) sum (∂_i h_jl)^2| inside the region chi = 1.

    With ``relative`` the remainder is divided by the leading term, which
    turns the O(eps^3) remainder into an O(eps) ratio.
    """
    x = np.asarray(x, dtype=float)
    D = m._field.gradient(x - m.center)
    lead = dtype(0.25) * dtype(m.eps) ** 2 * np.sum(D.astype(dtype) ** 2)
    rem = abs(float(curvature(m, x, step, dtype).scalar + lead))
    return rem / float(lead) if relative else rem


def weyl_linearization(m: MetricField, step: float = 1e-2, point=None, dtype=np.float64) -> float:
    """max |Weyl(g)(x) / eps + W| at x (the center by default).

    The linear part is exact at every point because h is quadratic, so at the
    center the deviation only reflects rounding; away from it the quadratic
    terms give a deviation proportional to eps.
    """
    if m.eps == 0:
        return 0.0
    x = m.center if point is None else np.asarray(point, dtype=float)
    W = curvature(m, x, step, dtype).weyl_part
    return float(np.max(np.abs(W / m.eps + m.weyl.components)))


@dataclass
class RatioTable:
    name: str
    eps: list
    remainders: list
    target: float
    ratios: list = field(default_factory=list)
    tolerance: float = 0.5

    def __post_init__(self):
        r = self.remainders
        self.ratios = [r[i] / r[i + 1] if r[i + 1] != 0 else float("inf") for i in range(len(r) - 1)]

    @property
    def passed(self) -> bool:
        return bool(self.ratios) and all(abs(q / self.target - 1) <= self.tolerance for q in self.ratios)

    def as_dict(self) -> dict:
        return {"name": self.name, "eps": self.eps, "remainders": self.remainders,
                "ratios": self.ratios, "target": self.target, "passed": self.passed}


def expansion_checks(weyl: WeylForm, eps_values=(1e-2, 5e-3, 2.5e-3), point=None,
                     step: float = 5e-2, dtype=np.longdouble) -> list:
    """Remainder-ratio tables of the four expansion checks under eps-halving.

    The scalar-curvature remainder is taken relative to its eps^2 leading
    term, like the Weyl deviation which is taken relative to eps.
    """
    n = weyl.n
    if point is None:
        point = np.zeros(n)
        point[0] = 0.3
    point = np.asarray(point, dtype=float)
    fields = [MetricField(n, e, weyl) for e in eps_values]
    eps = list(map(float, eps_values))
    return [
        RatioTable("inverse_metric", eps, [inverse_remainder(m, point, dtype) for m in fields], 8.0),
        RatioTable("christoffel", eps,
                   [christoffel_remainder(m, point, step, dtype) for m in fields], 4.0),
        RatioTable("scalar_curvature", eps,
                   [scalar_remainder(m, point, step, dtype, relative=True) for m in fields], 2.0),
        RatioTable("weyl_linearization", eps,
                   [weyl_linearization(m, step, point, dtype) for m in fields], 2.0),
    ]
