"""Standard bubble, its linearized kernel, and the explicit corrector.

Sign convention: the Laplacian is the positive operator Δ = -div ∇.  The
bubble B_{t,z}(x) = t^((n-2)/2) (t^2 + |x-z|^2/(n(n-2)))^(-(n-2)/2)
satisfies ΔB = B^(2*-1) with 2* = 2n/(n-2).

Kernel elements are rescalings Z_{j,t,z}(x) = t^(1-n/2) V_j((x-z)/t) of

    V_0(x) = (|x|^2/(n(n-2)) - 1) (1 + |x|^2/(n(n-2)))^(-n/2),
    V_j(x) = x_j (1 + |x|^2/(n(n-2)))^(-n/2).

For a Weyl-type form W the corrector L_ab(x) = -(1/n) h_ab(x) (1 + |x|^2/(n(n-2)))^(-n/2)
solves the linearized equation with source proportional to h_ab.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact_constants import constants_bundle
from .oracle_quadrature import Integrand, OracleResult, integrate_rn
from .weyl_algebra import DeformationField, WeylForm


@dataclass(frozen=True)
class BubbleParams:
    n: int
    t: float
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.shape != (self.n,):
            raise ValueError(f"center must have shape ({self.n},)")
        if not self.t > 0:
            raise ValueError("scale t must be positive")
        if not np.linalg.norm(z) < 1:
            raise ValueError("center must lie in the unit ball")
        object.__setattr__(self, "z", z)

    @staticmethod
    def standard(n: int) -> "BubbleParams":
        return BubbleParams(n, 1.0, np.zeros(n))

    def check_box(self, A: float) -> None:
        if not 1.0 / A <= self.t <= A:
            raise ValueError(f"t = {self.t} outside [1/A, A] with A = {A}")

    @property
    def c(self) -> float:
        return float(self.n * (self.n - 2))


def _points(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"points must have {n} coordinates")
    return X, single


def _ret(a, single):
    return a[0] if single else a


def bubble_eval(p: BubbleParams, x) -> np.ndarray:
    X, single = _points(x, p.n)
    y = X - p.z
    u = p.t ** 2 + np.sum(y ** 2, axis=1) / p.c
    return _ret(p.t ** ((p.n - 2) / 2) * u ** (-(p.n - 2) / 2), single)


def bubble_gradient(p: BubbleParams, x) -> np.ndarray:
    X, single = _points(x, p.n)
    y = X - p.z
    u = p.t ** 2 + np.sum(y ** 2, axis=1) / p.c
    g = -(1.0 / p.n) * p.t ** ((p.n - 2) / 2) * u ** (-p.n / 2)
    return _ret(g[:, None] * y, single)


def bubble_hessian(p: BubbleParams, x) -> np.ndarray:
    X, single = _points(x, p.n)
    n = p.n
    y = X - p.z
    u = p.t ** 2 + np.sum(y ** 2, axis=1) / p.c
    tn = p.t ** ((n - 2) / 2)
    H = (-(1.0 / n) * tn * u ** (-n / 2))[:, None, None] * np.eye(n) \
        + (tn / p.c * u ** (-(n + 2) / 2))[:, None, None] * y[:, :, None] * y[:, None, :]
    return _ret(H, single)


def critical_exponent(n: int) -> float:
    return 2.0 * n / (n - 2)


def bubble_pde_residual(p: BubbleParams, x) -> np.ndarray:
    """-trace(Hess B) - B^(2*-1), zero for the exact bubble."""
    H = bubble_hessian(p, x)
    B = bubble_eval(p, x)
    return -np.trace(H, axis1=-2, axis2=-1) - B ** (critical_exponent(p.n) - 1)


def _v_values(j: int, n: int, Y: np.ndarray) -> np.ndarray:
    c = n * (n - 2)
    s = np.sum(Y ** 2, axis=1)
    u = 1.0 + s / c
    if j == 0:
        return (s / c - 1.0) * u ** (-n / 2)
    return Y[:, j - 1] * u ** (-n / 2)


def kernel_eval(j: int, p: BubbleParams, x) -> np.ndarray:
    """Z_{j,t,z}(x) = t^(1-n/2) V_j((x-z)/t), for j = 0..n."""
    if not 0 <= j <= p.n:
        raise ValueError(f"kernel index must lie in 0..{p.n}")
    X, single = _points(x, p.n)
    Y = (X - p.z) / p.t
    return _ret(p.t ** (1 - p.n / 2) * _v_values(j, p.n, Y), single)


def kernel_from_bubble(j: int, p: BubbleParams, x, step: float = 1e-4) -> np.ndarray:
    """Kernel element rebuilt from central differences of the bubble.

    j = 0 gives (2/(n-2)) t ∂_t B.  j >= 1 gives + n t ∂_{z_j} B, which is
    the sign that matches V_j as defined above.
    """
    n = p.n
    if j == 0:
        bp = BubbleParams(n, p.t + step, p.z)
        bm = BubbleParams(n, p.t - step, p.z)
        return 2.0 / (n - 2) * p.t * (bubble_eval(bp, x) - bubble_eval(bm, x)) / (2 * step)
    e = np.zeros(n)
    e[j - 1] = step
    bp = BubbleParams(n, p.t, p.z + e)
    bm = BubbleParams(n, p.t, p.z - e)
    return n * p.t * (bubble_eval(bp, x) - bubble_eval(bm, x)) / (2 * step)


def kernel_pde_residual(j: int, n: int, x) -> np.ndarray:
    """ΔV_j - (2*-1) B_{1,0}^(2*-2) V_j from the closed-form Laplacian."""
    X, single = _points(x, n)
    c = n * (n - 2)
    s = np.sum(X ** 2, axis=1)
    u = 1.0 + s / c
    a = -n / 2
    # g = u^a and its s-derivatives
    g1 = a / c * u ** (a - 1)
    g2 = a * (a - 1) / c ** 2 * u ** (a - 2)
    if j == 0:
        # V_0 = u^(a+1) - 2 u^a as a function of s
        q1 = (a + 1) / c * u ** a - 2 * g1
        q2 = (a + 1) * a / c ** 2 * u ** (a - 1) - 2 * g2
        lap = 2 * n * q1 + 4 * s * q2
    else:
        lap = X[:, j - 1] * (2 * n * g1 + 4 * s * g2 + 4 * g1)
    V = _v_values(j, n, X)
    res = -lap - (critical_exponent(n) - 1) * u ** (-2) * V
    return _ret(res, single)


def kernel_gradient(j: int, n: int, x) -> np.ndarray:
    """Gradient of V_j (standard bubble)."""
    X, single = _points(x, n)
    c = n * (n - 2)
    s = np.sum(X ** 2, axis=1)
    u = 1.0 + s / c
    if j == 0:
        q1 = (1 - n / 2) / c * u ** (-n / 2) + n / c * u ** (-n / 2 - 1)
        return _ret(2 * q1[:, None] * X, single)
    g = u ** (-n / 2)
    g1 = -(n / (2 * c)) * u ** (-n / 2 - 1)
    out = 2 * (g1 * X[:, j - 1])[:, None] * X
    out[:, j - 1] += g
    return _ret(out, single)


def _profile(n: int, s):
    """f(s) = -(1/n) u^(-n/2) with s = |x|^2, plus f' and f''."""
    c = n * (n - 2)
    u = 1.0 + s / c
    f = -(1.0 / n) * u ** (-n / 2)
    f1 = 1.0 / (2 * c) * u ** (-(n + 2) / 2)
    f2 = -(n + 2) / (4 * c ** 2) * u ** (-(n + 4) / 2)
    return f, f1, f2, u


def corrector_eval(W: WeylForm, a: int, b: int, x) -> np.ndarray:
    X, single = _points(x, W.n)
    H = DeformationField(W).h(X)
    f, _, _, _ = _profile(W.n, np.sum(X ** 2, axis=1))
    return _ret(f * H[:, a, b], single)


def corrector_gradient(W: WeylForm, a: int, b: int, x) -> np.ndarray:
    X, single = _points(x, W.n)
    field = DeformationField(W)
    H = field.h(X)
    D = field.gradient(X)
    f, f1, _, _ = _profile(W.n, np.sum(X ** 2, axis=1))
    out = f[:, None] * D[:, :, a, b] + (2 * f1 * H[:, a, b])[:, None] * X
    return _ret(out, single)


def corrector_laplacian(W: WeylForm, a: int, b: int, x) -> np.ndarray:
    """div ∇ L_ab in closed form.

    h_ab is harmonic and homogeneous of degree 2, so x·∇h_ab = 2 h_ab and
    div∇(h_ab f(|x|^2)) = h_ab ((2n + 8) f' + 4 |x|^2 f'').
    """
    X, single = _points(x, W.n)
    s = np.sum(X ** 2, axis=1)
    H = DeformationField(W).h(X)
    _, f1, f2, _ = _profile(W.n, s)
    return _ret(H[:, a, b] * ((2 * W.n + 8) * f1 + 4 * s * f2), single)


def corrector_residual(W: WeylForm, a: int, b: int, x) -> np.ndarray:
    """ΔL - (2*-1) B^(2*-2) L + (2/(n(n-2))) h_ab u^(-(n+2)/2), with Δ = -div∇."""
    X, single = _points(x, W.n)
    n = W.n
    s = np.sum(X ** 2, axis=1)
    H = DeformationField(W).h(X)[:, a, b]
    f, _, _, u = _profile(n, s)
    L = f * H
    lap = -corrector_laplacian(W, a, b, X)
    res = lap - (critical_exponent(n) - 1) * u ** (-2) * L + 2.0 / (n * (n - 2)) * H * u ** (-(n + 2) / 2)
    return _ret(res, single)


def fd_laplacian(func, x, step: float = 1e-3) -> np.ndarray:
    """Second-order central-difference div∇ of a scalar field at one point."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    E = np.eye(n) * step
    pts = np.vstack([x + E, x - E, x[None]])
    v = np.asarray(func(pts))
    return float((v[:n].sum() + v[n:2 * n].sum() - 2 * n * v[-1]) / step ** 2)


def _s_tensor(W: WeylForm, a: int, b: int, c: int, d: int) -> float:
    w = W.components
    return float(np.sum(w[a, :, b, :] * (w[c, :, d, :] + w[c, :, d, :].T)))


def corrector_pairing(W: WeylForm, a: int, b: int, c: int, d: int) -> float:
    """(n+4)/(36(n+1)) K_n^(-n) sum_pq W_apbq (W_cpdq + W_cqdp)."""
    n = W.n
    if n < 7:
        raise ValueError("pairing formula needs n >= 7")
    K = constants_bundle(n).kn_pow
    return (n + 4) / (36.0 * (n + 1)) * K * _s_tensor(W, a, b, c, d)


def pairing_pieces_closed(W: WeylForm, a: int, b: int, c: int, d: int) -> np.ndarray:
    """Closed forms of the three pieces (gradient, radial, cross) of the pairing."""
    n = W.n
    K = constants_bundle(n).kn_pow
    S = _s_tensor(W, a, b, c, d)
    return np.array([2.0 / (9 * n) * K * S, (n + 4) / (36.0 * (n + 1)) * K * S, -2.0 / (9 * n) * K * S])


@dataclass
class PairingCheck:
    closed: float
    oracle: OracleResult
    pieces: OracleResult
    pieces_closed: np.ndarray

    @property
    def sigma(self) -> float:
        return abs(self.oracle.value - self.closed) / self.oracle.standard_error

    @property
    def relative(self) -> float:
        return abs(self.oracle.value - self.closed) / abs(self.closed) if self.closed else abs(self.oracle.value)


def corrector_pairing_oracle(W: WeylForm, a: int, b: int, c: int, d: int,
                             budget: int = 200_000, seed: int = 0) -> PairingCheck:
    """Quadrature of ∫<∇L_ab, ∇L_cd> dx split into its three natural pieces.

    With x = r θ: ∇L = f ∇h + 2 f' h x, so the integrand is
    f² <∇h_ab, ∇h_cd> + (f f'-cross terms) + 4 f'^2 h_ab h_cd |x|².
    """
    n = W.n
    cc = n * (n - 2)
    field = DeformationField(W)

    def polar(theta, r):
        H = field.h(theta)
        D = field.gradient(theta)
        gab, gcd = D[:, :, a, b], D[:, :, c, d]
        hab, hcd = H[:, a, b], H[:, c, d]
        s = r ** 2
        f, f1, _, _ = _profile(n, s)
        # ∇L = r f g(θ) + 2 f' r^3 h(θ) θ
        A1 = np.einsum("D,R->DR", np.sum(gab * gcd, axis=1), r ** 2 * f ** 2)
        cross = hcd * np.sum(gab * theta, axis=1) + hab * np.sum(gcd * theta, axis=1)
        A3 = np.einsum("D,R->DR", cross, 2 * f * f1 * r ** 4)
        A2 = np.einsum("D,R->DR", hab * hcd, 4 * f1 ** 2 * r ** 6)
        return np.stack([A1, A2, A3], axis=-1)

    pieces = integrate_rn(Integrand(polar, n, 2 * n - 2, np.sqrt(cc)), budget, seed)
    total = pieces.combine([1.0, 1.0, 1.0])
    return PairingCheck(corrector_pairing(W, a, b, c, d), total, pieces, pairing_pieces_closed(W, a, b, c, d))


def corrector_orthogonality(W: WeylForm, a: int, b: int, j: int, budget: int = 50_000,
                            seed: int = 0) -> OracleResult:
    """Quadrature of ∫<∇L_ab, ∇V_j> dx, zero for every kernel element."""
    n = W.n
    cc = n * (n - 2)
    field = DeformationField(W)

    def polar(theta, r):
        H = field.h(theta)[:, a, b]
        g = field.gradient(theta)[:, :, a, b]
        f, f1, _, _ = _profile(n, r ** 2)
        gradL = (r * f)[None, :, None] * g[:, None, :] \
            + (2 * f1 * r ** 3)[None, :, None] * (H[:, None] * theta)[:, None, :]
        X = theta[:, None, :] * r[None, :, None]
        gradV = kernel_gradient(j, n, X.reshape(-1, n)).reshape(X.shape)
        return np.sum(gradL * gradV, axis=-1)

    return integrate_rn(Integrand(polar, n, 2 * n - 2, np.sqrt(cc)), budget, seed)


def annihilation_integral(W: WeylForm, p: BubbleParams, budget: int = 50_000,
                          seed: int = 0) -> OracleResult:
    """Quadrature of ∫ sum_ij h_ij ∂_iB ∂_jB dx for the bubble B_{t,z}."""
    n = W.n
    if W.is_zero():
        return OracleResult(0.0, 0.0, 0, "sphere_radial_product")
    field = DeformationField(W)
    hz = field.h(p.z)

    def polar(theta, r):
        # y = x - z = r θ and h(y + z) = r² h(θ) + r (H(θ,z) + H(θ,z)^T) + h(z)
        q2 = np.einsum("Di,Dij,Dj->D", theta, field.h(theta), theta)
        Hb = field.bilinear(theta, p.z)
        q1 = 2 * np.einsum("Di,Dij,Dj->D", theta, Hb, theta)
        q0 = np.einsum("Di,ij,Dj->D", theta, hz, theta)
        u = p.t ** 2 + r ** 2 / p.c
        w = p.t ** (n - 2) / n ** 2 * u ** (-n) * r ** 2
        return np.outer(q2, w * r ** 2) + np.outer(q1, w * r) + np.outer(q0, w)

    return integrate_rn(Integrand(polar, n, 2 * n - 4, p.t * np.sqrt(p.c)), budget, seed)
