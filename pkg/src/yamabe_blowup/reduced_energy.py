"""The reduced energy F(t, z) and its expansion coefficients.

    F(t, z) = F1 + F2 + F3 + Λ(n) u0 t^((n-2)/2)

    F1 = (1/4) ∫ sum h_ip h_pj ∂_iB ∂_jB dx
    F2 = -(n-2)/(32(n-1)) ∫ sum (∂_i h_jl)^2 B^2 dx
    F3 = -(1/2) ∫ |∇R_{t,z}|^2 dx

where B = B_{t,z} and R_{t,z} is the corrector.  F1 and F2 are computed by
quadrature.  F3 is only available through its fourth-order Taylor model
built from the corrector pairing: R_{t,z} = (1/2) sum L_ab z_a z_b + O(|z|^3),
hence F3 = -(1/8) sum_abcd <∇L_ab, ∇L_cd> z_a z_b z_c z_d + O(|z|^5).

Closed forms:

    F(t, 0)      = -c4 t^4 + Λ(n) u0 t^((n-2)/2)
    c4           = n(n-2)^2 / (72(n-4)(n-6)) K_n^(-n) trace(T)
    ∂²_z F(t, 0) = F11 + F22 = 0
    F1 + F2      = F(t, 0) - Λ u0 t^((n-2)/2) + K_n^(-n)/(4n) sum h_pq(z)^2
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact_constants import constants_bundle
from .oracle_quadrature import Integrand, OracleResult, _jackknife, integrate_rn
from .weyl_algebra import DeformationField, WeylForm, contraction


@dataclass(frozen=True)
class ModelData:
    n: int
    weyl: WeylForm
    u0x0: float = 1.0

    def __post_init__(self):
        if self.weyl.n != self.n:
            raise ValueError("Weyl form dimension does not match n")
        if not self.u0x0 > 0:
            raise ValueError("u0x0 must be positive")
        if self.n < 7:
            raise ValueError("the energy expansion needs n >= 7")


def quartic_rationals(n: int):
    """Rational factors (of K_n^(-n)) of the quartic z-coefficients.

    Returns ``(f1, f3_stated, total_stated, f3_pairing, total_pairing)``.
    ``f3_stated`` is -(n+4)/(48(n+1)); ``f3_pairing`` is -(n+4)/(16(n+1)),
    the value obtained by contracting the corrector pairing with z^4 and
    keeping the factor 1/8 of F3 = -(1/2)|∇((1/2) L_ab z_a z_b)|^2.
    """
    f1 = Fraction(1, 4 * n)
    f3 = Fraction(-(n + 4), 48 * (n + 1))
    f3p = Fraction(-(n + 4), 16 * (n + 1))
    return f1, f3, f1 + f3, f3p, f1 + f3p


def stated_fourth_order(n: int) -> Fraction:
    """-(n^2 - 8n - 12) / (48 n (n+1))."""
    return Fraction(-(n * n - 8 * n - 12), 48 * n * (n + 1))


@dataclass(frozen=True)
class EnergyCoefficients:
    n: int
    c4: float
    clambda: float
    fourth_order: float
    f1_quartic: float
    f3_quartic: float
    hess2: float
    f3_quartic_pairing: float
    fourth_order_pairing: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def energy_coefficients(model: ModelData) -> EnergyCoefficients:
    n = model.n
    cb = constants_bundle(n)
    K = cb.kn_pow
    trT = contraction(model.weyl).trace
    f1, f3, tot, f3p, totp = quartic_rationals(n)
    return EnergyCoefficients(
        n=n,
        c4=n * (n - 2) ** 2 / (72.0 * (n - 4) * (n - 6)) * K * trT,
        clambda=cb.lambda_n * model.u0x0,
        fourth_order=float(tot) * K,
        f1_quartic=float(f1) * K,
        f3_quartic=float(f3) * K,
        hess2=(n - 2) / (36.0 * (n - 4)) * K,
        f3_quartic_pairing=float(f3p) * K,
        fourth_order_pairing=float(totp) * K,
    )


def _check_t(t):
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")


def profile_t(model: ModelData, t) -> np.ndarray:
    """F(t, 0) = -c4 t^4 + Λ(n) u0 t^((n-2)/2)."""
    _check_t(t)
    co = energy_coefficients(model)
    t = np.asarray(t, dtype=float)
    return -co.c4 * t ** 4 + co.clambda * t ** ((model.n - 2) / 2)


def profile_dt(model: ModelData, t) -> np.ndarray:
    _check_t(t)
    co = energy_coefficients(model)
    n = model.n
    t = np.asarray(t, dtype=float)
    return -4 * co.c4 * t ** 3 + (n - 2) / 2 * co.clambda * t ** ((n - 4) / 2)


def profile_dtt(model: ModelData, t) -> np.ndarray:
    _check_t(t)
    co = energy_coefficients(model)
    n = model.n
    t = np.asarray(t, dtype=float)
    return -12 * co.c4 * t ** 2 + (n - 2) * (n - 4) / 4 * co.clambda * t ** ((n - 6) / 2)


@dataclass(frozen=True)
class HessianAudit:
    hessian: np.ndarray
    f11: np.ndarray
    f22: np.ndarray

    @property
    def cancellation(self) -> float:
        return float(np.max(np.abs(self.f11 + self.f22)))


def hessian_z(model: ModelData, t: float) -> HessianAudit:
    """Zero z-Hessian at (t, 0) together with the two pieces that cancel."""
    _check_t(t)
    co = energy_coefficients(model)
    T = contraction(model.weyl).T
    f11 = t ** 2 * co.hess2 * T
    return HessianAudit(np.zeros_like(T), f11, -f11)


def quartic_z(model: ModelData, e) -> float:
    """Stated s^4 coefficient of F(t, s e) - F(t, 0): fourth_order * sum h_pq(e)^2."""
    e = _unit(e, model.n)
    co = energy_coefficients(model)
    return co.fourth_order * float(DeformationField(model.weyl).sum_sq(e))


def _unit(e, n):
    e = np.asarray(e, dtype=float)
    if e.shape != (n,) or abs(np.linalg.norm(e) - 1) > 1e-12:
        raise ValueError("direction must be a unit vector in R^n")
    return e


def pairing_quartic_form(model: ModelData, z) -> float:
    """sum_abcd <∇L_ab, ∇L_cd> z_a z_b z_c z_d from the closed-form pairing.

    With M_pq = sum_ab W_apbq z_a z_b the contraction collapses to
    (n+4)/(36(n+1)) K_n^(-n) sum_pq M_pq (M_pq + M_qp).
    """
    n = model.n
    z = np.asarray(z, dtype=float)
    K = constants_bundle(n).kn_pow
    M = np.einsum("apbq,a,b->pq", model.weyl.components, z, z)
    return (n + 4) / (36.0 * (n + 1)) * K * float(np.sum(M * (M + M.T)))


def f3_model(model: ModelData, z) -> float:
    """Fourth-order model of F3: -(1/8) of the pairing quartic form."""
    return -0.125 * pairing_quartic_form(model, z)


def f12_oracle(model: ModelData, points, budget: int = 100_000, seed: int = 0) -> OracleResult:
    """Quadrature of F1 and F2 at several (t, z) points with shared directions.

    ``points`` has shape (m, 1 + n) with rows (t, z).  The result has value
    shape (m, 2) holding (F1, F2) per row; batch data allow correlated
    linear combinations via :meth:`OracleResult.combine`-style algebra.
    """
    n = model.n
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ts, zs = pts[:, 0], pts[:, 1:]
    _check_t(ts)
    field = DeformationField(model.weyl)
    c = float(n * (n - 2))
    hz = field.h(zs)
    Gz = field.gradient(zs).reshape(len(zs), -1)
    k2 = -(n - 2) / (32.0 * (n - 1))
    wp = field._wp

    def polar(theta, r):
        D = theta.shape[0]
        P = (theta @ wp).reshape(D, n, n, n)
        htheta = np.einsum("Dijq,Dq->Dij", P, theta)
        a = np.einsum("Dij,Dj->Di", htheta, theta)
        Gt = field.gradient(theta).reshape(D, -1)
        gg = np.sum(Gt ** 2, axis=1)
        out = np.empty((D, len(r), len(ts), 2))
        for m, (t, z) in enumerate(zip(ts, zs)):
            Hb = np.einsum("Dijq,q->Dij", P, z)
            b = np.einsum("Dij,Dj->Di", Hb + np.transpose(Hb, (0, 2, 1)), theta)
            cv = theta @ hz[m].T
            u = t ** 2 + r ** 2 / c
            w1 = t ** (n - 2) / (4.0 * n * n) * u ** (-n)
            # |r^3 a + r^2 b + r cv|^2
            terms = (np.outer(np.sum(a * a, 1), r ** 6) + np.outer(np.sum(b * b, 1), r ** 4)
                     + np.outer(np.sum(cv * cv, 1), r ** 2) + 2 * np.outer(np.sum(a * b, 1), r ** 5)
                     + 2 * np.outer(np.sum(a * cv, 1), r ** 4) + 2 * np.outer(np.sum(b * cv, 1), r ** 3))
            out[:, :, m, 0] = terms * w1
            w2 = k2 * t ** (n - 2) * u ** (-(n - 2))
            grad_sq = (np.outer(gg, r ** 2) + 2 * np.outer(Gt @ Gz[m], r) + (Gz[m] @ Gz[m]))
            out[:, :, m, 1] = grad_sq * w2
        return out

    scale = float(np.min(ts)) * np.sqrt(c)
    return integrate_rn(Integrand(polar, n, 2 * n - 6, scale), budget, seed)


@dataclass
class AssembledValue:
    value: float
    error: float
    f1: float
    f2: float
    f3: float
    mass_term: float
    remainder_bound: float

    @property
    def remainder_flag(self) -> bool:
        return self.remainder_bound > max(self.error, 1e-300) and self.remainder_bound > 0.01 * abs(self.f3 or 1e-300)


def _assemble(model: ModelData, pts: np.ndarray, res: OracleResult):
    co = energy_coefficients(model)
    field = DeformationField(model.weyl)
    n = model.n
    out = []
    vals = np.asarray(res.value)
    ses = np.asarray(res.standard_error)
    for m, row in enumerate(pts):
        t, z = row[0], row[1:]
        f3 = f3_model(model, z)
        mass = co.clambda * t ** ((n - 2) / 2)
        f1, f2 = vals[m]
        err = float(np.hypot(ses[m, 0], ses[m, 1]))
        rz = float(np.linalg.norm(z))
        bound = abs(co.f3_quartic_pairing) * float(field.sum_sq(z / rz)) * rz ** 5 if rz > 0 else 0.0
        out.append(AssembledValue(float(f1 + f2 + f3 + mass), err, float(f1), float(f2), f3, mass, bound))
    return out


def f_assembled_many(model: ModelData, points, budget: int = 100_000, seed: int = 0):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(np.linalg.norm(pts[:, 1:], axis=1) >= 1):
        raise ValueError("z must lie in the unit ball")
    res = f12_oracle(model, pts, budget, seed)
    return _assemble(model, pts, res), res


def f_assembled(model: ModelData, t: float, z, budget: int = 100_000, seed: int = 0) -> AssembledValue:
    """F(t, z) with F1, F2 by quadrature and F3 through its quartic model."""
    z = np.asarray(z, dtype=float)
    vals, _ = f_assembled_many(model, np.concatenate([[t], z])[None], budget, seed)
    return vals[0]


def _combination(model: ModelData, pts: np.ndarray, weights, res: OracleResult):
    """Value and standard error of sum_m w_m (F1 + F2)(pts_m) plus the exact F3 and mass parts."""
    w = np.asarray(weights, dtype=float)
    bv = np.einsum("bmk,m->b", res.batch_values, w)
    val, se = _jackknife(bv, res.batch_counts)
    quad = np.broadcast_to(np.asarray(res.quadrature_error), np.shape(res.value))
    qe = float(np.sum(np.abs(w)[:, None] * quad))
    co = energy_coefficients(model)
    exact = sum(wi * (f3_model(model, row[1:]) + co.clambda * row[0] ** ((model.n - 2) / 2))
                for wi, row in zip(w, pts))
    return float(val + exact), float(np.hypot(se, qe))


def z_increment(model: ModelData, t: float, z, budget: int = 100_000, seed: int = 0):
    """F(t, z) - F(t, 0) with the shared-direction error of the difference.

    Returns ``(value, standard_error)``.  The difference depends on z / t
    only through the quadrature pieces, so small t resolves the quartic
    term at moderate |z|.
    """
    z = np.asarray(z, dtype=float)
    pts = np.array([np.concatenate([[t], np.zeros(model.n)]), np.concatenate([[t], z])])
    res = f12_oracle(model, pts, budget, seed)
    return _combination(model, pts, [-1.0, 1.0], res)


@dataclass
class FDHessian:
    step: float
    hessian: np.ndarray
    standard_error: np.ndarray
    truncation: np.ndarray

    @property
    def noise_floor(self) -> np.ndarray:
        return 3.0 * self.standard_error + self.truncation

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.hessian) <= self.noise_floor))


def fd_hessian_diagonal(model: ModelData, t: float, step: float = 1e-2, budget: int = 100_000,
                        seed: int = 0, axes=None) -> FDHessian:
    """Second central differences of the assembled F along coordinate axes at z = 0."""
    n = model.n
    axes = range(n) if axes is None else list(axes)
    rows = [np.concatenate([[t], np.zeros(n)])]
    for k in axes:
        e = np.zeros(n)
        e[k] = step
        rows.append(np.concatenate([[t], e]))
        rows.append(np.concatenate([[t], -e]))
    pts = np.array(rows)
    res = f12_oracle(model, pts, budget, seed)
    co = energy_coefficients(model)
    field = DeformationField(model.weyl)
    H, S, T = [], [], []
    for i, k in enumerate(axes):
        w = np.zeros(len(pts))
        w[0] = -2.0 / step ** 2
        w[1 + 2 * i] = w[2 + 2 * i] = 1.0 / step ** 2
        v, se = _combination(model, pts, w, res)
        H.append(v)
        S.append(se)
        # the s^4 term contributes 2 step^2 times the quartic coefficient
        e = np.eye(n)[k]
        T.append(2 * step ** 2 * abs(co.fourth_order_pairing) * float(field.sum_sq(e)) * 2)
    return FDHessian(step, np.array(H), np.array(S), np.array(T))


@dataclass
class QuarticFit:
    direction: np.ndarray
    s_values: np.ndarray
    coefficients: np.ndarray
    quartic: float
    quartic_error: float
    sum_sq: float


def quartic_fit(model: ModelData, t: float, e, s_values=(0.05, 0.1, 0.15, 0.2),
                budget: int = 100_000, seed: int = 0) -> QuarticFit:
    """Least-squares fit of F(t, s e) = a0 + a2 s^2 + a4 s^4 over ±s values."""
    n = model.n
    e = _unit(e, n)
    s = np.asarray(s_values, dtype=float)
    svals = np.concatenate([[0.0], s, -s])
    pts = np.array([np.concatenate([[t], si * e]) for si in svals])
    res = f12_oracle(model, pts, budget, seed)
    V = np.vstack([np.ones_like(svals), svals ** 2, svals ** 4]).T
    pinv = np.linalg.pinv(V)
    coeffs = []
    err4 = 0.0
    for row, wts in enumerate(pinv):
        v, se = _combination(model, pts, wts, res)
        coeffs.append(v)
        if row == 2:
            err4 = se
    return QuarticFit(e, svals, np.array(coeffs), coeffs[2], err4,
                      float(DeformationField(model.weyl).sum_sq(e)))


@dataclass
class MixedAudit:
    first: np.ndarray
    first_error: np.ndarray
    third: float
    third_error: float

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.first) <= 10 * self.first_error + 1e-300)
                    and abs(self.third) <= 10 * self.third_error + 1e-300)


def mixed_derivative_audit(model: ModelData, t: float, dt: float = 1e-2, dz: float = 5e-2,
                           budget: int = 100_000, seed: int = 0, axes=(0, 1, 2)) -> MixedAudit:
    """Central-difference estimates of ∂_t∂_{z_i}F and ∂_t∂³_{z_i}F at z = 0."""
    n = model.n
    if model.weyl.is_zero():
        z = np.zeros(len(axes))
        return MixedAudit(z, z, 0.0, 0.0)
    rows = []
    for k in axes:
        for sgn_t in (1, -1):
            for mult in (1, -1, 2, -2):
                zz = np.zeros(n)
                zz[k] = mult * dz
                rows.append(np.concatenate([[t + sgn_t * dt], zz]))
    pts = np.array(rows)
    res = f12_oracle(model, pts, budget, seed)
    first, first_err = [], []
    thirds, third_errs = [], []
    for i, _ in enumerate(axes):
        base = 8 * i
        w = np.zeros(len(pts))
        # ∂_t∂_z: [F(t+,+h) - F(t+,-h) - F(t-,+h) + F(t-,-h)] / (4 dt h)
        w[base + 0], w[base + 1], w[base + 4], w[base + 5] = 1, -1, -1, 1
        v, se = _combination(model, pts, w / (4 * dt * dz), res)
        first.append(v)
        first_err.append(se)
        # ∂_t∂³_z from the 4-point third difference in z, differenced in t
        w3 = np.zeros(len(pts))
        stencil = {0: -1.0, 1: 1.0, 2: 0.5, 3: -0.5}  # (+h, -h, +2h, -2h) -> third derivative
        for j, cf in stencil.items():
            w3[base + j] += cf
            w3[base + 4 + j] -= cf
        v3, se3 = _combination(model, pts, w3 / (2 * dt * dz ** 3), res)
        thirds.append(v3)
        third_errs.append(se3)
    k = int(np.argmax(np.abs(thirds) / np.maximum(third_errs, 1e-300)))
    return MixedAudit(np.array(first), np.array(first_err), float(thirds[k]), float(third_errs[k]))
