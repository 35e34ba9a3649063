"""Saddle-type geometry of the reduced energy around (t0, 0).

The profile t -> F(t, 0) has a unique minimum t0 when n >= 11, while along
z the quartic term makes (t0, 0) a local maximum.  A box
[t0 - eta, t0 + eta] x B(0, eps) is certified when the profile minimum on the
t-edge lies strictly above every value on the rim |z| = eps, the t-slope has
the right sign on both faces and F stays negative on the box.  Such a
certificate survives any uniformly small perturbation, which is what
:func:`locate_critical_point` exercises.

The z-dependence is modelled by ``q * sum h_pq(z)^2`` where q is the
assembled fourth-order coefficient (F1 + F2 by quadrature, F3 from the
corrector pairing), with an |z|^5 remainder flag.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, root

from .reduced_energy import ModelData, energy_coefficients, f_assembled_many, profile_dt, profile_t
from .weyl_algebra import DeformationField, coercivity_check


@dataclass(frozen=True)
class ProfileMinimum:
    t0: float
    f_at_min: float
    hess_t: float


def profile_minimum(n: int, c4: float, clambda: float) -> ProfileMinimum:
    """Minimum of -c4 t^4 + clambda t^((n-2)/2) over t > 0, for n >= 11."""
    if n <= 10:
        raise ValueError("profile has no interior minimum for n <= 10")
    if not (c4 > 0 and clambda > 0):
        raise ValueError("need c4 > 0 and clambda > 0 for a negative minimum")
    t0 = (8 * c4 / ((n - 2) * clambda)) ** (2.0 / (n - 10))
    p = (n - 2) / 2

    def d1(t):
        return -4 * c4 * t ** 3 + p * clambda * t ** (p - 1)

    def d2(t):
        return -12 * c4 * t ** 2 + p * (p - 1) * clambda * t ** (p - 2)

    # one safeguarded Newton step
    h2 = d2(t0)
    if h2 > 0:
        t1 = t0 - d1(t0) / h2
        if t1 > 0 and abs(d1(t1)) < abs(d1(t0)):
            t0 = t1
    f0 = -c4 * t0 ** 4 + clambda * t0 ** p
    return ProfileMinimum(t0, f0, d2(t0))


def minimize_profile(model: ModelData) -> ProfileMinimum:
    """Closed-form minimizer of F(t, 0), with the identities checked."""
    if model.weyl.is_zero():
        raise ValueError("W = 0: the profile is monotone and has no negative minimum")
    co = energy_coefficients(model)
    n = model.n
    pm = profile_minimum(n, co.c4, co.clambda)
    expected = -co.c4 * pm.t0 ** 4 * (n - 10) / (n - 2)
    if abs(pm.f_at_min - expected) > 1e-10 * abs(expected) or not pm.hess_t > 0:
        raise ArithmeticError("profile minimum failed its closed-form identities")
    return pm


@dataclass
class SaddleCertificate:
    n: int
    t0: float
    f_at_min: float
    hess_t: float
    eta: float
    eps_box: float
    box_bound: float
    quartic_coefficient: float
    edge_min: float
    rim_max: float
    box_max: float
    rim_min_sum_sq: float
    rim_max_sum_sq: float
    sampling_gap: float
    remainder_bound: float
    t_slope_signs: dict
    spot_checks: list = field(default_factory=list)
    verdict: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """Room left for a uniform perturbation."""
        return min((self.edge_min - self.rim_max) / 2, -self.box_max)

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())

    @property
    def failed_conditions(self) -> list:
        return [k for k, v in self.verdict.items() if not v]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        d["passed"] = self.passed
        d["failed_conditions"] = self.failed_conditions
        return d


@dataclass(frozen=True)
class RimData:
    minimum: float
    maximum: float
    gap: float


def rim_data(model: ModelData, samples: int = 4096, seed: int = 0) -> RimData:
    """Extremes of sum h_pq(e)^2 over unit e, from two independent sweeps with refinement."""
    a = coercivity_check(model.weyl, samples=samples, starts=16, seed=seed)
    b = coercivity_check(model.weyl, samples=samples, starts=16, seed=seed + 1)
    mx = max(a.maximum, b.maximum, _refine_max(DeformationField(model.weyl), model.n, samples, seed))
    return RimData(min(a.minimum, b.minimum), mx, abs(a.minimum - b.minimum))


def _refine_max(field_: DeformationField, n: int, samples: int, seed: int) -> float:
    rng = np.random.default_rng(seed + 7)
    g = rng.standard_normal((samples, n))
    pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    vals = field_.sum_sq(pts)
    best = float(np.max(vals))
    for idx in np.argsort(-vals)[:8]:
        def obj(z):
            r = np.linalg.norm(z)
            u = z / r
            gr = field_.sum_sq_grad(u)
            return -float(field_.sum_sq(u)), -(gr - np.dot(gr, u) * u) / r
        res = minimize(obj, pts[idx], jac=True, method="L-BFGS-B")
        best = max(best, -float(res.fun))
    return best


def default_box_bound(t0: float) -> float:
    """A with t0 in [2/A, A/2]."""
    return max(2 * t0, 2 / t0)


def certify_saddle(model: ModelData, eta: float, eps_box: float, rim_samples: int = 4096,
                   seed: int = 0, spot_budget: int = 0, box_bound: Optional[float] = None,
                   rim: Optional[RimData] = None) -> SaddleCertificate:
    """Check the saddle conditions on [t0 - eta, t0 + eta] x B(0, eps_box).

    The t-edge uses the closed-form profile, the rim uses the quartic z-model
    with refined extremes of sum h^2 over directions.  When ``spot_budget``
    is positive, the quadrature-backed F is evaluated at the center and on
    the rim and compared with the model.
    """
    if not (eta > 0 and eps_box > 0):
        raise ValueError("eta and eps_box must be positive")
    pm = minimize_profile(model)
    co = energy_coefficients(model)
    n = model.n
    t0 = pm.t0
    A = default_box_bound(t0) if box_bound is None else box_bound
    rim = rim_data(model, rim_samples, seed) if rim is None else rim
    q = co.fourth_order_pairing
    lo, hi = t0 - eta, t0 + eta
    in_box = lo >= 1 / A and hi <= A and eps_box < 1

    ts = np.array([lo, hi]) if lo > 0 else np.array([t0, hi])
    prof_edges = profile_t(model, ts)
    edge_min = pm.f_at_min  # the profile is convex near t0 and minimal there
    drop = q * rim.minimum * eps_box ** 4
    rim_max = float(np.max(prof_edges)) + drop
    box_max = float(np.max(prof_edges))
    remainder = abs(q) * rim.maximum * eps_box ** 5
    slope_lo = float(profile_dt(model, lo)) if lo > 0 else float("nan")
    slope_hi = float(profile_dt(model, hi))
    gap = abs(q) * eps_box ** 4 * rim.gap
    roundoff = 64 * np.finfo(float).eps * max(abs(pm.f_at_min), abs(box_max))

    cert = SaddleCertificate(
        n=n, t0=t0, f_at_min=pm.f_at_min, hess_t=pm.hess_t, eta=eta, eps_box=eps_box,
        box_bound=A, quartic_coefficient=q, edge_min=edge_min, rim_max=rim_max,
        box_max=box_max, rim_min_sum_sq=rim.minimum, rim_max_sum_sq=rim.maximum,
        sampling_gap=gap, remainder_bound=remainder,
        t_slope_signs={"lower": _sign(slope_lo), "upper": _sign(slope_hi)})
    rim_margin = edge_min - rim_max
    v = {
        "in_box": bool(in_box),
        "negative_minimum": pm.f_at_min < 0,
        "convex_in_t": pm.hess_t > 0,
        "edge_above_rim": rim_margin > max(10 * gap, roundoff),
        "slope_lower_negative": slope_lo < 0,
        "slope_upper_positive": slope_hi > 0,
        "negative_on_box": box_max < -roundoff,
        "remainder_below_margin": remainder < rim_margin / 2 if rim_margin > 0 else False,
    }
    if spot_budget:
        spots, ok = _spot_checks(model, t0, eps_box, q, rim, spot_budget, seed)
        cert.spot_checks = spots
        v["spot_checks_consistent"] = ok
    cert.verdict = {k: bool(x) for k, x in v.items()}
    return cert


def _sign(x: float) -> int:
    return 0 if not np.isfinite(x) or x == 0 else int(np.sign(x))


def _spot_checks(model, t0, eps_box, q, rim, budget, seed):
    n = model.n
    field_ = DeformationField(model.weyl)
    e = np.zeros(n)
    e[0] = 1.0
    pts = np.array([np.concatenate([[t0], np.zeros(n)]),
                    np.concatenate([[t0], eps_box * e]),
                    np.concatenate([[t0], -eps_box * e])])
    vals, _ = f_assembled_many(model, pts, budget, seed)
    out, ok = [], True
    for row, val in zip(pts, vals):
        z = row[1:]
        model_val = float(profile_t(model, row[0])) + q * float(field_.sum_sq(z))
        tol = 3 * val.error + abs(q) * rim.maximum * np.linalg.norm(z) ** 5
        good = abs(val.value - model_val) <= tol
        ok &= bool(good)
        out.append({"t": float(row[0]), "z_norm": float(np.linalg.norm(z)), "assembled": val.value,
                    "error": val.error, "model": model_val, "consistent": bool(good)})
    return out, ok


def auto_certify(model: ModelData, eta: Optional[float] = None, eps_box: float = 0.5,
                 rim_samples: int = 4096, seed: int = 0, spot_budget: int = 0,
                 max_steps: int = 200) -> SaddleCertificate:
    """Shrink the box until the certificate passes or the floor is reached.

    eps_box is halved while the remainder flag is raised; eta is halved while
    the t-edge or box conditions fail.
    """
    pm = minimize_profile(model)
    eta = pm.t0 / 4 if eta is None else eta
    rim = rim_data(model, rim_samples, seed)
    cert = None
    for _ in range(max_steps):
        cert = certify_saddle(model, eta, eps_box, rim_samples, seed, 0, rim=rim)
        if cert.passed:
            break
        depth = abs(cert.quartic_coefficient) * cert.rim_min_sum_sq * eps_box ** 4
        if cert.remainder_bound >= depth / 2:
            eps_box /= 2
        else:
            eta /= 2
        if eta < 1e-12 * pm.t0 or eps_box < 1e-8:
            break
    if spot_budget and cert is not None:
        cert = certify_saddle(model, cert.eta, cert.eps_box, rim_samples, seed, spot_budget, rim=rim)
    return cert


@dataclass
class CriticalPoint:
    t: float
    z: np.ndarray
    residual: float
    value: float
    starts: int

    def as_dict(self) -> dict:
        return {"t": self.t, "z": self.z.tolist(), "residual": self.residual,
                "value": self.value, "starts": self.starts}


def model_energy(model: ModelData, t: float, z) -> float:
    """Closed-form model profile(t) + q sum h_pq(z)^2."""
    co = energy_coefficients(model)
    return float(profile_t(model, t)) + co.fourth_order_pairing * float(DeformationField(model.weyl).sum_sq(z))


def locate_critical_point(model: ModelData, cert: SaddleCertificate,
                          perturbation: Optional[Callable[[float, np.ndarray], float]] = None,
                          delta: float = 0.0, starts: int = 8, seed: int = 0,
                          tol: float = 1e-8) -> CriticalPoint:
    """Critical point of model + perturbation inside the certified box.

    ``perturbation(t, z)`` must be bounded by ``delta`` in sup norm.  The
    gradient is normalized by |F(t0, 0)| so that ``tol`` is scale-free.
    """
    if not cert.passed:
        raise ValueError("certificate did not pass")
    if delta >= cert.margin:
        raise ValueError(f"perturbation size {delta} not below the certificate margin {cert.margin}")
    co = energy_coefficients(model)
    field_ = DeformationField(model.weyl)
    n = model.n
    q = co.fourth_order_pairing
    scale = abs(cert.f_at_min)
    fd = 1e-6

    def energy(x):
        val = float(profile_t(model, x[0])) + q * float(field_.sum_sq(x[1:]))
        if perturbation is not None:
            val += perturbation(x[0], x[1:])
        return val

    def grad(x):
        g = np.empty(n + 1)
        g[0] = float(profile_dt(model, x[0]))
        g[1:] = q * field_.sum_sq_grad(x[1:])
        if perturbation is not None:
            for i in range(n + 1):
                e = np.zeros(n + 1)
                e[i] = fd * max(1.0, abs(x[i]))
                g[i] += (perturbation(x[0] + e[0], x[1:] + e[1:])
                         - perturbation(x[0] - e[0], x[1:] - e[1:])) / (2 * e[i])
        return g / scale

    rng = np.random.default_rng(seed)
    center = np.concatenate([[cert.t0], np.zeros(n)])
    inits = [center]
    for _ in range(starts - 1):
        d = rng.standard_normal(n)
        d *= rng.uniform(0, 0.5) * cert.eps_box / np.linalg.norm(d)
        inits.append(np.concatenate([[cert.t0 + rng.uniform(-0.5, 0.5) * cert.eta], d]))
    best = None
    for x0 in inits:
        res = root(grad, x0, method="hybr")
        x = res.x
        if abs(x[0] - cert.t0) > cert.eta or np.linalg.norm(x[1:]) > cert.eps_box:
            continue
        r = float(np.linalg.norm(grad(x)))
        if best is None or r < best[0]:
            best = (r, x)
        if r <= tol * 1e-3:
            break
    if best is None or best[0] > tol:
        r = float("inf") if best is None else best[0]
        raise RuntimeError(f"no critical point found inside the box (best residual {r:.3e})")
    r, x = best
    val = energy(x)
    if not val < 0:
        raise ArithmeticError("perturbed energy is not negative at the critical point")
    return CriticalPoint(float(x[0]), x[1:].copy(), r, val, len(inits))
