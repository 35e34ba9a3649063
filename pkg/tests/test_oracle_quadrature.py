from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from yamabe_blowup.exact_constants import lambda_constant, sobolev_mass, sphere_volume
from yamabe_blowup.oracle_quadrature import (Integrand, brendle_moment_a, brendle_moment_a_closed,
                                             brendle_moment_a_mc, brendle_moment_b,
                                             brendle_moment_b_closed, brendle_moment_b_mc,
                                             fourth_moment_tensor, integrate_rn, integrate_sphere,
                                             integrate_sphere_poly)
from yamabe_blowup.weyl_algebra import (DeformationField, circulant_matrix, diagonal_weyl,
                                        random_weyl)

N, C = 11, 99.0


def _bubble_power(power):
    return Integrand(lambda th, r: np.broadcast_to((1 + r ** 2 / C) ** (-(N - 2) / 2 * power),
                                                   (len(th), len(r))),
                     N, (N - 2) * power, np.sqrt(C))


def test_bubble_critical_power():
    res = integrate_rn(_bubble_power(2 * N / (N - 2)), 5000, seed=0)
    assert abs(res.value - float(sobolev_mass(N))) <= 3 * res.standard_error + 1e-9 * res.value
    assert res.value == pytest.approx(float(sobolev_mass(N)), rel=1e-8)


def test_lambda_integral():
    res = integrate_rn(_bubble_power((N + 2) / (N - 2)), 5000, seed=0)
    assert res.value == pytest.approx(float(lambda_constant(N)), rel=1e-8)


def test_odd_integrand_vanishes():
    f = Integrand.from_points(lambda X: X[:, 0] * (1 + np.sum(X ** 2, axis=1)) ** (-N), N, 2 * N - 1)
    res = integrate_rn(f, 20_000, seed=2)
    assert abs(res.value) <= 4 * res.standard_error


def test_vector_valued_and_indexing():
    f = Integrand.from_points(lambda X: np.stack([X[:, 0] ** 2, X[:, 1] ** 2], axis=1)
                              * (1 + np.sum(X ** 2, axis=1))[:, None] ** (-N), N, 2 * N - 2)
    res = integrate_rn(f, 10_000, seed=0)
    assert res.value.shape == (2,)
    diff = res.combine([1.0, -1.0])
    assert abs(diff.value) <= 4 * diff.standard_error
    assert res[0].value == res.value[0]


def test_sphere_poly_examples():
    pi = np.pi
    assert float(integrate_sphere_poly([2, 0, 0])) == pytest.approx(4 * pi / 3, rel=1e-14)
    assert float(integrate_sphere_poly([4, 0, 0])) == pytest.approx(4 * pi / 5, rel=1e-14)
    assert float(integrate_sphere_poly([2, 2, 0])) == pytest.approx(4 * pi / 15, rel=1e-14)
    assert integrate_sphere_poly([1, 1, 0]).coeff == Fraction(0)
    assert integrate_sphere_poly([0] * 5) == sphere_volume(5)
    with pytest.raises(ValueError):
        integrate_sphere_poly([-1, 2])


@given(n=st.integers(2, 14))
def test_second_and_fourth_moments(n):
    omega = sphere_volume(n)
    assert integrate_sphere_poly([2] + [0] * (n - 1)) == omega / n
    assert integrate_sphere_poly([4] + [0] * (n - 1)) == omega * Fraction(3, n * (n + 2))
    if n > 1:
        assert integrate_sphere_poly([2, 2] + [0] * (n - 2)) == omega * Fraction(1, n * (n + 2))


def test_fourth_moment_tensor_isotropic():
    n = 6
    M = fourth_moment_tensor(n)
    d = np.eye(n)
    iso = (np.einsum("ab,cd->abcd", d, d) + np.einsum("ac,bd->abcd", d, d)
           + np.einsum("ad,bc->abcd", d, d))
    assert np.allclose(M, float(sphere_volume(n)) / (n * (n + 2)) * iso, rtol=1e-13, atol=0)


def test_sphere_monte_carlo_poly():
    res = integrate_sphere(lambda th: th[:, 0] ** 2 * th[:, 1] ** 2, 5, 200_000, seed=4)
    exact = float(integrate_sphere_poly([2, 2, 0, 0, 0]))
    assert abs(res.value - exact) <= 3 * res.standard_error


def test_moment_trace_relation(w11):
    for k, l in [(0, 0), (0, 1), (3, 3)]:
        summed = sum(brendle_moment_b(w11, k, p, p, l) for p in range(11))
        assert summed == pytest.approx(brendle_moment_a(w11, k, l), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_closed_forms_match_expansion(seed):
    W = random_weyl(7, np.random.default_rng(seed))
    for k in range(7):
        for l in range(7):
            assert brendle_moment_a_closed(W, k, l) == pytest.approx(brendle_moment_a(W, k, l),
                                                                     rel=1e-11, abs=1e-14)
    rng = np.random.default_rng(seed + 10)
    for _ in range(30):
        idx = tuple(int(i) for i in rng.integers(0, 7, size=4))
        assert brendle_moment_b_closed(W, *idx) == pytest.approx(brendle_moment_b(W, *idx),
                                                                 rel=1e-11, abs=1e-14)


def test_moments_monte_carlo(w11):
    a = brendle_moment_a_mc(w11, 0, 0, samples=200_000, seed=1)
    exact = brendle_moment_a_closed(w11, 0, 0)
    assert abs(a.value - exact) <= 3 * a.standard_error
    b = brendle_moment_b_mc(w11, 0, 1, 0, 1, samples=200_000, seed=1)
    exact = brendle_moment_b_closed(w11, 0, 1, 0, 1)
    assert abs(b.value - exact) <= 3 * b.standard_error


def test_random_multi_indices_monte_carlo():
    W = diagonal_weyl(circulant_matrix(8))
    rng = np.random.default_rng(99)
    idxs = [tuple(int(i) for i in rng.integers(0, 8, size=4)) for _ in range(20)]
    field_ = DeformationField(W)

    def f(theta):
        H = field_.h(theta)
        return np.stack([H[:, a, b] * H[:, c, d] for a, b, c, d in idxs], axis=1)

    res = integrate_sphere(f, 8, 200_000, seed=5)
    z = [(res.value[i] - brendle_moment_b_closed(W, *idx)) / max(res.standard_error[i], 1e-300)
         for i, idx in enumerate(idxs) if res.standard_error[i] > 0]
    # a handful of 3-sigma excursions among 20 draws would signal a biased formula
    assert sum(abs(x) > 3 for x in z) <= 1
    for i, idx in enumerate(idxs):
        if res.standard_error[i] == 0:
            assert brendle_moment_b_closed(W, *idx) == pytest.approx(res.value[i], abs=1e-14)


def test_determinism_and_workers():
    f = _bubble_power(2 * N / (N - 2))
    a = integrate_rn(f, 4000, seed=7)
    b = integrate_rn(f, 4000, seed=7)
    c = integrate_rn(f, 4000, seed=7, workers=3)
    assert a.value == b.value == c.value
    assert a.standard_error == c.standard_error


def test_error_calibration():
    # integrand with genuine angular variance: |x_0|^2 weight against an exact value
    n = 5
    f = Integrand.from_points(lambda X: X[:, 0] ** 2 * np.exp(-np.sum(X ** 2, axis=1)), n, 50)
    exact = np.pi ** (n / 2) / 2
    exceed = 0
    for seed in range(50):
        res = integrate_rn(f, 1000, seed=seed)
        exceed += abs(res.value - exact) > 3 * res.standard_error
    assert exceed <= 2


def test_budget_and_decay_errors():
    with pytest.raises(ValueError, match="budget"):
        integrate_rn(_bubble_power(2 * N / (N - 2)), 999)
    with pytest.raises(ValueError, match="integrable"):
        Integrand(lambda th, r: r, N, N)
    with pytest.raises(ValueError):
        Integrand(lambda th, r: r, N, N + 1, scale=0)
    with pytest.raises(ValueError):
        integrate_sphere(lambda th: th[:, 0], 3, 10)


def test_as_dict():
    d = integrate_rn(_bubble_power(2 * N / (N - 2)), 1000).as_dict()
    assert set(d) == {"value", "standard_error", "samples", "method"}
    assert d["samples"] == 1000
