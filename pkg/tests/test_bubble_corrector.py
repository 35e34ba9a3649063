import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from yamabe_blowup.bubble_corrector import (BubbleParams, annihilation_integral, bubble_eval,
                                            bubble_gradient, bubble_hessian, bubble_pde_residual,
                                            corrector_eval, corrector_gradient, corrector_laplacian,
                                            corrector_orthogonality, corrector_pairing,
                                            corrector_pairing_oracle, corrector_residual,
                                            fd_laplacian, kernel_eval, kernel_from_bubble,
                                            kernel_gradient, kernel_pde_residual)
from yamabe_blowup.exact_constants import sobolev_mass
from yamabe_blowup.weyl_algebra import DeformationField, WeylForm, random_weyl


def _ball_point(rng, n, radius=0.9):
    z = rng.standard_normal(n)
    return z / np.linalg.norm(z) * radius * rng.uniform() ** (1 / n)


def test_params_validation():
    with pytest.raises(ValueError):
        BubbleParams(3, 0.0, np.zeros(3))
    with pytest.raises(ValueError):
        BubbleParams(3, 1.0, np.ones(3))
    with pytest.raises(ValueError):
        BubbleParams(3, 1.0, np.zeros(4))
    p = BubbleParams(5, 3.0, np.zeros(5))
    p.check_box(4.0)
    with pytest.raises(ValueError):
        p.check_box(2.0)


def test_bubble_at_center():
    assert bubble_eval(BubbleParams.standard(11), np.zeros(11)) == 1.0


@pytest.mark.parametrize("n", [11, 12, 13, 14])
def test_bubble_pde_identity(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        p = BubbleParams(n, rng.uniform(0.5, 2.0), _ball_point(rng, n))
        X = rng.uniform(-3, 3, size=(200, n))
        res = bubble_pde_residual(p, X)
        assert np.max(np.abs(res)) <= 1e-10


def test_bubble_gradient_second_order():
    n = 11
    rng = np.random.default_rng(0)
    p = BubbleParams(n, 1.2, _ball_point(rng, n))
    x = rng.standard_normal(n)
    g = bubble_gradient(p, x)

    def fd(step):
        return np.array([(bubble_eval(p, x + step * e) - bubble_eval(p, x - step * e)) / (2 * step)
                         for e in np.eye(n)])

    err1 = np.max(np.abs(fd(1e-2) - g))
    err2 = np.max(np.abs(fd(5e-3) - g))
    assert err1 / err2 == pytest.approx(4.0, rel=0.05)


def test_bubble_hessian_matches_gradient_differences():
    n = 11
    p = BubbleParams(n, 0.8, np.full(n, 0.1))
    x = np.linspace(-1, 1, n)
    step = 1e-5
    fd = np.stack([(bubble_gradient(p, x + step * e) - bubble_gradient(p, x - step * e)) / (2 * step)
                   for e in np.eye(n)])
    assert np.allclose(fd, bubble_hessian(p, x), atol=1e-9)


def test_kernel_values_at_origin():
    p = BubbleParams.standard(11)
    assert kernel_eval(0, p, np.zeros(11)) == -1.0
    assert kernel_eval(1, p, np.zeros(11)) == 0.0
    with pytest.raises(ValueError):
        kernel_eval(12, p, np.zeros(11))


@pytest.mark.parametrize("j", [0, 1, 4, 11])
def test_kernel_matches_bubble_derivatives(j):
    n = 11
    rng = np.random.default_rng(j)
    p = BubbleParams(n, 1.3, _ball_point(rng, n, 0.5))
    X = rng.uniform(-2, 2, size=(50, n))
    diff = kernel_from_bubble(j, p, X, step=1e-4) - kernel_eval(j, p, X)
    assert np.max(np.abs(diff)) <= 1e-6


def test_kernel_difference_order_two():
    n = 11
    p = BubbleParams(n, 1.1, np.full(n, 0.05))
    x = np.full(n, 0.4)
    for j in (0, 2):
        exact = kernel_eval(j, p, x)
        e1 = abs(kernel_from_bubble(j, p, x, step=2e-2) - exact)
        e2 = abs(kernel_from_bubble(j, p, x, step=1e-2) - exact)
        assert e1 / e2 == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("j", [0, 1, 7])
def test_kernel_pde(j):
    rng = np.random.default_rng(3)
    X = rng.uniform(-5, 5, size=(200, 11))
    assert np.max(np.abs(kernel_pde_residual(j, 11, X))) <= 1e-12
    # the closed-form Laplacian against a finite-difference one at a few points
    p = BubbleParams.standard(11)
    for x in X[:5] / 3:
        lap = -fd_laplacian(lambda P: kernel_eval(j, p, P), x, step=1e-3)
        V = kernel_eval(j, p, x)
        u = 1 + x @ x / 99
        assert lap - (22 / 9 - 1) * u ** -2 * V == pytest.approx(0.0, abs=1e-6)


def test_kernel_gradient():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(11)
    p = BubbleParams.standard(11)
    for j in (0, 3):
        fd = np.array([(kernel_eval(j, p, x + 1e-6 * e) - kernel_eval(j, p, x - 1e-6 * e)) / 2e-6
                       for e in np.eye(11)])
        assert np.allclose(kernel_gradient(j, 11, x), fd, atol=1e-9)


def test_corrector_closed_form(w11, rng):
    assert corrector_eval(w11, 0, 1, np.zeros(11)) == 0
    X = rng.uniform(-4, 4, size=(50, 11))
    H = DeformationField(w11).h(X)
    scale = 11 * (1 + np.sum(X ** 2, axis=1) / 99) ** 5.5
    for a, b in [(0, 0), (0, 1), (4, 7)]:
        L = corrector_eval(w11, a, b, X)
        assert np.allclose(L * scale, -H[:, a, b], rtol=1e-13, atol=1e-13)
        assert np.allclose(L, corrector_eval(w11, b, a, X), rtol=1e-14, atol=1e-16)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_h_is_harmonic(seed):
    r = np.random.default_rng(seed)
    W = random_weyl(11, r)
    field = DeformationField(W)
    # h is quadratic: its Laplacian is the trace of the constant second derivative
    G = field._grad.reshape(11, 11, 11, 11)
    lap = np.einsum("ijkk->ij", G) * 2
    assert np.max(np.abs(lap)) <= 1e-13


def test_corrector_residual(w11):
    rng = np.random.default_rng(11)
    X = np.array([_ball_point(rng, 11, 10.0) for _ in range(100)])
    assert corrector_residual(w11, 0, 1, np.zeros(11)) == 0
    for a, b in [(0, 1), (2, 2), (3, 9)]:
        assert np.max(np.abs(corrector_residual(w11, a, b, X))) <= 1e-9


def test_corrector_laplacian_fd(w11, rng):
    for x in rng.uniform(-2, 2, size=(4, 11)):
        fd = fd_laplacian(lambda P: corrector_eval(w11, 0, 1, P), x, step=1e-3)
        assert fd == pytest.approx(corrector_laplacian(w11, 0, 1, x), abs=1e-6)


def test_corrector_gradient_order_two(w11):
    x = np.linspace(-1, 1, 11)
    g = corrector_gradient(w11, 0, 1, x)

    def fd(step):
        return np.array([(corrector_eval(w11, 0, 1, x + step * e) - corrector_eval(w11, 0, 1, x - step * e))
                         / (2 * step) for e in np.eye(11)])

    e1 = np.max(np.abs(fd(2e-2) - g))
    e2 = np.max(np.abs(fd(1e-2) - g))
    assert e1 / e2 == pytest.approx(4.0, rel=0.1)


def test_annihilation_zero_weyl():
    assert annihilation_integral(WeylForm.zero(11), BubbleParams.standard(11)).value == 0.0


def test_annihilation_centered(w11):
    res = annihilation_integral(w11, BubbleParams.standard(11), budget=5000)
    # θ·h(θ)θ vanishes direction by direction, so only rounding is left
    scale = float(sobolev_mass(11)) * np.sqrt(w11.norm_sq)
    assert abs(res.value) <= 1e-14 * scale


def test_annihilation_shifted(w11):
    z = np.zeros(11)
    z[0] = 0.2
    res = annihilation_integral(w11, BubbleParams(11, 1.3, z), budget=50_000)
    assert abs(res.value) <= 3 * res.standard_error


def test_annihilation_random_triples():
    rng = np.random.default_rng(2024)
    for k in range(10):
        W = random_weyl(11, rng)
        p = BubbleParams(11, rng.uniform(0.5, 2.0), _ball_point(rng, 11))
        res = annihilation_integral(W, p, budget=5000, seed=k)
        assert abs(res.value) <= 3 * res.standard_error + 1e-12


def test_orthogonality(w11):
    for j in (0, 1, 5):
        res = corrector_orthogonality(w11, 0, 1, j, budget=5000)
        assert abs(res.value) <= 3 * res.standard_error + 1e-12


def test_pairing_closed_form_properties(w11):
    assert corrector_pairing(WeylForm.zero(11), 0, 1, 0, 1) == 0
    assert corrector_pairing(w11, 0, 1, 2, 3) == corrector_pairing(w11, 2, 3, 0, 1)
    assert corrector_pairing(w11, 0, 1, 0, 1) > 0
    with pytest.raises(ValueError):
        corrector_pairing(WeylForm.zero(6), 0, 1, 0, 1)


def test_pairing_oracle(w11):
    chk = corrector_pairing_oracle(w11, 0, 1, 0, 1, budget=200_000, seed=0)
    assert chk.sigma <= 3
    assert chk.relative <= 0.01
    # the gradient and cross pieces cancel exactly in closed form
    assert chk.pieces_closed[0] + chk.pieces_closed[2] == pytest.approx(0.0, abs=1e-12 * chk.closed)
    assert np.all(np.abs(chk.pieces.value - chk.pieces_closed) <= 3 * chk.pieces.standard_error
                  + 1e-3 * abs(chk.closed))
