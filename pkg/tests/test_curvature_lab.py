import numpy as np
import pytest
from scipy.linalg import expm

from yamabe_blowup.curvature_lab import (MetricField, christoffel_remainder, curvature,
                                         discretization_error, expansion_checks, expm_symmetric,
                                         inverse_remainder, metric_batch, metric_eval,
                                         scalar_remainder, smooth_step, weyl_linearization)
from yamabe_blowup.weyl_algebra import WeylForm, default_weyl, random_weyl


@pytest.fixture(scope="module")
def tables(w11):
    return {t.name: t for t in expansion_checks(w11)}


def test_smooth_step():
    s = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    v = smooth_step(s)
    assert np.array_equal(v[[0, 1, 2]], [1, 1, 1])
    assert np.array_equal(v[[4, 5]], [0, 0])
    assert 0 < v[3] < 1 and v[3] == pytest.approx(0.5)
    grid = np.linspace(0, 2.5, 1001)
    assert np.all(np.diff(smooth_step(grid)) <= 0)


def test_metric_validation(w11):
    with pytest.raises(ValueError):
        MetricField(10, 0.1, w11)
    with pytest.raises(ValueError):
        MetricField(11, -0.1, w11)
    with pytest.raises(ValueError):
        MetricField(11, 0.1, w11, center=np.zeros(3))


def test_identity_at_center(w11):
    y = np.full(11, 0.1)
    g, gi = metric_eval(MetricField(11, 0.3, w11, center=y), y)
    assert np.array_equal(g, np.eye(11)) and np.array_equal(gi, np.eye(11))


def test_determinant_one_inside(w11):
    m = MetricField(11, 0.2, w11, radius=1.0)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((100, 11))
    X *= (rng.uniform(size=100) ** (1 / 11) / np.linalg.norm(X, axis=1))[:, None]
    g, gi = metric_batch(m, X)
    assert np.max(np.abs(np.linalg.det(g) - 1)) <= 1e-12
    assert np.max(np.abs(g @ gi - np.eye(11))) <= 1e-12
    assert np.max(np.abs(g - np.transpose(g, (0, 2, 1)))) <= 1e-15


def test_metric_flat_outside(w11):
    g, _ = metric_eval(MetricField(11, 0.2, w11), np.full(11, 1.0))
    assert np.array_equal(g, np.eye(11))


@pytest.mark.parametrize("scale", [1e-3, 0.3, 4.0, 40.0])
def test_expm_against_scipy(scale):
    rng = np.random.default_rng(int(scale * 1000))
    A = rng.standard_normal((6, 6))
    S = scale * (A + A.T) / 2
    assert np.allclose(expm_symmetric(S), expm(S), rtol=1e-11, atol=1e-14 * np.exp(np.abs(S).sum()))
    if scale < 10:
        out = expm_symmetric(np.stack([S, -S]))
        assert np.allclose(out[0] @ out[1], np.eye(6), atol=1e-9)


def test_expm_longdouble():
    S = np.diag([0.5, -0.25, 1.0]).astype(np.longdouble)
    out = expm_symmetric(S)
    assert out.dtype == np.longdouble
    assert np.allclose(np.diag(out).astype(float), np.exp([0.5, -0.25, 1.0]), rtol=1e-15)


def test_flat_metric_has_no_curvature(w11):
    pack = curvature(MetricField(11, 0.0, w11), np.full(11, 0.05))
    # stencil weights sum to zero only up to rounding
    assert np.max(np.abs(pack.riemann)) <= 1e-20 and abs(pack.scalar) <= 1e-20
    assert np.max(np.abs(pack.christoffel)) <= 1e-13


def test_step_must_be_positive(w11):
    with pytest.raises(ValueError):
        curvature(MetricField(11, 0.1, w11), np.zeros(11), step=0)


def test_symmetries_within_discretization(w11):
    m = MetricField(11, 0.1, w11)
    x = np.zeros(11)
    x[:3] = [0.2, -0.1, 0.15]
    pack = curvature(m, x, 1e-2)
    err = discretization_error(m, x, 1e-2)
    floor = 1e-12
    assert pack.symmetry_residual() <= 10 * err + floor
    assert pack.weyl_trace_residual() <= 10 * err + floor
    assert np.abs(pack.riemann).max() > 100 * (err + floor)


def test_weyl_at_center_small_dimension():
    W = random_weyl(5, np.random.default_rng(4))
    m = MetricField(5, 1e-2, W)
    assert weyl_linearization(m, 1e-2) <= 1e-6


def test_weyl_linearization_flat_and_zero(w11):
    assert weyl_linearization(MetricField(11, 0.0, w11)) == 0.0
    pack = curvature(MetricField(11, 0.1, WeylForm.zero(11)), np.zeros(11))
    assert not np.any(pack.weyl_part)


def test_inverse_expansion_order():
    W = default_weyl(6)
    x = np.zeros(6)
    x[0] = 0.4
    r = [inverse_remainder(MetricField(6, e, W), x, np.longdouble) for e in (0.1, 0.05, 0.025)]
    assert r[0] / r[1] == pytest.approx(8.0, rel=0.1)
    assert r[1] / r[2] == pytest.approx(8.0, rel=0.1)


def test_christoffel_expansion_order():
    W = default_weyl(6)
    x = np.zeros(6)
    x[1] = 0.3
    r = [christoffel_remainder(MetricField(6, e, W), x, 1e-2, np.longdouble) for e in (0.04, 0.02, 0.01)]
    assert r[0] / r[1] == pytest.approx(4.0, rel=0.1)


def test_scalar_relative_remainder_order():
    W = default_weyl(6)
    x = np.zeros(6)
    x[2] = 0.3
    r = [scalar_remainder(MetricField(6, e, W), x, 5e-2, np.longdouble, relative=True)
         for e in (0.04, 0.02, 0.01)]
    assert r[0] / r[1] == pytest.approx(2.0, rel=0.25)


def test_ratio_tables_n11(tables):
    for name in ("inverse_metric", "christoffel", "scalar_curvature", "weyl_linearization"):
        assert tables[name].passed, tables[name].as_dict()
    for q in tables["weyl_linearization"].ratios:
        assert 1.5 <= q <= 2.5


def test_ratio_table_dict(tables):
    d = tables["christoffel"].as_dict()
    assert d["target"] == 4.0 and len(d["ratios"]) == 2
