import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from synth_audit.density import (
    ClosedFormDensity,
    FlowConfig,
    FlowModel,
    KdeModel,
    flow_fit,
    kde_fit,
    log_shift_representation,
    scott_bandwidth,
)
from synth_audit.density.closed_form import normal_logpdf
from synth_audit.errors import DimensionError, ParameterError, SizeError
from synth_audit.generators import fig2_densities
from synth_audit.numcore import SeededRng, finite_diff_check

LOG_PHI0 = -0.5 * math.log(2 * math.pi)


# -- KDE ---------------------------------------------------------------------------


def test_scott_bandwidth_values():
    assert scott_bandwidth(1, 5) == 1.0
    assert scott_bandwidth(32, 1) == 0.5
    assert scott_bandwidth(20640, 8) == pytest.approx(20640 ** (-1 / 12), rel=1e-12)
    assert scott_bandwidth(20640, 8) == pytest.approx(0.4369, abs=1e-4)
    with pytest.raises(SizeError):
        scott_bandwidth(0, 1)


def test_kde_default_bandwidth_is_scott():
    assert kde_fit(np.arange(32.0)).bandwidth == 0.5


def test_kde_rejects_bad_bandwidth():
    with pytest.raises(ParameterError):
        KdeModel([[0.0]], -1.0)


def test_kde_single_point_is_normal():
    model = kde_fit([0.0], bandwidth=1.0)
    assert model.log_density(np.array([[0.0]]))[0] == pytest.approx(LOG_PHI0, abs=1e-12)


def test_kde_two_points():
    model = kde_fit([-1.0, 1.0], bandwidth=1.0)
    val = model.log_density(np.array([[0.0]]))[0]
    assert val == pytest.approx(math.log(0.24197072451914337), abs=1e-12)
    assert val == pytest.approx(-1.4189, abs=1e-4)
    a, b = model.log_density(np.array([[2.0], [-2.0]]))
    assert a == pytest.approx(b, abs=1e-14)


def test_kde_far_query_finite():
    model = kde_fit([0.0], bandwidth=0.01)
    val = model.log_density(np.array([[50.0]]))[0]
    assert np.isfinite(val)
    assert val == pytest.approx(normal_logpdf(50.0, 0.0, 0.01), rel=1e-12)


def test_kde_dimension_mismatch():
    with pytest.raises(DimensionError):
        kde_fit(np.zeros((3, 2))).log_density(np.zeros((1, 3)))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=20), st.randoms(use_true_random=False))
@settings(max_examples=30, deadline=None)
def test_kde_exchangeable(points, rnd):
    shuffled = list(points)
    rnd.shuffle(shuffled)
    q = np.linspace(-6, 6, 7).reshape(-1, 1)
    np.testing.assert_allclose(kde_fit(points, 0.7).log_density(q), kde_fit(shuffled, 0.7).log_density(q), rtol=1e-12)


def test_kde_matches_direct_sum(np_rng):
    pts = np_rng.normal(size=(40, 2))
    q = np_rng.normal(size=(5, 2))
    h = 0.6
    direct = [np.log(np.mean([np.prod(np.exp(normal_logpdf(x, p, h))) for p in pts])) for x in q]
    np.testing.assert_allclose(kde_fit(pts, h).log_density(q), direct, rtol=1e-10)


@pytest.mark.parametrize("d", [1, 2])
def test_kde_normalizes(np_rng, d):
    pts = np_rng.normal(size=(30, d))
    model = kde_fit(pts, 0.5)
    grid = np.linspace(-8, 8, 401)
    step = grid[1] - grid[0]
    mesh = np.stack(np.meshgrid(*([grid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    total = np.exp(model.log_density(mesh)).sum() * step**d
    assert total == pytest.approx(1.0, abs=0.02)


def test_kde_dict_roundtrip(np_rng):
    model = kde_fit(np_rng.normal(size=(10, 2)))
    back = KdeModel.from_dict(model.to_dict())
    q = np_rng.normal(size=(4, 2))
    np.testing.assert_array_equal(back.log_density(q), model.log_density(q))


# -- closed form -------------------------------------------------------------------


def test_closed_form_values():
    p_r, p_g = fig2_densities()
    assert p_r.log_density(0.0) == pytest.approx(-0.9189, abs=1e-4)
    assert p_g.log_density(0.0) == pytest.approx(math.log(0.5 * 0.3989422804014327 + 0.5 * 0.3989422804014327 / 0.2 * math.exp(-200)), abs=1e-12)
    assert p_g.log_density(0.0) == pytest.approx(-1.6121, abs=1e-4)
    assert p_g.log_density(4.0) == pytest.approx(-0.00258, abs=1e-5)


def test_closed_form_validation():
    with pytest.raises(ParameterError):
        ClosedFormDensity([0.5, 0.6], [[0.0], [1.0]], [[1.0], [1.0]])
    with pytest.raises(ParameterError):
        ClosedFormDensity([1.0], [[0.0]], [[0.0]])


def test_log_shift_density_integrates():
    _, p_g = fig2_densities()
    t = log_shift_representation(p_g)
    y = np.linspace(math.log(10 - 9), math.log(10 + 9), 200001)
    total = trapezoid(np.exp(t.log_density(y)), y)
    assert total == pytest.approx(1.0, abs=1e-6)


# -- flow --------------------------------------------------------------------------

SMALL = FlowConfig(flows=2, layers=3, hidden=4, batch=10, epochs=1)


def _perturbed(dim, seed=0, scale=0.3):
    model = FlowModel(dim, SMALL, seed=seed)
    vec = model.get_vector()
    model.set_vector(vec + scale * np.random.default_rng(seed).normal(size=vec.size))
    return model


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_flow_gradient_check(dim):
    model = _perturbed(dim, seed=dim)
    x = np.random.default_rng(dim).normal(size=(10, dim))
    vec = model.get_vector()
    _, grad = model.loss_and_grad(x)

    def loss(v):
        model.set_vector(v)
        return model.loss(x)

    ok, err = finite_diff_check(loss, vec, grad, rel_tol=1e-4)
    model.set_vector(vec)
    assert ok, err


def test_flow_autoregressive():
    model = _perturbed(3, seed=5)
    x = np.random.default_rng(0).normal(size=(6, 3))
    z, _ = model.forward(x)
    for j in range(3):
        bumped = x.copy()
        bumped[:, j] += 0.7
        z2, _ = model.forward(bumped)
        # z_i may depend only on x_1..x_i
        np.testing.assert_array_equal(z2[:, :j], z[:, :j])
        assert np.all(z2[:, j] > z[:, j])


def test_flow_logdet_matches_numeric_derivative_1d():
    model = _perturbed(1, seed=2)
    x = np.linspace(-3, 3, 13).reshape(-1, 1)
    eps = 1e-6
    zp, _ = model.forward(x + eps)
    zm, _ = model.forward(x - eps)
    _, logdet = model.forward(x)
    np.testing.assert_allclose(np.exp(logdet), ((zp - zm) / (2 * eps)).ravel(), rtol=1e-6)


def test_flow_input_gradient(np_rng):
    model = _perturbed(2, seed=4)
    x = np_rng.normal(size=(3, 2))
    g = model.input_gradient(x)
    eps = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        num = (model.log_density(x + e) - model.log_density(x - e)) / (2 * eps)
        np.testing.assert_allclose(g[:, j], num, rtol=1e-5, atol=1e-8)


def test_flow_init_is_standard_normal_in_1d():
    model = FlowModel(1, FlowConfig(), seed=0)
    x = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(model.log_density(x), normal_logpdf(x), atol=1e-6)


def test_flow_init_has_zero_logdet():
    model = FlowModel(3, FlowConfig(), seed=1)
    x = np.random.default_rng(0).normal(size=(5, 3))
    z, logdet = model.forward(x)
    np.testing.assert_allclose(logdet, 0.0, atol=1e-12)
    np.testing.assert_allclose(model.log_density(x), normal_logpdf(z).sum(axis=1), atol=1e-12)


def test_flow_finite_far_away():
    model = _perturbed(2, seed=3, scale=1.0)
    vals = model.log_density(np.array([[100.0, -100.0], [-100.0, 100.0], [100.0, 100.0]]))
    assert np.all(np.isfinite(vals))


def test_flow_batch_larger_than_data():
    with pytest.raises(SizeError):
        flow_fit(np.zeros((5, 1)), FlowConfig(batch=10))


def test_flow_short_training_deterministic_and_roundtrip():
    x = np.random.default_rng(0).normal(size=(60, 2))
    a = flow_fit(x, SMALL, SeededRng(3))
    b = flow_fit(x, SMALL, SeededRng(3))
    np.testing.assert_array_equal(a.get_vector(), b.get_vector())
    assert len(a.loss_trace) == SMALL.epochs
    back = FlowModel.from_dict(a.to_dict())
    np.testing.assert_array_equal(back.log_density(x), a.log_density(x))
