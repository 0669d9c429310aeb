import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chisup.errors import DomainError, NumericalError, ParameterError
from chisup.paths import (Grid, SamplePath, bridge_increment_sd, bridge_model, bridge_paths,
                          cholesky_factor, circulant_eigenvalues, custom_model, custom_paths,
                          fbm_covariance, fbm_model, fbm_paths, local_stationarity_ratio,
                          normalize, normalized_paths, sample_brownian_bridge, write_csv)


def test_grid_validation():
    with pytest.raises(ParameterError):
        Grid(np.array([0.1, 0.1, 0.2]))
    with pytest.raises(ParameterError):
        Grid(np.array([]))
    g = Grid.uniform(0.25, 0.75, 5)
    assert g.is_uniform and g.step == pytest.approx(0.125)
    assert g.refine().n_points == 9
    assert Grid.unit_interval(2 ** 4, 2.0 ** -4, closed_right=True).t_max == 1.0


def test_bridge_covariance_matches_kernel():
    g = Grid(np.array([0.1, 0.3, 0.5, 0.9]))
    x = bridge_paths(g, np.random.default_rng(1), 200_000)
    s, t = np.meshgrid(g.points, g.points, indexing="ij")
    exact = np.minimum(s, t) - s * t
    assert np.max(np.abs(np.cov(x.T) - exact)) < 4e-3


def test_bridge_needs_interior_grid():
    with pytest.raises(DomainError):
        bridge_increment_sd(Grid(np.array([0.0, 0.5])))


def test_normalized_bridge_unit_variance():
    g = Grid(np.array([0.01, 0.5, 0.99]))
    x = bridge_paths(g, np.random.default_rng(2), 100_000, normalized=True)
    assert np.allclose(x.var(axis=0), 1.0, atol=0.02)


@pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
def test_fbm_circulant_covariance(H):
    g = Grid.uniform(1 / 16, 1.0, 16)
    x = fbm_paths(g, H, np.random.default_rng(3), 100_000, method="circulant")
    exact = fbm_covariance(H, g.points[:, None], g.points[None, :])
    assert np.max(np.abs(np.cov(x.T) - exact)) < 0.015


def test_fbm_circulant_eigenvalues_nonnegative():
    for H in (0.1, 0.5, 0.9):
        assert circulant_eigenvalues(H, 256).min() > -1e-10


def test_fbm_cholesky_on_nonuniform_grid():
    g = Grid(np.array([0.1, 0.15, 0.4, 1.0]))
    x = fbm_paths(g, 0.3, np.random.default_rng(4), 100_000)
    exact = fbm_covariance(0.3, g.points[:, None], g.points[None, :])
    assert np.max(np.abs(np.cov(x.T) - exact)) < 0.015
    with pytest.raises(ParameterError):
        fbm_paths(g, 0.3, np.random.default_rng(4), 10, method="circulant")


def test_fbm_rejects_bad_input():
    g = Grid.uniform(0.1, 1.0, 10)
    with pytest.raises(ParameterError):
        fbm_paths(g, 1.0, np.random.default_rng(0), 1)
    with pytest.raises(DomainError):
        fbm_paths(Grid(np.array([0.0, 0.5])), 0.5, np.random.default_rng(0), 1)


def test_normalize_floor():
    g = Grid(np.array([1e-30, 0.5]))
    p = SamplePath(g, np.array([0.0, 0.1]), "fbm-raw", 0)
    with pytest.raises(DomainError):
        normalize(p, "fbm", H=0.5)


def test_cholesky_jitter_and_failure():
    near = np.array([[1.0, 1.0], [1.0, 1.0]])
    L = cholesky_factor(near)
    assert np.allclose(L @ L.T, near, atol=1e-6)
    with pytest.raises(NumericalError, match="smallest eigenvalue"):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_custom_model_matches_builtin():
    bm = bridge_model()
    m = custom_model(bm.corr, bm.C, bm.K, 1.0, bm.q, name="bridge-copy")
    g = Grid(np.array([0.2, 0.5, 0.8]))
    x = custom_paths(m, g, np.random.default_rng(5), 100_000)
    assert np.max(np.abs(np.cov(x.T) - bm.corr_matrix(g))) < 0.02


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=50, deadline=None)
def test_bridge_corr_f_is_ou(s, t):
    bm = bridge_model()
    f = lambda x: 0.5 * math.log(x / (1 - x))
    assert bm.corr_f(f(s), f(t)) == pytest.approx(float(bm.corr(s, t)), rel=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.sampled_from([0.3, 0.5, 0.7]))
@settings(max_examples=50, deadline=None)
def test_fbm_lamperti_corr(s, t, H):
    m = fbm_model(H)
    f = lambda x: 2.0 ** (-0.5 / H) * math.log(2 * x)
    # abs tolerance: near the diagonal |s - t|^{2H} amplifies the rounding of f
    assert m.corr_f(f(s), f(t)) == pytest.approx(float(m.corr(s, t)), abs=1e-8)


@pytest.mark.parametrize("model", [bridge_model(), fbm_model(0.3)])
def test_local_stationarity(model):
    for t in (0.3, 0.6):
        ratio = local_stationarity_ratio(model, t, 1e-7)
        assert ratio == pytest.approx(float(model.C(t)), rel=1e-2)


def test_normalized_paths_dispatch_and_csv():
    g = Grid(np.array([0.25, 0.5]))
    x = normalized_paths(fbm_model(0.5), g, np.random.default_rng(7), 3)
    assert x.shape == (3, 2)
    buf = io.StringIO()
    write_csv(sample_brownian_bridge(g, np.random.default_rng(0)), buf)
    assert buf.getvalue().splitlines()[0] == "t,value"
    assert len(buf.getvalue().splitlines()) == 3
