import numpy as np
import pytest

from lfdepth import errors
from lfdepth.lightfield import CoherenceMap, DepthMap
from lfdepth.nlm import NlmParams, nlm_weights
from lfdepth.optimize import OptimizerParams
from lfdepth.propagation import initial_guess, propagate, propagation_objective_and_gradient
from lfdepth.refine import nlm_prior_and_gradient
from oracles import central_fd, dense_propagation_solution, propagation_system, rel_err

SMALL = NlmParams(search_radius=2, patch_radius=1, sigma_color_sq=0.05, sigma_grad_sq=0.1)
TIGHT = OptimizerParams(max_iters=5000, grad_tol=1e-10)


def instance(rng, Y=6, X=6, p_seed=0.4):
    # low contrast keeps the weights O(0.1..1) so the problem is well coupled
    img = 0.1 * rng.random((Y, X, 3))
    w = nlm_weights(img, SMALL)
    seeds = rng.random((Y, X)) < p_seed
    seeds.flat[rng.integers(Y * X)] = True
    mi = np.where(seeds, rng.uniform(-1, 1, (Y, X)), np.nan)
    C = np.where(seeds, rng.uniform(0.5, 1.0, (Y, X)), 0.0)
    return DepthMap(mi), CoherenceMap(C), w


def test_gradient_matches_fd(rng):
    for _ in range(5):
        mi, C, w = instance(rng)
        m = rng.uniform(-1, 1, mi.shape)
        f, g = propagation_objective_and_gradient(m, mi, C, w)
        fd = central_fd(lambda x: propagation_objective_and_gradient(x, mi, C, w)[0], m, 1e-5)
        assert rel_err(g, fd) < 1e-6


def test_objective_matches_quadratic_form(rng):
    mi, C, w = instance(rng)
    H, b, const = propagation_system(mi.values, C.values, w)
    m = rng.uniform(-1, 1, mi.shape)
    f, g = propagation_objective_and_gradient(m, mi, C, w)
    x = m.ravel()
    assert f == pytest.approx(0.5 * x @ H @ x - b @ x + const, rel=1e-12)
    np.testing.assert_allclose(g.ravel(), H @ x - b, atol=1e-10)


def test_constant_map_is_stationary():
    img = np.random.default_rng(1).random((5, 5, 3))
    w = nlm_weights(img, SMALL)
    m = np.full((5, 5), 0.7)
    f, g = propagation_objective_and_gradient(m, DepthMap(m), CoherenceMap(np.random.default_rng(2).random((5, 5))), w)
    assert f == 0.0 and np.all(g == 0.0)


def test_zero_coherence_is_pure_smoothness(rng):
    mi, _, w = instance(rng)
    m = rng.uniform(-1, 1, mi.shape)
    f, g = propagation_objective_and_gradient(m, mi, CoherenceMap(np.zeros(mi.shape)), w)
    r, gr = nlm_prior_and_gradient(m, w)
    assert f == pytest.approx(r, rel=1e-14)
    np.testing.assert_allclose(g, gr, atol=1e-14)


def test_constant_seed_everywhere():
    img = np.random.default_rng(4).random((6, 6, 3))
    w = nlm_weights(img, SMALL)
    out = propagate(DepthMap(np.full((6, 6), 0.25)), CoherenceMap(np.ones((6, 6))), w)
    np.testing.assert_allclose(out.values, 0.25, atol=1e-9)


def test_two_seeds_in_flat_image():
    w = nlm_weights(np.full((8, 8, 3), 0.5), SMALL)
    mi = np.full((8, 8), np.nan)
    mi[1, 1] = mi[6, 5] = 1.0
    C = np.zeros((8, 8))
    C[1, 1] = C[6, 5] = 0.9
    out = propagate(DepthMap(mi), CoherenceMap(C), w)
    np.testing.assert_allclose(out.values, 1.0, atol=1e-6)


@pytest.mark.parametrize("size", [(8, 8), (12, 10), (16, 16)])
def test_matches_dense_solve(size, rng):
    mi, C, w = instance(rng, *size)
    m_ref, f_ref = dense_propagation_solution(mi.values, C.values, w)
    assert f_ref > 1e-3
    out = propagate(mi, C, w, TIGHT)
    f, g = propagation_objective_and_gradient(out.values, mi, C, w)
    assert abs(f - f_ref) / max(abs(f_ref), 1e-300) < 1e-8
    np.testing.assert_allclose(out.values, m_ref, atol=1e-5)


def test_default_stop_reaches_gradient_tolerance(rng):
    mi, C, w = instance(rng, 10, 10)
    out, trace = propagate(mi, C, w, return_trace=True)
    _, g = propagation_objective_and_gradient(out.values, mi, C, w)
    assert np.max(np.abs(g)) < 1e-6 or len(trace.records) > 500


def test_shift_equivariance(rng):
    mi, C, w = instance(rng, 8, 8)
    a = propagate(mi, C, w, TIGHT).values
    b = propagate(DepthMap(mi.values + 0.3), C, w, TIGHT).values
    np.testing.assert_allclose(b, a + 0.3, atol=1e-7)


def test_initial_guess_uses_mean_of_defined():
    mi = DepthMap(np.array([[1.0, np.nan], [3.0, np.nan]]))
    np.testing.assert_array_equal(initial_guess(mi), [[1.0, 2.0], [3.0, 2.0]])


def test_no_coherent_pixels(rng):
    mi, _, w = instance(rng)
    with pytest.raises(errors.NoCoherentPixels):
        propagate(mi, CoherenceMap(np.zeros(mi.shape)), w)


def test_shape_mismatch(rng):
    mi, C, w = instance(rng)
    with pytest.raises(errors.DimensionMismatch):
        propagate(DepthMap(np.zeros((5, 5))), CoherenceMap(np.ones((5, 5))), w)
    with pytest.raises(errors.DimensionMismatch):
        propagation_objective_and_gradient(np.zeros((6, 5)), mi, C, w)
