import numpy as np
import pytest

from lfdepth import errors, synthgen
from lfdepth.lightfield import CoherenceMap, DepthMap, Epi, LightField, epi_h, epi_v
from lfdepth.local_depth import (LocalEstimate, StructureTensorParams, fuse_estimates,
                                 local_depth_all, local_depth_epi, luminance)
from lfdepth.renderer import render_lightfield

P = StructureTensorParams()


def scene(m, size=40, views=7, seed=3):
    lf, _ = synthgen.generate(synthgen.constant_scene(m, size=size, views=views, seed=seed))
    return lf


def random_epi(rng, A=7, U=40):
    return rng.random((A, U))


def test_luminance_weights():
    px = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(luminance(px), [0.299, 0.587, 0.114])


@pytest.mark.parametrize("m", [-1.0, -0.5, 0.0, 0.5, 1.0])
def test_epi_slope_recovery(m):
    lf = scene(m)
    b = 8
    slopes, cohs = [], []
    for y in range(b, lf.Y - b):
        s, c = local_depth_epi(epi_h(lf, y, lf.S // 2), P)
        slopes.append(s[b:-b])
        cohs.append(c[b:-b])
        s, c = local_depth_epi(epi_v(lf, y, lf.T // 2), P)
        slopes.append(s[b:-b])
        cohs.append(c[b:-b])
    slopes, cohs = np.concatenate(slopes), np.concatenate(cohs)
    assert abs(np.median(slopes) - m) <= 0.05
    assert np.median(cohs) > 0.9


def test_constant_epi_has_zero_coherence():
    s, c = local_depth_epi(np.full((7, 20), 0.3), P)
    assert np.all(c == 0.0)
    assert np.all(s == 0.0)


def test_zero_disparity_epi(rng):
    row = rng.random(30)
    epi = np.tile(row, (7, 1))
    s, c = local_depth_epi(epi, P)
    textured = c > 0.5
    assert textured.sum() > 10
    assert np.max(np.abs(s[textured])) < 1e-6


def test_mirror_negates_slope(rng):
    lf = scene(0.4, size=32)
    e = epi_h(lf, 16, 3).pixels
    s, c = local_depth_epi(e, P)
    sm, cm = local_depth_epi(e[:, ::-1], P)
    np.testing.assert_allclose(sm[::-1], -s, atol=1e-10)
    np.testing.assert_allclose(cm[::-1], c, atol=1e-10)


def test_affine_invariance(rng):
    e = random_epi(rng)
    s, c = local_depth_epi(e, P)
    s2, c2 = local_depth_epi(0.3 * e + 0.2, P)
    np.testing.assert_allclose(c2, c, atol=1e-9)
    np.testing.assert_allclose(s2, s, atol=1e-9)


def test_epi_accepts_epi_object_and_rejects_degenerate():
    e = Epi(np.zeros((1, 10, 1)), "horizontal", (0, 0))
    with pytest.raises(errors.DegenerateEpi):
        local_depth_epi(e, P)
    with pytest.raises(errors.DegenerateEpi):
        local_depth_epi(np.zeros((5, 1)), P)


def test_out_of_range_slopes_lose_coherence():
    lf = scene(1.0, size=32)
    narrow = StructureTensorParams(m_min=-0.5, m_max=0.5)
    s, c = local_depth_epi(epi_h(lf, 16, 3), narrow)
    assert np.all(s <= 0.5) and np.all(s >= -0.5)
    assert np.all(c[8:-8] == 0.0)


def test_local_depth_all_on_rendered_plane(rng):
    img = synthgen.generate(synthgen.constant_scene(0.0, size=40, views=1))[0].samples[0, 0]
    for m in (0.0, 1.0):
        lf = render_lightfield(img, np.full((40, 40), m), (7, 7))
        h, v = local_depth_all(lf, P)
        for est in (h, v):
            c = est.coherence.values[8:-8, 8:-8]
            d = est.depth.values[8:-8, 8:-8]
            textured = c > 0.9
            assert textured.mean() > 0.8
            assert abs(np.median(d[textured]) - m) < 0.05


def test_local_depth_all_needs_2x2(rng):
    with pytest.raises(errors.DegenerateGrid):
        local_depth_all(LightField(rng.random((1, 5, 8, 8, 1))), P)


def _est(depth, coh, src):
    return LocalEstimate(DepthMap(np.array(depth, float)), CoherenceMap(np.array(coh, float)), src)


def test_fuse_rules():
    h = _est([[1.0, 2.0, 3.0, 4.0]], [[0.9, 0.0, 0.85, 0.95]], "horizontal")
    v = _est([[7.0, 5.0, 3.0, 6.0]], [[0.4, 0.0, 0.85, 0.99]], "vertical")
    m, c = fuse_estimates(h, v, 0.8)
    assert m.values[0, 0] == 1.0 and c.values[0, 0] == 0.9
    assert not m.mask[0, 1] and c.values[0, 1] == 0.0
    assert m.values[0, 2] == 3.0
    assert m.values[0, 3] == 6.0 and c.values[0, 3] == 0.99


def test_fuse_selects_never_blends(rng):
    h = _est(rng.uniform(-2, 2, (8, 8)), rng.random((8, 8)), "horizontal")
    v = _est(rng.uniform(-2, 2, (8, 8)), rng.random((8, 8)), "vertical")
    m, c = fuse_estimates(h, v, 0.5)
    d = m.values[m.mask]
    assert np.all((d == h.depth.values[m.mask]) | (d == v.depth.values[m.mask]))
    assert np.all(c.values[m.mask] >= 0.5)
    assert np.all(c.values[~m.mask] == 0.0)


def test_fuse_shape_mismatch():
    h = _est(np.zeros((2, 2)), np.zeros((2, 2)), "horizontal")
    v = _est(np.zeros((2, 3)), np.zeros((2, 3)), "vertical")
    with pytest.raises(errors.DimensionMismatch):
        fuse_estimates(h, v)
