import json

import numpy as np
import pytest

from lfdepth import errors
from lfdepth.lightfield import (CoherenceMap, DepthMap, LightField, center_index, epi_h, epi_v,
                                load_depthmap, load_lightfield, read_manifest, read_pfm,
                                save_depthmap, save_lightfield, subaperture, write_pfm)
from lfdepth.renderer import TriangularKernel, render_lightfield


def random_lf(rng, S=3, T=3, Y=6, X=5, C=3):
    return LightField(rng.random((S, T, Y, X, C)))


def test_dims_and_center(rng):
    lf = random_lf(rng, 7, 7, 6, 5)
    assert (lf.S, lf.T, lf.Y, lf.X, lf.C) == (7, 7, 6, 5, 3)
    assert lf.center == (3, 3)
    assert center_index(4) == 2
    assert not lf.samples.flags.writeable


@pytest.mark.parametrize("shape", [(2, 2, 1, 4, 3), (2, 2, 4, 4, 2), (2, 2, 4), (0, 2, 4, 4, 1)])
def test_rejects_bad_dims(shape):
    with pytest.raises(errors.DimensionMismatch):
        LightField(np.zeros(shape))


def test_rejects_out_of_range_and_nan():
    a = np.full((1, 1, 2, 2, 1), 0.5)
    a[0, 0, 0, 0, 0] = 1.5
    with pytest.raises(ValueError):
        LightField(a)
    a[0, 0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        LightField(a)


def test_subaperture_matches_samples(rng):
    lf = random_lf(rng, 7, 7)
    for s, t in [(0, 0), (3, 3), (6, 2)]:
        np.testing.assert_array_equal(subaperture(lf, s, t).pixels, lf.samples[s, t])
    np.testing.assert_array_equal(subaperture(lf, 3, 3).pixels, lf.center_image().pixels)
    with pytest.raises(errors.IndexOutOfRange):
        subaperture(lf, 7, 0)


def test_constant_field_subaperture():
    lf = LightField(np.full((3, 3, 4, 4, 1), 0.5))
    assert np.all(subaperture(lf, 1, 2).pixels == 0.5)


def test_epi_rows_match_subapertures(rng):
    lf = random_lf(rng, 5, 7, 6, 8)
    e = epi_h(lf, 2, 1)
    assert e.pixels.shape == (7, 8, 3)
    for t in range(lf.T):
        np.testing.assert_array_equal(e.pixels[t], subaperture(lf, 1, t).pixels[2])
    v = epi_v(lf, 3, 4)
    assert v.pixels.shape == (5, 6, 3)
    for s in range(lf.S):
        np.testing.assert_array_equal(v.pixels[s], subaperture(lf, s, 4).pixels[:, 3])
    with pytest.raises(errors.IndexOutOfRange):
        epi_h(lf, 6, 0)
    with pytest.raises(errors.IndexOutOfRange):
        epi_v(lf, 0, 7)


def test_epi_shape_contract():
    lf = LightField(np.zeros((7, 7, 20, 30, 3)))
    assert epi_h(lf, 0, 3).pixels.shape == (7, 30, 3)
    assert epi_v(lf, 0, 3).pixels.shape == (7, 20, 3)


def test_epi_constant_columns_at_zero_disparity(rng):
    lf = render_lightfield(rng.random((8, 8, 3)), np.zeros((8, 8)), (5, 5))
    e = epi_h(lf, 4, 2).pixels
    assert np.all(e == e[:1])


def test_bright_pixel_epi_moves_one_pixel_per_view():
    img = np.zeros((9, 15, 1))
    img[4, 7] = 1.0
    lf = render_lightfield(img, np.ones((9, 15)), (5, 5), TriangularKernel(0.0))
    e = epi_h(lf, 4, 2).pixels[..., 0]
    for t in range(5):
        expected = np.zeros(15)
        expected[7 + (t - 2)] = 1.0
        np.testing.assert_array_equal(e[t], expected)
    v = epi_v(lf, 7, 2).pixels[..., 0]
    for s in range(5):
        assert np.argmax(v[s]) == 4 + (s - 2)


def test_lightfield_round_trip(tmp_path, rng):
    lf = random_lf(rng, 3, 2, 5, 4, 3)
    for bits, q in ((16, 65535.0), (8, 255.0)):
        save_lightfield(lf, tmp_path / f"b{bits}", bits)
        back = load_lightfield(tmp_path / f"b{bits}")
        assert back.samples.shape == lf.samples.shape
        assert np.max(np.abs(back.samples - lf.samples)) <= 0.5 / q + 1e-12
    gray = random_lf(rng, 2, 2, 4, 4, 1)
    save_lightfield(gray, tmp_path / "g")
    assert load_lightfield(tmp_path / "g").C == 1


def test_single_view_is_loadable(tmp_path, rng):
    lf = random_lf(rng, 1, 1, 4, 4, 3)
    save_lightfield(lf, tmp_path)
    assert (load_lightfield(tmp_path).S, load_lightfield(tmp_path).T) == (1, 1)


def test_missing_view(tmp_path, rng):
    save_lightfield(random_lf(rng, 3, 3, 4, 4), tmp_path)
    (tmp_path / "view_2_2.png").unlink()
    with pytest.raises(errors.MissingView):
        load_lightfield(tmp_path)


def test_missing_and_malformed_manifest(tmp_path, rng):
    with pytest.raises(errors.MissingView):
        load_lightfield(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"angular_rows": 2}))
    with pytest.raises(errors.MalformedManifest):
        read_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(errors.MalformedManifest):
        read_manifest(tmp_path)


def test_view_dimension_mismatch(tmp_path, rng):
    save_lightfield(random_lf(rng, 2, 2, 4, 4), tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    man["width"] = 5
    (tmp_path / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(errors.DimensionMismatch):
        load_lightfield(tmp_path)


def test_corrupt_view(tmp_path, rng):
    save_lightfield(random_lf(rng, 2, 2, 4, 4), tmp_path)
    (tmp_path / "view_0_1.png").write_bytes(b"not a png")
    with pytest.raises(errors.CorruptImage):
        load_lightfield(tmp_path)


def test_depthmap_round_trip(tmp_path, rng):
    z = DepthMap(np.zeros((4, 6)))
    save_depthmap(z, tmp_path / "z.pfm")
    back = load_depthmap(tmp_path / "z.pfm")
    assert back.shape == (4, 6) and np.all(back.values == 0)

    vals = rng.uniform(-2, 2, (5, 7)).astype(np.float32).astype(np.float64)
    vals[1, 3] = np.nan
    dm = DepthMap(vals)
    save_depthmap(dm, tmp_path / "d.pfm")
    back = load_depthmap(tmp_path / "d.pfm")
    np.testing.assert_array_equal(back.mask, dm.mask)
    assert not back.mask[1, 3]
    np.testing.assert_array_equal(back.values[dm.mask], dm.values[dm.mask])


def test_pfm_orientation_and_rgb(tmp_path):
    a = np.arange(12, dtype=np.float32).reshape(3, 4)
    write_pfm(tmp_path / "a.pfm", a)
    raw = (tmp_path / "a.pfm").read_bytes()
    assert raw.startswith(b"Pf\n4 3\n-1.0\n")
    # first stored row is the bottom image row
    assert np.frombuffer(raw[-48:-32], "<f4").tolist() == [8, 9, 10, 11]
    np.testing.assert_array_equal(read_pfm(tmp_path / "a.pfm"), a)
    rgb = np.random.default_rng(0).random((2, 3, 3)).astype(np.float32)
    write_pfm(tmp_path / "rgb.pfm", rgb)
    np.testing.assert_array_equal(read_pfm(tmp_path / "rgb.pfm"), rgb)


def test_truncated_and_garbage_pfm(tmp_path):
    save_depthmap(DepthMap(np.ones((4, 4))), tmp_path / "d.pfm")
    raw = (tmp_path / "d.pfm").read_bytes()
    (tmp_path / "t.pfm").write_bytes(raw[:-5])
    with pytest.raises(errors.MalformedPfm):
        load_depthmap(tmp_path / "t.pfm")
    (tmp_path / "g.pfm").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(errors.MalformedPfm):
        load_depthmap(tmp_path / "g.pfm")
    (tmp_path / "h.pfm").write_bytes(b"Pf\nx y\n-1.0\n")
    with pytest.raises(errors.MalformedPfm):
        load_depthmap(tmp_path / "h.pfm")


def test_depthmap_mask_semantics():
    v = np.array([[1.0, np.nan], [2.0, 3.0]])
    dm = DepthMap(v)
    assert dm.mask.tolist() == [[True, False], [True, True]]
    assert not dm.fully_defined
    dm2 = DepthMap(np.ones((2, 2)), np.array([[True, False], [True, True]]))
    assert np.isnan(dm2.values[0, 1])
    with pytest.raises(ValueError):
        CoherenceMap(np.full((2, 2), 1.5))
