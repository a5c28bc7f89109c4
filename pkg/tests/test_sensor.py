import numpy as np
import pytest

from fragilefp.core import BLOCK, block_dct, to_blocks
from fragilefp.errors import ParameterError, ShapeError
from fragilefp.sensor import SceneSpec, capture, capture_many, laplacian_scene, make_rng, new_camera, render_scene


def test_make_rng_deterministic():
    assert make_rng(3, 1).normal() == make_rng(3, 1).normal()
    assert make_rng(3, 1).normal() != make_rng(3, 2).normal()


def test_camera_determinism_and_scale():
    a, b = new_camera(seed=5), new_camera(seed=5)
    assert np.array_equal(a.prnu, b.prnu)
    assert abs(a.prnu.std() - 0.01) < 0.0005
    assert not a.prnu.flags.writeable


def test_degenerate_camera():
    assert not new_camera(0.0, seed=1, height=16, width=16).prnu.any()


def test_camera_validation():
    with pytest.raises(ParameterError):
        new_camera(-0.1)
    with pytest.raises(ParameterError):
        new_camera(height=0)


def test_flat_field():
    img = render_scene(SceneSpec("flat_field", 128, 16, 16), 0)
    assert (img == 128).all()


def test_laplacian_scene_scales():
    spec = SceneSpec("laplacian_synthetic", 128, 512, 512, scale_range=(1.0, 6.0))
    img, scales = laplacian_scene(spec, 3)
    blocks = to_blocks(block_dct(img)).reshape(-1, BLOCK, BLOCK)
    est = np.abs(blocks).mean(axis=0)
    ac = np.ones((BLOCK, BLOCK), bool)
    ac[0, 0] = False
    assert np.all(np.abs(est[ac] / scales[ac] - 1) < 0.1)


def test_textured_autocorrelation():
    img = render_scene(SceneSpec("textured", height=128, width=128, corr_length=4), 1)
    x = img - img.mean()
    lag1 = np.sum(x[:, 1:] * x[:, :-1]) / np.sum(x * x)
    assert lag1 > 0.5
    assert img.min() >= 0 and img.max() <= 255


@pytest.mark.parametrize("kw", [dict(kind="nope"), dict(intensity=0), dict(height=12), dict(scale_range=(2, 1)),
                                dict(corr_length=0)])
def test_scene_validation(kw):
    with pytest.raises(ParameterError):
        SceneSpec(**kw)


def test_scene_roundtrip_dict():
    spec = SceneSpec("textured", 100, 64, 32, (2.0, 3.0), 2.0)
    assert SceneSpec.from_dict(spec.to_dict()) == spec


def test_capture_noiseless_without_prnu():
    cam = new_camera(0.0, 0.0, height=16, width=16)
    scene = np.linspace(0, 255, 256).reshape(16, 16)
    assert np.array_equal(capture(cam, scene, 0), scene)


def test_dark_scene_only_noise():
    cam = new_camera(0.05, 2.0, seed=2, height=32, width=32)
    dark = capture(cam, np.zeros((32, 32)), 7)
    noise_only = capture(new_camera(0.0, 2.0, seed=2, height=32, width=32), np.zeros((32, 32)), 7)
    assert np.array_equal(dark, noise_only)


def test_flat_field_recovers_prnu():
    cam = new_camera(0.01, 0.0, seed=4, height=32, width=32)
    img = capture(cam, np.full((32, 32), 128.0), 0)
    assert np.allclose((img - 128) / 128, cam.prnu, atol=1e-12)


def test_capture_shape_mismatch():
    with pytest.raises(ShapeError):
        capture(new_camera(height=16, width=16), np.zeros((8, 8)), 0)


def test_capture_many_seeds():
    cam = new_camera(height=16, width=16)
    spec = SceneSpec(height=16, width=16)
    a = capture_many(cam, spec, [1, 2])
    b = capture_many(cam, spec, [1, 2])
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], a[1])
