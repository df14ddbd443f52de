import numpy as np
import pytest
from scipy.stats import spearmanr

from arcscan.core import ArsImage
from arcscan.datagen import (GenConfig, NoiseSpec, add_gaussian_noise, add_salt_pepper, apply_noise,
                             generate_dataset, generate_image, generate_images)
from arcscan.datagen import _speckle


def test_dataset_shape_and_determinism():
    cfg = GenConfig(images_per_class=3)
    a, la = generate_dataset(cfg)
    b, lb = generate_dataset(cfg)
    assert a.shape == (15, 180, 180)
    np.testing.assert_array_equal(la, np.repeat(np.arange(5), 3))
    assert a.tobytes() == b.tobytes() and np.array_equal(la, lb)
    c, _ = generate_dataset(cfg, workers=3)
    assert a.tobytes() == c.tobytes()
    other, _ = generate_dataset(GenConfig(images_per_class=3, seed=8))
    assert not np.array_equal(a, other)


def test_generate_images_wraps():
    imgs = generate_images(GenConfig(images_per_class=2))
    assert len(imgs) == 10 and isinstance(imgs[0], ArsImage) and int(imgs[-1].label) == 4


@pytest.mark.parametrize("kw", [dict(images_per_class=1), dict(pole_width=0.0), dict(speckle_looks=-1.0),
                                dict(pole_class_effect=1.0), dict(texture_waves=0), dict(speckle_grain=-1.0)])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        GenConfig(**kw)


def test_config_from_mapping():
    cfg = GenConfig.from_mapping({"seed": "3", "pole_peak": "12.5", "unrelated": "x"})
    assert cfg.seed == 3 and cfg.pole_peak == 12.5


def test_class_effect_and_pole_structure(surrogate):
    images, labels = surrogate
    cfg = GenConfig()
    m0 = images[labels == 0].mean()
    m4 = images[labels == 4].mean()
    assert abs(m4 / m0 - 1 - cfg.class_effect) <= 0.01
    pole = images[:, :, 85:95].mean(axis=(1, 2))
    equator = images[:, :, 0:10].mean(axis=(1, 2))
    assert np.all(pole > equator)
    rho = spearmanr(labels, images.mean(axis=(1, 2))).statistic
    assert rho > 0


@pytest.mark.parametrize("grain", [0.0, 2.0])
def test_speckle_moments(grain):
    rng = np.random.default_rng(3)
    looks = np.full((180, 180), 20.0)
    x = np.stack([_speckle(rng, looks, grain) for _ in range(100)])
    assert abs(x.mean() - 1) < 0.005
    assert abs(x.var() / (1 / 20) - 1) < 0.05
    neighbour = np.corrcoef(x[:, 60, 60], x[:, 60, 61])[0, 1]
    assert (neighbour > 0.7) if grain else (abs(neighbour) < 0.3)


def test_gaussian_noise(rng):
    img = generate_image(GenConfig(), 2, 0)
    np.testing.assert_allclose(add_gaussian_noise(img, 300.0, 1), img, rtol=1e-12, atol=0)
    noisy = add_gaussian_noise(img, 20.0, 5)
    snr = 10 * np.log10(np.mean(img ** 2) / np.mean((noisy - img) ** 2))
    assert abs(snr - 20) <= 0.5
    np.testing.assert_array_equal(noisy, add_gaussian_noise(img, 20.0, 5))
    # no clipping: low SNR produces negative intensities
    assert add_gaussian_noise(img, -5.0, 5).min() < 0
    with pytest.raises(ValueError):
        add_gaussian_noise(img, np.inf, 0)
    wrapped = add_gaussian_noise(ArsImage(img, 2), 20.0, 5)
    assert isinstance(wrapped, ArsImage) and int(wrapped.label) == 2


def test_salt_pepper():
    img = generate_image(GenConfig(), 1, 3)
    np.testing.assert_array_equal(add_salt_pepper(img, 0.0, 1), img)
    out = add_salt_pepper(img, 0.1, 1)
    changed = out != img
    assert changed.sum() == 3240
    assert set(np.unique(out[changed])) <= {img.min(), img.max()}
    assert (out[changed] == img.max()).sum() == 1620
    with pytest.raises(ValueError):
        add_salt_pepper(img, 1.0, 1)
    with pytest.raises(ValueError):
        add_salt_pepper(np.ones((180, 180)), 0.1, 1)


def test_noise_spec():
    assert NoiseSpec.parse("clean").is_clean
    spec = NoiseSpec.parse("gauss:20+sp:0.1")
    assert spec == NoiseSpec(20.0, 0.1) and spec.tag == "gauss20dB+sp0.1"
    assert NoiseSpec.parse("gauss:30").tag == "gauss30dB"
    with pytest.raises(ValueError):
        NoiseSpec.parse("pink:3")
    with pytest.raises(ValueError):
        NoiseSpec(salt_pepper_fraction=1.5)


def test_apply_noise_streams(small_dataset):
    images, _ = small_dataset
    sub = images[:4]
    assert apply_noise(sub, NoiseSpec(), 1) is sub
    a = apply_noise(sub, NoiseSpec(30.0, 0.05), 11)
    np.testing.assert_array_equal(a, apply_noise(sub, NoiseSpec(30.0, 0.05), 11))
    assert not np.array_equal(a, apply_noise(sub, NoiseSpec(30.0, 0.05), 12))
