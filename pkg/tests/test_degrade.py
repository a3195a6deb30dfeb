import math

import numpy as np
import pytest
from conftest import plane_spec

from uwlf.degrade import (
    PRESETS,
    DegradationParams,
    degrade,
    degrade_image,
    sample_preset,
    transmission,
)
from uwlf.errors import NegativeBeta, UnknownPreset, ViewCountMismatch
from uwlf.lightfield import CameraRig, make_lightfield
from uwlf.scene import render_lf


def test_transmission_values():
    T = transmission(np.array([0.0, 1.0, 2.0]), (math.log(2), 0.0, 1.0))
    assert T.shape == (3, 3)
    assert np.allclose(T[:, 0], [1.0, 0.5, 0.25], atol=1e-15)
    assert np.all(T[:, 1] == 1.0)
    assert np.allclose(T[:, 2], np.exp([0.0, -1.0, -2.0]), atol=1e-15)


def test_hand_computed_pixel():
    # T = 0.5, J = 0.8, A = 0.2: 0.5*0.8 + 0.5*0.2 = 0.5
    img = np.full((1, 1, 3), 0.8)
    p = DegradationParams((math.log(2),) * 3, (0.2, 0.2, 0.2))
    out = degrade_image(img, np.ones((1, 1)), p)
    assert np.allclose(out, 0.5, atol=1e-15)


def test_zero_beta_is_identity(rng):
    img = rng.random((8, 9, 3))
    p = DegradationParams((0.0, 0.0, 0.0), (0.3, 0.6, 0.9))
    assert np.array_equal(degrade_image(img, rng.uniform(1, 10, (8, 9)), p), img)


def test_far_pixels_converge_to_background_light(rng):
    img = rng.random((4, 4, 3))
    A = (0.1, 0.4, 0.7)
    p = DegradationParams((0.3, 0.2, 0.1), A)
    out = degrade_image(img, np.full((4, 4), 1e4), p)
    assert np.allclose(out, np.broadcast_to(A, out.shape), atol=1e-12)
    # intermediate depths approach A monotonically
    gaps = [np.abs(degrade_image(img, np.full((4, 4), D), p) - A).max() for D in (1, 5, 20, 80)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_blue_water_attenuates_red_most():
    spec = plane_spec(6.0, 24, kind="flat")
    spec.layers[0].texture.color_a = (0.8, 0.8, 0.8)
    spec.layers[0].texture.color_b = (0.8, 0.8, 0.8)
    lf, depths = render_lf(spec, CameraRig(baseline=0.01, resolution=24), (3, 3))
    for seed in range(20):
        p = sample_preset("blue", seed)
        assert p.beta[0] > p.beta[1] > p.beta[2]
        assert p.background_light[2] > p.background_light[1] > p.background_light[0]
        out = degrade(lf, depths, p)
        means = out.center_view.reshape(-1, 3).mean(axis=0)
        assert means[2] > means[1] > means[0]


def test_preset_orderings_hold():
    for seed in range(50):
        g = sample_preset("green", seed)
        assert g.beta[0] > g.beta[2] > g.beta[1] and g.background_light[1] == max(g.background_light)
        y = sample_preset("yellow", seed)
        assert y.beta[2] > y.beta[1] > y.beta[0] and y.background_light[0] == max(y.background_light)
        o = sample_preset("other-color", seed)
        assert o.beta[1] == max(o.beta)


def test_low_light_background_is_dark():
    lum = []
    for seed in range(1000):
        A = np.array(sample_preset("low-light", seed).background_light)
        lum.append(0.299 * A[0] + 0.587 * A[1] + 0.114 * A[2])
    assert np.mean(lum) < 0.25
    normal = [np.mean(sample_preset("blue", s).background_light) for s in range(200)]
    assert np.mean(lum) < np.mean(normal)


def test_sampling_is_deterministic():
    for name in PRESETS:
        assert sample_preset(name, 17, 0.01) == sample_preset(name, 17, 0.01)
    assert sample_preset("blue", 1) != sample_preset("blue", 2)


def test_noise_is_seeded_and_per_view(rng):
    lf = make_lightfield(np.full((3, 3, 16, 16, 3), 0.5))
    depths = np.full((3, 3, 16, 16), 2.0)
    p = DegradationParams((0.1, 0.1, 0.1), (0.5, 0.5, 0.5), noise_sigma=0.05, seed=4)
    a, b = degrade(lf, depths, p), degrade(lf, depths, p)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values[0, 0], a.values[0, 1])
    resid = a.values - 0.5
    assert abs(resid.std() - 0.05) < 0.005 and abs(resid.mean()) < 0.005
    c = degrade(lf, depths, DegradationParams(p.beta, p.background_light, 0.05, seed=5))
    assert not np.array_equal(a.values, c.values)


def test_output_is_clamped(rng):
    img = rng.random((16, 16, 3))
    p = DegradationParams((0.05, 0.05, 0.05), (0.95, 0.95, 0.95), noise_sigma=0.3, seed=1)
    out = degrade_image(img, np.ones((16, 16)), p)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_scaled_params():
    p = DegradationParams((0.2, 0.1, 0.05), (0.1, 0.5, 0.7), 0.01, 3)
    q = p.scaled(0.5)
    assert q.beta == (0.1, 0.05, 0.025) and q.background_light == p.background_light and q.seed == 3
    assert DegradationParams.from_dict(p.to_dict()) == p


def test_errors():
    with pytest.raises(NegativeBeta):
        DegradationParams((-0.1, 0.1, 0.1), (0.5, 0.5, 0.5))
    with pytest.raises(NegativeBeta):
        transmission(np.ones(2), (0.1, -1.0, 0.0))
    with pytest.raises(ValueError):
        DegradationParams((0.1, 0.1, 0.1), (1.5, 0.5, 0.5))
    with pytest.raises(UnknownPreset):
        sample_preset("murky", 0)
    lf = make_lightfield(np.zeros((3, 3, 8, 8, 3)))
    with pytest.raises(ViewCountMismatch):
        degrade(lf, np.ones((3, 1, 8, 8)), DegradationParams((0, 0, 0), (0, 0, 0)))
