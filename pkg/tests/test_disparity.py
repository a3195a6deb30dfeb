import numpy as np
import pytest
from conftest import plane_spec, rig_with_disparity, two_layer_spec
from oracles import brute_cost, brute_wta

from uwlf.degrade import DegradationParams, degrade
from uwlf.disparity import (
    SENTINEL,
    CostVolume,
    DisparityConfig,
    SubLF,
    build_cost_volume,
    estimate_disparity,
    fuse,
    hypothesis_grid,
    make_sublf,
    smooth_disparity,
    wta_disparity,
)
from uwlf.errors import EmptyHypotheses, EmptyInput, ShapeMismatch
from uwlf.lightfield import CameraRig, DisparityMap, make_lightfield
from uwlf.metrics import disparity_error
from uwlf.scene import render_lf
from uwlf.suite import suite_scene


def small_lf(size=12, seed=5):
    spec = two_layer_spec(size, seed)
    rig = CameraRig(focal_length=35.0, baseline=0.2, sensor_size=32.0, resolution=size, zero_parallax=0.6)
    lf, _ = render_lf(spec, rig, (5, 5))
    return lf


@pytest.mark.parametrize("sub_id", ["horizontal-row", "vertical-column", "main-diagonal", "anti-diagonal"])
def test_cost_volume_matches_brute_force(sub_id):
    lf = small_lf()
    sub = make_sublf(sub_id, lf.angular_shape)
    hyps = np.array([-1.7, -0.5, 0.0, 0.3, 1.0, 2.25, 6.4])
    cv = build_cost_volume(lf, sub, hyps)
    for k, h in enumerate(hyps):
        assert np.max(np.abs(cv.cost[k] - brute_cost(lf, sub.views, h))) <= 1e-12


def test_wta_matches_brute_force_exactly(rng):
    hyps = hypothesis_grid(-1.0, 1.0, 0.25)
    # quantized costs make ties common, including ties symmetric about 0
    cost = rng.integers(0, 4, size=(hyps.size, 10, 10)).astype(float) / 4.0
    cost[:, 0, 0] = 1.0
    cost[[3, 5], 0, 1] = 0.0
    cost[:, 0, 1] = np.where(np.isin(np.arange(hyps.size), [3, 5]), 0.0, 1.0)
    cost[:, 0, 2] = np.where(np.isin(np.arange(hyps.size), [0, 8]), 0.0, 1.0)
    cost[:, 0, 3] = SENTINEL
    cv = CostVolume(hyps, cost)
    for tau, exclusion in [(0.2, 0.5), (1.0, 0.0)]:
        disp, rel = wta_disparity(cv, tau, exclusion)
        bd, br = brute_wta(hyps, cost, tau, exclusion)
        assert np.array_equal(disp.values, bd)
        assert np.array_equal(rel, br)
    disp, rel = wta_disparity(cv)
    assert disp.values[0, 0] == 0.0 and rel[0, 0] == 0.0
    assert disp.values[0, 1] == -0.25
    assert disp.values[0, 2] == -1.0
    assert not disp.valid[0, 3] and rel[0, 3] == 0.0


def test_wta_on_real_cost_volume_matches_brute_force():
    lf = small_lf(10)
    cv = build_cost_volume(lf, make_sublf("horizontal-row", lf.angular_shape), hypothesis_grid(-2, 2, 0.5))
    disp, rel = wta_disparity(cv)
    bd, br = brute_wta(cv.hypotheses, cv.cost, 0.2, 0.5)
    assert np.array_equal(disp.values, bd) and np.array_equal(rel, br)


def test_parabola_refinement_recovers_vertex():
    hyps = hypothesis_grid(0.0, 3.0, 0.1)
    cost = ((hyps - 1.23) ** 2)[:, None, None] * np.ones((1, 2, 2))
    disp, rel = wta_disparity(CostVolume(hyps, cost))
    assert np.allclose(disp.values, 1.23, atol=1e-9)
    assert np.all(rel > 0.99)


def test_flat_costs_give_zero_disparity_and_reliability():
    cv = CostVolume(hypothesis_grid(-2, 2, 0.1), np.full((41, 4, 4), 0.3))
    disp, rel = wta_disparity(cv)
    assert np.all(disp.values == 0.0) and np.all(rel == 0.0)


def test_constant_lightfield_ties_resolve_to_zero():
    lf = make_lightfield(np.full((5, 5, 12, 12, 3), 0.4))
    disp, rel = estimate_disparity(lf, DisparityConfig(smooth=False))
    assert np.all(disp.values == 0.0) and np.all(rel == 0.0)


def test_single_view_sublf_is_sentinel():
    lf = small_lf(8)
    cv = build_cost_volume(lf, SubLF("lonely", ((2, 2),)), hypothesis_grid(-1, 1, 0.5))
    assert np.all(cv.cost == SENTINEL)
    disp, rel = wta_disparity(cv)
    assert not disp.valid.any() and np.all(rel == 0)


@pytest.mark.parametrize("d", [1.5, -0.7])
def test_textured_plane_recovers_disparity(d):
    size = 48
    lf, _ = render_lf(plane_spec(10.0, size, scale=4.0), rig_with_disparity(d, 10.0, size), (5, 5))
    sub = make_sublf("horizontal-row", lf.angular_shape)
    cv = build_cost_volume(lf, sub, hypothesis_grid(-4, 4, 0.1))
    inner = (slice(10, -10), slice(10, -10))
    argmin = cv.hypotheses[np.argmin(cv.cost, axis=0)]
    assert np.median(argmin[inner]) == pytest.approx(d, abs=1e-9)
    disp, _ = estimate_disparity(lf)
    assert np.mean(np.abs(disp.values[inner] - d)) <= 0.05


def test_clean_plane_beats_noisy_degraded_plane():
    size, d = 48, 1.0
    lf, depths = render_lf(plane_spec(6.0, size, scale=4.0), rig_with_disparity(d, 6.0, size), (5, 5))
    gt = DisparityMap(np.full((size, size), d))
    clean = disparity_error(estimate_disparity(lf)[0], gt)[0]
    p = DegradationParams((0.35, 0.14, 0.05), (0.07, 0.38, 0.62), noise_sigma=0.01, seed=2)
    noisy = disparity_error(estimate_disparity(degrade(lf, depths, p))[0], gt)[0]
    assert clean <= 0.1
    assert noisy > clean


def test_zero_baseline_gives_zero_disparity():
    # identical textured views are only consistent at d = 0
    spec = plane_spec(10.0, 24)
    lf, _ = render_lf(spec, CameraRig(baseline=0.0, resolution=24), (5, 5))
    disp, _ = estimate_disparity(lf, DisparityConfig(smooth=False))
    assert np.max(np.abs(disp.values)) <= 1e-9
    # without texture there is no signal at all
    flat, _ = render_lf(plane_spec(10.0, 24, kind="flat"), CameraRig(baseline=0.0, resolution=24), (5, 5))
    _, rel = estimate_disparity(flat, DisparityConfig(smooth=False))
    assert np.all(rel <= 1e-12)


def test_fuse_picks_most_reliable():
    a = DisparityMap(np.full((2, 2), 1.0))
    b = DisparityMap(np.full((2, 2), 2.0), np.array([[True, False], [True, True]]))
    ra = np.array([[0.5, 0.2], [0.9, 0.4]])
    rb = np.array([[0.5, 0.3], [0.1, 0.8]])
    out, rel = fuse([(a, ra), (b, rb)])
    assert np.array_equal(out.values, [[1.0, 2.0], [1.0, 2.0]])
    assert np.array_equal(out.valid, [[True, False], [True, True]])
    assert np.array_equal(rel, np.maximum(ra, rb))
    with pytest.raises(EmptyInput):
        fuse([])
    with pytest.raises(ShapeMismatch):
        fuse([(a, ra), (DisparityMap(np.zeros((3, 3))), np.zeros((3, 3)))])


def test_smoothing_removes_outliers_and_fills_holes(rng):
    values = np.full((20, 20), 0.8)
    spikes = rng.choice(400, 12, replace=False)
    values.flat[spikes] = 3.5
    valid = np.ones((20, 20), dtype=bool)
    valid[5:8, 5:8] = False
    out = smooth_disparity(DisparityMap(values, valid), np.full((20, 20, 3), 0.5))
    assert np.all(out.values == 0.8) and out.valid.all()


def test_smoothing_respects_guide_edges():
    guide = np.zeros((16, 16, 3))
    guide[:, 8:] = 1.0
    values = np.where(np.arange(16)[None, :] < 8, 0.5, 2.0) * np.ones((16, 1))
    values[3, 3] = 2.0
    values[10, 12] = 0.5
    out = smooth_disparity(DisparityMap(values), guide, radius=3, sigma=0.1)
    assert np.array_equal(out.values, np.where(np.arange(16)[None, :] < 8, 0.5, 2.0) * np.ones((16, 1)))


def test_smoothing_errors():
    with pytest.raises(EmptyInput):
        smooth_disparity(DisparityMap(np.zeros((4, 4)), np.zeros((4, 4), dtype=bool)), np.zeros((4, 4, 3)))
    with pytest.raises(ShapeMismatch):
        smooth_disparity(DisparityMap(np.zeros((4, 4))), np.zeros((5, 4, 3)))


def test_hypothesis_grid():
    g = hypothesis_grid(-4, 4, 0.1)
    assert g.size == 81 and g[0] == -4.0 and g[-1] == 4.0 and 0.0 in g
    with pytest.raises(EmptyHypotheses):
        hypothesis_grid(1, 0, 0.1)
    with pytest.raises(EmptyHypotheses):
        build_cost_volume(small_lf(8), make_sublf("horizontal-row", (5, 5)), [])


def test_fusion_tracks_best_sublf_on_suite():
    cfg = DisparityConfig(smooth=False)
    hyps = cfg.hypotheses()
    for i in range(3):
        s = suite_scene(i, size=64)
        mask = s.textured
        fused = disparity_error(estimate_disparity(s.lf_clean, cfg)[0], s.gt_disparity, mask)[0]
        singles = []
        for sub_id in cfg.sublf_ids:
            cv = build_cost_volume(s.lf_clean, make_sublf(sub_id, s.lf_clean.angular_shape), hyps)
            singles.append(disparity_error(wta_disparity(cv)[0], s.gt_disparity, mask)[0])
        assert fused <= min(singles) + 0.02
