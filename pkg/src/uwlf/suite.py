"""The standard evaluation suite: 20 seeded layered scenes under mixed water types.

Scene ``i`` uses seed ``i`` for both geometry and water parameters and
cycles through the presets in :data:`SUITE_PRESETS`.  Noise is weak
(``sigma = 0.002``, about half an 8-bit step) so that the suite measures
color cast and contrast loss rather than denoising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degrade import DegradationParams, degrade, sample_preset
from .lightfield import (
    CameraRig,
    DisparityMap,
    LightField,
    disparity_from_depth,
    rig_for_depth_range,
)
from .scene import (
    SceneSpec,
    random_scene_spec,
    render_lf,
    render_view,
    scene_depth_range,
    textured_mask,
)

SUITE_SIZE = 20
SUITE_PRESETS = ("blue", "green", "yellow", "other-color", "low-light")
SUITE_NOISE = 0.002
SUITE_ANGULAR = (5, 5)
SUITE_SPATIAL = 256


@dataclass
class SuiteScene:
    index: int
    preset: str
    spec: SceneSpec
    rig: CameraRig
    lf_clean: LightField
    depths: np.ndarray
    params: DegradationParams
    lf_degraded: LightField
    # recentered central disparity and the pixels whose layer carries texture
    gt_disparity: DisparityMap
    textured: np.ndarray


def suite_scene(index: int, noise_sigma: float = SUITE_NOISE, size: int = SUITE_SPATIAL,
                angular=SUITE_ANGULAR) -> SuiteScene:
    preset = SUITE_PRESETS[index % len(SUITE_PRESETS)]
    spec = random_scene_spec(index, size, size)
    lo, hi = scene_depth_range(spec)
    rig = rig_for_depth_range(lo, hi, size)
    lf, depths = render_lf(spec, rig, angular)
    params = sample_preset(preset, index, noise_sigma)
    degraded = degrade(lf, depths, params)
    vc, uc = (angular[0] - 1) // 2, (angular[1] - 1) // 2
    gt = disparity_from_depth(rig, depths[vc, uc])
    gt = DisparityMap(gt.values - rig.zero_parallax, gt.valid)
    _, _, layer_id = render_view(spec, rig, 0, 0)
    return SuiteScene(index, preset, spec, rig, lf, depths, params, degraded, gt, textured_mask(spec, layer_id))


def standard_suite(count: int = SUITE_SIZE, **kwargs):
    """Yield the suite scenes in order; each is rendered on demand."""
    for i in range(count):
        yield suite_scene(i, **kwargs)
