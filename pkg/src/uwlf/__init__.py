"""Underwater light-field toolkit: procedural scenes, water degradation,
disparity estimation, physics-based enhancement, metrics and persistence."""

__version__ = "0.1.0"

from .dataset import SceneBundle, load_scene, save_scene
from .degrade import PRESETS, DegradationParams, degrade, sample_preset, transmission
from .disparity import (
    DisparityConfig,
    build_cost_volume,
    estimate_disparity,
    fuse,
    smooth_disparity,
    wta_disparity,
)
from .enhance import (
    EnhanceConfig,
    StageReport,
    enhance_stage,
    estimate_background_light,
    estimate_beta,
    invert_model,
    progressive_enhance,
)
from .lightfield import (
    CameraRig,
    DisparityMap,
    LightField,
    depth_from_disparity,
    disparity_from_depth,
    epi,
    make_lightfield,
    recenter_zero_parallax,
    refocus,
    sai,
    warp_view,
)
from .metrics import MetricReport, evaluate, psnr, ssim, uciqe, uiqm
from .scene import Layer, SceneSpec, Texture, gen_scene, random_scene_spec, render_lf

__all__ = [
    "__version__",
    "SceneBundle",
    "load_scene",
    "save_scene",
    "PRESETS",
    "DegradationParams",
    "degrade",
    "sample_preset",
    "transmission",
    "DisparityConfig",
    "build_cost_volume",
    "estimate_disparity",
    "fuse",
    "smooth_disparity",
    "wta_disparity",
    "EnhanceConfig",
    "StageReport",
    "enhance_stage",
    "estimate_background_light",
    "estimate_beta",
    "invert_model",
    "progressive_enhance",
    "CameraRig",
    "DisparityMap",
    "LightField",
    "depth_from_disparity",
    "disparity_from_depth",
    "epi",
    "make_lightfield",
    "recenter_zero_parallax",
    "refocus",
    "sai",
    "warp_view",
    "MetricReport",
    "evaluate",
    "psnr",
    "ssim",
    "uciqe",
    "uiqm",
    "Layer",
    "SceneSpec",
    "Texture",
    "gen_scene",
    "random_scene_spec",
    "render_lf",
]
