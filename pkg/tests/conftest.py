import sys

import numpy as np
import pytest

from uwlf.lightfield import CameraRig
from uwlf.scene import Layer, SceneSpec, Texture

COLOR_A = (0.15, 0.25, 0.35)
COLOR_B = (0.85, 0.7, 0.45)


def texture(kind="value-noise", scale=6.0, a=COLOR_A, b=COLOR_B, **kw):
    return Texture(kind=kind, color_a=a, color_b=b, scale=scale, **kw)


def plane_spec(depth=10.0, size=32, kind="value-noise", scale=6.0, seed=3):
    return SceneSpec([Layer("plane", depth, texture(kind, scale))], size, size, seed)


def rig_with_disparity(d, depth, resolution):
    """Rig whose plane at ``depth`` has recentered disparity ``d`` px/view.

    Negative ``d`` uses absolute disparity 1 and a zero-parallax offset.
    """
    unit = 35.0 * resolution / 32.0
    absolute = d if d >= 0 else 1.0
    return CameraRig(focal_length=35.0, baseline=absolute * depth / unit, sensor_size=32.0,
                     resolution=resolution, zero_parallax=absolute - d)


def two_layer_spec(size=32, seed=5):
    fg = Layer("plane", 3.0, texture("checker", 4.0, a=(0.9, 0.2, 0.1), b=(0.1, 0.8, 0.3)),
               extent=(size * 0.3, size * 0.25, size * 0.7, size * 0.65))
    bg = Layer("plane", 8.0, texture("value-noise", 5.0))
    return SceneSpec([bg, fg], size, size, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
