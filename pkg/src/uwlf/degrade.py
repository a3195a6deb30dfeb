"""Underwater image formation and water-type presets.

Per channel ``c``: ``I = T * J + (1 - T) * A`` with ``T = exp(-beta_c * D)``,
then optional additive Gaussian noise, then clamping to ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NegativeBeta, UnknownPreset, ViewCountMismatch
from .lightfield import LightField, make_lightfield


@dataclass(frozen=True)
class DegradationParams:
    beta: tuple[float, float, float]
    background_light: tuple[float, float, float]
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        light = tuple(float(a) for a in self.background_light)
        if len(beta) != 3 or len(light) != 3:
            raise ValueError("beta and background_light need one value per channel")
        if any(b < 0 or not np.isfinite(b) for b in beta):
            raise NegativeBeta(f"beta must be non-negative, got {beta}")
        if any(not 0.0 <= a <= 1.0 for a in light):
            raise ValueError(f"background light must lie in [0, 1], got {light}")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be non-negative")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "background_light", light)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        object.__setattr__(self, "seed", int(self.seed))

    def scaled(self, k: float) -> "DegradationParams":
        """Same water with every attenuation coefficient multiplied by ``k``."""
        return replace(self, beta=tuple(k * b for b in self.beta))

    def to_dict(self) -> dict:
        return {
            "beta": list(self.beta),
            "background_light": list(self.background_light),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationParams":
        return cls(
            beta=tuple(data["beta"]),
            background_light=tuple(data["background_light"]),
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class WaterPreset:
    """Sampling ranges for one color-deviation type.

    ``beta_ranges`` and ``light_ranges`` are ``(lo, hi)`` per RGB channel;
    ``light_scale`` multiplies the sampled background light (low-light).
    """

    name: str
    beta_ranges: tuple
    light_ranges: tuple
    light_scale: tuple[float, float] = (1.0, 1.0)


# beta per unit scene depth; scenes span roughly 2..9 units
PRESETS = {
    "blue": WaterPreset(
        "blue",
        beta_ranges=((0.30, 0.45), (0.10, 0.18), (0.03, 0.08)),
        light_ranges=((0.02, 0.12), (0.30, 0.45), (0.50, 0.75)),
    ),
    "green": WaterPreset(
        "green",
        beta_ranges=((0.30, 0.45), (0.03, 0.08), (0.12, 0.22)),
        light_ranges=((0.05, 0.15), (0.45, 0.70), (0.25, 0.40)),
    ),
    "yellow": WaterPreset(
        "yellow",
        beta_ranges=((0.03, 0.08), (0.10, 0.18), (0.30, 0.45)),
        light_ranges=((0.50, 0.70), (0.42, 0.49), (0.05, 0.20)),
    ),
    "other-color": WaterPreset(
        "other-color",
        beta_ranges=((0.03, 0.08), (0.30, 0.45), (0.12, 0.22)),
        light_ranges=((0.45, 0.65), (0.10, 0.25), (0.30, 0.44)),
    ),
    "low-light": WaterPreset(
        "low-light",
        beta_ranges=((0.25, 0.40), (0.10, 0.18), (0.05, 0.12)),
        light_ranges=((0.10, 0.25), (0.40, 0.60), (0.60, 0.85)),
        light_scale=(0.10, 0.35),
    ),
}


def transmission(depth, beta) -> np.ndarray:
    """Per-channel transmission ``exp(-beta_c * D)``, shape ``depth.shape + (3,)``."""
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta < 0):
        raise NegativeBeta(f"beta must be non-negative, got {beta}")
    depth = np.asarray(depth, dtype=np.float64)
    return np.exp(-depth[..., None] * beta)


def degrade_image(img, depth, params: DegradationParams, noise_key=()) -> np.ndarray:
    """Degrade one view; ``noise_key`` extends the seed so views get independent noise."""
    T = transmission(depth, params.beta)
    A = np.asarray(params.background_light)
    out = T * img + (1.0 - T) * A
    if params.noise_sigma > 0:
        rng = np.random.default_rng([params.seed % 2**64, *noise_key])
        out = out + rng.normal(0.0, params.noise_sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0)


def degrade(lf_clean: LightField, depths, params: DegradationParams) -> LightField:
    """Apply the formation model to every view with that view's own depth map."""
    depths = np.asarray(depths)
    if depths.shape != lf_clean.values.shape[:4]:
        raise ViewCountMismatch(
            f"need one depth map per view: depths {depths.shape} vs views {lf_clean.values.shape[:4]}"
        )
    out = np.empty_like(lf_clean.values)
    for v, u, _, _ in lf_clean.offsets():
        out[v, u] = degrade_image(lf_clean.values[v, u], depths[v, u], params, noise_key=(v, u))
    lf = make_lightfield(out)
    lf.valid = None if lf_clean.valid is None else lf_clean.valid.copy()
    return lf


def sample_preset(preset, seed: int, noise_sigma: float = 0.0) -> DegradationParams:
    """Draw water parameters from a preset; channel orderings hold by construction."""
    if isinstance(preset, str):
        if preset not in PRESETS:
            raise UnknownPreset(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        preset = PRESETS[preset]
    rng = np.random.default_rng([int(seed) % 2**64, 0x57A7E5])
    beta = tuple(float(rng.uniform(lo, hi)) for lo, hi in preset.beta_ranges)
    light = np.array([rng.uniform(lo, hi) for lo, hi in preset.light_ranges])
    light = light * rng.uniform(*preset.light_scale)
    return DegradationParams(beta, tuple(float(a) for a in light), noise_sigma, int(seed))
