"""Procedural layered scenes and their light-field rendering.

Every layer is a surface parameterised by central-view pixel coordinates
``(y, x)``: it has a depth function, a coverage region and a procedural
texture, all evaluable at fractional positions.  A view at angular offset
``(dv, du)`` shows, at pixel ``p``, the layer point ``q`` solving
``q + (dv, du) * disparity(q) = p``; layers are composited back to front.

Value noise uses a stateless integer hash of ``(seed, layer, octave, lattice
y, lattice x)`` so a texel never depends on evaluation order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptySpec
from .lightfield import CameraRig, make_lightfield

GEOMETRIES = ("plane", "slanted", "sphere_cap")
TEXTURES = ("checker", "value-noise", "gradient", "flat")

# curvature of the cap profile: a spherical cap shallower than a hemisphere,
# so the depth slope stays finite at the rim
CAP_KAPPA = 0.75
FIXED_POINT_ITERS = 30

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass
class Texture:
    kind: str = "value-noise"
    color_a: tuple[float, float, float] = (0.2, 0.3, 0.4)
    color_b: tuple[float, float, float] = (0.8, 0.7, 0.5)
    # checker period, value-noise lattice spacing, or gradient length (px)
    scale: float = 10.0
    octaves: int = 3
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in TEXTURES:
            raise ValueError(f"unknown texture kind {self.kind!r}; expected one of {TEXTURES}")
        self.color_a = tuple(float(c) for c in self.color_a)
        self.color_b = tuple(float(c) for c in self.color_b)
        if len(self.color_a) != 3 or len(self.color_b) != 3:
            raise ValueError("texture colors must have 3 channels")
        if not all(0.0 <= c <= 1.0 for c in self.color_a + self.color_b):
            raise ValueError("texture colors must lie in [0, 1]")
        if self.scale <= 0:
            raise ValueError("texture scale must be positive")

    @property
    def textured(self) -> bool:
        return self.kind != "flat" and self.color_a != self.color_b


@dataclass
class Layer:
    """One surface of a layered scene.

    ``depth`` is the plane depth, the slanted plane's depth at ``center``, or
    the cap's apex depth; ``depth_rim`` is the cap's rim depth.  ``extent``
    ``(y0, x0, y1, x1)`` restricts planes to a rectangle; ``None`` is
    unbounded.  Caps cover the disk of ``radius`` around ``center``.
    """

    geometry: str = "plane"
    depth: float = 10.0
    texture: Texture = field(default_factory=Texture)
    slope: tuple[float, float] = (0.0, 0.0)
    center: tuple[float, float] | None = None
    radius: float = 0.0
    depth_rim: float | None = None
    extent: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}; expected one of {GEOMETRIES}")
        if isinstance(self.texture, dict):
            self.texture = Texture(**self.texture)
        if not self.depth > 0:
            raise ValueError("layer depth must be strictly positive")
        if self.geometry == "sphere_cap":
            if self.center is None or self.radius <= 0:
                raise ValueError("sphere_cap needs center and positive radius")
            if self.depth_rim is None:
                self.depth_rim = self.depth
            if self.depth_rim < self.depth:
                raise ValueError("sphere_cap rim must not be nearer than its apex")
        if self.center is not None:
            self.center = tuple(float(c) for c in self.center)
        if self.extent is not None:
            self.extent = tuple(float(c) for c in self.extent)
        self.slope = tuple(float(s) for s in self.slope)


@dataclass
class SceneSpec:
    layers: list[Layer]
    height: int = 256
    width: int = 256
    seed: int = 0
    name: str = "scene"

    def __post_init__(self):
        self.layers = [Layer(**lay) if isinstance(lay, dict) else lay for lay in self.layers]
        if self.height <= 0 or self.width <= 0:
            raise ValueError("scene size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data)
        layers = []
        for lay in data.pop("layers", []):
            lay = dict(lay)
            if "texture" in lay and isinstance(lay["texture"], dict):
                lay["texture"] = Texture(**lay["texture"])
            for key in ("slope", "center", "extent"):
                if lay.get(key) is not None:
                    lay[key] = tuple(lay[key])
            layers.append(Layer(**lay))
        return cls(layers=layers, **data)


@dataclass
class CenterScene:
    texture: np.ndarray
    depth: np.ndarray
    layer_id: np.ndarray


# -- geometry -----------------------------------------------------------------

def _anchor(layer: Layer, spec: SceneSpec) -> tuple[float, float]:
    if layer.center is not None:
        return layer.center
    return (spec.height - 1) / 2.0, (spec.width - 1) / 2.0


def layer_depth(layer: Layer, spec: SceneSpec, y, x) -> np.ndarray:
    """Depth of ``layer`` at fractional centre-view positions (extended past coverage)."""
    if layer.geometry == "plane":
        return np.full(np.broadcast(y, x).shape, float(layer.depth))
    cy, cx = _anchor(layer, spec)
    if layer.geometry == "slanted":
        gy, gx = layer.slope
        return layer.depth + gy * (y - cy) + gx * (x - cx)
    rho2 = np.minimum(((y - cy) ** 2 + (x - cx) ** 2) / layer.radius**2, 1.0)
    sag = (1.0 - np.sqrt(1.0 - CAP_KAPPA * rho2)) / (1.0 - np.sqrt(1.0 - CAP_KAPPA))
    return layer.depth + (layer.depth_rim - layer.depth) * sag


def layer_coverage(layer: Layer, spec: SceneSpec, y, x) -> np.ndarray:
    shape = np.broadcast(y, x).shape
    if layer.geometry == "sphere_cap":
        cy, cx = layer.center
        return (y - cy) ** 2 + (x - cx) ** 2 < layer.radius**2
    if layer.extent is None:
        return np.ones(shape, dtype=bool)
    y0, x0, y1, x1 = layer.extent
    return (y >= y0) & (y < y1) & (x >= x0) & (x < x1)


def depth_bounds(layer: Layer, spec: SceneSpec) -> tuple[float, float]:
    """Depth range of the layer over the image plus a margin for parallax."""
    if layer.geometry == "plane":
        return layer.depth, layer.depth
    if layer.geometry == "sphere_cap":
        return layer.depth, layer.depth_rim
    margin = 16.0
    ys = np.array([-margin, spec.height - 1 + margin])
    xs = np.array([-margin, spec.width - 1 + margin])
    if layer.extent is not None:
        y0, x0, y1, x1 = layer.extent
        ys = np.clip(ys, y0 - margin, y1 + margin)
        xs = np.clip(xs, x0 - margin, x1 + margin)
    corners = layer_depth(layer, spec, ys[:, None], xs[None, :])
    return float(corners.min()), float(corners.max())


# -- textures -----------------------------------------------------------------

def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, stream: int, iy: np.ndarray, ix: np.ndarray) -> np.ndarray:
    """Counter-based uniform values in ``[0, 1)`` for integer lattice points."""
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(0x9E3779B97F4A7C15 * (stream + 1) & 0xFFFFFFFFFFFFFFFF))
        z = key ^ (np.asarray(iy, dtype=np.int64).astype(np.uint64) * np.uint64(0xD1B54A32D192ED03))
        z = _mix64(z)
        z = z ^ (np.asarray(ix, dtype=np.int64).astype(np.uint64) * np.uint64(0xABC98388FB8FAC03))
        z = _mix64(z)
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(seed: int, stream: int, y, x, spacing: float, octaves: int) -> np.ndarray:
    """Fractal value noise in ``[0, 1]``.

    Lattice values from :func:`hash_uniform`, blended with smoothstep
    weights; octave ``o`` uses spacing ``spacing / 2**o`` and amplitude
    ``2**-o``.
    """
    total = np.zeros(np.broadcast(y, x).shape)
    norm = 0.0
    for o in range(octaves):
        s = spacing / 2.0**o
        gy, gx = y / s, x / s
        iy, ix = np.floor(gy), np.floor(gx)
        ty, tx = gy - iy, gx - ix
        ty = ty * ty * (3.0 - 2.0 * ty)
        tx = tx * tx * (3.0 - 2.0 * tx)
        iy = iy.astype(np.int64)
        ix = ix.astype(np.int64)
        st = stream * 16 + o
        v00 = hash_uniform(seed, st, iy, ix)
        v01 = hash_uniform(seed, st, iy, ix + 1)
        v10 = hash_uniform(seed, st, iy + 1, ix)
        v11 = hash_uniform(seed, st, iy + 1, ix + 1)
        val = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)
        amp = 0.5**o
        total += amp * val
        norm += amp
    return total / norm


def texture_value(tex: Texture, seed: int, stream: int, y, x) -> np.ndarray:
    """RGB texture at fractional positions, shape ``broadcast(y, x) + (3,)``."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if tex.kind == "flat":
        t = np.zeros(np.broadcast(y, x).shape)
    elif tex.kind == "checker":
        s = np.sin(np.pi * x / tex.scale) * np.sin(np.pi * y / tex.scale)
        t = 0.5 + 0.5 * np.tanh(2.0 * s) / np.tanh(2.0)
    elif tex.kind == "gradient":
        proj = x * np.cos(tex.angle) + y * np.sin(tex.angle)
        t = np.mod(proj / tex.scale, 2.0)
        t = np.where(t > 1.0, 2.0 - t, t)
    else:
        n = value_noise(seed, stream, y, x, tex.scale, tex.octaves)
        t = np.clip(0.5 + 2.0 * (n - 0.5), 0.0, 1.0)
    a = np.asarray(tex.color_a)
    b = np.asarray(tex.color_b)
    return a + (b - a) * t[..., None]


# -- scene generation and rendering ---------------------------------------------

def ordered_layers(spec: SceneSpec) -> list[int]:
    """Layer indices back to front (farthest minimum depth first)."""
    mins = [depth_bounds(lay, spec)[0] for lay in spec.layers]
    return sorted(range(len(spec.layers)), key=lambda i: (-mins[i], i))


def _validate(spec: SceneSpec):
    if not spec.layers:
        raise EmptySpec("scene spec has no layers")
    back = spec.layers[ordered_layers(spec)[0]]
    if back.geometry == "sphere_cap" or back.extent is not None:
        raise EmptySpec("the farthest layer must be an unbounded background plane")
    for lay in spec.layers:
        lo, _ = depth_bounds(lay, spec)
        if lo <= 0:
            raise EmptySpec("layer depth becomes non-positive inside the image")


def render_view(spec: SceneSpec, rig: CameraRig, dv: float, du: float):
    """Render one view; returns ``(image, depth, layer_id)``.

    ``rig.zero_parallax`` is subtracted from every layer's disparity, which is
    the render-time equivalent of recentering.
    """
    _validate(spec)
    H, W = spec.height, spec.width
    py, px = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    image = np.zeros((H, W, 3))
    depth = np.zeros((H, W))
    layer_id = np.full((H, W), -1, dtype=np.int64)
    scale = rig.disparity_scale
    for idx in ordered_layers(spec):
        lay = spec.layers[idx]
        qy, qx = py, px
        if dv or du:
            for _ in range(FIXED_POINT_ITERS if lay.geometry != "plane" else 1):
                d = scale / layer_depth(lay, spec, qy, qx) - rig.zero_parallax
                ny, nx = py - dv * d, px - du * d
                done = np.max(np.abs(ny - qy)) < 1e-12 and np.max(np.abs(nx - qx)) < 1e-12
                qy, qx = ny, nx
                if done:
                    break
        cover = layer_coverage(lay, spec, qy, qx)
        tex = texture_value(lay.texture, spec.seed, idx, qy, qx)
        image[cover] = tex[cover]
        depth[cover] = layer_depth(lay, spec, qy, qx)[cover]
        layer_id[cover] = idx
    return np.clip(image, 0.0, 1.0), depth, layer_id


def gen_scene(spec: SceneSpec) -> CenterScene:
    """Central-view texture, depth and layer index of a layered scene."""
    rig = CameraRig(baseline=0.0, resolution=max(spec.width, 1))
    image, depth, layer_id = render_view(spec, rig, 0, 0)
    return CenterScene(image, depth, layer_id)


def render_lf(spec: SceneSpec, rig: CameraRig, angular=(5, 5)):
    """Render a ``V x U`` light field and per-view ground-truth depth ``(V, U, H, W)``."""
    V, U = angular
    vals = np.zeros((V, U, spec.height, spec.width, 3))
    depths = np.zeros((V, U, spec.height, spec.width))
    vc, uc = (V - 1) // 2, (U - 1) // 2
    for v in range(V):
        for u in range(U):
            vals[v, u], depths[v, u], _ = render_view(spec, rig, v - vc, u - uc)
    return make_lightfield(vals), depths


def textured_mask(spec: SceneSpec, layer_id: np.ndarray) -> np.ndarray:
    flags = np.array([lay.texture.textured for lay in spec.layers])
    return flags[layer_id]


def scene_depth_range(spec: SceneSpec) -> tuple[float, float]:
    bounds = [depth_bounds(lay, spec) for lay in spec.layers]
    return min(b[0] for b in bounds), max(b[1] for b in bounds)


# -- random specs ---------------------------------------------------------------

def _random_color(rng) -> tuple[float, float, float]:
    return tuple(float(c) for c in rng.uniform(0.08, 0.92, size=3))


def _random_palette(rng):
    a = _random_color(rng)
    b = _random_color(rng)
    # keep both contrast and hue variation between the two texture colors
    while np.abs(np.subtract(a, b)).max() < 0.35:
        b = _random_color(rng)
    return a, b


def _random_texture(rng, kinds, scale_lo, scale_hi, palette) -> Texture:
    kind = kinds[rng.integers(len(kinds))]
    a, b = palette if rng.random() < 0.5 else palette[::-1]
    return Texture(kind=kind, color_a=a, color_b=b, scale=float(rng.uniform(scale_lo, scale_hi)),
                   octaves=3, angle=float(rng.uniform(0, np.pi)))


def random_scene_spec(seed: int, height: int = 256, width: int = 256, difficulty: str = "standard") -> SceneSpec:
    """Seeded layered scene: a background plane plus depth-separated foreground objects.

    All layers share one two-color material palette, so color statistics do
    not depend on depth.  ``difficulty="hard"`` adds more objects, finer textures and steeper slants.
    """
    if difficulty not in ("standard", "hard"):
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = np.random.default_rng(seed)
    hard = difficulty == "hard"
    size = min(height, width)
    kinds = ("value-noise", "checker", "value-noise")
    lo_s, hi_s = (4.0, 9.0) if hard else (6.0, 12.0)

    palette = _random_palette(rng)
    layers = []
    d_bg = float(rng.uniform(6.0, 9.0))
    if rng.random() < 0.5:
        g = rng.uniform(-1.0, 1.0, size=2) * (2.5 if hard else 1.5) / size
        layers.append(Layer("slanted", d_bg, _random_texture(rng, kinds, lo_s, hi_s, palette), slope=tuple(g)))
    else:
        layers.append(Layer("plane", d_bg, _random_texture(rng, kinds, lo_s, hi_s, palette)))

    n_obj = int(rng.integers(3, 6) if hard else rng.integers(1, 4))
    # disjoint depth slots, nearest first, so painter order equals z-order
    edges = np.linspace(2.0, 5.2, n_obj + 1)
    for k in range(n_obj):
        lo, hi = edges[k], edges[k + 1]
        cy = float(rng.uniform(0.15, 0.85) * (height - 1))
        cx = float(rng.uniform(0.15, 0.85) * (width - 1))
        radius = float(rng.uniform(0.12, 0.25) * size)
        tex = _random_texture(rng, kinds, lo_s, hi_s, palette)
        if rng.random() < 0.5:
            apex = float(rng.uniform(lo, lo + 0.3 * (hi - lo)))
            rim = float(rng.uniform(apex + 0.3 * (hi - lo), hi))
            layers.append(Layer("sphere_cap", apex, tex, center=(cy, cx), radius=radius, depth_rim=rim))
        else:
            d = float(rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)))
            half = radius * rng.uniform(0.7, 1.2, size=2)
            extent = (cy - half[0], cx - half[1], cy + half[0], cx + half[1])
            layers.append(Layer("plane", d, tex, extent=extent))
    return SceneSpec(layers=layers, height=height, width=width, seed=int(seed), name=f"scene-{seed}")
