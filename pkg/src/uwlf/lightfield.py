"""4-D light-field container, disparity/depth geometry and view resampling.

Conventions used throughout the package:

* values are indexed ``(v, u, y, x, c)``; ``v`` runs over angular rows,
  ``u`` over angular columns, and the central view sits at
  ``((V - 1) / 2, (U - 1) / 2)``;
* angular offsets are centred, ``(dv, du) = (v - v_c, u - u_c)``;
* a scene point with disparity ``d`` that sits at ``(y, x)`` in the central
  view appears at ``(y + dv * d, x + du * d)`` in view ``(v, u)``, so it moves
  in the same direction as the camera offset.  Pulling a side view back onto
  the central grid therefore samples it at ``(y + dv * d, x + du * d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EvenAngularSize,
    IndexOutOfRange,
    NonPositiveDepth,
    ShapeMismatch,
    ValueOutOfRange,
)

DISPARITY_EPS = 1e-6


@dataclass
class LightField:
    """Grid of ``V x U`` RGB views with radiance in ``[0, 1]``.

    ``valid`` is optional and, when present, flags samples that hold real
    content (``False`` where a resampling step replicated border pixels).
    """

    values: np.ndarray
    valid: np.ndarray | None = None

    @property
    def angular_rows(self) -> int:
        return self.values.shape[0]

    @property
    def angular_cols(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[2]

    @property
    def width(self) -> int:
        return self.values.shape[3]

    @property
    def angular_shape(self) -> tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.values.shape[2], self.values.shape[3]

    @property
    def center_index(self) -> tuple[int, int]:
        return (self.angular_rows - 1) // 2, (self.angular_cols - 1) // 2

    @property
    def center_view(self) -> np.ndarray:
        return self.values[self.center_index]

    def offsets(self):
        """Yield ``(v, u, dv, du)`` for every view in row-major order."""
        vc, uc = self.center_index
        for v in range(self.angular_rows):
            for u in range(self.angular_cols):
                yield v, u, v - vc, u - uc

    def copy(self) -> "LightField":
        valid = None if self.valid is None else self.valid.copy()
        return LightField(self.values.copy(), valid)


@dataclass(frozen=True)
class CameraRig:
    """Planar camera rig.

    ``focal_length`` and ``sensor_size`` share a unit, ``baseline`` shares the
    unit of scene depth and ``resolution`` is the output width in pixels.
    ``zero_parallax`` is the absolute disparity removed by recentering: stored
    light fields carry ``d - zero_parallax``.
    """

    focal_length: float = 35.0
    baseline: float = 0.05
    sensor_size: float = 32.0
    resolution: int = 256
    zero_parallax: float = 0.0

    def __post_init__(self):
        for name in ("focal_length", "baseline", "sensor_size", "resolution"):
            value = getattr(self, name)
            # a zero baseline is the degenerate "all views identical" rig
            if not np.isfinite(value) or value < 0 or (value == 0 and name != "baseline"):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if not np.isfinite(self.zero_parallax):
            raise ValueError("zero_parallax must be finite")

    @property
    def disparity_scale(self) -> float:
        """``f * b * r / s``: disparity in px/view of a point at unit depth."""
        return self.focal_length * self.baseline * self.resolution / self.sensor_size

    def to_dict(self) -> dict:
        return {
            "focal_length": float(self.focal_length),
            "baseline": float(self.baseline),
            "sensor_size": float(self.sensor_size),
            "resolution": int(self.resolution),
            "zero_parallax": float(self.zero_parallax),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraRig":
        return cls(
            focal_length=float(data["focal_length"]),
            baseline=float(data["baseline"]),
            sensor_size=float(data["sensor_size"]),
            resolution=int(data["resolution"]),
            zero_parallax=float(data.get("zero_parallax", 0.0)),
        )


def rig_for_depth_range(
    depth_min: float,
    depth_max: float,
    resolution: int,
    max_disparity: float = 2.5,
    focal_length: float = 35.0,
    sensor_size: float = 32.0,
) -> CameraRig:
    """Pick baseline and zero-parallax so the recentered range is ``+-max_disparity``.

    The zero-parallax plane is placed midway in disparity between the nearest
    and farthest depth.
    """
    if not 0 < depth_min < depth_max:
        raise ValueError("need 0 < depth_min < depth_max")
    unit = focal_length * resolution / sensor_size
    span = unit * (1.0 / depth_min - 1.0 / depth_max)
    baseline = 2.0 * max_disparity / span
    d_near = unit * baseline / depth_min
    d_far = unit * baseline / depth_max
    return CameraRig(
        focal_length=focal_length,
        baseline=baseline,
        sensor_size=sensor_size,
        resolution=resolution,
        zero_parallax=0.5 * (d_near + d_far),
    )


@dataclass
class DisparityMap:
    """Signed disparity in pixels per unit angular offset, with a validity mask."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.valid is None:
            self.valid = np.isfinite(self.values)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.values.shape:
            raise ShapeMismatch("valid mask shape differs from disparity shape")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class EpiSlice:
    orientation: str
    fixed_coords: tuple[int, int]
    values: np.ndarray


def make_lightfield(values, dims=None, valid=None) -> LightField:
    """Validate a ``(V, U, H, W, 3)`` radiance grid and wrap it."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 5 or values.shape[-1] != 3:
        raise DimensionMismatch(f"expected (V, U, H, W, 3) values, got shape {values.shape}")
    if dims is not None and tuple(dims) != values.shape[:4]:
        raise DimensionMismatch(f"dims {tuple(dims)} do not match values {values.shape[:4]}")
    V, U = values.shape[:2]
    if V % 2 == 0 or U % 2 == 0:
        raise EvenAngularSize(f"angular size must be odd, got {V}x{U}")
    if not np.all(np.isfinite(values)):
        raise ValueOutOfRange("light field contains non-finite values")
    lo, hi = values.min(), values.max()
    if lo < 0.0 or hi > 1.0:
        raise ValueOutOfRange(f"values must lie in [0, 1], got [{lo}, {hi}]")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != values.shape[:4]:
            raise DimensionMismatch("valid mask must have shape (V, U, H, W)")
    return LightField(values, valid)


def sai(lf: LightField, v: int, u: int) -> np.ndarray:
    """Copy of sub-aperture image ``(v, u)``."""
    if not (0 <= v < lf.angular_rows and 0 <= u < lf.angular_cols):
        raise IndexOutOfRange(f"view ({v}, {u}) outside {lf.angular_rows}x{lf.angular_cols}")
    return lf.values[v, u].copy()


def epi(lf: LightField, orientation: str, fixed_angular: int, fixed_spatial: int) -> EpiSlice:
    """Epipolar-plane image.

    Horizontal: values over ``(u, x)`` at fixed ``(v, y)``.
    Vertical: values over ``(v, y)`` at fixed ``(u, x)``.
    """
    if orientation == "horizontal":
        if not (0 <= fixed_angular < lf.angular_rows and 0 <= fixed_spatial < lf.height):
            raise IndexOutOfRange(f"(v={fixed_angular}, y={fixed_spatial}) out of range")
        values = lf.values[fixed_angular, :, fixed_spatial, :, :].copy()
    elif orientation == "vertical":
        if not (0 <= fixed_angular < lf.angular_cols and 0 <= fixed_spatial < lf.width):
            raise IndexOutOfRange(f"(u={fixed_angular}, x={fixed_spatial}) out of range")
        values = lf.values[:, fixed_angular, :, fixed_spatial, :].copy()
    else:
        raise ValueError(f"orientation must be 'horizontal' or 'vertical', not {orientation!r}")
    return EpiSlice(orientation, (fixed_angular, fixed_spatial), values)


def disparity_from_depth(rig: CameraRig, depth) -> DisparityMap:
    """Absolute disparity ``d = f * b * r / (s * D)``."""
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise NonPositiveDepth("depth must be finite and strictly positive")
    values = rig.focal_length * rig.baseline * rig.resolution / (rig.sensor_size * depth)
    return DisparityMap(values, np.ones(depth.shape, dtype=bool))


def depth_from_disparity(rig: CameraRig, disp: DisparityMap, eps: float = DISPARITY_EPS):
    """Invert the disparity law; returns ``(depth, valid)``.

    Pixels with ``|d| <= eps`` (points at infinity) or already invalid in
    ``disp`` come back invalid with depth ``inf``.
    """
    d = disp.values
    valid = disp.valid & np.isfinite(d) & (np.abs(d) > eps)
    depth = np.full(d.shape, np.inf)
    num = rig.focal_length * rig.baseline * rig.resolution
    depth[valid] = num / (rig.sensor_size * d[valid])
    return depth, valid


def _blend(a, b, c, e, fy, fx):
    # single expression shared by every sampler so all paths agree bit-for-bit
    return (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * e)


def _split(pos, n):
    base = np.floor(pos)
    frac = pos - base
    i0 = np.clip(base.astype(np.intp), 0, n - 1)
    i1 = np.clip(i0 + 1, 0, n - 1)
    inside = (pos >= 0) & (pos <= n - 1)
    return i0, i1, frac, inside


def sample_bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray):
    """Bilinear lookup of ``img`` at fractional positions.

    Returns ``(samples, inside)``; out-of-bounds positions are clamped to the
    border for the value and flagged ``False`` in ``inside``.
    """
    H, W = img.shape[:2]
    y0, y1, fy, iny = _split(ys, H)
    x0, x1, fx, inx = _split(xs, W)
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    out = _blend(img[y0, x0], img[y0, x1], img[y1, x0], img[y1, x1], fy, fx)
    return out, iny & inx


def shift_image(img: np.ndarray, dy: float, dx: float):
    """Sample ``img`` at ``(y + dy, x + dx)`` for every pixel (constant shift).

    Same arithmetic as :func:`sample_bilinear` with separable indexing.
    """
    H, W = img.shape[:2]
    y0, y1, fy, iny = _split(np.arange(H) + dy, H)
    x0, x1, fx, inx = _split(np.arange(W) + dx, W)
    fy = fy[:, None]
    fx = fx[None, :]
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    rows0, rows1 = img[y0], img[y1]
    out = _blend(rows0[:, x0], rows0[:, x1], rows1[:, x0], rows1[:, x1], fy, fx)
    return out, iny[:, None] & inx[None, :]


def warp_view(img: np.ndarray, disp, angular_offset):
    """Resample ``img`` at ``(y + dv * d(y, x), x + du * d(y, x))``.

    ``disp`` may be a :class:`DisparityMap`, an array, or a scalar.  Returns
    ``(warped, valid)``; samples falling outside the image are invalid.
    """
    dv, du = angular_offset
    H, W = img.shape[:2]
    if isinstance(disp, DisparityMap):
        if disp.shape != (H, W):
            raise ShapeMismatch(f"disparity {disp.shape} vs image {(H, W)}")
        d = disp.values
    else:
        d = np.asarray(disp, dtype=np.float64)
        if d.ndim == 0:
            return shift_image(img, dv * float(d), du * float(d))
        if d.shape != (H, W):
            raise ShapeMismatch(f"disparity {d.shape} vs image {(H, W)}")
    yy, xx = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    return sample_bilinear(img, yy + dv * d, xx + du * d)


def refocus(lf: LightField, slope: float) -> np.ndarray:
    """Shift-and-add refocus onto the plane whose disparity is ``slope``.

    Each view is sampled at ``slope * (dv, du)`` and averaged over the views
    whose sample lands inside the image; views are summed in fixed row-major
    order.
    """
    H, W = lf.spatial_shape
    acc = np.zeros((H, W, 3))
    count = np.zeros((H, W))
    for v, u, dv, du in lf.offsets():
        warped, valid = shift_image(lf.values[v, u], dv * slope, du * slope)
        acc += np.where(valid[..., None], warped, 0.0)
        count += valid
    # the centre view is never shifted, so count >= 1 everywhere
    return np.clip(acc / count[..., None], 0.0, 1.0)


def recenter_zero_parallax(lf: LightField, d0: float) -> LightField:
    """Shift every view so points with disparity ``d0`` get disparity zero.

    Border samples that fall outside a view are filled by edge replication and
    flagged ``False`` in the returned light field's ``valid`` mask.
    """
    out = np.empty_like(lf.values)
    valid = np.ones(lf.values.shape[:4], dtype=bool) if lf.valid is None else lf.valid.copy()
    for v, u, dv, du in lf.offsets():
        if dv == 0 and du == 0:
            out[v, u] = lf.values[v, u]
            continue
        warped, inside = shift_image(lf.values[v, u], dv * d0, du * d0)
        out[v, u] = warped
        if lf.valid is not None:
            prior, _ = shift_image(lf.valid[v, u].astype(np.float64), dv * d0, du * d0)
            inside = inside & (prior > 0.999)
        valid[v, u] = inside
    return LightField(np.clip(out, 0.0, 1.0), valid)


def assemble(views: np.ndarray) -> LightField:
    """Stack a ``(V, U, H, W, 3)`` array of views back into a validated light field."""
    return make_lightfield(views)
