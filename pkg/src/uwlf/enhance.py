"""Model-based enhancement and the progressive depth/enhancement loop.

A stage turns the current central disparity into depth, spreads it to every
view, estimates the background light and per-channel attenuation on the
central view, and inverts the formation model per view.  Stages chain: the
output of stage ``k`` is the input of stage ``k + 1``, with disparity
re-estimated from each stage's input.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares

from .degrade import DegradationParams, transmission
from .disparity import DisparityConfig, estimate_disparity
from .errors import EmptyFarSet, InsufficientSamples
from .lightfield import (
    CameraRig,
    DisparityMap,
    LightField,
    depth_from_disparity,
    make_lightfield,
)

FIT_MODES = ("least-squares", "robust-trimmed")
BETA_EPS = 1e-3
MIN_BETA_SAMPLES = 100
DEPTH_BINS = 32
# residual scale (intensity units) beyond which a bin counts as an outlier
ROBUST_SCALE = 0.005


@dataclass
class EnhanceConfig:
    stages: int = 3
    t_min: float = 0.05
    far_percentile: float = 0.01
    beta_fit: str = "robust-trimmed"
    disparity: DisparityConfig = field(default_factory=DisparityConfig)
    # oracle injection for tests and round-trip checks; None means blind
    params_override: DegradationParams | None = None

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if not 0 < self.t_min <= 1:
            raise ValueError("t_min must lie in (0, 1]")
        if not 0 < self.far_percentile <= 0.5:
            raise ValueError("far_percentile must lie in (0, 0.5]")
        if self.beta_fit not in FIT_MODES:
            raise ValueError(f"beta_fit must be one of {FIT_MODES}")

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "t_min": self.t_min,
            "far_percentile": self.far_percentile,
            "beta_fit": self.beta_fit,
            "disparity": self.disparity.to_dict(),
            "params_override": None if self.params_override is None else self.params_override.to_dict(),
        }


@dataclass
class StageReport:
    stage_index: int
    beta: tuple
    background_light: tuple
    disparity_mae: float | None = None
    psnr: float | None = None
    beta_fallback: bool = False
    # wall time of the stage; kept out of to_dict/to_text so reports are reproducible
    elapsed: float | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "stage_index": self.stage_index,
            "beta": [float(b) for b in self.beta],
            "background_light": [float(a) for a in self.background_light],
            "disparity_mae": self.disparity_mae,
            "psnr": self.psnr,
            "beta_fallback": self.beta_fallback,
        }

    def to_text(self) -> str:
        beta = ", ".join(f"{b:.4f}" for b in self.beta)
        light = ", ".join(f"{a:.4f}" for a in self.background_light)
        line = f"stage {self.stage_index}: beta=({beta}) A=({light})"
        if self.disparity_mae is not None:
            line += f" disparity_mae={self.disparity_mae:.4f}px"
        if self.psnr is not None:
            line += f" psnr={self.psnr:.3f}dB"
        if self.beta_fallback:
            line += " [beta fallback 0]"
        return line


def estimate_background_light(img, depth, far_percentile: float = 0.01) -> np.ndarray:
    """Mean color of the pixels in the farthest ``far_percentile`` of depth."""
    img = np.asarray(img, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    finite = np.isfinite(depth)
    if not finite.any():
        raise EmptyFarSet("no finite depth")
    cut = np.quantile(depth[finite], 1.0 - far_percentile)
    far = finite & (depth >= cut)
    if not far.any():
        raise EmptyFarSet("far set is empty")
    return np.clip(img[far].mean(axis=0), 0.0, 1.0)


def _binned_medians(img, depth, bins):
    """Per depth-quantile bin: mean depth, per-channel median intensity, pixel count."""
    order = np.argsort(depth, kind="stable")
    d_mean, i_med, count = [], [], []
    for chunk in np.array_split(order, bins):
        if chunk.size == 0:
            continue
        d_mean.append(depth[chunk].mean())
        i_med.append(np.median(img[chunk], axis=0))
        count.append(chunk.size)
    return np.array(d_mean), np.array(i_med), np.array(count)


def refine_background_light(img, depth, A0, bins: int = DEPTH_BINS) -> np.ndarray:
    """Refine a far-pixel light estimate by fitting ``A + (m - A) exp(-beta D)`` to depth-binned medians.

    The far pixels of a channel only reach ``A`` when that channel is
    strongly attenuated at the far end; the fit extrapolates the decay
    instead.  Medians commute with the per-bin affine model and shrug off
    pixels whose depth is wrong.  ``A0`` seeds the fit.
    """
    img = np.asarray(img, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    A = np.array(A0, dtype=np.float64)
    finite = np.isfinite(depth)
    if finite.sum() < bins:
        return A
    d_mean, i_med, count = _binned_medians(depth=depth[finite], img=img[finite], bins=bins)
    w = np.sqrt(count)
    for c in range(3):
        y = i_med[:, c]

        def resid(p):
            return w * (p[0] + (p[1] - p[0]) * np.exp(-p[2] * d_mean) - y)

        fit = least_squares(resid, [A[c], y[0], 0.1], bounds=([0.0, 0.0, 0.0], [1.0, 1.0, 5.0]),
                            loss="soft_l1", f_scale=ROBUST_SCALE * w.mean())
        A[c] = fit.x[0]
    return A


def _fit_slope(x, y):
    xm = x.mean()
    dx = x - xm
    sxx = np.dot(dx, dx)
    if sxx <= 0:
        return 0.0, y.mean()
    slope = np.dot(dx, y - y.mean()) / sxx
    return slope, y.mean() - slope * xm


def estimate_beta(img, depth, A, fit_mode: str = "least-squares", eps: float = BETA_EPS,
                  min_samples: int = MIN_BETA_SAMPLES) -> np.ndarray:
    """Per-channel attenuation from the log-linear decay of ``|A - I|`` with depth.

    ``ln|A_c - I_c| = ln|A_c - J_c| - beta_c * D``; with the first term taken
    as constant over the image, ``-beta_c`` is the least-squares slope against
    ``D``.  ``robust-trimmed`` drops the 10% largest residuals and refits.
    Negative estimates clamp to 0.
    """
    if fit_mode not in FIT_MODES:
        raise ValueError(f"fit_mode must be one of {FIT_MODES}")
    img = np.asarray(img, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    beta = np.zeros(3)
    for c in range(3):
        gap = np.abs(A[c] - img[..., c])
        # clamped pixels no longer follow the model
        ok = (gap > eps) & np.isfinite(depth) & (img[..., c] > 0.0) & (img[..., c] < 1.0)
        count = int(ok.sum())
        if count < min_samples:
            raise InsufficientSamples(f"channel {c}: {count} usable pixels (< {min_samples})", channel=c)
        x = depth[ok]
        y = np.log(gap[ok])
        slope, icpt = _fit_slope(x, y)
        if fit_mode == "robust-trimmed":
            res = np.abs(y - (icpt + slope * x))
            keep = res <= np.quantile(res, 0.9)
            slope, _ = _fit_slope(x[keep], y[keep])
        beta[c] = max(-slope, 0.0)
    return beta


def invert_model(img, depth, beta, A, t_min: float = 0.05) -> np.ndarray:
    """``J = (I - A (1 - T)) / max(T, t_min)`` per channel, clamped to ``[0, 1]``."""
    img = np.asarray(img, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    T = transmission(depth, beta)
    J = (img - A * (1.0 - T)) / np.maximum(T, t_min)
    return np.clip(J, 0.0, 1.0)


def _fill_nearest(values, valid):
    if valid.all():
        return values
    if not valid.any():
        raise InsufficientSamples("no valid depth to propagate")
    idx = ndimage.distance_transform_edt(~valid, return_distances=False, return_indices=True)
    return values[tuple(idx)]


def center_depth(disp: DisparityMap, rig: CameraRig) -> np.ndarray:
    """Depth of the central view from recentered disparity; unusable pixels take the nearest valid depth."""
    absolute = DisparityMap(disp.values + rig.zero_parallax, disp.valid)
    depth, valid = depth_from_disparity(rig, absolute)
    valid &= depth > 0
    return _fill_nearest(depth, valid)


def _fill_disocclusions(buf, dv, du):
    """Fill NaN holes with the farther of the nearest depths on either side along the parallax direction."""
    hole = np.isnan(buf)
    if not hole.any():
        return buf
    H, W = buf.shape
    sy, sx = int(np.sign(dv)), int(np.sign(du))
    ys, xs = np.nonzero(hole)
    best = np.full(ys.size, -np.inf)
    for sign in (1, -1):
        open_ = np.ones(ys.size, dtype=bool)
        k = 1
        while open_.any():
            ty, tx = ys + sign * k * sy, xs + sign * k * sx
            inside = (ty >= 0) & (ty < H) & (tx >= 0) & (tx < W)
            open_ &= inside
            val = np.full(ys.size, np.nan)
            val[open_] = buf[ty[open_], tx[open_]]
            hit = open_ & ~np.isnan(val)
            best[hit] = np.maximum(best[hit], val[hit])
            open_ &= ~hit
            k += 1
    out = buf.copy()
    out[ys, xs] = np.where(np.isfinite(best), best, np.nan)
    # anything the scan could not reach takes the farthest neighbouring depth
    hole = np.isnan(out)
    while hole.any():
        grown = ndimage.maximum_filter(np.where(hole, -np.inf, out), size=3)
        fill = hole & np.isfinite(grown)
        out[fill] = grown[fill]
        hole &= ~fill
    return out


def view_depths(depth_c: np.ndarray, disp: DisparityMap, angular_shape) -> np.ndarray:
    """Spread the central depth to every view by z-buffered forward splatting.

    Each central pixel lands on the nearest pixel of view ``(v, u)`` at
    ``(y + dv * d, x + du * d)``; nearer points win collisions.  Pixels no
    central point lands on are disocclusions and take the farther of the
    nearest landed depths on either side along the view's parallax direction.
    """
    V, U = angular_shape
    vc, uc = (V - 1) // 2, (U - 1) // 2
    H, W = depth_c.shape
    d = _fill_nearest(disp.values, disp.valid & np.isfinite(disp.values))
    yy, xx = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    # far to near, so later writes are the nearer points
    order = np.argsort(d.ravel(), kind="stable")
    src = depth_c.ravel()[order]
    out = np.empty((V, U, H, W))
    for v in range(V):
        for u in range(U):
            dv, du = v - vc, u - uc
            if dv == 0 and du == 0:
                out[v, u] = depth_c
                continue
            # round half up: a constant shift must not fold two pixels onto one
            ty = np.floor(yy + dv * d + 0.5).astype(np.intp).ravel()[order]
            tx = np.floor(xx + du * d + 0.5).astype(np.intp).ravel()[order]
            ok = (ty >= 0) & (ty < H) & (tx >= 0) & (tx < W)
            if not ok.any():
                raise InsufficientSamples(f"no central pixel lands in view ({v}, {u})")
            buf = np.full(H * W, np.nan)
            buf[ty[ok] * W + tx[ok]] = src[ok]
            buf = buf.reshape(H, W)
            out[v, u] = _fill_disocclusions(buf, dv, du)
    return out


def _stage(lf: LightField, disp: DisparityMap, rig: CameraRig, config: EnhanceConfig, light=None,
           depths=None, override=None):
    depth_c = center_depth(disp, rig) if depths is None else np.asarray(depths[lf.center_index], dtype=np.float64)
    fallback = False
    if override is not None:
        A = np.asarray(override.background_light)
        beta = np.asarray(override.beta)
    else:
        center = lf.center_view
        if light is None:
            A = estimate_background_light(center, depth_c, config.far_percentile)
            A = refine_background_light(center, depth_c, A)
        else:
            A = np.asarray(light, dtype=np.float64)
        try:
            beta = estimate_beta(center, depth_c, A, config.beta_fit)
        except InsufficientSamples:
            beta = np.zeros(3)
            fallback = True
    if depths is None:
        depths = view_depths(depth_c, disp, lf.angular_shape)
    out = np.empty_like(lf.values)
    for v, u, _, _ in lf.offsets():
        out[v, u] = invert_model(lf.values[v, u], depths[v, u], beta, A, config.t_min)
    return make_lightfield(out), beta, A, fallback


def enhance_stage(lf: LightField, center_disparity: DisparityMap, rig: CameraRig,
                  config: EnhanceConfig | None = None, background_light=None, depths=None) -> LightField:
    """One enhancement stage driven by the given central disparity.

    ``background_light`` skips light estimation and uses the given color.
    ``depths`` ``(V, U, H, W)`` replaces the per-view depth derived from the
    disparity (oracle use).
    """
    config = config or EnhanceConfig()
    return _stage(lf, center_disparity, rig, config, background_light, depths, config.params_override)[0]


def progressive_enhance(lf_degraded: LightField, rig: CameraRig, config: EnhanceConfig | None = None,
                        clean: LightField | None = None, gt_disparity: np.ndarray | None = None,
                        keep_stages: bool = False, depths=None):
    """Alternate disparity estimation and enhancement for ``config.stages`` stages.

    The background light is estimated once, at the first stage; later
    stages only re-fit the residual attenuation.  ``config.params_override``
    describes the input's degradation, so it drives stage 1 only and later
    stages invert the exact residual (``beta = 0``).  ``depths`` likewise
    replaces the propagated per-view depth at stage 1.
    Returns ``(lf, disparity, reports)``; with ``keep_stages`` a fourth item
    lists ``(stage_output, stage_disparity)`` pairs.  ``clean`` and
    ``gt_disparity`` only feed the reports.
    """
    from .metrics import disparity_error, psnr

    config = config or EnhanceConfig()
    lf = lf_degraded
    reports, history = [], []
    disp = None
    light = None
    override = config.params_override
    for k in range(1, config.stages + 1):
        start = time.perf_counter()
        disp, _ = estimate_disparity(lf, config.disparity)
        # a partial correction leaves A + (J - A) exp(-(beta - beta_hat) D): same light, smaller beta
        lf, beta, A, fallback = _stage(lf, disp, rig, config, light, depths if k == 1 else None, override)
        light = A
        if override is not None:
            override = DegradationParams((0.0, 0.0, 0.0), override.background_light)
        elapsed = time.perf_counter() - start
        mae = None
        if gt_disparity is not None:
            mae = float(disparity_error(disp, DisparityMap(gt_disparity))[0])
        score = None if clean is None else float(psnr(lf, clean))
        reports.append(StageReport(k, tuple(float(b) for b in beta), tuple(float(a) for a in A), mae, score, fallback,
                                   elapsed))
        if keep_stages:
            history.append((lf, disp))
    if keep_stages:
        return lf, disp, reports, history
    return lf, disp, reports
