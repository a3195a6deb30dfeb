"""Image-quality and disparity metrics.

UIQM follows Panetta et al. (2016) and UCIQE follows Yang & Sowmya (2015),
both evaluated on 8-bit-scaled intensities (``[0, 1] * 255``) as in their
original definitions.  Choices the originals leave open:

* EME / logAMEE blocks are 8x8, tiled from the top-left corner; a trailing
  partial block is dropped;
* an EME block whose minimum (or maximum) is 0 contributes 0;
* logAMEE works on Rec.601 luma with PLIP difference/sum (gamma = k = 1026)
  and is reported as ``-mean(r * ln r)`` so it is non-negative;
* UCIQE uses CIELab (D65) with L and chroma divided by 100, the luminance
  contrast between the 99th and 1st percentile of L, and saturation
  ``C / sqrt(C^2 + L^2)``; achromatic pixels (R = G = B) get chroma 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage
from skimage.color import rgb2lab

from .errors import NoValidOverlap, ShapeMismatch, TooSmall
from .lightfield import DisparityMap, LightField

PSNR_CAP = 99.0
LUMA = np.array([0.299, 0.587, 0.114])

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

UIQM_WEIGHTS = (0.0282, 0.2953, 3.5753)
UICM_ALPHA = 0.1
UICM_COEFFS = (-0.0268, 0.1586)
EME_BLOCK = 8
PLIP_GAMMA = 1026.0
PLIP_K = 1026.0

UCIQE_WEIGHTS = (0.4680, 0.2745, 0.2576)


def _as_views(x):
    if isinstance(x, LightField):
        return x.values.reshape((-1,) + x.values.shape[2:])
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 5:
        return x.reshape((-1,) + x.shape[2:])
    return x[None]


def psnr_views(a, b) -> np.ndarray:
    va, vb = _as_views(a), _as_views(b)
    if va.shape != vb.shape:
        raise ShapeMismatch(f"{va.shape} vs {vb.shape}")
    out = []
    for x, y in zip(va, vb):
        mse = float(np.mean((x - y) ** 2))
        out.append(PSNR_CAP if mse == 0 else min(PSNR_CAP, 10.0 * math.log10(1.0 / mse)))
    return np.array(out)


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0; light fields average the per-view values; capped at 99 dB."""
    return float(np.mean(psnr_views(a, b)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim_map(x, y) -> np.ndarray:
    g = gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def ssim(a, b, per_channel: bool = False) -> float:
    """Mean SSIM over 11x11 Gaussian windows (sigma 1.5) fully inside the image.

    Computed on luma by default; ``per_channel`` averages the three RGB
    channels instead.  Light fields average the per-view scores.
    """
    va, vb = _as_views(a), _as_views(b)
    if va.shape != vb.shape:
        raise ShapeMismatch(f"{va.shape} vs {vb.shape}")
    if va.shape[1] < SSIM_WINDOW or va.shape[2] < SSIM_WINDOW:
        raise TooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    scores = []
    for x, y in zip(va, vb):
        if x.ndim == 2:
            scores.append(ssim_map(x, y).mean())
        elif per_channel:
            scores.append(np.mean([ssim_map(x[..., c], y[..., c]).mean() for c in range(x.shape[-1])]))
        else:
            scores.append(ssim_map(x @ LUMA, y @ LUMA).mean())
    return float(np.mean(scores))


# -- UIQM ---------------------------------------------------------------------

def _trimmed_mean(x, alpha=UICM_ALPHA):
    x = np.sort(x.ravel())
    K = x.size
    lo = int(math.ceil(alpha * K))
    hi = int(math.floor(alpha * K))
    return float(x[lo:K - hi].mean())


def _std0(x, mu):
    d = x - mu
    return float(np.sqrt(np.mean(d * d)))


def uicm(img) -> float:
    img = np.asarray(img, dtype=np.float64) * 255.0
    R, G, B = img[..., 0], img[..., 1], img[..., 2]
    rg = R - G
    yb = (R + G) / 2.0 - B
    mu_rg, mu_yb = _trimmed_mean(rg), _trimmed_mean(yb)
    s_rg, s_yb = _std0(rg, mu_rg), _std0(yb, mu_yb)
    return UICM_COEFFS[0] * math.sqrt(mu_rg**2 + mu_yb**2) + UICM_COEFFS[1] * math.sqrt(s_rg**2 + s_yb**2)


def _blocks(x, size=EME_BLOCK):
    k2, k1 = x.shape[0] // size, x.shape[1] // size
    if k1 == 0 or k2 == 0:
        raise TooSmall(f"need at least {size}x{size} pixels")
    return x[:k2 * size, :k1 * size].reshape(k2, size, k1, size).swapaxes(1, 2).reshape(k2, k1, -1)


def eme(x, size=EME_BLOCK) -> float:
    b = _blocks(x, size)
    mx, mn = b.max(axis=2), b.min(axis=2)
    ok = (mn > 0) & (mx > 0)
    terms = np.zeros(mx.shape)
    terms[ok] = np.log(mx[ok] / mn[ok])
    return float(2.0 / mx.size * terms.sum())


def sobel_magnitude(x) -> np.ndarray:
    return np.hypot(ndimage.sobel(x, axis=0), ndimage.sobel(x, axis=1))


def uism(img) -> float:
    img = np.asarray(img, dtype=np.float64) * 255.0
    return float(sum(LUMA[c] * eme(sobel_magnitude(img[..., c]) * img[..., c]) for c in range(3)))


def log_amee(x, size=EME_BLOCK) -> float:
    b = _blocks(x, size)
    mx, mn = b.max(axis=2), b.min(axis=2)
    diff = PLIP_K * (mx - mn) / (PLIP_K - mn)
    summ = mx + mn - mx * mn / PLIP_GAMMA
    ok = (diff > 0) & (summ > 0)
    terms = np.zeros(mx.shape)
    r = diff[ok] / summ[ok]
    terms[ok] = r * np.log(r)
    return float(-terms.sum() / mx.size)


def uiconm(img) -> float:
    img = np.asarray(img, dtype=np.float64) * 255.0
    return log_amee(img @ LUMA)


def uiqm_terms(img) -> tuple[float, float, float]:
    return uicm(img), uism(img), uiconm(img)


def uiqm(img) -> float:
    """Underwater image quality measure of an RGB image in ``[0, 1]``."""
    a, b, c = uiqm_terms(img)
    return UIQM_WEIGHTS[0] * a + UIQM_WEIGHTS[1] * b + UIQM_WEIGHTS[2] * c


# -- UCIQE --------------------------------------------------------------------

def uciqe_terms(img) -> tuple[float, float, float]:
    img = np.asarray(img, dtype=np.float64)
    lab = rgb2lab(img)
    L = lab[..., 0] / 100.0
    chroma = np.hypot(lab[..., 1], lab[..., 2]) / 100.0
    gray = (img[..., 0] == img[..., 1]) & (img[..., 1] == img[..., 2])
    chroma[gray] = 0.0
    sigma_c = 0.0 if np.ptp(chroma) == 0 else float(np.std(chroma))
    con_l = float(np.quantile(L, 0.99) - np.quantile(L, 0.01))
    denom = np.hypot(chroma, L)
    sat = np.divide(chroma, denom, out=np.zeros_like(chroma), where=denom > 0)
    return sigma_c, con_l, float(sat.mean())


def uciqe(img) -> float:
    """Underwater color image quality evaluation of an RGB image in ``[0, 1]``."""
    s, c, m = uciqe_terms(img)
    return UCIQE_WEIGHTS[0] * s + UCIQE_WEIGHTS[1] * c + UCIQE_WEIGHTS[2] * m


# -- disparity ----------------------------------------------------------------

BADPIX_THRESHOLD = 0.2


def disparity_error(est: DisparityMap, gt: DisparityMap, mask=None, threshold: float = BADPIX_THRESHOLD):
    """``(mae, badpix_ratio)`` over pixels valid in both maps (and in ``mask``)."""
    if est.shape != gt.shape:
        raise ShapeMismatch(f"{est.shape} vs {gt.shape}")
    both = est.valid & gt.valid & np.isfinite(est.values) & np.isfinite(gt.values)
    if mask is not None:
        both &= np.asarray(mask, dtype=bool)
    if not both.any():
        raise NoValidOverlap("no pixel is valid in both disparity maps")
    err = np.abs(est.values[both] - gt.values[both])
    return float(err.mean()), float(np.mean(err > threshold))


# -- report -------------------------------------------------------------------

@dataclass
class MetricReport:
    psnr: float | None = None
    ssim: float | None = None
    uiqm: float | None = None
    uciqe: float | None = None
    disparity_mae: float | None = None
    badpix_ratio: float | None = None

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_row(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(self.columns())
        writer.writerow(["" if getattr(self, c) is None else repr(float(getattr(self, c))) for c in self.columns()])
        return buf.getvalue()

    @classmethod
    def from_row(cls, text: str) -> "MetricReport":
        rows = list(csv.reader(io.StringIO(text)))
        header, values = rows[0], rows[1]
        return cls(**{k: (None if v == "" else float(v)) for k, v in zip(header, values)})

    def to_text(self) -> str:
        lines = []
        for c in self.columns():
            v = getattr(self, c)
            lines.append(f"{c:>14}: {'n/a' if v is None else f'{v:.6f}'}")
        return "\n".join(lines)


def evaluate(result, reference=None, disparity=None, gt_disparity=None, mask=None) -> MetricReport:
    """Full report: reference metrics when ``reference`` is given, non-reference on the central view."""
    report = MetricReport()
    if reference is not None:
        report.psnr = psnr(result, reference)
        report.ssim = ssim(result, reference)
    center = result.center_view if isinstance(result, LightField) else np.asarray(result)
    report.uiqm = uiqm(center)
    report.uciqe = uciqe(center)
    if disparity is not None and gt_disparity is not None:
        report.disparity_mae, report.badpix_ratio = disparity_error(disparity, gt_disparity, mask)
    return report
