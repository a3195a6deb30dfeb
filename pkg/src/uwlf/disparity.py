"""Central-view disparity from photo-consistency over sub-light-fields.

Pipeline: a variance cost volume per sub-LF (row, column and the two
diagonals through the centre), winner-take-all with parabola refinement and
a margin-based reliability, max-reliability fusion, then a guided weighted
median that fills unreliable pixels without crossing guide edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyHypotheses, EmptyInput, ShapeMismatch
from .lightfield import DisparityMap, LightField, _blend, sample_bilinear

SUBLF_IDS = ("horizontal-row", "vertical-column", "main-diagonal", "anti-diagonal")
SENTINEL = 1.0e3
# variances below this are cancellation roundoff, far under 16-bit quantization
COST_FLOOR = 1.0e-14


@dataclass(frozen=True)
class SubLF:
    id: str
    views: tuple


def make_sublf(sublf_id: str, angular_shape) -> SubLF:
    V, U = angular_shape
    vc, uc = (V - 1) // 2, (U - 1) // 2
    n = min(vc, uc)
    if sublf_id == "horizontal-row":
        views = tuple((vc, u) for u in range(U))
    elif sublf_id == "vertical-column":
        views = tuple((v, uc) for v in range(V))
    elif sublf_id == "main-diagonal":
        views = tuple((vc + k, uc + k) for k in range(-n, n + 1))
    elif sublf_id == "anti-diagonal":
        views = tuple((vc + k, uc - k) for k in range(-n, n + 1))
    else:
        raise ValueError(f"unknown sub-LF {sublf_id!r}; expected one of {SUBLF_IDS}")
    return SubLF(sublf_id, views)


def sublfs(angular_shape, ids=SUBLF_IDS) -> list[SubLF]:
    return [make_sublf(i, angular_shape) for i in ids]


@dataclass
class CostVolume:
    hypotheses: np.ndarray
    cost: np.ndarray
    sublf_id: str = ""


@dataclass
class DisparityConfig:
    d_min: float = -4.0
    d_max: float = 4.0
    step: float = 0.1
    # reliability = 1 - exp(-m / tau) of the normalized cost margin m in [0, 1]
    tau: float = 0.2
    # the runner-up is searched outside +-exclusion px of the winner
    exclusion: float = 0.5
    sublf_ids: tuple = SUBLF_IDS
    smooth: bool = True
    radius: int = 4
    sigma: float = 0.5
    edge_threshold: float = float("inf")
    min_reliability: float = 0.0

    def hypotheses(self) -> np.ndarray:
        return hypothesis_grid(self.d_min, self.d_max, self.step)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["sublf_ids"] = list(self.sublf_ids)
        return out


def hypothesis_grid(d_min=-4.0, d_max=4.0, step=0.1) -> np.ndarray:
    if step <= 0 or d_max < d_min:
        raise EmptyHypotheses("need step > 0 and d_max >= d_min")
    n = int(np.floor((d_max - d_min) / step + 1e-9)) + 1
    return np.round(d_min + step * np.arange(n), 10)


PAD = 16


def _axis(n, shift):
    """Integer base offset and per-position weights for a constant shift."""
    pos = np.arange(n) + shift
    base = np.floor(pos)
    frac = pos - base
    off = base.astype(np.intp) - np.arange(n)
    inside = (pos >= 0) & (pos <= n - 1)
    return off, frac, inside


def _shift(padded, H, W, dy, dx):
    # constant-shift bilinear sampling of a channel-first view padded by PAD
    # with edge replication; identical arithmetic to lightfield.sample_bilinear
    # (clamped indices == edge padding), zero-weight axes skipped
    offy, fy, iny = _axis(H, dy)
    offx, fx, inx = _axis(W, dx)
    valid = iny[:, None] & inx[None, :]
    if offy.min() != offy.max() or offx.min() != offx.max() or abs(offy[0]) >= PAD - 1 or abs(offx[0]) >= PAD - 1:
        img = padded[:, PAD:PAD + H, PAD:PAD + W].transpose(1, 2, 0)
        yy, xx = np.meshgrid(np.arange(H) + dy, np.arange(W) + dx, indexing="ij")
        out, valid = sample_bilinear(img, yy, xx)
        return out.transpose(2, 0, 1), valid
    oy = PAD + int(offy[0])
    ox = PAD + int(offx[0])
    a = padded[:, oy:oy + H, ox:ox + W]
    fy = fy[:, None]
    fx = fx[None, :]
    if not fy.any():
        if not fx.any():
            return a, valid
        return (1.0 - fx) * a + fx * padded[:, oy:oy + H, ox + 1:ox + 1 + W], valid
    c = padded[:, oy + 1:oy + 1 + H, ox:ox + W]
    if not fx.any():
        return (1.0 - fy) * a + fy * c, valid
    b = padded[:, oy:oy + H, ox + 1:ox + 1 + W]
    e = padded[:, oy + 1:oy + 1 + H, ox + 1:ox + 1 + W]
    return _blend(a, b, c, e, fy, fx), valid


def view_variance(samples, masks):
    """Mean over channels of the across-view variance of valid samples.

    ``samples`` are channel-first ``(3, H, W)`` arrays with matching ``(H, W)``
    validity masks, accumulated in list order; variance is
    ``E[x^2] - E[x]^2`` over valid views, with values under
    :data:`COST_FLOOR` set to zero.  Pixels with fewer than two valid
    samples get :data:`SENTINEL`.
    """
    n = np.zeros(masks[0].shape)
    total = np.zeros(samples[0].shape)
    sq = np.zeros(samples[0].shape)
    tmp = np.empty(samples[0].shape)
    for s, m in zip(samples, masks):
        if m.all():
            n += 1.0
            total += s
            np.multiply(s, s, out=tmp)
        else:
            mf = m.astype(np.float64)
            n += mf
            np.multiply(s, mf, out=tmp)
            total += tmp
            tmp *= s
        sq += tmp
    inv = 1.0 / np.maximum(n, 1.0)
    total *= inv
    sq *= inv
    np.multiply(total, total, out=tmp)
    sq -= tmp
    cost = (sq[0] + sq[1] + sq[2]) / 3.0
    cost[cost < COST_FLOOR] = 0.0
    return np.where(n >= 2, cost, SENTINEL)


def padded_views(lf: LightField) -> dict:
    """Channel-first, edge-padded copy of every view, keyed by ``(v, u)``."""
    out = {}
    for v, u, _, _ in lf.offsets():
        chw = np.ascontiguousarray(lf.values[v, u].transpose(2, 0, 1))
        out[v, u] = np.pad(chw, ((0, 0), (PAD, PAD), (PAD, PAD)), mode="edge")
    return out


def build_cost_volume(lf: LightField, sublf: SubLF, hypotheses, padded=None) -> CostVolume:
    """Photo-consistency cost of every hypothesis at every central pixel."""
    hyps = np.asarray(hypotheses, dtype=np.float64)
    if hyps.size == 0:
        raise EmptyHypotheses("no disparity hypotheses")
    if np.any(np.diff(hyps) <= 0):
        raise ValueError("hypotheses must be strictly increasing")
    if padded is None:
        padded = padded_views(lf)
    vc, uc = lf.center_index
    H, W = lf.spatial_shape
    cost = np.empty((hyps.size, H, W))
    for k, h in enumerate(hyps):
        samples, masks = [], []
        for v, u in sublf.views:
            s, m = _shift(padded[v, u], H, W, (v - vc) * h, (u - uc) * h)
            samples.append(s)
            masks.append(m)
        cost[k] = view_variance(samples, masks)
    return CostVolume(hyps, cost, sublf.id)


def tie_priority(hypotheses) -> np.ndarray:
    """Rank of each hypothesis under the tie rule: nearest to 0, then smaller."""
    order = sorted(range(len(hypotheses)), key=lambda i: (abs(hypotheses[i]), hypotheses[i]))
    prio = np.empty(len(hypotheses), dtype=np.int64)
    prio[order] = np.arange(len(hypotheses))
    return prio


def wta_disparity(cv: CostVolume, tau: float = 0.2, exclusion: float = 0.5):
    """Winner-take-all disparity with sub-pixel parabola refinement.

    Returns ``(DisparityMap, reliability)``.  The margin between the best
    cost and the best cost further than ``exclusion`` px from the winner is
    normalized by that runner-up cost, then squashed as
    ``1 - exp(-margin / tau)``.  A view set that cannot be made consistent
    (an occluded direction) keeps a large best cost and so a small
    normalized margin; flat costs give 0.
    """
    hyps = cv.hypotheses
    cost = cv.cost
    N = hyps.size
    cmin = cost.min(axis=0)
    prio = tie_priority(hyps)
    ranked = np.where(cost == cmin, prio[:, None, None], N)
    best = np.argmin(ranked, axis=0)
    disp = hyps[best].astype(np.float64)

    if N >= 3:
        inner = np.clip(best, 1, N - 2)
        c0 = cmin
        cm = np.take_along_axis(cost, (inner - 1)[None], axis=0)[0]
        cp = np.take_along_axis(cost, (inner + 1)[None], axis=0)[0]
        denom = cm - 2.0 * c0 + cp
        ok = (best > 0) & (best < N - 1) & (cm < SENTINEL) & (cp < SENTINEL) & (denom > 0)
        offset = np.where(ok, 0.5 * (cm - cp) / np.where(ok, denom, 1.0), 0.0)
        half_span = 0.5 * (hyps[inner + 1] - hyps[inner - 1])
        disp = np.where(ok, disp + offset * half_span, disp)

    # hypotheses with too few valid views carry no evidence either way
    far = (np.abs(hyps[:, None, None] - hyps[best][None]) > exclusion + 1e-9) & (cost < SENTINEL)
    runner = np.where(far, cost, np.inf).min(axis=0)
    ok = np.isfinite(runner) & (runner > 0)
    margin = np.where(ok, (runner - cmin) / np.where(ok, runner, 1.0), 0.0)
    valid = cmin < SENTINEL
    rel = np.where(valid, 1.0 - np.exp(-margin / tau), 0.0)
    return DisparityMap(disp, valid), rel


def fuse(estimates):
    """Per pixel, keep the estimate with the highest reliability (first wins ties)."""
    estimates = list(estimates)
    if not estimates:
        raise EmptyInput("nothing to fuse")
    shape = estimates[0][0].shape
    for d, r in estimates:
        if d.shape != shape or np.shape(r) != shape:
            raise ShapeMismatch("all estimates must share one shape")
    rel = np.stack([np.asarray(r, dtype=np.float64) for _, r in estimates])
    vals = np.stack([d.values for d, _ in estimates])
    valid = np.stack([d.valid for d, _ in estimates])
    pick = np.argmax(rel, axis=0)[None]
    out_rel = np.take_along_axis(rel, pick, axis=0)[0]
    out = DisparityMap(np.take_along_axis(vals, pick, axis=0)[0], np.take_along_axis(valid, pick, axis=0)[0])
    return out, out_rel


def _weighted_median_pass(values, valid, guide, weight, radius, sigma, threshold, rows=48):
    H, W = values.shape
    k = 2 * radius + 1
    pv = np.pad(values, radius, mode="edge")
    pw = np.pad(np.where(valid, weight, 0.0), radius, mode="constant")
    pg = np.pad(guide, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    out = values.copy()
    got = np.zeros((H, W), dtype=bool)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    t2 = threshold * threshold
    for r0 in range(0, H, rows):
        r1 = min(H, r0 + rows)
        n = (r1 - r0) * W
        win_v = sliding_window_view(pv[r0:r1 + 2 * radius], (k, k))
        win_w = sliding_window_view(pw[r0:r1 + 2 * radius], (k, k))
        win_g = sliding_window_view(pg[r0:r1 + 2 * radius], (k, k), axis=(0, 1))
        g0 = guide[r0:r1, :, :, None, None]
        dist2 = ((win_g - g0) ** 2).sum(axis=2)
        w = win_w * np.exp(-dist2 * inv2s2) * (dist2 <= t2)
        v = win_v.reshape(n, k * k)
        w = w.reshape(n, k * k)
        order = np.argsort(v, axis=1, kind="stable")
        vs = np.take_along_axis(v, order, axis=1)
        cw = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
        total = cw[:, -1]
        idx = np.argmax(cw >= 0.5 * total[:, None], axis=1)
        med = vs[np.arange(n), idx]
        has = total > 0
        block = out[r0:r1].reshape(n)
        block[has] = med[has]
        out[r0:r1] = block.reshape(r1 - r0, W)
        got[r0:r1] = has.reshape(r1 - r0, W)
    return out, got


def smooth_disparity(disp: DisparityMap, guide, radius: int = 4, sigma: float = 0.5,
                     reliability=None, edge_threshold: float = float("inf")) -> DisparityMap:
    """Guided weighted-median filter.

    Neighbour weights are ``exp(-|g_p - g_q|^2 / (2 sigma^2))``, zero beyond
    ``edge_threshold`` in guide distance, times the neighbour's reliability
    when given.  Invalid pixels contribute no weight and are filled from
    valid neighbours, repeating until every pixel is covered.
    """
    guide = np.asarray(guide, dtype=np.float64)
    if guide.ndim == 2:
        guide = guide[..., None]
    if guide.shape[:2] != disp.shape:
        raise ShapeMismatch(f"guide {guide.shape[:2]} vs disparity {disp.shape}")
    valid = disp.valid & np.isfinite(disp.values)
    if not valid.any():
        raise EmptyInput("no valid disparity to smooth")
    weight = np.ones(disp.shape) if reliability is None else np.asarray(reliability, dtype=np.float64) + 1e-3
    values = np.where(valid, disp.values, 0.0)
    out, got = _weighted_median_pass(values, valid, guide, weight, radius, sigma, edge_threshold)
    filled = got | valid
    # pixels cut off from valid neighbours by guide edges: widen the net
    passes = 0
    while not filled.all() and passes < 64:
        out2, got2 = _weighted_median_pass(out, filled, guide, np.ones(disp.shape), radius, np.inf, np.inf)
        newly = got2 & ~filled
        out[newly] = out2[newly]
        filled |= newly
        passes += 1
    return DisparityMap(out, np.ones(disp.shape, dtype=bool))


def estimate_disparity(lf: LightField, config: DisparityConfig | None = None):
    """Central-view disparity and reliability for ``lf``."""
    config = config or DisparityConfig()
    hyps = config.hypotheses()
    padded = padded_views(lf)
    estimates = []
    for sub in sublfs(lf.angular_shape, config.sublf_ids):
        cv = build_cost_volume(lf, sub, hyps, padded)
        estimates.append(wta_disparity(cv, config.tau, config.exclusion))
        del cv
    disp, rel = fuse(estimates)
    if not config.smooth:
        return disp, rel
    trusted = DisparityMap(disp.values, disp.valid & (rel >= config.min_reliability))
    if not trusted.valid.any():
        trusted = disp
    smoothed = smooth_disparity(trusted, lf.center_view, config.radius, config.sigma, rel, config.edge_threshold)
    return smoothed, rel
