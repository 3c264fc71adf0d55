"""Multi-scale sliding-window search around motion regions, and NMS.

Windows live on one global grid per pyramid level. At a level with window
width ``w`` (height ``3w``) the frame is resampled by ``36 / w`` and
windows are 36x108 crops of that scaled image whose origin ``(u, v)`` is a
multiple of the level stride. A window's frame bbox is
``(u w / 36, v w / 36, w, 3 w)``; its patch is exactly
``resample_patch(frame, bbox)``.

Because every window belongs to a fixed grid, restricting the search to
motion regions only selects a subset of the full-frame windows, and a
window's score never depends on which region requested it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .centrist import (
    BLOCK_COLS, BLOCK_H, BLOCK_ROWS, BLOCK_W, CT_MARGIN, N_BINS, SUPERBLOCK_MEMBERS,
    WINDOW_H, WINDOW_W, census_transform, ct_windows_to_features, extract_feature,
    level_image, resample_patch,
)
from ._kernels import block_box_scores
from .classifier.models import CascadeModel, LinearModel, cascade_batch
from .imagery import check_gray, sobel_magnitude


@dataclass(frozen=True)
class Window:
    width: int
    u: int
    v: int

    @property
    def scale(self) -> float:
        return self.width / WINDOW_W

    @property
    def bbox(self) -> Tuple[float, float, float, float]:
        s = self.width / WINDOW_W
        return (self.u * s, self.v * s, float(self.width), float(3 * self.width))


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    w: float
    h: float
    score: float

    @property
    def bbox(self):
        return (self.x, self.y, self.w, self.h)


@dataclass
class ScanBlock:
    """Windows of one level plus the scaled-image rectangle that holds them."""

    width: int
    u0: int
    v0: int
    nu: int
    nv: int
    us: np.ndarray
    vs: np.ndarray

    def windows(self) -> List[Window]:
        return [Window(self.width, int(u), int(v)) for u, v in zip(self.us, self.vs)]


@dataclass
class SearchPlan:
    blocks: List[ScanBlock] = field(default_factory=list)

    def windows(self) -> List[Window]:
        out = []
        for b in self.blocks:
            out.extend(b.windows())
        return out

    def __len__(self):
        return int(sum(b.us.size for b in self.blocks))

    def union(self, other: "SearchPlan") -> "SearchPlan":
        seen = {(w.width, w.u, w.v) for w in self.windows()}
        blocks = list(self.blocks)
        for b in other.blocks:
            keep = np.array([(b.width, int(u), int(v)) not in seen for u, v in zip(b.us, b.vs)], dtype=bool)
            if keep.any():
                blocks.append(ScanBlock(b.width, b.u0, b.v0, b.nu, b.nv, b.us[keep], b.vs[keep]))
                seen.update((b.width, int(u), int(v)) for u, v in zip(b.us[keep], b.vs[keep]))
        return SearchPlan(blocks)


@dataclass(frozen=True)
class ScanParams:
    pad: float = 0.25
    min_scale: float = 0.5
    max_scale: float = 2.0
    scale_step: float = 1.2
    stride_fraction: float = 0.125

    def __post_init__(self):
        if self.pad < 0:
            raise ValueError("pad must be >= 0")
        if not 0 < self.min_scale <= self.max_scale:
            raise ValueError("need 0 < min_scale <= max_scale")
        if self.max_scale > 2.0:
            raise ValueError("max_scale must be <= 2 (no upsampling beyond 2x)")
        if self.min_scale < 0.5:
            raise ValueError("min_scale must be >= 0.5")
        if self.scale_step <= 1.0:
            raise ValueError("scale_step must be > 1")
        if not 0 < self.stride_fraction <= 1:
            raise ValueError("stride_fraction must be in (0, 1]")

    @property
    def widths(self) -> List[int]:
        return window_widths(self.min_scale, self.max_scale, self.scale_step)

    @property
    def stride(self) -> int:
        """Grid step in scaled pixels (frame step is ``stride * w / 36``)."""
        return max(1, round(self.stride_fraction * WINDOW_W))


def window_widths(min_scale: float = 0.5, max_scale: float = 2.0, step: float = 1.2) -> List[int]:
    """Integer window widths for scales ``min_scale * step**k <= max_scale``."""
    widths = []
    k = 0
    while True:
        s = min_scale * step ** k
        if s > max_scale * (1 + 1e-12):
            break
        w = max(2, round(WINDOW_W * s))
        if w not in widths:
            widths.append(w)
        k += 1
    return widths


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _grid_range(lo_px: int, hi_px: int, width: int, span: int, stride: int) -> np.ndarray:
    """Grid origins ``t`` (multiples of stride) with the window inside [lo_px, hi_px)."""
    t_min = _ceil_div(WINDOW_W * lo_px, width)
    t_min = _ceil_div(t_min, stride) * stride
    t_max = (WINDOW_W * hi_px) // width - span
    if t_max < t_min:
        return np.zeros(0, dtype=np.int64)
    return np.arange(t_min, t_max + 1, stride, dtype=np.int64)


def _block_for_rect(x0: int, y0: int, x1: int, y1: int, width: int, stride: int):
    us = _grid_range(x0, x1, width, WINDOW_W, stride)
    vs = _grid_range(y0, y1, width, WINDOW_H, stride)
    if us.size == 0 or vs.size == 0:
        return None
    vv, uu = np.meshgrid(vs, us, indexing="ij")
    return ScanBlock(
        width=width,
        u0=int(us[0]), v0=int(vs[0]),
        nu=int(us[-1] - us[0] + WINDOW_W), nv=int(vs[-1] - vs[0] + WINDOW_H),
        us=uu.ravel(), vs=vv.ravel(),
    )


def inflate(bbox, pad: float, frame_shape) -> Tuple[int, int, int, int]:
    """Grow ``(x, y, w, h)`` by ``pad * size`` per side; returns clamped
    integer corners ``(x0, y0, x1, y1)``."""
    x, y, w, h = bbox
    fh, fw = frame_shape[:2]
    x0 = max(0, math.floor(x - pad * w))
    y0 = max(0, math.floor(y - pad * h))
    x1 = min(fw, math.ceil(x + w + pad * w))
    y1 = min(fh, math.ceil(y + h + pad * h))
    return x0, y0, x1, y1


def full_frame_plan(frame_shape, params: ScanParams = ScanParams()) -> SearchPlan:
    fh, fw = frame_shape[:2]
    blocks = []
    for width in params.widths:
        b = _block_for_rect(0, 0, fw, fh, width, params.stride)
        if b is not None:
            blocks.append(b)
    return SearchPlan(blocks)


def plan_search(regions: Sequence, frame_shape, params: ScanParams = ScanParams()) -> SearchPlan:
    """Windows fully inside each inflated region, at every level.

    Regions are visited in order; a window already planned for an earlier
    region is not repeated.
    """
    plan = SearchPlan()
    seen = set()
    for region in regions:
        bbox = region.bbox if hasattr(region, "bbox") else region
        x0, y0, x1, y1 = inflate(bbox, params.pad, frame_shape)
        for width in params.widths:
            b = _block_for_rect(x0, y0, x1, y1, width, params.stride)
            if b is None:
                continue
            keys = [(width, int(u), int(v)) for u, v in zip(b.us, b.vs)]
            keep = np.array([k not in seen for k in keys], dtype=bool)
            if not keep.any():
                continue
            seen.update(k for k, kp in zip(keys, keep) if kp)
            b.us, b.vs = b.us[keep], b.vs[keep]
            plan.blocks.append(b)
    return plan


# -- scoring ---------------------------------------------------------------

def _block_rects():
    """Per grid block: counted rows/cols relative to the window origin."""
    rects = []
    for bi in range(BLOCK_ROWS):
        for bj in range(BLOCK_COLS):
            r0 = max(bi * BLOCK_H, CT_MARGIN)
            r1 = min((bi + 1) * BLOCK_H, WINDOW_H - CT_MARGIN)
            c0 = max(bj * BLOCK_W, CT_MARGIN)
            c1 = min((bj + 1) * BLOCK_W, WINDOW_W - CT_MARGIN)
            rects.append((r0, r1, c0, c1))
    return rects


_BLOCK_RECTS = _block_rects()
_RECTS_ARRAY = np.array(_BLOCK_RECTS, dtype=np.int64)


def block_weights(linear: LinearModel) -> np.ndarray:
    """``(36, 256)`` weights: each grid block sums the super-blocks it belongs to."""
    w = np.asarray(linear.weights, dtype=np.float64).reshape(-1, N_BINS)
    out = np.zeros((BLOCK_ROWS * BLOCK_COLS, N_BINS))
    for sb, members in enumerate(SUPERBLOCK_MEMBERS):
        for b in members:
            out[b] += w[sb]
    return out


def block_ct(frame: np.ndarray, block: ScanBlock) -> np.ndarray:
    img = level_image(frame, block.width, block.u0, block.v0, block.nu, block.nv)
    return census_transform(sobel_magnitude(img))


def linear_scores_ct(ct: np.ndarray, tops: np.ndarray, lefts: np.ndarray, bw: np.ndarray, bias: float):
    """Linear-stage scores of windows in a CT image via integral images.

    Returns ``(scores, error_bound)``; exact scores differ from these by at
    most ``error_bound`` (floating-point accumulation).
    """
    tops = np.ascontiguousarray(tops, dtype=np.int64)
    lefts = np.ascontiguousarray(lefts, dtype=np.int64)
    scores = block_box_scores(np.ascontiguousarray(ct), tops, lefts,
                              np.ascontiguousarray(bw, dtype=np.float64), _RECTS_ARRAY, float(bias))
    mag = float(np.abs(bw).max(axis=1).sum())
    # worst case for two cumulative sums and four lookups per block
    n = float(ct.size)
    bound = 8.0 * np.finfo(float).eps * n * n * mag + 1e-12 * (1.0 + abs(bias))
    return scores, bound


def scan(frame: np.ndarray, model: CascadeModel, plan: SearchPlan, return_stats: bool = False):
    """Evaluate the cascade on every planned window.

    Equivalent to ``cascade_score(model, extract_feature(resample_patch(frame,
    window.bbox)))`` per window; the linear stage is computed for all windows
    of a block at once and only its survivors get full features.
    Detections are sorted by score, highest first (plan order on ties).
    """
    frame = check_gray(frame)
    bw = block_weights(model.linear)
    theta1 = model.linear.threshold
    found = []  # (score, plan order, window)
    order = 0
    n_linear = n_hik = 0
    for block in plan.blocks:
        n = block.us.size
        if n == 0:
            continue
        ct = block_ct(frame, block)
        tops = block.vs - block.v0
        lefts = block.us - block.u0
        s1, bound = linear_scores_ct(ct, tops, lefts, bw, model.linear.bias)
        cand = np.flatnonzero(s1 >= theta1 - bound)
        n_linear += n
        if cand.size:
            feats = ct_windows_to_features(ct, tops[cand], lefts[cand])
            accepted, scores, hik_done = cascade_batch(model, feats)
            n_hik += int(hik_done.sum())
            for k in np.flatnonzero(accepted):
                i = cand[k]
                found.append((float(scores[k]), order + int(i),
                              Window(block.width, int(block.us[i]), int(block.vs[i]))))
        order += n
    found.sort(key=lambda t: (-t[0], t[1]))
    dets = [Detection(*win.bbox, score=s) for s, _, win in found]
    if return_stats:
        return dets, {"windows": n_linear, "hik": n_hik}
    return dets


def scan_reference(frame: np.ndarray, model: CascadeModel, plan: SearchPlan) -> List[Detection]:
    """Per-window scan straight from the definition (slow; for checking)."""
    from .classifier.models import cascade_score

    found = []
    for i, win in enumerate(plan.windows()):
        res = cascade_score(model, extract_feature(resample_patch(frame, win.bbox)))
        if res.accepted:
            found.append((res.score, i, win))
    found.sort(key=lambda t: (-t[0], t[1]))
    return [Detection(*win.bbox, score=s) for s, _, win in found]


def plan_linear_scores(frame: np.ndarray, plan: SearchPlan, linear: LinearModel):
    """Linear-stage scores of every planned window, in plan order.

    Returns ``(scores, bounds)``. Scores come from integral images; the exact
    score of window ``i`` lies within ``bounds[i]`` of ``scores[i]``.
    """
    frame = check_gray(frame)
    bw = block_weights(linear)
    scores, bounds = [], []
    for block in plan.blocks:
        if block.us.size == 0:
            continue
        ct = block_ct(frame, block)
        s1, bound = linear_scores_ct(ct, block.vs - block.v0, block.us - block.u0, bw, linear.bias)
        scores.append(s1)
        bounds.append(np.full(s1.size, bound))
    if not scores:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(scores), np.concatenate(bounds)


def plan_features(frame: np.ndarray, plan: SearchPlan, select: Iterable[int] | None = None) -> np.ndarray:
    """Features of the selected planned windows (indices in plan order)."""
    frame = check_gray(frame)
    sel = None if select is None else np.asarray(sorted(set(int(i) for i in select)), dtype=np.int64)
    feats = []
    start = 0
    for block in plan.blocks:
        n = block.us.size
        if sel is None:
            idx = np.arange(n)
        else:
            idx = sel[(sel >= start) & (sel < start + n)] - start
        if idx.size:
            ct = block_ct(frame, block)
            feats.append(ct_windows_to_features(ct, block.vs[idx] - block.v0, block.us[idx] - block.u0))
        start += n
    if not feats:
        return np.zeros((0, 6144), dtype=np.int32)
    return np.concatenate(feats)


# -- NMS -------------------------------------------------------------------

def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw_, bh = b
    ix = max(0.0, min(ax + aw, bx + bw_) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw_ * bh - inter
    return inter / union if union > 0 else 0.0


def nms(dets: Sequence[Detection], iou_threshold: float = 0.45) -> List[Detection]:
    """Greedy suppression; ties on score go to the smaller x, then y."""
    if not 0 < iou_threshold < 1:
        raise ValueError("iou_threshold must be in (0, 1)")
    remaining = sorted(dets, key=lambda d: (-d.score, d.x, d.y))
    keep = []
    while remaining:
        best = remaining.pop(0)
        keep.append(best)
        remaining = [d for d in remaining if iou(best.bbox, d.bbox) <= iou_threshold]
    return keep
