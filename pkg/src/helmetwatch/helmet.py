"""Head localisation and helmet colour discrimination.

The head ROI is the top fifth of a pedestrian box. Its pixels are converted
to HSV; saturation is thresholded with Otsu's method (no fixed saturation
threshold) and hue is gated against configured colour ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .imagery import check_rgb, histogram256, otsu_threshold, rgb_to_hsv

# scaled saturation (0-255) a single-bin histogram must reach to pass the gate
DEGENERATE_S_GATE = 26
WHITE = "white"
WHITE_V_MIN = 0.8


@dataclass(frozen=True)
class HueRange:
    label: str
    lo: float
    hi: float

    def __post_init__(self):
        for v in (self.lo, self.hi):
            if not 0 <= v < 360:
                raise ValueError(f"hue bound {v} outside [0, 360)")
        if self.lo == self.hi:
            raise ValueError(f"empty hue range for {self.label!r}")

    def contains(self, h):
        """Inclusive membership; ``lo > hi`` wraps through 0 degrees."""
        h = np.asarray(h)
        if self.lo < self.hi:
            return (h >= self.lo) & (h <= self.hi)
        return (h >= self.lo) | (h <= self.hi)


DEFAULT_RANGES = (
    HueRange("red", 350.0, 10.0),
    HueRange("yellow", 45.0, 70.0),
    HueRange("blue", 200.0, 260.0),
)


@dataclass(frozen=True)
class HelmetVerdict:
    worn: bool
    color: Optional[str]
    ratio: float
    head_roi: Tuple[float, float, float, float]
    s_threshold: int


def head_roi(person, fraction: float = 0.2):
    """Top ``fraction`` of ``(x, y, w, h)``: ``(x, y, w, max(1, floor(h * fraction)))``."""
    x, y, w, h = person
    if h < 5:
        raise ValueError(f"person box height {h} < 5; head region degenerate")
    if fraction == 0.2:
        head_h = max(1, math.floor(h / 5))
    else:
        head_h = max(1, math.floor(h * fraction))
    return (x, y, w, head_h)


def crop_roi(frame: np.ndarray, roi) -> np.ndarray:
    """Pixels covered by a (possibly fractional) box, clipped to the frame."""
    x, y, w, h = roi
    fh, fw = frame.shape[:2]
    x0 = max(0, int(math.floor(x)))
    y0 = max(0, int(math.floor(y)))
    x1 = min(fw, max(x0 + 1, int(math.floor(x + w))))
    y1 = min(fh, max(y0 + 1, int(math.floor(y + h))))
    return frame[y0:y1, x0:x1]


def classify_head(
    patch: np.ndarray,
    ranges: Sequence[HueRange] = DEFAULT_RANGES,
    min_ratio: float = 0.3,
    v_floor: float = 0.15,
    achromatic_white: bool = False,
    roi=None,
) -> HelmetVerdict:
    """Decide helmet presence and colour for a head patch.

    Saturation (scaled to 0-255) is histogrammed over pixels with
    ``v >= v_floor`` and split with Otsu. A pixel matches a colour when it is
    bright enough, passes the saturation gate and its hue lies in the range.
    If the saturation histogram has a single occupied bin, the gate passes
    pixels at that bin only when it is at least ``DEGENERATE_S_GATE``.

    With ``achromatic_white``, pixels failing the saturation gate with
    ``v >= 0.8`` count towards a ``"white"`` class listed after the ranges.
    """
    patch = check_rgb(patch)
    if patch.shape[0] == 0 or patch.shape[1] == 0:
        raise ValueError("empty head patch")
    if not ranges:
        raise ValueError("no hue ranges configured")
    h, s, v = rgb_to_hsv(patch)
    s8 = np.rint(s * 255.0).astype(np.int64)
    bright = v >= v_floor
    total = s8.size
    roi = roi if roi is not None else (0, 0, patch.shape[1], patch.shape[0])

    if not bright.any():
        return HelmetVerdict(False, None, 0.0, roi, 0)
    hist = histogram256(s8[bright])
    s_thr = otsu_threshold(hist)
    if np.count_nonzero(hist) == 1:
        gate = s8 >= DEGENERATE_S_GATE
    else:
        gate = s8 > s_thr
    passing = bright & gate

    labels: List[str] = []
    ratios: List[float] = []
    for rng in ranges:
        labels.append(rng.label)
        ratios.append(np.count_nonzero(passing & rng.contains(h)) / total)
    if achromatic_white:
        labels.append(WHITE)
        ratios.append(np.count_nonzero(bright & ~gate & (v >= WHITE_V_MIN)) / total)

    best = int(np.argmax(ratios))  # first maximum wins ties
    ratio = float(ratios[best])
    worn = ratio >= min_ratio and ratio > 0
    return HelmetVerdict(worn, labels[best] if worn else None, ratio, roi, int(s_thr))


def verdict_for_detection(frame_rgb: np.ndarray, person_bbox, ranges=DEFAULT_RANGES,
                          min_ratio=0.3, v_floor=0.15, achromatic_white=False,
                          fraction=0.2) -> HelmetVerdict:
    roi = head_roi(person_bbox, fraction)
    return classify_head(crop_roi(frame_rgb, roi), ranges, min_ratio, v_floor,
                         achromatic_white, roi=roi)


# -- drawing ---------------------------------------------------------------

GREEN = (0, 200, 0)
RED = (220, 0, 0)
ROI_COLOR = (255, 255, 0)


def rect_outline_pixels(bbox, shape) -> Tuple[np.ndarray, np.ndarray]:
    """Rows/cols of a 1-px rectangle outline, snapped to integer pixels."""
    x, y, w, h = bbox
    fh, fw = shape[:2]
    x0 = int(np.clip(math.floor(x), 0, fw - 1))
    y0 = int(np.clip(math.floor(y), 0, fh - 1))
    x1 = int(np.clip(math.ceil(x + w) - 1, 0, fw - 1))
    y1 = int(np.clip(math.ceil(y + h) - 1, 0, fh - 1))
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    rows = np.concatenate([np.full(xs.size, y0), np.full(xs.size, y1), ys, ys])
    cols = np.concatenate([xs, xs, np.full(ys.size, x0), np.full(ys.size, x1)])
    return rows, cols


def annotate(frame: np.ndarray, detections, verdicts) -> np.ndarray:
    """Copy of ``frame`` with person boxes (green if a helmet is worn, red
    otherwise) and head ROIs drawn as 1-pixel outlines."""
    out = check_rgb(frame).copy()
    for det, verdict in zip(detections, verdicts):
        bbox = det.bbox if hasattr(det, "bbox") else det
        rows, cols = rect_outline_pixels(bbox, out.shape)
        out[rows, cols] = GREEN if verdict.worn else RED
        rows, cols = rect_outline_pixels(verdict.head_roi, out.shape)
        out[rows, cols] = ROI_COLOR
    return out
