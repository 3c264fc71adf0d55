"""Seeded synthetic surveillance scenes.

A static, low-saturation background with substation-like clutter (poles,
wires, railings, cabinets, equipment boxes) and pedestrians drawn inside 1:3 boxes: a head
in the top fifth spanning the central 60% of the width (helmet colour, or
a dark desaturated hair texture), a full-width torso, and two legs with
background showing between and beside them. Pedestrians may enter the scene after the first frame. Each frame
gets additive Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..centrist import WINDOW_H, WINDOW_W, resample_patch
from ..imagery import to_gray

HELMET_COLORS: Dict[str, Tuple[int, int, int]] = {
    "red": (215, 35, 30),
    "yellow": (235, 200, 25),
    "blue": (30, 85, 215),
    "white": (240, 240, 236),
}


@dataclass(frozen=True)
class PedestrianSpec:
    x: float
    y: float
    width: int
    vx: float = 1.0
    vy: float = 0.0
    helmet: Optional[str] = None
    seed: int = 0
    enter: int = 0  # first frame index (0-based) the pedestrian is visible

    @property
    def height(self) -> int:
        return 3 * self.width

    def bbox_at(self, t: int) -> Tuple[int, int, int, int]:
        return (int(round(self.x + t * self.vx)), int(round(self.y + t * self.vy)),
                self.width, self.height)


@dataclass(frozen=True)
class TruthBox:
    frame_id: int
    x: float
    y: float
    w: float
    h: float
    worn: bool
    color: str = ""

    @property
    def bbox(self):
        return (self.x, self.y, self.w, self.h)


@dataclass
class SyntheticConfig:
    width: int = 640
    height: int = 480
    n_frames: int = 300
    pedestrians: Sequence[PedestrianSpec] = field(default_factory=tuple)
    noise_sigma: float = 2.0
    background_seed: int = 0
    seed: int = 0

    def validate(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("frame must be at least 3x3")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for p in self.pedestrians:
            if p.width < 5 or p.width > self.width or p.height > self.height:
                raise ValueError(f"pedestrian {p} does not fit in a {self.width}x{self.height} frame")
            if p.helmet is not None and p.helmet not in HELMET_COLORS:
                raise ValueError(f"unknown helmet colour {p.helmet!r}")
            if p.enter < 0:
                raise ValueError("enter must be >= 0")
            for t in (p.enter, self.n_frames - 1):
                x, y, w, h = p.bbox_at(t)
                if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                    raise ValueError(f"pedestrian {p} leaves the frame by frame {t}")


# -- textures ----------------------------------------------------------------

def _smooth_noise(rng: np.random.Generator, h: int, w: int, cell: int) -> np.ndarray:
    """Bilinearly upsampled uniform noise in [-1, 1] with feature size ``cell``."""
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.uniform(-1, 1, size=(gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)


def _gray_tint(rng: np.random.Generator, level: float, sat: float) -> np.ndarray:
    tint = rng.uniform(-1, 1, size=3)
    tint -= tint.mean()
    return level * (1.0 + sat * tint)


def render_background(height: int, width: int, seed: int) -> np.ndarray:
    """Static clutter scene as float RGB in [0, 255]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    base = rng.uniform(90, 160)
    img = np.empty((height, width, 3))
    img[:] = _gray_tint(rng, base, 0.08)
    img += (18 * _smooth_noise(rng, height, width, 48) + 6 * _smooth_noise(rng, height, width, 9))[..., None]
    # ground plane: darker lower part
    horizon = int(height * rng.uniform(0.35, 0.55))
    img[horizon:] *= rng.uniform(0.75, 0.95)

    # cabinets
    for _ in range(rng.integers(1, 4)):
        cw, ch = int(rng.integers(width // 12, width // 5)), int(rng.integers(height // 10, height // 4))
        cx, cy = int(rng.integers(0, max(1, width - cw))), int(rng.integers(0, max(1, height - ch)))
        img[cy:cy + ch, cx:cx + cw] = _gray_tint(rng, rng.uniform(60, 200), 0.1)
        img[cy:cy + ch, cx:cx + cw] += 4 * _smooth_noise(rng, ch, cw, 6)[..., None]
    # equipment boxes and signs: dark or light, some two-tone or slotted
    for _ in range(rng.integers(2, 7)):
        bw, bh = int(rng.integers(12, max(13, width // 5))), int(rng.integers(20, max(21, height // 2)))
        bx, by = int(rng.integers(0, max(1, width - bw))), int(rng.integers(0, max(1, height - bh)))
        body = img[by:by + bh, bx:bx + bw]
        body[:] = _clothing(rng)
        body += 6 * _smooth_noise(rng, bh, bw, 4)[..., None]
        if rng.random() < 0.5:
            split = int(rng.integers(bh // 4, 3 * bh // 4 + 1))
            body[split:] = _clothing(rng)
        if rng.random() < 0.4:
            sw = max(1, bw // 5)
            sx = int(rng.integers(0, bw - sw + 1))
            body[int(rng.integers(0, bh // 2 + 1)):, sx:sx + sw] = _gray_tint(rng, base, 0.08)
    # poles
    for _ in range(rng.integers(1, 5)):
        pw = int(rng.integers(3, 13))
        px = int(rng.integers(0, max(1, width - pw)))
        top = int(rng.integers(0, height // 2))
        img[top:, px:px + pw] = _gray_tint(rng, rng.uniform(40, 210), 0.05)
    # railing
    if rng.random() < 0.8:
        ry = int(rng.integers(height // 3, height - 10))
        shade = _gray_tint(rng, rng.uniform(50, 200), 0.05)
        img[ry:ry + 3] = shade
        img[ry + 12:ry + 14] = shade
        for rx in range(int(rng.integers(0, 30)), width, int(rng.integers(25, 60))):
            img[ry:ry + 24, rx:rx + 2] = shade
    # wires: gently sagging curves
    for _ in range(rng.integers(1, 4)):
        y_start = rng.uniform(5, height * 0.4)
        sag = rng.uniform(5, 40)
        shade = _gray_tint(rng, rng.uniform(20, 80), 0.0)
        xs = np.arange(width)
        ys = (y_start + sag * 4 * (xs / width) * (1 - xs / width)).astype(int)
        ys = np.clip(ys, 0, height - 2)
        img[ys, xs] = shade
        img[ys + 1, xs] = shade
    return np.clip(img, 0, 255)


def _clothing(rng: np.random.Generator, backdrop: Optional[float] = None) -> np.ndarray:
    # dark workwear or light vests; mid greys would blend into the clutter
    dark = rng.random() < 0.5 if backdrop is None else backdrop >= 128
    level = rng.uniform(20, 60) if dark else rng.uniform(190, 235)
    return _gray_tint(rng, level, 0.25)


def _luma(rgb: np.ndarray) -> np.ndarray:
    return rgb @ np.array([0.299, 0.587, 0.114])


def render_pedestrian(canvas: np.ndarray, bbox, helmet: Optional[str], seed: int,
                      backdrop: Optional[float] = None) -> None:
    """Draw a pedestrian into a float RGB canvas (in place, clipped to it).

    With ``backdrop`` (median background luminance behind the figure) the
    clothing is dark on bright ground and light otherwise.
    """
    x, y, w, h = (int(v) for v in bbox)
    rng = np.random.Generator(np.random.PCG64(seed))
    cap_h = h // 5
    torso_end = cap_h + int(round(0.45 * h))
    shirt = _clothing(rng, backdrop)
    trousers = _clothing(rng, backdrop)
    figure = np.empty((h, w, 3))
    alpha = np.ones((h, w), dtype=bool)

    if helmet is None:
        hair = _gray_tint(rng, rng.uniform(25, 70), 0.1)
        figure[:cap_h] = hair + 10 * _smooth_noise(rng, cap_h, w, 3)[..., None]
    else:
        color = np.array(HELMET_COLORS[helmet], dtype=np.float64)
        shade = 1.0 - 0.12 * (np.arange(cap_h) / max(1, cap_h - 1))
        figure[:cap_h] = color[None, None, :] * shade[:, None, None]
    figure[cap_h:torso_end] = shirt
    figure[cap_h:torso_end] += 8 * _smooth_noise(rng, torso_end - cap_h, w, 4)[..., None]
    figure[torso_end:] = trousers
    figure[torso_end:] += 6 * _smooth_noise(rng, h - torso_end, w, 4)[..., None]
    head_w = max(1, int(round(0.6 * w)))
    h0 = (w - head_w) // 2
    alpha[:cap_h, :h0] = False
    alpha[:cap_h, h0 + head_w:] = False
    # legs: 30% of the width each, a 20% gap between and 10% margins outside
    legs_top = torso_end + h // 20
    for lo, hi in ((0.0, 0.1), (0.4, 0.6), (0.9, 1.0)):
        alpha[legs_top:, int(round(lo * w)):int(round(hi * w))] = False

    ch, cw = canvas.shape[:2]
    ys0, xs0 = max(0, y), max(0, x)
    ys1, xs1 = min(ch, y + h), min(cw, x + w)
    if ys1 <= ys0 or xs1 <= xs0:
        return
    sub = figure[ys0 - y:ys1 - y, xs0 - x:xs1 - x]
    m = alpha[ys0 - y:ys1 - y, xs0 - x:xs1 - x]
    region = canvas[ys0:ys1, xs0:xs1]
    region[m] = np.clip(sub[m], 0, 255)


def _quantize(img: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    if sigma > 0:
        img = img + rng.normal(0.0, sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _path_luma(luma: np.ndarray, p: PedestrianSpec, n_frames: int) -> float:
    covered = np.zeros(luma.shape, dtype=bool)
    for t in range(p.enter, n_frames):
        x, y, w, h = p.bbox_at(t)
        covered[max(0, y):y + h, max(0, x):x + w] = True
    return float(np.median(luma[covered]))


def generate_synthetic(cfg: SyntheticConfig):
    """Render a sequence.

    Returns
    -------
    frames : list of ndarray
        RGB uint8 frames; frame ``t`` has id ``t + 1``.
    truth : list of TruthBox
        One entry per rendered pedestrian per frame.
    """
    cfg.validate()
    background = render_background(cfg.height, cfg.width, cfg.background_seed)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    luma = _luma(background)
    backdrops = [_path_luma(luma, p, cfg.n_frames) for p in cfg.pedestrians]
    frames, truth = [], []
    for t in range(cfg.n_frames):
        canvas = background.copy()
        for p, backdrop in zip(cfg.pedestrians, backdrops):
            if t < p.enter:
                continue
            bbox = p.bbox_at(t)
            render_pedestrian(canvas, bbox, p.helmet, p.seed, backdrop)
            truth.append(TruthBox(t + 1, *bbox, worn=p.helmet is not None, color=p.helmet or ""))
        frames.append(_quantize(canvas, rng, cfg.noise_sigma))
    return frames, truth


def default_test_scene(seed: int = 7, n_frames: int = 300, width: int = 640, height: int = 480,
                       helmets: Sequence[Optional[str]] = ("red", "yellow", None),
                       enter_gap: int = 15) -> SyntheticConfig:
    """Pedestrians walking across separate horizontal bands.

    Pedestrian ``i`` appears at frame ``enter_gap * (i + 1)``, so the first
    frame shows the empty background.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    peds = []
    n = len(helmets)
    band = height // max(1, n)
    for i, helmet in enumerate(helmets):
        pw = min(int(rng.integers(30, 41)), band // 3)
        ph = 3 * pw
        enter = min(enter_gap * (i + 1), n_frames - 1)
        speed = float(rng.uniform(0.6, 1.2))
        span = speed * (n_frames - 1 - enter)
        y = i * band + int(rng.integers(0, band - ph + 1))
        lo, hi = 5, max(6, int(width - pw - span - 5))
        start = float(rng.integers(lo, hi))
        if i % 2:
            start, vx = width - pw - start, -speed
        else:
            vx = speed
        peds.append(PedestrianSpec(x=start - enter * vx, y=float(y), width=pw, vx=vx, vy=0.0,
                                   helmet=helmet, seed=int(rng.integers(0, 2**31)), enter=enter))
    return SyntheticConfig(width=width, height=height, n_frames=n_frames, pedestrians=tuple(peds),
                           noise_sigma=2.0, background_seed=int(rng.integers(0, 2**31)), seed=seed)


# -- training corpus ---------------------------------------------------------

def positive_patches(n: int, seed: int, jitter: float = 0.04, context: float = 0.06) -> List[np.ndarray]:
    """108x36 gray patches of pedestrians over random clutter.

    ``context`` widens the crop by that fraction of the pedestrian width on
    every side (height grows in proportion), so the figure's outline is
    away from the patch border.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    helmets = [None, "red", "yellow", "blue"]
    patches = []
    for _ in range(n):
        pw = int(rng.integers(18, 61))
        ph = 3 * pw
        margin = pw
        ch, cw = ph + 2 * margin, pw + 2 * margin
        canvas = render_background(ch + 40, cw + 40, int(rng.integers(0, 2**31)))
        oy, ox = int(rng.integers(0, 41)), int(rng.integers(0, 41))
        canvas = canvas[oy:oy + ch, ox:ox + cw].copy()
        helmet = helmets[int(rng.integers(0, len(helmets)))]
        backdrop = float(np.median(_luma(canvas[margin:margin + ph, margin:margin + pw])))
        render_pedestrian(canvas, (margin, margin, pw, ph), helmet, int(rng.integers(0, 2**31)), backdrop)
        img = to_gray(_quantize(canvas, rng, 2.0))
        s = 1.0 + 2.0 * context + rng.uniform(-jitter, jitter)
        bw = pw * s
        bx = margin + rng.uniform(-jitter, jitter) * pw - (bw - pw) / 2
        by = margin + rng.uniform(-jitter, jitter) * pw - (3 * bw - ph) / 2
        patches.append(resample_patch(img, (bx, by, bw, 3 * bw)))
    return patches


def negative_images(n: int, seed: int, height: int = 240, width: int = 320) -> List[np.ndarray]:
    """Gray clutter scenes without pedestrians."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(n):
        bg = render_background(height, width, int(rng.integers(0, 2**31)))
        out.append(to_gray(_quantize(bg, rng, 2.0)))
    return out


def circular_mean_hue(hues: np.ndarray) -> float:
    rad = np.deg2rad(np.asarray(hues, dtype=np.float64))
    ang = np.rad2deg(np.arctan2(np.sin(rad).mean(), np.cos(rad).mean()))
    return float(ang % 360.0)


__all__ = [
    "HELMET_COLORS", "PedestrianSpec", "SyntheticConfig", "TruthBox", "circular_mean_hue",
    "default_test_scene", "generate_synthetic", "negative_images", "positive_patches",
    "render_background", "render_pedestrian", "WINDOW_H", "WINDOW_W",
]
