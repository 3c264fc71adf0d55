"""ViBe background subtraction and motion-region extraction.

The model keeps ``n_samples`` past intensities per pixel. A pixel is
background when at least ``min_matches`` of them lie within ``radius`` of its
current value. Updates are conservative: only background pixels refresh the
model, each with probability ``1 / subsample`` for its own sample set and,
independently, for one random 8-neighbour's sample set.

Randomness comes from numpy's PCG64 generator seeded with ``ViBeParams.seed``;
every frame consumes draws in a fixed order, so a run is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np
from scipy import ndimage

from .imagery import DimensionError, check_gray

# row-major 8-neighbourhood, used by the diffusion step
_NEIGHBOURS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    dtype=np.int64,
)


@dataclass(frozen=True)
class ViBeParams:
    n_samples: int = 20
    radius: int = 20
    min_matches: int = 2
    subsample: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.min_matches < 1:
            raise ValueError("min_matches must be >= 1")
        if self.n_samples < self.min_matches:
            raise ValueError("n_samples must be >= min_matches")
        if self.n_samples > 255:
            raise ValueError("n_samples must be <= 255")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.subsample < 1:
            raise ValueError("subsample must be >= 1")


class UpdateStats(NamedTuple):
    own: int
    neighbour: int


@dataclass(frozen=True)
class MotionRegion:
    x: int
    y: int
    w: int
    h: int
    area: int

    @property
    def bbox(self):
        return (self.x, self.y, self.w, self.h)


class BackgroundModel:
    """Per-pixel sample sets plus the random stream that drives updates.

    Attributes
    ----------
    samples : ndarray
        ``(n_samples, height, width)`` uint8 array.
    rng : numpy.random.Generator
        PCG64 stream; its state advances with every update.
    """

    def __init__(self, params: ViBeParams, samples: np.ndarray, rng: np.random.Generator):
        self.params = params
        self.samples = samples
        self.rng = rng

    @property
    def shape(self):
        return self.samples.shape[1:]

    @classmethod
    def from_first_frame(cls, first: np.ndarray, params: ViBeParams | None = None) -> "BackgroundModel":
        return init_model(first, params or ViBeParams())

    def copy(self) -> "BackgroundModel":
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = self.rng.bit_generator.state
        return BackgroundModel(self.params, self.samples.copy(), rng)

    def segment(self, frame: np.ndarray) -> np.ndarray:
        return segment(self, frame)

    def update(self, frame: np.ndarray, mask: np.ndarray) -> UpdateStats:
        return update(self, frame, mask)


def init_model(first: np.ndarray, params: ViBeParams) -> BackgroundModel:
    """Fill every pixel's samples with values drawn from its 3x3 neighbourhood.

    Draws are uniform with replacement over the nine positions (the pixel
    itself included); coordinates are clamped at the frame border.
    """
    first = check_gray(first, min_size=3)
    rng = np.random.Generator(np.random.PCG64(params.seed))
    h, w = first.shape
    n = params.n_samples
    offsets = rng.integers(0, 9, size=(n, h, w))
    ys = np.arange(h)[None, :, None]
    xs = np.arange(w)[None, None, :]
    yy = np.clip(ys + offsets // 3 - 1, 0, h - 1)
    xx = np.clip(xs + offsets % 3 - 1, 0, w - 1)
    samples = np.ascontiguousarray(first[yy, xx])
    return BackgroundModel(params, samples, rng)


def _check_dims(model: BackgroundModel, frame: np.ndarray) -> np.ndarray:
    frame = check_gray(frame)
    if frame.shape != model.shape:
        raise DimensionError(
            f"frame shape {frame.shape} does not match model shape {model.shape}"
        )
    return frame


def segment(model: BackgroundModel, frame: np.ndarray) -> np.ndarray:
    """Foreground mask (True = foreground) for one frame.

    A pixel is background iff ``#{i : |frame - sample_i| <= R} >= min_matches``.
    """
    frame = _check_dims(model, frame)
    r = model.params.radius
    f = frame.astype(np.int16)
    lo = np.clip(f - r, 0, 255).astype(np.uint8)
    hi = np.clip(f + r, 0, 255).astype(np.uint8)
    count = np.zeros(frame.shape, dtype=np.uint8)
    for s in model.samples:
        count += (s >= lo) & (s <= hi)
    return count < model.params.min_matches


def _last_unique(flat_targets: np.ndarray) -> np.ndarray:
    """Indices of the last occurrence of every distinct target."""
    rev = flat_targets[::-1]
    _, first_in_rev = np.unique(rev, return_index=True)
    return np.sort(flat_targets.size - 1 - first_in_rev)


def update(model: BackgroundModel, frame: np.ndarray, mask: np.ndarray) -> UpdateStats:
    """Conservative stochastic update, in place.

    Draw order per frame: own-update lottery (full frame), own sample indices,
    diffusion lottery (full frame), neighbour directions, neighbour sample
    indices. When several diffusions hit the same neighbour sample, the last
    source in raster order wins; diffusion is applied after own updates.
    """
    frame = _check_dims(model, frame)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != model.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match model {model.shape}")
    p = model.params
    rng = model.rng
    h, w = model.shape
    background = ~mask

    own_draw = rng.integers(0, p.subsample, size=(h, w))
    oy, ox = np.nonzero(background & (own_draw == 0))
    own_idx = rng.integers(0, p.n_samples, size=oy.size)

    nb_draw = rng.integers(0, p.subsample, size=(h, w))
    ny, nx = np.nonzero(background & (nb_draw == 0))
    direction = rng.integers(0, 8, size=ny.size)
    nb_idx = rng.integers(0, p.n_samples, size=ny.size)

    model.samples[own_idx, oy, ox] = frame[oy, ox]

    if ny.size:
        ty = np.clip(ny + _NEIGHBOURS[direction, 0], 0, h - 1)
        tx = np.clip(nx + _NEIGHBOURS[direction, 1], 0, w - 1)
        flat = (nb_idx * h + ty) * w + tx
        keep = _last_unique(flat)
        model.samples[nb_idx[keep], ty[keep], tx[keep]] = frame[ny[keep], nx[keep]]
    return UpdateStats(int(oy.size), int(ny.size))


def _open_close(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask.copy()
    size = 2 * radius + 1
    m = mask.astype(np.uint8)
    m = ndimage.minimum_filter(m, size=size, mode="nearest")
    m = ndimage.maximum_filter(m, size=size, mode="nearest")
    m = ndimage.maximum_filter(m, size=size, mode="nearest")
    m = ndimage.minimum_filter(m, size=size, mode="nearest")
    return m.astype(bool)


def extract_regions(mask: np.ndarray, min_area: int = 100, morph_radius: int = 1) -> List[MotionRegion]:
    """Clean a foreground mask and return its 8-connected components.

    Morphological opening then closing with a ``(2r+1)``-square element
    (borders replicated), then 8-connected labelling. Components smaller
    than ``min_area`` pixels are dropped; the rest are sorted by area,
    largest first, then by top-left corner.
    """
    mask = np.asarray(mask, dtype=bool)
    cleaned = _open_close(mask, morph_radius)
    labels, n = ndimage.label(cleaned, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    regions = []
    for label, sl in enumerate(ndimage.find_objects(labels), start=1):
        area = int(areas[label])
        if sl is None or area < min_area:
            continue
        ys, xs = sl
        regions.append(MotionRegion(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start, area))
    regions.sort(key=lambda r: (-r.area, r.y, r.x))
    return regions
