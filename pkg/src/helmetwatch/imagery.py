"""Frame containers, colour conversions, Sobel gradient and Otsu threshold.

Frames are plain numpy arrays:

- gray frame: ``(height, width)`` ``uint8``
- rgb frame:  ``(height, width, 3)`` ``uint8``, channels in R, G, B order
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image

FRAME_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


class DimensionError(ValueError):
    """Raised when a frame is too small or shaped wrongly for an operation."""


def check_gray(frame: np.ndarray, min_size: int = 1) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise DimensionError(f"expected a 2-D gray frame, got shape {frame.shape}")
    if frame.dtype != np.uint8:
        raise DimensionError(f"expected uint8 gray frame, got {frame.dtype}")
    if frame.shape[0] < min_size or frame.shape[1] < min_size:
        raise DimensionError(
            f"frame {frame.shape[1]}x{frame.shape[0]} is smaller than "
            f"{min_size}x{min_size}"
        )
    return frame


def check_rgb(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.dtype != np.uint8:
        raise DimensionError(
            f"expected (h, w, 3) uint8 rgb frame, got {frame.shape} {frame.dtype}"
        )
    return frame


def to_gray(frame: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded half up: ``(299 R + 587 G + 114 B + 500) // 1000``."""
    frame = check_rgb(frame).astype(np.int32)
    luma = (299 * frame[..., 0] + 587 * frame[..., 1] + 114 * frame[..., 2] + 500) // 1000
    return np.clip(luma, 0, 255).astype(np.uint8)


def rgb_to_hsv(rgb: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone RGB -> HSV for an array of 8-bit triples.

    Parameters
    ----------
    rgb : ndarray
        ``(..., 3)`` array of 8-bit R, G, B values.

    Returns
    -------
    h, s, v : ndarray
        Hue in degrees ``[0, 360)``, saturation and value in ``[0, 1]``.
        Hue is 0 wherever saturation is 0.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = np.max(rgb, axis=-1)
    mn = np.min(rgb, axis=-1)
    delta = mx - mn
    v = mx / 255.0
    s = np.divide(delta, mx, out=np.zeros_like(mx), where=mx > 0)

    safe = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(mx)
    rmax = (mx == r) & (delta > 0)
    gmax = (mx == g) & (delta > 0) & ~rmax
    bmax = (delta > 0) & ~rmax & ~gmax
    h = np.where(rmax, ((g - b) / safe) % 6.0, h)
    h = np.where(gmax, (b - r) / safe + 2.0, h)
    h = np.where(bmax, (r - g) / safe + 4.0, h)
    h = h * 60.0
    h = np.where(h >= 360.0, h - 360.0, h)
    return h, s, v


def rgb_pixel_to_hsv(r: int, g: int, b: int) -> Tuple[float, float, float]:
    h, s, v = rgb_to_hsv(np.array([r, g, b]))
    return float(h), float(s), float(v)


def sobel_magnitude(frame: np.ndarray) -> np.ndarray:
    """Euclidean Sobel magnitude clamped to 255; border pixels are 0."""
    f = check_gray(frame, min_size=3).astype(np.int32)
    gx = (
        (f[:-2, 2:] + 2 * f[1:-1, 2:] + f[2:, 2:])
        - (f[:-2, :-2] + 2 * f[1:-1, :-2] + f[2:, :-2])
    )
    gy = (
        (f[2:, :-2] + 2 * f[2:, 1:-1] + f[2:, 2:])
        - (f[:-2, :-2] + 2 * f[:-2, 1:-1] + f[:-2, 2:])
    )
    out = np.zeros(f.shape, dtype=np.uint8)
    mag = np.rint(np.sqrt((gx * gx + gy * gy).astype(np.float64)))
    out[1:-1, 1:-1] = np.minimum(mag, 255).astype(np.uint8)
    return out


def histogram256(values: np.ndarray) -> np.ndarray:
    """256-bin count histogram of 8-bit values (int64 counts)."""
    values = np.asarray(values)
    return np.bincount(values.ravel().astype(np.int64), minlength=256)[:256]


def otsu_threshold(hist: np.ndarray) -> int:
    """Otsu threshold of a 256-bin histogram.

    The split ``t`` separates bins ``<= t`` from bins ``> t``. Returns the
    ``t`` maximising the between-class variance, the smallest one on ties.
    When all mass sits in a single bin, that bin's index is returned.
    """
    hist = np.asarray(hist)
    if hist.shape != (256,):
        raise ValueError(f"histogram must have 256 bins, got shape {hist.shape}")
    if np.any(hist < 0):
        raise ValueError("histogram counts must be non-negative")
    total = hist.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    nonzero = np.flatnonzero(hist)
    if nonzero.size == 1:
        return int(nonzero[0])

    # float pass to locate candidates, exact pass to rank them
    h = hist.astype(np.float64)
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(h)
    s0 = np.cumsum(h * levels)
    w1 = w0[-1] - w0
    s1 = s0[-1] - s0
    valid = (w0 > 0) & (w1 > 0)
    num = (s0 * w1 - s1 * w0) ** 2
    score = np.where(valid, num / np.where(valid, w0 * w1, 1.0), -1.0)
    best = score.max()
    candidates = np.flatnonzero(score >= best * (1.0 - 1e-9))

    counts = [int(c) for c in hist]
    best_t, best_num, best_den = -1, 0, 1
    cw0 = 0
    cs0 = 0
    total_w = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))
    cand = set(int(c) for c in candidates)
    for t in range(256):
        cw0 += counts[t]
        cs0 += t * counts[t]
        if t not in cand:
            continue
        cw1 = total_w - cw0
        cs1 = total_s - cs0
        n = (cs0 * cw1 - cs1 * cw0) ** 2
        d = cw0 * cw1
        if best_t < 0 or n * best_den > best_num * d:
            best_t, best_num, best_den = t, n, d
    return best_t


# -- frame I/O ---------------------------------------------------------------

def read_frame(path: str | Path) -> np.ndarray:
    """Read a PNG / PGM / PPM file as a gray (2-D) or rgb (3-D) uint8 array."""
    with Image.open(path) as img:
        img.load()
        if img.mode in ("L", "1", "I;16", "I"):
            arr = np.asarray(img.convert("L"))
        else:
            arr = np.asarray(img.convert("RGB"))
    return np.ascontiguousarray(arr, dtype=np.uint8)


def read_rgb(path: str | Path) -> np.ndarray:
    frame = read_frame(path)
    if frame.ndim == 2:
        frame = np.repeat(frame[..., None], 3, axis=2)
    return frame


def read_gray(path: str | Path) -> np.ndarray:
    frame = read_frame(path)
    return to_gray(frame) if frame.ndim == 3 else frame


def write_frame(path: str | Path, frame: np.ndarray) -> None:
    """Write a frame; the format follows the suffix (.png, .pgm, .ppm)."""
    path = Path(path)
    frame = np.asarray(frame, dtype=np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm" and frame.ndim != 2:
        raise DimensionError("PGM output needs a gray frame")
    if suffix == ".ppm" and frame.ndim != 3:
        raise DimensionError("PPM output needs an rgb frame")
    Image.fromarray(np.ascontiguousarray(frame)).save(path)


def frame_name(index: int, suffix: str = ".png") -> str:
    return f"frame_{index:06d}{suffix}"


_NUMBER = re.compile(r"(\d+)")


def list_frames(directory: str | Path) -> List[Path]:
    """Frame files in a directory, ordered by their embedded frame number."""
    directory = Path(directory)
    files = [p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES]

    def key(p: Path):
        nums = _NUMBER.findall(p.stem)
        return (int(nums[-1]) if nums else -1, p.name)

    return sorted(files, key=key)
