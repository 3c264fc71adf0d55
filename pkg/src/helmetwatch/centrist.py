"""CENTRIST features: Census Transform of the Sobel image, histogrammed
over 2x2 super-blocks of a 9x4 block grid on a 108x36 window.

Layout::

    window        108 rows x 36 cols
    blocks        9 x 4, each 12 rows x 9 cols
    super-blocks  8 x 3 = 24 (every 2x2 group of adjacent blocks)
    feature       24 x 256 = 6144 counts, super-blocks row-major

Only CT codes at least ``CT_MARGIN`` pixels away from the window edge are
counted. Those codes depend on window pixels alone (3x3 Sobel followed by
3x3 census), so a window's feature is the same whether it is computed on
the isolated patch or cut out of a larger scaled image.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .imagery import DimensionError, check_gray, sobel_magnitude

WINDOW_H = 108
WINDOW_W = 36
BLOCK_ROWS = 9
BLOCK_COLS = 4
BLOCK_H = WINDOW_H // BLOCK_ROWS
BLOCK_W = WINDOW_W // BLOCK_COLS
SB_ROWS = BLOCK_ROWS - 1
SB_COLS = BLOCK_COLS - 1
N_SUPERBLOCKS = SB_ROWS * SB_COLS
N_BINS = 256
FEATURE_DIM = N_SUPERBLOCKS * N_BINS
CT_MARGIN = 2

# sub-pixel lattice of the resampler: positions are multiples of 1/72 px
SUBPIXEL = 72

# census bit order: row-major from the top-left neighbour, MSB first
_CT_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def census_transform(frame: np.ndarray) -> np.ndarray:
    """8-bit census code per interior pixel; border pixels are 0.

    Bit ``k`` (MSB first, neighbours row-major from top-left) is 1 when the
    centre is greater than or equal to that neighbour.
    """
    f = check_gray(frame, min_size=3)
    h, w = f.shape
    centre = f[1:-1, 1:-1]
    code = np.zeros(centre.shape, dtype=np.uint8)
    for k, (dy, dx) in enumerate(_CT_OFFSETS):
        nb = f[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        code |= (centre >= nb).astype(np.uint8) << np.uint8(7 - k)
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = code
    return out


def _block_index_map() -> np.ndarray:
    """Block id (0..35) of every counted position in the window."""
    rows = np.arange(CT_MARGIN, WINDOW_H - CT_MARGIN) // BLOCK_H
    cols = np.arange(CT_MARGIN, WINDOW_W - CT_MARGIN) // BLOCK_W
    return (rows[:, None] * BLOCK_COLS + cols[None, :]).astype(np.int64)


_BLOCK_MAP = _block_index_map()


def _superblock_members() -> np.ndarray:
    """``(24, 4)`` block ids making up each super-block."""
    members = []
    for si in range(SB_ROWS):
        for sj in range(SB_COLS):
            members.append([
                si * BLOCK_COLS + sj, si * BLOCK_COLS + sj + 1,
                (si + 1) * BLOCK_COLS + sj, (si + 1) * BLOCK_COLS + sj + 1,
            ])
    return np.array(members, dtype=np.int64)


SUPERBLOCK_MEMBERS = _superblock_members()


def superblock_mass() -> np.ndarray:
    """Number of counted CT positions in each super-block (input independent)."""
    block_counts = np.bincount(_BLOCK_MAP.ravel(), minlength=BLOCK_ROWS * BLOCK_COLS)
    return block_counts[SUPERBLOCK_MEMBERS].sum(axis=1)


def ct_windows_to_features(ct: np.ndarray, tops: np.ndarray, lefts: np.ndarray) -> np.ndarray:
    """Features of several 108x36 windows cut from one CT image.

    Parameters
    ----------
    ct : ndarray
        CT image (uint8) containing every window.
    tops, lefts : ndarray
        Window origins inside ``ct``.

    Returns
    -------
    ndarray
        ``(n, 6144)`` int32 counts.
    """
    tops = np.asarray(tops, dtype=np.int64)
    lefts = np.asarray(lefts, dtype=np.int64)
    n = tops.size
    if n == 0:
        return np.zeros((0, FEATURE_DIM), dtype=np.int32)
    rr = np.arange(CT_MARGIN, WINDOW_H - CT_MARGIN)
    cc = np.arange(CT_MARGIN, WINDOW_W - CT_MARGIN)
    n_blocks = BLOCK_ROWS * BLOCK_COLS
    feats = np.empty((n, FEATURE_DIM), dtype=np.int32)
    # chunk to bound the temporary index arrays
    chunk = 256
    for start in range(0, n, chunk):
        t = tops[start:start + chunk]
        l = lefts[start:start + chunk]
        m = t.size
        codes = ct[t[:, None, None] + rr[None, :, None], l[:, None, None] + cc[None, None, :]]
        idx = (np.arange(m)[:, None, None] * n_blocks + _BLOCK_MAP[None]) * N_BINS + codes
        blocks = np.bincount(idx.ravel(), minlength=m * n_blocks * N_BINS)
        blocks = blocks.reshape(m, n_blocks, N_BINS)
        sb = blocks[:, SUPERBLOCK_MEMBERS, :].sum(axis=2)
        feats[start:start + m] = sb.reshape(m, FEATURE_DIM)
    return feats


def extract_feature(patch: np.ndarray) -> np.ndarray:
    """CENTRIST vector (6144 int32 counts) of a 108x36 gray patch."""
    patch = check_gray(patch)
    if patch.shape != (WINDOW_H, WINDOW_W):
        raise DimensionError(
            f"patch must be {WINDOW_H}x{WINDOW_W} (rows x cols), got {patch.shape}"
        )
    ct = census_transform(sobel_magnitude(patch))
    return ct_windows_to_features(ct, np.array([0]), np.array([0]))[0]


def extract_features(patches: Sequence[np.ndarray]) -> np.ndarray:
    if len(patches) == 0:
        return np.zeros((0, FEATURE_DIM), dtype=np.int32)
    return np.stack([extract_feature(p) for p in patches])


# -- resampling ----------------------------------------------------------------

def bilinear_fixed(frame: np.ndarray, py: np.ndarray, px: np.ndarray) -> np.ndarray:
    """Bilinear samples on the 1/72-pixel lattice, exact integer arithmetic.

    ``py`` and ``px`` are integer row / column positions in units of 1/72
    pixel (pixel centres at multiples of 72). The output grid is
    ``len(py) x len(px)``; neighbours are clamped at the frame border and the
    result is rounded half up.
    """
    h, w = frame.shape
    py = np.asarray(py, dtype=np.int64)
    px = np.asarray(px, dtype=np.int64)
    y0 = py // SUBPIXEL
    x0 = px // SUBPIXEL
    fy = (py - y0 * SUBPIXEL)[:, None]
    fx = (px - x0 * SUBPIXEL)[None, :]
    y1 = np.clip(y0 + 1, 0, h - 1)[:, None]
    x1 = np.clip(x0 + 1, 0, w - 1)[None, :]
    y0 = np.clip(y0, 0, h - 1)[:, None]
    x0 = np.clip(x0, 0, w - 1)[None, :]
    f = frame.astype(np.int32)
    gx = SUBPIXEL - fx
    gy = SUBPIXEL - fy
    acc = (
        gy * (gx * f[y0, x0] + fx * f[y0, x1])
        + fy * (gx * f[y1, x0] + fx * f[y1, x1])
    )
    half = SUBPIXEL * SUBPIXEL // 2
    return ((acc + half) // (SUBPIXEL * SUBPIXEL)).astype(np.uint8)


def resample_patch(frame: np.ndarray, bbox: Tuple[float, float, float, float]) -> np.ndarray:
    """Bilinear resampling of ``bbox = (x, y, w, h)`` to a 108x36 patch.

    Output pixel ``(r, c)`` samples the source at
    ``(x + (c + 0.5) w / 36 - 0.5, y + (r + 0.5) h / 108 - 0.5)``, with the
    position snapped to the 1/72-pixel lattice.
    """
    frame = check_gray(frame)
    x, y, w, h = (float(v) for v in bbox)
    fh, fw = frame.shape
    eps = 1e-9
    if w < 2 or h < 2:
        raise DimensionError(f"degenerate bbox {bbox}")
    if x < -eps or y < -eps or x + w > fw + eps or y + h > fh + eps:
        raise DimensionError(f"bbox {bbox} outside {fw}x{fh} frame")
    c = np.arange(WINDOW_W)
    r = np.arange(WINDOW_H)
    px = np.rint(SUBPIXEL * x + (2 * c + 1) * w * SUBPIXEL / (2 * WINDOW_W) - SUBPIXEL / 2)
    py = np.rint(SUBPIXEL * y + (2 * r + 1) * h * SUBPIXEL / (2 * WINDOW_H) - SUBPIXEL / 2)
    return bilinear_fixed(frame, py.astype(np.int64), px.astype(np.int64))


def level_positions(width: int, start: int, count: int) -> np.ndarray:
    """Lattice positions of scaled-image pixels ``start .. start+count-1``.

    At a pyramid level with window width ``width`` (frame pixels), scaled
    pixel ``u`` samples the frame at ``(u + 0.5) * width / 36 - 0.5``.
    """
    u = np.arange(start, start + count, dtype=np.int64)
    return (2 * u + 1) * width - SUBPIXEL // 2


def level_image(frame: np.ndarray, width: int, u0: int, v0: int, nu: int, nv: int) -> np.ndarray:
    """Region ``[v0, v0+nv) x [u0, u0+nu)`` of the frame scaled so that a
    ``width x 3*width`` window becomes 36x108."""
    return bilinear_fixed(frame, level_positions(width, v0, nv), level_positions(width, u0, nu))
