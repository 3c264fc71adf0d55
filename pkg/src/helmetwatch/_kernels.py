"""Compiled inner loops."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def block_box_scores(ct, tops, lefts, bw, rects, bias):
    """Sum of ``bw[b][ct]`` over each block rectangle of every window.

    One integral image per block; ``rects[b] = (r0, r1, c0, c1)`` relative to
    the window origin ``(tops[k], lefts[k])``.
    """
    h, w = ct.shape
    n = tops.size
    scores = np.full(n, bias)
    ii = np.zeros((h + 1, w + 1))
    for b in range(rects.shape[0]):
        lut = bw[b]
        for r in range(h):
            run = 0.0
            for c in range(w):
                run += lut[ct[r, c]]
                ii[r + 1, c + 1] = ii[r, c + 1] + run
        r0, r1, c0, c1 = rects[b, 0], rects[b, 1], rects[b, 2], rects[b, 3]
        for k in range(n):
            t = tops[k]
            l = lefts[k]
            scores[k] += ii[t + r1, l + c1] - ii[t + r0, l + c1] - ii[t + r1, l + c0] + ii[t + r0, l + c0]
    return scores
