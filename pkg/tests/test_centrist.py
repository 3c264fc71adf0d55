import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra import numpy as hnp

from helmetwatch.centrist import (
    BLOCK_H, BLOCK_W, CT_MARGIN, FEATURE_DIM, N_BINS, N_SUPERBLOCKS, SUPERBLOCK_MEMBERS,
    WINDOW_H, WINDOW_W, census_transform, extract_feature, level_image, resample_patch,
    superblock_mass,
)
from helmetwatch.imagery import DimensionError, sobel_magnitude


def ct_oracle(f):
    f = f.astype(int)
    h, w = f.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            code = 0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dy == dx == 0:
                        continue
                    code = (code << 1) | int(f[y, x] >= f[y + dy, x + dx])
            out[y, x] = code
    return out


def feature_oracle(patch):
    """Per-definition histogram: loop over super-blocks and their pixels."""
    ct = ct_oracle(sobel_magnitude(patch))
    feat = np.zeros(FEATURE_DIM, dtype=np.int64)
    for sb in range(N_SUPERBLOCKS):
        si, sj = divmod(sb, 3)
        for y in range(si * BLOCK_H, (si + 2) * BLOCK_H):
            for x in range(sj * BLOCK_W, (sj + 2) * BLOCK_W):
                if CT_MARGIN <= y < WINDOW_H - CT_MARGIN and CT_MARGIN <= x < WINDOW_W - CT_MARGIN:
                    feat[sb * N_BINS + int(ct[y, x])] += 1
    return feat


def test_worked_example():
    patch = np.array([[32, 64, 96], [32, 64, 96], [32, 32, 96]], dtype=np.uint8)
    assert census_transform(patch)[1, 1] == 214


def test_constant_frame():
    ct = census_transform(np.full((6, 5), 9, dtype=np.uint8))
    assert np.all(ct[1:-1, 1:-1] == 255)
    assert not ct[0].any() and not ct[-1].any() and not ct[:, 0].any() and not ct[:, -1].any()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.uint8, (8, 8)))
def test_ct_matches_oracle(frame):
    assert np.array_equal(census_transform(frame), ct_oracle(frame))


def test_ct_rejects_small():
    with pytest.raises(DimensionError):
        census_transform(np.zeros((2, 2), dtype=np.uint8))


def test_superblock_layout():
    assert FEATURE_DIM == 6144 and N_SUPERBLOCKS == 24
    assert SUPERBLOCK_MEMBERS.shape == (24, 4)
    mass = superblock_mass()
    # corner super-blocks lose two margin rows and columns, interior ones lose nothing
    assert mass[0] == (2 * BLOCK_H - CT_MARGIN) * (2 * BLOCK_W - CT_MARGIN)
    assert mass[4] == (2 * BLOCK_H) * (2 * BLOCK_W)


def test_feature_matches_oracle(rng):
    for _ in range(3):
        patch = rng.integers(0, 256, size=(WINDOW_H, WINDOW_W), dtype=np.uint8)
        assert np.array_equal(extract_feature(patch), feature_oracle(patch))


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.uint8, (WINDOW_H, WINDOW_W)))
def test_feature_segment_mass(patch):
    f = extract_feature(patch)
    assert f.shape == (6144,)
    assert np.array_equal(f.reshape(24, 256).sum(axis=1), superblock_mass())


def test_border_pixel_does_not_matter(rng):
    patch = rng.integers(0, 256, size=(WINDOW_H, WINDOW_W), dtype=np.uint8)
    other = patch.copy()
    other[0, 5] ^= 0xFF
    assert np.array_equal(extract_feature(patch), extract_feature(other))
    assert np.array_equal(extract_feature(patch), extract_feature(patch.copy()))


def test_wrong_patch_size():
    with pytest.raises(DimensionError):
        extract_feature(np.zeros((36, 108), dtype=np.uint8))


def test_resample_identity(rng):
    frame = rng.integers(0, 256, size=(150, 60), dtype=np.uint8)
    assert np.array_equal(resample_patch(frame, (7, 20, WINDOW_W, WINDOW_H)),
                          frame[20:20 + WINDOW_H, 7:7 + WINDOW_W])


def test_resample_downscale_by_two_averages():
    frame = np.zeros((WINDOW_H * 2, WINDOW_W * 2), dtype=np.uint8)
    frame[:, 1::2] = 100
    patch = resample_patch(frame, (0, 0, 2 * WINDOW_W, 2 * WINDOW_H))
    assert np.all(patch == 50)


def test_resample_rejects_outside():
    frame = np.zeros((100, 100), dtype=np.uint8)
    with pytest.raises(DimensionError):
        resample_patch(frame, (80, 0, 36, 108))
    with pytest.raises(DimensionError):
        resample_patch(frame, (0, 0, 1, 1))


def test_level_image_matches_resample(rng):
    frame = rng.integers(0, 256, size=(240, 200), dtype=np.uint8)
    for width in (18, 26, 54):
        u, v = 8, 4
        img = level_image(frame, width, u, v, WINDOW_W, WINDOW_H)
        bbox = (u * width / WINDOW_W, v * width / WINDOW_W, width, 3 * width)
        assert np.array_equal(img, resample_patch(frame, bbox))
