import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfic import rap


def brute_tile_means(img, mask, n_max):
    """Canonical-order tile means by explicit loops."""
    out = []
    for sr in range(mask.shape[0]):
        for sc in range(mask.shape[1]):
            n = mask[sr, sc]
            for ti in range(n_max // n):
                for tj in range(n_max // n):
                    r0, c0 = sr * n_max + ti * n, sc * n_max + tj * n
                    out.extend(img[r0 : r0 + n, c0 : c0 + n].mean(axis=(0, 1)))
    return np.array(out)


def random_mask(rng, grid, n_max):
    return rng.choice(rap.BlockSizeSet(n_max).allowed, size=grid)


def test_block_size_sets():
    assert rap.BlockSizeSet(8).allowed == (1, 2, 4, 8)
    assert rap.BlockSizeSet(4).allowed == (1, 2, 4)
    assert rap.BlockSizeSet(8).next_smaller(8) == 4
    assert rap.BlockSizeSet(6).allowed == (1, 2, 3, 6)
    with pytest.raises(ValueError):
        rap.BlockSizeSet(0)


def test_constant_image_any_mask(rng):
    img = np.full((16, 24, 3), 37.0)
    mask = random_mask(rng, (2, 3), 8)
    assert np.all(rap.pool_tile_means(img, mask, 8) == 37.0)


def test_single_tile_mean():
    img = np.array([[1.0, 3.0], [5.0, 7.0]])[:, :, None]
    assert rap.pool_tile_means(img, np.array([[2]]), 2).tolist() == [4.0]
    assert rap.assemble_rap([4.0], np.array([[2]]), 2, img.shape).ravel().tolist() == [4.0] * 4


def test_ramp_quadrants():
    img = np.arange(16, dtype=np.float64).reshape(4, 4, 1)
    mask = np.array([[2]])
    tiles = rap.pool_tile_means(img, mask, 4)
    expected = brute_tile_means(img, mask, 4)
    assert expected.tolist() == [2.5, 4.5, 10.5, 12.5]
    assert tiles.tolist() == expected.tolist()
    mosaic = rap.assemble_rap(tiles, mask, 4, img.shape)
    assert mosaic[:2, :2].ravel().tolist() == [2.5] * 4
    assert mosaic[:2, 2:].ravel().tolist() == [4.5] * 4
    assert mosaic[2:, :2].ravel().tolist() == [10.5] * 4
    assert mosaic[2:, 2:].ravel().tolist() == [12.5] * 4


def test_single_mean_replicated():
    img = np.array([[1.0, 3.0, 0, 0], [5.0, 7.0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])[:, :, None]
    mask = np.array([[2]])
    mosaic = rap.rap_mosaic(img, mask, 4)
    assert mosaic[:2, :2].ravel().tolist() == [4.0] * 4


def test_pool_matches_brute_force(rng):
    for n_max in (4, 8):
        img = rng.uniform(0, 255, (3 * n_max, 2 * n_max, 3))
        mask = random_mask(rng, (3, 2), n_max)
        np.testing.assert_allclose(
            rap.pool_tile_means(img, mask, n_max), brute_tile_means(img, mask, n_max), rtol=1e-13
        )


def test_finest_mask_is_identity(rng):
    img = rng.uniform(0, 255, (16, 8, 3))
    mask = np.ones((2, 1), dtype=int)
    assert np.array_equal(rap.assemble_rap(rap.pool_tile_means(img, mask, 8), mask, 8, img.shape), img)
    assert np.array_equal(rap.rap_mosaic(img, mask, 8), img)


def test_assemble_length_mismatch():
    with pytest.raises(ValueError):
        rap.assemble_rap(np.zeros(3), np.array([[8]]), 8, (8, 8, 1))


def test_mask_dimension_mismatch():
    with pytest.raises(ValueError):
        rap.pool_tile_means(np.zeros((16, 16, 1)), np.array([[8]]), 8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_max=st.sampled_from([4, 8]),
       rows=st.integers(1, 3), cols=st.integers(1, 3), k=st.sampled_from([1, 3]))
def test_rap_properties(seed, n_max, rows, cols, k):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0, 255, (rows * n_max, cols * n_max, k))
    mask = random_mask(rng, (rows, cols), n_max)
    tiles = rap.pool_tile_means(img, mask, n_max)
    assert tiles.size == k * rap.tile_count(mask, n_max)
    mosaic = rap.assemble_rap(tiles, mask, n_max, img.shape)
    np.testing.assert_array_equal(mosaic, rap.rap_mosaic(img, mask, n_max))
    # idempotence
    again = rap.assemble_rap(rap.pool_tile_means(mosaic, mask, n_max), mask, n_max, img.shape)
    np.testing.assert_allclose(again, mosaic, rtol=0, atol=1e-12)
    # mean preservation per tile
    np.testing.assert_allclose(rap.pool_tile_means(mosaic, mask, n_max), tiles, atol=1e-12)
    # energy contraction per channel
    assert np.all(mosaic.var(axis=(0, 1)) <= img.var(axis=(0, 1)) + 1e-9)


def test_tile_origins_canonical_order():
    mask = np.array([[8, 4]])
    rows, cols, sizes = rap.tile_origins(mask, 8)
    assert list(zip(rows, cols, sizes)) == [
        (0, 0, 8), (0, 8, 4), (0, 12, 4), (4, 8, 4), (4, 12, 4)
    ]


def test_pad_aligned_unchanged():
    img = np.zeros((144, 112, 3), np.uint8)
    padded, orig = rap.pad_to_superblocks(img, 8)
    assert padded.shape == (144, 112, 3) and orig == (144, 112)
    padded, _ = rap.pad_to_superblocks(np.zeros((8, 8, 1), np.uint8), 8)
    assert padded.shape == (8, 8, 1)


def test_pad_replicates_edge(rng):
    img = rng.integers(0, 256, (145, 112, 3)).astype(np.uint8)
    padded, orig = rap.pad_to_superblocks(img, 8)
    assert padded.shape == (152, 112, 3) and orig == (145, 112)
    for r in range(145, 152):
        assert np.array_equal(padded[r], img[144].astype(float))
    assert np.array_equal(padded[:145], img.astype(float))
