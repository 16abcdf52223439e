"""Regionally adaptive pooling.

A mask assigns one block size ``n`` (a divisor of the maximum size ``N``)
to every ``N x N`` superblock. Each superblock is split into ``(N/n)**2``
tiles and every tile is replaced by its per-channel mean, giving a
piecewise-constant mosaic at full resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlockSizeSet:
    max_size: int

    def __post_init__(self):
        if int(self.max_size) != self.max_size or self.max_size < 1:
            raise ValueError(f"maximum block size must be a positive integer, got {self.max_size}")

    @property
    def allowed(self) -> tuple[int, ...]:
        return tuple(n for n in range(1, self.max_size + 1) if self.max_size % n == 0)

    def index(self, n: int) -> int:
        return self.allowed.index(n)

    def next_smaller(self, n: int) -> int:
        i = self.index(n)
        if i == 0:
            raise ValueError("block size 1 cannot be refined")
        return self.allowed[i - 1]


def check_mask(mask: np.ndarray, max_size: int, shape=None) -> np.ndarray:
    """Validate a mask grid; ``shape`` is the padded (H, W[, K]) image shape."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be a 2-D grid of block sizes")
    allowed = BlockSizeSet(max_size).allowed
    if not np.all(np.isin(mask, allowed)):
        raise ValueError(f"mask cells must be in {allowed}")
    if shape is not None:
        expect = (shape[0] // max_size, shape[1] // max_size)
        if shape[0] % max_size or shape[1] % max_size or mask.shape != expect:
            raise ValueError(
                f"mask {mask.shape} does not match image {shape[:2]} with N={max_size}"
            )
    return mask.astype(np.int64)


def tile_count(mask: np.ndarray, max_size: int) -> int:
    mask = np.asarray(mask)
    return int(np.sum((max_size // mask) ** 2))


def pixel_sizes(mask: np.ndarray, max_size: int) -> np.ndarray:
    """Per-pixel block size, shape (H, W)."""
    m = np.asarray(mask)
    return np.repeat(np.repeat(m, max_size, axis=0), max_size, axis=1)


def tile_origins(mask: np.ndarray, max_size: int):
    """Top-left pixel and size of every tile, in canonical scan order.

    Canonical order visits superblocks in raster order and the tiles of a
    superblock in raster order. Returns ``(rows, cols, sizes)`` arrays.
    """
    mask = np.asarray(mask)
    sizes = pixel_sizes(mask, max_size)
    h, w = sizes.shape
    ii, jj = np.indices((h, w))
    origin = (ii % sizes == 0) & (jj % sizes == 0)
    rows, cols = ii[origin], jj[origin]
    sb = (rows // max_size) * mask.shape[1] + cols // max_size
    n = sizes[origin]
    in_sb = ((rows % max_size) // n) * (max_size // n) + (cols % max_size) // n
    order = np.lexsort((in_sb, sb))
    return rows[order], cols[order], n[order]


def _block_means(img: np.ndarray, n: int) -> np.ndarray:
    h, w, k = img.shape
    return img.reshape(h // n, n, w // n, n, k).mean(axis=(1, 3))


def _upsample(a: np.ndarray, n: int) -> np.ndarray:
    return np.repeat(np.repeat(a, n, axis=0), n, axis=1)


def rap_mosaic(img: np.ndarray, mask: np.ndarray, max_size: int) -> np.ndarray:
    """Pool and re-expand in one vectorised pass: the mosaic ``x_RAP``."""
    img = np.asarray(img, dtype=np.float64)
    mask = check_mask(mask, max_size, img.shape)
    sizes = pixel_sizes(mask, max_size)[:, :, None]
    out = np.empty_like(img)
    for n in np.unique(mask):
        up = _upsample(_block_means(img, int(n)), int(n))
        np.copyto(out, up, where=sizes == n)
    return out


def pool_tile_means(img: np.ndarray, mask: np.ndarray, max_size: int) -> np.ndarray:
    """Per-tile, per-channel means in canonical scan order (channels innermost)."""
    img = np.asarray(img, dtype=np.float64)
    mask = check_mask(mask, max_size, img.shape)
    mosaic = rap_mosaic(img, mask, max_size)
    rows, cols, _ = tile_origins(mask, max_size)
    return mosaic[rows, cols, :].reshape(-1)


def assemble_rap(tiles, mask: np.ndarray, max_size: int, shape) -> np.ndarray:
    """Replicate tile values over their tiles (nearest-neighbour expansion)."""
    h, w, k = shape
    mask = check_mask(mask, max_size, shape)
    tiles = np.asarray(tiles, dtype=np.float64).reshape(-1)
    rows, cols, sizes = tile_origins(mask, max_size)
    if tiles.size != rows.size * k:
        raise ValueError(f"expected {rows.size * k} tile values, got {tiles.size}")
    values = tiles.reshape(-1, k)
    # Map each pixel to its tile index, then gather.
    index = np.empty((h, w), dtype=np.int64)
    for n in np.unique(sizes):
        sel = sizes == n
        grid = np.full((h // n, w // n), -1, dtype=np.int64)
        grid[rows[sel] // n, cols[sel] // n] = np.flatnonzero(sel)
        up = _upsample(grid, int(n))
        np.copyto(index, up, where=up >= 0)
    return values[index]


def pad_to_superblocks(img: np.ndarray, max_size: int):
    """Edge-replicate to multiples of ``max_size``; returns (float image, (H, W))."""
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w = img.shape[:2]
    ph = -h % max_size
    pw = -w % max_size
    padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return padded.astype(np.float64), (h, w)


def init_mask(shape, max_size: int) -> np.ndarray:
    """Coarsest mask: every superblock at the largest block size."""
    h, w = shape[:2]
    if h % max_size or w % max_size:
        raise ValueError("shape must be padded to whole superblocks")
    return np.full((h // max_size, w // max_size), max_size, dtype=np.int64)
