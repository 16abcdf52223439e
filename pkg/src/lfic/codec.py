"""Encode an image under a fixed mask and decode containers back to pixels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitstream, lossless, rap
from .image import as_image_u8, to_u8
from .quantizer import QuantSpec, dequantize, quantize


@dataclass
class Encoded:
    data: bytes
    container: bitstream.Container
    mosaic: np.ndarray  # decoded 8-bit mosaic, original size
    recon: np.ndarray  # padded float reconstruction seen by the metric

    @property
    def bpp(self) -> float:
        return self.container.bpp


def reconstruct(x: np.ndarray, mask: np.ndarray, max_size: int, spec: QuantSpec):
    """Mosaic, level indices and dequantized reconstruction for a padded image."""
    mosaic = rap.rap_mosaic(x, mask, max_size)
    q = quantize(mosaic, spec)
    return mosaic, q, dequantize(q, spec)


def encode_with_mask(img, mask: np.ndarray, max_size: int, levels: int,
                     padded=None) -> Encoded:
    img = as_image_u8(img)
    if padded is None:
        padded, _ = rap.pad_to_superblocks(img, max_size)
    spec = QuantSpec(levels)
    h, w, k = img.shape
    _, q, recon = reconstruct(padded, mask, max_size, spec)
    residual = lossless.code_residuals(q, mask, max_size, spec)
    params = bitstream.ContainerParams(h, w, k, max_size, levels)
    data = bitstream.write_container(mask, residual, params)
    container = bitstream.Container(
        params, np.asarray(mask), bitstream.encode_mask(mask, max_size), residual, len(data)
    )
    return Encoded(data, container, to_u8(recon[:h, :w]), recon)


def decode(data: bytes) -> np.ndarray:
    """Container bytes to the 8-bit mosaic at the original size."""
    c = bitstream.read_container(data)
    p = c.params
    spec = QuantSpec(p.levels)
    q = lossless.decode_residuals(c.residual_bytes, c.mask, p.max_block, spec, p.padded_shape)
    return to_u8(dequantize(q, spec)[: p.height, : p.width])
