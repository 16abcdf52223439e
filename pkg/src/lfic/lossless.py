"""DPCM prediction and adaptive arithmetic coding of the quantized mosaic.

The coder kernels come from the compiled ``_ccoder`` extension when it is
importable and from ``_pycoder`` otherwise. Set ``LFIC_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import rap
from .errors import CoderError, MosaicMaskMismatch
from .quantizer import QuantSpec

if os.environ.get("LFIC_PURE_PYTHON"):
    from . import _pycoder as _kernels
else:
    try:
        from . import _ccoder as _kernels
    except ImportError:  # pragma: no cover - depends on the build
        from . import _pycoder as _kernels

BACKEND = "cython" if _kernels.__name__.endswith("_ccoder") else "python"


class AdaptiveModel:
    """Order-0 frequency model: unit initial counts, +1 per coded symbol.

    Counts are halved (rounding up) once the total passes ``2**18`` so the
    32-bit range keeps enough precision; below that the total is always
    ``alphabet_size + symbols_coded``.
    """

    def __init__(self, alphabet_size: int):
        if alphabet_size < 1:
            raise ValueError("alphabet must have at least one symbol")
        self.alphabet_size = alphabet_size
        self.counts = np.ones(alphabet_size, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def ac_encode(symbols, model: AdaptiveModel, kernels=None) -> bytes:
    kernels = kernels or _kernels
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= model.alphabet_size):
        raise CoderError(f"symbol outside alphabet of size {model.alphabet_size}")
    return kernels.encode_symbols(symbols, model.counts)


def ac_decode(data: bytes, count: int, model: AdaptiveModel, kernels=None) -> np.ndarray:
    kernels = kernels or _kernels
    if count < 0:
        raise ValueError("negative symbol count")
    return kernels.decode_symbols(data, int(count), model.counts)


def predict_forward(q) -> np.ndarray:
    """Residuals of the causal predictor, per channel.

    First pixel is kept, the first row predicts from the left and every
    other row from the pixel above.
    """
    q = np.asarray(q, dtype=np.int64)
    e = q.copy()
    e[0, 1:] = q[0, 1:] - q[0, :-1]
    e[1:] = q[1:] - q[:-1]
    return e


def predict_inverse(e) -> np.ndarray:
    e = np.asarray(e, dtype=np.int64)
    q = e.copy()
    q[0] = np.cumsum(e[0], axis=0)
    return np.cumsum(q, axis=0)


def _check_tile_constant(q: np.ndarray, mask: np.ndarray, max_size: int):
    sizes = rap.pixel_sizes(mask, max_size)
    ii, jj = np.indices(sizes.shape)
    if not np.array_equal(q[ii - ii % sizes, jj - jj % sizes], q):
        raise MosaicMaskMismatch("quantized mosaic is not constant over mask tiles")


def coded_symbol_count(mask: np.ndarray, max_size: int, channels: int) -> int:
    return channels * rap.tile_count(mask, max_size)


def code_residuals(q, mask: np.ndarray, max_size: int, spec: QuantSpec) -> bytes:
    """Code one prediction residual per tile per channel.

    Inside a tile every pixel repeats the tile value, so only the residual
    at the tile origin carries information; the decoder rebuilds the rest
    from the mask. Residuals are offset by ``L-1`` into ``[0, 2L-2]``.
    """
    q = np.asarray(q, dtype=np.int64)
    mask = rap.check_mask(mask, max_size, q.shape)
    _check_tile_constant(q, mask, max_size)
    rows, cols, _ = rap.tile_origins(mask, max_size)
    e = predict_forward(q)
    symbols = e[rows, cols, :].reshape(-1) + (spec.levels - 1)
    return ac_encode(symbols, AdaptiveModel(2 * spec.levels - 1))


def decode_residuals(data: bytes, mask: np.ndarray, max_size: int, spec: QuantSpec,
                     shape) -> np.ndarray:
    h, w, k = shape
    mask = rap.check_mask(mask, max_size, shape)
    rows, cols, sizes = rap.tile_origins(mask, max_size)
    symbols = ac_decode(data, rows.size * k, AdaptiveModel(2 * spec.levels - 1))
    residuals = symbols.reshape(-1, k) - (spec.levels - 1)
    plane = np.zeros((h, w, k), dtype=np.int64)
    _kernels.reconstruct_tiles(plane, rows, cols, sizes, residuals)
    if plane.min() < 0 or plane.max() > spec.levels - 1:
        raise CoderError("decoded level index out of range")
    return plane
