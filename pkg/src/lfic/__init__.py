"""Regionally adaptive pooling image codec with gradient-guided rate control."""

from .bdrate import RdCurve, bd_rate, parse_rd_csv
from .bitstream import inspect, read_container, write_container
from .codec import decode, encode_with_mask
from .image import INFINITE_PSNR, load_pnm, psnr, save_pnm
from .lossless import BACKEND
from .metric import EmbeddingNet, LossWeights
from .quantizer import QuantSpec, dequantize, quantize
from .ratecontrol import EncodeReport, RefineConfig, encode_with_budget

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EmbeddingNet",
    "EncodeReport",
    "INFINITE_PSNR",
    "LossWeights",
    "QuantSpec",
    "RdCurve",
    "RefineConfig",
    "bd_rate",
    "decode",
    "dequantize",
    "encode_with_budget",
    "encode_with_mask",
    "inspect",
    "load_pnm",
    "parse_rd_csv",
    "psnr",
    "quantize",
    "read_container",
    "save_pnm",
    "write_container",
]
