"""Byte-exact LFIC container.

Layout (little-endian)::

    "LFIC" | version u8 | height u16 | width u16 | channels u8 | max_block u8
    | levels u8 | flags u8 | mask_len u32 | residual_len u32
    | mask bytes | residual bytes | crc32 u32

A levels byte of 0 stands for 256 levels (quantization disabled).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import lossless, rap
from .errors import (
    BadMagicError,
    ChecksumMismatchError,
    ContainerParamError,
    TruncatedContainerError,
    UnsupportedVersionError,
)

MAGIC = b"LFIC"
VERSION = 1
_HEADER = struct.Struct("<4sBHHBBBBII")
HEADER_SIZE = _HEADER.size
CRC_SIZE = 4


@dataclass(frozen=True)
class ContainerParams:
    height: int
    width: int
    channels: int
    max_block: int
    levels: int
    flags: int = 0

    def validate(self):
        if not (1 <= self.height <= 0xFFFF and 1 <= self.width <= 0xFFFF):
            raise ContainerParamError(f"dimensions {self.height}x{self.width} not encodable")
        if self.channels not in (1, 3):
            raise ContainerParamError(f"channels must be 1 or 3, got {self.channels}")
        if self.max_block not in (4, 8):
            raise ContainerParamError(f"max block must be 4 or 8, got {self.max_block}")
        if not 2 <= self.levels <= 256:
            raise ContainerParamError(f"levels must be in [2, 256], got {self.levels}")
        if self.flags != 0:
            raise ContainerParamError("per-channel masks are reserved; flags must be 0")

    @property
    def padded_shape(self):
        n = self.max_block
        return (-(-self.height // n) * n, -(-self.width // n) * n, self.channels)


@dataclass(frozen=True)
class Container:
    params: ContainerParams
    mask: np.ndarray
    mask_bytes: bytes
    residual_bytes: bytes
    total_bytes: int

    @property
    def bpp(self) -> float:
        return 8.0 * self.total_bytes / (self.params.height * self.params.width)

    @property
    def mask_overhead(self) -> float:
        payload = len(self.mask_bytes) + len(self.residual_bytes)
        return len(self.mask_bytes) / payload if payload else 0.0


def encode_mask(mask: np.ndarray, max_size: int) -> bytes:
    bss = rap.BlockSizeSet(max_size)
    symbols = np.searchsorted(bss.allowed, np.asarray(mask).reshape(-1))
    return lossless.ac_encode(symbols, lossless.AdaptiveModel(len(bss.allowed)))


def decode_mask(data: bytes, grid_shape, max_size: int) -> np.ndarray:
    bss = rap.BlockSizeSet(max_size)
    count = grid_shape[0] * grid_shape[1]
    symbols = lossless.ac_decode(data, count, lossless.AdaptiveModel(len(bss.allowed)))
    return np.asarray(bss.allowed, dtype=np.int64)[symbols].reshape(grid_shape)


def write_container(mask: np.ndarray, residual_bytes: bytes, params: ContainerParams) -> bytes:
    params.validate()
    ph, pw, _ = params.padded_shape
    mask = rap.check_mask(mask, params.max_block, (ph, pw))
    mask_bytes = encode_mask(mask, params.max_block)
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        params.height,
        params.width,
        params.channels,
        params.max_block,
        params.levels & 0xFF,
        params.flags,
        len(mask_bytes),
        len(residual_bytes),
    )
    body = header + mask_bytes + bytes(residual_bytes)
    return body + struct.pack("<I", zlib.crc32(body))


def read_container(data: bytes) -> Container:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}")
    if len(data) < 5:
        raise TruncatedContainerError("missing version byte")
    if data[4] != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {data[4]}")
    if len(data) < HEADER_SIZE + CRC_SIZE:
        raise TruncatedContainerError("container shorter than its header")
    _, _, h, w, k, n, levels, flags, mask_len, res_len = _HEADER.unpack_from(data)
    end = HEADER_SIZE + mask_len + res_len
    if len(data) < end + CRC_SIZE:
        raise TruncatedContainerError(
            f"segments need {end + CRC_SIZE} bytes, container has {len(data)}"
        )
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(data[:end]) != crc:
        raise ChecksumMismatchError("CRC-32 mismatch")
    if len(data) != end + CRC_SIZE:
        raise TruncatedContainerError("trailing bytes after checksum")
    params = ContainerParams(h, w, k, n, levels or 256, flags)
    params.validate()
    mask_bytes = data[HEADER_SIZE : HEADER_SIZE + mask_len]
    residual_bytes = data[HEADER_SIZE + mask_len : end]
    ph, pw, _ = params.padded_shape
    mask = decode_mask(mask_bytes, (ph // n, pw // n), n)
    return Container(params, mask, mask_bytes, residual_bytes, len(data))


def inspect(data: bytes) -> str:
    c = read_container(data)
    p = c.params
    lines = [
        f"dimensions: {p.height}x{p.width}x{p.channels}",
        f"max_block: {p.max_block}",
        f"levels: {p.levels}",
        f"tiles: {rap.tile_count(c.mask, p.max_block)}",
        f"header_bytes: {HEADER_SIZE + CRC_SIZE}",
        f"mask_bytes: {len(c.mask_bytes)}",
        f"residual_bytes: {len(c.residual_bytes)}",
        f"total_bytes: {c.total_bytes}",
        f"bpp: {c.bpp:.6f}",
        f"mask_overhead: {c.mask_overhead:.6f}",
    ]
    return "\n".join(lines) + "\n"
