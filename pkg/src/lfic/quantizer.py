"""Uniform scalar quantizer with straight-through gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantSpec:
    levels: int
    lo: float = 0.0
    hi: float = 255.0

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"need at least 2 quantization levels, got {self.levels}")
        if not self.lo < self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.levels - 1)


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(x, spec: QuantSpec) -> np.ndarray:
    """Clamp to range, then map to the nearest level index in [0, L-1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), spec.lo, spec.hi)
    q = _round_half_away((x - spec.lo) * (spec.levels - 1) / (spec.hi - spec.lo))
    return q.astype(np.int64)


def dequantize(q, spec: QuantSpec) -> np.ndarray:
    q = np.asarray(q)
    if q.size and (q.min() < 0 or q.max() > spec.levels - 1):
        raise ValueError(f"level index outside [0, {spec.levels - 1}]")
    return spec.lo + q.astype(np.float64) * (spec.hi - spec.lo) / (spec.levels - 1)


def straight_through_backward(grad_out, x, spec: QuantSpec) -> np.ndarray:
    """Identity Jacobian through rounding; zero where ``x`` was clamped."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return np.where((x < spec.lo) | (x > spec.hi), 0.0, grad_out)
