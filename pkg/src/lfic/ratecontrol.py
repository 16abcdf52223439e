"""Gradient-guided mask refinement under a bit budget.

Start with every superblock at the largest block size; each loop scores
superblocks by the summed absolute loss gradient on the reconstruction
and splits the highest scoring ones to the next smaller size. Every loop
is measured by a real encode; the step that first exceeds the budget is
undone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import codec, rap
from .errors import NothingRefinable
from .image import as_image_u8
from .metric import EmbeddingNet, LossWeights, MetricPlugin, total_loss
from .quantizer import QuantSpec, straight_through_backward

init_mask = rap.init_mask

BUDGET_REACHED = "budget-reached"
MAX_LOOPS = "max-loops"
FULLY_REFINED = "fully-refined"
INITIAL_OVERSHOOT = "initial-overshoot"


@dataclass(frozen=True)
class RefineConfig:
    max_loops: int = 32
    refine_fraction: float = 0.05

    def __post_init__(self):
        if self.max_loops < 1:
            raise ValueError("max_loops must be at least 1")
        if not 0 < self.refine_fraction <= 1:
            raise ValueError("refine_fraction must be in (0, 1]")


@dataclass
class EncodeReport:
    achieved_bpp: float
    mask_overhead: float
    loops_used: int
    termination: str
    tile_counts: list[int] = field(default_factory=list)
    trace: list[tuple[float, float]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"achieved_bpp={self.achieved_bpp:.6f}",
            f"mask_overhead={self.mask_overhead:.6f}",
            f"loops={self.loops_used}",
            f"termination={self.termination}",
        ]
        lines += [f"trace.{i}={b:.6f},{l:.6g}" for i, (b, l) in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def superblock_scores(x: np.ndarray, mask: np.ndarray, max_size: int, spec: QuantSpec,
                      net: EmbeddingNet | None, weights: LossWeights,
                      adv: MetricPlugin | None = None):
    """Sum of |d loss / d x_RAP| over each superblock; returns (scores, loss)."""
    mosaic, _, recon = codec.reconstruct(x, mask, max_size, spec)
    loss, g = total_loss(recon, x, net, weights, adv)
    g = np.abs(straight_through_backward(g, mosaic, spec))
    h, w, k = g.shape
    n = max_size
    scores = g.reshape(h // n, n, w // n, n, k).sum(axis=(1, 3, 4))
    return scores, loss


def refine_step(mask: np.ndarray, scores: np.ndarray, max_size: int,
                cfg: RefineConfig) -> np.ndarray:
    """Split the top-scoring refinable superblocks one size level down.

    Ties go to the lower raster index.
    """
    mask = np.asarray(mask)
    flat = mask.reshape(-1)
    refinable = np.flatnonzero(flat > 1)
    if refinable.size == 0:
        raise NothingRefinable("every superblock is already at block size 1")
    take = math.ceil(cfg.refine_fraction * refinable.size)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)[refinable]
    order = np.lexsort((refinable, -s))
    chosen = refinable[order[:take]]
    bss = rap.BlockSizeSet(max_size)
    out = flat.copy()
    for c in chosen:
        out[c] = bss.next_smaller(int(out[c]))
    return out.reshape(mask.shape)


def encode_with_budget(img, target_bpp: float, cfg: RefineConfig = RefineConfig(),
                       max_size: int = 8, levels: int = 8,
                       net: EmbeddingNet | None = None,
                       weights: LossWeights = LossWeights(),
                       adv: MetricPlugin | None = None):
    """Run the refinement loop; returns (codec.Encoded, EncodeReport)."""
    if not target_bpp > 0:
        raise ValueError("target bpp must be positive")
    img = as_image_u8(img)
    x, _ = rap.pad_to_superblocks(img, max_size)
    spec = QuantSpec(levels)
    mask = init_mask(x.shape, max_size)
    best = codec.encode_with_mask(img, mask, max_size, levels, padded=x)
    tiles = [rap.tile_count(mask, max_size)]
    trace = []
    loops = 0
    if best.bpp > target_bpp:
        _, loss = superblock_scores(x, mask, max_size, spec, net, weights, adv)
        trace.append((best.bpp, loss))
        reason = INITIAL_OVERSHOOT
    else:
        while True:
            scores, loss = superblock_scores(x, mask, max_size, spec, net, weights, adv)
            trace.append((best.bpp, loss))
            if loops >= cfg.max_loops:
                reason = MAX_LOOPS
                break
            if np.all(mask == 1):
                reason = FULLY_REFINED
                break
            candidate = refine_step(mask, scores, max_size, cfg)
            trial = codec.encode_with_mask(img, candidate, max_size, levels, padded=x)
            if trial.bpp > target_bpp:
                reason = BUDGET_REACHED
                break
            mask, best = candidate, trial
            loops += 1
            tiles.append(rap.tile_count(mask, max_size))
    report = EncodeReport(
        achieved_bpp=best.bpp,
        mask_overhead=best.container.mask_overhead,
        loops_used=loops,
        termination=reason,
        tile_counts=tiles,
        trace=trace,
    )
    return best, report
