"""Synthetic corpora and corpus-level evaluation."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec, ratecontrol
from .image import psnr, read_pnm, save_pnm
from .metric import EmbeddingNet, LossWeights

KINDS = ("constant", "ramp", "checkerboard", "gaussian-blobs", "edge-in-one-superblock")
DEFAULT_BUDGET_BPP = 0.2
OVERHEAD_BOUNDS = (0.02, 0.20)
TARGET_OVERHEAD_BAND = (0.05, 0.10)
REPORT_FIELDS = ("file", "bpp", "mask_overhead", "psnr", "loops", "termination")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    height: int = 144
    width: int = 112
    channels: int = 3
    seed: int = 0
    value: int = 100
    period: int = 8
    target: tuple[int, int] = (3, 5)
    block: int = 8


def gen_image(spec: SyntheticSpec) -> np.ndarray:
    h, w, k = spec.height, spec.width, spec.channels
    if h < 1 or w < 1 or k not in (1, 3):
        raise ValueError(f"invalid dimensions {h}x{w}x{k}")
    rng = np.random.default_rng(spec.seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if spec.kind == "constant":
        img = np.full((h, w, k), spec.value, dtype=np.float64)
    elif spec.kind == "ramp":
        base = 255.0 * xx / max(w - 1, 1)
        img = np.stack([np.roll(base, 7 * c, axis=1) for c in range(k)], axis=2)
    elif spec.kind == "checkerboard":
        board = ((yy // spec.period + xx // spec.period) % 2) * 255.0
        img = np.repeat(board[:, :, None], k, axis=2)
    elif spec.kind == "gaussian-blobs":
        img = np.full((h, w, k), 40.0) + rng.uniform(0, 40, size=k)
        for _ in range(int(rng.integers(2, 6))):
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            sigma = rng.uniform(3, max(4.0, min(h, w) / 4))
            amp = rng.uniform(60, 200, size=k)
            blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
            img += blob[:, :, None] * amp
    elif spec.kind == "edge-in-one-superblock":
        n = spec.block
        ty, tx = spec.target
        if (ty + 1) * n > h or (tx + 1) * n > w:
            raise ValueError(f"target superblock {spec.target} outside {h}x{w}")
        img = np.zeros((h, w, k))
        img[ty * n : (ty + 1) * n, tx * n + n // 2 : (tx + 1) * n] = 255.0
    else:
        raise ValueError(f"unknown synthetic kind {spec.kind!r}")
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def corpus_specs(count: int, seed: int = 0) -> list[SyntheticSpec]:
    """A deterministic mix of kinds and sizes, including unaligned ones."""
    rng = np.random.default_rng(seed)
    dims = [(144, 112), (145, 112), (64, 48), (37, 53), (96, 120), (8, 8), (23, 17)]
    specs = []
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        h, w = dims[(i // len(KINDS)) % len(dims)]
        k = 1 if i % 4 == 3 else 3
        if kind == "edge-in-one-superblock":
            target = (int(rng.integers(0, h // 8)), int(rng.integers(0, w // 8)))
        else:
            target = (0, 0)
        specs.append(
            SyntheticSpec(kind, h, w, k, seed=int(rng.integers(0, 2**31)),
                          value=int(rng.integers(0, 256)), period=int(rng.choice([4, 8, 16])),
                          target=target)
        )
    return specs


def textured_corpus_specs(count: int, seed: int = 0) -> list[SyntheticSpec]:
    """144x112 images with spatially varying content (blobs, checkerboards).

    These stand in for natural face crops when measuring where bits go;
    constant and ramp images leave almost nothing for the residual coder.
    """
    specs = []
    for i in range(count):
        kind = "checkerboard" if i % 4 == 3 else "gaussian-blobs"
        specs.append(SyntheticSpec(kind, 144, 112, 1 if i % 5 == 0 else 3,
                                   seed=seed * 100_003 + 1000 + i, period=(4, 8, 16)[i % 3]))
    return specs


def write_corpus(directory, count: int = 20, seed: int = 0, textured: bool = False) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    make = textured_corpus_specs if textured else corpus_specs
    paths = []
    for i, spec in enumerate(make(count, seed)):
        ext = "ppm" if spec.channels == 3 else "pgm"
        path = directory / f"{i:04d}_{spec.kind}.{ext}"
        path.write_bytes(save_pnm(gen_image(spec)))
        paths.append(path)
    return paths


def list_corpus(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory {directory} not found")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
    if not files:
        raise FileNotFoundError(f"no PNM files in {directory}")
    return files


@dataclass(frozen=True)
class SuiteConfig:
    budget_bpp: float = DEFAULT_BUDGET_BPP
    max_block: int = 8
    levels: int = 8
    refine: ratecontrol.RefineConfig = field(default_factory=ratecontrol.RefineConfig)
    weights: LossWeights = LossWeights()
    weights_path: str | None = None


@dataclass
class FileResult:
    file: str
    bpp: float
    mask_overhead: float
    psnr: float
    loops: int
    termination: str
    sq_error: float
    samples: int
    lossless_ok: bool

    def row(self):
        return [self.file, f"{self.bpp:.6f}", f"{self.mask_overhead:.6f}",
                f"{self.psnr:.4f}", str(self.loops), self.termination]


def encode_file(path, cfg: SuiteConfig) -> FileResult:
    img = read_pnm(path)
    net = EmbeddingNet.load(cfg.weights_path) if cfg.weights_path else None
    enc, rep = ratecontrol.encode_with_budget(
        img, cfg.budget_bpp, cfg.refine, cfg.max_block, cfg.levels, net, cfg.weights
    )
    decoded = codec.decode(enc.data)
    err = decoded.astype(np.float64) - img
    return FileResult(
        file=Path(path).name,
        bpp=rep.achieved_bpp,
        mask_overhead=rep.mask_overhead,
        psnr=psnr(decoded, img),
        loops=rep.loops_used,
        termination=rep.termination,
        sq_error=float(np.sum(err**2)),
        samples=err.size,
        lossless_ok=bool(np.array_equal(decoded, enc.mosaic)),
    )


@dataclass
class SuiteSummary:
    results: list[FileResult]
    budget_bpp: float

    @property
    def mean_bpp(self) -> float:
        return float(np.mean([r.bpp for r in self.results]))

    @property
    def mean_overhead(self) -> float:
        return float(np.mean([r.mask_overhead for r in self.results]))

    @property
    def pooled_psnr(self) -> float:
        """PSNR of the corpus-wide MSE; finite unless every file is exact."""
        mse = sum(r.sq_error for r in self.results) / sum(r.samples for r in self.results)
        return math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)

    def checks(self) -> dict[str, bool]:
        lo, hi = OVERHEAD_BOUNDS
        return {
            "lossless": all(r.lossless_ok for r in self.results),
            "budget": all(r.bpp <= self.budget_bpp for r in self.results
                          if r.termination != ratecontrol.INITIAL_OVERSHOOT),
            "overhead": lo <= self.mean_overhead <= hi,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for r in sorted(self.results, key=lambda r: r.file):
            writer.writerow(r.row())
        return buf.getvalue()

    def to_text(self) -> str:
        lo, hi = TARGET_OVERHEAD_BAND
        in_band = sum(lo <= r.mask_overhead <= hi for r in self.results)
        lines = [
            f"files={len(self.results)}",
            f"budget_bpp={self.budget_bpp:.6f}",
            f"mean_bpp={self.mean_bpp:.6f}",
            f"pooled_psnr={self.pooled_psnr:.4f}",
            f"mean_mask_overhead={self.mean_overhead:.6f}",
            f"overhead_in_5_10_percent={in_band}/{len(self.results)}",
        ]
        lines += [f"check.{k}={'pass' if v else 'fail'}" for k, v in self.checks().items()]
        return "\n".join(lines) + "\n"


def run_suite(corpus_dir, cfg: SuiteConfig = SuiteConfig(), workers: int = 1) -> SuiteSummary:
    files = list_corpus(corpus_dir)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(encode_file, files, [cfg] * len(files)))
    else:
        results = [encode_file(f, cfg) for f in files]
    results.sort(key=lambda r: r.file)
    return SuiteSummary(results, cfg.budget_bpp)
