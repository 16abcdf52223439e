"""Bjontegaard delta rate between two rate-quality curves.

Rate is bits per pixel; quality is any scalar that increases with fidelity
(PSNR, verification accuracy, ...).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

MIN_POINTS = 4


class RdCurveError(ValueError):
    pass


@dataclass(frozen=True)
class RdCurve:
    rate: np.ndarray
    quality: np.ndarray

    def __post_init__(self):
        rate = np.asarray(self.rate, dtype=np.float64)
        quality = np.asarray(self.quality, dtype=np.float64)
        if rate.shape != quality.shape or rate.ndim != 1:
            raise RdCurveError("rate and quality must be 1-D and the same length")
        if rate.size < MIN_POINTS:
            raise RdCurveError(f"need at least {MIN_POINTS} points, got {rate.size}")
        if np.any(rate <= 0) or not np.all(np.isfinite(rate)):
            raise RdCurveError("rates must be positive and finite")
        if not np.all(np.isfinite(quality)):
            raise RdCurveError("qualities must be finite")
        if not np.all(np.diff(quality) > 0):
            raise RdCurveError("qualities must be strictly increasing")
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "quality", quality)

    @classmethod
    def from_points(cls, points) -> "RdCurve":
        pts = sorted(points, key=lambda p: p[1])
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Average rate difference of ``test`` against ``anchor``, in percent.

    Fits a cubic ``log10(rate) = p(quality)`` to each curve and integrates
    the difference exactly over the shared quality interval.
    """
    lo = max(anchor.quality[0], test.quality[0])
    hi = min(anchor.quality[-1], test.quality[-1])
    if not hi > lo:
        raise RdCurveError("quality ranges do not overlap")
    pa = np.polynomial.Polynomial.fit(anchor.quality, np.log10(anchor.rate), 3)
    pt = np.polynomial.Polynomial.fit(test.quality, np.log10(test.rate), 3)
    ia = pa.convert().integ()
    it = pt.convert().integ()
    mean_diff = ((it(hi) - it(lo)) - (ia(hi) - ia(lo))) / (hi - lo)
    return float((10.0**mean_diff - 1.0) * 100.0)


_RATE_NAMES = ("rate", "bpp")
_QUALITY_NAMES = ("quality", "psnr", "accuracy", "acc")


def parse_rd_csv(text: str) -> RdCurve:
    """Parse ``rate,quality`` lines (optional header) into a curve.

    A header may name the columns; ``bpp`` and ``psnr`` are recognised so
    rd-sweep output can be read directly.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise RdCurveError(f"need at least {MIN_POINTS} points, got 0")
    ri, qi = 0, 1
    first = [c.strip().lower() for c in rows[0]]
    try:
        [float(c) for c in first]
    except ValueError:
        ri = next((first.index(n) for n in _RATE_NAMES if n in first), 0)
        qi = next((first.index(n) for n in _QUALITY_NAMES if n in first), 1)
        rows = rows[1:]
    points = []
    seen = set()
    for lineno, row in enumerate(rows, 1):
        try:
            rate, quality = float(row[ri]), float(row[qi])
        except (ValueError, IndexError) as exc:
            raise RdCurveError(f"malformed line {lineno}: {','.join(row)!r}") from exc
        if quality in seen:
            raise RdCurveError(f"duplicate quality value {quality}")
        seen.add(quality)
        points.append((rate, quality))
    if len(points) < MIN_POINTS:
        raise RdCurveError(f"need at least {MIN_POINTS} points, got {len(points)}")
    return RdCurve.from_points(points)
