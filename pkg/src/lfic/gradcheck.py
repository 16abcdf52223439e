"""Central finite-difference verification of the metric gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import EmbeddingNet, LossWeights, con_loss, sem_loss, total_loss

STEP = 1e-5
TOLERANCE = 1e-5


@dataclass
class ProbeResult:
    loss: str
    probe: int
    analytic: float
    numeric: float
    rel_error: float

    @property
    def ok(self) -> bool:
        return self.rel_error <= TOLERANCE


def rel_error(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def directional_check(fn, xhat, direction, step=STEP):
    """Return (analytic, numeric) directional derivatives of ``fn`` at ``xhat``."""
    _, g = fn(xhat)
    analytic = float(np.sum(g * direction))
    numeric = (fn(xhat + step * direction)[0] - fn(xhat - step * direction)[0]) / (2 * step)
    return analytic, float(numeric)


def _probe_pair(rng, shape):
    x = rng.uniform(16.0, 239.0, size=shape)
    # Offsets bounded away from zero keep the L1 term away from its kinks.
    offset = rng.uniform(1.0, 12.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return x + offset, x


def run_suite(net: EmbeddingNet | None, seed: int = 7, probes: int = 10,
              shape=(24, 20, 3), weights: LossWeights = LossWeights()) -> list[ProbeResult]:
    """Check con, sem (when a net is given) and total losses on seeded probes."""
    rng = np.random.default_rng(seed)
    losses = {"con": lambda xh, x: con_loss(xh, x)}
    if net is not None:
        losses["sem"] = lambda xh, x: sem_loss(xh, x, net)
    losses["total"] = lambda xh, x: total_loss(xh, x, net, weights)
    results = []
    for name, loss in losses.items():
        for p in range(probes):
            xhat, x = _probe_pair(rng, shape)
            direction = rng.normal(size=shape)
            direction /= np.linalg.norm(direction)
            a, n = directional_check(lambda v: loss(v, x), xhat, direction)
            results.append(ProbeResult(name, p, a, n, rel_error(a, n)))
    return results
