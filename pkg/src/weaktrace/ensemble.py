"""Monte Carlo of repeated weak-measure-then-postselect runs.

Random numbers come from numpy's PCG64 bit generator seeded with the
config's 64-bit seed.  The stream is consumed in a fixed order: one uniform
per particle for the postselection draw, then one uniform per postselected
particle for its pointer readout (inverse CDF on a grid).  Same seed, same
readouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from weaktrace.hilbert import Operator
from weaktrace.pointer import GaussianPointer, couple_exact, postselect_pointer
from weaktrace.scenarios import Scenario
from weaktrace.weakvalue import two_state_at_cut

GRID_POINTS = 8193
GRID_HALF_WIDTH = 10.0  # in sigma


@dataclass(frozen=True)
class EnsembleConfig:
    scenario: Scenario
    operator: Operator
    lam: float
    n_particles: int
    seed: int
    sigma: float = 1.0
    detector: str = "D2"
    cut: int | None = None

    def __post_init__(self):
        if int(self.n_particles) < 1:
            raise ValueError("n_particles must be >= 1")
        if not (math.isfinite(self.lam) and math.isfinite(self.sigma)):
            raise ValueError("lambda and sigma must be finite")
        if self.lam == 0:
            raise ValueError("lambda must be nonzero to form an estimate")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class EnsembleRun:
    n_particles: int
    n_postselected: int
    readouts: np.ndarray
    estimate: float
    stderr: float
    target: float
    success_probability: float

    @property
    def empty(self) -> bool:
        return self.n_postselected == 0

    def histogram(self, bins: int = 60) -> tuple[np.ndarray, np.ndarray]:
        counts, edges = np.histogram(self.readouts, bins=bins)
        return counts, edges


def _inverse_cdf_sampler(x: np.ndarray, density: np.ndarray):
    cdf = np.concatenate([[0.0], np.cumsum((density[1:] + density[:-1]) / 2 * np.diff(x))])
    cdf /= cdf[-1]
    return lambda u: np.interp(u, cdf, x)


def run(cfg: EnsembleConfig) -> EnsembleRun:
    sc = cfg.scenario
    tsv = two_state_at_cut(sc, cfg.detector, cfg.cut)
    target = tsv.weak_value(cfg.operator).real
    ptr = GaussianPointer(0.0, cfg.sigma)
    b = couple_exact(tsv.forward, cfg.operator, ptr, cfg.lam)
    lo = min(0.0, b.shifts.min()) - GRID_HALF_WIDTH * cfg.sigma
    hi = max(0.0, b.shifts.max()) + GRID_HALF_WIDTH * cfg.sigma
    b = couple_exact(tsv.forward, cfg.operator, ptr.with_grid(lo, hi, GRID_POINTS), cfg.lam)
    out = postselect_pointer(b, tsv.backward)

    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    n = int(cfg.n_particles)
    passed = int(np.count_nonzero(rng.random(n) < out.success_probability))
    if passed == 0:
        return EnsembleRun(n, 0, np.empty(0), float("nan"), float("nan"), target, out.success_probability)
    x, dens = out.pointer_density
    readouts = _inverse_cdf_sampler(x, dens)(rng.random(passed)) - ptr.mean
    readouts.setflags(write=False)
    scaled = readouts / cfg.lam
    estimate = float(scaled.mean())
    stderr = float(scaled.std(ddof=1) / math.sqrt(passed)) if passed > 1 else float("nan")
    return EnsembleRun(n, passed, readouts, estimate, stderr, target, out.success_probability)


def precision_curve(cfg: EnsembleConfig, n_grid: Sequence[int]) -> list[tuple[int, float]]:
    """Standard error of the estimate for each ensemble size (same seed each time)."""
    return [(int(n), run(replace(cfg, n_particles=int(n))).stderr) for n in n_grid]


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of ``y = c * x**p`` in log space; returns ``(p, c)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points to fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    p, logc = np.polyfit(np.log(x), np.log(y), 1)
    return float(p), float(np.exp(logc))


def required_n(sigma: float, lam: float, k: float = 3.0) -> int:
    """Ensemble size that resolves a shift ``lam`` against spread ``sigma`` at ``k`` standard errors.

    ``ceil((k sigma / lam)^2)``; a 1e-12 relative slack absorbs decimal
    representation error (e.g. ``3 / 0.01``).
    """
    if not (sigma > 0 and lam > 0 and k > 0):
        raise ValueError("sigma, lambda and k must be positive")
    val = (k * sigma / lam) ** 2
    return max(1, math.ceil(val * (1 - 1e-12)))
