"""Monte Carlo oracle for mu(Omega), used only to cross-check the bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import total_mass
from .semialg import ProblemSpec, membership, normalize

Z99 = 2.5758293035489004  # two-sided 99% normal quantile
SHARD = 250_000


@dataclass(frozen=True)
class McEstimate:
    n_samples: int
    hits: int
    estimate: float
    std_error: float
    ci99: tuple[float, float]
    seed: int
    mass_total: float

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "hits": self.hits, "estimate": self.estimate,
                "std_error": self.std_error, "ci99": list(self.ci99), "seed": self.seed,
                "mass_total": self.mass_total}


def _box_muller(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    count = shape[0] * shape[1]
    half = (count + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
    return z[:count].reshape(shape)


def sample(spec: ProblemSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw points (working coordinates) from the normalised reference measure."""
    n = spec.dimension
    kind = spec.measure.kind
    if kind == "lebesgue":
        return rng.uniform(-1.0, 1.0, size=(count, n))
    if kind == "gaussian":
        # density proportional to exp(-x^2 / sigma2): variance sigma2 / 2 per axis
        return _box_muller(rng, (count, n)) * math.sqrt(spec.measure.sigma2 / 2.0)
    return -np.log(1.0 - rng.random((count, n)))


def estimate(spec: ProblemSpec, n_samples: int, seed: int = 0) -> McEstimate:
    if n_samples < 100:
        raise ValueError("Monte Carlo needs at least 100 samples")
    spec = normalize(spec)
    mass = total_mass(spec.measure, spec.dimension) * spec.mass_rescale
    shards = [SHARD] * (n_samples // SHARD)
    if n_samples % SHARD:
        shards.append(n_samples % SHARD)
    children = np.random.SeedSequence(seed).spawn(len(shards))
    hits = 0
    for count, child in zip(shards, children):
        rng = np.random.Generator(np.random.Philox(child))
        hits += int(np.count_nonzero(membership(spec, sample(spec, rng, count))))
    frac = hits / n_samples
    est = mass * frac
    se = mass * math.sqrt(frac * (1.0 - frac) / n_samples)
    return McEstimate(n_samples, hits, est, se, (est - Z99 * se, est + Z99 * se), seed, mass)
