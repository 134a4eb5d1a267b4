"""Seeded Gaussian sampling for perturbation neighborhoods.

The generator is counter-based SplitMix64: draw ``k`` of a stream seeded with
``s`` is ``mix64(s + (k + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

(all arithmetic mod 2**64). A uniform in [0, 1) is ``(u >> 11) * 2**-53``.
Normals come from Box-Muller on consecutive uniform pairs ``(u1, u2)``:
``r = sqrt(-2 ln(1 - u1))`` and the outputs ``r cos(2 pi u2)``, ``r sin(2 pi u2)``
are emitted in that order, both of them used.

Independent streams for parallel work come from :func:`derive_seed`.
"""

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z):
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(base_seed, *indices):
    """Fold integer indices into ``base_seed`` to get an independent stream seed.

    ``h0 = mix64(base_seed)``, then ``h <- mix64(h ^ mix64(index + GOLDEN_GAMMA))``
    for each index in turn. Negative indices are taken mod 2**64.
    """
    h = mix64(int(base_seed))
    for idx in indices:
        h = mix64(h ^ mix64((int(idx) + GOLDEN_GAMMA) & MASK64))
    return h


class SplitMixStream:
    """Stateful single-owner stream of uint64 / uniform / standard normal draws."""

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self._counter = 0
        self._spare = None

    def next_uint64(self, count):
        k = np.arange(self._counter + 1, self._counter + 1 + count, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + k * np.uint64(GOLDEN_GAMMA)
            return _mix64_array(z)

    def uniform(self, count):
        """``count`` draws from [0, 1)."""
        return (self.next_uint64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count):
        """``count`` standard normal draws."""
        out = np.empty(count, dtype=np.float64)
        start = 0
        if self._spare is not None and count > 0:
            out[0] = self._spare
            self._spare = None
            start = 1
        need = count - start
        if need <= 0:
            return out
        pairs = (need + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        values = np.empty(2 * pairs)
        values[0::2] = r * np.cos(theta)
        values[1::2] = r * np.sin(theta)
        out[start:] = values[:need]
        if 2 * pairs > need:
            self._spare = values[-1]
        return out


def standard_normal_stream(seed):
    return SplitMixStream(seed)


@dataclass(frozen=True)
class PerturbationConfig:
    """Neighborhood ``N(center, variance * I)`` sampled ``count`` times with ``seed``."""

    center: np.ndarray
    variance: float
    count: int
    seed: int = 0

    def __post_init__(self):
        center = np.array(self.center, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(center)):
            raise ValueError("center must be finite")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not np.isfinite(self.variance) or self.variance <= 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")
        if int(self.count) < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "seed", int(self.seed) & MASK64)

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def sigma(self):
        return float(np.sqrt(self.variance))


def gaussian_perturbations(cfg):
    """``cfg.count x d`` matrix; row ``k`` is ``center + sigma * z_k`` (row-major draws)."""
    z = SplitMixStream(cfg.seed).normal(cfg.count * cfg.dim).reshape(cfg.count, cfg.dim)
    return cfg.center + cfg.sigma * z
