"""Diagonal Gaussian density, reparametrized sampling, and closed-form KL.

Two evaluation paths coexist deliberately: `logpdf` builds a differentiable
graph of `Var` nodes for the estimators, while `logpdf_np` is the vectorized
float path the quadrature oracles run on large grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Var, log, vsum, square

LOG_SQRT_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def _scalar(x) -> float:
    return x.value if isinstance(x, Var) else float(x)


@dataclass(frozen=True)
class DiagGaussian:
    """Mean and per-dimension standard deviation; entries may be floats or
    `Var` nodes (when produced by a net or a learnable posterior)."""

    mean: tuple
    std: tuple

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(self.mean))
        object.__setattr__(self, "std", tuple(self.std))
        if len(self.mean) != len(self.std):
            raise ValueError(
                f"mean dim {len(self.mean)} != std dim {len(self.std)}"
            )
        for s in self.std:
            sv = _scalar(s)
            if not (math.isfinite(sv) and sv > 0.0):
                raise ValueError(f"std entries must be positive and finite, got {sv}")

    @property
    def dim(self) -> int:
        return len(self.mean)

    def mean_values(self) -> np.ndarray:
        return np.array([_scalar(m) for m in self.mean])

    def std_values(self) -> np.ndarray:
        return np.array([_scalar(s) for s in self.std])


@dataclass(frozen=True)
class NoiseDraw:
    """A standard-normal draw plus the stream key it came from."""

    eps: np.ndarray
    key: tuple

    @property
    def dim(self) -> int:
        return len(self.eps)


def noise_draw(seed, index: int, dim: int) -> NoiseDraw:
    """Standard-normal noise from a stream keyed by (seed, sample index).

    Streams for distinct keys are independent, so N-sample estimates are
    reproducible and order-independent.
    """
    key = _seed_tuple(seed) + (int(index),)
    rng = np.random.default_rng(np.random.SeedSequence(key))
    return NoiseDraw(eps=rng.standard_normal(dim), key=key)


def _seed_tuple(seed) -> tuple:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def standard_normal(dim: int) -> DiagGaussian:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return DiagGaussian(mean=(0.0,) * dim, std=(1.0,) * dim)


def logpdf(g: DiagGaussian, point: Sequence) -> Var:
    """Differentiable log density: sum_i of
    -log(sqrt(2 pi)) - log(std_i) - (point_i - mean_i)^2 / (2 std_i^2)."""
    if len(point) != g.dim:
        raise ValueError(f"point dim {len(point)} != distribution dim {g.dim}")
    terms = []
    for m, s, p in zip(g.mean, g.std, point):
        z = square(p - m) / (2.0 * s * s)
        ls = log(s) if isinstance(s, Var) else math.log(s)
        terms.append(-LOG_SQRT_TWO_PI - ls - z)
    return vsum(terms)


def logpdf_np(mean, std, points: np.ndarray) -> np.ndarray:
    """Vectorized log density; `points` has shape [..., d] and broadcasts
    against mean/std of shape [d] or [..., d]."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    points = np.asarray(points, dtype=float)
    z = (points - mean) / std
    return np.sum(-LOG_SQRT_TWO_PI - np.log(std) - 0.5 * z * z, axis=-1)


def reparam_sample(g: DiagGaussian, noise: NoiseDraw) -> list:
    """mean + std * eps, elementwise; differentiable through g's parameters."""
    if noise.dim != g.dim:
        raise ValueError(f"noise dim {noise.dim} != distribution dim {g.dim}")
    return [m + s * float(e) for m, s, e in zip(g.mean, g.std, noise.eps)]


def kl_closed_form(a: DiagGaussian, b: DiagGaussian) -> float:
    """KL(a || b) for diagonal Gaussians:
    sum_i [ log(sb/sa) + (sa^2 + (ma - mb)^2) / (2 sb^2) - 1/2 ]."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ma, sa = a.mean_values(), a.std_values()
    mb, sb = b.mean_values(), b.std_values()
    return float(
        np.sum(np.log(sb / sa) + (sa**2 + (ma - mb) ** 2) / (2.0 * sb**2) - 0.5)
    )
