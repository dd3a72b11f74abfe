"""Two-sample exponential scale-mixture model and its sufficient statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mixing import MixingSpec, sample_tau

__all__ = [
    "ValidationError",
    "ModelParams",
    "SuffStats",
    "TAU_COUPLINGS",
    "validate",
    "sample_dataset",
    "stats_from_raw",
]

MIN_SAMPLE_SIZE = 3

# "shared": one tau per replicate drives both samples.
# "per_statistic": S1, X, S2 and Y each get their own tau draw.
TAU_COUPLINGS = ("shared", "per_statistic")


class ValidationError(ValueError):
    """Invalid model parameters or raw data."""


@dataclass(frozen=True)
class ModelParams:
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    p1: int
    p2: int

    @property
    def eta(self) -> float:
        return self.sigma1 / self.sigma2


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if it satisfies every model invariant."""
    for name in ("mu1", "mu2", "sigma1", "sigma2"):
        value = getattr(params, name)
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value}")
    for name in ("sigma1", "sigma2"):
        if getattr(params, name) <= 0:
            raise ValidationError(f"{name} must be > 0")
    for name in ("p1", "p2"):
        value = getattr(params, name)
        if int(value) != value:
            raise ValidationError(f"{name} must be an integer, got {value}")
        if value < MIN_SAMPLE_SIZE:
            raise ValidationError(f"{name} < {MIN_SAMPLE_SIZE}")
    if params.sigma1 > params.sigma2:
        raise ValidationError("sigma1 > sigma2")
    return params


@dataclass(frozen=True)
class SuffStats:
    """``(S1, X, S2, Y)`` with sample sizes.

    Fields may be scalars or equally shaped numpy arrays (one entry per
    replicate); every estimator is vectorized over them.
    """

    s1: float
    x_min: float
    s2: float
    y_min: float
    p1: int
    p2: int

    @property
    def w(self):
        return np.divide(self.s2, self.s1)

    @property
    def w1(self):
        return np.divide(self.x_min, self.s1)

    @property
    def w2(self):
        return np.divide(self.y_min, self.s1)

    @property
    def u(self):
        return np.divide(self.s1, self.s2)

    @property
    def u1(self):
        return np.divide(self.y_min, self.s2)

    def scaled(self, a: float) -> "SuffStats":
        return SuffStats(a * self.s1, a * self.x_min, a * self.s2, a * self.y_min, self.p1, self.p2)

    def __getitem__(self, idx) -> "SuffStats":
        return SuffStats(
            np.asarray(self.s1)[idx],
            np.asarray(self.x_min)[idx],
            np.asarray(self.s2)[idx],
            np.asarray(self.y_min)[idx],
            self.p1,
            self.p2,
        )


def sample_dataset(
    params: ModelParams,
    mixing: MixingSpec,
    rng: np.random.Generator,
    size: int | None = None,
    tau_coupling: str = "shared",
) -> SuffStats:
    """Draw ``size`` replicates (one if ``None``) and reduce them to ``SuffStats``.

    With ``tau_coupling="shared"`` a single tau per replicate scales both raw
    samples, which are generated observation by observation and reduced with
    :func:`stats_from_raw` semantics. ``"per_statistic"`` draws each of
    ``S1, X, S2, Y`` from its conditional law with an independent tau.
    """
    validate(params)
    n = 1 if size is None else int(size)
    p1, p2 = int(params.p1), int(params.p2)

    if tau_coupling == "shared":
        tau = np.broadcast_to(sample_tau(mixing, rng, n), (n,))
        e1 = rng.standard_exponential((n, p1))
        e2 = rng.standard_exponential((n, p2))
        x = params.mu1 + (params.sigma1 / tau)[:, None] * e1
        y = params.mu2 + (params.sigma2 / tau)[:, None] * e2
        x_min = x.min(axis=1)
        y_min = y.min(axis=1)
        s1 = x.sum(axis=1) - p1 * x_min
        s2 = y.sum(axis=1) - p2 * y_min
        # guard against tiny negative round-off in the spacing sums
        s1 = np.maximum(s1, 0.0)
        s2 = np.maximum(s2, 0.0)
    elif tau_coupling == "per_statistic":
        taus = [np.broadcast_to(sample_tau(mixing, rng, n), (n,)) for _ in range(4)]
        s1 = params.sigma1 / taus[0] * rng.standard_gamma(p1 - 1, n)
        x_min = params.mu1 + params.sigma1 / (p1 * taus[1]) * rng.standard_exponential(n)
        s2 = params.sigma2 / taus[2] * rng.standard_gamma(p2 - 1, n)
        y_min = params.mu2 + params.sigma2 / (p2 * taus[3]) * rng.standard_exponential(n)
    else:
        raise ValidationError(f"tau_coupling must be one of {TAU_COUPLINGS}, got {tau_coupling!r}")

    if size is None:
        return SuffStats(float(s1[0]), float(x_min[0]), float(s2[0]), float(y_min[0]), p1, p2)
    return SuffStats(s1, x_min, s2, y_min, p1, p2)


def _as_sample(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if arr.size < MIN_SAMPLE_SIZE:
        raise ValidationError(f"{name} needs at least {MIN_SAMPLE_SIZE} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def stats_from_raw(x: Sequence[float], y: Sequence[float]) -> SuffStats:
    """Reduce two raw samples to ``(S1, X, S2, Y)``."""
    xa = _as_sample(x, "x")
    ya = _as_sample(y, "y")
    x_min = float(xa.min())
    y_min = float(ya.min())
    s1 = math.fsum(xa - x_min)
    s2 = math.fsum(ya - y_min)
    return SuffStats(s1, x_min, s2, y_min, int(xa.size), int(ya.size))
