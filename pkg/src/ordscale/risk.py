"""Losses, Monte Carlo risk, closed-form BAEE risk and relative risk improvement.

Random numbers come from counter-based Philox streams. Replicates are split
into fixed blocks of ``BLOCK_SIZE``; block ``j`` uses the stream keyed by
``(seed, j)``. Blocks may be evaluated by any number of threads and are
stitched back in order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .estimators import EstimatorId, LossId, Target, baee_coefficient, estimate
from .mixing import MixingKind, MixingSpec, density
from .model import ModelParams, sample_dataset, validate
from .specialfn import DEFAULT_QUADRATURE, DomainError, QuadratureSettings, digamma, integrate

__all__ = [
    "BLOCK_SIZE",
    "THREADS_ENV",
    "ReplicateError",
    "RiskEstimate",
    "PairedRri",
    "loss",
    "replicate_losses",
    "mc_risk",
    "oracle_baee_risk",
    "rri",
    "rri_std_error_independent",
    "rri_paired",
    "paired_rri_many",
    "default_threads",
    "summarize",
]

BLOCK_SIZE = 4096
THREADS_ENV = "ORDSCALE_THREADS"


class ReplicateError(RuntimeError):
    """A replicate produced an invalid estimate; the run is aborted."""

    def __init__(self, message: str, replicate: int):
        super().__init__(f"replicate {replicate}: {message}")
        self.replicate = replicate


@dataclass(frozen=True)
class RiskEstimate:
    mean_loss: float
    std_error: float
    replicates: int
    seed: int


class PairedRri(NamedTuple):
    baseline: RiskEstimate
    improved: RiskEstimate
    rri_percent: float
    rri_std_error: float


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def loss(loss_id, delta, sigma):
    """Symmetric loss ``d/s + s/d - 2`` or Stein loss ``d/s - ln(d/s) - 1``."""
    loss_id = LossId.parse(loss_id)
    d = np.asarray(delta, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if np.any(~(d > 0)) or np.any(~(s > 0)):
        raise DomainError("delta and sigma must be > 0")
    r = d / s
    if loss_id is LossId.SYMMETRIC:
        out = r + 1.0 / r - 2.0
    else:
        out = r - np.log(r) - 1.0
    # the exact minimum is 0; clip round-off below it
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def _check_seed(seed) -> int:
    if int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed}")
    return int(seed)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _block_losses(estimators, loss_id, params, mixing, seed, block, start, count, tau_coupling):
    stats = sample_dataset(params, mixing, block_rng(seed, block), size=count, tau_coupling=tau_coupling)
    bad = ~((stats.s1 > 0) & (stats.s2 > 0))
    if np.any(bad):
        raise ReplicateError("zero spacing statistic", start + int(np.flatnonzero(bad)[0]))
    out = np.empty((len(estimators), count))
    for i, est in enumerate(estimators):
        sigma = params.sigma1 if est.target is Target.SIGMA1 else params.sigma2
        try:
            values = np.asarray(estimate(est, loss_id, stats, mixing), dtype=float)
        except DomainError as exc:
            raise ReplicateError(f"{est.kind.value}/{est.target.value}: {exc}", start) from exc
        invalid = ~(np.isfinite(values) & (values > 0))
        if np.any(invalid):
            idx = start + int(np.flatnonzero(invalid)[0])
            raise ReplicateError(f"{est.kind.value}/{est.target.value} gave a non-positive estimate", idx)
        out[i] = loss(loss_id, values, sigma)
    return out


def replicate_losses(
    estimators: Sequence[EstimatorId],
    loss_id,
    params: ModelParams,
    mixing: MixingSpec,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    tau_coupling: str = "shared",
) -> np.ndarray:
    """Per-replicate losses, shape ``(len(estimators), replicates)``.

    All estimators see the same simulated data.
    """
    validate(params)
    loss_id = LossId.parse(loss_id)
    seed = _check_seed(seed)
    replicates = int(replicates)
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise DomainError("threads must be >= 1")
    estimators = list(estimators)
    blocks = [(j, j * BLOCK_SIZE, min(BLOCK_SIZE, replicates - j * BLOCK_SIZE))
              for j in range(math.ceil(replicates / BLOCK_SIZE))]

    def run(block):
        j, start, count = block
        return _block_losses(estimators, loss_id, params, mixing, seed, j, start, count, tau_coupling)

    if threads == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    return np.concatenate(parts, axis=1)


def summarize(values: np.ndarray, seed: int) -> RiskEstimate:
    """Mean and standard error of per-replicate losses."""
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RiskEstimate(mean, se, n, seed)


def mc_risk(
    estimator: EstimatorId,
    loss_id,
    params: ModelParams,
    mixing: MixingSpec,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    tau_coupling: str = "shared",
) -> RiskEstimate:
    """Monte Carlo risk of one estimator with its standard error."""
    if int(replicates) < 2:
        raise DomainError("replicates must be >= 2")
    losses = replicate_losses([estimator], loss_id, params, mixing, replicates, seed,
                              threads=threads, tau_coupling=tau_coupling)
    return summarize(losses[0], int(seed))


def oracle_baee_risk(loss_id, p: int, mixing: MixingSpec,
                     settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """Exact risk of the BAEE when the location is zero.

    Given tau the BAEE over the true scale is ``coef * V / tau`` with
    ``V ~ Gamma(p-1, 1)``, whose expected loss has a closed form; the mixing
    expectation is then a one-dimensional integral over the density of tau.
    """
    loss_id = LossId.parse(loss_id)
    p = int(p)
    coef = baee_coefficient(Target.SIGMA1, loss_id, p, p, mixing)
    if loss_id is LossId.STEIN:
        const = -math.log(coef) - digamma(p - 1) - 1.0

        def conditional(t):
            return coef * (p - 1) / t + np.log(t) + const
    else:
        def conditional(t):
            return coef * (p - 1) / t + t / (coef * (p - 2)) - 2.0

    if mixing.kind is MixingKind.DEGENERATE:
        return float(conditional(1.0))

    def integrand(t):
        t = np.asarray(t, dtype=float)
        h = density(mixing, t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.where(h > 0, conditional(np.where(t > 0, t, 1.0)) * h, 0.0)
        return np.where(np.isfinite(val), val, 0.0)

    return integrate(integrand, 0.0, math.inf, settings, vectorized=True)


def rri(risk_baseline: RiskEstimate, risk_improved: RiskEstimate) -> float:
    """Relative risk improvement in percent."""
    if not risk_baseline.mean_loss > 0:
        raise DomainError("baseline risk must be > 0")
    return 100.0 * (risk_baseline.mean_loss - risk_improved.mean_loss) / risk_baseline.mean_loss


def rri_std_error_independent(risk_baseline: RiskEstimate, risk_improved: RiskEstimate) -> float:
    """Delta-method SE of :func:`rri` for two independently simulated risks."""
    b, i = risk_baseline.mean_loss, risk_improved.mean_loss
    if not b > 0:
        raise DomainError("baseline risk must be > 0")
    return 100.0 * math.hypot(risk_improved.std_error / b, i * risk_baseline.std_error / b**2)


def _paired(base_losses: np.ndarray, imp_losses: np.ndarray, seed: int) -> PairedRri:
    base = summarize(base_losses, seed)
    imp = summarize(imp_losses, seed)
    if not base.mean_loss > 0:
        raise DomainError("baseline risk must be > 0")
    diff = base_losses - imp_losses
    ratio = float(np.mean(diff)) / base.mean_loss
    # first-order influence values of mean(diff) / mean(base)
    influence = (diff - ratio * base_losses) / base.mean_loss
    n = base_losses.size
    se = float(np.std(influence, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PairedRri(base, imp, 100.0 * ratio, 100.0 * se)


def paired_rri_many(
    baseline: EstimatorId,
    improved: Sequence[EstimatorId],
    loss_id,
    params: ModelParams,
    mixing: MixingSpec,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    tau_coupling: str = "shared",
) -> list[PairedRri]:
    """:func:`rri_paired` for several estimators against one baseline on one stream."""
    if int(replicates) < 2:
        raise DomainError("replicates must be >= 2")
    losses = replicate_losses([baseline, *improved], loss_id, params, mixing, replicates, seed,
                              threads=threads, tau_coupling=tau_coupling)
    return [_paired(losses[0], losses[i + 1], int(seed)) for i in range(len(improved))]


def rri_paired(
    baseline: EstimatorId,
    improved: EstimatorId,
    loss_id,
    params: ModelParams,
    mixing: MixingSpec,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    tau_coupling: str = "shared",
) -> PairedRri:
    """Baseline and improved risks on common random numbers, with the RRI and its SE."""
    return paired_rri_many(baseline, [improved], loss_id, params, mixing, replicates, seed,
                           threads=threads, tau_coupling=tau_coupling)[0]
