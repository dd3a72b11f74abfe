"""Point estimators of the ordered scales ``sigma1 <= sigma2``.

Every estimator is a pure function of ``(SuffStats, MixingSpec, LossId)`` and is
vectorized: when the fields of ``SuffStats`` are arrays, an array comes back.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .mixing import MixingKind, MixingSpec, density, moment, stein_moment_ratio_min
from .model import SuffStats
from .specialfn import DomainError, QuadratureSettings, incomplete_beta, integrate, log_gamma

__all__ = [
    "LossId",
    "Target",
    "EstimatorKind",
    "EstimatorId",
    "MinStat",
    "baee_coefficient",
    "estimate_baee",
    "estimate_stein_w",
    "estimate_stein_with_min_stat",
    "bz_boundary_sigma1",
    "bz_boundary_sigma2",
    "bz_boundary_sigma1_quadrature",
    "bz_boundary_sigma2_quadrature",
    "estimate_bz",
    "estimate_double_shrink_sigma2",
    "estimate",
]


class _Named(enum.Enum):
    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(repr(m.value) for m in cls)
            raise DomainError(f"unknown {cls.__name__} {value!r}; valid names: {valid}") from None

    def __str__(self):
        return self.value


class LossId(_Named):
    SYMMETRIC = "symmetric"
    STEIN = "stein"


class Target(_Named):
    SIGMA1 = "sigma1"
    SIGMA2 = "sigma2"


class EstimatorKind(_Named):
    BAEE = "baee"
    STEIN_W = "stein_w"
    STEIN_W_W1 = "stein_w_w1"
    STEIN_W_W2 = "stein_w_w2"
    STEIN_W_W1_W2 = "stein_w_w1_w2"
    BZ = "bz"
    DOUBLE_SHRINK = "double_shrink"


class MinStat(_Named):
    W1 = "w1"
    W2 = "w2"
    U1 = "u1"
    W1_AND_W2 = "w1_w2"


_SIGMA1_ONLY = {EstimatorKind.STEIN_W_W1, EstimatorKind.STEIN_W_W1_W2}
_SIGMA2_ONLY = {EstimatorKind.DOUBLE_SHRINK}


@dataclass(frozen=True)
class EstimatorId:
    """An estimator family together with the scale it targets.

    For ``sigma2`` the ``stein_w_w2`` family is the estimator built on
    ``U1 = Y / S2``.
    """

    kind: EstimatorKind
    target: Target

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind.parse(self.kind))
        object.__setattr__(self, "target", Target.parse(self.target))
        if self.kind in _SIGMA1_ONLY and self.target is not Target.SIGMA1:
            raise DomainError(f"estimator {self.kind.value!r} only targets sigma1")
        if self.kind in _SIGMA2_ONLY and self.target is not Target.SIGMA2:
            raise DomainError(f"estimator {self.kind.value!r} only targets sigma2")

    @classmethod
    def parse(cls, name, target="sigma1") -> "EstimatorId":
        return cls(EstimatorKind.parse(name), Target.parse(target))

    @staticmethod
    def valid_for(kind, target) -> bool:
        try:
            EstimatorId(kind, target)
        except DomainError:
            return False
        return True

    def __str__(self):
        return self.kind.value


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _require_positive(name: str, value):
    arr = np.asarray(value, dtype=float)
    bad = ~(arr > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        where = "" if arr.ndim == 0 else f" at index {idx}"
        raise DomainError(f"{name} must be > 0{where}")


def _sizes(target: Target, p1: int, p2: int) -> int:
    return p1 if target is Target.SIGMA1 else p2


def baee_coefficient(target, loss, p1: int, p2: int, mixing: MixingSpec) -> float:
    """``c_i`` (symmetric loss) or ``d_i`` (Stein loss) for the chosen target."""
    target, loss = Target.parse(target), LossId.parse(loss)
    p = _sizes(target, p1, p2)
    inv = moment(mixing, -1)
    if loss is LossId.STEIN:
        if p < 2:
            raise DomainError(f"Stein-loss coefficient needs p >= 2, got {p}")
        return 1.0 / ((p - 1) * inv)
    if p < 3:
        raise DomainError(f"symmetric-loss coefficient needs p >= 3, got {p}")
    return math.sqrt(moment(mixing, 1) / ((p - 1) * (p - 2) * inv))


def estimate_baee(target, loss, stats: SuffStats, mixing: MixingSpec):
    target = Target.parse(target)
    s = stats.s1 if target is Target.SIGMA1 else stats.s2
    _require_positive("s1" if target is Target.SIGMA1 else "s2", s)
    return _out(baee_coefficient(target, loss, stats.p1, stats.p2, mixing) * np.asarray(s, dtype=float))


def _w_truncation(loss: LossId, ratio, p1: int, p2: int, mixing: MixingSpec):
    # shared shape of the truncations built on W (for sigma1) and U (for sigma2)
    k = p1 + p2
    inv = moment(mixing, -1)
    if loss is LossId.STEIN:
        const = 1.0 / ((k - 2) * inv)
    else:
        const = math.sqrt(moment(mixing, 1) / ((k - 2) * (k - 3) * inv))
    return (1.0 + np.asarray(ratio, dtype=float)) * const


def estimate_stein_w(target, loss, stats: SuffStats, mixing: MixingSpec):
    """BAEE truncated through ``W = S2/S1`` (sigma1, min) or ``U = S1/S2`` (sigma2, max)."""
    target, loss = Target.parse(target), LossId.parse(loss)
    _require_positive("s1", stats.s1)
    _require_positive("s2", stats.s2)
    c = baee_coefficient(target, loss, stats.p1, stats.p2, mixing)
    if target is Target.SIGMA1:
        coef = np.minimum(c, _w_truncation(loss, stats.w, stats.p1, stats.p2, mixing))
        return _out(coef * stats.s1)
    coef = np.maximum(c, _w_truncation(loss, stats.u, stats.p1, stats.p2, mixing))
    return _out(coef * stats.s2)


def _moment_factor(loss: LossId, mixing: MixingSpec, order: int, divisor_top: int) -> float:
    # constant multiplying the numerator statistic of a min-statistic truncation
    if loss is LossId.STEIN:
        return stein_moment_ratio_min(mixing, order, step=1) / divisor_top
    return math.sqrt(stein_moment_ratio_min(mixing, order, step=2) / (divisor_top * (divisor_top - 1)))


def _min_stat_coefficient(loss: LossId, which: MinStat, stats: SuffStats, mixing: MixingSpec, c: float):
    p1, p2 = stats.p1, stats.p2
    k = p1 + p2
    if which is MinStat.U1:
        num = 1.0 + p2 * np.asarray(stats.u1, dtype=float)
        active = np.asarray(stats.y_min) > 0
        factor = _moment_factor(loss, mixing, p2, p2)
    else:
        w = np.asarray(stats.w, dtype=float)
        if which is MinStat.W1:
            num = 1.0 + w + p1 * stats.w1
            active = np.asarray(stats.x_min) > 0
            factor = _moment_factor(loss, mixing, k - 1, k - 1)
        elif which is MinStat.W2:
            num = 1.0 + w + p2 * stats.w2
            active = np.asarray(stats.y_min) > 0
            factor = _moment_factor(loss, mixing, k - 1, k - 1)
        else:
            num = 1.0 + w + p1 * stats.w1 + p2 * stats.w2
            active = (np.asarray(stats.x_min) > 0) & (np.asarray(stats.y_min) > 0)
            factor = _moment_factor(loss, mixing, k, k)
    return np.where(active, np.minimum(c, num * factor), c)


def estimate_stein_with_min_stat(target, loss, stats: SuffStats, mixing: MixingSpec, which):
    """BAEE truncated from above using a sample minimum.

    ``which`` is ``w1``, ``w2`` or ``w1_w2`` for sigma1 and ``u1`` for sigma2.
    Non-positive minima fall back to the BAEE.
    """
    target, loss, which = Target.parse(target), LossId.parse(loss), MinStat.parse(which)
    if (which is MinStat.U1) != (target is Target.SIGMA2):
        raise DomainError(f"statistic {which.value!r} does not apply to {target.value}")
    c = baee_coefficient(target, loss, stats.p1, stats.p2, mixing)
    if target is Target.SIGMA1:
        _require_positive("s1", stats.s1)
        return _out(_min_stat_coefficient(loss, which, stats, mixing, c) * stats.s1)
    _require_positive("s2", stats.s2)
    return _out(_min_stat_coefficient(loss, which, stats, mixing, c) * stats.s2)


def _beta_ratio(x, a1: float, b1: float, a2: float, b2: float):
    # B(x; a1, b1) / B(x; a2, b2), with the small-x leading term when both underflow
    x = np.asarray(x, dtype=float)
    num = incomplete_beta(x, a1, b1)
    den = incomplete_beta(x, a2, b2)
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = num / den
        tiny = (den <= 1e-290) | (num <= 1e-290)
        lead = (a2 / a1) * np.power(x, a1 - a2)
    return np.where(tiny, lead, ratio)


def _check_bz_sizes(loss: LossId, p1: int, p2: int):
    if p1 < 3 or p2 < 3:
        raise DomainError(f"boundary functions need p1, p2 >= 3, got ({p1}, {p2})")


def bz_boundary_sigma1(loss, u, p1: int, p2: int, mixing: MixingSpec):
    """Boundary function for sigma1 at ``u = W`` (closed form in incomplete betas)."""
    loss = LossId.parse(loss)
    _check_bz_sizes(loss, p1, p2)
    u = np.asarray(u, dtype=float)
    _require_positive("u", u)
    x = np.where(np.isinf(u), 1.0, u / (1.0 + u))
    k = p1 + p2
    inv = moment(mixing, -1)
    if loss is LossId.STEIN:
        return _out(_beta_ratio(x, p2 - 1, p1 - 1, p2 - 1, p1) / (inv * (k - 2)))
    ratio = _beta_ratio(x, p2 - 1, p1 - 2, p2 - 1, p1)
    return _out(np.sqrt(moment(mixing, 1) * ratio / (inv * (k - 2) * (k - 3))))


def bz_boundary_sigma2(loss, z, p1: int, p2: int, mixing: MixingSpec):
    """Boundary function for sigma2 at ``z = U`` (closed form in incomplete betas)."""
    loss = LossId.parse(loss)
    _check_bz_sizes(loss, p1, p2)
    z = np.asarray(z, dtype=float)
    _require_positive("z", z)
    y = 1.0 / (1.0 + z)
    k = p1 + p2
    inv = moment(mixing, -1)
    if loss is LossId.STEIN:
        return _out(_beta_ratio(y, p2 - 1, p1 - 1, p2, p1 - 1) / (inv * (k - 2)))
    ratio = _beta_ratio(y, p2 - 2, p1 - 1, p2, p1 - 1)
    return _out(np.sqrt(moment(mixing, 1) * ratio / (inv * (k - 2) * (k - 3))))


# The quadrature versions integrate the gamma kernels directly and take the
# mixing moments from the density; they share no code with the closed forms
# beyond the parameters.

_ORACLE_QUADRATURE = QuadratureSettings(rel_tol=1e-11, abs_tol=0.0, max_subdivisions=2000)


def _mixing_moment_by_quadrature(mixing: MixingSpec, k: int, settings: QuadratureSettings) -> float:
    if mixing.kind is MixingKind.DEGENERATE:
        return 1.0
    return integrate(lambda t: t**k * density(mixing, t), 0.0, math.inf, settings, vectorized=True)


def _gamma_pdf(y, a: float):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp((a - 1) * np.log(y) - y - log_gamma(a))
    return np.where((y > 0) & np.isfinite(out), out, 0.0)


def _kernel_moment(k: int, a: float, tail, settings: QuadratureSettings) -> float:
    def f(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.power(y, k) * _gamma_pdf(y, a) * tail(y)
        return np.where(np.isfinite(val), val, 0.0)
    return integrate(f, 0.0, math.inf, settings, vectorized=True)


def _boundary_from_kernels(loss: LossId, kernel, mixing: MixingSpec, settings: QuadratureSettings) -> float:
    inv = _mixing_moment_by_quadrature(mixing, -1, settings)
    if loss is LossId.STEIN:
        return kernel(0) / (inv * kernel(1))
    return math.sqrt(_mixing_moment_by_quadrature(mixing, 1, settings) * kernel(-1) / (inv * kernel(1)))


def bz_boundary_sigma1_quadrature(
    loss, u: float, p1: int, p2: int, mixing: MixingSpec, settings: QuadratureSettings = _ORACLE_QUADRATURE
) -> float:
    """Sigma1 boundary as a ratio of one-dimensional integrals.

    With ``g1`` the Gamma(p1-1) density and ``G2`` the Gamma(p2-1) CDF,
    ``J(k) = int y^k g1(y) G2(u y) dy``; the Stein-loss boundary is
    ``J(0) / (E(1/tau) J(1))`` and the symmetric one
    ``sqrt(E(tau) J(-1) / (E(1/tau) J(1)))``.
    """
    loss = LossId.parse(loss)
    _check_bz_sizes(loss, p1, p2)
    u = float(u)
    cdf2 = lambda y: _sp.gammainc(p2 - 1, u * y)
    kernel = lambda k: _kernel_moment(k, p1 - 1, cdf2, settings)
    return _boundary_from_kernels(loss, kernel, mixing, settings)


def bz_boundary_sigma2_quadrature(
    loss, z: float, p1: int, p2: int, mixing: MixingSpec, settings: QuadratureSettings = _ORACLE_QUADRATURE
) -> float:
    """Sigma2 boundary as a ratio of one-dimensional integrals.

    Same construction as the sigma1 version with the roles swapped: the kernel
    is the Gamma(p2-1) density and the first sample enters through its
    survivor function, ``K(k) = int y^k g2(y) (1 - G1(z y)) dy``.
    """
    loss = LossId.parse(loss)
    _check_bz_sizes(loss, p1, p2)
    z = float(z)
    surv1 = lambda y: _sp.gammaincc(p1 - 1, z * y)
    kernel = lambda k: _kernel_moment(k, p2 - 1, surv1, settings)
    return _boundary_from_kernels(loss, kernel, mixing, settings)


def estimate_bz(target, loss, stats: SuffStats, mixing: MixingSpec):
    target = Target.parse(target)
    _require_positive("s1", stats.s1)
    _require_positive("s2", stats.s2)
    if target is Target.SIGMA1:
        return _out(bz_boundary_sigma1(loss, stats.w, stats.p1, stats.p2, mixing) * stats.s1)
    return _out(bz_boundary_sigma2(loss, stats.u, stats.p1, stats.p2, mixing) * stats.s2)


def estimate_double_shrink_sigma2(loss, stats: SuffStats, mixing: MixingSpec):
    """Combine the ``U`` (upward) and ``U1`` (downward) corrections of the sigma2 BAEE."""
    loss = LossId.parse(loss)
    _require_positive("s1", stats.s1)
    _require_positive("s2", stats.s2)
    c = baee_coefficient(Target.SIGMA2, loss, stats.p1, stats.p2, mixing)
    up = np.maximum(c, _w_truncation(loss, stats.u, stats.p1, stats.p2, mixing))
    down = _min_stat_coefficient(loss, MinStat.U1, stats, mixing, c)
    # grouped so an inactive U1 correction leaves ``up`` bit-for-bit unchanged
    return _out((up + (down - c)) * stats.s2)


def estimate(estimator: EstimatorId, loss, stats: SuffStats, mixing: MixingSpec):
    """Dispatch on ``estimator``."""
    kind, target = estimator.kind, estimator.target
    if kind is EstimatorKind.BAEE:
        return estimate_baee(target, loss, stats, mixing)
    if kind is EstimatorKind.STEIN_W:
        return estimate_stein_w(target, loss, stats, mixing)
    if kind is EstimatorKind.BZ:
        return estimate_bz(target, loss, stats, mixing)
    if kind is EstimatorKind.DOUBLE_SHRINK:
        return estimate_double_shrink_sigma2(loss, stats, mixing)
    if target is Target.SIGMA2:
        return estimate_stein_with_min_stat(target, loss, stats, mixing, MinStat.U1)
    which = {
        EstimatorKind.STEIN_W_W1: MinStat.W1,
        EstimatorKind.STEIN_W_W2: MinStat.W2,
        EstimatorKind.STEIN_W_W1_W2: MinStat.W1_AND_W2,
    }[kind]
    return estimate_stein_with_min_stat(target, loss, stats, mixing, which)
