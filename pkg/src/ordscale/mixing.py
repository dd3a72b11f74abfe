"""Mixing distributions for the scale variable tau.

Three families are supported:

* ``degenerate``: tau is identically 1.
* ``gamma:b=B``: tau ~ Gamma(shape=B, scale=1) (multivariate Lomax marginal).
* ``invgauss:m=M,n=N``: tau ~ inverse Gaussian with **mean M and shape N**,
  density ``sqrt(N / (2 pi t^3)) exp(-N (t - M)^2 / (2 M^2 t))``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .specialfn import DomainError, log_gamma

__all__ = [
    "MixingKind",
    "MixingSpec",
    "moment",
    "stein_moment_ratio_min",
    "density",
    "sample_tau",
]


class MixingKind(enum.Enum):
    DEGENERATE = "degenerate"
    GAMMA = "gamma"
    INVERSE_GAUSSIAN = "invgauss"


@dataclass(frozen=True)
class MixingSpec:
    kind: MixingKind
    b: Optional[float] = None
    m: Optional[float] = None
    n: Optional[float] = None

    def __post_init__(self):
        def positive(name):
            v = getattr(self, name)
            if v is None or not (float(v) > 0 and math.isfinite(float(v))):
                raise DomainError(f"{self.kind.value} mixing needs {name} > 0, got {v}")
            object.__setattr__(self, name, float(v))

        def absent(*names):
            for name in names:
                if getattr(self, name) is not None:
                    raise DomainError(f"{self.kind.value} mixing takes no parameter {name}")

        if not isinstance(self.kind, MixingKind):
            object.__setattr__(self, "kind", MixingKind(self.kind))
        if self.kind is MixingKind.DEGENERATE:
            absent("b", "m", "n")
        elif self.kind is MixingKind.GAMMA:
            positive("b")
            absent("m", "n")
        else:
            positive("m")
            positive("n")
            absent("b")

    @classmethod
    def degenerate(cls) -> "MixingSpec":
        return cls(MixingKind.DEGENERATE)

    @classmethod
    def gamma(cls, b: float) -> "MixingSpec":
        return cls(MixingKind.GAMMA, b=b)

    @classmethod
    def inverse_gaussian(cls, m: float, n: float) -> "MixingSpec":
        return cls(MixingKind.INVERSE_GAUSSIAN, m=m, n=n)

    @classmethod
    def parse(cls, text: str) -> "MixingSpec":
        """Parse ``"degenerate"``, ``"gamma:b=3"`` or ``"invgauss:m=3,n=5"``."""
        text = str(text).strip()
        kind_name, _, rest = text.partition(":")
        try:
            kind = MixingKind(kind_name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in MixingKind)
            raise DomainError(f"unknown mixing kind {kind_name!r}; expected one of {valid}") from None
        params = {}
        if rest.strip():
            for item in rest.split(","):
                match = re.fullmatch(r"\s*([a-z]+)\s*=\s*([^\s]+)\s*", item)
                if match is None:
                    raise DomainError(f"malformed mixing parameter {item!r} in {text!r}")
                key, value = match.groups()
                if key not in ("b", "m", "n") or key in params:
                    raise DomainError(f"unexpected mixing parameter {key!r} in {text!r}")
                try:
                    params[key] = float(value)
                except ValueError:
                    raise DomainError(f"mixing parameter {key} is not a number: {value!r}") from None
        return cls(kind, **params)

    def __str__(self) -> str:
        if self.kind is MixingKind.DEGENERATE:
            return "degenerate"
        if self.kind is MixingKind.GAMMA:
            return f"gamma:b={_fmt(self.b)}"
        return f"invgauss:m={_fmt(self.m)},n={_fmt(self.n)}"


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _ig_positive_moment(m: float, n: float, r: int) -> float:
    # E tau^r = m^r sum_{s=0}^{r-1} (r-1+s)! / (s! (r-1-s)!) (m / 2n)^s
    q = m / (2.0 * n)
    total = math.fsum(
        math.factorial(r - 1 + s) / (math.factorial(s) * math.factorial(r - 1 - s)) * q**s
        for s in range(r)
    )
    return m**r * total


def moment(spec: MixingSpec, k: int) -> float:
    """Exact ``E(tau**k)`` for integer ``k``."""
    if int(k) != k:
        raise DomainError(f"moment order must be an integer, got {k}")
    k = int(k)
    if spec.kind is MixingKind.DEGENERATE or k == 0:
        return 1.0
    if spec.kind is MixingKind.GAMMA:
        if k <= -spec.b:
            raise DomainError(f"E(tau^{k}) does not exist for gamma shape b={spec.b}")
        return math.exp(log_gamma(k + spec.b) - log_gamma(spec.b))
    m, n = spec.m, spec.n
    if k > 0:
        return _ig_positive_moment(m, n, k)
    r = -k
    return _ig_positive_moment(m, n, r + 1) / m ** (2 * r + 1)


def stein_moment_ratio_min(spec: MixingSpec, k: int, step: int = 2) -> float:
    """``min{E tau^(k+step) / E tau^k, E tau^(step-1) / E tau^(-1)}``.

    ``step=2`` is the symmetric-loss form (square root taken by the caller),
    ``step=1`` the Stein-loss form, whose second branch is ``1 / E(1/tau)``.
    """
    if step not in (1, 2):
        raise DomainError(f"step must be 1 or 2, got {step}")
    first = moment(spec, k + step) / moment(spec, k)
    second = moment(spec, step - 1) / moment(spec, -1)
    return min(first, second)


def density(spec: MixingSpec, t):
    """Density of tau at ``t`` (not defined for the degenerate family)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if spec.kind is MixingKind.GAMMA:
            b = spec.b
            out = np.exp((b - 1) * np.log(t) - t - log_gamma(b))
        elif spec.kind is MixingKind.INVERSE_GAUSSIAN:
            m, n = spec.m, spec.n
            out = np.sqrt(n / (2 * np.pi * t**3)) * np.exp(-n * (t - m) ** 2 / (2 * m * m * t))
        else:
            raise DomainError("the degenerate mixing distribution has no density")
    out = np.where(t > 0, out, 0.0)
    out = np.where(np.isfinite(out), out, 0.0)
    return float(out) if out.ndim == 0 else out


def sample_tau(spec: MixingSpec, rng: np.random.Generator, size=None):
    """Draw tau from ``spec`` using ``rng``.

    The inverse Gaussian uses the Michael-Schucany-Haas transformation:
    a squared standard normal gives a root of the first-passage equation and a
    uniform picks between the root and its reflection ``m^2 / x``.
    """
    if spec.kind is MixingKind.DEGENERATE:
        return 1.0 if size is None else np.ones(size)
    if spec.kind is MixingKind.GAMMA:
        return rng.gamma(spec.b, 1.0, size)
    m, n = spec.m, spec.n
    v = rng.standard_normal(size)
    u = rng.random(size)
    y = v * v
    my = m * y
    x = m + m * my / (2 * n) - (m / (2 * n)) * np.sqrt(4 * n * my + my * my)
    # guard against cancellation for extreme y
    x = np.maximum(x, np.finfo(float).tiny)
    out = np.where(u <= m / (m + x), x, m * m / x)
    return float(out) if np.ndim(out) == 0 else out
