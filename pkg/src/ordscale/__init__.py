"""Ordered scale estimation for two-sample scale mixtures of exponentials."""

from .api import OrderedScaleEstimator
from .estimators import EstimatorId, EstimatorKind, LossId, MinStat, Target, estimate
from .mixing import MixingKind, MixingSpec, moment, sample_tau, stein_moment_ratio_min
from .model import ModelParams, SuffStats, ValidationError, sample_dataset, stats_from_raw, validate
from .risk import RiskEstimate, loss, mc_risk, oracle_baee_risk, rri, rri_paired
from .specialfn import ConvergenceError, DomainError, QuadratureSettings

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "EstimatorId",
    "EstimatorKind",
    "LossId",
    "MinStat",
    "MixingKind",
    "MixingSpec",
    "ModelParams",
    "OrderedScaleEstimator",
    "QuadratureSettings",
    "RiskEstimate",
    "SuffStats",
    "Target",
    "ValidationError",
    "estimate",
    "loss",
    "mc_risk",
    "moment",
    "oracle_baee_risk",
    "rri",
    "rri_paired",
    "sample_dataset",
    "sample_tau",
    "stats_from_raw",
    "stein_moment_ratio_min",
    "validate",
]
