"""scikit-learn style wrapper around the estimator functions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .estimators import EstimatorId, EstimatorKind, LossId, Target, estimate
from .mixing import MixingSpec
from .model import MIN_SAMPLE_SIZE, stats_from_raw

__all__ = ["OrderedScaleEstimator", "check_sample"]


def check_sample(values, name: str = "X") -> np.ndarray:
    """Validate one raw sample and return it as a finite 1-d float array."""
    arr = check_array(np.asarray(values, dtype=float).reshape(-1, 1), ensure_min_samples=MIN_SAMPLE_SIZE,
                      input_name=name)
    return arr.ravel()


class OrderedScaleEstimator(BaseEstimator):
    """Estimate ``sigma1 <= sigma2`` from two exponential samples.

    Parameters
    ----------
    estimator : str, default="baee"
        Estimator family name, e.g. ``"stein_w"`` or ``"bz"``.
    loss : {"stein", "symmetric"}, default="stein"
    mixing : str, default="degenerate"
        Mixing spec string such as ``"gamma:b=3"``.

    Attributes
    ----------
    sigma1_, sigma2_ : float
        Estimates; ``nan`` when the family does not target that scale.
    stats_ : SuffStats
    """

    def __init__(self, estimator="baee", loss="stein", mixing="degenerate"):
        self.estimator = estimator
        self.loss = loss
        self.mixing = mixing

    def fit(self, X, y):
        """``X`` is the first sample (smaller scale), ``y`` the second."""
        x = check_sample(X, "X")
        y = check_sample(y, "y")
        kind = EstimatorKind.parse(self.estimator)
        loss = LossId.parse(self.loss)
        mixing = MixingSpec.parse(self.mixing)
        self.stats_ = stats_from_raw(x, y)
        for target, attr in ((Target.SIGMA1, "sigma1_"), (Target.SIGMA2, "sigma2_")):
            if EstimatorId.valid_for(kind, target):
                value = estimate(EstimatorId(kind, target), loss, self.stats_, mixing)
            else:
                value = float("nan")
            setattr(self, attr, value)
        return self

    def predict(self, X=None):
        """Return ``[sigma1_, sigma2_]``; ``X`` is ignored."""
        check_is_fitted(self, "stats_")
        return np.array([self.sigma1_, self.sigma2_])
