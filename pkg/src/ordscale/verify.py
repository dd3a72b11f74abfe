"""Quick self-checks run by ``ordscale verify``."""

from __future__ import annotations

import numpy as np

from .estimators import (
    EstimatorId,
    LossId,
    baee_coefficient,
    bz_boundary_sigma1,
    bz_boundary_sigma1_quadrature,
    bz_boundary_sigma2,
    bz_boundary_sigma2_quadrature,
)
from .mixing import MixingSpec
from .model import ModelParams
from .risk import mc_risk, oracle_baee_risk, paired_rri_many

MIXINGS = (MixingSpec.degenerate(), MixingSpec.gamma(3), MixingSpec.inverse_gaussian(3, 5))
SIZES = ((5, 5), (5, 8), (15, 10))

SIGMA1_IMPROVED = ("stein_w", "stein_w_w1", "stein_w_w2", "stein_w_w1_w2", "bz")
SIGMA2_IMPROVED = ("stein_w", "stein_w_w2", "bz", "double_shrink")


def check_limits():
    worst = 0.0
    for mix in MIXINGS:
        for p1, p2 in SIZES:
            for loss in LossId:
                a = bz_boundary_sigma1(loss, 1e8, p1, p2, mix)
                b = bz_boundary_sigma2(loss, 1e-8, p1, p2, mix)
                worst = max(worst,
                            abs(a - baee_coefficient("sigma1", loss, p1, p2, mix)),
                            abs(b - baee_coefficient("sigma2", loss, p1, p2, mix)))
    return worst <= 1e-6, f"max deviation from BAEE constant {worst:.2e}"


def check_monotone():
    grid = np.geomspace(1e-3, 1e3, 50)
    ok = True
    for mix in MIXINGS:
        for p1, p2 in SIZES:
            for loss in LossId:
                ok &= bool(np.all(np.diff(bz_boundary_sigma1(loss, grid, p1, p2, mix)) >= 0))
                ok &= bool(np.all(np.diff(bz_boundary_sigma2(loss, grid, p1, p2, mix)) >= 0))
    return ok, "boundary functions nondecreasing on 50-point grids"


def check_quadrature():
    worst = 0.0
    for mix in MIXINGS:
        for p1, p2 in SIZES:
            for loss in LossId:
                for v in (0.01, 0.3, 1.0, 4.0, 50.0):
                    worst = max(
                        worst,
                        abs(bz_boundary_sigma1(loss, v, p1, p2, mix) / bz_boundary_sigma1_quadrature(loss, v, p1, p2, mix) - 1),
                        abs(bz_boundary_sigma2(loss, v, p1, p2, mix) / bz_boundary_sigma2_quadrature(loss, v, p1, p2, mix) - 1),
                    )
    return worst <= 1e-8, f"max relative gap closed form vs quadrature {worst:.2e}"


def check_oracle(replicates, seed):
    worst = 0.0
    baee = EstimatorId.parse("baee")
    for mix in MIXINGS:
        for loss in LossId:
            r = mc_risk(baee, loss, ModelParams(0, 0, 1, 1, 5, 5), mix, replicates, seed)
            worst = max(worst, abs(r.mean_loss - oracle_baee_risk(loss, 5, mix)) / r.std_error)
    return worst <= 4, f"max |MC - oracle| = {worst:.2f} SE"


def check_dominance(replicates, seed):
    worst = np.inf
    for mix in MIXINGS:
        for loss in LossId:
            for eta in (0.1, 0.5, 0.9):
                params = ModelParams(0, 0, eta, 1, 5, 5)
                for target, names in (("sigma1", SIGMA1_IMPROVED), ("sigma2", SIGMA2_IMPROVED)):
                    res = paired_rri_many(EstimatorId.parse("baee", target),
                                          [EstimatorId.parse(n, target) for n in names],
                                          loss, params, mix, replicates, seed)
                    for r in res:
                        z = r.rri_percent / r.rri_std_error if r.rri_std_error > 0 else 0.0
                        worst = min(worst, z)
    return worst >= -3, f"min paired RRI / SE = {worst:.2f}"


def run_all(replicates: int = 20000, seed: int = 2024):
    return [
        ("boundary limits", *check_limits()),
        ("boundary monotonicity", *check_monotone()),
        ("closed form vs quadrature", *check_quadrature()),
        ("BAEE risk oracle", *check_oracle(replicates, seed)),
        ("dominance over BAEE", *check_dominance(replicates, seed)),
    ]
