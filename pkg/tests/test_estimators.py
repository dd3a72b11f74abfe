import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ordscale.estimators import (
    EstimatorId,
    EstimatorKind,
    LossId,
    MinStat,
    Target,
    baee_coefficient,
    bz_boundary_sigma1,
    bz_boundary_sigma1_quadrature,
    bz_boundary_sigma2,
    bz_boundary_sigma2_quadrature,
    estimate,
    estimate_baee,
    estimate_bz,
    estimate_double_shrink_sigma2,
    estimate_stein_w,
    estimate_stein_with_min_stat,
)
from ordscale.mixing import MixingSpec
from ordscale.model import SuffStats
from ordscale.specialfn import DomainError

DEG = MixingSpec.degenerate()
G3 = MixingSpec.gamma(3)
ORACLE_MIXINGS = [DEG, G3, MixingSpec.gamma(5), MixingSpec.gamma(7),
                  MixingSpec.inverse_gaussian(3, 5), MixingSpec.inverse_gaussian(8, 10)]
ORACLE_SIZES = [(5, 5), (5, 8), (15, 10)]
ALL_IDS = [EstimatorId(k, t) for t in Target for k in EstimatorKind if EstimatorId.valid_for(k, t)]


def stats(s1=1.0, x_min=0.0, s2=1.0, y_min=0.0, p1=5, p2=5):
    return SuffStats(s1, x_min, s2, y_min, p1, p2)


# worked values

def test_baee_coefficient_examples():
    assert baee_coefficient("sigma1", "stein", 5, 5, G3) == pytest.approx(0.5)
    assert baee_coefficient("sigma1", "symmetric", 5, 5, G3) == pytest.approx(math.sqrt(0.5))
    assert baee_coefficient("sigma1", "stein", 5, 5, DEG) == pytest.approx(0.25)
    assert baee_coefficient("sigma2", "stein", 5, 8, DEG) == pytest.approx(1 / 7)


def test_estimate_baee_examples():
    assert estimate_baee("sigma1", "stein", stats(s1=4), DEG) == pytest.approx(1.0)
    assert estimate_baee("sigma2", "stein", stats(s2=10), G3) == pytest.approx(5.0)


def test_stein_w_examples():
    assert estimate_stein_w("sigma1", "stein", stats(s1=1, s2=0.1), DEG) == pytest.approx(0.1375)
    assert estimate_stein_w("sigma1", "stein", stats(s1=1, s2=1e12), DEG) == pytest.approx(0.25)
    assert estimate_stein_w("sigma2", "stein", stats(s1=0.05, s2=1), G3) == pytest.approx(0.5)


def test_min_stat_examples():
    s = stats(s1=1, s2=0.2, x_min=0.1)
    assert estimate_stein_with_min_stat("sigma1", "stein", s, G3, "w1") == pytest.approx(1.7 * 2 / 9)
    s = stats(s1=1, s2=1, y_min=0.01)
    assert estimate_stein_with_min_stat("sigma2", "stein", s, DEG, "u1") == pytest.approx(0.21)


@pytest.mark.parametrize("which", ["w1", "w2", "w1_w2"])
@pytest.mark.parametrize("loss", list(LossId))
def test_min_stat_falls_back_on_nonpositive_minimum(which, loss):
    s = stats(s1=1, s2=0.1, x_min=0.0, y_min=-1.0)
    assert estimate_stein_with_min_stat("sigma1", loss, s, G3, which) == estimate_baee("sigma1", loss, s, G3)


def test_double_shrink_examples():
    s = stats(s1=3, s2=1, y_min=0.01)
    assert estimate_double_shrink_sigma2("stein", s, DEG) == pytest.approx(0.46)
    idle = stats(s1=0.01, s2=1, y_min=100.0)
    assert estimate_double_shrink_sigma2("stein", idle, DEG) == estimate_baee("sigma2", "stein", idle, DEG)


def test_application_constants_gamma():
    b, p1, p2 = 5.0, 5, 8
    mix = MixingSpec.gamma(b)
    s = stats(s1=1, s2=0.3, x_min=0.02, p1=p1, p2=p2)
    expected = (1 + 0.3 + p1 * 0.02) * (b - 1) / (p1 + p2 - 1)
    assert estimate_stein_with_min_stat("sigma1", "stein", s, mix, "w1") == pytest.approx(expected, rel=1e-13)


def test_application_constants_inverse_gaussian():
    m, n, p2 = 3.0, 5.0, 8
    mix = MixingSpec.inverse_gaussian(m, n)
    s = stats(s1=1, s2=1, y_min=0.01, p2=p2)
    expected = (1 + p2 * 0.01) / (p2 * (1 / m + 1 / n))
    assert estimate_stein_with_min_stat("sigma2", "stein", s, mix, "u1") == pytest.approx(expected, rel=1e-13)


# boundary functions

def test_boundary_limit_examples():
    assert bz_boundary_sigma1("stein", 1e8, 5, 5, DEG) == pytest.approx(0.25, abs=1e-6)
    assert bz_boundary_sigma1("symmetric", 1e8, 5, 5, DEG) == pytest.approx(1 / math.sqrt(12), abs=1e-6)
    assert bz_boundary_sigma2("stein", 1e-8, 5, 5, DEG) == pytest.approx(0.25, abs=1e-6)
    assert bz_boundary_sigma2("symmetric", 1e-8, 5, 5, G3) == pytest.approx(math.sqrt(0.5), abs=1e-6)


def _poly_beta(x, a, b):
    return sum(Fraction(math.comb(b - 1, j) * (-1) ** j, a + j) * x ** (a + j) for j in range(b))


def test_boundary_exact_rational_value():
    half = Fraction(1, 2)
    exact = _poly_beta(half, 4, 4) / (8 * _poly_beta(half, 4, 5))
    assert bz_boundary_sigma1("stein", 1.0, 5, 5, DEG) == pytest.approx(float(exact), rel=1e-13)
    assert estimate_bz("sigma1", "stein", stats(s1=1, s2=1), DEG) == pytest.approx(float(exact), rel=1e-13)


@pytest.mark.parametrize("mix", ORACLE_MIXINGS, ids=str)
@pytest.mark.parametrize("loss", list(LossId))
def test_boundary_limits_all_mixings(mix, loss):
    for p1, p2 in ORACLE_SIZES + [(15, 21)]:
        assert bz_boundary_sigma1(loss, 1e8, p1, p2, mix) == pytest.approx(
            baee_coefficient("sigma1", loss, p1, p2, mix), abs=1e-6)
        assert bz_boundary_sigma2(loss, 1e-8, p1, p2, mix) == pytest.approx(
            baee_coefficient("sigma2", loss, p1, p2, mix), abs=1e-6)


@pytest.mark.parametrize("mix", ORACLE_MIXINGS, ids=str)
@pytest.mark.parametrize("loss", list(LossId))
def test_boundary_monotone(mix, loss):
    grid = np.sort(np.random.default_rng(5).uniform(-4, 4, 50))
    grid = 10.0**grid
    for p1, p2 in ORACLE_SIZES:
        assert np.all(np.diff(bz_boundary_sigma1(loss, grid, p1, p2, mix)) >= 0)
        assert np.all(np.diff(bz_boundary_sigma2(loss, grid, p1, p2, mix)) >= 0)


@pytest.mark.parametrize("mix", ORACLE_MIXINGS, ids=str)
@pytest.mark.parametrize("loss", list(LossId))
def test_boundary_closed_form_matches_quadrature(mix, loss):
    grid = np.geomspace(1e-2, 1e2, 50)
    for p1, p2 in ORACLE_SIZES:
        c1 = bz_boundary_sigma1(loss, grid, p1, p2, mix)
        c2 = bz_boundary_sigma2(loss, grid, p1, p2, mix)
        for i in range(0, 50, 7):
            v = float(grid[i])
            assert c1[i] == pytest.approx(bz_boundary_sigma1_quadrature(loss, v, p1, p2, mix), rel=1e-8)
            assert c2[i] == pytest.approx(bz_boundary_sigma2_quadrature(loss, v, p1, p2, mix), rel=1e-8)


def test_boundary_full_grid_against_quadrature_single_case():
    grid = np.geomspace(1e-3, 1e3, 50)
    closed = bz_boundary_sigma2("symmetric", grid, 5, 8, G3)
    quad = [bz_boundary_sigma2_quadrature("symmetric", float(z), 5, 8, G3) for z in grid]
    np.testing.assert_allclose(closed, quad, rtol=1e-8)


def test_boundary_domain():
    with pytest.raises(DomainError):
        bz_boundary_sigma1("stein", 0.0, 5, 5, DEG)
    with pytest.raises(DomainError):
        bz_boundary_sigma2("symmetric", 1.0, 2, 5, DEG)


# properties on random statistics

pos = st.floats(1e-3, 1e3)
mins = st.floats(-5, 5)
sizes = st.sampled_from([(3, 3), (5, 5), (5, 8), (15, 10), (15, 21)])
mixings = st.sampled_from([DEG, G3, MixingSpec.gamma(7), MixingSpec.inverse_gaussian(3, 5)])


@given(s1=pos, s2=pos, xm=mins, ym=mins, pp=sizes, mix=mixings, a=st.floats(1e-3, 1e3),
       eid=st.sampled_from(ALL_IDS), loss=st.sampled_from(list(LossId)))
def test_scale_equivariance(s1, s2, xm, ym, pp, mix, a, eid, loss):
    s = SuffStats(s1, xm, s2, ym, *pp)
    assert estimate(eid, loss, s.scaled(a), mix) == pytest.approx(a * estimate(eid, loss, s, mix), rel=1e-9)


@given(s1=pos, s2=pos, xm=mins, ym=mins, pp=sizes, mix=mixings, loss=st.sampled_from(list(LossId)))
def test_truncation_direction(s1, s2, xm, ym, pp, mix, loss):
    s = SuffStats(s1, xm, s2, ym, *pp)
    base1 = estimate_baee("sigma1", loss, s, mix)
    base2 = estimate_baee("sigma2", loss, s, mix)
    for kind in ("stein_w", "stein_w_w1", "stein_w_w2", "stein_w_w1_w2", "bz"):
        assert estimate(EstimatorId.parse(kind, "sigma1"), loss, s, mix) <= base1 * (1 + 1e-12)
    assert estimate(EstimatorId.parse("stein_w", "sigma2"), loss, s, mix) >= base2 * (1 - 1e-12)
    assert estimate(EstimatorId.parse("bz", "sigma2"), loss, s, mix) >= base2 * (1 - 1e-12)
    assert estimate(EstimatorId.parse("stein_w_w2", "sigma2"), loss, s, mix) <= base2 * (1 + 1e-12)


def test_double_shrink_positive_on_random_draws():
    rng = np.random.default_rng(7)
    n = 1_000_000
    for loss in LossId:
        for mix in (DEG, G3, MixingSpec.inverse_gaussian(3, 5)):
            s = SuffStats(rng.exponential(size=n) * 10 ** rng.uniform(-3, 3, n), rng.normal(size=n),
                          rng.exponential(size=n) * 10 ** rng.uniform(-3, 3, n), rng.exponential(size=n) * 10 ** rng.uniform(-3, 3, n),
                          5, 5)
            assert np.all(estimate_double_shrink_sigma2(loss, s, mix) > 0)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(8)
    s = SuffStats(rng.exponential(size=20), rng.normal(size=20), rng.exponential(size=20), rng.normal(size=20), 5, 8)
    for eid in ALL_IDS:
        vec = estimate(eid, "symmetric", s, G3)
        for i in (0, 7, 19):
            assert vec[i] == pytest.approx(estimate(eid, "symmetric", s[i], G3), rel=1e-14)


@pytest.mark.parametrize("eid", ALL_IDS, ids=str)
def test_zero_statistic_rejected(eid):
    with pytest.raises(DomainError):
        estimate(eid, "stein", stats(s1=0.0, s2=0.0), DEG)


def test_zero_statistic_reports_index():
    s = SuffStats(np.array([1.0, 0.0]), np.zeros(2), np.ones(2), np.zeros(2), 5, 5)
    with pytest.raises(DomainError, match="index 1"):
        estimate_baee("sigma1", "stein", s, DEG)


# identifiers

def test_estimator_id_parse_and_validity():
    assert EstimatorId.parse("bz", "sigma2") == EstimatorId(EstimatorKind.BZ, Target.SIGMA2)
    assert str(EstimatorId.parse("stein_w_w2", "sigma2")) == "stein_w_w2"
    for name, target in (("stein_w_w1", "sigma2"), ("stein_w_w1_w2", "sigma2"), ("double_shrink", "sigma1")):
        with pytest.raises(DomainError):
            EstimatorId.parse(name, target)


def test_parse_errors_list_valid_names():
    with pytest.raises(DomainError, match="baee"):
        EstimatorKind.parse("bz2")
    with pytest.raises(DomainError, match="stein"):
        LossId.parse("quadratic")


def test_min_stat_target_mismatch():
    with pytest.raises(DomainError):
        estimate_stein_with_min_stat("sigma2", "stein", stats(), DEG, MinStat.W1)


def test_double_shrink_reduces_exactly_to_upward_truncation():
    # with the U1 correction idle the value must equal the U-truncated estimator bit for bit
    rng = np.random.default_rng(9)
    n = 10_000
    s = SuffStats(rng.exponential(size=n), rng.normal(size=n), rng.exponential(size=n), 50 + rng.exponential(size=n), 15, 10)
    for loss in LossId:
        up = estimate_stein_w("sigma2", loss, s, MixingSpec.inverse_gaussian(3, 5))
        assert np.array_equal(estimate_double_shrink_sigma2(loss, s, MixingSpec.inverse_gaussian(3, 5)), up)
