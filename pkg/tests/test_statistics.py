import json
import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from trimap import geometry
from trimap.map_core import RationalTrianglePoint, TrianglePoint
from trimap.statistics import (NORMALIZATION, FrequencyReport, analytic_P, empirical_frequencies, invariance_check,
                               invariant_density, invariant_mass, numeric_P, remaining_mass, sample_invariant_point)


def mp_P(k):
    """Unrearranged closed form in 40-digit arithmetic."""
    mp.mp.dps = 40
    if k == 0:
        return 1 - (6 * mp.polylog(2, mp.mpf(1) / 4) + 12 * mp.log(2) ** 2) / mp.pi**2
    k = mp.mpf(k)
    return 6 / mp.pi**2 * (mp.polylog(2, 1 / (k + 1) ** 2) - mp.polylog(2, 1 / (k + 2) ** 2)
                           + 4 * mp.log(k + 1) ** 2 - 2 * mp.log((k + 2) / (k + 1)) ** 2
                           - 2 * mp.log(k * (k + 2)) * mp.log(k + 1))


def test_density_normalized():
    val, err = integrate.dblquad(lambda y, x: invariant_density(x, y), 0, 1, 0, lambda x: x, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert invariant_density(0.5, 0.25) == pytest.approx(NORMALIZATION * 1.6)


def test_P0_value():
    assert analytic_P(0) == pytest.approx(0.2531257, abs=1e-6)
    assert analytic_P(0) == pytest.approx(float(mp_P(0)), abs=1e-16)


@pytest.mark.parametrize("k", [1, 2, 5, 17, 1000, 10**6])
def test_analytic_P_matches_high_precision_formula(k):
    assert analytic_P(k) == pytest.approx(float(mp_P(k)), rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 5, 20])
def test_analytic_matches_quadrature_oracle(k):
    assert abs(analytic_P(k) - numeric_P(k, tol=1e-10)) < 1e-8


def test_numeric_partition_of_unity():
    total = math.fsum(numeric_P(k, tol=1e-11) for k in range(201)) + remaining_mass(200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_partial_sums_increase_and_stay_below_one():
    p = analytic_P(np.arange(100_001))
    assert np.all(p > 0)
    partial = np.cumsum(p)
    assert np.all(np.diff(partial) > 0)
    assert 0.998 < partial[-1] < 1.0


def test_analytic_decreasing_beyond_first_digit():
    p = analytic_P(np.arange(1, 5000))
    assert np.all(np.diff(p) < 0)


def test_large_k_asymptotics():
    # P(k) ~ (12/pi^2)(ln k - 1)/k^2: the rearranged form must not lose this to cancellation
    k = 10**7
    assert analytic_P(k) * k**2 / (NORMALIZATION * (math.log(k) - 1)) == pytest.approx(1.0, rel=1e-5)


def test_analytic_rejects_negative():
    with pytest.raises(ValueError):
        analytic_P(-1)


# --- empirical ---------------------------------------------------------------------

def test_invariant_sampler_stays_in_domain():
    rng = np.random.default_rng(1)
    pts = [sample_invariant_point(rng) for _ in range(2000)]
    xs = np.array([p.x for p in pts])
    assert np.all(xs > 1e-3)
    # mass of x > 1/2 under the density is (12/pi^2) int_{1/2}^1 ln(1+x)/x dx
    ref = NORMALIZATION * integrate.quad(lambda x: math.log1p(x) / x, 0.5, 1)[0]
    assert np.mean(xs > 0.5) == pytest.approx(ref, abs=0.04)


def test_digit_zero_frequency_along_typical_orbit():
    start = sample_invariant_point(np.random.default_rng(2015))
    rep = empirical_frequencies(start, 10**7, 5)
    assert abs(rep.empirical[0] - analytic_P(0)) < 1e-2
    assert sum(rep.counts) == rep.orbit_length == 10**7
    assert not rep.terminated


def test_degenerate_rational_seed():
    rep = empirical_frequencies(RationalTrianglePoint(Fraction(2, 5), Fraction(1, 5)), 1000, 5)
    assert rep.terminated and rep.termination_index == 1
    assert rep.counts[3] == 1 and sum(rep.counts) == 1
    assert rep.warnings


def test_zero_length_orbit():
    rep = empirical_frequencies(TrianglePoint(0.5, 0.2), 0, 4)
    assert rep.empirical == [] and rep.counts == [0] * 6


def test_report_serialization_round_trip():
    rep = empirical_frequencies(TrianglePoint(0.61, 0.2), 1000, 3).fill_numeric()
    lines = rep.to_csv().strip().split("\n")
    assert lines[0] == "k,analytic,numeric,empirical,abs_error"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "1", "2", "3", ">3"]
    first = lines[1].split(",")
    assert float(first[1]) == rep.analytic[0]  # 17 significant digits round-trip exactly
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] and doc["rows"][0]["analytic"] == rep.analytic[0]
    assert isinstance(rep, FrequencyReport)


# --- invariance --------------------------------------------------------------------

def test_whole_triangle_invariance():
    mu, pre = invariance_check(geometry.WHOLE_TRIANGLE, tol=1e-9)
    assert mu == pytest.approx(1.0, abs=1e-9) and pre == pytest.approx(1.0, abs=1e-9)


def test_box_invariance():
    mu, pre = invariance_check(geometry.Rectangle(0.5, 0.75, 0.25, 0.5))
    assert abs(mu - pre) < 1e-7 and mu > 0


def test_degenerate_box():
    assert invariance_check(geometry.Rectangle(0.5, 0.5, 0.1, 0.3)) == (0.0, 0.0)


def test_rectangle_suite_invariance():
    for r in geometry.rectangle_suite():
        mu, pre = invariance_check(r)
        assert abs(mu - pre) < 1e-7


def test_invariant_mass_matches_dblquad():
    r = geometry.Rectangle(0.3, 0.9, 0.1, 0.5)
    ref, _ = integrate.dblquad(lambda y, x: invariant_density(x, y), 0.3, 0.9, lambda x: 0.1,
                               lambda x: min(0.5, x), epsabs=1e-13)
    assert invariant_mass(r) == pytest.approx(ref, abs=1e-11)
