import math

import numpy as np
import pytest

from aoi_mg11.analytic import (
    SystemConfig,
    age_report,
    avg_age,
    clock_mgf_A,
    clock_mgf_B,
    interdeparture_mgf,
    mean_interdeparture,
    mean_system_time,
    moments_from_mgf,
    peak_age,
    second_moment_interdeparture,
    system_time_mgf,
)
from aoi_mg11.distributions import Deterministic, Exponential
from aoi_mg11.errors import ParameterDomainError, PoleError

from conftest import random_system_config

REF = SystemConfig(1.5, (0.5, 0.3, 0.2), Exponential(1.0))


class TestAges:
    def test_single_stream_exponential(self):
        cfg = SystemConfig(1.5, (1.0,), Exponential(1.0))
        assert avg_age(cfg, 1) == pytest.approx(5.0 / 3.0, rel=1e-12)

    def test_multi_stream(self):
        assert avg_age(REF, 1) == pytest.approx(10.0 / 3.0, rel=1e-12)

    def test_degenerate_service_rejected(self):
        with pytest.raises(ParameterDomainError):
            SystemConfig(1.0, (0.5, 0.5), Deterministic(0.0))

    def test_peak(self):
        assert peak_age(REF, 1) == pytest.approx(10.0 / 3.0 + 0.4, rel=1e-12)

    def test_peak_minus_avg_same_for_all_streams(self):
        diffs = [peak_age(REF, i) - avg_age(REF, i) for i in (1, 2, 3)]
        assert all(d == pytest.approx(0.16 / 0.4, rel=1e-12) for d in diffs)

    def test_low_rate_peak_expansion(self):
        cfg = SystemConfig(1e-3, (1.0,), Exponential(1.0))
        # to first order 1/lam + E[S]
        assert peak_age(cfg, 1) == pytest.approx(1001.0, rel=0.005)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            avg_age(REF, 4)
        with pytest.raises(IndexError):
            peak_age(REF, 0)


class TestMgfs:
    def test_system_time_normalization(self):
        assert system_time_mgf(REF, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_system_time_value(self):
        assert system_time_mgf(REF, 0.5) == pytest.approx(1.25, rel=1e-12)

    def test_system_time_point_mass(self):
        cfg = SystemConfig(1.0, (1.0,), Deterministic(1.0))
        assert system_time_mgf(cfg, -1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_interdeparture_normalization(self):
        assert interdeparture_mgf(REF, 1, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_interdeparture_values(self):
        assert interdeparture_mgf(REF, 1, -0.5) == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert interdeparture_mgf(REF, 1, -1.0) == pytest.approx(3.0 / 17.0, rel=1e-12)

    def test_interdeparture_pole(self):
        # lam_1 * P(lam - s) = s has a root between 0 and lam_1
        with pytest.raises(PoleError):
            # find the pole numerically, then evaluate there
            s = 0.0
            for _ in range(200):
                s = REF.stream_rate(1) * REF.service.laplace(REF.total_rate - s)
            interdeparture_mgf(REF, 1, s)

    def test_clock_mgfs(self):
        assert clock_mgf_A(REF, 0.0) == pytest.approx(1.0, abs=1e-12)
        assert clock_mgf_B(REF, 0.0) == pytest.approx(1.0, abs=1e-12)
        assert clock_mgf_A(REF, 0.5) == pytest.approx(1.5, rel=1e-12)
        assert clock_mgf_B(REF, 0.5) == pytest.approx(1.25, rel=1e-12)

    def test_clock_mgf_domain(self):
        with pytest.raises(ParameterDomainError):
            clock_mgf_A(REF, 1.5)
        with pytest.raises(ParameterDomainError):
            clock_mgf_B(REF, 2.0)


class TestMoments:
    def test_order_one_exponential(self):
        assert moments_from_mgf(lambda s: 1.5 / (1.5 - s), 1) == pytest.approx(2.0 / 3.0, abs=1e-6)

    def test_interdeparture_mean(self):
        phi = lambda s: interdeparture_mgf(REF, 1, s)
        assert moments_from_mgf(phi, 1) == pytest.approx(10.0 / 3.0, rel=1e-5)

    def test_interdeparture_second_moment(self):
        phi = lambda s: interdeparture_mgf(REF, 1, s)
        assert moments_from_mgf(phi, 2) == pytest.approx(176.0 / 9.0, rel=1e-3)

    def test_closed_forms(self):
        assert mean_system_time(REF) == pytest.approx(0.4, rel=1e-12)
        assert mean_interdeparture(REF, 1) == pytest.approx(10.0 / 3.0, rel=1e-12)
        assert second_moment_interdeparture(REF, 1) == pytest.approx(176.0 / 9.0, rel=1e-12)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            moments_from_mgf(lambda s: 1.0, 3)


class TestAgeReport:
    def test_decomposition_equals_direct(self):
        rep = age_report(REF)
        s1 = rep.streams[0]
        assert s1.avg_age == pytest.approx(
            0.4 + (176.0 / 9.0) / (20.0 / 3.0), rel=1e-12
        )
        assert s1.avg_age == pytest.approx(10.0 / 3.0, rel=1e-12)

    def test_single_stream_total(self):
        cfg = SystemConfig(1.5, (1.0,), Exponential(1.0))
        rep = age_report(cfg)
        assert rep.total_avg_age == rep.streams[0].avg_age

    def test_deterministic_two_streams(self):
        cfg = SystemConfig(1.0, (0.5, 0.5), Deterministic(1.0))
        rep = age_report(cfg)
        for s in rep.streams:
            assert s.avg_age == pytest.approx(2.0 * math.e, rel=1e-12)
        assert rep.total_avg_age == pytest.approx(4.0 * math.e, rel=1e-12)

    def test_delivery_rate_is_reciprocal_mean_gap(self):
        rep = age_report(REF)
        for s in rep.streams:
            assert s.delivery_rate * s.mean_interdeparture == pytest.approx(1.0, rel=1e-12)

    def test_peak_above_avg(self):
        rep = age_report(REF)
        for s in rep.streams:
            assert s.peak_age > s.avg_age


class TestRandomConfigProperties:
    def test_dual_routes_and_numeric_moments(self, rng):
        for _ in range(100):
            cfg = random_system_config(rng)
            rep = age_report(cfg)  # raises on dual-route disagreement
            assert system_time_mgf(cfg, 0.0) == pytest.approx(1.0, abs=1e-12)
            e_t = mean_system_time(cfg)
            num_t = moments_from_mgf(lambda s: system_time_mgf(cfg, s), 1)
            assert abs(num_t - e_t) <= 1e-5 * abs(e_t)
            for i in range(1, cfg.num_streams + 1):
                assert interdeparture_mgf(cfg, i, 0.0) == pytest.approx(1.0, abs=1e-12)
                phi = lambda s, i=i: interdeparture_mgf(cfg, i, s)
                e_y = mean_interdeparture(cfg, i)
                e_y2 = second_moment_interdeparture(cfg, i)
                assert abs(moments_from_mgf(phi, 1) - e_y) <= 1e-5 * abs(e_y)
                assert abs(moments_from_mgf(phi, 2) - e_y2) <= 1e-5 * abs(e_y2)
            # peak decomposition is cross-checked inside age_report
            assert rep.total_avg_age == pytest.approx(
                math.fsum(s.avg_age for s in rep.streams), rel=1e-12
            )

    def test_age_strictly_decreasing_in_own_probability(self):
        dist = Exponential(1.0)
        ages = []
        peaks = []
        for p1 in np.linspace(0.1, 0.9, 9):
            cfg = SystemConfig(1.5, (p1, 1.0 - p1), dist)
            ages.append(avg_age(cfg, 1))
            peaks.append(peak_age(cfg, 1))
        assert all(b < a for a, b in zip(ages, ages[1:]))
        assert all(b < a for a, b in zip(peaks, peaks[1:]))
