"""Aggregate storage parameters against hand values and the simulation oracle."""

import math
from datetime import datetime

import numpy as np
import pytest

from heatflex.aggregation import (
    CohortArrays,
    aggregate_at,
    build_profiles,
    capacity_summary,
    export_profiles_csv,
)
from heatflex.dwelling import on_off_times, simulate_population_mean_power
from heatflex.series import TemperatureSeries
from heatflex.stock import enumerate_cohorts, load_bundled_tables

from test_dwelling import make_cohort


def test_additivity_two_cohorts():
    cohorts = [make_cohort(count=1), make_cohort(count=1)]
    point = aggregate_at(cohorts, -10.0)
    assert point.power_max_mw == pytest.approx(0.008, rel=1e-12)  # 8 kW


def test_warm_ambient_all_zero():
    cohorts = [make_cohort(setpoint=sp, count=10) for sp in (19.0, 21.0, 23.0)]
    point = aggregate_at(cohorts, 25.0)
    assert point.power_max_mw == 0.0
    assert point.baseline_mw == 0.0
    assert point.energy_max_mwh == 0.0
    assert point.energy_min_mwh == 0.0
    assert point.midpoint_mwh == 0.0


def test_worked_single_cohort_example():
    cohort = make_cohort(count=1000)
    point = aggregate_at([cohort], -10.0)
    t_on, t_off = on_off_times(-10.0, cohort)
    duty = t_on / (t_on + t_off)
    assert point.baseline_mw == pytest.approx(duty * 4.0 * 1000 / 1000.0, rel=1e-12)
    assert point.baseline_mw == pytest.approx(2.07, abs=5e-3)
    assert point.energy_max_mwh == pytest.approx(4.0 * t_on * (1 - duty) * 1000 / 1000.0, rel=1e-12)
    assert point.energy_max_mwh == pytest.approx(6.67, abs=5e-3)
    assert point.energy_min_mwh == 0.0


def test_monte_carlo_oracle_single_cohort():
    cohort = make_cohort(count=1000)
    point = aggregate_at([cohort], -10.0)
    sim_kw = simulate_population_mean_power(cohort, -10.0, n_dwellings=1000,
                                            dt_h=1.0 / 30.0, hours=150.0, seed=3)
    assert sim_kw / 1000.0 == pytest.approx(point.baseline_mw, rel=0.05)


def test_mixed_areas_rejected():
    with pytest.raises(ValueError):
        aggregate_at([make_cohort(area="SE1"), make_cohort(area="SE2")], -10.0)


def test_linearity_in_counts():
    base = [make_cohort(count=50, setpoint=20.0), make_cohort(count=70, setpoint=22.0)]
    double = [make_cohort(count=100, setpoint=20.0), make_cohort(count=140, setpoint=22.0)]
    p1 = aggregate_at(base, -5.0)
    p2 = aggregate_at(double, -5.0)
    for field in ("baseline_mw", "power_max_mw", "power_min_mw", "energy_max_mwh"):
        assert getattr(p2, field) == pytest.approx(2.0 * getattr(p1, field), rel=1e-12)


def test_power_bounds_step_monotone():
    weak = make_cohort(resistance=2.0, rating=4.0, efficiency=3.0, count=10)  # lift 24 K
    strong = make_cohort(count=10)
    cohorts = [weak, strong]
    sweep = np.arange(-40.0, 25.0, 0.5)
    pmax = [aggregate_at(cohorts, th).power_max_mw for th in sweep]
    pmin = [aggregate_at(cohorts, th).power_min_mw for th in sweep]
    assert all(a >= b - 1e-12 for a, b in zip(pmax, pmax[1:]))
    # must-run power also falls away as it warms (undersized heaters catch up)
    assert all(a >= b - 1e-12 for a, b in zip(pmin, pmin[1:]))
    assert max(pmin) > 0.0  # the weak cohort is must-run when very cold


def test_bound_ordering_against_baseline():
    heating, buildings, _, inventory = load_bundled_tables()
    cohorts = [c for c in enumerate_cohorts(inventory, heating, buildings)
               if c.price_area == "SE3"]
    arrays = CohortArrays(cohorts)
    for theta in (-30.0, -20.0, -10.0, -5.0, 0.0, 10.0, 17.0):
        p = arrays.aggregate(theta)
        assert 0.0 <= p.power_min_mw <= p.power_max_mw <= p.installed_mw + 1e-9
        if p.power_max_mw > 0:
            assert p.power_min_mw <= p.baseline_mw + 1e-9
            assert p.baseline_mw <= p.power_max_mw + 1e-9
        assert 0.0 <= p.midpoint_mwh <= p.energy_max_mwh + 1e-12


def test_profiles_constant_series():
    cohorts = [make_cohort(count=100)]
    temps = TemperatureSeries(start=datetime(2019, 10, 1), areas=["SE3"],
                              values=np.full((1, 24), -5.0))
    profile = build_profiles(cohorts, temps)
    assert profile.n_intervals == 24
    assert np.ptp(profile.baseline_mw) == 0.0
    assert np.ptp(profile.energy_max_mwh) == 0.0
    point = aggregate_at(cohorts, -5.0)
    assert profile.baseline_mw[0, 0] == pytest.approx(point.baseline_mw, rel=1e-12)


def test_profiles_memoization_consistency():
    cohorts = [make_cohort(count=10)]
    values = np.array([[-5.0, -5.04, -4.96, -5.0]])  # all round to -5.0
    temps = TemperatureSeries(start=datetime(2019, 10, 1), areas=["SE3"], values=values)
    profile = build_profiles(cohorts, temps)
    assert np.ptp(profile.baseline_mw) == 0.0


def test_capacity_summary_bundled_stock():
    heating, buildings, _, inventory = load_bundled_tables()
    cohorts = enumerate_cohorts(inventory, heating, buildings)
    temps = TemperatureSeries(start=datetime(2019, 10, 1),
                              areas=["SE1", "SE2", "SE3", "SE4"],
                              values=np.full((4, 3), -5.0))
    profile = build_profiles(cohorts, temps)
    summary = capacity_summary(profile)
    assert 11_600 <= summary["installed_mw"] <= 14_200
    assert 10_000 <= summary["mean_energy_mwh"] <= 25_000
    assert summary["energy_mwh_per_k"] == pytest.approx(summary["mean_energy_mwh"] / 2.0)


def test_capacity_summary_single_cohort_arithmetic():
    cohorts = [make_cohort(count=1000)]
    temps = TemperatureSeries(start=datetime(2019, 10, 1), areas=["SE3"],
                              values=np.full((1, 5), -10.0))
    profile = build_profiles(cohorts, temps)
    summary = capacity_summary(profile)
    point = aggregate_at(cohorts, -10.0)
    assert summary["mean_energy_mwh"] == pytest.approx(point.energy_max_mwh, rel=1e-12)
    assert summary["max_energy_mwh"] == pytest.approx(point.energy_max_mwh, rel=1e-12)
    assert summary["installed_mw"] == pytest.approx(point.installed_mw, rel=1e-12)


def test_capacity_summary_guards():
    cohorts = [make_cohort(count=1)]
    temps = TemperatureSeries(start=datetime(2019, 10, 1), areas=["SE3"],
                              values=np.full((1, 2), -5.0))
    profile = build_profiles(cohorts, temps)
    with pytest.raises(ValueError):
        capacity_summary(profile, deadband_width_k=0.0)
    empty = build_profiles(cohorts, TemperatureSeries(
        start=datetime(2019, 10, 1), areas=["SE3"], values=np.zeros((1, 0))))
    with pytest.raises(ValueError):
        capacity_summary(empty)


def test_profile_csv_export(tmp_path):
    cohorts = [make_cohort(count=10)]
    temps = TemperatureSeries(start=datetime(2019, 10, 1), areas=["SE3"],
                              values=np.full((1, 3), -5.0))
    profile = build_profiles(cohorts, temps)
    path = tmp_path / "profiles.csv"
    export_profiles_csv(profile, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("area,timestamp,baseline_mw")
    assert len(lines) == 1 + 3
