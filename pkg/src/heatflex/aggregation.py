"""Aggregate thermal-energy-storage equivalent of a cohort population.

At a given ambient temperature every cohort contributes, per dwelling, its
duty-cycle baseline power, its rating to the feasible power envelope, and
the energy its deadband can absorb in one heating leg. Summed over the
population this yields, per price area and interval: baseline power, power
bounds, and energy bounds of one equivalent storage. The curves depend on
ambient temperature only, so profiles over a temperature series are
memoized on (area, ambient rounded to 0.1 degC).

The lower power bound is the must-run power: dwellings that need heat but
whose heater cannot push the indoor temperature through the deadband run
continuously and cannot be curtailed. (Summing the rating of every *able*
dwelling instead would exceed both the baseline and the upper bound at
normal temperatures and make any consumption floor infeasible.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TemperatureSeries
from .stock import PRICE_AREAS, Cohort

#: memoization granularity for ambient temperature [degC]
TEMP_ROUND_C = 0.1


@dataclass(frozen=True)
class StoragePoint:
    """Aggregate storage parameters of one area at one ambient temperature."""

    baseline_mw: float
    power_max_mw: float
    power_min_mw: float
    energy_max_mwh: float
    energy_min_mwh: float
    installed_mw: float

    @property
    def midpoint_mwh(self) -> float:
        return 0.5 * (self.energy_max_mwh + self.energy_min_mwh)


@dataclass
class StorageProfile:
    """Per-area time series of aggregate storage parameters."""

    areas: list[str]
    timestamps: list  # datetime per interval
    dt_h: float
    baseline_mw: np.ndarray    # (A, T)
    power_max_mw: np.ndarray
    power_min_mw: np.ndarray
    energy_max_mwh: np.ndarray
    energy_min_mwh: np.ndarray
    installed_mw: np.ndarray   # (A,)

    @property
    def midpoint_mwh(self) -> np.ndarray:
        return 0.5 * (self.energy_max_mwh + self.energy_min_mwh)

    @property
    def n_intervals(self) -> int:
        return self.baseline_mw.shape[1]


class CohortArrays:
    """Column view of one area's cohorts for vectorized aggregation."""

    def __init__(self, cohorts: list[Cohort]):
        areas = {c.price_area for c in cohorts}
        if len(areas) > 1:
            raise ValueError(f"cohorts span multiple price areas: {sorted(areas)}")
        self.area = areas.pop() if areas else None
        self.count = np.array([c.count for c in cohorts], dtype=float)
        self.rating_kw = np.array([c.rating_kw for c in cohorts])
        self.lift_k = np.array([c.temperature_lift_k for c in cohorts])
        self.rc_h = np.array([c.resistance_k_kw * c.capacitance_kwh_k for c in cohorts])
        self.lower_c = np.array([c.temp_lower_c for c in cohorts])
        self.upper_c = np.array([c.temp_upper_c for c in cohorts])
        self.installed_kw = float(np.sum(self.count * self.rating_kw))

    def aggregate(self, ambient_c: float) -> StoragePoint:
        if len(self.count) == 0:
            return StoragePoint(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        available = ambient_c < self.lower_c
        able = ambient_c + self.lift_k > self.upper_c
        cycling = available & able
        must_run = available & ~able

        rated_kw = self.count * self.rating_kw
        power_max = float(np.sum(rated_kw[available]))
        power_min = float(np.sum(rated_kw[must_run]))

        baseline = 0.0
        energy_max = 0.0
        if np.any(cycling):
            lo = self.lower_c[cycling]
            hi = self.upper_c[cycling]
            lift = self.lift_k[cycling]
            rc = self.rc_h[cycling]
            t_on = rc * np.log((lo - ambient_c - lift) / (hi - ambient_c - lift))
            t_off = rc * np.log((hi - ambient_c) / (lo - ambient_c))
            duty = t_on / (t_on + t_off)
            baseline = float(np.sum(duty * rated_kw[cycling]))
            energy_max = float(np.sum(rated_kw[cycling] * t_on * (1.0 - duty)))

        return StoragePoint(
            baseline_mw=baseline / 1000.0,
            power_max_mw=power_max / 1000.0,
            power_min_mw=power_min / 1000.0,
            energy_max_mwh=energy_max / 1000.0,
            energy_min_mwh=0.0,
            installed_mw=self.installed_kw / 1000.0,
        )


def aggregate_at(cohorts: list[Cohort], ambient_c: float) -> StoragePoint:
    """Aggregate storage parameters of one area's cohorts at one temperature."""
    return CohortArrays(cohorts).aggregate(ambient_c)


def split_by_area(cohorts: list[Cohort]) -> dict[str, list[Cohort]]:
    out: dict[str, list[Cohort]] = {a: [] for a in PRICE_AREAS}
    for c in cohorts:
        out.setdefault(c.price_area, []).append(c)
    return out


def build_profiles(cohorts: list[Cohort], temps: TemperatureSeries) -> StorageProfile:
    """Storage-parameter time series over a temperature series (all areas)."""
    by_area = split_by_area(cohorts)
    arrays = {a: CohortArrays(by_area.get(a, [])) for a in temps.areas}
    n_t = temps.n_intervals
    shape = (len(temps.areas), n_t)
    fields = {k: np.zeros(shape) for k in
              ("baseline_mw", "power_max_mw", "power_min_mw", "energy_max_mwh", "energy_min_mwh")}
    installed = np.zeros(len(temps.areas))

    for ai, area in enumerate(temps.areas):
        cache: dict[float, StoragePoint] = {}
        arr = arrays[area]
        installed[ai] = arr.installed_kw / 1000.0
        for ti in range(n_t):
            key = round(float(temps.values[ai, ti]) / TEMP_ROUND_C) * TEMP_ROUND_C
            point = cache.get(key)
            if point is None:
                point = arr.aggregate(key)
                cache[key] = point
            fields["baseline_mw"][ai, ti] = point.baseline_mw
            fields["power_max_mw"][ai, ti] = point.power_max_mw
            fields["power_min_mw"][ai, ti] = point.power_min_mw
            fields["energy_max_mwh"][ai, ti] = point.energy_max_mwh
            fields["energy_min_mwh"][ai, ti] = point.energy_min_mwh

    return StorageProfile(
        areas=list(temps.areas),
        timestamps=list(temps.timestamps),
        dt_h=temps.dt_h,
        installed_mw=installed,
        **fields,
    )


def capacity_summary(profile: StorageProfile, deadband_width_k: float = 2.0) -> dict:
    """Headline capacity numbers of a profile (system totals over areas)."""
    if profile.n_intervals == 0:
        raise ValueError("profile is empty")
    if deadband_width_k <= 0:
        raise ValueError("deadband width must be > 0")
    total_energy = profile.energy_max_mwh.sum(axis=0)  # (T,)
    return {
        "installed_mw": float(profile.installed_mw.sum()),
        "mean_energy_mwh": float(total_energy.mean()),
        "max_energy_mwh": float(total_energy.max()),
        "energy_mwh_per_k": float(total_energy.mean() / deadband_width_k),
        "mean_baseline_mw": float(profile.baseline_mw.sum(axis=0).mean()),
        "max_baseline_mw": float(profile.baseline_mw.sum(axis=0).max()),
    }


def export_profiles_csv(profile: StorageProfile, path) -> None:
    """Dump the per-area storage curves: one row per (area, timestamp)."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["area", "timestamp", "baseline_mw", "power_max_mw",
                    "power_min_mw", "energy_max_mwh", "energy_min_mwh", "midpoint_mwh"])
        mid = profile.midpoint_mwh
        for ai, area in enumerate(profile.areas):
            for ti, ts in enumerate(profile.timestamps):
                w.writerow([
                    area, ts.isoformat(),
                    repr(float(profile.baseline_mw[ai, ti])),
                    repr(float(profile.power_max_mw[ai, ti])),
                    repr(float(profile.power_min_mw[ai, ti])),
                    repr(float(profile.energy_max_mwh[ai, ti])),
                    repr(float(profile.energy_min_mwh[ai, ti])),
                    repr(float(mid[ai, ti])),
                ])
