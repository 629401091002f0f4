"""Hourly time series: types, CSV interchange, and synthetic generators.

All series are strictly hourly and timezone-naive by contract. Parsers
validate the documented schemas and fail on gaps, duplicate stamps, or
locale anomalies (comma decimals). Writers use shortest round-trip float
formatting so export followed by re-parse reproduces values exactly.

The synthetic generators produce season-scale stand-ins for the external
market and weather feeds: a sinusoidal annual temperature cycle through
each area's dwelling-weighted median, day-ahead prices with seasonal and
diurnal structure plus a spring dip, reserve prices, and hourly mean grid
frequency around 50 Hz. Each is deterministic under a seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import DataFormatError, SeriesGapError
from .rng import (
    STREAM_FREQUENCY,
    STREAM_PRICE,
    STREAM_TEMPERATURE,
    derive_rng,
)
from .stock import PRICE_AREAS, CountyRecord

HOUR = timedelta(hours=1)

#: nominal grid frequency [Hz] and the sanity clamp on hourly means [Hz]
NOMINAL_FREQUENCY_HZ = 50.0
FREQUENCY_CLAMP_HZ = 0.5


def _hourly_range(start: datetime, n: int) -> list[datetime]:
    return [start + k * HOUR for k in range(n)]


@dataclass
class TemperatureSeries:
    """Ambient temperature per key (price area or county label), hourly."""

    start: datetime
    areas: list[str]
    values: np.ndarray  # (A, T) degC
    dt_h: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.areas):
            raise ValueError("temperature values must be shaped (areas, intervals)")

    @property
    def n_intervals(self) -> int:
        return self.values.shape[1]

    @property
    def timestamps(self) -> list[datetime]:
        return _hourly_range(self.start, self.n_intervals)

    def slice(self, i0: int, i1: int) -> "TemperatureSeries":
        return TemperatureSeries(
            start=self.start + i0 * HOUR, areas=list(self.areas),
            values=self.values[:, i0:i1].copy(), dt_h=self.dt_h,
        )


@dataclass
class PriceSeries:
    """Day-ahead and real-time energy prices per price area [$ / MWh], hourly."""

    start: datetime
    areas: list[str]
    da: np.ndarray  # (A, T)
    rt: np.ndarray  # (A, T)

    def __post_init__(self):
        self.da = np.asarray(self.da, dtype=float)
        self.rt = np.asarray(self.rt, dtype=float)
        if self.da.shape != self.rt.shape or self.da.shape[0] != len(self.areas):
            raise ValueError("price arrays must both be shaped (areas, intervals)")

    @property
    def n_intervals(self) -> int:
        return self.da.shape[1]

    @property
    def timestamps(self) -> list[datetime]:
        return _hourly_range(self.start, self.n_intervals)


@dataclass
class FrequencyHistory:
    """Hourly mean grid frequency [Hz]."""

    start: datetime
    hz: np.ndarray  # (T,)

    def __post_init__(self):
        self.hz = np.asarray(self.hz, dtype=float)
        if np.any(np.abs(self.hz - NOMINAL_FREQUENCY_HZ) > FREQUENCY_CLAMP_HZ):
            raise DataFormatError(
                f"frequency history leaves the {NOMINAL_FREQUENCY_HZ}+/-"
                f"{FREQUENCY_CLAMP_HZ} Hz sanity band"
            )

    @property
    def n_intervals(self) -> int:
        return len(self.hz)

    @property
    def timestamps(self) -> list[datetime]:
        return _hourly_range(self.start, self.n_intervals)


# ---------------------------------------------------------------------------
# parsing

def _parse_stamp(raw: str, where: str) -> datetime:
    try:
        ts = datetime.fromisoformat(raw.strip())
    except ValueError:
        raise DataFormatError(f"{where}: bad timestamp {raw!r} (expected ISO 8601)") from None
    if ts.tzinfo is not None:
        raise DataFormatError(f"{where}: timestamps must be timezone-naive, got {raw!r}")
    if ts.minute or ts.second or ts.microsecond:
        raise DataFormatError(f"{where}: series must be strictly hourly, got {raw!r}")
    return ts


def _parse_value(raw: str, where: str) -> float:
    raw = raw.strip()
    if "," in raw:
        raise DataFormatError(f"{where}: comma decimal {raw!r}; use '.' as the decimal separator")
    try:
        return float(raw)
    except ValueError:
        raise DataFormatError(f"{where}: not a number: {raw!r}") from None


def _check_hourly(stamps: list[datetime], key: str, path: str) -> None:
    gaps = []
    for prev, cur in zip(stamps, stamps[1:]):
        expected = prev + HOUR
        if cur != expected:
            gaps.append(expected)
            if len(gaps) >= 5:
                break
    if gaps:
        listing = ", ".join(g.isoformat() for g in gaps)
        raise SeriesGapError(f"{path}: series {key!r} has missing hours starting at: {listing}")


def parse_temperature_csv(path) -> TemperatureSeries:
    """Read the temperature schema (timestamp, county_or_area, celsius)."""
    per_key: dict[str, list[tuple[datetime, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["timestamp", "county_or_area", "celsius"]:
            raise DataFormatError(f"{path}: expected header timestamp,county_or_area,celsius")
        for i, row in enumerate(reader, start=2):
            where = f"{path}:row {i}"
            ts = _parse_stamp(row["timestamp"], where)
            per_key.setdefault(row["county_or_area"].strip(), []).append(
                (ts, _parse_value(row["celsius"], where))
            )
    if not per_key:
        raise DataFormatError(f"{path}: no data rows")
    keys = sorted(per_key)
    spans = []
    for key in keys:
        rows = sorted(per_key[key])
        stamps = [t for t, _ in rows]
        if len(set(stamps)) != len(stamps):
            raise DataFormatError(f"{path}: duplicate timestamps for {key!r}")
        _check_hourly(stamps, key, str(path))
        spans.append((stamps[0], len(stamps)))
    if len(set(spans)) != 1:
        raise DataFormatError(f"{path}: series do not share an identical hourly span")
    start, n = spans[0]
    values = np.array([[v for _, v in sorted(per_key[k])] for k in keys])
    return TemperatureSeries(start=start, areas=keys, values=values)


def parse_price_csv(path, currency: str = "USD") -> PriceSeries:
    """Read the price schema (timestamp, area, da_price, rt_price).

    currency="SEK" converts to dollars at the fixed 10 SEK/$ rate.
    """
    if currency not in ("USD", "SEK"):
        raise DataFormatError(f"unknown currency {currency!r}; use USD or SEK")
    scale = 0.1 if currency == "SEK" else 1.0
    per_key: dict[str, list[tuple[datetime, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["timestamp", "area", "da_price", "rt_price"]:
            raise DataFormatError(f"{path}: expected header timestamp,area,da_price,rt_price")
        for i, row in enumerate(reader, start=2):
            where = f"{path}:row {i}"
            ts = _parse_stamp(row["timestamp"], where)
            per_key.setdefault(row["area"].strip(), []).append(
                (ts, _parse_value(row["da_price"], where) * scale,
                 _parse_value(row["rt_price"], where) * scale)
            )
    if not per_key:
        raise DataFormatError(f"{path}: no data rows")
    keys = sorted(per_key)
    spans = []
    for key in keys:
        rows = sorted(per_key[key])
        stamps = [t for t, _, _ in rows]
        if len(set(stamps)) != len(stamps):
            raise DataFormatError(f"{path}: duplicate timestamps for {key!r}")
        _check_hourly(stamps, key, str(path))
        spans.append((stamps[0], len(stamps)))
    if len(set(spans)) != 1:
        raise DataFormatError(f"{path}: areas do not share an identical hourly span")
    start, _ = spans[0]
    da = np.array([[v for _, v, _ in sorted(per_key[k])] for k in keys])
    rt = np.array([[v for _, _, v in sorted(per_key[k])] for k in keys])
    return PriceSeries(start=start, areas=keys, da=da, rt=rt)


def parse_frequency_csv(path) -> FrequencyHistory:
    """Read the frequency schema (timestamp, hz)."""
    rows: list[tuple[datetime, float]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["timestamp", "hz"]:
            raise DataFormatError(f"{path}: expected header timestamp,hz")
        for i, row in enumerate(reader, start=2):
            where = f"{path}:row {i}"
            rows.append((_parse_stamp(row["timestamp"], where), _parse_value(row["hz"], where)))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    rows.sort()
    stamps = [t for t, _ in rows]
    if len(set(stamps)) != len(stamps):
        raise DataFormatError(f"{path}: duplicate timestamps")
    _check_hourly(stamps, "frequency", str(path))
    return FrequencyHistory(start=stamps[0], hz=np.array([v for _, v in rows]))


# ---------------------------------------------------------------------------
# writing (shortest round-trip float format)

def write_temperature_csv(series: TemperatureSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "county_or_area", "celsius"])
        for ai, key in enumerate(series.areas):
            for ti, ts in enumerate(series.timestamps):
                w.writerow([ts.isoformat(), key, repr(float(series.values[ai, ti]))])


def write_price_csv(series: PriceSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "area", "da_price", "rt_price"])
        for ai, key in enumerate(series.areas):
            for ti, ts in enumerate(series.timestamps):
                w.writerow([ts.isoformat(), key,
                            repr(float(series.da[ai, ti])), repr(float(series.rt[ai, ti]))])


def write_frequency_csv(history: FrequencyHistory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "hz"])
        for ts, v in zip(history.timestamps, history.hz):
            w.writerow([ts.isoformat(), repr(float(v))])


# ---------------------------------------------------------------------------
# synthetic generators

def area_median_temps(counties: list[CountyRecord]) -> dict[str, float]:
    """Dwelling-share-weighted median temperature per price area."""
    sums = {a: 0.0 for a in PRICE_AREAS}
    weights = {a: 0.0 for a in PRICE_AREAS}
    for c in counties:
        sums[c.price_area] += c.sfd_share * c.median_temp_c
        weights[c.price_area] += c.sfd_share
    return {a: sums[a] / weights[a] for a in PRICE_AREAS if weights[a] > 0}


def _annual_phase(ts: datetime) -> float:
    doy = ts.timetuple().tm_yday + ts.hour / 24.0
    # coldest around mid January
    return math.cos(2.0 * math.pi * (doy - 15.0) / 365.25)


def _ar1_noise(rng, n: int, std: float, ar1: float) -> np.ndarray:
    if std <= 0:
        return np.zeros(n)
    innov = rng.normal(0.0, std * math.sqrt(max(1.0 - ar1 * ar1, 1e-12)), size=n)
    out = np.empty(n)
    prev = rng.normal(0.0, std)
    for k in range(n):
        prev = ar1 * prev + innov[k]
        out[k] = prev
    return out


def synth_temperature(
    counties: list[CountyRecord],
    start: datetime,
    hours: int,
    seed: int = 0,
    annual_amplitude_k: float = 10.0,
    diurnal_amplitude_k: float = 2.5,
    noise_std_k: float = 1.5,
    noise_ar1: float = 0.95,
) -> TemperatureSeries:
    """Annual sinusoid through each area's weighted median temperature."""
    medians = area_median_temps(counties)
    areas = [a for a in PRICE_AREAS if a in medians]
    stamps = _hourly_range(start, hours)
    annual = np.array([_annual_phase(ts) for ts in stamps])
    diurnal = np.array([math.cos(2.0 * math.pi * (ts.hour - 4.0) / 24.0) for ts in stamps])
    values = np.empty((len(areas), hours))
    for ai, area in enumerate(areas):
        rng = derive_rng(seed, STREAM_TEMPERATURE, ai)
        values[ai] = (
            medians[area]
            - annual_amplitude_k * annual
            - diurnal_amplitude_k * diurnal
            + _ar1_noise(rng, hours, noise_std_k, noise_ar1)
        )
    return TemperatureSeries(start=start, areas=areas, values=values)


def synth_prices(
    start: datetime,
    hours: int,
    seed: int = 0,
    base_usd_mwh: float = 32.0,
    seasonal_amplitude: float = 8.0,
    diurnal_amplitude: float = 5.0,
    noise_std: float = 3.0,
    noise_ar1: float = 0.9,
    rt_noise_sigma: float = 0.15,
    areas: tuple[str, ...] = PRICE_AREAS,
) -> PriceSeries:
    """Synthetic day-ahead prices plus a realized real-time path.

    The day-ahead level is deterministic structure plus a slow common noise
    (the "known" market outcome). The real-time path multiplies it with
    mean-preserving lognormal noise drawn from a dedicated stream, standing
    in for imbalance price realizations.
    """
    stamps = _hourly_range(start, hours)
    annual = np.array([_annual_phase(ts) for ts in stamps])
    hour = np.array([ts.hour for ts in stamps], dtype=float)
    diurnal = 0.6 * np.cos(2.0 * math.pi * (hour - 8.0) / 24.0) \
        + 0.4 * np.cos(2.0 * math.pi * (hour - 18.0) / 24.0)
    # spring reservoir melt depresses prices around May
    doy = np.array([ts.timetuple().tm_yday for ts in stamps], dtype=float)
    spring_dip = 6.0 * np.exp(-0.5 * ((doy - 135.0) / 20.0) ** 2)

    rng_common = derive_rng(seed, STREAM_PRICE, 0)
    common = _ar1_noise(rng_common, hours, noise_std, noise_ar1)
    area_offset = {"SE1": -1.0, "SE2": -0.5, "SE3": 0.5, "SE4": 1.5}

    da = np.empty((len(areas), hours))
    rt = np.empty((len(areas), hours))
    for ai, area in enumerate(areas):
        rng_a = derive_rng(seed, STREAM_PRICE, 1 + ai)
        level = (
            base_usd_mwh
            + seasonal_amplitude * annual
            + diurnal_amplitude * diurnal
            - spring_dip
            + area_offset.get(area, 0.0)
            + common
            + _ar1_noise(rng_a, hours, noise_std * 0.4, noise_ar1)
        )
        da[ai] = np.maximum(level, 1.0)
        rng_rt = derive_rng(seed, STREAM_PRICE, 100 + ai)
        if rt_noise_sigma > 0:
            z = rng_rt.normal(0.0, 1.0, size=hours)
            rt[ai] = da[ai] * np.exp(rt_noise_sigma * z - 0.5 * rt_noise_sigma**2)
        else:
            rt[ai] = da[ai]
    return PriceSeries(start=start, areas=list(areas), da=da, rt=rt)


def synth_reserve_prices(
    start: datetime,
    hours: int,
    seed: int = 0,
    base_usd_mw_01hz: float = 4.0,
    seasonal_amplitude: float = 1.5,
    noise_std: float = 0.8,
) -> np.ndarray:
    """Synthetic reserve capacity prices [$ per MW per 0.1 Hz, hourly]."""
    stamps = _hourly_range(start, hours)
    annual = np.array([_annual_phase(ts) for ts in stamps])
    rng = derive_rng(seed, STREAM_PRICE, 999)
    noise = _ar1_noise(rng, hours, noise_std, 0.85)
    return np.maximum(base_usd_mw_01hz - seasonal_amplitude * annual + noise, 0.0)


def synth_frequency(
    start: datetime,
    hours: int,
    seed: int = 0,
    mean_hz: float = NOMINAL_FREQUENCY_HZ,
    std_hz: float = 0.02,
) -> FrequencyHistory:
    """I.i.d. hourly mean frequency around nominal, clamped to the sanity band."""
    rng = derive_rng(seed, STREAM_FREQUENCY)
    hz = rng.normal(mean_hz, std_hz, size=hours) if std_hz > 0 else np.full(hours, mean_hz)
    hz = np.clip(hz, NOMINAL_FREQUENCY_HZ - FREQUENCY_CLAMP_HZ,
                 NOMINAL_FREQUENCY_HZ + FREQUENCY_CLAMP_HZ)
    return FrequencyHistory(start=start, hz=hz)
