"""Price/frequency scenario sets and chance-constraint quantile machinery.

Real-time prices are modeled as the day-ahead forecast times mean-preserving
lognormal noise; hourly mean frequency is fitted as a normal distribution
(optionally AR(1) across hours). Scenario draws are equiprobable and use
per-scenario derived Philox streams, so sets are reproducible bit for bit
under a fixed seed.

The storage bounds entering the bidding problem are uncertain; the chance
constraints are replaced by deterministic bounds at the Gaussian quantile
matching each constraint's confidence level (upper bounds tightened down,
lower bounds raised).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .rng import STREAM_SCENARIO, derive_rng
from .series import FREQUENCY_CLAMP_HZ, NOMINAL_FREQUENCY_HZ

#: default relative standard deviation of the uncertain storage bounds
DEFAULT_BOUND_SIGMA_FRACTION = 0.05


@dataclass(frozen=True)
class FrequencyModel:
    """Normal model of hourly mean frequency [Hz]."""

    mean_hz: float
    std_hz: float
    ar1: float = 0.0

    def __post_init__(self):
        if self.std_hz < 0:
            raise ValueError("frequency std must be >= 0")
        if not -1.0 < self.ar1 < 1.0:
            raise ValueError("AR(1) coefficient must lie in (-1, 1)")


@dataclass(frozen=True)
class BoundDistribution:
    """Gaussian distribution of an uncertain bound (mean may be an array)."""

    mean: np.ndarray | float
    std: np.ndarray | float

    def __post_init__(self):
        if np.any(np.asarray(self.std) < 0):
            raise ValueError("std must be >= 0")


@dataclass
class ScenarioSet:
    """Joint real-time price and frequency scenarios with probabilities."""

    rt_price: np.ndarray       # (S, A, T) $/MWh
    frequency: np.ndarray      # (S, T) Hz
    probabilities: np.ndarray  # (S,)
    nominal_hz: float = NOMINAL_FREQUENCY_HZ

    def __post_init__(self):
        self.rt_price = np.asarray(self.rt_price, dtype=float)
        self.frequency = np.asarray(self.frequency, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        s, _, t = self.rt_price.shape
        if self.frequency.shape != (s, t):
            raise ValueError("frequency scenarios must be shaped (scenarios, intervals)")
        if self.probabilities.shape != (s,):
            raise ValueError("one probability per scenario required")
        if np.any(self.probabilities <= 0) or abs(self.probabilities.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be positive and sum to 1")

    @property
    def n_scenarios(self) -> int:
        return self.rt_price.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.rt_price.shape[2]

    def activation_fraction(self) -> np.ndarray:
        """Per-interval reserve activation (f - nominal) / 0.1 Hz, shape (S, T)."""
        return (self.frequency - self.nominal_hz) / 0.1


def fit_frequency_model(history_hz, min_samples: int = 100, ar1: float = 0.0) -> FrequencyModel:
    """Sample mean/std of an hourly mean-frequency history."""
    hz = np.asarray(history_hz, dtype=float)
    if hz.ndim != 1 or len(hz) < min_samples:
        raise ValueError(f"need at least {min_samples} hourly samples to fit, got {hz.size}")
    return FrequencyModel(mean_hz=float(hz.mean()), std_hz=float(hz.std(ddof=1)), ar1=ar1)


def sample_scenarios(
    n: int,
    da_forecast: np.ndarray,
    freq_model: FrequencyModel,
    seed: int = 0,
    price_sigma: float = 0.15,
    window: int = 0,
) -> ScenarioSet:
    """Draw n equiprobable joint price/frequency scenarios for one window.

    Prices: forecast times exp(sigma*z - sigma^2/2), so the scenario mean
    equals the forecast. Frequency: normal per interval (AR(1) if the model
    says so), clamped to the sanity band. Each scenario uses its own derived
    stream keyed (seed, window, scenario), so sampling parallelizes and any
    single scenario can be reproduced in isolation.
    """
    if n < 1:
        raise ValueError("need at least one scenario")
    da = np.asarray(da_forecast, dtype=float)
    if da.ndim != 2:
        raise ValueError("da_forecast must be shaped (areas, intervals)")
    n_areas, n_t = da.shape

    rt = np.empty((n, n_areas, n_t))
    freq = np.empty((n, n_t))
    for w in range(n):
        rng = derive_rng(seed, STREAM_SCENARIO, window, w)
        if price_sigma > 0:
            z = rng.normal(0.0, 1.0, size=(n_areas, n_t))
            rt[w] = da * np.exp(price_sigma * z - 0.5 * price_sigma**2)
        else:
            rt[w] = da
        if freq_model.std_hz > 0:
            if freq_model.ar1 != 0.0:
                innov = rng.normal(
                    0.0, freq_model.std_hz * np.sqrt(1.0 - freq_model.ar1**2), size=n_t
                )
                dev = np.empty(n_t)
                prev = rng.normal(0.0, freq_model.std_hz)
                for k in range(n_t):
                    prev = freq_model.ar1 * prev + innov[k]
                    dev[k] = prev
            else:
                dev = rng.normal(0.0, freq_model.std_hz, size=n_t)
        else:
            dev = np.zeros(n_t)
        freq[w] = np.clip(
            freq_model.mean_hz + dev,
            NOMINAL_FREQUENCY_HZ - FREQUENCY_CLAMP_HZ,
            NOMINAL_FREQUENCY_HZ + FREQUENCY_CLAMP_HZ,
        )
    return ScenarioSet(rt_price=rt, frequency=freq, probabilities=np.full(n, 1.0 / n))


def quantile_bound(dist: BoundDistribution, epsilon: float, side: str):
    """Deterministic replacement of a chance constraint on a Gaussian bound.

    side="upper": a constraint LHS <= bound holding with probability
    1 - epsilon becomes LHS <= mean - z*std (cap tightened down).
    side="lower": LHS >= bound becomes LHS >= mean + z*std (floor raised).
    z is the standard normal (1 - epsilon) quantile.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    z = float(norm.ppf(1.0 - epsilon))
    mean = np.asarray(dist.mean, dtype=float)
    std = np.asarray(dist.std, dtype=float)
    if side == "upper":
        out = mean - z * std
    elif side == "lower":
        out = mean + z * std
    else:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    return out if out.ndim else float(out)


def tightened_bound(mean, sigma_fraction: float, epsilon: float, side: str):
    """Quantile bound for the common sigma = fraction * |mean| case."""
    mean = np.asarray(mean, dtype=float)
    dist = BoundDistribution(mean=mean, std=sigma_fraction * np.abs(mean))
    return quantile_bound(dist, epsilon, side)


def scenario_csv_dump(scen: ScenarioSet, areas, timestamps, path, prob_path) -> None:
    """Write (scenario_id, area, timestamp, rt_price, frequency) plus sidecar probabilities."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "area", "timestamp", "rt_price", "frequency"])
        for s in range(scen.n_scenarios):
            for ai, area in enumerate(areas):
                for ti, ts in enumerate(timestamps):
                    w.writerow([s, area, ts.isoformat(),
                                repr(float(scen.rt_price[s, ai, ti])),
                                repr(float(scen.frequency[s, ti]))])
    with open(prob_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "probability"])
        for s in range(scen.n_scenarios):
            w.writerow([s, repr(float(scen.probabilities[s]))])


def scenario_csv_load(path, prob_path) -> tuple[ScenarioSet, list[str], list]:
    """Inverse of scenario_csv_dump; validates frequency consistency across areas."""
    import csv
    from datetime import datetime

    from .errors import DataFormatError

    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["scenario_id", "area", "timestamp", "rt_price", "frequency"]:
            raise DataFormatError(f"{path}: unexpected scenario header")
        for row in reader:
            rows.append((int(row["scenario_id"]), row["area"],
                         datetime.fromisoformat(row["timestamp"]),
                         float(row["rt_price"]), float(row["frequency"])))
    if not rows:
        raise DataFormatError(f"{path}: no scenario rows")
    scen_ids = sorted({r[0] for r in rows})
    areas = sorted({r[1] for r in rows})
    stamps = sorted({r[2] for r in rows})
    idx = {(s, a, t): (p, f) for s, a, t, p, f in rows}
    if len(idx) != len(scen_ids) * len(areas) * len(stamps):
        raise DataFormatError(f"{path}: scenario grid is not dense")
    rt = np.empty((len(scen_ids), len(areas), len(stamps)))
    freq = np.empty((len(scen_ids), len(stamps)))
    for si, s in enumerate(scen_ids):
        for ti, t in enumerate(stamps):
            f_vals = {idx[(s, a, t)][1] for a in areas}
            if len(f_vals) != 1:
                raise DataFormatError(f"{path}: frequency differs across areas at scenario {s}, {t}")
            freq[si, ti] = f_vals.pop()
            for ai, a in enumerate(areas):
                rt[si, ai, ti] = idx[(s, a, t)][0]
    probs = np.zeros(len(scen_ids))
    with open(prob_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["scenario_id", "probability"]:
            raise DataFormatError(f"{prob_path}: unexpected probability header")
        for row in reader:
            probs[scen_ids.index(int(row["scenario_id"]))] = float(row["probability"])
    return ScenarioSet(rt_price=rt, frequency=freq, probabilities=probs), areas, stamps
