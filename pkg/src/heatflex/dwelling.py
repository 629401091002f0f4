"""Single-dwelling thermal dynamics and hysteresis control.

First-order RC model: each time step the indoor temperature relaxes
exponentially toward ambient plus (when the heater runs) the steady-state
temperature lift R * P * eta. A deadband thermostat switches the heater.
From the same dynamics follow closed-form expressions for how long a
steady cycle spends heating and coasting, the duty cycle, and whether a
dwelling is available for control at a given ambient temperature. The
time-stepped simulation doubles as the Monte-Carlo oracle for the
aggregate storage model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import STREAM_INIT_STATE, derive_rng
from .stock import Cohort

#: default oracle-simulation resolution [h] (one minute)
ORACLE_DT_H = 1.0 / 60.0

#: a step must resolve the RC time constant
MAX_DT_FRACTION_OF_RC = 0.1


@dataclass(frozen=True)
class DwellingState:
    indoor_temp_c: float
    heater_on: int  # 0 or 1

    def __post_init__(self):
        if self.heater_on not in (0, 1):
            raise ValueError("heater state must be 0 or 1")


@dataclass
class DwellingTrajectory:
    times_h: np.ndarray
    temps_c: np.ndarray       # indoor temperature at step ends
    heater_on: np.ndarray     # state applied during each step
    mean_power_kw: float      # time-average electric power
    switch_on_times_h: np.ndarray   # sub-step interpolated OFF->ON events
    switch_off_times_h: np.ndarray  # sub-step interpolated ON->OFF events

    def cycle_period_h(self, discard_cycles: int = 2) -> float:
        """Mean steady-cycle length from consecutive switch-on events."""
        events = self.switch_on_times_h
        if len(events) < discard_cycles + 2:
            raise ValueError("trajectory too short to estimate a cycle period")
        gaps = np.diff(events[discard_cycles:])
        return float(np.mean(gaps))


def decay_factor(cohort: Cohort, dt_h: float) -> float:
    """Per-step exponential retention exp(-dt / (R*C))."""
    return math.exp(-dt_h / (cohort.resistance_k_kw * cohort.capacitance_kwh_k))


def step_temperature(state: DwellingState, ambient_c: float, cohort: Cohort, dt_h: float) -> float:
    """Indoor temperature after one step of length dt_h."""
    if dt_h <= 0:
        raise ValueError("dt must be > 0")
    kappa = decay_factor(cohort, dt_h)
    target = ambient_c + state.heater_on * cohort.temperature_lift_k
    return kappa * state.indoor_temp_c + (1.0 - kappa) * target


def thermostat(temp_c: float, prev_on: int, temp_lower_c: float, temp_upper_c: float) -> int:
    """Hysteresis switch: on below the band, off above it, hold inside."""
    if not temp_lower_c < temp_upper_c:
        raise ValueError("deadband must have positive width")
    if temp_c < temp_lower_c:
        return 1
    if temp_c > temp_upper_c:
        return 0
    return prev_on


def availability(ambient_c: float, cohort: Cohort) -> tuple[int, int]:
    """(available, able) flags at an ambient temperature.

    Available: cold enough that heating is needed at all (ambient strictly
    below the lower deadband edge). Able: the heater is strong enough to
    push the indoor temperature past the upper edge, so it can cycle.
    """
    available = 1 if ambient_c < cohort.temp_lower_c else 0
    able = 1 if ambient_c + cohort.temperature_lift_k > cohort.temp_upper_c else 0
    return available, able


def on_off_times(ambient_c: float, cohort: Cohort) -> tuple[float, float]:
    """Heating and coasting legs [h] of one steady cycle across the deadband.

    Only defined for available and able dwellings; raises otherwise (the
    log arguments leave their domain).
    """
    available, able = availability(ambient_c, cohort)
    if not (available and able):
        raise ValueError(
            f"cycle times undefined at ambient {ambient_c} degC: "
            f"available={available}, able={able}"
        )
    lo, hi = cohort.temp_lower_c, cohort.temp_upper_c
    lift = cohort.temperature_lift_k
    rc = cohort.resistance_k_kw * cohort.capacitance_kwh_k
    # available and able imply both ratios are > 1, so both legs are positive
    t_on = rc * math.log((lo - ambient_c - lift) / (hi - ambient_c - lift))
    t_off = rc * math.log((hi - ambient_c) / (lo - ambient_c))
    return t_on, t_off


def duty_cycle(t_on_h: float, t_off_h: float) -> float:
    """Powered fraction of a steady cycle."""
    if t_on_h <= 0 or t_off_h <= 0:
        raise ValueError("cycle legs must be positive")
    return t_on_h / (t_on_h + t_off_h)


def steady_duty(ambient_c: float, cohort: Cohort) -> float:
    """Duty cycle at an ambient temperature (gated on availability)."""
    return duty_cycle(*on_off_times(ambient_c, cohort))


def _exp_step(temp: float, target: float, span_h: float, rc_h: float) -> float:
    return target + (temp - target) * math.exp(-span_h / rc_h)


def _bisect_crossing(temp: float, target: float, threshold: float,
                     span_h: float, rc_h: float) -> float:
    """Time within (0, span] at which the exponential path hits threshold.

    Bisection rather than a closed form, so trajectories provide an
    independent check of the analytic cycle-time expressions.
    """
    lo_t, hi_t = 0.0, span_h
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        if (_exp_step(temp, target, mid, rc_h) - threshold) * (temp - threshold) > 0:
            lo_t = mid  # still on the starting side
        else:
            hi_t = mid
    return hi_t


def simulate_dwelling(
    cohort: Cohort,
    ambient_c,
    dt_h: float = ORACLE_DT_H,
    hours: float | None = None,
    initial: DwellingState | None = None,
    noise_std_k: float = 0.0,
    seed: int = 0,
) -> DwellingTrajectory:
    """Trajectory of one dwelling under hysteresis control.

    ambient_c may be a scalar (with `hours` giving the horizon) or a
    per-step array. Steps are split at deadband crossings, so the
    trajectory follows the continuous hysteresis dynamics exactly and
    cycle-period estimates carry no step-quantization bias. The optional
    noise hook perturbs each step end with N(0, noise_std_k) and disables
    the event splitting; the default 0 keeps trajectories deterministic.
    """
    rc = cohort.resistance_k_kw * cohort.capacitance_kwh_k
    if dt_h <= 0:
        raise ValueError("dt must be > 0")
    if dt_h > MAX_DT_FRACTION_OF_RC * rc:
        raise ValueError(
            f"dt={dt_h} h too coarse for RC={rc:.2f} h; need dt <= {MAX_DT_FRACTION_OF_RC * rc:.3f} h"
        )
    if np.isscalar(ambient_c):
        if hours is None:
            raise ValueError("scalar ambient requires an explicit horizon in hours")
        n_steps = int(round(hours / dt_h))
        ambient = np.full(n_steps, float(ambient_c))
    else:
        ambient = np.asarray(ambient_c, dtype=float)
        n_steps = len(ambient)
    if initial is None:
        initial = DwellingState(indoor_temp_c=cohort.setpoint_c, heater_on=0)

    lo, hi = cohort.temp_lower_c, cohort.temp_upper_c
    lift = cohort.temperature_lift_k
    noise = None
    if noise_std_k > 0:
        noise = derive_rng(seed, STREAM_INIT_STATE).normal(0.0, noise_std_k, size=n_steps)

    temps = np.empty(n_steps)
    states = np.empty(n_steps, dtype=np.int8)
    on_events, off_events = [], []
    on_time_h = 0.0
    temp, on = initial.indoor_temp_c, initial.heater_on
    # an initial state outside the band corrects immediately
    on = thermostat(temp, on, lo, hi)
    for k in range(n_steps):
        if noise is not None:
            target = ambient[k] + on * lift
            temp = _exp_step(temp, target, dt_h, rc) + noise[k]
            on = thermostat(temp, on, lo, hi)
            on_time_h += dt_h * on
        else:
            remaining = dt_h
            while remaining > 1e-15:
                target = ambient[k] + on * lift
                candidate = _exp_step(temp, target, remaining, rc)
                if on == 1 and candidate > hi:
                    span = _bisect_crossing(temp, target, hi, remaining, rc)
                    on_time_h += span
                    off_events.append((k + 1) * dt_h - (remaining - span))
                    temp, on = hi, 0
                    remaining -= span
                elif on == 0 and candidate < lo:
                    span = _bisect_crossing(temp, target, lo, remaining, rc)
                    on_events.append((k + 1) * dt_h - (remaining - span))
                    temp, on = lo, 1
                    remaining -= span
                else:
                    on_time_h += remaining * on
                    temp = candidate
                    remaining = 0.0
        states[k] = on
        temps[k] = temp

    mean_power = on_time_h / (n_steps * dt_h) * cohort.rating_kw if n_steps else 0.0
    return DwellingTrajectory(
        times_h=np.arange(1, n_steps + 1) * dt_h,
        temps_c=temps,
        heater_on=states,
        mean_power_kw=mean_power,
        switch_on_times_h=np.asarray(on_events),
        switch_off_times_h=np.asarray(off_events),
    )


def simulate_population_mean_power(
    cohort: Cohort,
    ambient_c: float,
    n_dwellings: int = 1000,
    dt_h: float = ORACLE_DT_H,
    hours: float = 200.0,
    seed: int = 0,
    stream: int = 0,
    transient_fraction: float = 0.25,
) -> float:
    """Time-averaged total electric power [kW] of a simulated population.

    Vectorized over dwellings; initial temperatures are spread uniformly in
    the deadband and initial states drawn Bernoulli(duty estimate), which
    de-phases the population. The average discards the leading transient.
    """
    rc = cohort.resistance_k_kw * cohort.capacitance_kwh_k
    if dt_h > MAX_DT_FRACTION_OF_RC * rc:
        raise ValueError("dt too coarse for this cohort")
    n_steps = int(round(hours / dt_h))
    rng = derive_rng(seed, STREAM_INIT_STATE, stream)
    lo, hi = cohort.temp_lower_c, cohort.temp_upper_c
    temps = rng.uniform(lo, hi, size=n_dwellings)
    try:
        p_on = steady_duty(ambient_c, cohort)
    except ValueError:
        p_on = 0.0
    on = (rng.uniform(size=n_dwellings) < p_on).astype(np.int8)

    kappa = math.exp(-dt_h / rc)
    lift = cohort.temperature_lift_k
    on_fraction = np.empty(n_steps)
    for k in range(n_steps):
        targets = ambient_c + on * lift
        temps = kappa * temps + (1.0 - kappa) * targets
        on = np.where(temps < lo, 1, np.where(temps > hi, 0, on)).astype(np.int8)
        on_fraction[k] = on.mean()
    start = int(n_steps * transient_fraction)
    return float(on_fraction[start:].mean()) * cohort.rating_kw * n_dwellings
