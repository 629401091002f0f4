"""Rolling-horizon season simulation.

A season is split into consecutive commitment windows (one contract period
each). Per window: sample scenarios around the forecast, solve the bidding
program over contract plus prediction extension, freeze the first-stage
bids at gate closure, then settle against one realized out-of-sample
price/frequency path by re-solving the recourse with the first stage fixed.
The realized end-of-contract state of energy carries into the next window;
only the first window starts at the 50% midpoint.

An infeasible planning window is skipped with zero bids (flagged, the
season continues); an infeasible settlement falls back to an elastic
recourse that prices energy-band violations at a fixed per-MWh penalty.

Shorter gate-closure lead times shrink the real-time price scenario noise
by a configurable improvement rate per hour of reduced lead, standing in
for the fresher forecasts a later gate closure would allow.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

from .aggregation import StorageProfile, build_profiles
from .bidding import (
    BidSolution,
    HorizonConfig,
    MarketPrices,
    ProfitReport,
    RiskConfig,
    TesWindow,
    evaluate_profit,
    optimize_bids_by_area,
)
from .errors import BoundCrossingError, InfeasibleError
from .scenarios import FrequencyModel, ScenarioSet, fit_frequency_model, sample_scenarios
from .series import (
    TemperatureSeries,
    synth_frequency,
    synth_prices,
    synth_reserve_prices,
    synth_temperature,
)
from .stock import DEFAULT_SETPOINTS, enumerate_cohorts, load_bundled_tables

#: settlement relaxation price for energy-band violations [$ / MWh]
ELASTIC_PENALTY_USD_MWH = 1000.0


@dataclass(frozen=True)
class SeasonParams:
    """Everything one sensitivity case changes about a season run."""

    risk: RiskConfig = RiskConfig()
    horizon: HorizonConfig = HorizonConfig()
    n_scenarios: int = 25
    price_sigma: float = 0.15
    zero_mean_activation: bool = False
    deterministic: bool = False
    allow_reserve: bool = True
    reserve_price_zero: bool = False
    imbalance_usd_mwh: float = 1.0
    soe_penalty_usd_mwh: float | None = None  # None = dynamic
    bound_sigma_fraction: float = 0.05
    reference_lead_hours: float = 12.0
    lead_improvement_per_hour: float = 0.02
    engine: str = "auto"

    def effective_price_sigma(self) -> float:
        """Scenario noise after the forecast-freshness adjustment for lead time."""
        gain = self.lead_improvement_per_hour * (
            self.reference_lead_hours - self.horizon.lead_hours
        )
        return self.price_sigma * float(np.clip(1.0 - gain, 0.1, 1.5))


@dataclass
class SeasonData:
    """Season-wide inputs shared by every case run on the same seed."""

    start: datetime
    season_hours: int           # committed horizon; data extends beyond by a margin
    temps: TemperatureSeries
    profile: StorageProfile
    da_price: np.ndarray        # (A, H+margin)
    rt_price_realized: np.ndarray
    reserve_price: np.ndarray   # (H+margin,)
    freq_realized: np.ndarray   # (H+margin,)
    freq_model: FrequencyModel
    n_dwellings: int
    source: str = "synthetic"
    seed: int = 0

    @property
    def areas(self) -> list[str]:
        return self.profile.areas


@dataclass
class WindowRecord:
    index: int
    start_hour: int
    skipped: bool
    skip_reason: str
    elastic_violation_mwh: float
    expected_profit_usd: float
    realized_profit_usd: float
    reserve_revenue_usd: float
    da_cost_usd: float
    rt_cost_usd: float
    imbalance_cost_usd: float
    penalty_cost_usd: float
    carried_soe_mwh: np.ndarray


@dataclass
class SeasonResult:
    areas: list[str]
    start: datetime
    dt_h: float
    n_dwellings: int
    seed: int
    hours: int                      # committed hours covered by full windows
    windows: list[WindowRecord]
    baseline_mw: np.ndarray         # (A, hours)
    e_da_mwh: np.ndarray
    p_r_mw: np.ndarray
    p_rt_expected_mw: np.ndarray
    soe_expected_mwh: np.ndarray
    p_rt_realized_mw: np.ndarray
    soe_realized_mwh: np.ndarray
    e_i_realized_mwh: np.ndarray
    rt_price_realized: np.ndarray
    da_price: np.ndarray
    reserve_price: np.ndarray       # (hours,)
    freq_realized: np.ndarray       # (hours,)

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    @property
    def n_skipped(self) -> int:
        return sum(1 for w in self.windows if w.skipped)

    @property
    def expected_profit_usd(self) -> float:
        return float(sum(w.expected_profit_usd for w in self.windows))

    @property
    def realized_profit_usd(self) -> float:
        return float(sum(w.realized_profit_usd for w in self.windows))

    def expected_cost_per_dwelling_usd(self) -> float:
        return -self.expected_profit_usd / self.n_dwellings

    def realized_cost_per_dwelling_usd(self) -> float:
        return -self.realized_profit_usd / self.n_dwellings

    def mean_reserve_kw_per_dwelling(self) -> float:
        """Season-mean committed reserve per dwelling [kW per 0.1 Hz]."""
        total_mw_hours = float(self.p_r_mw.sum())
        return total_mw_hours / self.hours / self.n_dwellings * 1000.0


def build_season_data(
    start: datetime,
    season_hours: int,
    seed: int = 0,
    margin_hours: int = 48,
    setpoints: tuple[float, ...] = DEFAULT_SETPOINTS,
    price_kwargs: dict | None = None,
    temp_kwargs: dict | None = None,
    freq_std_hz: float = 0.02,
    freq_fit_hours: int = 4000,
) -> SeasonData:
    """Synthetic season inputs built from the bundled stock tables."""
    heating, buildings, counties, inventory = load_bundled_tables()
    cohorts = enumerate_cohorts(inventory, heating, buildings, setpoints=setpoints)
    hours = season_hours + margin_hours

    temps = synth_temperature(counties, start, hours, seed=seed, **(temp_kwargs or {}))
    profile = build_profiles(cohorts, temps)
    prices = synth_prices(start, hours, seed=seed, **(price_kwargs or {}))
    reserve = synth_reserve_prices(start, hours, seed=seed)
    freq = synth_frequency(start, hours, seed=seed, std_hz=freq_std_hz)
    # fit the scenario model on a separate synthetic history, as one would
    # on measured data
    history = synth_frequency(start - timedelta(hours=freq_fit_hours), freq_fit_hours,
                              seed=seed + 1, std_hz=freq_std_hz)
    if freq_std_hz > 0:
        freq_model = fit_frequency_model(history.hz)
    else:
        freq_model = FrequencyModel(mean_hz=50.0, std_hz=0.0)

    return SeasonData(
        start=start, season_hours=season_hours, temps=temps, profile=profile,
        da_price=prices.da, rt_price_realized=prices.rt, reserve_price=reserve,
        freq_realized=freq.hz, freq_model=freq_model,
        n_dwellings=inventory.total_dwellings(), seed=seed,
    )


def settle(
    tes: TesWindow,
    prices: MarketPrices,
    frozen_e_da: np.ndarray,
    frozen_p_r: np.ndarray,
    realized: ScenarioSet,
    risk: RiskConfig,
    horizon: HorizonConfig,
    zero_mean_activation: bool = False,
    bound_sigma_fraction: float = 0.05,
    allow_reserve: bool = True,
    engine: str = "auto",
    elastic_penalty: float = ELASTIC_PENALTY_USD_MWH,
) -> tuple[BidSolution, ProfitReport]:
    """Re-dispatch one window against the realized path with bids frozen.

    An area whose exact recourse is infeasible falls back to the elastic
    recourse, with energy-band violations priced at elastic_penalty per MWh.
    """
    if realized.n_scenarios != 1:
        raise ValueError("settlement expects exactly one realized scenario")
    sol = optimize_bids_by_area(
        tes, prices, realized, risk, horizon,
        engine=engine,
        frozen_e_da=frozen_e_da,
        frozen_p_r=frozen_p_r,
        elastic_fallback=float(elastic_penalty),
        zero_mean_activation=zero_mean_activation,
        bound_sigma_fraction=bound_sigma_fraction,
        allow_reserve=allow_reserve,
        with_names=False,
    )
    report = evaluate_profit(sol, prices, realized, risk, span="contract")
    return sol, report


def run_season(data: SeasonData, params: SeasonParams, seed: int) -> SeasonResult:
    """Roll the bidding windows over the season and settle each against the
    realized path, carrying the realized state of energy between windows."""
    n_c = params.horizon.n_contract
    n_tot = params.horizon.n_total
    n_windows = data.season_hours // n_c
    if n_windows < 1:
        raise ValueError("season shorter than one contract period")
    if n_windows * n_c + (n_tot - n_c) > data.profile.n_intervals:
        raise ValueError("season data does not cover the final window's horizon")

    areas = data.areas
    n_a = len(areas)
    hours = n_windows * n_c
    shape = (n_a, hours)
    out = {k: np.zeros(shape) for k in
           ("baseline", "e_da", "p_r", "p_rt_exp", "soe_exp", "p_rt_real",
            "soe_real", "e_i_real")}

    sigma_eff = params.effective_price_sigma()
    scen_count = 1 if params.deterministic else params.n_scenarios
    scen_sigma = 0.0 if params.deterministic else sigma_eff
    freq_model = data.freq_model
    if params.deterministic:
        freq_model = FrequencyModel(mean_hz=freq_model.mean_hz, std_hz=0.0)

    windows: list[WindowRecord] = []
    carried: np.ndarray | None = None

    for w in range(n_windows):
        i0, i1 = w * n_c, w * n_c + n_tot
        tes = TesWindow.from_profile(data.profile, i0, i1, initial_soe_mwh=carried)
        reserve_price = np.zeros(n_tot) if params.reserve_price_zero \
            else data.reserve_price[i0:i1].copy()
        prices = MarketPrices(
            reserve_usd_mw=reserve_price,
            day_ahead_usd_mwh=data.da_price[:, i0:i1].copy(),
            imbalance_usd_mwh=params.imbalance_usd_mwh,
            soe_penalty_usd_mwh=params.soe_penalty_usd_mwh,
        )
        scen = sample_scenarios(
            scen_count, prices.day_ahead_usd_mwh, freq_model,
            seed=seed, price_sigma=scen_sigma, window=w,
        )

        skipped = False
        skip_reason = ""
        expected_profit = 0.0
        plan: BidSolution | None = None
        try:
            plan = optimize_bids_by_area(
                tes, prices, scen, params.risk, params.horizon,
                engine=params.engine,
                zero_mean_activation=params.zero_mean_activation,
                bound_sigma_fraction=params.bound_sigma_fraction,
                allow_reserve=params.allow_reserve,
                with_names=False,
            )
            plan_report = evaluate_profit(plan, prices, scen, params.risk,
                                          span="contract")
            expected_profit = plan_report.expected_profit
        except (InfeasibleError, BoundCrossingError) as exc:
            skipped = True
            skip_reason = f"{type(exc).__name__}: {exc}"

        if plan is not None:
            frozen_e_da = plan.e_da_mwh
            frozen_p_r = plan.p_r_mw
        else:
            frozen_e_da = np.zeros((n_a, n_tot))
            frozen_p_r = np.zeros((n_a, n_tot))

        realized = ScenarioSet(
            rt_price=data.rt_price_realized[:, i0:i1][None, :, :].copy(),
            frequency=data.freq_realized[i0:i1][None, :].copy(),
            probabilities=np.array([1.0]),
        )
        sol, report = settle(
            tes, prices, frozen_e_da, frozen_p_r, realized,
            params.risk, params.horizon,
            zero_mean_activation=params.zero_mean_activation,
            bound_sigma_fraction=params.bound_sigma_fraction,
            allow_reserve=params.allow_reserve,
            engine=params.engine,
        )
        realized_profit = float(report.profit.sum())
        if skipped:
            expected_profit = realized_profit  # best available stand-in

        carried = sol.soe_mwh[0, :, n_c - 1].copy()
        sl = slice(w * n_c, (w + 1) * n_c)
        out["baseline"][:, sl] = tes.baseline_mw[:, :n_c]
        out["e_da"][:, sl] = frozen_e_da[:, :n_c]
        out["p_r"][:, sl] = frozen_p_r[:, :n_c]
        if plan is not None:
            pi = plan.probabilities
            out["p_rt_exp"][:, sl] = np.einsum("s,sat->at", pi, plan.p_rt_mw[:, :, :n_c])
            out["soe_exp"][:, sl] = np.einsum("s,sat->at", pi, plan.soe_mwh[:, :, :n_c])
        out["p_rt_real"][:, sl] = sol.p_rt_mw[0, :, :n_c]
        out["soe_real"][:, sl] = sol.soe_mwh[0, :, :n_c]
        out["e_i_real"][:, sl] = sol.e_i_mwh[0, :, :n_c]

        windows.append(WindowRecord(
            index=w, start_hour=w * n_c, skipped=skipped, skip_reason=skip_reason,
            elastic_violation_mwh=sol.elastic_violation_mwh,
            expected_profit_usd=expected_profit,
            realized_profit_usd=realized_profit,
            reserve_revenue_usd=float(report.reserve_revenue.sum()),
            da_cost_usd=float(report.da_cost.sum()),
            rt_cost_usd=float(report.rt_cost.sum()),
            imbalance_cost_usd=float(report.imbalance_cost.sum()),
            penalty_cost_usd=float(report.penalty_cost.sum()),
            carried_soe_mwh=carried.copy(),
        ))

    return SeasonResult(
        areas=list(areas), start=data.start, dt_h=params.horizon.dt_h,
        n_dwellings=data.n_dwellings, seed=seed, hours=hours, windows=windows,
        baseline_mw=out["baseline"], e_da_mwh=out["e_da"], p_r_mw=out["p_r"],
        p_rt_expected_mw=out["p_rt_exp"], soe_expected_mwh=out["soe_exp"],
        p_rt_realized_mw=out["p_rt_real"], soe_realized_mwh=out["soe_real"],
        e_i_realized_mwh=out["e_i_real"],
        rt_price_realized=data.rt_price_realized[:, :hours].copy(),
        da_price=data.da_price[:, :hours].copy(),
        reserve_price=data.reserve_price[:hours].copy(),
        freq_realized=data.freq_realized[:hours].copy(),
    )


def write_season_hourly_csv(result: SeasonResult, path) -> None:
    """Hourly series: one row per (timestamp, area)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "timestamp", "area", "baseline_mw", "p_rt_expected_mw", "e_da_mwh",
            "p_r_mw", "soe_expected_mwh", "p_rt_realized_mw", "soe_realized_mwh",
            "e_i_realized_mwh", "da_price", "rt_price_realized",
            "reserve_price", "frequency_hz",
        ])
        for ti in range(result.hours):
            ts = result.start + ti * timedelta(hours=1)
            for ai, area in enumerate(result.areas):
                w.writerow([
                    ts.isoformat(), area,
                    repr(float(result.baseline_mw[ai, ti])),
                    repr(float(result.p_rt_expected_mw[ai, ti])),
                    repr(float(result.e_da_mwh[ai, ti])),
                    repr(float(result.p_r_mw[ai, ti])),
                    repr(float(result.soe_expected_mwh[ai, ti])),
                    repr(float(result.p_rt_realized_mw[ai, ti])),
                    repr(float(result.soe_realized_mwh[ai, ti])),
                    repr(float(result.e_i_realized_mwh[ai, ti])),
                    repr(float(result.da_price[ai, ti])),
                    repr(float(result.rt_price_realized[ai, ti])),
                    repr(float(result.reserve_price[ti])),
                    repr(float(result.freq_realized[ti])),
                ])


def write_season_windows_csv(result: SeasonResult, path) -> None:
    """Per-window settlement decomposition into the five profit terms."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "window", "start_hour", "skipped", "skip_reason",
            "elastic_violation_mwh", "expected_profit_usd", "realized_profit_usd",
            "reserve_revenue_usd", "da_cost_usd", "rt_cost_usd",
            "imbalance_cost_usd", "penalty_cost_usd",
        ])
        for rec in result.windows:
            w.writerow([
                rec.index, rec.start_hour, int(rec.skipped), rec.skip_reason,
                repr(float(rec.elastic_violation_mwh)),
                repr(float(rec.expected_profit_usd)),
                repr(float(rec.realized_profit_usd)),
                repr(float(rec.reserve_revenue_usd)),
                repr(float(rec.da_cost_usd)),
                repr(float(rec.rt_cost_usd)),
                repr(float(rec.imbalance_cost_usd)),
                repr(float(rec.penalty_cost_usd)),
            ])
