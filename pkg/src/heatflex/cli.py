"""Command-line front end.

Subcommands: stock-summary, profiles, bid, season, cases. All outputs are
plain CSV written under --out-dir; everything is deterministic under
--seed. Exit codes: 0 success, 2 configuration error, 3 data error,
4 infeasibility-dominated season (more than half of the windows skipped).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

import numpy as np

from . import aggregation, cases as cases_mod, scenarios as scen_mod
from .bidding import (
    HorizonConfig,
    MarketPrices,
    RiskConfig,
    TesWindow,
    evaluate_profit,
    optimize_bids,
)
from .errors import ConfigError, DataFormatError, HeatflexError
from .season import (
    SeasonParams,
    build_season_data,
    run_season,
    write_season_hourly_csv,
    write_season_windows_csv,
)
from .stock import (
    DEFAULT_SETPOINTS,
    enumerate_cohorts,
    installed_capacity_mw,
    load_bundled_tables,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE_SEASON = 4

#: generator identity pinned for reproducibility across implementations
RNG_NAME = "philox4x64-10"


def parse_config_file(path) -> dict[str, str]:
    """Plain key = value lines; '#' starts a comment; keys are lowercase."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


_KNOWN_KEYS = {
    "alpha", "beta", "epsilons",
    "dt_hours", "contract_hours", "extension_hours", "lead_hours",
    "n_scenarios", "price_sigma", "bound_sigma_fraction",
    "imbalance_usd_mwh", "soe_penalty",
    "setpoints", "season_start", "season_hours", "engine", "rng",
    "temp_annual_amplitude_k", "temp_noise_std_k", "freq_std_hz",
    "rt_noise_sigma", "reference_lead_hours", "lead_improvement_per_hour",
}


def _get_float(cfg, key, default):
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"config key '{key}': not a number: {cfg[key]!r}") from None


def build_settings(cfg: dict[str, str]) -> dict:
    """Validate a raw config dict into typed settings."""
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if cfg.get("rng", RNG_NAME) != RNG_NAME:
        raise ConfigError(f"only rng = {RNG_NAME} is supported, got {cfg['rng']!r}")

    eps = (0.05,) * 6
    if "epsilons" in cfg:
        parts = [p for p in cfg["epsilons"].split(",") if p.strip()]
        if len(parts) != 6:
            raise ConfigError("epsilons must list six comma-separated values")
        eps = tuple(float(p) for p in parts)
    setpoints = DEFAULT_SETPOINTS
    if "setpoints" in cfg:
        setpoints = tuple(float(p) for p in cfg["setpoints"].split(",") if p.strip())
        if not setpoints:
            raise ConfigError("setpoints must list at least one value")
    soe_penalty = None
    if "soe_penalty" in cfg and cfg["soe_penalty"].lower() != "dynamic":
        soe_penalty = float(cfg["soe_penalty"])
    try:
        risk = RiskConfig(alpha=_get_float(cfg, "alpha", 0.90),
                          beta=_get_float(cfg, "beta", 0.5), epsilons=eps)
        horizon = HorizonConfig(
            dt_h=_get_float(cfg, "dt_hours", 1.0),
            contract_hours=_get_float(cfg, "contract_hours", 24.0),
            extension_hours=_get_float(cfg, "extension_hours", 12.0),
            lead_hours=_get_float(cfg, "lead_hours", 12.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    season_start = datetime(2019, 10, 1)
    if "season_start" in cfg:
        try:
            season_start = datetime.fromisoformat(cfg["season_start"])
        except ValueError:
            raise ConfigError(f"bad season_start {cfg['season_start']!r}") from None
    engine = cfg.get("engine", "auto")
    if engine not in ("auto", "simplex", "scipy"):
        raise ConfigError(f"engine must be auto, simplex, or scipy, got {engine!r}")

    params = SeasonParams(
        risk=risk,
        horizon=horizon,
        n_scenarios=int(_get_float(cfg, "n_scenarios", 25)),
        price_sigma=_get_float(cfg, "price_sigma", 0.15),
        imbalance_usd_mwh=_get_float(cfg, "imbalance_usd_mwh", 1.0),
        soe_penalty_usd_mwh=soe_penalty,
        bound_sigma_fraction=_get_float(cfg, "bound_sigma_fraction", 0.05),
        reference_lead_hours=_get_float(cfg, "reference_lead_hours", 12.0),
        lead_improvement_per_hour=_get_float(cfg, "lead_improvement_per_hour", 0.02),
        engine=engine,
    )
    return {
        "params": params,
        "setpoints": setpoints,
        "season_start": season_start,
        "season_hours": int(_get_float(cfg, "season_hours", 24 * 61)),
        "temp_kwargs": {
            k: _get_float(cfg, src, d) for k, src, d in [
                ("annual_amplitude_k", "temp_annual_amplitude_k", 10.0),
                ("noise_std_k", "temp_noise_std_k", 1.5),
            ]
        },
        "price_kwargs": {"rt_noise_sigma": _get_float(cfg, "rt_noise_sigma", 0.15)},
        "freq_std_hz": _get_float(cfg, "freq_std_hz", 0.02),
    }


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_stock_summary(args, settings) -> int:
    heating, buildings, counties, inventory = load_bundled_tables()
    cohorts = enumerate_cohorts(inventory, heating, buildings,
                                setpoints=settings["setpoints"])
    capacity = installed_capacity_mw(cohorts)
    out = _out_dir(args)
    path = out / "stock_summary.csv"
    with open(path, "w", newline="") as fh:
        import csv

        w = csv.writer(fh)
        w.writerow(["area", "dwellings", "installed_mw"])
        for area in sorted(capacity):
            w.writerow([area, inventory.dwellings_in_area(area), repr(capacity[area])])
        w.writerow(["total", inventory.total_dwellings(), repr(sum(capacity.values()))])
    print(f"dwellings with electric heating: {inventory.total_dwellings():,}")
    print(f"installed capacity: {sum(capacity.values()) / 1000.0:.2f} GW")
    print(f"wrote {path}")
    return EXIT_OK


def _season_data(args, settings):
    return build_season_data(
        start=settings["season_start"],
        season_hours=settings["season_hours"],
        seed=args.seed,
        margin_hours=int(settings["params"].horizon.extension_hours) + 24,
        setpoints=settings["setpoints"],
        temp_kwargs=settings["temp_kwargs"],
        price_kwargs=settings["price_kwargs"],
        freq_std_hz=settings["freq_std_hz"],
    )


def cmd_profiles(args, settings) -> int:
    data = _season_data(args, settings)
    out = _out_dir(args)
    path = out / "storage_profiles.csv"
    aggregation.export_profiles_csv(data.profile, path)
    summary = aggregation.capacity_summary(data.profile)
    for key, value in summary.items():
        print(f"{key}: {value:.2f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_bid(args, settings) -> int:
    data = _season_data(args, settings)
    params: SeasonParams = settings["params"]
    n_tot = params.horizon.n_total
    tes = TesWindow.from_profile(data.profile, 0, n_tot)
    prices = MarketPrices(
        reserve_usd_mw=data.reserve_price[:n_tot],
        day_ahead_usd_mwh=data.da_price[:, :n_tot],
        imbalance_usd_mwh=params.imbalance_usd_mwh,
        soe_penalty_usd_mwh=params.soe_penalty_usd_mwh,
    )
    scen = scen_mod.sample_scenarios(
        params.n_scenarios, prices.day_ahead_usd_mwh, data.freq_model,
        seed=args.seed, price_sigma=params.effective_price_sigma(), window=0,
    )
    sol = optimize_bids(tes, prices, scen, params.risk, params.horizon,
                        engine=params.engine, with_names=False)
    report = evaluate_profit(sol, prices, scen, params.risk)
    out = _out_dir(args)
    path = out / "bid_solution.csv"
    with open(path, "w", newline="") as fh:
        import csv

        w = csv.writer(fh)
        w.writerow(["area", "interval", "scenario", "e_da_mwh", "p_r_mw",
                    "p_rt_mw", "soe_mwh", "e_i_mwh"])
        for s in range(sol.n_scenarios):
            for ai, area in enumerate(sol.areas):
                for t in range(n_tot):
                    w.writerow([
                        area, t, s,
                        repr(float(sol.e_da_mwh[ai, t])),
                        repr(float(sol.p_r_mw[ai, t])),
                        repr(float(sol.p_rt_mw[s, ai, t])),
                        repr(float(sol.soe_mwh[s, ai, t])),
                        repr(float(sol.e_i_mwh[s, ai, t])),
                    ])
    print(f"objective: {sol.objective:.2f} $")
    print(f"expected profit: {report.expected_profit:.2f} $")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_season(args, settings) -> int:
    data = _season_data(args, settings)
    params: SeasonParams = settings["params"]
    case = cases_mod.CASES.get(args.case, cases_mod.CASES[2]) if args.case else None
    if case is not None:
        params = case.to_params(params)
    result = run_season(data, params, args.seed)
    out = _out_dir(args)
    write_season_hourly_csv(result, out / "season_hourly.csv")
    write_season_windows_csv(result, out / "season_windows.csv")
    print(f"windows: {result.n_windows}, skipped: {result.n_skipped}")
    print(f"expected cost per dwelling: {result.expected_cost_per_dwelling_usd():.2f} $")
    print(f"mean reserve per dwelling: {result.mean_reserve_kw_per_dwelling():.3f} kW/0.1Hz")
    print(f"wrote {out / 'season_hourly.csv'} and {out / 'season_windows.csv'}")
    if result.n_skipped * 2 > result.n_windows:
        print("more than half of the windows were infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE_SEASON
    return EXIT_OK


def cmd_cases(args, settings) -> int:
    data = _season_data(args, settings)
    params: SeasonParams = settings["params"]
    ids = args.cases or sorted(cases_mod.CASES)
    summaries = []
    dominated = False
    out = _out_dir(args)
    for cid in ids:
        if cid not in cases_mod.CASES:
            raise ConfigError(f"unknown case id {cid}; valid: 1..9")
        case = cases_mod.CASES[cid]
        result, summary = cases_mod.run_case(case, data, args.seed, base_params=params)
        summaries.append(summary)
        write_season_windows_csv(result, out / f"case{cid}_windows.csv")
        if result.n_skipped * 2 > result.n_windows:
            dominated = True
        print(f"case {cid}: cost/SFD {summary.expected_cost_per_sfd_usd:.2f} $, "
              f"reserve/SFD {summary.mean_reserve_kw_per_sfd:.3f} kW")
    if len(summaries) >= 2:
        rows = cases_mod.compare_cases(summaries)
        cases_mod.write_comparison_csv(rows, out / "case_comparison.csv")
        cases_mod.write_chart_data_csv(rows, out / "case_chart_data.csv")
        print(f"wrote {out / 'case_comparison.csv'}")
    return EXIT_INFEASIBLE_SEASON if dominated else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatflex",
        description="Dwelling-stock flexibility quantification and bidding toolkit",
    )
    parser.add_argument("--config", help="plain key = value configuration file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="out")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("stock-summary", help="inventory counts and installed capacity")
    sub.add_parser("profiles", help="aggregate storage curves over a synthetic season")
    sub.add_parser("bid", help="solve a single bidding window")
    p_season = sub.add_parser("season", help="rolling-horizon season simulation")
    p_season.add_argument("--case", type=int, default=None, help="sensitivity case id 1..9")
    p_cases = sub.add_parser("cases", help="run the sensitivity-case matrix")
    p_cases.add_argument("--cases", type=int, nargs="*", default=None,
                         help="case ids to run (default: all nine)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = parse_config_file(args.config) if args.config else {}
        settings = build_settings(cfg)
        handler = {
            "stock-summary": cmd_stock_summary,
            "profiles": cmd_profiles,
            "bid": cmd_bid,
            "season": cmd_season,
            "cases": cmd_cases,
        }[args.command]
        return handler(args, settings)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HeatflexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
