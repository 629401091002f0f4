"""Bidding program: hand-analyzed instances, risk properties, oracles."""

import numpy as np
import pytest

from heatflex.bidding import (
    HorizonConfig,
    MarketPrices,
    RiskConfig,
    build_lp,
    evaluate_profit,
    extract_solution,
    optimize_bids,
    reserve_headroom_violation,
)
from heatflex.errors import BoundCrossingError
from heatflex.lp import solve, solve_scipy, solve_simplex
from heatflex.rng import derive_rng
from heatflex.scenarios import tightened_bound

from oracles import grid_oracle_single_scenario, make_scenarios, make_tes, random_bid_instance

TWO_INTERVALS = HorizonConfig(dt_h=1.0, contract_hours=2.0, extension_hours=0.0)


def deterministic_instance(lam_da=30.0, lam_i=1.0, lam_r=0.0, baseline=2.0):
    tes = make_tes(n_t=2, baseline=baseline)
    prices = MarketPrices(
        reserve_usd_mw=np.full(2, lam_r),
        day_ahead_usd_mwh=np.full((1, 2), lam_da),
        imbalance_usd_mwh=lam_i,
    )
    scen = make_scenarios(np.full((1, 1, 2), lam_da))
    return tes, prices, scen


def test_no_arbitrage_hand_instance():
    # flat prices, no reserve value, positive imbalance charge: buy real-time
    # needs day-ahead exactly and never deviate; any reserve commitment is
    # worthless (the level itself is degenerate at zero reserve price, so the
    # value is asserted by re-solving with reserve disabled)
    tes, prices, scen = deterministic_instance()
    sol = optimize_bids(tes, prices, scen, RiskConfig(beta=0.5), TWO_INTERVALS,
                        engine="simplex", bound_sigma_fraction=0.0)
    assert np.allclose(sol.e_i_mwh, 0.0, atol=1e-8)
    assert np.allclose(sol.e_da_mwh, sol.e_rt_mwh[0], atol=1e-8)
    expected_profit = -2.0 * 30.0 * 2.0  # baseline energy at the flat price
    assert sol.objective == pytest.approx(expected_profit, rel=1e-9)
    no_reserve = optimize_bids(tes, prices, scen, RiskConfig(beta=0.5), TWO_INTERVALS,
                               engine="simplex", bound_sigma_fraction=0.0,
                               allow_reserve=False)
    assert np.all(no_reserve.p_r_mw == 0.0)
    assert no_reserve.objective == pytest.approx(sol.objective, rel=1e-9)


def test_null_objective_feasible_point():
    tes = make_tes(n_t=2)
    prices = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.zeros((1, 2)),
        imbalance_usd_mwh=0.0,
        soe_penalty_usd_mwh=0.0,
    )
    scen = make_scenarios(np.zeros((1, 1, 2)))
    sol = optimize_bids(tes, prices, scen, RiskConfig(), TWO_INTERVALS,
                        engine="simplex", bound_sigma_fraction=0.0)
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    # feasibility invariants hold at whatever point came back
    assert np.all(sol.e_i_mwh >= np.abs(sol.e_rt_mwh - sol.e_da_mwh[None]) - 1e-7)
    assert np.all(sol.p_rt_mw >= -1e-9) and np.all(sol.p_rt_mw <= 8.0 + 1e-9)
    assert np.all(sol.deviation_mwh >= -1e-12)


def test_soc_telescoping_identity():
    tes, prices, scen0 = deterministic_instance()
    scen = make_scenarios(np.full((1, 1, 2), 30.0),
                          freq=np.array([[50.03, 49.97]]))
    sol = optimize_bids(tes, prices, scen, RiskConfig(), TWO_INTERVALS,
                        engine="simplex")
    flows = sol.e_r_mwh + (sol.p_rt_mw - tes.baseline_mw[None]) * tes.dt_h
    recon = tes.initial_soe_mwh[None, :, None] + np.cumsum(flows, axis=2)
    assert np.allclose(recon, sol.soe_mwh, atol=1e-8)


def test_grid_oracle_bounds_lp_optimum():
    rng = derive_rng(5150)
    tes = make_tes(n_t=2, baseline=[[2.0, 3.0]], energy_max=60.0)
    prices = MarketPrices(
        reserve_usd_mw=np.array([3.0, 2.0]),
        day_ahead_usd_mwh=np.array([[28.0, 34.0]]),
        imbalance_usd_mwh=1.0,
        soe_penalty_usd_mwh=20.0,
    )
    scen = make_scenarios(np.array([[[31.0, 30.0]]]), freq=np.array([[50.01, 49.99]]))
    risk = RiskConfig(beta=0.3)
    lp, meta = build_lp(tes, prices, scen, risk, TWO_INTERVALS)
    res = solve_simplex(lp)
    oracle = grid_oracle_single_scenario(
        tes, prices, scen,
        eps_bounds={"p_max": meta.p_max_eps, "p_min": meta.p_min_eps,
                    "s_max": meta.s_max_eps, "s_min": meta.s_min_eps,
                    "g_cap": meta.terminal_cap, "g_floor": meta.terminal_floor},
    )
    assert oracle.n_feasible > 100
    gap = res.objective + meta.objective_offset - oracle.best_profit
    assert gap >= -1e-7
    assert gap <= oracle.gap_bound


def test_cross_solver_on_random_bid_instances():
    rng = derive_rng(99, 7)
    for k in range(20):
        tes, prices, scen, risk, horizon = random_bid_instance(rng)
        lp, meta = build_lp(tes, prices, scen, risk, horizon)
        ref = solve_simplex(lp)
        ext = solve_scipy(lp)
        scale = 1.0 + abs(ext.objective)
        assert abs(ref.objective - ext.objective) <= 1e-5 * scale, f"instance {k}"


def test_beta_zero_objective_is_expected_profit():
    rng = derive_rng(1234)
    tes, prices, scen, _, horizon = random_bid_instance(rng, max_s=3)
    risk = RiskConfig(beta=0.0)
    sol = optimize_bids(tes, prices, scen, risk, horizon, engine="simplex")
    report = evaluate_profit(sol, prices, scen, risk)
    assert sol.objective == pytest.approx(report.expected_profit, rel=1e-8)


def test_single_scenario_cvar_equals_profit():
    tes, prices, scen = deterministic_instance(lam_r=2.0)
    for alpha in (0.5, 0.9, 0.99):
        risk = RiskConfig(alpha=alpha, beta=0.7)
        sol = optimize_bids(tes, prices, scen, risk, TWO_INTERVALS, engine="simplex")
        report = evaluate_profit(sol, prices, scen, risk)
        assert report.cvar[0] == pytest.approx(float(report.profit[0, 0]), abs=1e-7)
        assert sol.cvar[0] == pytest.approx(float(report.profit[0, 0]), abs=1e-6)


def test_cvar_never_exceeds_mean():
    rng = derive_rng(777)
    for _ in range(5):
        tes, prices, scen, risk, horizon = random_bid_instance(rng, max_s=3)
        sol = optimize_bids(tes, prices, scen, risk, horizon, engine="simplex")
        report = evaluate_profit(sol, prices, scen, risk)
        mean_by_area = (sol.probabilities[:, None] * report.profit).sum(axis=0)
        assert np.all(report.cvar <= mean_by_area + 1e-6)


def test_epsilon_half_equals_mean_bound_lp():
    rng = derive_rng(31)
    tes, prices, scen, _, horizon = random_bid_instance(rng)
    risk_mid = RiskConfig(beta=0.4, epsilons=(0.5,) * 6)
    lp_chance, _ = build_lp(tes, prices, scen, risk_mid, horizon,
                            bound_sigma_fraction=0.05)
    lp_mean, _ = build_lp(tes, prices, scen, risk_mid, horizon,
                          bound_sigma_fraction=0.0)
    a = solve(lp_chance, engine="simplex")
    b = solve(lp_mean, engine="simplex")
    assert a.objective == pytest.approx(b.objective, rel=1e-9)


def test_objective_monotone_in_epsilon():
    tes = make_tes(n_t=2, baseline=2.0, energy_max=8.0)
    prices = MarketPrices(
        reserve_usd_mw=np.array([4.0, 4.0]),
        day_ahead_usd_mwh=np.full((1, 2), 30.0),
        imbalance_usd_mwh=1.0,
    )
    scen = make_scenarios(np.full((1, 1, 2), 30.0))
    prev = None
    for eps in (0.4, 0.2, 0.1, 0.05, 0.02):
        risk = RiskConfig(epsilons=(eps,) * 6)
        sol = optimize_bids(tes, prices, scen, risk, TWO_INTERVALS, engine="simplex")
        if prev is not None:
            assert sol.objective <= prev + 1e-9
        prev = sol.objective


def test_objective_monotone_in_reserve_price():
    tes, prices, scen = deterministic_instance()
    prev = None
    for lam_r in (0.0, 1.0, 3.0, 8.0):
        p = MarketPrices(
            reserve_usd_mw=np.full(2, lam_r),
            day_ahead_usd_mwh=prices.day_ahead_usd_mwh,
            imbalance_usd_mwh=prices.imbalance_usd_mwh,
        )
        sol = optimize_bids(tes, p, scen, RiskConfig(), TWO_INTERVALS, engine="simplex")
        if prev is not None:
            assert sol.objective >= prev - 1e-9
        prev = sol.objective


def test_positive_homogeneity_in_prices():
    rng = derive_rng(404)
    tes, prices, scen, risk, horizon = random_bid_instance(rng, max_s=2)
    sol1 = optimize_bids(tes, prices, scen, risk, horizon, engine="simplex")
    k = 3.7
    scaled = MarketPrices(
        reserve_usd_mw=prices.reserve_usd_mw * k,
        day_ahead_usd_mwh=prices.day_ahead_usd_mwh * k,
        imbalance_usd_mwh=prices.imbalance_usd_mwh * k,
        soe_penalty_usd_mwh=prices.soe_penalty_usd_mwh * k,
    )
    scen_scaled = make_scenarios(scen.rt_price * k, freq=scen.frequency,
                                 probs=scen.probabilities)
    sol2 = optimize_bids(tes, scaled, scen_scaled, risk, horizon, engine="simplex")
    assert sol2.objective == pytest.approx(k * sol1.objective, rel=1e-8)
    assert np.allclose(sol2.e_da_mwh, sol1.e_da_mwh, atol=1e-7)
    assert np.allclose(sol2.p_r_mw, sol1.p_r_mw, atol=1e-7)


def test_beta_sweep_frontier():
    # two-point price spread so risk actually bites
    tes = make_tes(n_t=2, baseline=2.0)
    prices = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.full((1, 2), 30.0),
        imbalance_usd_mwh=0.5,
    )
    rt = np.stack([np.full((1, 2), 12.0), np.full((1, 2), 55.0)])
    scen = make_scenarios(rt)
    expected_prev, cvar_prev = None, None
    for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
        risk = RiskConfig(alpha=0.6, beta=beta)
        sol = optimize_bids(tes, prices, scen, risk, TWO_INTERVALS, engine="simplex")
        report = evaluate_profit(sol, prices, scen, risk)
        cvar_total = float(report.cvar.sum())
        if expected_prev is not None:
            assert report.expected_profit <= expected_prev + 1e-7
            assert cvar_total >= cvar_prev - 1e-7
        expected_prev, cvar_prev = report.expected_profit, cvar_total


def test_zero_mean_activation_dominates():
    tes = make_tes(n_t=2, baseline=2.0, energy_max=6.0)
    prices = MarketPrices(
        reserve_usd_mw=np.array([5.0, 5.0]),
        day_ahead_usd_mwh=np.full((1, 2), 30.0),
        imbalance_usd_mwh=1.0,
    )
    freq = np.array([[50.05, 50.04], [49.95, 49.92], [50.0, 50.06]])
    scen = make_scenarios(np.full((3, 1, 2), 30.0), freq=freq)
    risk = RiskConfig(beta=0.5)
    coupled = optimize_bids(tes, prices, scen, risk, TWO_INTERVALS, engine="simplex")
    guaranteed = optimize_bids(tes, prices, scen, risk, TWO_INTERVALS,
                               engine="simplex", zero_mean_activation=True)
    assert guaranteed.objective >= coupled.objective - 1e-9
    assert np.all(guaranteed.e_r_mwh == 0.0)


def test_reserve_headroom_invariants():
    rng = derive_rng(606)
    for _ in range(5):
        tes, prices, scen, risk, horizon = random_bid_instance(rng)
        lp, meta = build_lp(tes, prices, scen, risk, horizon)
        sol = extract_solution(solve(lp, engine="simplex"), meta)
        assert reserve_headroom_violation(sol, meta) <= 1e-6
        half_cap = 0.5 * (meta.p_max_eps - meta.p_min_eps)
        assert np.all(sol.p_r_mw <= half_cap + 1e-6)


def test_bound_crossing_detected():
    tes = make_tes(n_t=2, baseline=2.0, energy_max=5.0)
    prices = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.full((1, 2), 30.0),
    )
    scen = make_scenarios(np.full((1, 1, 2), 30.0))
    with pytest.raises(BoundCrossingError) as err:
        build_lp(tes, prices, scen, RiskConfig(epsilons=(0.001,) * 6),
                 TWO_INTERVALS, bound_sigma_fraction=0.9)
    assert "SE3" in str(err.value)


def test_reserve_disabled_forces_zero():
    tes = make_tes(n_t=2)
    prices = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.full((1, 2), 30.0),
    )
    scen = make_scenarios(np.full((1, 1, 2), 30.0))
    sol = optimize_bids(tes, prices, scen, RiskConfig(), TWO_INTERVALS,
                        engine="simplex", allow_reserve=False)
    assert np.all(sol.p_r_mw == 0.0)


def test_dynamic_soe_penalty_resolution():
    prices = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.array([[30.0, 40.0], [20.0, 30.0]]),
    )
    assert prices.resolved_soe_penalty() == pytest.approx(35.0)
    fixed = MarketPrices(
        reserve_usd_mw=np.zeros(2),
        day_ahead_usd_mwh=np.array([[30.0, 40.0]]),
        soe_penalty_usd_mwh=1.0,
    )
    assert fixed.resolved_soe_penalty() == 1.0
