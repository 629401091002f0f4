"""Two-stage risk-averse energy and reserve bidding for one market window.

First-stage decisions (day-ahead energy purchases and symmetric reserve
capacity) are shared across scenarios; recourse decisions (real-time
consumption, imbalance, state-of-energy path, terminal deviation) are per
scenario. The objective blends expected profit with per-area CVaR. The
uncertain storage bounds enter as chance constraints, replaced here by
their Gaussian quantile tightenings, which keeps the problem a linear
program.

Sign conventions: profit = reserve revenue - day-ahead cost - (real-time
cost + imbalance cost + terminal-deviation penalty). Reserve revenue has
no dt factor: capacity prices are $ per MW per 0.1 Hz and hourly products
are traded, so revenue is price times committed MW. Reserve activation
energy in a scenario is capacity times (frequency deviation / 0.1 Hz)
times dt; worst-case half-interval activation reserves +/- dt/2 * capacity
of energy headroom around the state of energy.

The terminal-deviation penalty is charged once per scenario system-wide;
each area's profit carries its own deviation share so the sum over areas
books the penalty exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregation import StorageProfile
from .errors import BoundCrossingError
from .lp import LinearProgram, LpResult, TripletRows, solve
from .scenarios import (
    DEFAULT_BOUND_SIGMA_FRACTION,
    ScenarioSet,
    tightened_bound,
)

#: default imbalance charge [$ / MWh]
DEFAULT_IMBALANCE_USD_MWH = 1.0


@dataclass
class MarketPrices:
    """Window price data. soe_penalty None means dynamic: the mean day-ahead
    price over areas in the final horizon interval."""

    reserve_usd_mw: np.ndarray      # (T,) $ per MW per 0.1 Hz
    day_ahead_usd_mwh: np.ndarray   # (A, T)
    imbalance_usd_mwh: float = DEFAULT_IMBALANCE_USD_MWH
    soe_penalty_usd_mwh: float | None = None

    def __post_init__(self):
        self.reserve_usd_mw = np.asarray(self.reserve_usd_mw, dtype=float)
        self.day_ahead_usd_mwh = np.asarray(self.day_ahead_usd_mwh, dtype=float)
        if self.imbalance_usd_mwh < 0:
            raise ValueError("imbalance charge must be >= 0")
        if self.soe_penalty_usd_mwh is not None and self.soe_penalty_usd_mwh < 0:
            raise ValueError("terminal deviation penalty must be >= 0")

    def resolved_soe_penalty(self) -> float:
        if self.soe_penalty_usd_mwh is not None:
            return float(self.soe_penalty_usd_mwh)
        return float(self.day_ahead_usd_mwh[:, -1].mean())


@dataclass(frozen=True)
class RiskConfig:
    alpha: float = 0.90
    beta: float = 0.5
    epsilons: tuple[float, ...] = (0.05,) * 6

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if len(self.epsilons) != 6 or any(not 0.0 < e < 1.0 for e in self.epsilons):
            raise ValueError("six epsilons in (0, 1) required")


@dataclass(frozen=True)
class HorizonConfig:
    dt_h: float = 1.0
    contract_hours: float = 24.0
    extension_hours: float = 12.0
    lead_hours: float = 12.0

    def __post_init__(self):
        if self.dt_h <= 0:
            raise ValueError("dt must be > 0")
        if self.contract_hours < self.dt_h:
            raise ValueError("contract period must cover at least one interval")
        if self.extension_hours < 0 or self.lead_hours < 0:
            raise ValueError("extension and lead time must be >= 0")

    @property
    def n_contract(self) -> int:
        return int(round(self.contract_hours / self.dt_h))

    @property
    def n_total(self) -> int:
        return self.n_contract + int(round(self.extension_hours / self.dt_h))


@dataclass
class TesWindow:
    """Storage parameters over one optimization window."""

    areas: list[str]
    dt_h: float
    baseline_mw: np.ndarray      # (A, T)
    power_max_mw: np.ndarray
    power_min_mw: np.ndarray
    energy_max_mwh: np.ndarray
    energy_min_mwh: np.ndarray
    midpoint_mwh: np.ndarray
    installed_mw: np.ndarray     # (A,)
    initial_soe_mwh: np.ndarray  # (A,) state at the interval before the window

    @classmethod
    def from_profile(cls, profile: StorageProfile, i0: int, i1: int,
                     initial_soe_mwh: np.ndarray | None = None) -> "TesWindow":
        mid = profile.midpoint_mwh
        if initial_soe_mwh is None:
            initial_soe_mwh = mid[:, max(i0 - 1, 0)].copy()
        return cls(
            areas=list(profile.areas),
            dt_h=profile.dt_h,
            baseline_mw=profile.baseline_mw[:, i0:i1].copy(),
            power_max_mw=profile.power_max_mw[:, i0:i1].copy(),
            power_min_mw=profile.power_min_mw[:, i0:i1].copy(),
            energy_max_mwh=profile.energy_max_mwh[:, i0:i1].copy(),
            energy_min_mwh=profile.energy_min_mwh[:, i0:i1].copy(),
            midpoint_mwh=mid[:, i0:i1].copy(),
            installed_mw=profile.installed_mw.copy(),
            initial_soe_mwh=np.asarray(initial_soe_mwh, dtype=float).copy(),
        )

    @property
    def n_intervals(self) -> int:
        return self.baseline_mw.shape[1]

    @property
    def n_areas(self) -> int:
        return self.baseline_mw.shape[0]


@dataclass
class BidMeta:
    """Index bookkeeping and tightened data for one built program."""

    areas: list[str]
    dt_h: float
    n_contract: int
    n_total: int
    n_scenarios: int
    probabilities: np.ndarray
    activation: np.ndarray        # (S, T) energy per MW of reserve
    p_max_eps: np.ndarray         # (A, T)
    p_min_eps: np.ndarray
    s_max_eps: np.ndarray
    s_min_eps: np.ndarray
    terminal_cap: np.ndarray      # (A,)
    terminal_floor: np.ndarray    # (A,)
    soe_penalty: float
    alpha: float
    offsets: dict[str, int]
    n_vars: int
    baseline_mw: np.ndarray       # (A, T) needed to reconstruct consumption
    initial_soe_mwh: np.ndarray   # (A,)
    objective_offset: float = 0.0
    elastic_penalty: float | None = None
    rt_price: np.ndarray | None = None  # (S, A, T)


@dataclass
class BidSolution:
    """Decisions and derived quantities of one solved window."""

    areas: list[str]
    dt_h: float
    n_contract: int
    e_da_mwh: np.ndarray         # (A, T)
    p_r_mw: np.ndarray           # (A, T)
    p_rt_mw: np.ndarray          # (S, A, T)
    e_rt_mwh: np.ndarray         # (S, A, T)
    e_r_mwh: np.ndarray          # (S, A, T) activation energy
    e_i_mwh: np.ndarray          # (S, A, T)
    soe_mwh: np.ndarray          # (S, A, T)
    deviation_mwh: np.ndarray    # (S, A)
    var_level: np.ndarray        # (A,) auxiliary risk level
    cvar: np.ndarray             # (A,)
    objective: float
    probabilities: np.ndarray
    elastic_violation_mwh: float = 0.0

    @property
    def n_scenarios(self) -> int:
        return self.p_rt_mw.shape[0]


@dataclass
class ProfitReport:
    reserve_revenue: np.ndarray   # (A,)
    da_cost: np.ndarray           # (A,)
    rt_cost: np.ndarray           # (S, A)
    imbalance_cost: np.ndarray    # (S, A)
    penalty_cost: np.ndarray      # (S,) system-wide
    penalty_share: np.ndarray     # (S, A)
    profit: np.ndarray            # (S, A)
    expected_profit: float
    cvar: np.ndarray              # (A,)
    objective: float


def _phi(scenarios: ScenarioSet, dt_h: float, zero_mean: bool) -> np.ndarray:
    """Activation energy per committed MW of reserve, per scenario/interval."""
    if zero_mean:
        return np.zeros((scenarios.n_scenarios, scenarios.n_intervals))
    return scenarios.activation_fraction() * dt_h


def build_lp(
    tes: TesWindow,
    prices: MarketPrices,
    scenarios: ScenarioSet,
    risk: RiskConfig = RiskConfig(),
    horizon: HorizonConfig = HorizonConfig(),
    zero_mean_activation: bool = False,
    bound_sigma_fraction: float = DEFAULT_BOUND_SIGMA_FRACTION,
    allow_reserve: bool = True,
    elastic_penalty: float | None = None,
    with_names: bool | None = None,
) -> tuple[LinearProgram, BidMeta]:
    """Assemble the deterministic-equivalent linear program for one window.

    elastic_penalty, when set, adds per-interval slack on the energy-band
    constraints at that $/MWh cost; used by settlement when frozen bids
    meet an out-of-sample path no exact recourse can absorb.
    """
    n_a, n_t = tes.n_areas, tes.n_intervals
    n_s = scenarios.n_scenarios
    n_c = min(horizon.n_contract, n_t)
    dt = tes.dt_h
    if scenarios.n_intervals != n_t:
        raise ValueError("scenario horizon does not cover the storage window")
    if prices.day_ahead_usd_mwh.shape != (n_a, n_t) or len(prices.reserve_usd_mw) != n_t:
        raise ValueError("price arrays do not match the window shape")

    eps = risk.epsilons
    frac = bound_sigma_fraction
    p_max_eps = tightened_bound(tes.power_max_mw, frac, eps[0], "upper")
    p_min_eps = tightened_bound(tes.power_min_mw, frac, eps[1], "lower")
    s_max_eps = tightened_bound(tes.energy_max_mwh, frac, eps[2], "upper")
    s_min_eps = tightened_bound(tes.energy_min_mwh, frac, eps[3], "lower")
    terminal_cap = tightened_bound(tes.midpoint_mwh[:, -1], frac, eps[4], "upper")
    terminal_floor = tightened_bound(tes.midpoint_mwh[:, -1], frac, eps[5], "lower")

    crossing = s_max_eps < s_min_eps - 1e-9
    if np.any(crossing):
        ai, ti = np.argwhere(crossing)[0]
        raise BoundCrossingError(
            f"tightened energy bounds cross in area {tes.areas[ai]}, interval {ti}: "
            f"upper {s_max_eps[ai, ti]:.4f} < lower {s_min_eps[ai, ti]:.4f} MWh"
        )
    crossing = p_max_eps < p_min_eps - 1e-9
    if np.any(crossing):
        ai, ti = np.argwhere(crossing)[0]
        raise BoundCrossingError(
            f"tightened power bounds cross in area {tes.areas[ai]}, interval {ti}: "
            f"upper {p_max_eps[ai, ti]:.4f} < lower {p_min_eps[ai, ti]:.4f} MW"
        )

    phi = _phi(scenarios, dt, zero_mean_activation)
    pi = scenarios.probabilities
    rt = scenarios.rt_price
    lam_da = prices.day_ahead_usd_mwh
    lam_r = prices.reserve_usd_mw
    lam_i = prices.imbalance_usd_mwh
    lam_p = prices.resolved_soe_penalty()
    beta, alpha = risk.beta, risk.alpha

    # Consumption is substituted out: the state-of-energy recursion
    #   soc[t] = soc[t-1] + phi[t]*p_r + (p_rt - baseline)*dt
    # determines p_rt uniquely from the soc path, so
    #   p_rt = (soc[t] - soc[t-1])/dt - (phi[t]/dt)*p_r + K[t],
    #   K[t] = baseline[t] - (init/dt if t == 0 else 0).
    # Every row and objective term mentioning consumption is rewritten in
    # soc differences; constants move to the right-hand side and into an
    # objective offset restored on extraction. This removes all equality
    # rows and a third of the variables without changing the optimum.
    k_const = tes.baseline_mw.copy()
    k_const[:, 0] -= tes.initial_soe_mwh / dt

    blocks = [
        ("e_da", n_a * n_t),
        ("p_r", n_a * n_t),
        ("soc", n_s * n_a * n_t),
        ("e_i", n_s * n_a * n_t),
        ("dev", n_s * n_a),
        ("v", n_s * n_a),
        ("y", n_a),
    ]
    if elastic_penalty is not None:
        blocks += [("slack_hi", n_s * n_a * n_t), ("slack_lo", n_s * n_a * n_t)]
    offsets = {}
    pos = 0
    for name, size in blocks:
        offsets[name] = pos
        pos += size
    n_vars = pos

    # flattened index grids over the full horizon
    S_g, A_g, T_g = np.meshgrid(np.arange(n_s), np.arange(n_a), np.arange(n_t), indexing="ij")
    s_f, a_f, t_f = S_g.ravel(), A_g.ravel(), T_g.ravel()

    def flat_soc(s, a, t):
        return offsets["soc"] + (s * n_a + a) * n_t + t

    def flat_at(name, a, t):
        return offsets[name] + a * n_t + t

    soc_now_full = flat_soc(s_f, a_f, t_f)
    soc_prev_full = flat_soc(s_f, a_f, t_f - 1)
    has_prev_full = t_f > 0
    e_i_idx = offsets["e_i"] + (s_f * n_a + a_f) * n_t + t_f

    # Objective (maximize); constants collect in `offset`. Billing runs over
    # the whole horizon, contract plus prediction extension: the extension
    # exists to price end-of-contract states, and leaving it cost-free lets
    # the plan drain the store inside billed hours and "recharge" in
    # fictional free ones. Settlement books the contract slice only, which
    # tiles the season exactly.
    obj = np.zeros(n_vars)
    w1 = 1.0 - beta
    mean_rt = np.einsum("s,sat->at", pi, rt)
    obj[offsets["e_da"]: offsets["e_da"] + n_a * n_t] = (w1 * (mean_rt - lam_da)).ravel()
    # reserve value plus the expected activation-energy price credit
    obj_pr = w1 * lam_r[None, :] * np.ones((n_a, 1)) \
        + w1 * np.einsum("s,st,sat->at", pi, phi, rt)
    obj[offsets["p_r"]: offsets["p_r"] + n_a * n_t] = obj_pr.ravel()
    # the -(1-beta)*pi*rt*dt*p_rt term in soc differences
    obj_soc = -w1 * pi[:, None, None] * rt.copy()
    obj_soc[:, :, :-1] += w1 * pi[:, None, None] * rt[:, :, 1:]
    obj[offsets["soc"]: offsets["soc"] + n_s * n_a * n_t] = obj_soc.ravel()
    offset = float(-w1 * np.einsum("s,sat,at->", pi, rt, dt * k_const))
    obj[offsets["e_i"]: offsets["e_i"] + n_s * n_a * n_t] = \
        np.repeat(-w1 * pi * lam_i, n_a * n_t)
    obj[offsets["dev"]: offsets["dev"] + n_s * n_a] = np.repeat(-w1 * pi * lam_p, n_a)
    obj[offsets["v"]: offsets["v"] + n_s * n_a] = np.repeat(-beta * pi / (1.0 - alpha), n_a)
    obj[offsets["y"]: offsets["y"] + n_a] = beta
    if elastic_penalty is not None:
        obj[offsets["slack_hi"]:] = -float(elastic_penalty)

    # boxes
    lower = np.zeros(n_vars)
    upper = np.empty(n_vars)
    inst = tes.installed_mw
    upper[offsets["e_da"]: offsets["e_da"] + n_a * n_t] = np.repeat(inst * dt, n_t)
    pr_cap = inst if allow_reserve else np.zeros(n_a)
    upper[offsets["p_r"]: offsets["p_r"] + n_a * n_t] = np.repeat(pr_cap, n_t)
    soc_cap = np.maximum(s_max_eps.max(axis=1), 0.0) + 1.0
    if elastic_penalty is None:
        upper[soc_now_full] = soc_cap[a_f]
    else:
        big_soc = float(soc_cap.max() + np.abs(tes.initial_soe_mwh).max()
                        + inst.max() * dt * n_t + 1.0)
        lower[soc_now_full] = -big_soc
        upper[soc_now_full] = big_soc
    upper[e_i_idx] = 2.0 * inst[a_f] * dt
    dev_cap = float(soc_cap.max() + np.abs(terminal_floor).max() + 1.0)
    upper[offsets["dev"]: offsets["dev"] + n_s * n_a] = dev_cap

    # per-area profit magnitude bound, used to box the risk variables
    profit_bound = (
        np.abs(lam_r).sum() * inst
        + np.abs(lam_da).sum(axis=1) * inst * dt
        + np.abs(rt).max(axis=0).sum(axis=1) * 2.0 * inst * dt
        + lam_i * 2.0 * inst * dt * n_t
        + lam_p * dev_cap
        + 1.0
    )
    upper[offsets["v"]: offsets["v"] + n_s * n_a] = np.tile(2.0 * profit_bound, n_s)
    lower[offsets["y"]: offsets["y"] + n_a] = -profit_bound
    upper[offsets["y"]: offsets["y"] + n_a] = profit_bound
    if elastic_penalty is not None:
        upper[offsets["slack_hi"]:] = big_soc

    # ------------------------------------------------------------------
    # inequality assembly in triplets (no equality rows remain)
    ub_rows, ub_cols, ub_vals, ub_rhs = [], [], [], []

    def add_rows(rows_list, cols_list, vals_list, rhs):
        base = sum(len(r) for r in ub_rhs)
        ub_rows.append(np.concatenate(rows_list) + base)
        ub_cols.append(np.concatenate(cols_list))
        ub_vals.append(np.concatenate(vals_list))
        ub_rhs.append(rhs)

    n_sat = n_s * n_a * n_t
    rows_sat = np.arange(n_sat)
    phi_f = phi[s_f, t_f]

    def consumption_soc_terms(sign):
        """Triplet parts of sign * p_rt expressed in soc differences."""
        rows = [rows_sat, rows_sat[has_prev_full]]
        cols = [soc_now_full, soc_prev_full[has_prev_full]]
        vals = [np.full(n_sat, sign / dt), np.full(int(has_prev_full.sum()), -sign / dt)]
        return rows, cols, vals

    # power cap: p_rt + p_r <= p_max_eps
    rows, cols, vals = consumption_soc_terms(+1.0)
    rows.append(rows_sat)
    cols.append(flat_at("p_r", a_f, t_f))
    vals.append(1.0 - phi_f / dt)
    add_rows(rows, cols, vals, p_max_eps[a_f, t_f] - k_const[a_f, t_f])

    # power floor: -p_rt + p_r <= -p_min_eps
    rows, cols, vals = consumption_soc_terms(-1.0)
    rows.append(rows_sat)
    cols.append(flat_at("p_r", a_f, t_f))
    vals.append(1.0 + phi_f / dt)
    add_rows(rows, cols, vals, -p_min_eps[a_f, t_f] + k_const[a_f, t_f])

    # installed-capacity box on consumption, only where the tightened cap
    # exceeds it (wide-epsilon configurations)
    loose = (p_max_eps > inst[:, None] + 1e-12)[a_f, t_f]
    if np.any(loose):
        idx = np.flatnonzero(loose)
        sub_prev = idx[has_prev_full[idx]]
        remap = {g: i for i, g in enumerate(idx)}
        add_rows(
            [np.arange(len(idx)), np.array([remap[g] for g in sub_prev], dtype=int),
             np.arange(len(idx))],
            [soc_now_full[idx], soc_prev_full[sub_prev], flat_at("p_r", a_f, t_f)[idx]],
            [np.full(len(idx), 1.0 / dt), np.full(len(sub_prev), -1.0 / dt),
             -phi_f[idx] / dt],
            inst[a_f[idx]] - k_const[a_f[idx], t_f[idx]],
        )
    loose = (p_min_eps < -1e-12)[a_f, t_f]
    if np.any(loose):
        idx = np.flatnonzero(loose)
        sub_prev = idx[has_prev_full[idx]]
        remap = {g: i for i, g in enumerate(idx)}
        add_rows(
            [np.arange(len(idx)), np.array([remap[g] for g in sub_prev], dtype=int),
             np.arange(len(idx))],
            [soc_now_full[idx], soc_prev_full[sub_prev], flat_at("p_r", a_f, t_f)[idx]],
            [np.full(len(idx), -1.0 / dt), np.full(len(sub_prev), 1.0 / dt),
             phi_f[idx] / dt],
            k_const[a_f[idx], t_f[idx]],
        )

    # energy band with worst-case half-interval activation
    ones_sat = np.ones(n_sat)
    if elastic_penalty is None:
        add_rows([rows_sat, rows_sat],
                 [soc_now_full, flat_at("p_r", a_f, t_f)],
                 [ones_sat, 0.5 * dt * ones_sat],
                 s_max_eps[a_f, t_f])
        add_rows([rows_sat, rows_sat],
                 [soc_now_full, flat_at("p_r", a_f, t_f)],
                 [-ones_sat, 0.5 * dt * ones_sat],
                 -s_min_eps[a_f, t_f])
    else:
        slack_hi = offsets["slack_hi"] + np.arange(n_sat)
        slack_lo = offsets["slack_lo"] + np.arange(n_sat)
        add_rows([rows_sat, rows_sat, rows_sat],
                 [soc_now_full, flat_at("p_r", a_f, t_f), slack_hi],
                 [ones_sat, 0.5 * dt * ones_sat, -ones_sat],
                 s_max_eps[a_f, t_f])
        add_rows([rows_sat, rows_sat, rows_sat],
                 [soc_now_full, flat_at("p_r", a_f, t_f), slack_lo],
                 [-ones_sat, 0.5 * dt * ones_sat, -ones_sat],
                 -s_min_eps[a_f, t_f])

    # terminal band on the final state via the deviation variable
    sa = np.arange(n_s * n_a)
    last = offsets["soc"] + sa * n_t + (n_t - 1)
    dev_idx = offsets["dev"] + sa
    ones_sa = np.ones(n_s * n_a)
    add_rows([sa, sa], [last, dev_idx], [ones_sa, -ones_sa], np.tile(terminal_cap, n_s))
    add_rows([sa, sa], [last, dev_idx], [-ones_sa, -ones_sa], -np.tile(terminal_floor, n_s))

    # imbalance magnitude over the full horizon
    k_f = k_const[a_f, t_f]
    for sign in (+1.0, -1.0):
        rows = [rows_sat, rows_sat[has_prev_full], rows_sat, rows_sat, rows_sat]
        cols = [soc_now_full, soc_prev_full[has_prev_full], flat_at("p_r", a_f, t_f),
                flat_at("e_da", a_f, t_f), e_i_idx]
        vals = [np.full(n_sat, sign), np.full(int(has_prev_full.sum()), -sign),
                -sign * phi_f, np.full(n_sat, -sign), -np.ones(n_sat)]
        add_rows(rows, cols, vals, -sign * dt * k_f)

    # CVaR linearization: y[a] - v[s,a] - profit[s,a](x) <= 0
    row_sa_of_sat = s_f * n_a + a_f
    rt_f = rt[s_f, a_f, t_f]
    cv_rows = [sa, sa, sa,
               row_sa_of_sat, row_sa_of_sat,
               row_sa_of_sat, row_sa_of_sat[has_prev_full], row_sa_of_sat]
    cv_cols = [offsets["y"] + sa % n_a, offsets["v"] + sa, dev_idx,
               flat_at("p_r", a_f, t_f), flat_at("e_da", a_f, t_f),
               soc_now_full, soc_prev_full[has_prev_full], e_i_idx]
    cv_vals = [ones_sa, -ones_sa, np.full(n_s * n_a, lam_p),
               -lam_r[t_f] - rt_f * phi_f,
               lam_da[a_f, t_f] - rt_f,
               rt_f, -rt_f[has_prev_full], np.full(n_sat, lam_i)]
    cv_rhs = -np.einsum("sat,at->sa", rt * dt, k_const).ravel()
    add_rows(cv_rows, cv_cols, cv_vals, cv_rhs)

    ub = TripletRows(
        rows=np.concatenate(ub_rows), cols=np.concatenate(ub_cols),
        vals=np.concatenate(ub_vals), rhs=np.concatenate(ub_rhs), names=[],
    )

    if with_names is None:
        with_names = n_vars <= 5000
    var_names = None
    if with_names:
        var_names = [""] * n_vars
        for a in range(n_a):
            for t in range(n_t):
                var_names[flat_at("e_da", a, t)] = f"e_da[{tes.areas[a]},{t}]"
                var_names[flat_at("p_r", a, t)] = f"p_r[{tes.areas[a]},{t}]"
        for s in range(n_s):
            for a in range(n_a):
                for t in range(n_t):
                    var_names[flat_soc(s, a, t)] = f"soc[{s},{tes.areas[a]},{t}]"
                    var_names[offsets["e_i"] + (s * n_a + a) * n_t + t] = \
                        f"e_i[{s},{tes.areas[a]},{t}]"
                var_names[offsets["dev"] + s * n_a + a] = f"dev[{s},{tes.areas[a]}]"
                var_names[offsets["v"] + s * n_a + a] = f"v[{s},{tes.areas[a]}]"
        for a in range(n_a):
            var_names[offsets["y"] + a] = f"y[{tes.areas[a]}]"
        if elastic_penalty is not None:
            for s in range(n_s):
                for a in range(n_a):
                    for t in range(n_t):
                        j = (s * n_a + a) * n_t + t
                        var_names[offsets["slack_hi"] + j] = f"sl_hi[{s},{tes.areas[a]},{t}]"
                        var_names[offsets["slack_lo"] + j] = f"sl_lo[{s},{tes.areas[a]},{t}]"

    lp = LinearProgram(objective=obj, lower=lower, upper=upper,
                       eq=TripletRows(), ub=ub,
                       var_names=var_names, name="bid_window")
    meta = BidMeta(
        areas=list(tes.areas), dt_h=dt, n_contract=n_c, n_total=n_t, n_scenarios=n_s,
        probabilities=pi.copy(), activation=phi, p_max_eps=p_max_eps, p_min_eps=p_min_eps,
        s_max_eps=s_max_eps, s_min_eps=s_min_eps, terminal_cap=terminal_cap,
        terminal_floor=terminal_floor, soe_penalty=lam_p, alpha=alpha, offsets=offsets,
        n_vars=n_vars, baseline_mw=tes.baseline_mw.copy(),
        initial_soe_mwh=tes.initial_soe_mwh.copy(), objective_offset=offset,
        elastic_penalty=elastic_penalty, rt_price=rt,
    )
    return lp, meta


def extract_solution(result: LpResult, meta: BidMeta) -> BidSolution:
    """Map a raw LP point back onto the decision structure.

    Consumption is reconstructed from the state-of-energy path (it was
    substituted out of the program), and the constant part of the expected
    real-time cost is restored onto the objective.
    """
    x = result.x
    n_a, n_t, n_s = len(meta.areas), meta.n_total, meta.n_scenarios
    n_c = meta.n_contract
    dt = meta.dt_h
    off = meta.offsets

    e_da = x[off["e_da"]: off["e_da"] + n_a * n_t].reshape(n_a, n_t)
    p_r = x[off["p_r"]: off["p_r"] + n_a * n_t].reshape(n_a, n_t)
    soc = x[off["soc"]: off["soc"] + n_s * n_a * n_t].reshape(n_s, n_a, n_t)
    dev = x[off["dev"]: off["dev"] + n_s * n_a].reshape(n_s, n_a)
    v = x[off["v"]: off["v"] + n_s * n_a].reshape(n_s, n_a)
    y = x[off["y"]: off["y"] + n_a]

    prev = np.concatenate(
        [np.broadcast_to(meta.initial_soe_mwh[None, :, None], (n_s, n_a, 1)),
         soc[:, :, :-1]], axis=2,
    )
    e_r = p_r[None, :, :] * meta.activation[:, None, :]
    p_rt = (soc - prev - e_r) / dt + meta.baseline_mw[None, :, :]
    e_rt = p_rt * dt

    e_i = x[off["e_i"]: off["e_i"] + n_s * n_a * n_t].reshape(n_s, n_a, n_t)

    cvar = y - (meta.probabilities[:, None] * v).sum(axis=0) / (1.0 - meta.alpha)
    violation = 0.0
    if meta.elastic_penalty is not None:
        n_sat = n_s * n_a * n_t
        violation = float(x[off["slack_hi"]: off["slack_hi"] + 2 * n_sat].sum())
    return BidSolution(
        areas=list(meta.areas), dt_h=dt, n_contract=n_c,
        e_da_mwh=e_da, p_r_mw=p_r, p_rt_mw=p_rt, e_rt_mwh=e_rt,
        e_r_mwh=e_r, e_i_mwh=e_i, soe_mwh=soc, deviation_mwh=dev,
        var_level=y.copy(), cvar=cvar,
        objective=result.objective + meta.objective_offset,
        probabilities=meta.probabilities.copy(),
        elastic_violation_mwh=violation,
    )


def optimize_bids(
    tes: TesWindow,
    prices: MarketPrices,
    scenarios: ScenarioSet,
    risk: RiskConfig = RiskConfig(),
    horizon: HorizonConfig = HorizonConfig(),
    engine: str = "auto",
    **build_kwargs,
) -> BidSolution:
    """Build, solve, and unpack one window."""
    lp, meta = build_lp(tes, prices, scenarios, risk, horizon, **build_kwargs)
    result = solve(lp, engine=engine)
    return extract_solution(result, meta)


def slice_area(tes: TesWindow, ai: int) -> TesWindow:
    """Single-area view of a window (the program separates by area)."""
    return TesWindow(
        areas=[tes.areas[ai]], dt_h=tes.dt_h,
        baseline_mw=tes.baseline_mw[ai: ai + 1],
        power_max_mw=tes.power_max_mw[ai: ai + 1],
        power_min_mw=tes.power_min_mw[ai: ai + 1],
        energy_max_mwh=tes.energy_max_mwh[ai: ai + 1],
        energy_min_mwh=tes.energy_min_mwh[ai: ai + 1],
        midpoint_mwh=tes.midpoint_mwh[ai: ai + 1],
        installed_mw=tes.installed_mw[ai: ai + 1],
        initial_soe_mwh=tes.initial_soe_mwh[ai: ai + 1],
    )


def _merge_solutions(parts: list[BidSolution], dt_h, n_contract) -> BidSolution:
    return BidSolution(
        areas=[p.areas[0] for p in parts],
        dt_h=dt_h,
        n_contract=n_contract,
        e_da_mwh=np.concatenate([p.e_da_mwh for p in parts], axis=0),
        p_r_mw=np.concatenate([p.p_r_mw for p in parts], axis=0),
        p_rt_mw=np.concatenate([p.p_rt_mw for p in parts], axis=1),
        e_rt_mwh=np.concatenate([p.e_rt_mwh for p in parts], axis=1),
        e_r_mwh=np.concatenate([p.e_r_mwh for p in parts], axis=1),
        e_i_mwh=np.concatenate([p.e_i_mwh for p in parts], axis=1),
        soe_mwh=np.concatenate([p.soe_mwh for p in parts], axis=1),
        deviation_mwh=np.concatenate([p.deviation_mwh for p in parts], axis=1),
        var_level=np.concatenate([p.var_level for p in parts]),
        cvar=np.concatenate([p.cvar for p in parts]),
        objective=float(sum(p.objective for p in parts)),
        probabilities=parts[0].probabilities.copy(),
        elastic_violation_mwh=float(sum(p.elastic_violation_mwh for p in parts)),
    )


def optimize_bids_by_area(
    tes: TesWindow,
    prices: MarketPrices,
    scenarios: ScenarioSet,
    risk: RiskConfig = RiskConfig(),
    horizon: HorizonConfig = HorizonConfig(),
    engine: str = "auto",
    frozen_e_da: np.ndarray | None = None,
    frozen_p_r: np.ndarray | None = None,
    elastic_fallback: float | None = None,
    **build_kwargs,
) -> BidSolution:
    """Solve one window as independent per-area programs and merge.

    Nothing in the formulation couples price areas (the terminal penalty is
    booked per area), so the per-area optima compose the joint optimum at a
    fraction of the joint solve cost. The dynamic terminal penalty is
    resolved once on the full window so the split prices deviations
    identically to the joint program.

    With frozen first-stage bids this doubles as the settlement recourse;
    elastic_fallback then retries an infeasible area with energy-band
    slack priced at that $/MWh penalty.
    """
    from .errors import BoundCrossingError, InfeasibleError

    lam_p = prices.resolved_soe_penalty()
    parts = []
    for ai in range(tes.n_areas):
        sub_prices = MarketPrices(
            reserve_usd_mw=prices.reserve_usd_mw,
            day_ahead_usd_mwh=prices.day_ahead_usd_mwh[ai: ai + 1],
            imbalance_usd_mwh=prices.imbalance_usd_mwh,
            soe_penalty_usd_mwh=lam_p,
        )
        sub_scen = ScenarioSet(
            rt_price=scenarios.rt_price[:, ai: ai + 1, :],
            frequency=scenarios.frequency,
            probabilities=scenarios.probabilities,
        )

        def _solve_area(elastic):
            lp, meta = build_lp(slice_area(tes, ai), sub_prices, sub_scen, risk,
                                horizon, elastic_penalty=elastic, **build_kwargs)
            if frozen_e_da is not None:
                off = meta.offsets
                n_at = meta.n_total
                lp.lower[off["e_da"]: off["e_da"] + n_at] = frozen_e_da[ai]
                lp.upper[off["e_da"]: off["e_da"] + n_at] = frozen_e_da[ai]
                lp.lower[off["p_r"]: off["p_r"] + n_at] = frozen_p_r[ai]
                lp.upper[off["p_r"]: off["p_r"] + n_at] = frozen_p_r[ai]
            return extract_solution(solve(lp, engine=engine), meta)

        try:
            parts.append(_solve_area(None))
        except (InfeasibleError, BoundCrossingError):
            if elastic_fallback is None:
                raise
            parts.append(_solve_area(float(elastic_fallback)))
    return _merge_solutions(parts, tes.dt_h, min(horizon.n_contract, tes.n_intervals))


def analytic_cvar(profits: np.ndarray, probabilities: np.ndarray, alpha: float) -> float:
    """CVaR of a discrete profit distribution: expected profit over the
    worst (1 - alpha) tail, via the maximizing threshold formula."""
    best = -np.inf
    for y in np.unique(profits):
        val = y - (probabilities * np.maximum(y - profits, 0.0)).sum() / (1.0 - alpha)
        best = max(best, float(val))
    return best


def evaluate_profit(
    sol: BidSolution,
    prices: MarketPrices,
    scenarios: ScenarioSet,
    risk: RiskConfig = RiskConfig(),
    span: str = "horizon",
    check_tol: float = 1e-6,
) -> ProfitReport:
    """Recompute the cost identities from raw decisions.

    span="horizon" covers every planned interval and cross-checks the LP
    objective (raises beyond tolerance). span="contract" books only the
    committed contract slice, the portion settlement realizes; contract
    slices of consecutive windows tile a season without double counting.
    The terminal-deviation penalty belongs to the window that planned it
    and is booked in either span.
    """
    if span not in ("horizon", "contract"):
        raise ValueError(f"span must be 'horizon' or 'contract', got {span!r}")
    n_u = sol.n_contract if span == "contract" else sol.e_da_mwh.shape[1]
    dt = sol.dt_h
    pi = sol.probabilities
    lam_p = prices.resolved_soe_penalty()

    c_r = (sol.p_r_mw[:, :n_u] * prices.reserve_usd_mw[None, :n_u]).sum(axis=1)
    c_da = (sol.e_da_mwh[:, :n_u] * prices.day_ahead_usd_mwh[:, :n_u]).sum(axis=1)
    gap = sol.e_rt_mwh[:, :, :n_u] - sol.e_da_mwh[None, :, :n_u]
    c_rt = (gap * scenarios.rt_price[:, :, :n_u]).sum(axis=2)
    c_i = sol.e_i_mwh[:, :, :n_u].sum(axis=2) * prices.imbalance_usd_mwh
    pen_share = sol.deviation_mwh * lam_p
    c_p = pen_share.sum(axis=1)

    profit = c_r[None, :] - c_da[None, :] - c_rt - c_i - pen_share
    expected = float((pi[:, None] * profit).sum())
    cvar = np.array([
        analytic_cvar(profit[:, a], pi, risk.alpha) for a in range(profit.shape[1])
    ])
    objective = (1.0 - risk.beta) * expected + risk.beta * float(cvar.sum())

    if span == "horizon" and float(sol.elastic_violation_mwh) == 0.0:
        scale = 1.0 + abs(sol.objective)
        if abs(objective - sol.objective) > check_tol * scale:
            raise RuntimeError(
                f"profit recomputation disagrees with the LP objective: "
                f"{objective:.8f} vs {sol.objective:.8f}"
            )
    return ProfitReport(
        reserve_revenue=c_r, da_cost=c_da, rt_cost=c_rt, imbalance_cost=c_i,
        penalty_cost=c_p, penalty_share=pen_share, profit=profit,
        expected_profit=expected, cvar=cvar, objective=objective,
    )


def reserve_headroom_violation(sol: BidSolution, meta: BidMeta) -> float:
    """Largest violation of the worst-case activation invariants (0 when clean).

    Checks the symmetric cap p_r <= (p_max_eps - p_min_eps)/2 and the
    +/- dt/2 * p_r state-of-energy excursions against the tightened band,
    across every interval and scenario.
    """
    half_cap = 0.5 * (meta.p_max_eps - meta.p_min_eps)
    v1 = float((sol.p_r_mw - half_cap).max(initial=0.0))
    exc_hi = sol.soe_mwh + 0.5 * sol.dt_h * sol.p_r_mw[None, :, :] - meta.s_max_eps[None, :, :]
    exc_lo = meta.s_min_eps[None, :, :] - (sol.soe_mwh - 0.5 * sol.dt_h * sol.p_r_mw[None, :, :])
    return max(v1, float(exc_hi.max(initial=0.0)), float(exc_lo.max(initial=0.0)))
