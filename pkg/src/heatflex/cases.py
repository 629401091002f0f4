"""Sensitivity-case matrix: nine season variants around one reference setup.

Case 2 is the reference (risk weight 0.5, noon gate closure the day ahead,
24 h contracts, dynamic terminal penalty, 25 scenarios). Every other case
changes exactly the knobs listed in its constructor: reserve market removed
(1), later gate closure (3), fixed low/high terminal penalties (4, 5), a
more risk-taking weight (6), hourly market timing (7), a zero-mean
guarantee on the activation signal (8), and a deterministic single-scenario
collapse to expected parameters (9).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

from .bidding import HorizonConfig, RiskConfig
from .season import SeasonData, SeasonParams, SeasonResult, run_season


@dataclass(frozen=True)
class CaseConfig:
    id: int
    label: str
    reserve_enabled: bool = True
    lead_hours: float = 12.0
    contract_hours: float = 24.0
    soe_penalty_usd_mwh: float | None = None  # None = dynamic
    beta: float = 0.5
    zero_mean_activation: bool = False
    deterministic: bool = False

    def to_params(self, base: SeasonParams) -> SeasonParams:
        """Apply this case's modifications on top of shared season settings."""
        risk = replace(base.risk, beta=self.beta)
        horizon = replace(base.horizon, lead_hours=self.lead_hours,
                          contract_hours=self.contract_hours)
        return replace(
            base,
            risk=risk,
            horizon=horizon,
            allow_reserve=self.reserve_enabled,
            reserve_price_zero=not self.reserve_enabled,
            soe_penalty_usd_mwh=self.soe_penalty_usd_mwh,
            zero_mean_activation=self.zero_mean_activation,
            deterministic=self.deterministic,
        )


REFERENCE_CASE_ID = 2

CASES: dict[int, CaseConfig] = {
    1: CaseConfig(1, "energy arbitrage only", reserve_enabled=False),
    2: CaseConfig(2, "energy arbitrage and reserve (reference)"),
    3: CaseConfig(3, "later gate closure (lead 1 h)", lead_hours=1.0),
    4: CaseConfig(4, "low terminal penalty (1 $/MWh)", soe_penalty_usd_mwh=1.0),
    5: CaseConfig(5, "high terminal penalty (100 $/MWh)", soe_penalty_usd_mwh=100.0),
    6: CaseConfig(6, "more risk-taking (beta 0.2)", beta=0.2),
    7: CaseConfig(7, "later gate closure and 1 h contracts",
                  lead_hours=1.0, contract_hours=1.0),
    8: CaseConfig(8, "zero-mean activation guarantee", zero_mean_activation=True),
    9: CaseConfig(9, "deterministic (expected parameters)", deterministic=True),
}


@dataclass
class CaseSummary:
    case_id: int
    label: str
    expected_cost_per_sfd_usd: float
    realized_cost_per_sfd_usd: float
    mean_reserve_kw_per_sfd: float
    n_windows: int
    n_skipped: int
    seed: int
    source: str


def run_case(
    case: CaseConfig,
    data: SeasonData,
    seed: int,
    base_params: SeasonParams | None = None,
) -> tuple[SeasonResult, CaseSummary]:
    """Run one sensitivity case over prebuilt season data."""
    base = base_params if base_params is not None else SeasonParams()
    result = run_season(data, case.to_params(base), seed)
    summary = CaseSummary(
        case_id=case.id,
        label=case.label,
        expected_cost_per_sfd_usd=result.expected_cost_per_dwelling_usd(),
        realized_cost_per_sfd_usd=result.realized_cost_per_dwelling_usd(),
        mean_reserve_kw_per_sfd=result.mean_reserve_kw_per_dwelling(),
        n_windows=result.n_windows,
        n_skipped=result.n_skipped,
        seed=seed,
        source=data.source,
    )
    return result, summary


def compare_cases(summaries: list[CaseSummary]) -> list[dict]:
    """Comparison rows sorted descending by expected cost per dwelling.

    Relative columns are taken against the reference case when present
    (else the first summary). Mixed seeds or data sources are flagged in a
    warning column rather than rejected.
    """
    if len(summaries) < 2:
        raise ValueError("need at least two case results to compare")
    ref = next((s for s in summaries if s.case_id == REFERENCE_CASE_ID), summaries[0])
    mixed = len({s.seed for s in summaries}) > 1 or len({s.source for s in summaries}) > 1

    rows = []
    for s in sorted(summaries, key=lambda s: -s.expected_cost_per_sfd_usd):
        warn = ""
        if mixed:
            warn = "mixed seeds/sources"
        if s.n_skipped:
            warn = (warn + "; " if warn else "") + f"{s.n_skipped} windows skipped"
        rows.append({
            "case_id": s.case_id,
            "label": s.label,
            "expected_cost_per_sfd_usd": s.expected_cost_per_sfd_usd,
            "realized_cost_per_sfd_usd": s.realized_cost_per_sfd_usd,
            "mean_reserve_kw_per_sfd": s.mean_reserve_kw_per_sfd,
            "cost_rel_to_reference": (
                s.expected_cost_per_sfd_usd / ref.expected_cost_per_sfd_usd
                if ref.expected_cost_per_sfd_usd else float("nan")
            ),
            "reserve_rel_to_reference": (
                s.mean_reserve_kw_per_sfd / ref.mean_reserve_kw_per_sfd
                if ref.mean_reserve_kw_per_sfd else float("nan")
            ),
            "n_windows": s.n_windows,
            "n_skipped": s.n_skipped,
            "warning": warn,
        })
    return rows


def write_comparison_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = list(rows[0].keys())
        w.writerow(header)
        for row in rows:
            w.writerow([
                row[k] if not isinstance(row[k], float) else repr(row[k])
                for k in header
            ])


def write_chart_data_csv(rows: list[dict], path) -> None:
    """Bar-chart-ready columns: one row per case, cost and reserve series."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "label", "expected_cost_per_sfd_usd", "mean_reserve_kw_per_sfd"])
        for row in rows:
            w.writerow([
                row["case_id"], row["label"],
                repr(row["expected_cost_per_sfd_usd"]),
                repr(row["mean_reserve_kw_per_sfd"]),
            ])
