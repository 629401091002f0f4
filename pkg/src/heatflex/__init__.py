"""Bottom-up flexibility quantification for electrically heated dwellings.

Pipeline: bundled stock tables -> cohorts -> per-area thermal-storage
equivalents -> risk-averse two-stage energy/reserve bidding -> rolling
season simulation and sensitivity cases.
"""

from .aggregation import StoragePoint, StorageProfile, aggregate_at, build_profiles, capacity_summary
from .bidding import (
    BidSolution,
    HorizonConfig,
    MarketPrices,
    RiskConfig,
    TesWindow,
    build_lp,
    evaluate_profit,
    optimize_bids,
)
from .cases import CASES, CaseConfig, compare_cases, run_case
from .dwelling import (
    DwellingState,
    availability,
    duty_cycle,
    on_off_times,
    simulate_dwelling,
    step_temperature,
    thermostat,
)
from .scenarios import (
    BoundDistribution,
    FrequencyModel,
    ScenarioSet,
    fit_frequency_model,
    quantile_bound,
    sample_scenarios,
)
from .season import SeasonData, SeasonParams, SeasonResult, build_season_data, run_season, settle
from .series import (
    FrequencyHistory,
    PriceSeries,
    TemperatureSeries,
    parse_frequency_csv,
    parse_price_csv,
    parse_temperature_csv,
    synth_frequency,
    synth_prices,
    synth_temperature,
)
from .stock import (
    BuildingType,
    Cohort,
    CountyRecord,
    HeatingType,
    StockInventory,
    design_heating_energy,
    enumerate_cohorts,
    installed_capacity_mw,
    load_bundled_tables,
)

__version__ = "0.1.0"
