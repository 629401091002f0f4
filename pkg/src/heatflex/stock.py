"""National dwelling stock inventory.

Joins the bundled survey tables (county climate records, heating-type
ratings, per-decade heating and building-type shares, construction counts)
into a cohort population: homogeneous groups of dwellings sharing price
area, thermal envelope, heating technology, and thermostat setpoint. The
cohorts are the atoms everything downstream (dwelling simulation,
aggregate storage parameters) is computed from.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DataFormatError

PRICE_AREAS = ("SE1", "SE2", "SE3", "SE4")
DECADES = (
    "pre1930", "1931-1940", "1941-1950", "1951-1960", "1961-1970",
    "1971-1980", "1981-1990", "1991-2000", "2001-2010", "2011-2019",
)
NO_DATA_DECADE = "no_data"

#: average heated floor area per single-family dwelling [m2]
DWELLING_AREA_M2 = 122.0

#: allowable specific energy use for heating and ventilation per climate
#: zone [kWh/m2/year], coldest zone first (zones approximated by price area)
ZONE_ENERGY_KWH_M2 = (95.0, 75.0, 55.0, 50.0)

#: default thermostat deadband half-width [K]
DEADBAND_HALFWIDTH_K = 1.0

#: default setpoint spread for the uniform policy [degC]
DEFAULT_SETPOINTS = (19.0, 20.0, 21.0, 22.0, 23.0)


@dataclass(frozen=True)
class HeatingType:
    id: str
    name: str
    efficiency: float
    rating_kw: dict[str, float]  # price area -> electric kW

    def __post_init__(self):
        if self.efficiency <= 0:
            raise DataFormatError(f"heating type {self.id}: efficiency must be > 0")
        for area in PRICE_AREAS:
            if area not in self.rating_kw:
                raise DataFormatError(f"heating type {self.id}: missing rating for {area}")
            if self.rating_kw[area] <= 0:
                raise DataFormatError(f"heating type {self.id}: rating in {area} must be > 0")


@dataclass(frozen=True)
class BuildingType:
    id: str
    capacitance_kwh_k: float  # kWh/K
    resistance_k_kw: float    # K/kW

    def __post_init__(self):
        if self.capacitance_kwh_k <= 0 or self.resistance_k_kw <= 0:
            raise DataFormatError(f"building type {self.id}: R and C must be > 0")


@dataclass(frozen=True)
class CountyRecord:
    id: int
    name: str
    price_area: str
    design_temp_c: float
    median_temp_c: float
    degree_hours: float  # degC*h per year
    sfd_share: float     # fraction of national stock

    def __post_init__(self):
        if not self.design_temp_c < self.median_temp_c:
            raise DataFormatError(f"county {self.id}: design temp must lie below median temp")
        if self.degree_hours <= 0:
            raise DataFormatError(f"county {self.id}: degree hours must be > 0")


@dataclass
class StockInventory:
    """Integer dwelling counts keyed (price_area, decade, building_id, heating_id)."""

    counts: dict[tuple[str, str, str, str], int]
    dwelling_area_m2: float = DWELLING_AREA_M2

    def total_dwellings(self) -> int:
        return sum(self.counts.values())

    def dwellings_in_area(self, area: str) -> int:
        return sum(n for (a, _, _, _), n in self.counts.items() if a == area)


@dataclass(frozen=True)
class Cohort:
    """A homogeneous (area, envelope, heating, setpoint) group of dwellings."""

    price_area: str
    building_id: str
    heating_id: str
    resistance_k_kw: float
    capacitance_kwh_k: float
    efficiency: float
    rating_kw: float
    count: int
    setpoint_c: float
    deadband_halfwidth_k: float = DEADBAND_HALFWIDTH_K

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("cohort count must be >= 1")
        if self.deadband_halfwidth_k <= 0:
            raise ValueError("deadband half-width must be > 0")
        if self.rating_kw * self.efficiency * self.resistance_k_kw <= 0:
            raise ValueError("rating, efficiency and resistance must be positive")

    @property
    def temp_lower_c(self) -> float:
        return self.setpoint_c - self.deadband_halfwidth_k

    @property
    def temp_upper_c(self) -> float:
        return self.setpoint_c + self.deadband_halfwidth_k

    @property
    def temperature_lift_k(self) -> float:
        """Steady-state indoor-over-ambient rise at full power: R * P * eta."""
        return self.resistance_k_kw * self.rating_kw * self.efficiency


def _data_path(name: str) -> Path:
    return Path(resources.files("heatflex").joinpath("data", name))


def _read_rows(path: Path, required: list[str]) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in required:
                if col not in header:
                    raise DataFormatError(f"{path.name}: missing column '{col}'")
            return list(reader)
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read bundled table: {exc}") from exc


def _parse_float(row: dict, col: str, path: str, line: int) -> float:
    raw = (row.get(col) or "").strip()
    try:
        return float(raw)
    except ValueError:
        raise DataFormatError(f"{path}:row {line}: column '{col}': not a number: {raw!r}") from None


def load_heating_types() -> list[HeatingType]:
    path = _data_path("heating_types.csv")
    cols = ["heating_id", "name", "efficiency"] + [f"rating_kw_{a.lower()}" for a in PRICE_AREAS]
    out = []
    for i, row in enumerate(_read_rows(path, cols), start=2):
        rating = {a: _parse_float(row, f"rating_kw_{a.lower()}", path.name, i) for a in PRICE_AREAS}
        out.append(HeatingType(
            id=row["heating_id"].strip(),
            name=row["name"].strip(),
            efficiency=_parse_float(row, "efficiency", path.name, i),
            rating_kw=rating,
        ))
    return out


def load_building_types() -> list[BuildingType]:
    path = _data_path("building_types.csv")
    out = []
    for i, row in enumerate(_read_rows(path, ["building_id", "capacitance_kwh_per_k", "resistance_k_per_kw"]), start=2):
        out.append(BuildingType(
            id=row["building_id"].strip(),
            capacitance_kwh_k=_parse_float(row, "capacitance_kwh_per_k", path.name, i),
            resistance_k_kw=_parse_float(row, "resistance_k_per_kw", path.name, i),
        ))
    return out


def load_counties() -> list[CountyRecord]:
    path = _data_path("counties.csv")
    cols = ["county_id", "name", "price_area", "design_temp_c", "median_temp_c",
            "degree_hours_ch", "sfd_share_pct"]
    out = []
    for i, row in enumerate(_read_rows(path, cols), start=2):
        area = row["price_area"].strip()
        if area not in PRICE_AREAS:
            raise DataFormatError(f"{path.name}:row {i}: column 'price_area': unknown area {area!r}")
        out.append(CountyRecord(
            id=int(_parse_float(row, "county_id", path.name, i)),
            name=row["name"].strip(),
            price_area=area,
            design_temp_c=_parse_float(row, "design_temp_c", path.name, i),
            median_temp_c=_parse_float(row, "median_temp_c", path.name, i),
            degree_hours=_parse_float(row, "degree_hours_ch", path.name, i),
            sfd_share=_parse_float(row, "sfd_share_pct", path.name, i) / 100.0,
        ))
    share_sum = sum(c.sfd_share for c in out)
    if abs(share_sum - 1.0) > 0.02 + 1e-9:
        raise DataFormatError(f"counties.csv: county shares sum to {share_sum:.3f}, expected 1.00 +/- 0.02")
    return out


def _load_share_table(name: str, value_cols: list[str]) -> dict[str, dict[str, float]]:
    path = _data_path(name)
    table = {}
    for i, row in enumerate(_read_rows(path, ["decade"] + value_cols), start=2):
        decade = row["decade"].strip()
        if decade not in DECADES:
            raise DataFormatError(f"{path.name}:row {i}: column 'decade': unknown decade {decade!r}")
        shares = {c: _parse_float(row, c, path.name, i) for c in value_cols}
        for c, v in shares.items():
            if v < 0 or v > 1:
                raise DataFormatError(f"{path.name}:row {i}: column '{c}': share {v} outside [0, 1]")
        table[decade] = shares
    missing = set(DECADES) - set(table)
    if missing:
        raise DataFormatError(f"{path.name}: missing decades {sorted(missing)}")
    return table


def _largest_remainder(real_counts: list[float]) -> list[int]:
    """Integerize preserving the rounded total (largest-remainder method)."""
    floors = [int(x) for x in real_counts]
    target = int(round(sum(real_counts)))
    remainders = sorted(
        range(len(real_counts)),
        key=lambda i: (-(real_counts[i] - floors[i]), i),
    )
    out = list(floors)
    for i in remainders[: max(0, target - sum(floors))]:
        out[i] += 1
    return out


def build_inventory(
    heating_shares: dict[str, dict[str, float]],
    building_shares: dict[str, dict[str, float]],
    raw_counts: dict[str, dict[str, int]],
) -> StockInventory:
    """Split per-(area, decade) construction counts into electric-heating cells.

    Dwellings with unknown construction year are assigned to the area's most
    common decade before the split. The non-electric remainder of each decade
    (heating shares sum below 1) is discarded. Integer counts are produced by
    largest remainder within each (area, decade) so the electric total is
    preserved under rounding.
    """
    merged = {d: dict(raw_counts[d]) for d in DECADES}
    no_data = raw_counts.get(NO_DATA_DECADE, {})
    for area in PRICE_AREAS:
        if no_data.get(area, 0) > 0:
            modal = max(DECADES, key=lambda d: merged[d].get(area, 0))
            merged[modal][area] += no_data[area]

    counts: dict[tuple[str, str, str, str], int] = {}
    for decade in DECADES:
        h_shares = heating_shares[decade]
        b_shares = {b: s for b, s in building_shares[decade].items() if s > 0}
        if sum(h_shares.values()) > 1.0 + 1e-9:
            raise DataFormatError(f"heating shares for {decade} sum above 1")
        for area in PRICE_AREAS:
            n = merged[decade].get(area, 0)
            if n <= 0:
                continue
            cells = [(b, h) for b in b_shares for h in h_shares if h_shares[h] > 0]
            real = [n * b_shares[b] * h_shares[h] for (b, h) in cells]
            for (b, h), cnt in zip(cells, _largest_remainder(real)):
                if cnt > 0:
                    counts[(area, decade, b, h)] = counts.get((area, decade, b, h), 0) + cnt
    return StockInventory(counts=counts)


def load_bundled_tables() -> tuple[list[HeatingType], list[BuildingType], list[CountyRecord], StockInventory]:
    """Load the bundled survey tables and build the electric-heating inventory."""
    heating = load_heating_types()
    buildings = load_building_types()
    counties = load_counties()

    path = _data_path("stock_counts.csv")
    cols = ["decade"] + [a.lower() for a in PRICE_AREAS]
    raw_counts: dict[str, dict[str, int]] = {}
    for i, row in enumerate(_read_rows(path, cols), start=2):
        decade = row["decade"].strip()
        if decade not in DECADES and decade != NO_DATA_DECADE:
            raise DataFormatError(f"{path.name}:row {i}: column 'decade': unknown decade {decade!r}")
        raw_counts[decade] = {
            a: int(_parse_float(row, a.lower(), path.name, i)) for a in PRICE_AREAS
        }
        for a, n in raw_counts[decade].items():
            if n < 0:
                raise DataFormatError(f"{path.name}:row {i}: column '{a.lower()}': negative count")

    heating_shares = _load_share_table("heating_shares.csv", [h.id for h in heating])
    building_shares = _load_share_table("building_type_shares.csv", [b.id for b in buildings])
    inventory = build_inventory(heating_shares, building_shares, raw_counts)
    return heating, buildings, counties, inventory


def design_heating_energy(
    county: CountyRecord,
    heating: HeatingType,
    specific_energy_kwh_m2: float,
    setpoint_c: float,
    dwelling_area_m2: float = DWELLING_AREA_M2,
) -> float:
    """Yearly heating-and-ventilation design energy for one dwelling.

    Evaluates specific energy * efficiency * (setpoint - design temp) /
    degree hours * floor area, exactly as the sizing rule is stated.
    """
    if setpoint_c < county.design_temp_c:
        raise ValueError(
            f"setpoint {setpoint_c} degC must not lie below the design temperature "
            f"{county.design_temp_c} degC of county {county.id}"
        )
    return (
        specific_energy_kwh_m2
        * heating.efficiency
        * (setpoint_c - county.design_temp_c)
        / county.degree_hours
        * dwelling_area_m2
    )


def enumerate_cohorts(
    inventory: StockInventory,
    heating_types: list[HeatingType],
    building_types: list[BuildingType],
    setpoints: tuple[float, ...] = DEFAULT_SETPOINTS,
    deadband_halfwidth_k: float = DEADBAND_HALFWIDTH_K,
) -> list[Cohort]:
    """Collapse the inventory into cohorts, splitting counts over setpoints.

    Counts merge across construction decades (the decade only determined the
    envelope and heating mix) and split evenly over the given setpoints with
    any integer remainder assigned to the lowest setpoint, so the total
    dwelling count is preserved exactly.
    """
    if not setpoints:
        raise ValueError("setpoint policy must list at least one setpoint")
    h_by_id = {h.id: h for h in heating_types}
    b_by_id = {b.id: b for b in building_types}

    merged: dict[tuple[str, str, str], int] = {}
    for (area, _decade, b, h), n in inventory.counts.items():
        merged[(area, b, h)] = merged.get((area, b, h), 0) + n

    ordered_sp = sorted(setpoints)
    cohorts = []
    for (area, b, h) in sorted(merged):
        n = merged[(area, b, h)]
        bt, ht = b_by_id[b], h_by_id[h]
        base, rem = divmod(n, len(ordered_sp))
        for i, sp in enumerate(ordered_sp):
            cnt = base + (rem if i == 0 else 0)
            if cnt == 0:
                continue
            cohorts.append(Cohort(
                price_area=area,
                building_id=b,
                heating_id=h,
                resistance_k_kw=bt.resistance_k_kw,
                capacitance_kwh_k=bt.capacitance_kwh_k,
                efficiency=ht.efficiency,
                rating_kw=ht.rating_kw[area],
                count=cnt,
                setpoint_c=float(sp),
                deadband_halfwidth_k=deadband_halfwidth_k,
            ))
    return cohorts


def installed_capacity_mw(cohorts: list[Cohort]) -> dict[str, float]:
    """Installed electric heating capacity per price area [MW]."""
    out = {a: 0.0 for a in PRICE_AREAS}
    for c in cohorts:
        out[c.price_area] += c.count * c.rating_kw / 1000.0
    return out
