"""Stock tables, design sizing rule, and cohort enumeration."""

import textwrap
from fractions import Fraction

import pytest

from heatflex.errors import DataFormatError
from heatflex.stock import (
    DEFAULT_SETPOINTS,
    StockInventory,
    build_inventory,
    design_heating_energy,
    enumerate_cohorts,
    installed_capacity_mw,
    load_bundled_tables,
)


@pytest.fixture(scope="module")
def tables():
    return load_bundled_tables()


def test_heating_type_lookup(tables):
    heating, _, _, _ = tables
    h1 = next(h for h in heating if h.id == "h1")
    assert h1.rating_kw["SE1"] == 6.0
    assert h1.efficiency == 3.0


def test_building_type_lookup(tables):
    _, buildings, _, _ = tables
    b4 = next(b for b in buildings if b.id == "b4")
    assert b4.capacitance_kwh_k == 42.65


def test_county_lookup(tables):
    _, _, counties, _ = tables
    norr = next(c for c in counties if c.id == 1)
    assert norr.design_temp_c == -30.0
    assert norr.degree_hours == 144_000
    for c in counties:
        assert c.design_temp_c < c.median_temp_c
        assert c.degree_hours > 0
    assert abs(sum(c.sfd_share for c in counties) - 1.0) <= 0.0201


def test_electric_dwelling_total(tables):
    _, _, _, inventory = tables
    assert all(n >= 0 for n in inventory.counts.values())
    assert 1_300_000 <= inventory.total_dwellings() <= 1_650_000
    assert inventory.dwelling_area_m2 == 122.0


def test_malformed_table_raises(tmp_path, monkeypatch):
    bad = tmp_path / "heating_types.csv"
    bad.write_text(textwrap.dedent("""\
        heating_id,name,efficiency,rating_kw_se1,rating_kw_se2,rating_kw_se3,rating_kw_se4
        h1,gshp,not_a_number,6,5,4,3
    """))
    import heatflex.stock as stock

    monkeypatch.setattr(stock, "_data_path", lambda name: tmp_path / name)
    with pytest.raises(DataFormatError) as err:
        stock.load_heating_types()
    assert "row 2" in str(err.value) and "efficiency" in str(err.value)


def test_design_energy_worked_example(tables):
    _, _, counties, _ = tables
    heating, _, _, _ = tables
    norr = next(c for c in counties if c.id == 1)
    h1 = next(h for h in heating if h.id == "h1")
    got = design_heating_energy(norr, h1, specific_energy_kwh_m2=95.0, setpoint_c=21.0)
    # independent exact evaluation of the sizing rule
    exact = Fraction(95) * 3 * (21 + 30) * 122 / Fraction(144_000)
    assert abs(got - float(exact)) < 1e-12
    assert round(got, 2) == 12.31


def test_design_energy_edges(tables):
    heating, _, counties, _ = tables
    norr = next(c for c in counties if c.id == 1)
    h1 = next(h for h in heating if h.id == "h1")
    # zero numerator at setpoint equal to the design temperature
    assert design_heating_energy(norr, h1, 95.0, setpoint_c=-30.0) == 0.0
    with pytest.raises(ValueError):
        design_heating_energy(norr, h1, 95.0, setpoint_c=-30.5)
    # linear in floor area
    one = design_heating_energy(norr, h1, 95.0, 21.0, dwelling_area_m2=122.0)
    two = design_heating_energy(norr, h1, 95.0, 21.0, dwelling_area_m2=244.0)
    assert two == pytest.approx(2.0 * one, rel=1e-12)


def test_single_cell_inventory(tables):
    heating, buildings, _, _ = tables
    inv = StockInventory(counts={("SE1", "pre1930", "b1", "h1"): 100})
    cohorts = enumerate_cohorts(inv, heating, buildings, setpoints=(21.0,))
    assert len(cohorts) == 1
    c = cohorts[0]
    assert c.rating_kw == 6.0 and c.count == 100 and c.efficiency == 3.0
    assert c.temp_lower_c == 20.0 and c.temp_upper_c == 22.0


def test_setpoint_split_preserves_counts(tables):
    heating, buildings, _, _ = tables
    inv = StockInventory(counts={("SE2", "pre1930", "b1", "h1"): 103})
    cohorts = enumerate_cohorts(inv, heating, buildings, setpoints=DEFAULT_SETPOINTS)
    assert len(cohorts) == 5
    assert sum(c.count for c in cohorts) == 103
    lowest = min(cohorts, key=lambda c: c.setpoint_c)
    assert lowest.count == 20 + 3  # remainder goes to the lowest setpoint


def test_installed_capacity_reconstruction(tables):
    heating, buildings, _, inventory = tables
    cohorts = enumerate_cohorts(inventory, heating, buildings)
    total_gw = sum(installed_capacity_mw(cohorts).values()) / 1000.0
    assert 11.6 <= total_gw <= 14.2


def test_totals_invariant_under_policies(tables):
    heating, buildings, _, inventory = tables
    for policy in [(21.0,), (19.0, 23.0), DEFAULT_SETPOINTS]:
        cohorts = enumerate_cohorts(inventory, heating, buildings, setpoints=policy)
        assert sum(c.count for c in cohorts) == inventory.total_dwellings()
    cap_a = installed_capacity_mw(enumerate_cohorts(inventory, heating, buildings, setpoints=(21.0,)))
    cap_b = installed_capacity_mw(enumerate_cohorts(inventory, heating, buildings))
    for area in cap_a:
        assert cap_a[area] == pytest.approx(cap_b[area], rel=1e-12)


def test_empty_inventory_gives_no_cohorts(tables):
    heating, buildings, _, _ = tables
    assert enumerate_cohorts(StockInventory(counts={}), heating, buildings) == []


def test_heating_share_rows_stay_below_one(tables):
    import heatflex.stock as stock

    shares = stock._load_share_table("heating_shares.csv", [f"h{i}" for i in range(1, 7)])
    for decade, row in shares.items():
        assert sum(row.values()) <= 1.0 + 1e-9
