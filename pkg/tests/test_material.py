import numpy as np
import pytest

from meltgraph.material import (
    IN625_CONDUCTIVITY,
    MaterialTable,
    ProcessParams,
    interpolate_property,
    validate_table,
)


@pytest.fixture
def table():
    return MaterialTable.in625()


def test_conductivity_at_table_abscissa(table):
    assert interpolate_property(table, "conductivity", 300.0) == pytest.approx(0.014, abs=0)


def test_conductivity_midpoint_interpolation(table):
    # hand interpolation between the 200 and 300 degC rows
    expected = 0.0125 + 0.5 * (0.014 - 0.0125)
    assert interpolate_property(table, "conductivity", 250.0) == pytest.approx(expected, rel=1e-12)


def test_specific_heat_clamped_above_range(table):
    assert interpolate_property(table, "specific_heat", 5000.0) == 0.68


def test_clamped_below_range(table):
    assert interpolate_property(table, "conductivity", -100.0) == 0.01


def test_exact_at_every_abscissa(table):
    for temp, value in IN625_CONDUCTIVITY:
        assert interpolate_property(table, "conductivity", temp) == pytest.approx(value, rel=1e-15)


def test_monotone_between_ordered_points(table):
    # conductivity rises monotonically over the whole table
    temps = np.linspace(25.0, 1200.0, 500)
    values = interpolate_property(table, "conductivity", temps)
    assert np.all(np.diff(values) >= 0.0)


def test_unknown_property_kind_rejected(table):
    with pytest.raises(ValueError, match="unknown property kind"):
        interpolate_property(table, "viscosity", 100.0)


def test_validate_default_table_clean(table):
    assert validate_table(table) == []


def test_validate_duplicate_temperature():
    bad = MaterialTable(
        conductivity_points=((25.0, 0.01), (25.0, 0.012)),
        expansion_points=((20.0, 1e-5), (100.0, 1.1e-5)),
        specific_heat_points=((25.0, 0.4), (100.0, 0.5)),
        density=8.44e-3,
    )
    report = validate_table(bad)
    assert any("non-increasing temperature at index 1" in line for line in report)


def test_validate_negative_specific_heat():
    bad = MaterialTable(
        conductivity_points=((25.0, 0.01), (100.0, 0.012)),
        expansion_points=((20.0, 1e-5), (100.0, 1.1e-5)),
        specific_heat_points=((25.0, -0.4), (100.0, 0.5)),
        density=8.44e-3,
    )
    report = validate_table(bad)
    assert any("non-positive value" in line for line in report)


def test_validate_short_list():
    bad = MaterialTable(
        conductivity_points=((25.0, 0.01),),
        expansion_points=((20.0, 1e-5), (100.0, 1.1e-5)),
        specific_heat_points=((25.0, 0.4), (100.0, 0.5)),
        density=8.44e-3,
    )
    assert any("fewer than 2 points" in line for line in validate_table(bad))


def test_process_defaults_match_reference_values():
    p = ProcessParams()
    assert p.scan_speed == 1200.0
    assert p.laser_radius == 0.05
    assert p.power == 195.0
    assert p.absorptivity == 0.4
    assert p.substrate_temperature == 80.0
    assert p.ambient_temperature == 25.0
    assert p.effective_htc == 2.5e-5  # 25 W/m^2/degC in mm units
    assert p.plate_thickness == 0.02


def test_process_rejects_bad_absorptivity():
    with pytest.raises(ValueError, match="absorptivity"):
        ProcessParams(absorptivity=1.5)


def test_process_rejects_negative_temperature():
    with pytest.raises(ValueError, match="temperatures"):
        ProcessParams(ambient_temperature=-5.0)


def test_process_allows_insulated_configuration():
    p = ProcessParams(effective_htc=0.0, substrate_htc=0.0)
    assert p.effective_htc == 0.0
