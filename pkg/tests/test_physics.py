"""Closed-form model checks against hand-computed values.

Every expected number here is recomputed in the test body with the math
module, independent of the library implementation.
"""

import math

import numpy as np
import pytest

from echemfsl.config import ConfigError
from echemfsl.physics import (
    F,
    FRACTION_HI,
    FRACTION_LO,
    I_MAX_PUMP,
    R,
    CellDesign,
    Mode,
    PhysicsParams,
    cell_voltage,
    co_coverage,
    conductivity,
    current_fractions,
    exchange_current_anode,
    exchange_current_cathode,
    limiting_current,
    overpotentials,
    reversible_voltage,
    sample_curve,
)


def fc_design(**over):
    base = dict(
        s_h2=1.5, s_o2=2.5, temperature=463.15, pressure=1.5,
        iec_mem=2.25, iec_io=2.25, delta_mem=0.005, delta_io=1e-4,
        co_h2_ratio=0.05, load_anode=0.35, load_cathode=0.35,
        mode=Mode.FUEL_CELL,
    )
    base.update(over)
    return CellDesign(**base)


def pump_design(**over):
    base = dict(
        s_h2=1.5, s_o2=0.0, temperature=463.15, pressure=1.5,
        iec_mem=2.25, iec_io=2.25, delta_mem=0.005, delta_io=1e-4,
        co_h2_ratio=0.05, load_anode=0.35, load_cathode=0.35,
        mode=Mode.HYDROGEN_PUMP,
    )
    base.update(over)
    return CellDesign(**base)


# ---------------------------------------------------------------- constants

def test_default_params_pinned():
    p = PhysicsParams()
    assert p.alpha_an == 0.5 and p.alpha_cat == 0.5
    assert p.i0_ref_an == 0.1 and p.i0_ref_cat == 1e-4
    assert p.ea_act == 40e3 and p.ea_cond == 15e3
    assert p.sigma0 == 0.03 and p.t_ref == 433.15
    assert p.i_l0 == 2.0 and p.k_co == 1e-3 and p.dh_co == -50e3
    assert p.r_contact == 0.02
    assert R == pytest.approx(8.314462618, abs=0) and F == pytest.approx(96485.33212, abs=0)


# ------------------------------------------------------- reversible voltage

def test_reversible_voltage_standard_state():
    d = fc_design(temperature=298.15, pressure=1.0)
    # both correction terms vanish at 298.15 K, 1 atm
    assert reversible_voltage(d) == pytest.approx(1.229, abs=1e-12)


def test_reversible_voltage_hand_value():
    t, p = 473.15, 2.0
    expected = 1.229 - 0.9e-3 * (t - 298.15) + (R * t / (2 * F)) * math.log(p * math.sqrt(p))
    d = fc_design(temperature=t, pressure=p)
    assert reversible_voltage(d) == pytest.approx(expected, rel=1e-14)


def test_reversible_voltage_rejects_pump():
    with pytest.raises(ValueError):
        reversible_voltage(pump_design())


# ------------------------------------------------------------- CO coverage

def test_co_coverage_hand_value():
    t, x = 433.15, 0.05
    params = PhysicsParams()
    k = 1e-3 * math.exp(50e3 / (R * t))
    expected = k * x / (1 + k * x)
    assert co_coverage(x, t, params) == pytest.approx(expected, rel=1e-14)


def test_co_coverage_bounds_and_monotonicity():
    params = PhysicsParams()
    xs = np.linspace(0.0, 0.1, 21)
    for t in (423.15, 463.15, 503.15):
        thetas = np.array([co_coverage(x, t, params) for x in xs])
        assert np.all((thetas >= 0.0) & (thetas < 1.0))
        assert np.all(np.diff(thetas) > 0.0)  # more CO, more coverage
    # hotter surface sheds CO
    hot = co_coverage(0.05, 503.15, params)
    cold = co_coverage(0.05, 423.15, params)
    assert hot < cold
    assert co_coverage(0.0, 463.15, params) == 0.0


# -------------------------------------------------------- exchange currents

def test_exchange_currents_hand_values():
    d = fc_design()
    params = PhysicsParams()
    arr = math.exp(-40e3 / R * (1 / d.temperature - 1 / 433.15))
    theta = co_coverage(d.co_h2_ratio, d.temperature, params)
    assert exchange_current_anode(d, params) == pytest.approx(
        0.1 * 0.35 * (1 - theta) * arr, rel=1e-14)
    assert exchange_current_cathode(d, params) == pytest.approx(
        1e-4 * 0.35 * arr, rel=1e-14)


# ---------------------------------------------------- conduction and ohmics

def test_conductivity_hand_value():
    t = 473.15
    expected = 0.03 * 2.25 * math.exp(-15e3 / R * (1 / t - 1 / 433.15))
    assert conductivity(2.25, t, PhysicsParams()) == pytest.approx(expected, rel=1e-14)


def test_conductivity_requires_positive_iec():
    with pytest.raises(ValueError):
        conductivity(0.0, 463.15, PhysicsParams())


def test_ohmic_drops_missing_ionomer_film():
    params = PhysicsParams()
    d_full = fc_design()
    d_no_io = fc_design(iec_io=0.0)
    t = d_full.temperature
    sig = 0.03 * 2.25 * math.exp(-15e3 / R * (1 / t - 1 / 433.15))
    full = 0.005 / sig + 1e-4 / sig + 0.02
    no_io = 0.005 / sig + 0.02
    i = 0.7
    assert overpotentials(d_full, i, params).ohmic == pytest.approx(i * full, rel=1e-13)
    assert overpotentials(d_no_io, i, params).ohmic == pytest.approx(i * no_io, rel=1e-13)


# -------------------------------------------------------- limiting current

def test_limiting_current_hand_value():
    d = fc_design(s_h2=2.0, s_o2=2.5, pressure=1.5)
    # min(s_h2, s_o2) governs; 2.0 * 1.5 * 2.0
    assert limiting_current(d, PhysicsParams()) == pytest.approx(6.0, rel=1e-14)


def test_limiting_current_floor():
    d = fc_design(s_h2=1.0, s_o2=2.0, pressure=0.3)
    # 2.0 * 0.3 * 1.0 = 0.6 would undercut the floor 0.5 * i_l0
    assert limiting_current(d, PhysicsParams()) == pytest.approx(1.0, rel=1e-14)


def test_limiting_current_increases_with_pressure():
    lo = limiting_current(fc_design(pressure=1.0), PhysicsParams())
    hi = limiting_current(fc_design(pressure=2.0), PhysicsParams())
    assert hi > lo


def test_limiting_current_rejects_pump():
    with pytest.raises(ValueError):
        limiting_current(pump_design(), PhysicsParams())


# --------------------------------------------------------- overpotentials

def test_activation_overpotential_asinh_form():
    d = fc_design(co_h2_ratio=0.0)
    params = PhysicsParams()
    i = 0.5
    arr = math.exp(-40e3 / R * (1 / d.temperature - 1 / 433.15))
    i0_an = 0.1 * 0.35 * arr
    i0_cat = 1e-4 * 0.35 * arr
    expected_an = (R * d.temperature / (0.5 * F)) * math.asinh(i / (2 * i0_an))
    expected_cat = (R * d.temperature / (0.5 * F)) * math.asinh(i / (2 * i0_cat))
    eta = overpotentials(d, i, params)
    assert eta.activation_anode == pytest.approx(expected_an, rel=1e-14)
    assert eta.activation_cathode == pytest.approx(expected_cat, rel=1e-14)


def test_concentration_overpotential_hand_value():
    d = fc_design()
    params = PhysicsParams()
    i_l = limiting_current(d, params)
    i = 0.9 * i_l
    expected = (R * d.temperature / (2 * F)) * abs(math.log(1 - i / i_l))
    assert overpotentials(d, i, params).concentration == pytest.approx(expected, rel=1e-13)


def test_overpotentials_all_nonnegative_at_zero():
    eta = overpotentials(fc_design(), 0.0, PhysicsParams())
    assert eta.activation_anode == 0.0
    assert eta.activation_cathode == 0.0
    assert eta.ohmic == 0.0
    assert eta.concentration == 0.0


def test_current_at_or_beyond_limit_rejected():
    d = fc_design()
    params = PhysicsParams()
    i_l = limiting_current(d, params)
    with pytest.raises(ValueError):
        overpotentials(d, i_l, params)
    with pytest.raises(ValueError):
        cell_voltage(d, np.array([0.1, i_l * 1.01]), params)


def test_vectorized_matches_scalar_bitwise():
    d = fc_design()
    params = PhysicsParams()
    grid = np.linspace(0.0, 2.0, 9)
    vec = cell_voltage(d, grid, params)
    scalars = np.array([cell_voltage(d, float(i), params) for i in grid])
    assert np.array_equal(vec, scalars)


# ------------------------------------------------------------ cell voltage

def test_fuel_cell_voltage_composition():
    d = fc_design()
    params = PhysicsParams()
    i = 0.8
    eta = overpotentials(d, i, params)
    expected = (reversible_voltage(d) - eta.activation_anode
                - eta.activation_cathode - eta.ohmic - eta.concentration)
    assert cell_voltage(d, i, params) == pytest.approx(expected, rel=1e-14)


def test_fuel_cell_voltage_fully_hand_computed():
    # every term rebuilt from scratch at one operating point
    d = fc_design(co_h2_ratio=0.0, s_h2=2.0, s_o2=3.0, temperature=433.15,
                  pressure=1.0)
    params = PhysicsParams()
    i = 1.0
    e_rev = 1.229 - 0.9e-3 * (433.15 - 298.15)  # ln(1) = 0
    i0_an = 0.1 * 0.35  # arrhenius factor is 1 at t_ref
    i0_cat = 1e-4 * 0.35
    rt_af = R * 433.15 / (0.5 * F)
    eta_an = rt_af * math.asinh(i / (2 * i0_an))
    eta_cat = rt_af * math.asinh(i / (2 * i0_cat))
    sig = 0.03 * 2.25
    eta_ohm = i * (0.005 / sig + 1e-4 / sig + 0.02)
    i_l = 2.0 * 1.0 * 2.0
    eta_conc = (R * 433.15 / (2 * F)) * abs(math.log(1 - i / i_l))
    expected = e_rev - eta_an - eta_cat - eta_ohm - eta_conc
    assert cell_voltage(d, i, params) == pytest.approx(expected, rel=1e-13)


def test_fuel_cell_voltage_strictly_decreasing():
    rng = np.random.default_rng(7)
    params = PhysicsParams()
    for _ in range(50):
        d = fc_design(
            s_h2=rng.uniform(1.0, 2.0), s_o2=rng.uniform(2.0, 3.0),
            temperature=rng.uniform(423.0, 503.0),
            pressure=rng.uniform(1.0, 2.0),
            iec_mem=rng.uniform(1.5, 3.0), iec_io=rng.uniform(1.5, 3.0),
            delta_mem=rng.uniform(0.001, 0.01),
            delta_io=rng.uniform(5e-5, 2e-4),
            co_h2_ratio=rng.uniform(0.0, 0.1),
            load_anode=rng.uniform(0.1, 0.6),
            load_cathode=rng.uniform(0.1, 0.6),
        )
        grid = np.linspace(0.0, 0.95 * limiting_current(d, params), 40)
        v = cell_voltage(d, grid, params)
        assert np.all(np.diff(v) < 0.0)


def test_pump_voltage_zero_at_rest_and_increasing():
    d = pump_design()
    params = PhysicsParams()
    assert cell_voltage(d, 0.0, params) == 0.0
    grid = np.linspace(0.0, I_MAX_PUMP, 30)
    v = cell_voltage(d, grid, params)
    assert np.all(np.diff(v) > 0.0)


def test_pump_voltage_composition():
    d = pump_design()
    params = PhysicsParams()
    i = 1.0
    eta = overpotentials(d, i, params)
    assert eta.concentration == 0.0  # no oxygen feed to starve
    expected = eta.activation_anode + eta.activation_cathode + eta.ohmic
    assert cell_voltage(d, i, params) == pytest.approx(expected, rel=1e-14)


# ------------------------------------------------------------ curve sampling

def test_current_fractions_exact():
    f5 = current_fractions(5)
    assert f5[0] == 0.05 and f5[-1] == 0.85  # endpoints pinned exactly
    assert f5 == pytest.approx([0.05, 0.25, 0.45, 0.65, 0.85], abs=1e-15)
    assert np.array_equal(current_fractions(2), np.array([0.05, 0.85]))
    assert current_fractions(3)[1] == pytest.approx(0.45, abs=1e-15)
    with pytest.raises(ValueError):
        current_fractions(1)
    assert FRACTION_LO == 0.05 and FRACTION_HI == 0.85


def test_sample_curve_fuel_cell_grid():
    d = fc_design()
    params = PhysicsParams()
    pts = sample_curve(d, 5, params)
    i_l = limiting_current(d, params)
    currents = [p.current_density for p in pts]
    assert currents == pytest.approx([f * i_l for f in (0.05, 0.25, 0.45, 0.65, 0.85)],
                                     rel=1e-15)
    for p in pts:
        assert p.voltage == pytest.approx(cell_voltage(d, p.current_density, params),
                                          rel=1e-15)


def test_sample_curve_pump_grid():
    pts = sample_curve(pump_design(), 5, PhysicsParams())
    currents = [p.current_density for p in pts]
    assert currents == pytest.approx([f * I_MAX_PUMP for f in (0.05, 0.25, 0.45, 0.65, 0.85)],
                                     rel=1e-15)


# ---------------------------------------------------------------- validation

@pytest.mark.parametrize("bad", [
    dict(s_h2=0.5),
    dict(s_o2=0.5),                      # fuel cell needs oxygen
    dict(temperature=0.0),
    dict(pressure=0.0),
    dict(iec_mem=-1.0),
    dict(delta_mem=0.0),
    dict(co_h2_ratio=1.0),
    dict(load_anode=0.0),
    dict(load_cathode=-0.1),
])
def test_design_validation_rejects(bad):
    with pytest.raises(ValueError):
        fc_design(**bad)


def test_pump_design_allows_zero_oxygen():
    assert pump_design(s_o2=0.0).s_o2 == 0.0


def test_mode_from_string():
    assert Mode.from_string("fuelcell") is Mode.FUEL_CELL
    assert Mode.from_string("pump") is Mode.HYDROGEN_PUMP
    with pytest.raises(ValueError):
        Mode.from_string("electrolyzer")


def test_params_from_config(tmp_path):
    path = tmp_path / "params.conf"
    path.write_text("sigma0 = 0.05\nr_contact = 0.03\n")
    p = PhysicsParams.from_config(path)
    assert p.sigma0 == 0.05 and p.r_contact == 0.03
    assert p.ea_act == 40e3  # untouched default

    bad = tmp_path / "bad.conf"
    bad.write_text("sigma_zero = 0.05\n")
    with pytest.raises(ConfigError):
        PhysicsParams.from_config(bad)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicsParams(alpha_an=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(t_ref=-1.0)


def test_overpotentials_frozen():
    eta = overpotentials(fc_design(), 0.5, PhysicsParams())
    with pytest.raises(AttributeError):
        eta.ohmic = 0.0
