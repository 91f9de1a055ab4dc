"""Synthetic "experimental" targets for desk-scale method replication.

Real few-shot datasets are lab measurements; here the stand-ins come from
the same closed-form generator with deliberately shifted constants, so a
pretrained source model faces a genuine domain gap of known size.  The
shift raises every ohmic contribution by 20%, halves the cathode exchange
current, and steepens the conductivity temperature dependence.

Curves are exact evaluations of the shifted model (no synthetic noise):
determinism keeps every acceptance number reproducible.

Grid conventions mirror lab practice: fuel-cell sweeps concentrate
points in the low-current kinetic region and stop well short of the
limiting current, while pump sweeps step linearly across nearly the full
current range, unconstrained by reactant transport.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dataset import ExperimentalSet
from .physics import (
    CellDesign,
    Mode,
    PhysicsParams,
    PolarizationPoint,
    cell_voltage,
)

FC_CURRENT_SPAN = (0.05, 0.80)
PUMP_CURRENT_SPAN = (0.05, 1.90)

#: Finetuning target: three curves, middle temperature held out.
FC_TEMPS_C = (160.0, 200.0, 220.0)
FC_HOLDOUT_C = 200.0

PUMP_TEMPS_C = (160.0, 180.0, 200.0, 220.0)
PUMP_HOLDOUT_C = 180.0

#: The dispersion-comparison fuel-cell analogs use the same four
#: temperatures as the pumps so the geometric contrast between the device
#: classes comes from feeds and current sweeps, not temperature coverage.
FAMILY_TEMPS_C = PUMP_TEMPS_C
FAMILY_HOLDOUT_C = 200.0


def perturbed_params(base: PhysicsParams | None = None) -> PhysicsParams:
    """The shifted constants behind every synthetic fuel-cell target."""
    base = base or PhysicsParams()
    return replace(
        base,
        sigma0=base.sigma0 / 1.2,        # +20% film resistance
        r_contact=base.r_contact * 1.2,  # +20% contact resistance
        i0_ref_cat=base.i0_ref_cat * 0.5,
        ea_cond=18e3,                    # steeper conductivity Arrhenius
    )


def _curve(design_base: CellDesign, temps_c, holdout_c: float, currents,
           params: PhysicsParams, set_id: str) -> ExperimentalSet:
    currents = np.asarray(currents, dtype=float)
    points = {}
    for temp_c in temps_c:
        design = replace(design_base, temperature=temp_c + 273.15)
        voltages = cell_voltage(design, currents, params)
        points[temp_c] = tuple(
            PolarizationPoint(float(i), float(v))
            for i, v in zip(currents, voltages)
        )
    return ExperimentalSet(
        id=set_id,
        design_base=replace(design_base, temperature=temps_c[0] + 273.15),
        conditions=tuple(temps_c),
        points=points,
        holdout_condition=holdout_c,
    )


def _fc_design(**overrides) -> CellDesign:
    base = dict(
        s_h2=1.2, s_o2=2.2, temperature=433.15, pressure=1.59,
        iec_mem=7.9, iec_io=8.9, delta_mem=0.005, delta_io=1e-4,
        co_h2_ratio=0.0, load_anode=0.5, load_cathode=0.5,
        mode=Mode.FUEL_CELL,
    )
    base.update(overrides)
    return CellDesign(**base)


def _pump_design(**overrides) -> CellDesign:
    base = dict(
        s_h2=1.0, s_o2=0.0, temperature=433.15, pressure=1.0,
        iec_mem=7.9, iec_io=8.9, delta_mem=0.005, delta_io=1e-4,
        co_h2_ratio=0.0, load_anode=0.5, load_cathode=0.5,
        mode=Mode.HYDROGEN_PUMP,
    )
    base.update(overrides)
    return CellDesign(**base)


def synthetic_fuel_cell_target(n_per_curve: int = 17) -> ExperimentalSet:
    """The canonical shifted-MEA target: 3 temperatures, middle held out."""
    currents = np.linspace(*FC_CURRENT_SPAN, n_per_curve)
    return _curve(_fc_design(), FC_TEMPS_C, FC_HOLDOUT_C, currents,
                  perturbed_params(), "SYN-MEA0")


def synthetic_pump_target(n_per_curve: int = 13) -> ExperimentalSet:
    """Hydrogen-pump target: 4 temperatures, second held out.

    The pump curves come from the unshifted constants; switching the
    device class is already the domain gap for new-task transfer.
    """
    currents = np.linspace(*PUMP_CURRENT_SPAN, n_per_curve)
    return _curve(_pump_design(), PUMP_TEMPS_C, PUMP_HOLDOUT_C, currents,
                  PhysicsParams(), "SYN-ECHP1")


def fuel_cell_family(n_per_curve: int = 17) -> list:
    """Shifted-MEA analogs on high-IEC platforms, kinetic-weighted grids."""
    variants = [
        ("SYN-MEA0A", {}),
        ("SYN-MEA0B", dict(iec_mem=8.9, iec_io=8.3, delta_mem=0.008)),
        ("SYN-MEA0C", dict(pressure=1.0, s_h2=1.5, s_o2=2.0)),
        ("SYN-MEA0D", dict(load_anode=0.6, load_cathode=0.6, delta_mem=0.004)),
    ]
    currents = np.geomspace(*FC_CURRENT_SPAN, n_per_curve)
    params = perturbed_params()
    return [
        _curve(_fc_design(**overrides), FAMILY_TEMPS_C, FAMILY_HOLDOUT_C,
               currents, params, set_id)
        for set_id, overrides in variants
    ]


def pump_family(n_per_curve: int = 13) -> list:
    """Two pump analogs differing in ionomer binder exchange capacity."""
    variants = [
        ("SYN-ECHP1", {}),
        ("SYN-ECHP2", dict(iec_io=2.2)),
    ]
    currents = np.linspace(*PUMP_CURRENT_SPAN, n_per_curve)
    return [
        _curve(_pump_design(**overrides), PUMP_TEMPS_C, PUMP_HOLDOUT_C,
               currents, PhysicsParams(), set_id)
        for set_id, overrides in variants
    ]


def eem_baseline_curve(design: CellDesign, currents,
                       params: PhysicsParams | None = None) -> list:
    """Unshifted-model prediction, the knowledge-based baseline."""
    params = params or PhysicsParams()
    currents = np.asarray(currents, dtype=float)
    voltages = cell_voltage(design, currents, params)
    return [
        PolarizationPoint(float(i), float(v))
        for i, v in zip(currents, np.atleast_1d(voltages))
    ]
