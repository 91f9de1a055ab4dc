"""Closed-form polarization model for HT-PEM electrochemical cells.

Cell voltage as an explicit function of cell design and current density,
for fuel-cell (galvanic) and hydrogen-pump (electrolytic) operation:

    fuel cell:      V(i) = E_rev - eta_act_an - eta_act_cat - eta_ohm - eta_conc
    hydrogen pump:  V(i) = eta_act_an + eta_act_cat + eta_ohm

Activation terms use the symmetric Butler-Volmer inverse (asinh), the ohmic
term sums membrane film, binder film, and contact resistances, and the
concentration term diverges at the limiting current.  Anode kinetics are
scaled by the fraction of catalyst sites left free by CO adsorption
(Langmuir isotherm), which recovers with temperature.

All functions are pure; ``current_density`` arguments may be scalars or
numpy arrays (broadcast over the current axis for one fixed design).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .config import ConfigError, read_kv_file

R = 8.314462618  # J/(mol K)
F = 96485.33212  # C/mol

#: Current-density sampling range for hydrogen-pump curves, A/cm^2.
I_MAX_PUMP = 2.0

#: Sampled fractions span this band of the usable current range.
FRACTION_LO = 0.05
FRACTION_HI = 0.85


class Mode(enum.Enum):
    """Device operating mode."""

    FUEL_CELL = "fuelcell"
    HYDROGEN_PUMP = "pump"

    @classmethod
    def from_string(cls, text: str) -> "Mode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {text!r}: expected 'fuelcell' or 'pump'"
            ) from None


@dataclass(frozen=True)
class CellDesign:
    """One point in design space: the 11 factorial variables plus mode.

    Units: temperature K, pressure atm, ion-exchange capacities mequiv/g,
    thicknesses cm, catalyst loadings mg_PGM/cm^2.  ``s_o2 = 0`` and
    ``iec = 0`` encode "not applicable"; a zero IEC drops the matching
    film-resistance term.
    """

    s_h2: float
    s_o2: float
    temperature: float
    pressure: float
    iec_mem: float
    iec_io: float
    delta_mem: float
    delta_io: float
    co_h2_ratio: float
    load_anode: float
    load_cathode: float
    mode: Mode = Mode.FUEL_CELL

    def __post_init__(self) -> None:
        if not self.s_h2 >= 1.0:
            raise ValueError(f"s_h2 must be >= 1, got {self.s_h2}")
        if not self.s_o2 >= 0.0:
            raise ValueError(f"s_o2 must be >= 0, got {self.s_o2}")
        if self.mode is Mode.FUEL_CELL and self.s_o2 < 1.0:
            raise ValueError(
                f"fuel-cell mode requires s_o2 >= 1, got {self.s_o2}"
            )
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be > 0 K, got {self.temperature}")
        if not self.pressure > 0.0:
            raise ValueError(f"pressure must be > 0 atm, got {self.pressure}")
        if self.iec_mem < 0.0 or self.iec_io < 0.0:
            raise ValueError("ion-exchange capacities must be >= 0")
        if not self.delta_mem > 0.0:
            raise ValueError(f"delta_mem must be > 0 cm, got {self.delta_mem}")
        if self.delta_io < 0.0:
            raise ValueError(f"delta_io must be >= 0 cm, got {self.delta_io}")
        if not 0.0 <= self.co_h2_ratio < 1.0:
            raise ValueError(
                f"co_h2_ratio must lie in [0, 1), got {self.co_h2_ratio}"
            )
        if not (self.load_anode > 0.0 and self.load_cathode > 0.0):
            raise ValueError("catalyst loadings must be > 0")


@dataclass(frozen=True)
class PhysicsParams:
    """Fixed constants of the explicit-equation model.

    Defaults give open-circuit voltages around 1.0-1.15 V and usable
    current ranges of a few A/cm^2 across the factorial design box.
    """

    alpha_an: float = 0.5          # anodic charge-transfer coefficient
    alpha_cat: float = 0.5         # cathodic charge-transfer coefficient
    i0_ref_an: float = 0.1         # A/cm^2 per mg_PGM/cm^2 at t_ref
    i0_ref_cat: float = 1e-4       # A/cm^2 per mg_PGM/cm^2 at t_ref
    ea_act: float = 40e3           # J/mol, kinetics activation energy
    sigma0: float = 0.03           # S/cm per mequiv/g
    ea_cond: float = 15e3          # J/mol, conduction activation energy
    t_ref: float = 433.15          # K
    i_l0: float = 2.0              # A/cm^2, base limiting current
    k_co: float = 1e-3             # CO adsorption equilibrium prefactor
    dh_co: float = -50e3           # J/mol, CO adsorption enthalpy (< 0)
    r_contact: float = 0.02        # ohm cm^2

    def __post_init__(self) -> None:
        for name in ("i0_ref_an", "i0_ref_cat", "sigma0", "i_l0", "k_co"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        for name in ("alpha_an", "alpha_cat"):
            if not 0.0 < getattr(self, name) <= 2.0:
                raise ValueError(f"{name} must lie in (0, 2]")
        if not self.dh_co < 0.0:
            raise ValueError("dh_co must be < 0 (adsorption is exothermic)")
        if not (self.t_ref > 0.0 and self.r_contact >= 0.0):
            raise ValueError("t_ref must be > 0 and r_contact >= 0")

    @classmethod
    def from_config(cls, path) -> "PhysicsParams":
        """Read parameters from a flat ``name = value`` file.

        Keys not present keep their defaults; unknown keys are rejected.
        """
        raw = read_kv_file(path)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown physics parameter(s): {unknown}")
        try:
            values = {k: float(v) for k, v in raw.items()}
        except ValueError as exc:
            raise ConfigError(f"{path}: non-numeric parameter value ({exc})") from None
        return replace(cls(), **values)


@dataclass(frozen=True)
class PolarizationPoint:
    """One (current density, voltage) pair of a polarization curve."""

    current_density: float  # A/cm^2
    voltage: float          # V

    def __post_init__(self) -> None:
        if self.current_density < 0.0:
            raise ValueError("current_density must be >= 0")
        if not math.isfinite(self.voltage):
            raise ValueError("voltage must be finite")


@dataclass(frozen=True)
class Overpotentials:
    """Loss terms of one voltage evaluation, each >= 0 for i >= 0."""

    activation_anode: float | np.ndarray
    activation_cathode: float | np.ndarray
    ohmic: float | np.ndarray
    concentration: float | np.ndarray


def reversible_voltage(design: CellDesign) -> float:
    """Nernst open-circuit potential of the hydrogen/oxygen couple, V.

    Gas partial pressures are taken equal to total pressure (pure H2 and
    pure O2 feeds, relative to the 1 atm standard state).
    """
    if design.mode is Mode.HYDROGEN_PUMP:
        raise ValueError("hydrogen pump has no oxygen electrode")
    t = design.temperature
    p = design.pressure
    return 1.229 - 0.9e-3 * (t - 298.15) + (R * t / (2.0 * F)) * math.log(p * p**0.5)


def co_coverage(co_h2_ratio: float, temperature: float, params: PhysicsParams) -> float:
    """Fraction of anode sites blocked by adsorbed CO (Langmuir isotherm).

    Lies in [0, 1); increases with CO content, decreases with temperature.
    """
    if not 0.0 <= co_h2_ratio < 1.0:
        raise ValueError(f"co_h2_ratio must lie in [0, 1), got {co_h2_ratio}")
    k = params.k_co * math.exp(-params.dh_co / (R * temperature))
    kx = k * co_h2_ratio
    return kx / (1.0 + kx)


def limiting_current(design: CellDesign, params: PhysicsParams) -> float:
    """Mass-transport limiting current density, A/cm^2 (fuel cell only).

    Linear in pressure, capped below at half the base value.
    """
    if design.mode is Mode.HYDROGEN_PUMP:
        raise ValueError("limiting current is undefined for hydrogen-pump mode")
    i_l = params.i_l0 * design.pressure * min(design.s_h2, design.s_o2 / 2.0 * 2.0)
    return max(i_l, 0.5 * params.i_l0)


def _arrhenius(t: float, ea: float, t_ref: float) -> float:
    return math.exp(-ea / R * (1.0 / t - 1.0 / t_ref))


def exchange_current_anode(design: CellDesign, params: PhysicsParams) -> float:
    """Anode exchange current density, A/cm^2, after CO site blocking."""
    theta = co_coverage(design.co_h2_ratio, design.temperature, params)
    return (
        params.i0_ref_an
        * design.load_anode
        * (1.0 - theta)
        * _arrhenius(design.temperature, params.ea_act, params.t_ref)
    )


def exchange_current_cathode(design: CellDesign, params: PhysicsParams) -> float:
    """Cathode exchange current density, A/cm^2."""
    return (
        params.i0_ref_cat
        * design.load_cathode
        * _arrhenius(design.temperature, params.ea_act, params.t_ref)
    )


def conductivity(iec: float, temperature: float, params: PhysicsParams) -> float:
    """Ionic conductivity of a film with the given ion-exchange capacity, S/cm."""
    if not iec > 0.0:
        raise ValueError("conductivity requires iec > 0; zero IEC drops the term")
    return params.sigma0 * iec * _arrhenius(temperature, params.ea_cond, params.t_ref)


def area_resistance(design: CellDesign, params: PhysicsParams) -> float:
    """Total area-specific ohmic resistance, ohm cm^2.

    Films whose IEC is recorded as 0 ("not applicable") contribute nothing.
    """
    r = params.r_contact
    if design.iec_mem > 0.0:
        r += design.delta_mem / conductivity(design.iec_mem, design.temperature, params)
    if design.iec_io > 0.0 and design.delta_io > 0.0:
        r += design.delta_io / conductivity(design.iec_io, design.temperature, params)
    return r


def _check_current(i):
    arr = np.asarray(i, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError(f"current density must be finite and >= 0, got {i!r}")
    return arr


def overpotentials(design: CellDesign, i, params: PhysicsParams) -> Overpotentials:
    """All loss terms at current density ``i`` (scalar or array)."""
    arr = _check_current(i)
    t = design.temperature
    eta_an = (R * t / (params.alpha_an * F)) * np.arcsinh(
        arr / (2.0 * exchange_current_anode(design, params))
    )
    eta_cat = (R * t / (params.alpha_cat * F)) * np.arcsinh(
        arr / (2.0 * exchange_current_cathode(design, params))
    )
    eta_ohm = arr * area_resistance(design, params)
    if design.mode is Mode.FUEL_CELL:
        i_l = limiting_current(design, params)
        if np.any(arr >= i_l):
            raise ValueError(
                f"current density {np.max(arr):g} A/cm^2 reaches the limiting "
                f"current {i_l:g} A/cm^2"
            )
        eta_conc = (R * t / (2.0 * F)) * np.abs(np.log(1.0 - arr / i_l))
    else:
        eta_conc = np.zeros_like(arr)
    if arr.ndim == 0:
        return Overpotentials(
            float(eta_an), float(eta_cat), float(eta_ohm), float(eta_conc)
        )
    return Overpotentials(eta_an, eta_cat, eta_ohm, eta_conc)


def cell_voltage(design: CellDesign, i, params: PhysicsParams):
    """Cell voltage at current density ``i`` (A/cm^2), scalar or array.

    Fuel cell: reversible voltage minus all losses, valid on [0, i_L).
    Hydrogen pump: applied voltage equals the sum of losses (equal-pressure
    feeds, so there is no Nernst compression term).
    """
    eta = overpotentials(design, i, params)
    losses = eta.activation_anode + eta.activation_cathode + eta.ohmic
    if design.mode is Mode.FUEL_CELL:
        v = reversible_voltage(design) - losses - eta.concentration
    else:
        v = losses
    if np.ndim(v) == 0:
        return float(v)
    return v


def current_fractions(n_points: int) -> np.ndarray:
    """Evenly spaced sampling fractions of the usable current range.

    For the default five points this is {0.05, 0.25, 0.45, 0.65, 0.85}.
    """
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    return np.linspace(FRACTION_LO, FRACTION_HI, n_points)


def sample_curve(
    design: CellDesign, n_points: int, params: PhysicsParams
) -> list[PolarizationPoint]:
    """Sample one polarization curve at the standard current fractions.

    Fractions scale the limiting current (fuel cell) or the fixed pump
    range ``I_MAX_PUMP``; points come back ordered by increasing current.
    """
    fractions = current_fractions(n_points)
    if design.mode is Mode.FUEL_CELL:
        i_max = limiting_current(design, params)
    else:
        i_max = I_MAX_PUMP
    currents = fractions * i_max
    voltages = cell_voltage(design, currents, params)
    return [
        PolarizationPoint(float(ik), float(vk))
        for ik, vk in zip(currents, voltages)
    ]
