"""
Physical constants, unit conventions and validated gas-state types.

Internal units: time ns, energy keV, length cm, pressure atm. Constants keep
the units in which the formulas using them are written (MeV·fm for hbar*c,
eV·s for hbar) and every consumer converts explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from types import MappingProxyType
from typing import Mapping

FM_TO_CM = 1e-13
MEV_TO_EV = 1e6
MEV_TO_KEV = 1e3
PS_TO_NS = 1e-3
S_TO_NS = 1e9
PER_US_TO_PER_NS = 1e-3

# Renormalization tolerance for user-entered isotope fractions.
FRACTION_SUM_TOLERANCE = 1e-3


class ValidationError(ValueError):
    """A value violates a documented bound. ``field`` names the offender."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class DomainError(ValueError):
    """An estimate was requested outside the domain of its formula."""


def require_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ValidationError(name, f"{name.rsplit('.', 1)[-1]} must be > 0 (got {value!r})")
    return value


def require_unit_interval(name: str, value: float, *, open_low: bool = False) -> float:
    value = float(value)
    low_ok = value > 0 if open_low else value >= 0
    if not (low_ok and value <= 1):
        bound = "(0, 1]" if open_low else "[0, 1]"
        raise ValidationError(name, f"{name.rsplit('.', 1)[-1]} must be in {bound} (got {value!r})")
    return value


@dataclass(frozen=True)
class PhysicalConstants:
    """Numeric anchors shared by the closed-form estimates and the simulator.

    Units: ``alpha`` dimensionless, ``hbar_c`` MeV·fm, ``electron_mass_energy``
    MeV, ``hbar`` eV·s, ``loschmidt_density`` cm^-3 atm^-1, ``lambda_T_theor``
    and its uncertainty us^-1, ``tau_T`` ns, ``tau_S`` ps, ``tau_star`` ps,
    ``hyperfine_energy_3_7`` eV.
    """

    name: str
    alpha: float
    hbar_c: float
    electron_mass_energy: float
    hbar: float
    loschmidt_density: float
    lambda_T_theor: float
    lambda_T_theor_sigma: float
    tau_T: float
    tau_S: float
    tau_star: float
    hyperfine_energy_3_7: float

    def __post_init__(self):
        for f in fields(self):
            if f.name == "name":
                continue
            require_positive(f"constants.{f.name}", getattr(self, f.name))
        product = self.lambda_T_theor * PER_US_TO_PER_NS * self.tau_T
        if abs(product - 1.0) > 0.02:
            raise ValidationError(
                "constants.tau_T",
                f"lambda_T_theor * tau_T = {product:.4f}, expected 1 within 2%",
            )

    @property
    def rate_ortho(self) -> float:
        """Theoretical o-Ps rate in ns^-1."""
        return self.lambda_T_theor * PER_US_TO_PER_NS

    @property
    def rate_para(self) -> float:
        """p-Ps rate in ns^-1."""
        return 1.0 / (self.tau_S * PS_TO_NS)

    @property
    def electron_mass_kev(self) -> float:
        return self.electron_mass_energy * MEV_TO_KEV


# Values as printed or implied by the rounded arithmetic of the source text.
PAPER = PhysicalConstants(
    name="paper",
    alpha=1.0 / 137.036,
    hbar_c=197.327,
    electron_mass_energy=0.511,
    hbar=6.582e-16,
    loschmidt_density=2.7e19,
    lambda_T_theor=7.03830,
    lambda_T_theor_sigma=0.00005,
    tau_T=140.0,
    tau_S=125.0,
    tau_star=5.24,
    hyperfine_energy_3_7=3.6e-4,
)

# CODATA 2018. Ps ground-state hyperfine interval 203.389 GHz -> 8.4116e-4 eV.
_H_EV_S = 4.135667696e-15
_PS_HFS_HZ = 203.38910e9
CODATA = PhysicalConstants(
    name="codata",
    alpha=7.2973525693e-3,
    hbar_c=197.3269804,
    electron_mass_energy=0.51099895000,
    hbar=6.582119569e-16,
    loschmidt_density=2.686780111e19,
    lambda_T_theor=7.03830,
    lambda_T_theor_sigma=0.00005,
    tau_T=1e3 / 7.03830,
    tau_S=125.0,
    tau_star=5.24,
    hyperfine_energy_3_7=3.0 / 7.0 * _H_EV_S * _PS_HFS_HZ,
)

PROFILES: Mapping[str, PhysicalConstants] = MappingProxyType({"paper": PAPER, "codata": CODATA})


def get_constants(profile: str = "paper") -> PhysicalConstants:
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValidationError("profile", f"unknown constants profile {profile!r}; "
                                         f"choose from {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class IsotopeMix:
    """Number fractions keyed by isotope label.

    Fractions whose sum is within ``FRACTION_SUM_TOLERANCE`` of one are
    renormalized; anything further off is rejected.
    """

    fractions: Mapping[str, float]

    def __post_init__(self):
        if not self.fractions:
            raise ValidationError("gas.fractions", "at least one isotope is required")
        clean = {}
        for label, value in self.fractions.items():
            clean[str(label)] = require_unit_interval(f"gas.fractions.{label}", value)
        total = math.fsum(clean.values())
        if abs(total - 1.0) > FRACTION_SUM_TOLERANCE:
            raise ValidationError("gas.fractions", f"fractions must sum to 1 (got {total:.6g})")
        normalized = {k: v / total for k, v in clean.items()}
        object.__setattr__(self, "fractions", MappingProxyType(normalized))

    def fraction(self, label: str) -> float:
        try:
            return self.fractions[label]
        except KeyError:
            raise ValidationError("gas.resonant_isotope",
                                  f"isotope {label!r} not in mix {sorted(self.fractions)}") from None

    def __hash__(self):
        return hash(tuple(sorted(self.fractions.items())))

    def __eq__(self, other):
        if not isinstance(other, IsotopeMix):
            return NotImplemented
        return dict(self.fractions) == dict(other.fractions)


NATURAL_NEON = {"Ne-20": 0.907, "Ne-21": 0.003, "Ne-22": 0.090}


@dataclass(frozen=True)
class GasState:
    """Gas filling of the measuring chamber (pressure in atm, radius in cm)."""

    pressure: float = 50.0
    chamber_radius: float = 2.0
    mix: IsotopeMix = field(default_factory=lambda: IsotopeMix(NATURAL_NEON))
    resonant_isotope: str = "Ne-22"

    def __post_init__(self):
        require_positive("gas.pressure", self.pressure)
        require_positive("gas.chamber_radius", self.chamber_radius)
        if not isinstance(self.mix, IsotopeMix):
            object.__setattr__(self, "mix", IsotopeMix(self.mix))
        self.mix.fraction(self.resonant_isotope)

    @property
    def eta(self) -> float:
        """Share of the resonant isotope."""
        return self.mix.fraction(self.resonant_isotope)

    def with_pressure(self, pressure: float) -> "GasState":
        return replace(self, pressure=pressure)


def number_density(state: GasState, constants: PhysicalConstants = PAPER) -> float:
    """Total atom density in cm^-3; temperature is not modeled."""
    return constants.loschmidt_density * state.pressure


def isotope_density(state: GasState, label: str | None = None,
                    constants: PhysicalConstants = PAPER) -> float:
    label = state.resonant_isotope if label is None else label
    return number_density(state, constants) * state.mix.fraction(label)


def gas_volume(state: GasState) -> float:
    """Chamber volume in cm^3, ``4/3 pi R^3``."""
    return 4.0 / 3.0 * math.pi * state.chamber_radius ** 3
