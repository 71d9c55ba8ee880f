"""
Closed-form estimates for the collective resonant nuclear state in neon.

Lengths are in cm, energies in MeV unless the name says otherwise. Every
function is pure; :func:`full_report` composes them into one record with a
provenance label per entry.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .core import (
    FM_TO_CM,
    MEV_TO_EV,
    PAPER,
    DomainError,
    GasState,
    PhysicalConstants,
    gas_volume,
    number_density,
)

N_BAR_DEFAULT = 5.2780e4
GAMMA_ENERGY_NE22 = 1.27  # MeV, 2+ -> 0+ in Ne-22
SPIN_GROUND_NE22 = 0.0
SPIN_EXCITED_NE22 = 2.0
MSD_DEFAULT = (2.5e-13) ** 2  # cm^2; displacement ~ range of nuclear forces
PACKING_PARAMETER = 1.0 / 12.0
BRANCHING_GAMMA_U = 3.5e-8
PRIOR_SINGLE_PHOTON_LIMIT = 4e-6  # "<= 4e-4 %"


def _positive(name, *values):
    for v in values:
        if not v > 0:
            raise DomainError(f"{name} requires positive input (got {v!r})")


def round_sig(x: float, digits: int = 2) -> float:
    """Round to ``digits`` significant figures."""
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


@dataclass(frozen=True)
class CollectiveState:
    n_bar: float
    eta: float
    n: float = field(init=False)

    def __post_init__(self):
        if not self.n_bar > 0:
            raise DomainError(f"n_bar must be > 0 (got {self.n_bar!r})")
        if not 0 < self.eta <= 1:
            raise DomainError(f"eta must be in (0, 1] (got {self.eta!r})")
        object.__setattr__(self, "n", self.n_bar * self.eta)


def collective_size(n_bar: float, eta: float) -> float:
    """Number of resonant nuclei in the collective, ``n_bar * eta``."""
    return CollectiveState(n_bar, eta).n


def lattice_constant_exp(volume: float, n_bar: float) -> float:
    """Cell size from sharing the chamber volume among ``n_bar`` units."""
    _positive("lattice_constant_exp", volume, n_bar)
    return (volume / n_bar) ** (1.0 / 3.0)


@dataclass(frozen=True)
class LatticeConstantTheory:
    from_hyperfine: float
    from_alpha: float

    @property
    def value(self) -> float:
        return self.from_alpha

    @property
    def relative_difference(self) -> float:
        return abs(self.from_hyperfine - self.from_alpha) / self.from_alpha


def lattice_constant_theory(constants: PhysicalConstants = PAPER) -> LatticeConstantTheory:
    """Virtual fundamental length, evaluated in both algebraic forms.

    ``hbar c / (3/7 dW)`` uses the quoted energy shift; ``(4/alpha^4) hbar/(m c)``
    is the closed form in terms of alpha and the electron Compton length.
    """
    hbar_c_cm_ev = constants.hbar_c * MEV_TO_EV * FM_TO_CM
    from_hyperfine = hbar_c_cm_ev / constants.hyperfine_energy_3_7
    compton = constants.hbar_c / constants.electron_mass_energy * FM_TO_CM
    from_alpha = 4.0 / constants.alpha ** 4 * compton
    return LatticeConstantTheory(from_hyperfine, from_alpha)


def virtual_photon_time(constants: PhysicalConstants = PAPER,
                        energy_shift: float | None = None) -> float:
    """``hbar / (3/7 dW)`` in ps. ``energy_shift`` overrides 3/7 dW (eV)."""
    shift = constants.hyperfine_energy_3_7 if energy_shift is None else energy_shift
    _positive("virtual_photon_time", shift)
    return constants.hbar / shift * 1e12


def mcns_radius(n_bar: float, delta: float) -> float:
    """Radius of a sphere holding ``n_bar`` cells of volume ``delta**3``."""
    _positive("mcns_radius", n_bar, delta)
    return (3.0 * n_bar * delta ** 3 / (4.0 * math.pi)) ** (1.0 / 3.0)


def gamma_wavelength(energy: float, constants: PhysicalConstants = PAPER) -> float:
    """Wavelength ``2 pi hbar c / E`` in cm for a quantum of ``energy`` MeV."""
    if not energy > 0:
        raise DomainError(f"gamma energy must be > 0 MeV (got {energy!r})")
    return 2.0 * math.pi * constants.hbar_c / energy * FM_TO_CM


def mossbauer_factor(msd: float, wavelength: float) -> float:
    """Recoil-free fraction ``exp(-4 pi^2 <x^2> / lambda^2)``."""
    if msd < 0:
        raise DomainError(f"mean-square displacement must be >= 0 (got {msd!r})")
    _positive("mossbauer_factor", wavelength)
    return math.exp(-4.0 * math.pi ** 2 * msd / wavelength ** 2)


@dataclass(frozen=True)
class ResonanceParameters:
    gamma_energy: float = GAMMA_ENERGY_NE22
    spin_ground: float = SPIN_GROUND_NE22
    spin_excited: float = SPIN_EXCITED_NE22
    mean_square_displacement: float = MSD_DEFAULT
    constants: PhysicalConstants = PAPER

    def __post_init__(self):
        if self.spin_ground < 0 or self.spin_excited < 0:
            raise DomainError("nuclear spins must be >= 0")
        gamma_wavelength(self.gamma_energy, self.constants)
        if self.mean_square_displacement < 0:
            raise DomainError("mean-square displacement must be >= 0")

    @property
    def wavelength(self) -> float:
        return gamma_wavelength(self.gamma_energy, self.constants)

    @property
    def mossbauer_factor(self) -> float:
        return mossbauer_factor(self.mean_square_displacement, self.wavelength)


def resonant_cross_section(params: ResonanceParameters) -> float:
    """Peak resonant cross-section in cm^2."""
    lam = params.wavelength
    g = (2 * params.spin_excited + 1) / (2 * params.spin_ground + 1)
    return params.mossbauer_factor * lam ** 2 * g / (2.0 * math.pi)


def resonant_mean_free_path(eta: float, nu: float, sigma_r: float) -> float:
    """Mean free path between resonant scatterings, ``1/(eta nu sigma_r)``."""
    _positive("resonant_mean_free_path", eta, nu, sigma_r)
    return 1.0 / (eta * nu * sigma_r)


def macroscopic_cross_section(n: float, sigma_r: float) -> float:
    _positive("macroscopic_cross_section", n)
    return n * sigma_r


@dataclass(frozen=True)
class PackingComparison:
    packing: float
    eta: float
    two_delta: float
    ratio: float


def packing_comparison(eta: float, delta: float, mean_free_path: float) -> PackingComparison:
    """Compare close-packing 1/12 with ``eta`` and the path with ``2 delta``."""
    _positive("packing_comparison", eta, delta, mean_free_path)
    two_delta = 2.0 * delta
    return PackingComparison(PACKING_PARAMETER, eta, two_delta, mean_free_path / two_delta)


def branching_single_gamma(x: float) -> float:
    """Branching of o-Ps -> gamma + U for mass ratio ``x = m_U/m_e``."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"mass ratio must be in [0, 1] (got {x!r})")
    return BRANCHING_GAMMA_U * (1.0 - x ** 4)


def amplified_branching(b_unit: float, n_bar: float) -> float:
    """Incoherent sum of ``b_unit`` over ``n_bar`` units; capped at probability 1."""
    _positive("amplified_branching", n_bar)
    if b_unit < 0:
        raise DomainError(f"branching must be >= 0 (got {b_unit!r})")
    value = b_unit * n_bar
    if value > 1.0:
        raise DomainError(f"amplified branching {value:.3g} exceeds probability 1")
    return value


REPORT_UNITS = {
    "n": "1",
    "delta_exp": "cm",
    "delta_theory": "cm",
    "delta_theory_hyperfine": "cm",
    "delta_forms_relative_difference": "1",
    "delta_carried": "cm",
    "r_c": "cm",
    "wavelength": "cm",
    "mossbauer_factor": "1",
    "sigma_r": "cm^2",
    "sigma_macroscopic": "cm^2",
    "mean_free_path": "cm",
    "branching_unit": "1",
    "branching_amplified": "1",
    "branching_amplified_n": "1",
    "prior_limit_ratio": "1",
    "packing_parameter": "1",
    "eta": "1",
    "two_delta": "cm",
    "path_to_two_delta": "1",
    "virtual_photon_time": "ps",
    "number_density": "cm^-3",
    "gas_volume": "cm^3",
}

REPORT_PROVENANCE = {
    "n": "n_bar * eta",
    "delta_exp": "(V_g / n_bar)^(1/3)",
    "delta_theory": "(4/alpha^4) hbar/(m_e c)",
    "delta_theory_hyperfine": "hbar c / (3/7 dW)",
    "delta_forms_relative_difference": "|two forms| / alpha form",
    "delta_carried": "lattice constant used for r_c, 2 Delta",
    "r_c": "4/3 pi r_c^3 = n_bar Delta^3",
    "wavelength": "2 pi hbar c / E_gamma",
    "mossbauer_factor": "exp(-4 pi^2 <x^2> / lambda^2)",
    "sigma_r": "f_M lambda^2 (2I1+1) / (2 pi (2I0+1))",
    "sigma_macroscopic": "n sigma_r",
    "mean_free_path": "1 / (eta nu sigma_r)",
    "branching_unit": "3.5e-8 (1 - x^4)",
    "branching_amplified": "n_bar * B (incoherent sum)",
    "branching_amplified_n": "n * B (alternative count)",
    "prior_limit_ratio": "B_amp / 4e-6 prior limit",
    "packing_parameter": "close packing 1/12",
    "eta": "resonant isotope share",
    "two_delta": "2 Delta",
    "path_to_two_delta": "l / (2 Delta)",
    "virtual_photon_time": "hbar / (3/7 dW)",
    "number_density": "Loschmidt * p",
    "gas_volume": "4/3 pi R_g^3",
}


@dataclass(frozen=True)
class McnrsReport:
    profile: str
    n: float
    delta_exp: float
    delta_theory: float
    delta_theory_hyperfine: float
    delta_forms_relative_difference: float
    delta_carried: float
    r_c: float
    wavelength: float
    mossbauer_factor: float
    sigma_r: float
    sigma_macroscopic: float
    mean_free_path: float
    branching_unit: float
    branching_amplified: float
    branching_amplified_n: float
    prior_limit_ratio: float
    packing_parameter: float
    eta: float
    two_delta: float
    path_to_two_delta: float
    virtual_photon_time: float
    number_density: float
    gas_volume: float
    carried_rounding: bool

    def __post_init__(self):
        for name in ("delta_exp", "delta_theory", "r_c", "two_delta", "mean_free_path",
                     "wavelength"):
            if not getattr(self, name) > 0:
                raise DomainError(f"report field {name} must be positive")
        for name in ("branching_unit", "branching_amplified"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"report field {name} must be a probability")

    def values(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k in REPORT_UNITS}

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "carried_rounding": self.carried_rounding,
            "values": self.values(),
            "units": dict(REPORT_UNITS),
            "provenance": dict(REPORT_PROVENANCE),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "McnrsReport":
        return cls(profile=data["profile"], carried_rounding=data["carried_rounding"],
                   **data["values"])


def full_report(state: GasState, constants: PhysicalConstants = PAPER, *,
                n_bar: float = N_BAR_DEFAULT,
                resonance: ResonanceParameters | None = None,
                mass_ratio: float = 0.0,
                carry_rounding: bool | None = None) -> McnrsReport:
    """Evaluate every estimate for ``state``.

    With ``carry_rounding`` (default: on for the "paper" profile) the lattice
    constant propagated into the radius and ``2 delta`` is the two-digit
    rounding of the quoted-shift form (5.5e-2 cm), which is the value the
    printed radius was computed from. Otherwise the closed alpha form is used
    unrounded.
    """
    if carry_rounding is None:
        carry_rounding = constants.name == "paper"
    if resonance is None:
        resonance = ResonanceParameters(constants=constants)
    eta = state.eta
    n = collective_size(n_bar, eta)
    volume = gas_volume(state)
    delta_exp = lattice_constant_exp(volume, n_bar)
    theory = lattice_constant_theory(constants)
    delta = theory.value
    sigma_r = resonant_cross_section(resonance)
    carried_delta = round_sig(theory.from_hyperfine) if carry_rounding else delta
    nu = number_density(state, constants)
    path = resonant_mean_free_path(eta, nu, sigma_r)
    packing = packing_comparison(eta, carried_delta, path)
    b_unit = branching_single_gamma(mass_ratio)
    b_amp = amplified_branching(b_unit, n_bar)
    return McnrsReport(
        profile=constants.name,
        n=n,
        delta_exp=delta_exp,
        delta_theory=delta,
        delta_theory_hyperfine=theory.from_hyperfine,
        delta_forms_relative_difference=theory.relative_difference,
        delta_carried=carried_delta,
        r_c=mcns_radius(n_bar, carried_delta),
        wavelength=resonance.wavelength,
        mossbauer_factor=resonance.mossbauer_factor,
        sigma_r=sigma_r,
        sigma_macroscopic=macroscopic_cross_section(n, sigma_r),
        mean_free_path=path,
        branching_unit=b_unit,
        branching_amplified=b_amp,
        branching_amplified_n=amplified_branching(b_unit, n),
        prior_limit_ratio=b_amp / PRIOR_SINGLE_PHOTON_LIMIT,
        packing_parameter=packing.packing,
        eta=eta,
        two_delta=packing.two_delta,
        path_to_two_delta=packing.ratio,
        virtual_photon_time=virtual_photon_time(constants),
        number_density=nu,
        gas_volume=volume,
        carried_rounding=carry_rounding,
    )


def format_report(report: McnrsReport, other: McnrsReport | None = None) -> str:
    """Aligned text table; ``other`` adds a second profile column."""
    head = ["quantity", report.profile]
    if other is not None:
        head.append(other.profile)
    head += ["unit", "source"]
    rows = []
    a = report.values()
    b = other.values() if other is not None else None
    for key, unit in REPORT_UNITS.items():
        row = [key, f"{a[key]:.4g}"]
        if b is not None:
            row.append(f"{b[key]:.4g}")
        row += [unit, REPORT_PROVENANCE[key]]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)
