"""Physical parameters of the detuned optomechanical cavity.

All quantities are SI.  Rates (``total_decay``, ``input_coupling``,
``detuning``) are angular, in rad/s, and ``total_decay`` is the amplitude
half-width of the cavity line, i.e. ``kappa = (t_in**2 + t_out**2) * c / (4 L)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar as HBAR

from .exceptions import (
    ConfigError,
    LowFinesse,
    ModeMatchingOutOfRange,
    NegativeNoiseLevel,
    NonPositiveDecay,
    NonPositiveDetuning,
    NonPositiveLength,
    NonPositiveMass,
    NonPositivePower,
    OvercoupledExceedsTotal,
)

__all__ = [
    "CavityParams",
    "DerivedQuantities",
    "validate",
    "derive",
    "finesse_to_kappa",
    "kappa_to_finesse",
    "intracavity_power",
    "input_power_for",
    "load_config",
    "PRESETS",
    "preset",
]


@dataclass(frozen=True)
class CavityParams:
    """Cavity, oscillator and input light.

    Instances are validated on construction.  A zero or negative detuning is
    accepted for storage, but every optical-spring operation raises
    :class:`~optodip.exceptions.NonPositiveDetuning` for it; check
    :attr:`spring_available` first when sweeping.

    ``mirror_mass`` may be ``inf`` to switch the optomechanical coupling off.
    """

    wavelength: float
    cavity_length: float
    mirror_mass: float
    total_decay: float
    input_coupling: float
    detuning: float
    intracavity_power: float
    mode_matching: float = 1.0
    rin_amplitude: float = 1.0
    rin_phase: float = 1.0

    def __post_init__(self):
        validate(self)

    @property
    def output_coupling(self) -> float:
        return self.total_decay - self.input_coupling

    @property
    def spring_available(self) -> bool:
        return self.detuning > 0

    def require_spring(self):
        if not self.spring_available:
            raise NonPositiveDetuning(
                f"detuning must be > 0 for optical-spring operations, got {self.detuning!r}",
                field="detuning",
            )

    def replace(self, **changes) -> "CavityParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_input_power(cls, input_power: float, **fields) -> "CavityParams":
        """Build parameters from the power incident on the input mirror."""
        if not input_power > 0:
            raise NonPositivePower("input power must be > 0", field="input_power")
        power = _intracavity(
            input_power,
            fields["cavity_length"],
            fields["total_decay"],
            fields["input_coupling"],
            fields["detuning"],
        )
        return cls(intracavity_power=power, **fields)

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "CavityParams":
        return _from_config(config)

    def to_config(self) -> dict:
        """Inverse of :meth:`from_config` (always emits ``kappa_hz`` and
        ``intracavity_power_w``)."""
        return {
            "wavelength_m": self.wavelength,
            "length_m": self.cavity_length,
            "mass_kg": self.mirror_mass,
            "kappa_hz": self.total_decay / (2 * math.pi),
            "kappa_in_over_kappa": self.input_coupling / self.total_decay,
            "detuning_over_kappa": self.detuning / self.total_decay,
            "intracavity_power_w": self.intracavity_power,
            "mode_matching": self.mode_matching,
            "rin_amplitude": self.rin_amplitude,
            "rin_phase": self.rin_phase,
        }


@dataclass(frozen=True)
class DerivedQuantities:
    omega0: float
    k0: float
    cavity_amplitude: float
    iota: float
    kappa_out: float
    t_in: float
    t_out: float
    r_in: float
    r_out: float
    alpha: float
    beta: float
    gamma: float


def _positive(value, name, exc):
    # written as a negation so that NaN is rejected too
    if not value > 0:
        raise exc(f"{name} must be > 0, got {value!r}", field=name)


def validate(params: CavityParams) -> CavityParams:
    """Check every invariant of ``params`` and return it unchanged.

    The first violated invariant is raised as a specific
    :class:`~optodip.exceptions.ParameterError` subclass.
    """
    _positive(params.wavelength, "wavelength", NonPositiveLength)
    _positive(params.cavity_length, "cavity_length", NonPositiveLength)
    _positive(params.mirror_mass, "mirror_mass", NonPositiveMass)
    _positive(params.intracavity_power, "intracavity_power", NonPositivePower)
    _positive(params.total_decay, "total_decay", NonPositiveDecay)
    _positive(params.input_coupling, "input_coupling", NonPositiveDecay)
    if not params.input_coupling < params.total_decay:
        raise OvercoupledExceedsTotal(
            "input_coupling must be strictly smaller than total_decay "
            f"(got {params.input_coupling!r} >= {params.total_decay!r})",
            field="input_coupling",
        )
    # t_in^2 + t_out^2 = 4 L kappa / c must describe transmissivities below 1
    if not 4 * params.cavity_length * params.total_decay / SPEED_OF_LIGHT < 1:
        raise LowFinesse(
            "4 L kappa / c must be < 1 (finesse above 2 pi) for the mirror model",
            field="total_decay",
        )
    if not math.isfinite(params.detuning):
        raise ConfigError(f"detuning must be finite, got {params.detuning!r}")
    if not 0.0 <= params.mode_matching <= 1.0:
        raise ModeMatchingOutOfRange(
            f"mode_matching must lie in [0, 1], got {params.mode_matching!r}",
            field="mode_matching",
        )
    for name in ("rin_amplitude", "rin_phase"):
        if not getattr(params, name) >= 0:
            raise NegativeNoiseLevel(f"{name} must be >= 0", field=name)
    return params


def carrier_phases(kappa, kappa_in, delta):
    """Carrier phase angles (alpha, beta, gamma).

    alpha: reflected vs intracavity, beta: intracavity vs input,
    gamma = alpha + beta: reflected vs input.  The two-argument arctangent
    reproduces ``arctan(-delta / (2 kappa_in - kappa))`` and
    ``arctan(-delta / kappa)`` on the principal branch when the
    denominators are positive and fixes the branch elsewhere so that the
    sum is the true input-to-reflection phase.

    At the doubly degenerate point ``delta == 0``, ``2 kappa_in == kappa``
    the reflected carrier vanishes and alpha is undefined; by convention it is
    set to ``pi / 2`` there.
    """
    if delta == 0 and 2 * kappa_in == kappa:
        alpha = math.pi / 2
    else:
        alpha = -math.atan2(delta, 2 * kappa_in - kappa)
    beta = -math.atan2(delta, kappa)
    return alpha, beta, alpha + beta


def derive(params: CavityParams) -> DerivedQuantities:
    validate(params)
    omega0 = 2 * math.pi * SPEED_OF_LIGHT / params.wavelength
    k0 = omega0 / SPEED_OF_LIGHT
    L = params.cavity_length
    kappa_out = params.total_decay - params.input_coupling
    t_in = math.sqrt(4 * L * params.input_coupling / SPEED_OF_LIGHT)
    t_out = math.sqrt(4 * L * kappa_out / SPEED_OF_LIGHT)
    alpha, beta, gamma = carrier_phases(params.total_decay, params.input_coupling, params.detuning)
    return DerivedQuantities(
        omega0=omega0,
        k0=k0,
        cavity_amplitude=math.sqrt(2 * params.intracavity_power / (HBAR * omega0)),
        iota=4 * params.intracavity_power * k0 / (params.mirror_mass * L),
        kappa_out=kappa_out,
        t_in=t_in,
        t_out=t_out,
        # sqrt(1 - t^2) loses precision for tiny t; this form is exact
        r_in=math.sqrt((1 - t_in) * (1 + t_in)),
        r_out=math.sqrt((1 - t_out) * (1 + t_out)),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
    )


def finesse_to_kappa(finesse: float, cavity_length: float) -> float:
    """Half-width decay rate (rad/s) of a cavity with the given finesse.

    kappa = pi c / (2 L F): the full width in Hz is FSR / F with
    FSR = c / (2 L), and kappa is half of it in angular units.
    """
    if not finesse > 0:
        raise ConfigError(f"finesse must be > 0, got {finesse!r}")
    if not cavity_length > 0:
        raise NonPositiveLength("cavity_length must be > 0", field="cavity_length")
    return math.pi * SPEED_OF_LIGHT / (2 * cavity_length * finesse)


def kappa_to_finesse(kappa: float, cavity_length: float) -> float:
    if not kappa > 0:
        raise NonPositiveDecay("kappa must be > 0", field="total_decay")
    if not cavity_length > 0:
        raise NonPositiveLength("cavity_length must be > 0", field="cavity_length")
    return math.pi * SPEED_OF_LIGHT / (2 * cavity_length * kappa)


def _intracavity(input_power, length, kappa, kappa_in, delta):
    return SPEED_OF_LIGHT * kappa_in * input_power / (length * (kappa**2 + delta**2))


def intracavity_power(input_power: float, params: CavityParams) -> float:
    """Circulating power for ``input_power`` incident on the input mirror.

    Only the geometry, couplings and detuning of ``params`` are used; its own
    ``intracavity_power`` is ignored.
    """
    if not input_power > 0:
        raise NonPositivePower("input power must be > 0", field="input_power")
    return _intracavity(
        input_power,
        params.cavity_length,
        params.total_decay,
        params.input_coupling,
        params.detuning,
    )


def input_power_for(power: float, params: CavityParams) -> float:
    """Input power needed to circulate ``power`` (inverse of :func:`intracavity_power`)."""
    if not power > 0:
        raise NonPositivePower("power must be > 0", field="intracavity_power")
    kappa, delta = params.total_decay, params.detuning
    return power * params.cavity_length * (kappa**2 + delta**2) / (
        SPEED_OF_LIGHT * params.input_coupling
    )


# -- configuration documents -------------------------------------------------

_REQUIRED_KEYS = {
    "wavelength_m",
    "length_m",
    "mass_kg",
    "kappa_in_over_kappa",
    "detuning_over_kappa",
}
_OPTIONAL_KEYS = {
    "kappa_hz",
    "finesse",
    "intracavity_power_w",
    "input_power_w",
    "mode_matching",
    "rin_amplitude",
    "rin_phase",
}


def _number(config, key):
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {value!r}")
    return float(value)


def _exactly_one(config, a, b):
    present = [k for k in (a, b) if k in config]
    if len(present) != 1:
        raise ConfigError(f"exactly one of {a!r} or {b!r} is required, got {present or 'neither'}")
    return present[0]


def _from_config(config: Mapping[str, Any]) -> CavityParams:
    if not isinstance(config, Mapping):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(config) - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    missing = _REQUIRED_KEYS - set(config)
    if missing:
        raise ConfigError(f"missing configuration keys: {', '.join(sorted(missing))}")

    length = _number(config, "length_m")
    if _exactly_one(config, "kappa_hz", "finesse") == "kappa_hz":
        kappa = 2 * math.pi * _number(config, "kappa_hz")
    else:
        kappa = finesse_to_kappa(_number(config, "finesse"), length)

    fields = dict(
        wavelength=_number(config, "wavelength_m"),
        cavity_length=length,
        mirror_mass=_number(config, "mass_kg"),
        total_decay=kappa,
        input_coupling=_number(config, "kappa_in_over_kappa") * kappa,
        detuning=_number(config, "detuning_over_kappa") * kappa,
    )
    for key, name in (
        ("mode_matching", "mode_matching"),
        ("rin_amplitude", "rin_amplitude"),
        ("rin_phase", "rin_phase"),
    ):
        if key in config:
            fields[name] = _number(config, key)

    if _exactly_one(config, "intracavity_power_w", "input_power_w") == "intracavity_power_w":
        return CavityParams(intracavity_power=_number(config, "intracavity_power_w"), **fields)
    return CavityParams.from_input_power(_number(config, "input_power_w"), **fields)


def load_config(path) -> CavityParams:
    """Read a flat JSON parameter document."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return _from_config(config)


# Reference design: 10 mg mirror, 10 cm cavity, 1 W circulating.
FIG2_CONFIG = {
    "wavelength_m": 1064e-9,
    "length_m": 0.10,
    "mass_kg": 10e-6,
    "kappa_hz": 0.25e6,
    "kappa_in_over_kappa": 0.8,
    "detuning_over_kappa": 1 / math.sqrt(3),
    "intracavity_power_w": 1.0,
}

# Tabletop cavity.  The detuning changes from run to run; 0.67 kappa is a
# representative value giving roughly 5 W circulating.
EXPERIMENT_CONFIG = {
    "wavelength_m": 1064e-9,
    "length_m": 0.11,
    "mass_kg": 8e-6,
    "finesse": 3.0e3,
    "kappa_in_over_kappa": 0.81,
    "detuning_over_kappa": 0.67,
    "input_power_w": 4.7e-3,
    "mode_matching": 0.92,
}

PRESETS = {"fig2": FIG2_CONFIG, "experiment": EXPERIMENT_CONFIG}


def preset(name: str) -> CavityParams:
    try:
        config = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return _from_config(config)
