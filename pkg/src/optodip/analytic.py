"""Closed-form spectra and characteristic frequencies.

These expressions drop terms of order (omega/kappa)**2 and assume the
optical spring sits far below the cavity pole.  Calls outside that regime
still return values but emit :class:`ApproximationWarning`.

Spectra are SQL-normalised power spectral densities (dimensionless).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar as HBAR
from scipy.optimize import brentq

from .exceptions import ModeMatchingOutOfRange, PoleAtOpticalSpring, ZeroFrequency
from .params import CavityParams, derive, intracavity_power
from .twophoton import DEFAULT_POLE_FLOOR, Port

__all__ = [
    "ApproximationWarning",
    "CharacteristicFrequencies",
    "VALIDITY_FRACTION",
    "omega_opt",
    "omega_dip",
    "omega_dip_measured",
    "omega_dip_measured_by_root",
    "characteristic_frequencies",
    "spectrum_ref_b1",
    "spectrum_tra_b1",
    "spectrum_b1",
    "spectrum_b2",
    "spectrum_d",
    "total_spectrum",
    "epsilon2_from_frequency_noise",
    "displacement_from_phase_noise",
    "frequency_noise_displacement",
    "mode_mismatch_transfer",
]

# closed forms are trusted for omega and omega_opt below this fraction of kappa
VALIDITY_FRACTION = 0.1


class ApproximationWarning(UserWarning):
    """A closed form was evaluated outside its small-omega/kappa regime."""


def _iota(params):
    return derive(params).iota


def omega_opt(params: CavityParams) -> float:
    """Optical-spring resonance sqrt(Delta iota / (kappa^2 + Delta^2))."""
    params.require_spring()
    k, D = params.total_decay, params.detuning
    return float(np.sqrt(D * _iota(params) / (k**2 + D**2)))


def omega_dip(params: CavityParams) -> float:
    """Back-action cancellation frequency for perfect mode matching."""
    params.require_spring()
    k, kin, D = params.total_decay, params.input_coupling, params.detuning
    return float(np.sqrt(D * _iota(params) / ((k - 2 * kin) ** 2 + D**2)))


def _eta(params, eta):
    eta = params.mode_matching if eta is None else float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ModeMatchingOutOfRange(f"eta must lie in [0, 1], got {eta!r}", field="mode_matching")
    return eta


def omega_dip_measured(params: CavityParams, eta=None) -> float:
    """Dip frequency seen in the reflected power with mode matching ``eta``.

    Mismatched light is reflected promptly and pulls the dip from
    :func:`omega_dip` (eta = 1) down to :func:`omega_opt` (eta = 0).
    ``eta`` defaults to ``params.mode_matching``.
    """
    params.require_spring()
    eta = _eta(params, eta)
    k, kin, D = params.total_decay, params.input_coupling, params.detuning
    denom = k**2 + D**2 - 4 * kin * (k - kin) * eta
    return float(np.sqrt(D * _iota(params) / denom))


@dataclass(frozen=True)
class CharacteristicFrequencies:
    """Angular frequencies in rad/s."""

    omega_opt: float
    omega_dip: float
    omega_dip_measured: float

    @property
    def ratio_opt_over_dip_m(self) -> float:
        return self.omega_opt / self.omega_dip_measured

    def as_hz(self) -> dict:
        two_pi = 2 * np.pi
        return {
            "omega_opt_hz": self.omega_opt / two_pi,
            "omega_dip_hz": self.omega_dip / two_pi,
            "omega_dip_measured_hz": self.omega_dip_measured / two_pi,
            "ratio_opt_over_dip_m": self.ratio_opt_over_dip_m,
        }


def characteristic_frequencies(params: CavityParams, eta=None) -> CharacteristicFrequencies:
    return CharacteristicFrequencies(
        omega_opt=omega_opt(params),
        omega_dip=omega_dip(params),
        omega_dip_measured=omega_dip_measured(params, eta),
    )


def _prepare(params, omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0):
        raise ZeroFrequency("closed-form spectra diverge at omega = 0")
    limit = VALIDITY_FRACTION * params.total_decay
    if np.any(np.abs(w) > limit):
        warnings.warn(
            f"omega exceeds {VALIDITY_FRACTION:g} kappa; closed forms neglect (omega/kappa)^2",
            ApproximationWarning,
            stacklevel=3,
        )
    if params.spring_available and omega_opt(params) > limit:
        warnings.warn(
            f"optical spring above {VALIDITY_FRACTION:g} kappa; closed forms assume omega_opt << kappa",
            ApproximationWarning,
            stacklevel=3,
        )
    return w


def spectrum_ref_b1(params: CavityParams, omega):
    """Input-amplitude noise at reflection; vanishes exactly at omega_dip."""
    params.require_spring()
    w = _prepare(params, omega)
    k, kin, D, iota = params.total_decay, params.input_coupling, params.detuning, _iota(params)
    numerator = (k**2 + D**2) * (D * iota - ((k - 2 * kin) ** 2 + D**2) * w**2) ** 2
    return numerator / (16 * iota * kin * (k - kin) ** 2 * D**2 * w**2)


def spectrum_tra_b1(params: CavityParams, omega):
    """Input-amplitude noise at transmission; no dip, grows as omega**2."""
    params.require_spring()
    w = _prepare(params, omega)
    k, kin, D, iota = params.total_decay, params.input_coupling, params.detuning, _iota(params)
    return kin * (k**2 + D**2) * w**2 / (iota * D**2)


def spectrum_b1(params: CavityParams, omega, port):
    if Port.coerce(port) is Port.REFLECTION:
        return spectrum_ref_b1(params, omega)
    return spectrum_tra_b1(params, omega)


def spectrum_b2(params: CavityParams, omega):
    """Input-phase noise; the same at both ports."""
    w = _prepare(params, omega)
    k, kin, D, iota = params.total_decay, params.input_coupling, params.detuning, _iota(params)
    return kin * w**4 / (iota * (k**2 + D**2))


def spectrum_d(params: CavityParams, omega):
    """Vacuum entering through the end mirror (both quadratures); the same at
    both ports."""
    params.require_spring()
    w = _prepare(params, omega)
    k, D, iota = params.total_decay, params.detuning, _iota(params)
    kout = params.output_coupling
    amplitude = (D * iota - (k**2 + D**2 - 2 * k * kout) * w**2) ** 2 / (
        4 * iota * kout * D**2 * w**2
    )
    return amplitude + kout * w**2 / iota


def total_spectrum(params: CavityParams, omega, port):
    """rin_amplitude * S_b1 + rin_phase * S_b2 + S_d at ``port``."""
    with warnings.catch_warnings():
        # _prepare warns once per component; report once for the sum instead
        warnings.simplefilter("ignore", ApproximationWarning)
        b1 = spectrum_b1(params, omega, port)
        b2 = spectrum_b2(params, omega)
        d = spectrum_d(params, omega)
    _prepare(params, omega)
    return params.rin_amplitude * b1 + params.rin_phase * b2 + d


def epsilon2_from_frequency_noise(input_power, omega0, s_freq, omega):
    """Relative phase-noise level of laser frequency noise.

    ``s_freq`` is the PSD of angular-frequency fluctuations; the equivalent
    phase noise s_freq/omega**2 is expressed in units of the input shot noise
    hbar omega0 / (2 P_in).
    """
    w = np.asarray(omega, dtype=float)
    return 2 * input_power * np.asarray(s_freq, dtype=float) / (HBAR * omega0 * w**2)


def displacement_from_phase_noise(params: CavityParams, input_power, s_freq, omega):
    """Mirror displacement PSD caused by laser frequency noise.

    Runs the closed-form chain chi_m**2 * eps2 * S_b2 * S_SQL with the
    circulating power implied by ``input_power``.
    """
    w = np.asarray(omega, dtype=float)
    driven = params.replace(intracavity_power=intracavity_power(input_power, params))
    eps2 = epsilon2_from_frequency_noise(input_power, derive(driven).omega0, s_freq, w)
    sql = 2 * HBAR * driven.mirror_mass * w**2
    chi_m = -1.0 / (driven.mirror_mass * w**2)
    return chi_m**2 * eps2 * spectrum_b2(driven, w) * sql


def frequency_noise_displacement(cavity_length, omega0, s_freq):
    """Reference form L**2 S_freq / omega0**2 of length-equivalent frequency noise."""
    return cavity_length**2 * np.asarray(s_freq, dtype=float) / omega0**2


def _mismatch_terms(params, w):
    k, kin, D, iota = params.total_decay, params.input_coupling, params.detuning, _iota(params)
    coupled = D * iota - ((k - 2 * kin) ** 2 + D**2) * w**2
    spring = D * iota - (k**2 + D**2) * w**2
    return coupled, spring


def mode_mismatch_transfer(params: CavityParams, omega, eta=None, pole_floor=DEFAULT_POLE_FLOOR):
    """Normalised reflected-power fluctuation per unit input intensity noise.

    eta * (TEM00 response) + (1 - eta) * (promptly reflected mismatched
    light).  Only the location of its zero is physical; the overall scale is
    arbitrary.  The TEM00 term has a pole at omega_opt.
    """
    params.require_spring()
    eta = _eta(params, eta)
    w = np.asarray(omega, dtype=float)
    coupled, spring = _mismatch_terms(params, w)
    scale = params.detuning * _iota(params)
    if np.any(np.abs(spring) < pole_floor * scale):
        raise PoleAtOpticalSpring("mode-mismatch transfer evaluated at omega_opt")
    return eta * coupled / spring + (1 - eta)


def omega_dip_measured_by_root(params: CavityParams, eta=None) -> float:
    """Zero of :func:`mode_mismatch_transfer` located by bracketing.

    Independent of the algebraic :func:`omega_dip_measured`; the zero lies
    between omega_opt and omega_dip for every eta in [0, 1].
    """
    params.require_spring()
    eta = _eta(params, eta)
    lo = omega_opt(params) * (1 - 1e-3)
    hi = omega_dip(params) * (1 + 1e-3)

    def cleared(w):
        # transfer multiplied through by its pole factor: same zeros, no pole
        coupled, spring = _mismatch_terms(params, w)
        return eta * coupled + (1 - eta) * spring

    return brentq(cleared, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)

