"""Exact two-photon (quadrature) engine.

Quadrature pairs are ordered (amplitude, phase).  Every function is
vectorised over ``omega``: 2x2 matrices come back with shape
``omega.shape + (2, 2)``.  No expansion in omega/kappa is made here; the
closed-form approximations live in :mod:`optodip.analytic`.

Spectra are single-sided with unit vacuum quadrature density, and are
normalised by the free-mass standard quantum limit ``2 hbar m omega**2``.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar as HBAR

from .exceptions import PoleAtOpticalSpring, ZeroFrequency
from .params import CavityParams, derive

__all__ = [
    "Port",
    "rotation",
    "cavity_gain",
    "loop_denominator",
    "loop_gain",
    "closed_loop",
    "closed_loop_via_loop_gain",
    "input_output",
    "TransferCoefficients",
    "transfer_coefficients",
    "ForceNoise",
    "force_noise_spectrum_exact",
    "sql_force",
    "DEFAULT_POLE_FLOOR",
]

DEFAULT_POLE_FLOOR = 1e-12


class Port(str, enum.Enum):
    REFLECTION = "reflection"
    TRANSMISSION = "transmission"

    @classmethod
    def coerce(cls, value) -> "Port":
        if isinstance(value, cls):
            return value
        aliases = {"ref": cls.REFLECTION, "tra": cls.TRANSMISSION}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class _Model:
    """Flat scalar view of the parameters used by the engine."""

    kappa: float
    kappa_in: float
    kappa_out: float
    delta: float
    iota: float
    length: float
    mass: float
    power: float
    amplitude: float
    k0: float
    t_in: float
    t_out: float
    r_in: float
    r_out: float
    alpha: float
    beta: float

    @classmethod
    def from_params(cls, params: CavityParams, reflectivity="unit") -> "_Model":
        d = derive(params)
        if reflectivity == "unit":
            r_in = r_out = 1.0
        elif reflectivity == "exact":
            r_in, r_out = d.r_in, d.r_out
        else:
            raise ValueError(f"reflectivity must be 'unit' or 'exact', got {reflectivity!r}")
        return cls(
            kappa=params.total_decay,
            kappa_in=params.input_coupling,
            kappa_out=d.kappa_out,
            delta=params.detuning,
            iota=d.iota,
            length=params.cavity_length,
            mass=params.mirror_mass,
            power=params.intracavity_power,
            amplitude=d.cavity_amplitude,
            k0=d.k0,
            t_in=d.t_in,
            t_out=d.t_out,
            r_in=r_in,
            r_out=r_out,
            alpha=d.alpha,
            beta=d.beta,
        )

    def replace(self, **changes) -> "_Model":
        return dataclasses.replace(self, **changes)


def _omega(omega, allow_zero=False):
    w = np.asarray(omega, dtype=float)
    if not allow_zero and np.any(w == 0):
        raise ZeroFrequency("omega = 0 is not supported (free-mass response diverges)")
    return w


def rotation(theta):
    """Quadrature rotation matrix R_theta (broadcasts over ``theta``)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _matrix(m11, m12, m21, m22):
    m11, m12, m21, m22 = np.broadcast_arrays(m11, m12, m21, m22)
    return np.stack([np.stack([m11, m12], -1), np.stack([m21, m22], -1)], -2)


def _gain(m: _Model, w):
    diag = m.kappa - 1j * w
    scale = SPEED_OF_LIGHT / (2 * m.length) / (diag**2 + m.delta**2)
    return scale[..., None, None] * _matrix(diag, -m.delta, m.delta, diag)


def _denominator(m: _Model, w):
    return w**2 * ((w + 1j * m.kappa) ** 2 - m.delta**2) + m.delta * m.iota


def _check_pole(m: _Model, w, denom, floor):
    scale = np.abs(w**2 * (m.kappa**2 + m.delta**2))
    bad = np.abs(denom) < floor * scale
    if np.any(bad):
        where = np.atleast_1d(w)[np.atleast_1d(bad)][0]
        raise PoleAtOpticalSpring(
            f"|M(omega)| below {floor:g} of its scale at omega = {where:.9g} rad/s"
        )


def _closed_loop(m: _Model, w, floor=DEFAULT_POLE_FLOOR):
    denom = _denominator(m, w)
    _check_pole(m, w, denom, floor)
    diag = m.kappa - 1j * w
    prefactor = -SPEED_OF_LIGHT * w**2 / (2 * m.length * denom)
    return prefactor[..., None, None] * _matrix(diag, -m.delta, m.delta - m.iota / w**2, diag)


def _loop_gain(m: _Model, w):
    chi_m = -1.0 / (m.mass * w**2)
    kappa0 = -8 * chi_m * m.power * m.k0 / SPEED_OF_LIGHT
    zero = np.zeros_like(w)
    coupling = _matrix(zero, zero, -kappa0, zero)
    return coupling @ _gain(m, w)


def cavity_gain(params: CavityParams, omega):
    """Cavity amplification matrix G(omega)."""
    w = _omega(omega, allow_zero=True)
    return _gain(_Model.from_params(params), w)


def loop_denominator(params: CavityParams, omega):
    """Scalar denominator M(omega) of the closed optomechanical loop.

    Its real part vanishes at the optical-spring resonance.
    """
    w = _omega(omega, allow_zero=True)
    return _denominator(_Model.from_params(params), w)


def loop_gain(params: CavityParams, omega):
    """Open-loop gain matrix of the radiation-pressure feedback."""
    return _loop_gain(_Model.from_params(params), _omega(omega))


def closed_loop(params: CavityParams, omega, pole_floor=DEFAULT_POLE_FLOOR):
    """Closed-loop cavity response H(omega), explicit closed form.

    Raises :class:`PoleAtOpticalSpring` when ``|M| < pole_floor *
    |omega**2 (kappa**2 + Delta**2)|``.  Without mechanical damping the only
    thing keeping M off zero at the spring resonance is the cavity term
    Im M = 2 kappa omega**3, so the response there can be arbitrarily sharp.
    """
    return _closed_loop(_Model.from_params(params), _omega(omega), pole_floor)


def closed_loop_via_loop_gain(params: CavityParams, omega):
    """H = G (I - A)^-1 assembled from the gain and loop-gain matrices."""
    m = _Model.from_params(params)
    w = _omega(omega)
    eye = np.eye(2)
    return _gain(m, w) @ np.linalg.inv(eye - _loop_gain(m, w))


@dataclass(frozen=True)
class IOMatrices:
    """Linear maps from the inputs onto an output field's quadratures.

    ``b`` and ``d`` are (..., 2, 2); ``force`` is the (..., 2) response to a
    unit external force.
    """

    port: Port
    b: np.ndarray
    d: np.ndarray
    force: np.ndarray


def _reflected_input(m: _Model, w, r_a, r_b):
    """R_alpha (t_in^2 H - I) R_beta for unit input reflectivity.

    Written as Y / M with Y = -2 kappa_in w^2 N - M I, where N is the matrix
    of the closed-loop form.  The static part Y(0) is rotated analytically:
    rotating it numerically leaves an O(1) rounding residue in the (0, 1)
    entry, which should vanish, and that residue swamps the O(w^3) phase-noise
    coupling at low frequency.
    """
    k, kin, D, iota = m.kappa, m.kappa_in, m.delta, m.iota
    rho_a = np.hypot(2 * kin - k, D)
    rho_b = np.hypot(k, D)
    bare = w**2 * ((w + 1j * k) ** 2 - D**2)
    M = bare + D * iota
    diag = -2 * kin * w**2 * (k - 1j * w) - bare
    off = 2 * kin * w**2 * D
    dynamic = r_a @ _matrix(diag, off, -off, diag) @ r_b
    scale = iota / (rho_a * rho_b)
    static = np.array(
        [
            [scale * D * rho_b**2, 0.0],
            [scale * 2 * kin * (2 * kin * k - k**2 + D**2), scale * D * rho_a**2],
        ]
    )
    return (static + dynamic) / M[..., None, None]


def _input_output(m: _Model, w, port: Port, floor=DEFAULT_POLE_FLOOR) -> IOMatrices:
    H = _closed_loop(m, w, floor)
    eye = np.eye(2)
    chi_m = -1.0 / (m.mass * w**2)
    drive = (2 * chi_m * m.amplitude * m.k0)[..., None]
    if port is Port.REFLECTION:
        r_a = rotation(m.alpha)
        r_b = rotation(m.beta)
        if m.r_in == 1.0 and np.hypot(2 * m.kappa_in - m.kappa, m.delta) > 0:
            b = _reflected_input(m, w, r_a, r_b)
        else:
            b = r_a @ (m.t_in**2 * H - m.r_in * eye) @ r_b
        # vacuum entering through the end mirror carries no carrier phase
        d = r_a @ (m.t_in * m.t_out * H)
        force = drive * m.t_in * (r_a @ H)[..., :, 1]
    else:
        # intracavity and transmitted carriers share the same phase
        b = m.t_in * m.t_out * H @ rotation(m.beta)
        d = m.t_out**2 * H - m.r_out * eye
        force = drive * m.t_out * H[..., :, 1]
    return IOMatrices(port=port, b=b, d=d, force=force)


def input_output(params: CavityParams, omega, port, reflectivity="unit", pole_floor=DEFAULT_POLE_FLOOR):
    """Input-output matrices for the reflected or transmitted field."""
    m = _Model.from_params(params, reflectivity)
    return _input_output(m, _omega(omega), Port.coerce(port), pole_floor)


@dataclass(frozen=True)
class TransferCoefficients:
    """Amplitude-quadrature readout referred to the force input.

    ``output_1 = chi_signal * (dF + xi_b1 b1 + xi_b2 b2 + xi_d1 d1 + xi_d2 d2)``
    """

    chi_signal: np.ndarray
    xi_b1: np.ndarray
    xi_b2: np.ndarray
    xi_d1: np.ndarray
    xi_d2: np.ndarray
    port: Port
    omega: np.ndarray


def _coefficients(m: _Model, w, port: Port, floor=DEFAULT_POLE_FLOOR) -> TransferCoefficients:
    io = _input_output(m, w, port, floor)
    chi = io.force[..., 0]
    return TransferCoefficients(
        chi_signal=chi,
        xi_b1=io.b[..., 0, 0] / chi,
        xi_b2=io.b[..., 0, 1] / chi,
        xi_d1=io.d[..., 0, 0] / chi,
        xi_d2=io.d[..., 0, 1] / chi,
        port=port,
        omega=w,
    )


def transfer_coefficients(
    params: CavityParams, omega, port, reflectivity="unit", pole_floor=DEFAULT_POLE_FLOOR
) -> TransferCoefficients:
    """Force-referred noise coefficients for amplitude readout at ``port``.

    ``reflectivity="unit"`` (default) uses r_in = r_out = 1, which is the
    reflectivity consistent with the single-pole cavity gain matrix.  With
    ``"exact"`` the mirror reflectivities are sqrt(1 - t**2); the O(t**2)
    mismatch with the single-pole G then leaks phase noise into the
    amplitude quadrature and dominates the b2 channel.
    """
    m = _Model.from_params(params, reflectivity)
    return _coefficients(m, _omega(omega), Port.coerce(port), pole_floor)


def sql_force(params: CavityParams, omega):
    """Free-mass standard quantum limit 2 hbar m omega**2 in N^2/Hz."""
    w = np.asarray(omega, dtype=float)
    return 2 * HBAR * params.mirror_mass * w**2


@dataclass(frozen=True)
class ForceNoise:
    """Per-input force-noise spectra at one readout port.

    ``b1``..``d2`` are vacuum-level contributions; ``total`` weights the
    laser-input channels by the relative noise levels of the parameters.
    """

    omega: np.ndarray
    port: Port
    b1: np.ndarray
    b2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    total: np.ndarray
    sql: np.ndarray

    @property
    def d(self):
        return self.d1 + self.d2

    def normalized(self) -> "ForceNoise":
        """Same spectra divided by the standard quantum limit."""
        s = self.sql
        return ForceNoise(
            omega=self.omega,
            port=self.port,
            b1=self.b1 / s,
            b2=self.b2 / s,
            d1=self.d1 / s,
            d2=self.d2 / s,
            total=self.total / s,
            sql=np.ones_like(s),
        )


def _spectrum(m, w, port, eps1, eps2, mass, floor=DEFAULT_POLE_FLOOR) -> ForceNoise:
    co = _coefficients(m, w, port, floor)
    b1, b2, d1, d2 = (np.abs(x) ** 2 for x in (co.xi_b1, co.xi_b2, co.xi_d1, co.xi_d2))
    return ForceNoise(
        omega=w,
        port=port,
        b1=b1,
        b2=b2,
        d1=d1,
        d2=d2,
        total=eps1 * b1 + eps2 * b2 + d1 + d2,
        sql=2 * HBAR * mass * w**2,
    )


def force_noise_spectrum_exact(
    params: CavityParams, omega, port, reflectivity="unit", pole_floor=DEFAULT_POLE_FLOOR
) -> ForceNoise:
    m = _Model.from_params(params, reflectivity)
    return _spectrum(
        m,
        _omega(omega),
        Port.coerce(port),
        params.rin_amplitude,
        params.rin_phase,
        params.mirror_mass,
        pole_floor,
    )
