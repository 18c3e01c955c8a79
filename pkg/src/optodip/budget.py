"""Noise budgets on a frequency grid, from either engine or both."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import analytic, twophoton
from .params import CavityParams
from .twophoton import Port

__all__ = ["ENGINES", "COLUMNS", "NoiseBudget", "compute_budget", "frequency_grid"]

ENGINES = ("closed", "exact", "both")
COLUMNS = ("s_b1", "s_b2", "s_d", "s_total")


def frequency_grid(start_hz, stop_hz, points, log=True):
    if not 0 < start_hz < stop_hz:
        raise ValueError(f"need 0 < start < stop, got {start_hz!r}, {stop_hz!r}")
    if points < 2:
        raise ValueError(f"need at least 2 points, got {points!r}")
    if log:
        return np.geomspace(start_hz, stop_hz, points)
    return np.linspace(start_hz, stop_hz, points)


def _closed_columns(params, omega, port):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.ApproximationWarning)
        cols = {
            "s_b1": analytic.spectrum_b1(params, omega, port),
            "s_b2": analytic.spectrum_b2(params, omega),
            "s_d": analytic.spectrum_d(params, omega),
            "s_total": analytic.total_spectrum(params, omega, port),
        }
    return cols


def _exact_columns(params, omega, port):
    spec = twophoton.force_noise_spectrum_exact(params, omega, port).normalized()
    return {"s_b1": spec.b1, "s_b2": spec.b2, "s_d": spec.d, "s_total": spec.total}


@dataclass
class NoiseBudget:
    """SQL-normalised spectra; ``columns`` hold power ratios unless
    ``amplitude`` is set, in which case they are square roots."""

    freq_hz: np.ndarray
    port: Port
    engine: str
    amplitude: bool
    columns: dict
    exact: dict | None = None
    max_rel_diff: dict = field(default_factory=dict)
    outside_validity: bool = False

    def header(self):
        names = ["freq_hz", *COLUMNS]
        if self.exact is not None:
            names += [f"{c}_exact" for c in COLUMNS]
        return names

    def rows(self):
        cols = [self.freq_hz] + [self.columns[c] for c in COLUMNS]
        if self.exact is not None:
            cols += [self.exact[c] for c in COLUMNS]
        return np.column_stack(cols)

    def summary(self) -> dict:
        return {
            "port": self.port.value,
            "engine": self.engine,
            "amplitude": self.amplitude,
            "fmin_hz": float(self.freq_hz[0]),
            "fmax_hz": float(self.freq_hz[-1]),
            "points": int(self.freq_hz.size),
            "outside_closed_form_validity": self.outside_validity,
            "max_rel_diff_power": dict(self.max_rel_diff),
        }


def compute_budget(params: CavityParams, freq_hz, port="reflection", engine="closed", amplitude=False):
    """Evaluate the per-channel and total spectra on ``freq_hz``.

    With ``engine="both"`` the closed forms fill the main columns, the exact
    engine the ``*_exact`` ones, and ``max_rel_diff`` records the largest
    relative power difference per channel (the mismatch is always measured
    on power, whatever ``amplitude`` says).
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    port = Port.coerce(port)
    freq = np.asarray(freq_hz, dtype=float)
    omega = 2 * np.pi * freq
    params.require_spring()

    closed = _closed_columns(params, omega, port) if engine != "exact" else None
    exact = _exact_columns(params, omega, port) if engine != "closed" else None

    diffs = {}
    if engine == "both":
        for name in COLUMNS:
            diffs[name] = float(np.max(np.abs(closed[name] - exact[name]) / np.abs(exact[name])))
        diffs["overall"] = max(diffs.values())

    def finish(cols):
        return {k: np.sqrt(v) for k, v in cols.items()} if amplitude else cols

    limit = analytic.VALIDITY_FRACTION * params.total_decay
    return NoiseBudget(
        freq_hz=freq,
        port=port,
        engine=engine,
        amplitude=amplitude,
        columns=finish(exact if engine == "exact" else closed),
        exact=finish(exact) if engine == "both" else None,
        max_rel_diff=diffs,
        outside_validity=bool(np.any(omega > limit) or analytic.omega_opt(params) > limit),
    )
