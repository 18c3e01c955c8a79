"""Spectral fits: the jittered-dip model and the spring/dip ratio.

Frequencies are angular (rad/s) inside the model functions.  The CSV
helpers and :class:`MeasuredSpectrum` work in Hz, like the files they read.
"""

from __future__ import annotations

import contextlib
import csv
import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import minimize, minimize_scalar

from .exceptions import (
    DataError,
    DegenerateBand,
    InsufficientData,
    InvalidModelParams,
    MeasuredExceedsMaximum,
    NoConvergence,
)

__all__ = [
    "MeasuredSpectrum",
    "read_spectrum_csv",
    "write_spectrum_csv",
    "dip_model",
    "DipFitResult",
    "fit_dip",
    "detuning_from_transmission",
    "detuning_error_from_transmission",
    "ratio_model",
    "RatioData",
    "read_ratio_csv",
    "write_ratio_csv",
    "RatioFitResult",
    "fit_ratio",
    "synthesize_dip_spectrum",
    "synthesize_ratio_data",
    "MIN_DIP_POINTS",
]

MIN_DIP_POINTS = 10
TWO_PI = 2 * math.pi


# -- measured spectra --------------------------------------------------------


@dataclass(frozen=True)
class MeasuredSpectrum:
    """Amplitude spectral density sampled on a strictly increasing grid (Hz)."""

    freq_hz: np.ndarray
    asd: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        freq = np.asarray(self.freq_hz, dtype=float).ravel()
        asd = np.asarray(self.asd, dtype=float).ravel()
        if freq.size == 0:
            raise InsufficientData("spectrum has no data points")
        if freq.shape != asd.shape:
            raise DataError(f"freq_hz and asd lengths differ ({freq.size} vs {asd.size})")
        if not np.all(np.isfinite(freq)) or not np.all(np.isfinite(asd)):
            raise DataError("spectrum contains non-finite values")
        if np.any(np.diff(freq) <= 0):
            raise DataError("freq_hz must be strictly increasing")
        if np.any(asd <= 0):
            raise DataError("asd values must be positive")
        object.__setattr__(self, "freq_hz", freq)
        object.__setattr__(self, "asd", asd)
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float).ravel()
            if sigma.shape != freq.shape:
                raise DataError("sigma must have one entry per frequency")
            if np.any(~(sigma > 0)):
                raise DataError("sigma values must be positive")
            object.__setattr__(self, "sigma", sigma)

    @property
    def omega(self):
        return TWO_PI * self.freq_hz

    def __len__(self):
        return self.freq_hz.size


def _read_columns(path, required, optional=()):
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise InsufficientData(f"{path}: file is empty")
    header = [name.strip() for name in rows[0]]
    missing = [name for name in required if name not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(missing)}; header is {header}")
    wanted = list(required) + [name for name in optional if name in header]
    try:
        values = np.array(
            [[float(row[header.index(name)]) for name in wanted] for row in rows[1:]],
            dtype=float,
        ).reshape(-1, len(wanted))
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    return {name: values[:, i] for i, name in enumerate(wanted)}


def read_spectrum_csv(path, column="asd") -> MeasuredSpectrum:
    """Read ``freq_hz,asd[,sigma]``.

    ``column`` selects another value column, so budget files written by the
    CLI (``s_total`` etc.) load too.
    """
    cols = _read_columns(path, ["freq_hz", column], ["sigma"])
    if cols["freq_hz"].size == 0:
        raise InsufficientData(f"{path}: no data rows")
    return MeasuredSpectrum(cols["freq_hz"], cols[column], cols.get("sigma"))


@contextlib.contextmanager
def _writable(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_spectrum_csv(spectrum: MeasuredSpectrum, target):
    """Write to a path or an open text stream."""
    with _writable(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        has_sigma = spectrum.sigma is not None
        writer.writerow(["freq_hz", "asd"] + (["sigma"] if has_sigma else []))
        for i in range(len(spectrum)):
            row = [repr(float(spectrum.freq_hz[i])), repr(float(spectrum.asd[i]))]
            if has_sigma:
                row.append(repr(float(spectrum.sigma[i])))
            writer.writerow(row)


# -- dip model ---------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _gauss_nodes(n):
    x, weights = hermegauss(n)
    return x, weights / weights.sum()


def _shape(omega, centre):
    # |centre^2 - omega^2| / centre^2, squared
    return ((centre**2 - omega**2) / centre**2) ** 2


def dip_model(omega_dip_m, delta_omega, overall, omega, nodes=2):
    """Amplitude spectrum of a dip whose centre jitters with std ``delta_omega``.

    The power spectrum ``(|w_d^2 - w^2| / w_d^2)^2`` is averaged over a
    Gaussian distribution of ``w_d`` using ``nodes``-point Gauss-Hermite
    quadrature.  The default two-point rule places the nodes at
    ``omega_dip_m +/- delta_omega`` with equal weights, i.e. the plain
    average of the two displaced spectra.

    The model is even in ``delta_omega``; every quadrature node must stay
    above zero.
    """
    if not (omega_dip_m > 0 and overall > 0 and math.isfinite(delta_omega)):
        raise InvalidModelParams(
            f"need omega_dip_m > 0 and overall > 0, got {omega_dip_m!r}, {overall!r}"
        )
    x, weights = _gauss_nodes(nodes)
    centres = omega_dip_m + x * delta_omega
    if np.any(centres <= 0):
        raise InvalidModelParams("delta_omega too large: a quadrature node falls at or below 0")
    w = np.asarray(omega, dtype=float)
    power = sum(weight * _shape(w, centre) for weight, centre in zip(weights, centres))
    return overall * np.sqrt(power)


@dataclass
class DipFitResult:
    """Best-fit jittered-dip parameters (rad/s) with 1-sigma errors."""

    omega_dip_m: float
    delta_omega: float
    overall: float
    omega_dip_m_error: float
    delta_omega_error: float
    overall_error: float
    residual_norm: float
    n_points: int
    n_iterations: int
    initial_guess: tuple
    band_hz: tuple
    objective_initial: float
    objective_final: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["initial_guess"] = list(self.initial_guess)
        out["band_hz"] = list(self.band_hz)
        out["omega_dip_m_hz"] = self.omega_dip_m / TWO_PI
        out["delta_omega_hz"] = self.delta_omega / TWO_PI
        out["omega_dip_m_error_hz"] = self.omega_dip_m_error / TWO_PI
        out["delta_omega_error_hz"] = self.delta_omega_error / TWO_PI
        return out


def _select_band(data: MeasuredSpectrum, band):
    if band is None:
        lo, hi = float(data.freq_hz[0]), float(data.freq_hz[-1])
    else:
        lo, hi = (float(v) for v in band)
        if not lo < hi:
            raise DataError(f"band must satisfy low < high, got {band!r}")
    keep = (data.freq_hz >= lo) & (data.freq_hz <= hi)
    if keep.sum() < MIN_DIP_POINTS:
        raise InsufficientData(
            f"{int(keep.sum())} points in band [{lo:g}, {hi:g}] Hz; need at least {MIN_DIP_POINTS}"
        )
    sigma = None if data.sigma is None else data.sigma[keep]
    return data.omega[keep], data.asd[keep], sigma, (lo, hi)


def _check_interior_minimum(y, min_depth):
    i = int(np.argmin(y))
    edge = min(y[:3].mean(), y[-3:].mean())
    if i == 0 or i == y.size - 1 or y[i] > (1 - min_depth) * edge:
        raise DegenerateBand("no interior minimum in the fit band")
    return i


def _profiled_overall(model_unit, y, w):
    # optimal linear scale for a fixed shape
    return np.sum(w * y * model_unit, axis=-1) / np.sum(w * model_unit**2, axis=-1)


def _prescan(omega, y, w, nodes):
    """Coarse grid over centre (data points) and relative jitter."""
    stride = max(1, (omega.size - 2) // 64)
    lowest = np.argsort(y[1:-1])[:16] + 1
    centres = np.union1d(omega[1:-1:stride], omega[lowest])
    rel = np.array([0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2])
    best = (np.inf, None)
    scaled = omega[None, :] / centres[:, None]
    for r in rel:
        shape = dip_model(1.0, r, 1.0, scaled, nodes)
        scale = _profiled_overall(shape, y, w)
        chi2 = np.sum(w * (y - scale[:, None] * shape) ** 2, axis=-1)
        j = int(np.argmin(chi2))
        if chi2[j] < best[0]:
            best = (chi2[j], (centres[j], r * centres[j], scale[j]))
    return best[1]


def fit_dip(
    data: MeasuredSpectrum,
    initial_guess=None,
    band=None,
    *,
    prescan=True,
    max_iter=500,
    xtol=1e-8,
    min_depth=0.1,
    nodes=2,
) -> DipFitResult:
    """Least-squares fit of :func:`dip_model` to an amplitude spectrum.

    ``initial_guess`` is ``(omega_dip_m, delta_omega, overall)`` in rad/s;
    missing entries (or a missing guess) are estimated from the data, by a
    coarse grid scan when ``prescan`` is set.  ``band`` is ``(low, high)``
    in Hz.  Weights are 1/sigma**2 when the spectrum carries errors.

    The search is Nelder-Mead on parameters scaled by the starting point,
    stopping once the simplex is smaller than ``xtol`` (relative); it is
    restarted once from the optimum to guard against simplex collapse.
    Errors come from the curvature of the linearised objective at the
    optimum and are rescaled by the reduced chi-square when the data have
    no sigma.
    """
    omega, y, sigma, band_hz = _select_band(data, band)
    w = np.ones_like(y) if sigma is None else 1 / sigma**2
    i_min = _check_interior_minimum(y, min_depth)

    guess = list(initial_guess) if initial_guess is not None else [None, None, None]
    if len(guess) != 3:
        raise InvalidModelParams("initial_guess must be (omega_dip_m, delta_omega, overall)")
    if prescan and guess[0] is None:
        scanned = _prescan(omega, y, w, nodes)
        guess = [g if g is not None else s for g, s in zip(guess, scanned)]
    if guess[0] is None:
        guess[0] = omega[i_min]
    if guess[1] is None:
        guess[1] = 0.01 * guess[0]
    if guess[2] is None:
        guess[2] = float(_profiled_overall(dip_model(guess[0], guess[1], 1.0, omega, nodes), y, w))
    guess = tuple(float(g) for g in guess)

    scale = np.array([guess[0], max(abs(guess[1]), 1e-3 * guess[0]), guess[2]])

    def objective(x):
        centre, jitter, amp = x * scale
        try:
            model = dip_model(centre, jitter, amp, omega, nodes)
        except InvalidModelParams:
            return np.inf
        return float(np.sum(w * (y - model) ** 2))

    x0 = np.array(guess) / scale
    f_initial = objective(x0)
    if not np.isfinite(f_initial):
        raise InvalidModelParams(f"initial guess {guess} is outside the model domain")

    iterations = 0
    x = x0
    for step in (0.05, 0.01):
        simplex = np.array([x] + [x + step * np.eye(3)[k] for k in range(3)])
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": xtol,
                "fatol": 1e-12 * f_initial,
                "maxiter": max_iter,
            },
        )
        iterations += res.nit
        if not res.success:
            raise NoConvergence(f"dip fit did not converge in {max_iter} iterations: {res.message}")
        x = res.x

    centre, jitter, amp = x * scale
    jitter = abs(jitter)
    f_final = objective(x)

    errors = _curvature_errors(
        lambda p: dip_model(p[0], p[1], p[2], omega, nodes),
        np.array([centre, jitter, amp]),
        w,
        f_final,
        absolute=sigma is not None,
    )
    return DipFitResult(
        omega_dip_m=float(centre),
        delta_omega=float(jitter),
        overall=float(amp),
        omega_dip_m_error=errors[0],
        delta_omega_error=errors[1],
        overall_error=errors[2],
        residual_norm=math.sqrt(f_final),
        n_points=int(y.size),
        n_iterations=int(iterations),
        initial_guess=guess,
        band_hz=band_hz,
        objective_initial=f_initial,
        objective_final=f_final,
    )


def _jacobian(model, p, rel_step=1e-6):
    cols = []
    for k in range(p.size):
        h = rel_step * max(abs(p[k]), 1e-300)
        up, down = p.copy(), p.copy()
        up[k] += h
        down[k] -= h
        cols.append((model(up) - model(down)) / (2 * h))
    return np.stack(cols, axis=-1)


def _curvature_errors(model, p, w, chi2, absolute):
    J = _jacobian(model, p)
    curvature = J.T @ (w[:, None] * J)
    try:
        cov = np.linalg.inv(curvature)
    except np.linalg.LinAlgError:
        return [math.inf] * p.size
    if not absolute:
        dof = max(w.size - p.size, 1)
        cov = cov * chi2 / dof
    return [float(math.sqrt(v)) if v >= 0 else math.nan for v in np.diag(cov)]


# -- detuning and ratio ------------------------------------------------------


def detuning_from_transmission(p_measured, p_max, kappa):
    """Detuning from the transmitted power relative to the on-resonance peak.

    Inverts the Lorentzian P(Delta) = P_max kappa^2 / (kappa^2 + Delta^2);
    the sign of the detuning is not recoverable, the result is >= 0.
    """
    p_measured = np.asarray(p_measured, dtype=float)
    if np.any(p_measured <= 0) or not p_max > 0:
        raise DataError("transmitted powers must be positive")
    if np.any(p_measured > p_max):
        raise MeasuredExceedsMaximum("measured transmission exceeds the scan maximum")
    return kappa * np.sqrt(p_max / p_measured - 1)


def detuning_error_from_transmission(p_measured, p_max, kappa, p_error):
    """Propagate a transmitted-power uncertainty through the detuning estimate."""
    delta = detuning_from_transmission(p_measured, p_max, kappa)
    p_measured = np.asarray(p_measured, dtype=float)
    with np.errstate(divide="ignore"):
        derivative = kappa**2 * p_max / (2 * p_measured**2 * delta)
    return np.abs(derivative) * np.asarray(p_error, dtype=float)


def ratio_model(detuning, kappa, kappa_in_over_kappa, eta):
    """omega_opt / omega_dip_m, which is independent of the circulating power.

    Depends on the coupling only through r (1 - r), so r and 1 - r are
    indistinguishable.
    """
    x2 = (np.asarray(detuning, dtype=float) / kappa) ** 2
    r = kappa_in_over_kappa
    return np.sqrt(1 - 4 * r * (1 - r) * eta / (1 + x2))


@dataclass(frozen=True)
class RatioData:
    """Spring/dip ratios against detuning (rad/s) with 1-sigma errors."""

    detuning: np.ndarray
    ratio: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, n), dtype=float).ravel() for n in ("detuning", "ratio", "sigma")]
        if len({a.size for a in arrays}) != 1:
            raise DataError("detuning, ratio and sigma must have equal lengths")
        if np.any(~(arrays[2] > 0)):
            raise DataError("ratio errors must be positive")
        for name, a in zip(("detuning", "ratio", "sigma"), arrays):
            object.__setattr__(self, name, a)

    @classmethod
    def from_rows(cls, rows) -> "RatioData":
        rows = np.asarray(rows, dtype=float).reshape(-1, 3)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2])

    def __len__(self):
        return self.detuning.size


def read_ratio_csv(path) -> RatioData:
    """Read ``detuning_hz,ratio,sigma`` (detuning as Delta / 2 pi)."""
    cols = _read_columns(path, ["detuning_hz", "ratio", "sigma"])
    return RatioData(TWO_PI * cols["detuning_hz"], cols["ratio"], cols["sigma"])


def write_ratio_csv(data: RatioData, target):
    with _writable(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["detuning_hz", "ratio", "sigma"])
        for d, r, s in zip(data.detuning, data.ratio, data.sigma):
            writer.writerow([repr(float(d / TWO_PI)), repr(float(r)), repr(float(s))])


@dataclass
class RatioFitResult:
    kappa_in_over_kappa: float
    kappa_in_over_kappa_error: float
    residual_norm: float
    n_points: int
    n_evaluations: int
    boundary_fit: bool
    degenerate: bool = False
    bounds: tuple = field(default=(0.5, 1.0))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bounds"] = list(self.bounds)
        return out


_BRANCHES = {"over": (0.5, 1.0), "under": (0.0, 0.5)}


def fit_ratio(data, kappa, eta, branch="over", xtol=1e-12, boundary_tol=1e-6) -> RatioFitResult:
    """Weighted least-squares estimate of kappa_in / kappa from ratio data.

    ``data`` is a :class:`RatioData` or rows of ``(detuning, ratio, sigma)``
    with detuning in rad/s.  Because the model only sees r (1 - r), the
    search is confined to one coupling branch: ``"over"`` (0.5, 1) or
    ``"under"`` (0, 0.5).  A minimum within ``boundary_tol`` of a branch
    edge sets ``boundary_fit``; with ``eta == 0`` the model does not depend
    on the coupling at all and the result is flagged ``degenerate``.
    """
    if not isinstance(data, RatioData):
        data = RatioData.from_rows(data)
    if len(data) < 2:
        raise InsufficientData(f"ratio fit needs at least 2 points, got {len(data)}")
    try:
        lo, hi = _BRANCHES[branch]
    except KeyError:
        raise ValueError(f"branch must be 'over' or 'under', got {branch!r}") from None
    w = 1 / data.sigma**2

    def chi2(r):
        return float(np.sum(w * (data.ratio - ratio_model(data.detuning, kappa, r, eta)) ** 2))

    res = minimize_scalar(chi2, bounds=(lo, hi), method="bounded", options={"xatol": xtol, "maxiter": 500})
    if not res.success:
        raise NoConvergence(f"ratio fit did not converge: {res.message}")
    r = float(res.x)
    degenerate = eta == 0
    at_edge = min(r - lo, hi - r) < boundary_tol
    if degenerate or at_edge:
        error = math.inf
    else:
        (error,) = _curvature_errors(
            lambda p: ratio_model(data.detuning, kappa, p[0], eta),
            np.array([r]),
            w,
            res.fun,
            absolute=True,
        )
    return RatioFitResult(
        kappa_in_over_kappa=r,
        kappa_in_over_kappa_error=error,
        residual_norm=math.sqrt(res.fun),
        n_points=len(data),
        n_evaluations=int(res.nfev),
        boundary_fit=bool(degenerate or at_edge),
        degenerate=bool(degenerate),
        bounds=(lo, hi),
    )


# -- synthetic data ----------------------------------------------------------


def synthesize_dip_spectrum(
    omega_dip_m, delta_omega, overall, freq_hz, noise=0.01, seed=None, nodes=2
) -> MeasuredSpectrum:
    """Dip-model spectrum with multiplicative Gaussian noise of relative size ``noise``."""
    rng = np.random.default_rng(seed)
    freq = np.asarray(freq_hz, dtype=float)
    clean = dip_model(omega_dip_m, delta_omega, overall, TWO_PI * freq, nodes)
    noisy = clean * (1 + noise * rng.standard_normal(freq.size))
    return MeasuredSpectrum(freq, np.abs(noisy))


def synthesize_ratio_data(detuning, kappa, kappa_in_over_kappa, eta, noise=0.02, seed=None) -> RatioData:
    """Ratio-model points with multiplicative noise; ``sigma`` = noise * true ratio."""
    rng = np.random.default_rng(seed)
    detuning = np.asarray(detuning, dtype=float)
    clean = ratio_model(detuning, kappa, kappa_in_over_kappa, eta)
    noisy = clean * (1 + noise * rng.standard_normal(detuning.size))
    return RatioData(detuning, noisy, noise * clean)
