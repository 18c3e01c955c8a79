"""scikit-learn compatible wrappers.

``X`` is always a single feature: frequency in Hz for the spectral
estimators, detuning in rad/s for the ratio regressor.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _validation
from .budget import COLUMNS, compute_budget
from .fit import MeasuredSpectrum, RatioData, dip_model, fit_dip, fit_ratio, ratio_model

__all__ = ["DipSpectrumRegressor", "CouplingRatioRegressor", "NoiseBudgetTransformer"]


class DipSpectrumRegressor(RegressorMixin, BaseEstimator):
    """Fit the jittered back-action dip to an amplitude spectrum.

    Parameters
    ----------
    omega_dip_m_init, delta_omega_init, overall_init : float or None
        Starting point in rad/s (overall in data units); ``None`` entries are
        estimated from the data.
    band : (float, float) or None
        Fit band in Hz.
    prescan : bool
        Grid-scan the dip centre before the local search.
    max_iter, xtol : int, float
        Nelder-Mead limits per restart.
    nodes : int
        Gauss-Hermite nodes for the jitter average (2 reproduces the
        two-spectrum average).

    Attributes
    ----------
    omega_dip_m_, delta_omega_, overall_ : float
    result_ : DipFitResult
    """

    def __init__(
        self,
        omega_dip_m_init=None,
        delta_omega_init=None,
        overall_init=None,
        band=None,
        prescan=True,
        max_iter=500,
        xtol=1e-8,
        nodes=2,
    ):
        self.omega_dip_m_init = omega_dip_m_init
        self.delta_omega_init = delta_omega_init
        self.overall_init = overall_init
        self.band = band
        self.prescan = prescan
        self.max_iter = max_iter
        self.xtol = xtol
        self.nodes = nodes

    def fit(self, X, y, sample_weight=None):
        freq, asd = _validation.xy(X, y)
        weights = _validation.positive_weights(sample_weight, freq.size)
        order = np.argsort(freq)
        sigma = None if weights is None else 1 / np.sqrt(weights[order])
        data = MeasuredSpectrum(freq[order], asd[order], sigma)
        guess = (self.omega_dip_m_init, self.delta_omega_init, self.overall_init)
        self.result_ = fit_dip(
            data,
            initial_guess=None if guess == (None, None, None) else guess,
            band=self.band,
            prescan=self.prescan,
            max_iter=self.max_iter,
            xtol=self.xtol,
            nodes=self.nodes,
        )
        self.omega_dip_m_ = self.result_.omega_dip_m
        self.delta_omega_ = self.result_.delta_omega
        self.overall_ = self.result_.overall
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        freq = _validation.column(X)
        return dip_model(self.omega_dip_m_, self.delta_omega_, self.overall_, 2 * np.pi * freq, self.nodes)


class CouplingRatioRegressor(RegressorMixin, BaseEstimator):
    """Estimate kappa_in / kappa from spring-to-dip frequency ratios.

    ``fit(X, y, sample_weight)`` takes detunings (rad/s) and measured ratios;
    ``sample_weight`` is 1/sigma**2.  Without weights every point gets
    sigma = 1, so the reported error is only meaningful with weights.
    """

    def __init__(self, kappa=None, eta=1.0, branch="over"):
        self.kappa = kappa
        self.eta = eta
        self.branch = branch

    def fit(self, X, y, sample_weight=None):
        if self.kappa is None or not self.kappa > 0:
            raise ValueError("kappa (rad/s) must be set to a positive value")
        detuning, ratio = _validation.xy(X, y)
        weights = _validation.positive_weights(sample_weight, detuning.size)
        sigma = np.ones_like(ratio) if weights is None else 1 / np.sqrt(weights)
        self.result_ = fit_ratio(RatioData(detuning, ratio, sigma), self.kappa, self.eta, self.branch)
        self.kappa_in_over_kappa_ = self.result_.kappa_in_over_kappa
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return ratio_model(_validation.column(X), self.kappa, self.kappa_in_over_kappa_, self.eta)


class NoiseBudgetTransformer(TransformerMixin, BaseEstimator):
    """Map frequencies (Hz) to SQL-normalised noise-budget columns.

    Stateless apart from checking its configuration in ``fit``.  Output
    columns follow :meth:`get_feature_names_out`.
    """

    def __init__(self, params=None, port="reflection", engine="closed", amplitude=False):
        self.params = params
        self.port = port
        self.engine = engine
        self.amplitude = amplitude

    def fit(self, X=None, y=None):
        if self.params is None:
            raise ValueError("params must be a CavityParams instance")
        self.params.require_spring()
        names = list(COLUMNS)
        if self.engine == "both":
            names += [f"{c}_exact" for c in COLUMNS]
        self.feature_names_out_ = np.array(names, dtype=object)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        freq = _validation.column(X)
        budget = compute_budget(self.params, freq, self.port, self.engine, self.amplitude)
        return budget.rows()[:, 1:]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_
