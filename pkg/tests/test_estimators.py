import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from conftest import TWO_PI
from optodip import fit
from optodip.budget import compute_budget
from optodip.estimators import CouplingRatioRegressor, DipSpectrumRegressor, NoiseBudgetTransformer
from optodip.exceptions import DataError

FREQ = np.linspace(300, 3000, 400)
W_DIP, W_JIT = TWO_PI * 1180, TWO_PI * 70
KAPPA = TWO_PI * 0.25e6
DETUNINGS = np.array([0.25, 0.5, 0.75, 1.0]) * KAPPA


@pytest.mark.parametrize(
    "est",
    [DipSpectrumRegressor(band=(400, 2000), nodes=4), CouplingRatioRegressor(kappa=3.0, eta=0.5), NoiseBudgetTransformer(port="tra")],
    ids=lambda e: type(e).__name__,
)
def test_params_round_trip(est):
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    cloned.set_params(**est.get_params())
    assert repr(cloned) == repr(est)


class TestDipRegressor:
    def test_matches_function(self):
        data = fit.synthesize_dip_spectrum(W_DIP, W_JIT, 1.0, FREQ, seed=0)
        est = DipSpectrumRegressor().fit(data.freq_hz.reshape(-1, 1), data.asd)
        direct = fit.fit_dip(data)
        assert est.omega_dip_m_ == direct.omega_dip_m
        assert est.delta_omega_ == direct.delta_omega
        np.testing.assert_allclose(est.predict(FREQ[:, None]), fit.dip_model(W_DIP, W_JIT, 1.0, TWO_PI * FREQ), rtol=0.05)
        assert est.score(FREQ[:, None], data.asd) > 0.95

    def test_unsorted_input(self):
        data = fit.synthesize_dip_spectrum(W_DIP, W_JIT, 1.0, FREQ, seed=1)
        perm = np.random.default_rng(0).permutation(FREQ.size)
        a = DipSpectrumRegressor().fit(data.freq_hz, data.asd)
        b = DipSpectrumRegressor().fit(data.freq_hz[perm], data.asd[perm])
        assert a.result_.to_dict() == b.result_.to_dict()

    def test_sample_weight_is_inverse_variance(self):
        data = fit.synthesize_dip_spectrum(W_DIP, W_JIT, 1.0, FREQ, seed=2)
        sigma = 0.01 * data.asd
        est = DipSpectrumRegressor().fit(data.freq_hz, data.asd, sample_weight=sigma**-2)
        direct = fit.fit_dip(fit.MeasuredSpectrum(data.freq_hz, data.asd, sigma))
        assert est.omega_dip_m_ == pytest.approx(direct.omega_dip_m, rel=1e-12)
        assert est.result_.omega_dip_m_error == pytest.approx(direct.omega_dip_m_error, rel=1e-9)

    def test_rejects_bad_input(self):
        with pytest.raises(DataError):
            DipSpectrumRegressor().fit(np.ones((5, 2)), np.ones(5))
        with pytest.raises(DataError):
            DipSpectrumRegressor().fit(FREQ, np.ones_like(FREQ), sample_weight=np.zeros_like(FREQ))
        with pytest.raises(ValueError):
            DipSpectrumRegressor().fit(FREQ, np.ones(3))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            DipSpectrumRegressor().predict(FREQ)


class TestRatioRegressor:
    def test_recovers(self):
        data = fit.synthesize_ratio_data(DETUNINGS, KAPPA, 0.81, 0.92, noise=0.02, seed=0)
        est = CouplingRatioRegressor(kappa=KAPPA, eta=0.92).fit(data.detuning, data.ratio, sample_weight=data.sigma**-2)
        direct = fit.fit_ratio(data, KAPPA, 0.92)
        assert est.kappa_in_over_kappa_ == pytest.approx(direct.kappa_in_over_kappa, abs=1e-9)
        assert est.result_.kappa_in_over_kappa_error == pytest.approx(direct.kappa_in_over_kappa_error, rel=1e-6)
        np.testing.assert_allclose(est.predict(DETUNINGS), fit.ratio_model(DETUNINGS, KAPPA, est.kappa_in_over_kappa_, 0.92))

    def test_requires_kappa(self):
        with pytest.raises(ValueError):
            CouplingRatioRegressor().fit(DETUNINGS, np.full(4, 0.9))


class TestBudgetTransformer:
    def test_transform(self, fig2):
        freq = np.geomspace(10, 2000, 50)
        t = NoiseBudgetTransformer(params=fig2, engine="both").fit(freq)
        out = t.transform(freq[:, None])
        assert out.shape == (50, 8)
        assert list(t.get_feature_names_out())[:4] == ["s_b1", "s_b2", "s_d", "s_total"]
        np.testing.assert_array_equal(out, compute_budget(fig2, freq, engine="both").rows()[:, 1:])

    def test_in_pipeline(self, fig2):
        freq = np.geomspace(10, 2000, 20)
        out = make_pipeline(NoiseBudgetTransformer(params=fig2, amplitude=True)).fit_transform(freq)
        assert out.shape == (20, 4)

    def test_requires_params(self):
        with pytest.raises(ValueError):
            NoiseBudgetTransformer().fit()
