"""Force-noise modelling for amplitude readout of a detuned optomechanical cavity."""

from .analytic import (
    ApproximationWarning,
    characteristic_frequencies,
    omega_dip,
    omega_dip_measured,
    omega_opt,
    total_spectrum,
)
from .params import CavityParams, derive, load_config, preset
from .twophoton import Port, force_noise_spectrum_exact, transfer_coefficients

__version__ = "0.1.0"
