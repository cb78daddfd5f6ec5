from .g2fit import (FitWarning, cw_fit_options, dark_floor, dark_residual, fit_cw_g2, fit_pulsed_g2,
                    normalized_floor, pulsed_model, subtract_dark)
from .lm import levenberg_marquardt
from .results import FitResult, fit_model
from .spectra import (DecayCurve, Spectrum, classify_overlap, fit_lifetime, fit_lorentzian,
                      lorentzian, peak_separation, purcell_beta)
