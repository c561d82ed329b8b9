"""Frequency-separation adaptive feedforward control.

A uniform cosine-modulated filter bank splits the spectrum into regions; each
region gets a low-order plant model identified by recursive least squares and
a short FIR feedforward controller adapted from a filtered reference. The
scheduler works through the regions one at a time and a plant simulator closes
the loop around synthetic plants.
"""

from ._kernels import BACKEND
from .analysis import (attenuation_report, band_powers, controller_fit,
                       evaluation_window, frf_compare, optimal_controller, welch_psd)
from .errors import (BankDesignError, ConfigurationError, DimensionError,
                     DivergenceError, FrequencyRangeError, NumericInputError,
                     SubbandFFCError)
from .ffc import ControllerState
from .filterbank import (BankAnalyzer, BankSpec, FilterBank, analyze, band_of_frequency,
                         design_bank, identity_bank, isolation_report)
from .lti import (FilterState, TransferFunction, cascade, filter_signal, freq_response,
                  is_stable)
from .plantsim import (PlantSim, Scenario, SignalSpec, SimulationTrace,
                       make_fullband_scenario, make_synthetic_scenario, run_open_loop,
                       with_measurement_noise)
from .rls import RlsState, batch_solution
from .scheduler import ConvergenceCriterion, RegionPhase, Scheduler, run
from .sysid import Identifier, RegionOrders, in_band_fit_report

__all__ = [
    "BACKEND",
    "BankAnalyzer", "BankDesignError", "BankSpec", "ConfigurationError",
    "ControllerState", "ConvergenceCriterion", "DimensionError", "DivergenceError",
    "FilterBank", "FilterState", "FrequencyRangeError", "Identifier",
    "NumericInputError", "PlantSim", "RegionOrders", "RegionPhase", "RlsState",
    "Scenario", "Scheduler", "SignalSpec", "SimulationTrace", "SubbandFFCError",
    "TransferFunction",
    "analyze", "attenuation_report", "band_of_frequency", "band_powers",
    "batch_solution", "cascade", "controller_fit", "design_bank", "evaluation_window",
    "filter_signal", "freq_response", "frf_compare", "identity_bank",
    "in_band_fit_report", "is_stable", "isolation_report", "make_fullband_scenario",
    "make_synthetic_scenario", "optimal_controller", "run", "run_open_loop",
    "welch_psd", "with_measurement_noise",
]
