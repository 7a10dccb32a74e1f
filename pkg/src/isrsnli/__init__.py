"""Modulation-format-aware nonlinear interference estimates for links with
inter-channel stimulated Raman scattering.

Three evaluation tiers share one data model: a closed-form estimate, a
reference quadrature tier and a split-step simulator.
"""
__version__ = "0.1.0"

from .closedform import (NliReport, appendix_identity, asymptotic_bracket, eta_from_snr,
                         first_span_link_energy, pair_kernel, snr, total_nli_closedform,
                         xpm_correction_pair)
from .core import Channel, ChannelGrid, EffectiveParams, FiberSpec, LinkPlan
from .errors import (ConfigurationError, ConvergenceError, DomainError, IsrsNliError,
                     NumericalBlowupError, SingularityError, ValidityError)
from .formats import (ModulationFormat, gaussian, kurtosis_from_constellation,
                      maxwell_boltzmann_qam, named_format, psk, square_qam)
from .integral import (QuadratureSpec, gn_xpm_spm_integral, link_function_exact,
                       normalization_Cn, xpm_correction_integral_1d, xpm_correction_integral_2d)
from .raman import (PowerProfile, fit_effective_params, isrs_log_gain, linear_gain_spectrum,
                    solve_raman_odes, triangular_profile)
from .ssfm import SimulationPlan, SimulationResult, estimate_eta, simulate
