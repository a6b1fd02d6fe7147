"""Numerical models for linear and nonlinear intracavity absorption spectroscopy."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, IntegrationError, NoSteadyStateError,
                     NumericalError)
from .units import (CONSTANTS, C_LIGHT, HBAR, H_PLANCK, CavityGeometry, MediumSpec, NoiseBudget,
                    TraceGas, per_cm_to_per_m, per_m_to_per_cm, photons_from_wcm2, rates_from_geometry,
                    wcm2_from_photons)
from .curves import SensitivityCurve
from .analytic import (empty_cavity_output, empty_cavity_responsivity, empty_cavity_sensitivity_curve,
                       optimal_single_pass, rin_propagation, single_pass_sensitivity)
from .fokkerplanck import (FPParams, moment_derivative, moments, near_threshold_moments,
                           normalized_threshold_responsivity, responsivity, responsivity_map,
                           steady_state)
from .sensitivity import (ComparisonConfig, OperatingPoint, compare_cases, crossover_analysis,
                          driven_gain_sensitivity_curve, gain_sensitivity_curve,
                          optimize_operating_point)
from .bistability import (BistabilityCurve, hysteresis_sweep, saturated_loss, steady_intensities,
                          turning_points)
from .sde import (Drive, SdeConfig, ShotResult, Trajectory, crds_fit_estimator, estimator_comparison,
                  integrate, linearized_ou_check, ringdown_experiment, sweep_up_experiment)
