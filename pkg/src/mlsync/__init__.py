"""Two Morris-Lecar neurons synchronized by speed-gradient adaptation of their
coupling strength.

Set ``MLSYNC_BACKEND=numpy`` before import to run the kernels without numba.
"""
from ._jit import BACKEND
from .coupling import (BoundsGuard, ControllerParams, CoupledState, ErrorState, check_bounds,
                       coupled_field, error_variables, grad_sigma_omega, omega, sigma_rate)
from .harness import (ConfigError, CoupledSeries, SimConfig, SweepSpec, SyncMetrics, run_coupled,
                      run_single, run_sweep, sync_metrics)
from .integrator import (IntegratorSettings, OdeSystem, Termination, Trajectory, integrate,
                         rk4_step, rk45_step)
from .model import (GatingValues, NeuronParams, NeuronState, gating, m_inf, n_inf, neuron_field,
                    tau_recovery)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoundsGuard", "ConfigError", "ControllerParams", "CoupledSeries", "CoupledState",
    "ErrorState", "GatingValues", "IntegratorSettings", "NeuronParams", "NeuronState", "OdeSystem",
    "SimConfig", "SweepSpec", "SyncMetrics", "Termination", "Trajectory", "check_bounds",
    "coupled_field", "error_variables", "gating", "grad_sigma_omega", "integrate", "m_inf",
    "n_inf", "neuron_field", "omega", "rk45_step", "rk4_step", "run_coupled", "run_single",
    "run_sweep", "sigma_rate", "sync_metrics", "tau_recovery",
]
