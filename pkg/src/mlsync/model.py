"""Single-neuron Morris-Lecar model.

All quantities are dimensionless model units.  The conventional reading is
potentials in mV, time in ms and conductances in mS/cm^2, but nothing here
converts units.

The recovery equation is implemented as ``dN/dt = lambda * (n_inf - N) / tau``
with ``tau = 1 / cosh((V - V3) / (2 V4))``.  Some Morris-Lecar references write
the same rate as ``phi * cosh(...) * (n_inf - N)``; the two agree up to the
naming of the time-scale constant.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._jit import njit

# Layout of the packed parameter vector consumed by compiled kernels.
P_C, P_GL, P_GCA, P_GK, P_VL, P_VCA, P_VK, P_I = range(8)
P_VT1, P_VT2, P_VT3, P_VT4, P_LAMBDA = range(8, 13)
N_NEURON_PARAMS = 13

TAU_ARG_CAP = 700.0
TAU_FLOOR = 1e-300


class ParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""


@dataclass(frozen=True)
class NeuronParams:
    """Morris-Lecar constants shared by every neuron in a simulation."""

    C: float
    g_L: float
    g_Ca: float
    g_K: float
    V_L: float
    V_Ca: float
    V_K: float
    I: float
    v1_tilde: float
    v2_tilde: float
    v3_tilde: float
    v4_tilde: float
    lam: float

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        if self.C <= 0:
            raise ParameterError(f"C must be positive, got {self.C}")
        if self.lam <= 0:
            raise ParameterError(f"lam must be positive, got {self.lam}")
        for name in ("v2_tilde", "v4_tilde"):
            if getattr(self, name) == 0:
                raise ParameterError(f"{name} must be nonzero")
        for name in ("g_L", "g_Ca", "g_K"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def replace(self, **changes) -> NeuronParams:
        return dataclasses.replace(self, **changes)

    def as_array(self) -> np.ndarray:
        """Pack into the float64 vector layout used by the kernels."""
        return np.array([getattr(self, f.name) for f in dataclasses.fields(self)], dtype=np.float64)


@dataclass(frozen=True)
class NeuronState:
    v: float
    n_gate: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.n_gate)):
            raise ValueError(f"non-finite neuron state ({self.v}, {self.n_gate})")

    @property
    def gate_in_range(self) -> bool:
        return 0.0 <= self.n_gate <= 1.0


@dataclass(frozen=True)
class GatingValues:
    m_inf: float
    n_inf: float
    tau: float


def warn_if_gate_out_of_range(state: NeuronState, label: str = "neuron") -> bool:
    """Emit a ``RuntimeWarning`` when N lies outside [0, 1].

    Out-of-range gates are legal input; the warning is only a diagnostic.
    """
    if state.gate_in_range:
        return False
    warnings.warn(f"{label}: gating variable N = {state.n_gate} lies outside [0, 1]",
                  RuntimeWarning, stacklevel=2)
    return True


# --- kernels -----------------------------------------------------------------
# Written with numpy ufuncs so they accept scalars or arrays in either backend.

@njit
def _half_tanh(v, centre, width):
    return 0.5 * (1.0 + np.tanh((v - centre) / width))


@njit
def _tau(v, v3, v4):
    arg = np.minimum(np.abs((v - v3) / (2.0 * v4)), TAU_ARG_CAP)
    return np.maximum(1.0 / np.cosh(arg), TAU_FLOOR)


@njit
def ml_rates(v, n, p):
    """Return ``(dV/dt, dN/dt)`` for one neuron; `p` is the packed parameter vector."""
    m = _half_tanh(v, p[P_VT1], p[P_VT2])
    n_inf = _half_tanh(v, p[P_VT3], p[P_VT4])
    tau = _tau(v, p[P_VT3], p[P_VT4])
    dv = (-p[P_GL] * (v - p[P_VL])
          - p[P_GCA] * m * (v - p[P_VCA])
          - p[P_GK] * n * (v - p[P_VK])
          + p[P_I]) / p[P_C]
    dn = p[P_LAMBDA] * (n_inf - n) / tau
    return dv, dn


@njit
def single_field(y, p):
    """Vector field of one uncoupled neuron, state ``y = [V, N]``."""
    out = np.empty(2)
    out[0], out[1] = ml_rates(y[0], y[1], p)
    return out


# --- public operations -------------------------------------------------------

def m_inf(v, params: NeuronParams):
    """Steady-state Ca2+ activation, ``0.5 * (1 + tanh((v - V1) / V2))``."""
    return _half_tanh(v, params.v1_tilde, params.v2_tilde)


def n_inf(v, params: NeuronParams):
    """Steady-state K+ activation, ``0.5 * (1 + tanh((v - V3) / V4))``."""
    return _half_tanh(v, params.v3_tilde, params.v4_tilde)


def tau_recovery(v, params: NeuronParams):
    """Recovery time scale ``1 / cosh((v - V3) / (2 V4))``.

    The cosh argument is capped at 700 and the result floored at 1e-300 so
    the N-equation stays finite far outside the physiological range.
    """
    return _tau(v, params.v3_tilde, params.v4_tilde)


def gating(v: float, params: NeuronParams) -> GatingValues:
    return GatingValues(float(m_inf(v, params)), float(n_inf(v, params)),
                        float(tau_recovery(v, params)))


def neuron_field(state: NeuronState, params: NeuronParams) -> tuple[float, float]:
    """Time derivative ``(dV/dt, dN/dt)`` of an uncoupled neuron."""
    dv, dn = ml_rates(float(state.v), float(state.n_gate), params.as_array())
    return float(dv), float(dn)
