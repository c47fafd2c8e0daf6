"""Two diffusively coupled Morris-Lecar neurons with speed-gradient tuning of
the coupling strength.

State ordering everywhere is ``(V1, N1, V2, N2, sigma)``.  The goal function
is ``Q = (e_V**2 + e_N**2) / 2`` with ``e_V = V1 - V2`` and ``e_N = N1 - N2``.
Its derivative along the coupled flow is linear in sigma with slope
``-2 e_V**2``, which gives the adaptation law ``dsigma/dt = 2 gamma e_V**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .model import N_NEURON_PARAMS, NeuronParams, NeuronState, ml_rates

P_GAMMA = N_NEURON_PARAMS
STATE_LABELS = ("V1", "N1", "V2", "N2", "sigma")


@dataclass(frozen=True)
class CoupledState:
    v1: float
    n1: float
    v2: float
    n2: float
    sigma: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in self.as_tuple()):
            raise ValueError(f"non-finite coupled state {self.as_tuple()}")

    @classmethod
    def from_array(cls, y) -> CoupledState:
        return cls(*(float(x) for x in y))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.v1, self.n1, self.v2, self.n2, self.sigma)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def neuron1(self) -> NeuronState:
        return NeuronState(self.v1, self.n1)

    @property
    def neuron2(self) -> NeuronState:
        return NeuronState(self.v2, self.n2)

    def swapped(self) -> CoupledState:
        """Same state with the neuron labels exchanged."""
        return CoupledState(self.v2, self.n2, self.v1, self.n1, self.sigma)


@dataclass(frozen=True)
class ControllerParams:
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be a positive finite number, got {self.gamma}")


@dataclass(frozen=True)
class ErrorState:
    e_v: float
    e_n: float
    q: float


@dataclass(frozen=True)
class BoundsGuard:
    """Divergence limits on |V1|, |V2|, |N1|, |N2| (closed bounds)."""

    m1: float = 500.0
    m2: float = 500.0
    m3: float = 100.0
    m4: float = 100.0

    def __post_init__(self):
        for name in ("m1", "m2", "m3", "m4"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"bound {name} must be positive, got {value}")

    def limits(self) -> np.ndarray:
        """Per-component limits in coupled-state order; sigma is unguarded."""
        return np.array([self.m1, self.m3, self.m2, self.m4, np.inf])

    def single_limits(self) -> np.ndarray:
        """Limits for a lone neuron ``(V, N)``, taken from the first neuron's bounds."""
        return np.array([self.m1, self.m3])


@dataclass(frozen=True)
class BoundsViolation:
    """Which standing bounds failed; index k refers to bound M_k."""

    indices: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.indices

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "all bounds satisfied"
        names = {1: "|V1| <= M1", 2: "|V2| <= M2", 3: "|N1| <= M3", 4: "|N2| <= M4"}
        return "violated: " + ", ".join(names[k] for k in self.indices)


def pack_params(params: NeuronParams, gamma: float) -> np.ndarray:
    """Neuron parameters followed by the adaptation gain."""
    return np.append(params.as_array(), float(gamma))


# --- kernels -----------------------------------------------------------------

@njit
def closed_loop_field(y, p):
    """Right-hand side of the 5-state closed loop; `p` from :func:`pack_params`."""
    v1, n1, v2, n2, sigma = y[0], y[1], y[2], y[3], y[4]
    f1, g1 = ml_rates(v1, n1, p)
    f2, g2 = ml_rates(v2, n2, p)
    out = np.empty(5)
    out[0] = f1 + sigma * (v2 - v1)
    out[1] = g1
    out[2] = f2 + sigma * (v1 - v2)
    out[3] = g2
    out[4] = 2.0 * p[P_GAMMA] * (v1 - v2) ** 2
    return out


@njit
def omega_kernel(y, p):
    v1, n1, v2, n2, sigma = y[0], y[1], y[2], y[3], y[4]
    f1, g1 = ml_rates(v1, n1, p)
    f2, g2 = ml_rates(v2, n2, p)
    e_v = v1 - v2
    e_n = n1 - n2
    return e_v * (f1 - f2 - 2.0 * sigma * e_v) + e_n * (g1 - g2)


@njit
def omega_series(states, p):
    out = np.empty(states.shape[0])
    for k in range(states.shape[0]):
        out[k] = omega_kernel(states[k], p)
    return out


# --- public operations -------------------------------------------------------

def error_variables(state: CoupledState) -> ErrorState:
    e_v = state.v1 - state.v2
    e_n = state.n1 - state.n2
    return ErrorState(e_v, e_n, 0.5 * (e_v * e_v + e_n * e_n))


def coupled_field(state: CoupledState, params: NeuronParams, ctrl: ControllerParams) -> np.ndarray:
    """``(dV1, dN1, dV2, dN2, dsigma)`` of the closed loop."""
    return closed_loop_field(state.as_array(), pack_params(params, ctrl.gamma))


def sigma_rate(e_v: float, ctrl: ControllerParams) -> float:
    """Adaptation law ``2 gamma e_V**2``."""
    return 2.0 * ctrl.gamma * (e_v * e_v)


def grad_sigma_omega(e_v: float) -> float:
    """Gradient of the goal-function derivative with respect to sigma."""
    return -2.0 * (e_v * e_v)


def omega(state: CoupledState, params: NeuronParams) -> float:
    """dQ/dt along the coupled flow at `state`.

    Independent of gamma; the gain enters only the sigma equation.
    """
    return float(omega_kernel(state.as_array(), pack_params(params, 0.0)))


def check_bounds(state: CoupledState, guard: BoundsGuard) -> BoundsViolation:
    checks = ((1, state.v1, guard.m1), (2, state.v2, guard.m2),
              (3, state.n1, guard.m3), (4, state.n2, guard.m4))
    return BoundsViolation(tuple(k for k, x, bound in checks if not abs(x) <= bound))
