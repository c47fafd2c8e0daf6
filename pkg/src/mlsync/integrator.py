"""Explicit integrators for autonomous ODE systems.

Two routes produce the same trajectories:

* compiled drivers (:func:`_run_fixed`, :func:`_run_adaptive`) for the
  registered model kernels when no Python callbacks are involved;
* a Python loop over :func:`rk4_step` / :func:`rk45_step`, used for stop
  conditions, callable guards and arbitrary fields.

A field has the signature ``field(y, params) -> ndarray``.  The drivers select
the kernel by its index in :data:`COMPILED_FIELDS` rather than taking it as a
function argument, which keeps them cacheable on disk.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from ._jit import njit
from .coupling import closed_loop_field
from .model import single_field

RK4 = "rk4-fixed"
RK45 = "rk45-adaptive"
METHODS = (RK4, RK45)

SAFETY = 0.9
GROWTH_MIN = 0.2
GROWTH_MAX = 5.0
UNDERFLOW_FRACTION = 1e-12

# driver status codes
_OK, _GUARD, _NONFINITE, _UNDERFLOW = 0, 1, 2, 3


class DivergenceError(ArithmeticError):
    """A step produced a non-finite state."""


class StepSizeUnderflow(ArithmeticError):
    """Adaptive step control asked for a step below the allowed minimum."""


class Termination(str, enum.Enum):
    REACHED_T_END = "reached-t-end"
    STOP_CONDITION = "stop-condition"
    DIVERGENCE_GUARD = "divergence-guard"


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = RK4
    h: float = 0.01
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_end: float = 200.0
    record_stride: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("h", "rel_tol", "abs_tol", "t_end"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride}")
        object.__setattr__(self, "record_stride", int(self.record_stride))


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    field: Callable
    params: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))

    def __call__(self, y):
        return self.field(y, self.params)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    step_underflow: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    termination: Termination
    stats: StepStats
    message: str = ""

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


def fixed_step_count(t_end: float, h: float) -> tuple[int, float]:
    """Number of RK4 steps covering ``[0, t_end]`` and the length of the last one."""
    q = t_end / h
    nearest = round(q)
    if nearest >= 1 and abs(q - nearest) <= 1e-9 * max(1.0, q):
        return int(nearest), h
    n = math.ceil(q)
    return n, t_end - (n - 1) * h


# --- kernels -----------------------------------------------------------------

COMPILED_FIELDS = (single_field, closed_loop_field)


def kernel_id(field) -> int:
    """Index of `field` in :data:`COMPILED_FIELDS`, or -1."""
    for i, known in enumerate(COMPILED_FIELDS):
        if field is known:
            return i
    return -1


@njit(nogil=True)
def _eval(kind, y, p):
    if kind == 0:
        return single_field(y, p)
    return closed_loop_field(y, p)


@njit(nogil=True)
def _rk4_advance(kind, p, y, h):
    k1 = _eval(kind, y, p)
    k2 = _eval(kind, y + (0.5 * h) * k1, p)
    k3 = _eval(kind, y + (0.5 * h) * k2, p)
    k4 = _eval(kind, y + h * k3, p)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-order weights minus embedded fourth-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(nogil=True)
def _error_norm(y, y_new, err_vec, rel_tol, abs_tol):
    """RMS of the error estimate scaled by ``abs_tol + rel_tol * max(|y|, |y_new|)``."""
    acc = 0.0
    for i in range(y.shape[0]):
        scale = abs_tol + rel_tol * max(abs(y[i]), abs(y_new[i]))
        acc += (err_vec[i] / scale) ** 2
    return math.sqrt(acc / y.shape[0])


@njit(nogil=True)
def _step_factor(err):
    if err == 0.0:
        return GROWTH_MAX
    return min(GROWTH_MAX, max(GROWTH_MIN, SAFETY * err ** -0.2))


@njit(nogil=True)
def _dopri_advance(kind, p, y, h, rel_tol, abs_tol):
    """One Dormand-Prince attempt: (5th-order state, error norm, step factor)."""
    k1 = _eval(kind, y, p)
    k2 = _eval(kind, y + h * (_A21 * k1), p)
    k3 = _eval(kind, y + h * (_A31 * k1 + _A32 * k2), p)
    k4 = _eval(kind, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), p)
    k5 = _eval(kind, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), p)
    k6 = _eval(kind, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5), p)
    y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
    k7 = _eval(kind, y_new, p)
    err_vec = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
    err = _error_norm(y, y_new, err_vec, rel_tol, abs_tol)
    return y_new, err, _step_factor(err)


@njit(nogil=True)
def _all_finite(y):
    for x in y:
        if not np.isfinite(x):
            return False
    return True


@njit(nogil=True)
def _within(y, limits):
    for i in range(y.shape[0]):
        if not np.abs(y[i]) <= limits[i]:
            return False
    return True


@njit(nogil=True)
def _run_fixed(kind, p, y0, h, n_steps, h_last, t_end, stride, limits):
    dim = y0.shape[0]
    cap = n_steps // stride + 2
    times = np.empty(cap)
    states = np.empty((cap, dim))
    times[0] = 0.0
    states[0] = y0
    count = 1
    y = y0.copy()
    status = _OK
    done = 0
    for k in range(1, n_steps + 1):
        hk = h if k < n_steps else h_last
        y_new = _rk4_advance(kind, p, y, hk)
        if not _all_finite(y_new):
            status = _NONFINITE
            break
        y = y_new
        done = k
        t = k * h if k < n_steps else t_end
        ok = _within(y, limits)
        if not ok or k % stride == 0 or k == n_steps:
            times[count] = t
            states[count] = y
            count += 1
        if not ok:
            status = _GUARD
            break
    if status == _NONFINITE and done > 0 and times[count - 1] != done * h:
        times[count] = done * h
        states[count] = y
        count += 1
    return times[:count], states[:count], status, done


@njit(nogil=True)
def _grow(times, states):
    n = times.shape[0]
    new_times = np.empty(2 * n)
    new_states = np.empty((2 * n, states.shape[1]))
    new_times[:n] = times
    new_states[:n] = states
    return new_times, new_states


@njit(nogil=True)
def _run_adaptive(kind, p, y0, h0, t_end, rel_tol, abs_tol, stride, limits, h_min):
    dim = y0.shape[0]
    times = np.empty(1024)
    states = np.empty((1024, dim))
    times[0] = 0.0
    states[0] = y0
    count = 1
    y = y0.copy()
    t = 0.0
    comp = 0.0
    h = min(h0, t_end)
    accepted = 0
    rejected = 0
    status = _OK
    while t < t_end:
        last = t + h >= t_end - h_min
        if last:
            h = t_end - t
        y_new, err, factor = _dopri_advance(kind, p, y, h, rel_tol, abs_tol)
        if not _all_finite(y_new) or not np.isfinite(err):
            err = np.inf
            factor = GROWTH_MIN
        if err > 1.0:
            rejected += 1
            h = h * min(factor, 1.0)
            if h < h_min:
                status = _UNDERFLOW
                break
            continue
        accepted += 1
        y = y_new
        if last:
            t = t_end
        else:
            # compensated accumulation of the step lengths
            incr = h - comp
            t_next = t + incr
            comp = (t_next - t) - incr
            t = t_next
        ok = _within(y, limits)
        if not ok or accepted % stride == 0 or t >= t_end:
            if count == times.shape[0]:
                times, states = _grow(times, states)
            times[count] = t
            states[count] = y
            count += 1
        if not ok:
            status = _GUARD
            break
        h_next = h * factor
        if h_next < h_min and t < t_end:
            status = _UNDERFLOW
            break
        h = h_next
    if status != _OK and status != _GUARD and accepted > 0 and times[count - 1] != t:
        if count == times.shape[0]:
            times, states = _grow(times, states)
        times[count] = t
        states[count] = y
        count += 1
    return times[:count].copy(), states[:count].copy(), status, accepted, rejected


# --- public operations -------------------------------------------------------

def rk4_step(system: OdeSystem, state, h: float) -> np.ndarray:
    """One classical Runge-Kutta step; raises :class:`DivergenceError` on blow-up."""
    y = np.asarray(state, dtype=np.float64)
    k1 = np.asarray(system(y), dtype=np.float64)
    k2 = np.asarray(system(y + (0.5 * h) * k1), dtype=np.float64)
    k3 = np.asarray(system(y + (0.5 * h) * k2), dtype=np.float64)
    k4 = np.asarray(system(y + h * k3), dtype=np.float64)
    y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise DivergenceError(f"non-finite state after RK4 step of size {h}")
    return y_new


def rk45_step(system: OdeSystem, state, h: float, rel_tol: float, abs_tol: float,
              h_min: float = 0.0) -> tuple[np.ndarray, float, float]:
    """One Dormand-Prince 5(4) attempt.

    Returns the fifth-order state, the RMS error norm scaled by
    ``abs_tol + rel_tol * max(|y|, |y_new|)`` (the step is acceptable when it
    is <= 1) and the suggested next step.  A rejected step never suggests
    growth.  A trial that produces non-finite values reports an infinite
    error, so it is rejected and retried with a smaller step.  Raises
    :class:`StepSizeUnderflow` if the suggestion is below `h_min`.
    """
    y = np.asarray(state, dtype=np.float64)

    def f(x):
        return np.asarray(system(x), dtype=np.float64)

    k1 = f(y)
    k2 = f(y + h * (_A21 * k1))
    k3 = f(y + h * (_A31 * k1 + _A32 * k2))
    k4 = f(y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
    k5 = f(y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
    k6 = f(y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
    y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
    k7 = f(y_new)
    err_vec = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
    err = float(_error_norm(y, y_new, err_vec, rel_tol, abs_tol))
    if not (np.all(np.isfinite(y_new)) and math.isfinite(err)):
        err = math.inf
    factor = _step_factor(err)
    if err > 1.0:
        factor = min(factor, 1.0)
    h_new = h * factor
    if h_new < h_min:
        raise StepSizeUnderflow(f"suggested step {h_new:.3e} below minimum {h_min:.3e}")
    return y_new, float(err), h_new


def integrate(system: OdeSystem, initial, settings: IntegratorSettings,
              stop: Optional[Callable] = None, guard=None) -> Trajectory:
    """Advance `system` from t = 0 to ``settings.t_end``.

    `stop(t, y)` ends the run when it returns true.  `guard` is either an
    array of per-component absolute limits (closed bounds) or a callable
    ``guard(t, y)`` returning true while the state is acceptable.  Guard
    failures and non-finite states end the run with
    ``Termination.DIVERGENCE_GUARD`` and return the finite part.
    """
    y0 = np.array(initial, dtype=np.float64)
    if y0.shape != (system.dimension,):
        raise ValueError(f"initial state has shape {y0.shape}, expected ({system.dimension},)")
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")

    callable_guard = guard is not None and callable(guard)
    limits = None
    if guard is not None and not callable_guard:
        limits = np.asarray(guard, dtype=np.float64)
        if limits.shape != y0.shape:
            raise ValueError("guard limits must match the state dimension")

    kind = kernel_id(system.field)
    if stop is None and not callable_guard and kind >= 0:
        return _integrate_driver(kind, system, y0, settings, limits)
    return _integrate_python(system, y0, settings, stop, guard if callable_guard else None, limits)


def _integrate_driver(kind, system, y0, settings, limits):
    if limits is None:
        limits = np.full(y0.shape, np.inf)
    params = np.asarray(system.params, dtype=np.float64)
    if settings.method == RK4:
        n_steps, h_last = fixed_step_count(settings.t_end, settings.h)
        times, states, status, done = _run_fixed(
            kind, params, y0, settings.h, n_steps, h_last, settings.t_end,
            settings.record_stride, limits)
        stats = StepStats(accepted=int(done), evaluations=4 * int(done) + (4 if status == _NONFINITE else 0))
    else:
        h_min = UNDERFLOW_FRACTION * settings.t_end
        times, states, status, acc, rej = _run_adaptive(
            kind, params, y0, settings.h, settings.t_end, settings.rel_tol,
            settings.abs_tol, settings.record_stride, limits, h_min)
        stats = StepStats(accepted=int(acc), rejected=int(rej), evaluations=7 * int(acc + rej))
    return _finish(times, states, int(status), stats)


def _finish(times, states, status, stats):
    if status == _OK:
        return Trajectory(times, states, Termination.REACHED_T_END, stats)
    if status == _UNDERFLOW:
        stats.step_underflow = True
        message = f"step size underflow at t = {times[-1]:.17g}"
    elif status == _GUARD:
        message = f"state left the guard bounds at t = {times[-1]:.17g}"
    else:
        message = f"non-finite state after t = {times[-1]:.17g}"
    return Trajectory(times, states, Termination.DIVERGENCE_GUARD, stats, message)


def _integrate_python(system, y0, settings, stop, guard, limits):
    times = [0.0]
    states = [y0.copy()]
    stats = StepStats()
    if stop is not None and stop(0.0, y0):
        return Trajectory(np.array(times), np.array(states), Termination.STOP_CONDITION, stats)

    def acceptable(t, y):
        if limits is not None and not np.all(np.abs(y) <= limits):
            return False
        return guard is None or bool(guard(t, y))

    stride = settings.record_stride
    y = y0.copy()
    status = _OK
    termination = Termination.REACHED_T_END
    if settings.method == RK4:
        n_steps, h_last = fixed_step_count(settings.t_end, settings.h)
        for k in range(1, n_steps + 1):
            hk = settings.h if k < n_steps else h_last
            stats.evaluations += 4
            try:
                y = rk4_step(system, y, hk)
            except DivergenceError:
                status = _NONFINITE
                break
            stats.accepted = k
            t = k * settings.h if k < n_steps else settings.t_end
            ok = acceptable(t, y)
            halt = ok and stop is not None and bool(stop(t, y))
            if not ok or halt or k % stride == 0 or k == n_steps:
                times.append(t)
                states.append(y)
            if not ok:
                status = _GUARD
                break
            if halt:
                termination = Termination.STOP_CONDITION
                break
        if status == _NONFINITE and stats.accepted and times[-1] != stats.accepted * settings.h:
            times.append(stats.accepted * settings.h)
            states.append(y)
    else:
        t_end = settings.t_end
        h_min = UNDERFLOW_FRACTION * t_end
        t, comp = 0.0, 0.0
        h = min(settings.h, t_end)
        while t < t_end:
            last = t + h >= t_end - h_min
            if last:
                h = t_end - t
            stats.evaluations += 7
            y_new, err, h_next = rk45_step(system, y, h, settings.rel_tol, settings.abs_tol)
            if err > 1.0:
                stats.rejected += 1
                h = h_next
                if h < h_min:
                    status = _UNDERFLOW
                    break
                continue
            stats.accepted += 1
            y = y_new
            if last:
                t = t_end
            else:
                incr = h - comp
                t_next = t + incr
                comp = (t_next - t) - incr
                t = t_next
            ok = acceptable(t, y)
            halt = ok and stop is not None and bool(stop(t, y))
            if not ok or halt or stats.accepted % stride == 0 or t >= t_end:
                times.append(t)
                states.append(y)
            if not ok:
                status = _GUARD
                break
            if halt:
                termination = Termination.STOP_CONDITION
                break
            if h_next < h_min and t < t_end:
                status = _UNDERFLOW
                break
            h = h_next
        if status in (_NONFINITE, _UNDERFLOW) and stats.accepted and times[-1] != t:
            times.append(t)
            states.append(y)

    times_arr = np.array(times)
    states_arr = np.array(states).reshape(len(times), y0.shape[0])
    if termination is Termination.STOP_CONDITION:
        return Trajectory(times_arr, states_arr, termination, stats)
    return _finish(times_arr, states_arr, status, stats)
