"""Scenario runs, synchronization metrics and parameter sweeps."""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coupling import BoundsGuard, closed_loop_field, omega_series, pack_params
from .integrator import IntegratorSettings, OdeSystem, StepStats, Termination, Trajectory, integrate
from .model import NeuronParams, ParameterError, single_field

log = logging.getLogger(__name__)

SINGLE = "single"
COUPLED = "coupled"
DEFAULT_SWEEP_CAP = 10_000


class ConfigError(ValueError):
    """Invalid scenario description; the message names the offending key."""


# dotted path -> NeuronParams attribute
NEURON_KEYS = {
    "neuron.C": "C", "neuron.g_L": "g_L", "neuron.g_Ca": "g_Ca", "neuron.g_K": "g_K",
    "neuron.V_L": "V_L", "neuron.V_Ca": "V_Ca", "neuron.V_K": "V_K", "neuron.I": "I",
    "neuron.v1_tilde": "v1_tilde", "neuron.v2_tilde": "v2_tilde",
    "neuron.v3_tilde": "v3_tilde", "neuron.v4_tilde": "v4_tilde",
    "neuron.lambda": "lam",
}
INTEGRATOR_KEYS = {
    "integrator.method": "method", "integrator.h": "h", "integrator.rel_tol": "rel_tol",
    "integrator.abs_tol": "abs_tol", "integrator.t_end": "t_end",
    "integrator.record_stride": "record_stride",
}
BOUNDS_KEYS = {"bounds.M1": "m1", "bounds.M2": "m2", "bounds.M3": "m3", "bounds.M4": "m4"}
SINGLE_IC_KEYS = ("V0", "N0")
COUPLED_IC_KEYS = ("V10", "N10", "V20", "N20", "sigma0")
TEXT_KEYS = frozenset({"name", "description", "mode", "integrator.method"})
NUMERIC_KEYS = frozenset(
    [*NEURON_KEYS, *INTEGRATOR_KEYS, *BOUNDS_KEYS, *SINGLE_IC_KEYS, *COUPLED_IC_KEYS,
     "gamma", "sync.tolerance"]) - TEXT_KEYS
KNOWN_KEYS = NUMERIC_KEYS | TEXT_KEYS


@dataclass(frozen=True)
class SimConfig:
    """One scenario.

    `initial` is ``(V0, N0)`` in single mode and ``(V10, N10, V20, N20,
    sigma0)`` in coupled mode.  `gamma` may be 0 (frozen coupling strength).
    """

    neuron: NeuronParams
    mode: str
    initial: tuple
    integrator: IntegratorSettings = IntegratorSettings()
    gamma: Optional[float] = None
    sync_tolerance: float = 1e-3
    bounds: BoundsGuard = BoundsGuard()
    name: str = ""
    description: str = ""

    def __post_init__(self):
        if self.mode not in (SINGLE, COUPLED):
            raise ConfigError(f"mode: expected 'single' or 'coupled', got {self.mode!r}")
        want = 2 if self.mode == SINGLE else 5
        if len(self.initial) != want:
            raise ConfigError(f"{self.mode} mode needs {want} initial values, got {len(self.initial)}")
        if not all(math.isfinite(x) for x in self.initial):
            raise ConfigError(f"initial conditions must be finite: {self.initial}")
        if self.mode == COUPLED:
            if self.gamma is None:
                raise ConfigError("gamma: required in coupled mode")
            if not (math.isfinite(self.gamma) and self.gamma >= 0):
                raise ConfigError(f"gamma: must be finite and >= 0, got {self.gamma}")
        if not (math.isfinite(self.sync_tolerance) and self.sync_tolerance > 0):
            raise ConfigError(f"sync.tolerance: must be positive, got {self.sync_tolerance}")

    # flat dotted-path view shared by config files, overrides and sweeps

    def to_flat(self) -> dict:
        flat = {"name": self.name, "description": self.description, "mode": self.mode}
        ic_keys = SINGLE_IC_KEYS if self.mode == SINGLE else COUPLED_IC_KEYS
        flat.update(zip(ic_keys, self.initial))
        if self.gamma is not None:
            flat["gamma"] = self.gamma
        flat.update({k: getattr(self.neuron, a) for k, a in NEURON_KEYS.items()})
        flat.update({k: getattr(self.integrator, a) for k, a in INTEGRATOR_KEYS.items()})
        flat.update({k: getattr(self.bounds, a) for k, a in BOUNDS_KEYS.items()})
        flat["sync.tolerance"] = self.sync_tolerance
        return flat

    @classmethod
    def from_flat(cls, flat: dict) -> SimConfig:
        unknown = sorted(set(flat) - KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}")
        values = {k: _coerce(k, v) for k, v in flat.items()}

        def require(key):
            if key not in values:
                raise ConfigError(f"{key}: missing")
            return values[key]

        mode = require("mode")
        if mode not in (SINGLE, COUPLED):
            raise ConfigError(f"mode: expected 'single' or 'coupled', got {mode!r}")
        ic_keys = SINGLE_IC_KEYS if mode == SINGLE else COUPLED_IC_KEYS
        try:
            neuron = NeuronParams(**{a: require(k) for k, a in NEURON_KEYS.items()})
        except ParameterError as exc:
            message = str(exc)
            for key, attr in NEURON_KEYS.items():
                if message.startswith(attr + " "):
                    message = key + message[len(attr):]
            raise ConfigError(message) from None
        integ_kwargs = {a: values[k] for k, a in INTEGRATOR_KEYS.items() if k in values}
        try:
            integ = IntegratorSettings(**integ_kwargs)
        except ValueError as exc:
            raise ConfigError(f"integrator: {exc}") from None
        try:
            bounds = BoundsGuard(**{a: values[k] for k, a in BOUNDS_KEYS.items() if k in values})
        except ValueError as exc:
            raise ConfigError(f"bounds: {exc}") from None
        return cls(
            neuron=neuron,
            mode=mode,
            initial=tuple(require(k) for k in ic_keys),
            integrator=integ,
            gamma=values.get("gamma"),
            sync_tolerance=values.get("sync.tolerance", 1e-3),
            bounds=bounds,
            name=values.get("name", ""),
            description=values.get("description", ""),
        )

    def with_overrides(self, overrides: dict) -> SimConfig:
        """New config with dotted-path `overrides` applied, validated as a whole."""
        flat = self.to_flat()
        flat.update(overrides)
        return SimConfig.from_flat(flat)


def _coerce(key, value):
    if key in TEXT_KEYS:
        return str(value)
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if key == "integrator.record_stride":
        if not math.isfinite(value) or value != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value}")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class CoupledSeries:
    """Per-sample derived quantities of a closed-loop run."""

    t: np.ndarray
    e_v: np.ndarray
    e_n: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class SyncMetrics:
    sync_time: Optional[float]
    final_sigma: float
    max_abs_ev_tail: Optional[float]
    max_abs_en_tail: Optional[float]
    q_final: float
    omega_first_nonpositive_onset: Optional[float]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class OscillationSummary:
    peak_times: tuple
    mean_period: Optional[float]
    v_min: float
    v_max: float


def _warn_gates(config: SimConfig):
    gates = config.initial[1:4:2]
    for i, n in enumerate(gates, start=1):
        if not 0.0 <= n <= 1.0:
            log.info("%s: initial gate N%d = %g lies outside [0, 1]", config.name or "scenario", i, n)


def run_single(config: SimConfig) -> Trajectory:
    """Integrate one uncoupled neuron from ``(V0, N0)``."""
    if config.mode != SINGLE:
        raise ConfigError(f"mode: run_single needs mode 'single', got {config.mode!r}")
    _warn_gates(config)
    system = OdeSystem(2, single_field, config.neuron.as_array())
    return integrate(system, config.initial, config.integrator, guard=config.bounds.single_limits())


def run_coupled(config: SimConfig, stop=None) -> tuple[Trajectory, CoupledSeries]:
    """Integrate the closed loop and derive e_V, e_N, Q, omega and sigma per sample."""
    if config.mode != COUPLED:
        raise ConfigError(f"mode: run_coupled needs mode 'coupled', got {config.mode!r}")
    _warn_gates(config)
    params = pack_params(config.neuron, config.gamma)
    system = OdeSystem(5, closed_loop_field, params)
    traj = integrate(system, config.initial, config.integrator, stop=stop,
                     guard=config.bounds.limits())
    return traj, derive_series(traj, params)


def derive_series(traj: Trajectory, params: np.ndarray) -> CoupledSeries:
    s = traj.states
    e_v = s[:, 0] - s[:, 2]
    e_n = s[:, 1] - s[:, 3]
    q = 0.5 * (e_v * e_v + e_n * e_n)
    return CoupledSeries(traj.times, e_v, e_n, q, omega_series(s, params), s[:, 4].copy())


def sync_metrics(series: CoupledSeries, tolerance: float, t_end: float) -> SyncMetrics:
    """Summarize a closed-loop run.

    ``sync_time`` is the earliest recorded time from which ``max(|e_V|, |e_N|)``
    stays below `tolerance` through the end of the horizon.  It is ``None``
    when the error never settles or the run ended before `t_end`.
    """
    t = series.t
    err = np.maximum(np.abs(series.e_v), np.abs(series.e_n))
    sync_time = None
    reached_end = t[-1] >= t_end * (1 - 1e-12)
    above = np.flatnonzero(~(err < tolerance))
    if reached_end:
        if above.size == 0:
            sync_time = float(t[0])
        elif above[-1] + 1 < t.size:
            sync_time = float(t[above[-1] + 1])

    tail = t >= 0.9 * t_end
    ev_tail = float(np.max(np.abs(series.e_v[tail]))) if tail.any() else None
    en_tail = float(np.max(np.abs(series.e_n[tail]))) if tail.any() else None

    onset = None
    positive = np.flatnonzero(series.omega > 0)
    if positive.size == 0:
        onset = float(t[0])
    elif positive[-1] + 1 < t.size:
        onset = float(t[positive[-1] + 1])

    return SyncMetrics(sync_time, float(series.sigma[-1]), ev_tail, en_tail,
                       float(series.q[-1]), onset)


def peak_times(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Times of sampled local maxima (``v[i-1] < v[i] >= v[i+1]``)."""
    if v.size < 3:
        return np.empty(0)
    mid = v[1:-1]
    idx = np.flatnonzero((mid > v[:-2]) & (mid >= v[2:])) + 1
    return t[idx]


def oscillation_summary(traj: Trajectory, discard_fraction: float = 0.25) -> OscillationSummary:
    """Peaks of V after the first `discard_fraction` of the run, and their mean spacing."""
    t, v = traj.times, traj.states[:, 0]
    peaks = peak_times(t, v)
    peaks = peaks[peaks >= discard_fraction * t[-1]]
    period = float(np.mean(np.diff(peaks))) if peaks.size >= 2 else None
    return OscillationSummary(tuple(float(x) for x in peaks), period,
                              float(v.min()), float(v.max()))


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    axes: tuple  # ((path, (values...)), ...)
    max_cells: int = DEFAULT_SWEEP_CAP

    def __post_init__(self):
        if self.base.mode != COUPLED:
            raise ConfigError("sweep: base scenario must be in coupled mode")
        if not self.axes:
            raise ConfigError("sweep: at least one axis is required")
        seen = set()
        for path, values in self.axes:
            if path not in NUMERIC_KEYS:
                raise ConfigError(f"sweep axis {path!r} is not a numeric scenario field")
            if path in seen:
                raise ConfigError(f"sweep axis {path!r} given twice")
            seen.add(path)
            if len(values) == 0:
                raise ConfigError(f"sweep axis {path!r} has no values")
        if self.size > self.max_cells:
            raise ConfigError(f"sweep: {self.size} cells exceeds the cap of {self.max_cells}")

    @property
    def paths(self) -> tuple:
        return tuple(path for path, _ in self.axes)

    @property
    def size(self) -> int:
        return math.prod(len(values) for _, values in self.axes)

    def cells(self):
        """Cross product in row-major order (last axis varies fastest)."""
        return itertools.product(*(values for _, values in self.axes))


@dataclass(frozen=True)
class SweepRow:
    values: tuple
    status: str
    termination: Optional[str]
    metrics: Optional[SyncMetrics]
    stats: Optional[StepStats] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _run_cell(spec: SweepSpec, values: Sequence[float]) -> SweepRow:
    try:
        config = spec.base.with_overrides(dict(zip(spec.paths, values)))
        traj, series = run_coupled(config)
    except Exception as exc:  # per-cell failure, siblings continue
        return SweepRow(tuple(values), f"error: {exc}", None, None)
    metrics = sync_metrics(series, config.sync_tolerance, config.integrator.t_end)
    status = "ok" if traj.termination is Termination.REACHED_T_END else traj.termination.value
    return SweepRow(tuple(values), status, traj.termination.value, metrics, traj.stats)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Evaluate every grid cell; rows follow :meth:`SweepSpec.cells` order."""
    cells = list(spec.cells())
    if workers <= 1:
        return [_run_cell(spec, values) for values in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda values: _run_cell(spec, values), cells))
