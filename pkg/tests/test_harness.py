from dataclasses import replace

import numpy as np
import pytest

from mlsync.harness import (ConfigError, CoupledSeries, SimConfig, SweepSpec, oscillation_summary,
                            peak_times, run_coupled, run_single, run_sweep, sync_metrics)
from mlsync.integrator import Termination
from mlsync.model import n_inf

# inter-peak interval of set (10) from a scipy DOP853 run at rtol 1e-12, sampled every 1e-3
# (tests/oracles/compute_reference_values.py)
SET10_PERIOD = 48.944
# regression values of the bundled rk4 h = 0.01 runs
SET11_SYNC_TIME = 24.49
GAMMA_SWEEP = {0.1: (24.47, 13.448306726220833),
               0.5: (24.49, 31.02062970806983),
               2.0: (24.5, 62.80021291784049)}


def test_single_oscillates(set10):
    traj = run_single(set10)
    assert traj.termination is Termination.REACHED_T_END
    summary = oscillation_summary(traj, discard_fraction=0.25)
    assert len(summary.peak_times) >= 3
    assert -70 <= summary.v_min and summary.v_max <= 100


def test_single_period(set10):
    period = oscillation_summary(run_single(set10)).mean_period
    assert period == pytest.approx(SET10_PERIOD, rel=0.01)


def test_leak_only_relaxation(set10):
    neuron = set10.neuron.replace(I=0.0, g_Ca=0.0, g_K=0.0)
    traj = run_single(replace(set10, neuron=neuron))
    v, n = traj.final_state
    assert v == pytest.approx(neuron.V_L, abs=1e-6)
    assert n == pytest.approx(n_inf(neuron.V_L, neuron), abs=1e-6)


def test_run_modes_are_checked(set10, set11):
    with pytest.raises(ConfigError):
        run_single(set11)
    with pytest.raises(ConfigError):
        run_coupled(set10)


def test_coupled_synchronizes(set11, set11_run):
    traj, series = set11_run
    m = sync_metrics(series, set11.sync_tolerance, set11.integrator.t_end)
    assert m.sync_time is not None
    assert m.sync_time == pytest.approx(SET11_SYNC_TIME, abs=1e-9)
    assert m.max_abs_ev_tail < 1e-3 and m.max_abs_en_tail < 1e-3
    assert m.final_sigma == series.sigma[-1] == traj.final_state[4]
    assert m.omega_first_nonpositive_onset is None or 0 <= m.omega_first_nonpositive_onset <= 200


def test_coupled_series_invariants(set11, set11_run):
    _, series = set11_run
    assert np.all(np.diff(series.sigma) >= -1e-9)
    assert np.all(series.q >= 0)
    m = sync_metrics(series, set11.sync_tolerance, set11.integrator.t_end)
    after = series.t >= m.sync_time
    assert np.all(series.q[after] < set11.sync_tolerance ** 2)


def test_omega_matches_q_difference_to_second_order(set11, set11_run):
    # central-difference error is h^2/6 times the third derivative of Q, i.e. omega'';
    # omega'' comes from second differences of the sampled omega, widened over
    # neighbours; 10 is an empirical constant
    _, s = set11_run
    h = set11.integrator.h
    cd = (s.q[2:] - s.q[:-2]) / (2 * h)
    curvature = np.abs(s.omega[2:] - 2 * s.omega[1:-1] + s.omega[:-2]) / h ** 2
    local = np.lib.stride_tricks.sliding_window_view(np.pad(curvature, 1, mode="edge"), 3).max(axis=1)
    bound = 10 * h ** 2 / 6 * local + 1e-12 * (1 + np.abs(s.omega[1:-1]))
    assert np.all(np.abs(cd - s.omega[1:-1]) <= bound)


def test_identical_neurons_stay_synchronized(set11):
    cfg = set11.with_overrides({"V20": -35.0, "N20": 0.9, "sigma0": 0.0})
    _, s = run_coupled(cfg)
    assert np.all(s.e_v == 0) and np.all(s.e_n == 0) and np.all(s.sigma == 0)


def test_swapped_neurons(set11, set11_run):
    v1, n1, v2, n2, s0 = set11.initial
    _, a = set11_run
    _, b = run_coupled(replace(set11, initial=(v2, n2, v1, n1, s0)))
    np.testing.assert_array_equal(b.e_v, -a.e_v)
    np.testing.assert_array_equal(b.e_n, -a.e_n)
    np.testing.assert_array_equal(b.q, a.q)
    np.testing.assert_array_equal(b.sigma, a.sigma)


def _series(t, e_v, e_n):
    t = np.asarray(t, dtype=float)
    e_v, e_n = np.asarray(e_v, dtype=float), np.asarray(e_n, dtype=float)
    q = 0.5 * (e_v ** 2 + e_n ** 2)
    return CoupledSeries(t, e_v, e_n, q, -q, np.zeros_like(t))


def test_sync_metrics_zero_error():
    t = np.linspace(0, 10, 11)
    m = sync_metrics(_series(t, np.zeros(11), np.zeros(11)), 1e-3, 10.0)
    assert m.sync_time == 0.0 and m.q_final == 0.0
    assert m.max_abs_ev_tail == 0.0


def test_sync_metrics_never_settles():
    t = np.linspace(0, 10, 11)
    m = sync_metrics(_series(t, np.full(11, 2e-3), np.zeros(11)), 1e-3, 10.0)
    assert m.sync_time is None
    assert m.max_abs_ev_tail == 2e-3


def test_sync_metrics_last_excursion_counts():
    t = np.arange(6.0)
    e = [5.0, 0.0, 0.0, 1.0, 0.0, 0.0]
    m = sync_metrics(_series(t, e, np.zeros(6)), 0.5, 5.0)
    assert m.sync_time == 4.0
    m = sync_metrics(_series(t, np.zeros(6), e), 0.5, 5.0)
    assert m.sync_time == 4.0


def test_sync_metrics_requires_full_horizon():
    t = np.arange(6.0)
    m = sync_metrics(_series(t, np.zeros(6), np.zeros(6)), 0.5, 10.0)
    assert m.sync_time is None
    assert m.max_abs_ev_tail is None


def test_peak_times():
    t = np.arange(7.0)
    v = np.array([0, 1, 0, 2, 2, 1, 3])
    assert peak_times(t, v).tolist() == [1.0, 3.0]


def test_single_cell_sweep_matches_direct_run(set11, set11_run):
    rows = run_sweep(SweepSpec(set11, (("gamma", (0.5,)),)))
    _, series = set11_run
    assert len(rows) == 1 and rows[0].ok
    assert rows[0].metrics == sync_metrics(series, 1e-3, 200.0)


def test_gamma_sweep_regression(set11):
    rows = run_sweep(SweepSpec(set11, (("gamma", (0.1, 0.5, 2.0)),)))
    assert [r.values for r in rows] == [(0.1,), (0.5,), (2.0,)]
    for row in rows:
        sync_time, sigma = GAMMA_SWEEP[row.values[0]]
        assert row.ok
        assert row.metrics.sync_time == pytest.approx(sync_time, abs=1e-9)
        assert row.metrics.final_sigma == pytest.approx(sigma, rel=1e-9)
        assert row.metrics.final_sigma > set11.initial[4]


def test_sigma0_sweep_all_synchronize(set11):
    rows = run_sweep(SweepSpec(set11, (("sigma0", (-1.0, 0.0, 1.0)),)))
    assert len(rows) == 3
    assert all(r.ok and r.metrics.sync_time is not None for r in rows)


def test_sweep_order_and_threads(set11):
    spec = SweepSpec(set11, (("gamma", (0.2, 1.0)), ("integrator.t_end", (20.0, 30.0, 40.0))))
    rows = run_sweep(spec)
    assert [r.values for r in rows] == [(g, t) for g in (0.2, 1.0) for t in (20.0, 30.0, 40.0)]
    assert run_sweep(spec, workers=3) == rows
    assert run_sweep(spec) == rows


def test_sweep_cell_failure_is_isolated(set11):
    rows = run_sweep(SweepSpec(set11, (("neuron.C", (-1.0, 20.0)),)))
    assert rows[0].status.startswith("error") and "C" in rows[0].status
    assert rows[1].ok


def test_sweep_divergence_is_reported(set11):
    rows = run_sweep(SweepSpec(set11, (("bounds.M1", (1.0, 500.0)),)))
    assert rows[0].status == Termination.DIVERGENCE_GUARD.value
    assert rows[0].metrics.sync_time is None
    assert rows[1].ok


@pytest.mark.parametrize("axes, match", [
    ((("neuron.bogus", (1.0,)),), "neuron.bogus"),
    ((("mode", (1.0,)),), "mode"),
    ((), "axis"),
    ((("gamma", ()),), "no values"),
])
def test_sweep_spec_validation(set11, axes, match):
    with pytest.raises(ConfigError, match=match):
        SweepSpec(set11, axes)


def test_sweep_cap(set11):
    values = tuple(float(i) for i in range(101))
    with pytest.raises(ConfigError, match="cap"):
        SweepSpec(set11, (("gamma", values), ("sigma0", values)))
    assert SweepSpec(set11, (("gamma", values),), max_cells=101).size == 101


def test_sweep_requires_coupled_base(set10):
    with pytest.raises(ConfigError):
        SweepSpec(set10, (("neuron.I", (1.0,)),))


def test_config_round_trip(set11):
    assert SimConfig.from_flat(set11.to_flat()) == set11


def test_config_overrides_validate(set11):
    assert set11.with_overrides({"gamma": "2"}).gamma == 2.0
    with pytest.raises(ConfigError, match="neuron.bogus"):
        set11.with_overrides({"neuron.bogus": 1})
    with pytest.raises(ConfigError, match="gamma"):
        set11.with_overrides({"gamma": "-1"})
    with pytest.raises(ConfigError, match="V0"):
        set11.with_overrides({"mode": "single"})
    with pytest.raises(ConfigError, match="record_stride"):
        set11.with_overrides({"integrator.record_stride": "2.5"})
