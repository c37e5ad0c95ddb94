import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqsr.ensemble import (
    binomial_stderr,
    born_deviation,
    ensemble_draws,
    merge_reports,
    run_ensemble,
    sweep,
)
from dqsr.generators import ModelSpec
from dqsr.integrate import IntegratorConfig, run_batch


@pytest.mark.parametrize(
    "counts, w, expected",
    [
        ([25, 75], [0.25, 0.75], 0.0),
        ([100, 0], [0.5, 0.5], 1.0),
        ([30, 70], [0.25, 0.75], 0.10),
    ],
)
def test_born_deviation_examples(counts, w, expected):
    assert born_deviation(counts, w) == pytest.approx(expected, abs=1e-15)


def test_born_deviation_rejects_empty_ensemble():
    with pytest.raises(ValueError):
        born_deviation([0, 0], [0.5, 0.5])


@settings(max_examples=300, deadline=None)
@given(
    counts=st.lists(st.integers(0, 10**6), min_size=2, max_size=12).filter(lambda c: sum(c) > 0),
    seed=st.integers(0, 2**32 - 1),
)
def test_born_deviation_bounds(counts, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(len(counts)))
    assert 0.0 <= born_deviation(counts, w) <= 2.0


def test_stderr_formula():
    w = np.array([0.25, 0.75])
    assert binomial_stderr(w, 100) == pytest.approx(np.sqrt(2 * 0.25 * 0.75 / 100))


def test_single_trajectory_ensemble():
    w = np.array([0.2, 0.5, 0.3])
    rep = run_ensemble(w, ModelSpec("single_lambda", 3), IntegratorConfig(), 1, master_seed=4)
    j = int(np.argmax(rep.outcome_counts))
    assert rep.final_deviation == pytest.approx(2 * (1 - w[j]))
    assert rep.deviation_series[1][-1] == pytest.approx(2 * (1 - w[j]))


def test_report_counts_and_bounds():
    w = np.array([0.3, 0.7])
    rep = run_ensemble(w, ModelSpec("two_state", 2), IntegratorConfig(), 100, master_seed=1)
    assert rep.outcome_counts.sum() + rep.unresolved_count == 100
    assert rep.unresolved_count == 0
    _, devs = rep.deviation_series
    assert np.all((devs >= 0) & (devs <= 2))
    json.dumps(rep.to_dict())


def test_unresolved_trajectories_are_reported():
    rep = run_ensemble([0.3, 0.7], ModelSpec("two_state", 2), IntegratorConfig(max_steps=30), 200, master_seed=1)
    assert rep.unresolved_count > 0
    assert rep.outcome_counts.sum() + rep.unresolved_count == 200


def test_two_state_symmetric_born_frequency():
    rep = run_ensemble([0.5, 0.5], ModelSpec("two_state", 2), IntegratorConfig(), 10000, master_seed=17)
    assert abs(rep.frequencies[0] - 0.5) <= 0.015


def test_stratified_single_lambda_is_exact_to_grid_spacing():
    rng = np.random.default_rng(18)
    for n_states in (3, 5):
        w = rng.dirichlet(np.ones(n_states))
        n = 2000
        rep = run_ensemble(w, ModelSpec("single_lambda", n_states), IntegratorConfig(), n, 0, stratified=True)
        # each block boundary can misplace at most one grid point
        assert rep.final_deviation <= n_states / n
    with pytest.raises(ValueError):
        ensemble_draws(ModelSpec("two_state", 2), np.array([0.5, 0.5]), 10, 0, stratified=True)


@pytest.mark.parametrize(
    "model, w",
    [
        (ModelSpec("two_state", 2), [0.3, 0.7]),
        (ModelSpec("bisection", 4, eta=0.3), [0.4, 0.1, 0.2, 0.3]),
        (ModelSpec("single_lambda", 3), [0.2, 0.3, 0.5]),
    ],
    ids=["two_state", "bisection", "single_lambda"],
)
def test_merged_halves_equal_full_run(model, w):
    cfg = IntegratorConfig()
    full = run_ensemble(w, model, cfg, 1000, master_seed=23)
    a = run_ensemble(w, model, cfg, 500, master_seed=23)
    b = run_ensemble(w, model, cfg, 500, master_seed=23, first_stream=500)
    for merged in (merge_reports([a, b]), merge_reports([b, a])):
        np.testing.assert_array_equal(merged.outcome_counts, full.outcome_counts)
        np.testing.assert_array_equal(merged.checkpoint_times, full.checkpoint_times)
        np.testing.assert_array_equal(merged.checkpoint_counts, full.checkpoint_counts)
        np.testing.assert_array_equal(merged.halting_steps, full.halting_steps)
        assert merged.n_trajectories == 1000 and merged.unresolved_count == full.unresolved_count
        assert merged.to_dict() == full.to_dict()


def test_merge_rejects_gaps_and_mismatches():
    cfg = IntegratorConfig()
    m = ModelSpec("two_state", 2)
    a = run_ensemble([0.3, 0.7], m, cfg, 10, master_seed=2)
    c = run_ensemble([0.3, 0.7], m, cfg, 10, master_seed=2, first_stream=20)
    with pytest.raises(ValueError):
        merge_reports([a, c])
    d = run_ensemble([0.3, 0.7], m, cfg, 10, master_seed=3, first_stream=10)
    with pytest.raises(ValueError):
        merge_reports([a, d])


def test_single_value_sweep_equals_ensemble():
    w = [0.2, 0.3, 0.5]
    model = ModelSpec("single_lambda", 3)
    cfg = IntegratorConfig(dt=0.02)
    table = sweep(w, model, IntegratorConfig(), "dt", [0.02], 500, master_seed=6)
    rep = run_ensemble(w, model, cfg, 500, master_seed=6)
    assert table.points == [(0.02, rep.final_deviation, rep.stderr)]
    np.testing.assert_array_equal(table.reports[0].checkpoint_counts, rep.checkpoint_counts)


def test_sweep_validation():
    w, m, cfg = [0.5, 0.5], ModelSpec("two_state", 2), IntegratorConfig()
    with pytest.raises(ValueError):
        sweep(w, m, cfg, "dt", [0.01, 0.02, 0.015], 10, 0)
    with pytest.raises(ValueError):
        sweep(w, m, cfg, "dt", [-0.01], 10, 0)
    with pytest.raises(ValueError):
        sweep(w, m, cfg, "eta", [1.5], 10, 0)
    with pytest.raises(ValueError):
        sweep(w, m, cfg, "dt", [0.01], 10, 0, dts=[0.01])
    with pytest.raises(ValueError):
        sweep(w, m, cfg, "temperature", [0.01], 10, 0)


def test_single_lambda_dt_sweep_does_not_get_worse():
    w = [0.1, 0.2, 0.3, 0.4]
    table = sweep(w, ModelSpec("single_lambda", 4), IntegratorConfig(), "dt", [0.1, 0.05, 0.01], 10000, master_seed=8)
    devs, se = table.deviations, table.stderrs
    assert np.all(np.diff(devs) <= 2 * se[1:])
    np.testing.assert_allclose(se, binomial_stderr(w, 10000))


def test_sequential_deviation_shrinks_with_eta():
    w = [0.3, 0.65, 0.05]
    n = 10000
    table = sweep(w, ModelSpec("sequential", 3), IntegratorConfig(), "eta", [0.2, 0.05], n, master_seed=9, dts=[0.01, 0.005])
    gap = table.deviations[0] - table.deviations[1]
    combined = np.sqrt(2) * binomial_stderr(w, n)
    assert gap > 3 * combined
    assert all(r.unresolved_count == 0 for r in table.reports)


def stage_resolution_times(eta, n=2000, delta=0.01, w=(0.3, 0.4, 0.3)):
    """Mean time until stage 0, and (for tail outcomes) stage 1, is decided."""
    model = ModelSpec("sequential", 3, eta=eta)
    cfg = IntegratorConfig()
    draws = ensemble_draws(model, np.array(w), n, master_seed=3)
    t0 = np.full(n, np.nan)
    t1 = np.full(n, np.nan)

    def observe(step, idx, wb):
        r0 = wb[:, 0]
        r1 = wb[:, 1] / np.maximum(wb[:, 1] + wb[:, 2], 1e-300)
        first = (r0 < delta) | (r0 > 1 - delta)
        second = (r0 < delta) & ((r1 < delta) | (r1 > 1 - delta))
        for t, decided in ((t0, first), (t1, second)):
            fresh = decided & np.isnan(t[idx])
            t[idx[fresh]] = step * cfg.dt

    res = run_batch(np.array(w), model, cfg, draws, observer=observe)
    tail = res.outcomes > 0
    assert not np.isnan(t0).any() and not np.isnan(t1[tail]).any()
    return t0.mean(), t1[tail].mean()


@pytest.mark.parametrize("eta", [0.2, 0.1])
def test_later_stages_resolve_later(eta):
    first, second = stage_resolution_times(eta)
    assert second / first >= 1 / (2 * eta)
