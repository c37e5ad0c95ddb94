"""Ensembles of trajectories, Born-rule deviation and parameter sweeps."""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .field import SeedSpec
from .generators import Convention, ModelKind, StochasticDraw
from .integrate import IntegratorConfig, run_batch, sample_draws
from .state import validate_weights

__all__ = [
    "SweepAxis",
    "EnsembleReport",
    "SweepTable",
    "born_deviation",
    "binomial_stderr",
    "ensemble_draws",
    "run_ensemble",
    "merge_reports",
    "sweep",
]


class SweepAxis(str, Enum):
    DT = "dt"
    ETA = "eta"


def born_deviation(counts, initial):
    """L1 distance between outcome frequencies and the initial weights.

    Always in ``[0, 2]``.
    """
    counts = np.asarray(counts, dtype=float)
    w = np.asarray(initial, dtype=float)
    if counts.shape != w.shape:
        raise ValueError(f"counts has shape {counts.shape}, weights {w.shape}")
    total = counts.sum()
    if total < 1:
        raise ValueError("empty ensemble: no resolved outcomes")
    return float(np.abs(counts / total - w).sum())


def binomial_stderr(initial, n):
    """``sqrt(sum_j w_j (1 - w_j) / n)``, the sampling scale of the deviation."""
    w = np.asarray(initial, dtype=float)
    return float(np.sqrt(np.sum(w * (1.0 - w)) / n))


@dataclass
class EnsembleReport:
    """Outcome statistics of ``n_trajectories`` realisations of one initial state.

    ``checkpoint_counts[k, j]`` counts trajectories whose running argmax (or
    final outcome, once halted) is ``j`` at time ``checkpoint_times[k]``;
    ``deviation_series`` is derived from it. Trajectories stopped by
    ``max_steps`` are excluded from ``outcome_counts`` and counted in
    ``unresolved_count``.
    """

    model: object
    config: IntegratorConfig
    initial: np.ndarray
    n_trajectories: int
    outcome_counts: np.ndarray
    unresolved_count: int
    checkpoint_times: np.ndarray
    checkpoint_counts: np.ndarray
    master_seed: int
    first_stream: int = 0
    stratified: bool = False
    halting_steps: np.ndarray = field(default=None, repr=False)

    @property
    def deviation_series(self):
        """``(times, deviations)`` of the running-argmax classification."""
        w = np.asarray(self.initial)
        devs = np.abs(self.checkpoint_counts / self.n_trajectories - w).sum(axis=1)
        return self.checkpoint_times, devs

    @property
    def final_deviation(self):
        return born_deviation(self.outcome_counts, self.initial)

    @property
    def stderr(self):
        return binomial_stderr(self.initial, self.n_trajectories)

    @property
    def frequencies(self):
        return self.outcome_counts / self.outcome_counts.sum()

    def to_dict(self):
        times, devs = self.deviation_series
        return {
            "model": {
                "kind": self.model.kind.value,
                "n_states": self.model.n_states,
                "rate": self.model.rate,
                "eta": self.model.eta,
            },
            "integrator": {
                "dt": self.config.dt,
                "scheme": self.config.scheme.value,
                "max_steps": self.config.max_steps,
                "outcome_threshold": self.config.outcome_threshold,
                "normalize_each_step": self.config.normalize_each_step,
                "form": None if self.config.form is None else self.config.form.value,
                "theta_cap": self.config.theta_cap,
            },
            "initial_weights": [float(x) for x in self.initial],
            "n_trajectories": int(self.n_trajectories),
            "master_seed": int(self.master_seed),
            "first_stream": int(self.first_stream),
            "stratified": bool(self.stratified),
            "outcome_counts": [int(c) for c in self.outcome_counts],
            "unresolved_count": int(self.unresolved_count),
            "final_deviation": self.final_deviation if self.outcome_counts.sum() else None,
            "stderr": self.stderr,
            "deviation_series": [[float(t), float(d)] for t, d in zip(times, devs)],
        }


def ensemble_draws(model, initial, n, master_seed, first_stream=0, stratified=False):
    """Stacked draws for trajectories ``first_stream .. first_stream + n - 1``.

    Trajectory ``i`` always uses stream ``i`` of ``master_seed``. In stratified
    mode (single-lambda model only) the random ``lambda`` values are replaced
    by the midpoints ``(i + 1/2) / n`` of a uniform grid.
    """
    if stratified:
        if model.kind is not ModelKind.SINGLE_LAMBDA:
            raise ValueError("stratified sampling is only defined for the single-lambda model")
        lam = (np.arange(n) + 0.5) / n
        return StochasticDraw(lam[:, None], Convention.LAMBDA)
    rows = [
        sample_draws(model, SeedSpec(master_seed, first_stream + i), initial).values for i in range(n)
    ]
    return StochasticDraw(np.array(rows), model.draw_convention)


def run_ensemble(initial, model, cfg, n, master_seed, first_stream=0, stratified=False, observer=None):
    """Run ``n`` independent realisations and tally their outcomes."""
    if n < 1:
        raise ValueError("ensemble needs n >= 1")
    w0 = validate_weights(initial)
    draws = ensemble_draws(model, w0, n, master_seed, first_stream, stratified)
    res = run_batch(w0, model, cfg, draws, observer=observer)
    n_states = model.n_states
    resolved = res.outcomes >= 0
    counts = np.bincount(res.outcomes[resolved], minlength=n_states)
    cp_counts = np.array([np.bincount(lab, minlength=n_states) for lab in res.labels])
    return EnsembleReport(
        model=model,
        config=cfg,
        initial=w0,
        n_trajectories=n,
        outcome_counts=counts,
        unresolved_count=int(n - resolved.sum()),
        checkpoint_times=res.checkpoints * cfg.dt,
        checkpoint_counts=cp_counts,
        master_seed=master_seed,
        first_stream=first_stream,
        stratified=stratified,
        halting_steps=res.steps,
    )


def merge_reports(reports):
    """Combine reports over disjoint stream ranges into one.

    The result equals a single run over the union of the streams: counts add,
    and a shorter checkpoint series is extended with its final (frozen) row.
    """
    reports = sorted(reports, key=lambda r: r.first_stream)
    head = reports[0]
    for r in reports[1:]:
        if r.model != head.model or r.config != head.config or r.master_seed != head.master_seed:
            raise ValueError("can only merge reports of the same model, config and seed")
        if not np.array_equal(r.initial, head.initial):
            raise ValueError("can only merge reports of the same initial state")
    expected = head.first_stream
    for r in reports:
        if r.first_stream != expected:
            raise ValueError("stream ranges must be contiguous and disjoint")
        expected += r.n_trajectories
    longest = max(reports, key=lambda r: len(r.checkpoint_times))
    k = len(longest.checkpoint_times)
    cp = np.zeros((k, head.model.n_states), dtype=np.int64)
    for r in reports:
        rows = r.checkpoint_counts
        pad = np.repeat(rows[-1:], k - len(rows), axis=0)
        cp += np.concatenate([rows, pad], axis=0)
    return replace(
        head,
        n_trajectories=sum(r.n_trajectories for r in reports),
        outcome_counts=sum(r.outcome_counts for r in reports),
        unresolved_count=sum(r.unresolved_count for r in reports),
        checkpoint_times=longest.checkpoint_times,
        checkpoint_counts=cp,
        halting_steps=np.concatenate([r.halting_steps for r in reports]),
    )


@dataclass
class SweepTable:
    """Final deviation and standard error for each parameter value."""

    axis: SweepAxis
    points: list
    reports: list = field(default_factory=list, repr=False)

    @property
    def values(self):
        return np.array([p[0] for p in self.points])

    @property
    def deviations(self):
        return np.array([p[1] for p in self.points])

    @property
    def stderrs(self):
        return np.array([p[2] for p in self.points])


def sweep(initial, model, cfg, axis, values, n, master_seed, dts=None, stratified=False):
    """One ensemble per parameter value, all sharing ``master_seed``.

    For an eta sweep, ``dts`` optionally gives a matching time step per value
    (smaller eta needs smaller dt to converge).
    """
    axis = SweepAxis(axis)
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    diffs = np.diff(values)
    if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep values must be strictly monotone")
    if dts is not None:
        if axis is not SweepAxis.ETA or len(dts) != len(values):
            raise ValueError("dts must accompany an eta sweep, one per value")
    reports, points = [], []
    for i, v in enumerate(values):
        if axis is SweepAxis.DT:
            if v <= 0:
                raise ValueError("dt values must be positive")
            m, c = model, replace(cfg, dt=v)
        else:
            if not 0 < v <= 1:
                raise ValueError("eta values must lie in (0, 1]")
            m = replace(model, eta=v)
            c = cfg if dts is None else replace(cfg, dt=float(dts[i]))
        rep = run_ensemble(initial, m, c, n, master_seed, stratified=stratified)
        reports.append(rep)
        points.append((v, rep.final_deviation, rep.stderr))
    return SweepTable(axis, points, reports)
