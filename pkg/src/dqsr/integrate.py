"""Time stepping, outcome detection and single trajectories.

All stepping goes through :func:`advance`, which works on a batch of states
(shape ``(n, k)``).  A single trajectory is a batch of one, so a trajectory
run alone and the same trajectory run inside an ensemble produce bitwise
identical numbers.

The stochastic variables are drawn once, at ``t = 0``, and then held fixed:
the noise correlation time is taken to be infinite compared with the collapse
time.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .field import rng_for
from .generators import (
    Convention,
    ModelKind,
    ModelMismatchError,
    StochasticDraw,
    _single_lambda_gaps,
    bisection_diagonal,
    separatrix_values,
    sequential_diagonal,
    theta_velocity_sequential,
    theta_velocity_single_lambda,
    theta_velocity_two_state,
    two_state_diagonal,
)
from .state import (
    angles_from_weights,
    born_weights,
    row_sum,
    squared_moduli,
    validate_weights,
    weights_from_angles,
)

__all__ = [
    "Scheme",
    "Form",
    "HaltReason",
    "IntegratorConfig",
    "TrajectoryRecord",
    "BatchResult",
    "NumericalBlowupError",
    "default_form",
    "sample_draws",
    "initial_state",
    "state_weights",
    "velocity",
    "advance",
    "step",
    "detect_outcome",
    "run_trajectory",
    "continue_trajectory",
    "run_batch",
    "checkpoint_steps",
]


class Scheme(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class Form(str, Enum):
    ANGLE = "angle"
    AMPLITUDE = "amplitude"


class HaltReason(str, Enum):
    THRESHOLD = "threshold_reached"
    MAX_STEPS = "max_steps"


class NumericalBlowupError(FloatingPointError):
    """A step produced non-finite values."""

    def __init__(self, step, trajectory=None):
        self.step = step
        self.trajectory = trajectory
        where = f" in trajectory {trajectory}" if trajectory is not None else ""
        super().__init__(f"non-finite state after step {step}{where}")


_SUPPORTED_FORMS = {
    ModelKind.TWO_STATE: (Form.ANGLE, Form.AMPLITUDE),
    ModelKind.SINGLE_LAMBDA: (Form.ANGLE,),
    ModelKind.SEQUENTIAL: (Form.AMPLITUDE, Form.ANGLE),
    ModelKind.BISECTION: (Form.AMPLITUDE,),
}


def default_form(kind):
    return _SUPPORTED_FORMS[ModelKind(kind)][0]


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepping parameters.

    ``dt`` is in units of the inverse rate when ``rate = 1``. ``theta_cap``
    bounds the largest angle increment per step of the single-lambda model,
    whose velocity diverges at the separatrices. ``form`` of ``None`` picks
    the model's default representation.
    """

    dt: float = 0.01
    scheme: Scheme = Scheme.EULER
    max_steps: int = 10**7
    outcome_threshold: float = 1.0 - 1e-4
    normalize_each_step: bool = True
    form: Form | None = None
    theta_cap: float = 0.1
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.form is not None:
            object.__setattr__(self, "form", Form(self.form))
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if not 0.5 < self.outcome_threshold < 1.0:
            raise ValueError("outcome_threshold must lie in (0.5, 1)")
        if not self.theta_cap > 0:
            raise ValueError("theta_cap must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def form_for(self, model):
        form = self.form or default_form(model.kind)
        if form not in _SUPPORTED_FORMS[model.kind]:
            raise ModelMismatchError(f"{model.kind.value} model has no {form.value} form")
        return form


# ---------------------------------------------------------------------------
# draws and initial states


def sample_draws(model, seed, initial=None):
    """Draw the model's stochastic variables for one realisation.

    For the single-lambda model a draw landing exactly on a separatrix of
    ``initial`` is rejected and redrawn from the same stream.
    """
    rng = rng_for(seed)
    while True:
        u = rng.random(model.n_draws)
        if model.draw_convention is Convention.XI:
            return StochasticDraw(2.0 * u - 1.0, Convention.XI)
        if initial is None or not np.any(u[0] == separatrix_values(initial)):
            return StochasticDraw(u, Convention.LAMBDA)


def _native_draws(draws, model, form):
    """Draw values in the convention the velocity field of ``form`` expects.

    The generator diagonal and the angle velocity of a model orient their
    random variable oppositely (the diagonal pushes towards index 0 when xi
    is small, the angle flow when it is large). The secondary form of each
    model gets the mirrored value, so a given draw picks the same basin in
    either representation:

    * two-state in amplitude form uses ``-xi``
    * sequential in angle form uses ``lambda = (1 - xi) / 2``
    """
    if not isinstance(draws, StochasticDraw):
        draws = StochasticDraw(np.asarray(draws, dtype=float), model.draw_convention)
    if draws.values.shape[-1] != model.n_draws:
        raise ModelMismatchError(
            f"{model.kind.value} model needs {model.n_draws} draws, got {draws.values.shape[-1]}"
        )
    if model.kind is ModelKind.SINGLE_LAMBDA:
        return draws.as_lambda()
    if model.kind is ModelKind.SEQUENTIAL and form is Form.ANGLE:
        return 1.0 - draws.as_lambda()
    if model.kind is ModelKind.TWO_STATE and form is Form.AMPLITUDE:
        return -draws.as_xi()
    return draws.as_xi()


def initial_state(weights, model, form):
    """State array for ``weights`` in the requested representation.

    Amplitudes start real and non-negative; the phases never enter the
    weight dynamics.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != model.n_states:
        raise ModelMismatchError(f"model has N = {model.n_states} but weights have {w.shape[-1]} entries")
    if Form(form) is Form.ANGLE:
        return angles_from_weights(w)
    return np.sqrt(w)


def state_weights(state, form):
    """Normalized weights of a state held in either representation."""
    if Form(form) is Form.ANGLE:
        return weights_from_angles(state)
    return born_weights(state)


def _row_max(a):
    acc = a[..., 0]
    for j in range(1, a.shape[-1]):
        acc = np.maximum(acc, a[..., j])
    return acc[..., None]


def _fast_weights(state, form):
    # no validity checks: callers test finiteness themselves
    if form is Form.ANGLE:
        return weights_from_angles(state)
    p = squared_moduli(state)
    return p / row_sum(p)


# ---------------------------------------------------------------------------
# stepping


def velocity(state, model, draws, form, dt=None, theta_cap=None, weights=None):
    """Time derivative of a batch of states.

    ``draws`` must already be in the convention of ``form`` (see
    :func:`_native_draws`). For the single-lambda model, if ``dt`` and
    ``theta_cap`` are given, the whole velocity vector of a row is scaled down
    by a common factor so that no angle moves more than ``theta_cap`` in one
    step. A common positive factor leaves flow lines, separatrices and end
    points unchanged. ``weights`` may pass in the already known normalized
    weights of an amplitude-form ``state``.
    """
    kind = model.kind
    if form is Form.ANGLE:
        if kind is ModelKind.TWO_STATE:
            return theta_velocity_two_state(state, draws, model.rate)
        if kind is ModelKind.SEQUENTIAL:
            return theta_velocity_sequential(state, draws, model.eta, model.rate)
        v = theta_velocity_single_lambda(state, draws, model.rate)
        if dt is not None and theta_cap is not None:
            peak = _row_max(np.abs(v)) * dt
            v = v * np.where(peak > theta_cap, theta_cap / np.where(peak > 0, peak, 1.0), 1.0)
        return v
    w = _fast_weights(state, form) if weights is None else weights
    if kind is ModelKind.TWO_STATE:
        g = two_state_diagonal(w, draws)
    elif kind is ModelKind.SEQUENTIAL:
        g = sequential_diagonal(w, draws, model.eta)
    else:
        g = bisection_diagonal(w, draws, model.eta)
    return model.rate * g * state


MAX_HALVINGS = 40


def _raw_step(state, model, draws, cfg, form, h, weights=None):
    def f(y, w=None):
        return velocity(y, model, draws, form, h, cfg.theta_cap, w)

    if cfg.scheme is Scheme.EULER:
        new = state + h * f(state, weights)
    else:
        k1 = f(state, weights)
        k2 = f(state + 0.5 * h * k1)
        k3 = f(state + 0.5 * h * k2)
        k4 = f(state + h * k3)
        new = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if form is Form.ANGLE:
        new = np.clip(new, 0.0, np.pi)
    return new


def _gap_side(angles, lam):
    return _single_lambda_gaps(angles, lam) >= 0.0


def _separatrix_safe_step(state, model, draws, cfg):
    """Single-lambda step that never carries a row across a separatrix.

    The exact flow cannot cross ``L_n = 0`` because the velocity diverges
    there, but a finite step can: a large move of one angle may shift a later
    cumulative weight past ``lambda`` before its own angle reacts. Rows whose
    step would flip the sign of any ``L_n`` are retried with half the step.
    Such a row moves less far along its own flow line, which leaves its
    outcome untouched.
    """
    new = _raw_step(state, model, draws, cfg, Form.ANGLE, cfg.dt)
    side = _gap_side(state, draws)
    bad = np.nonzero(np.any(_gap_side(new, draws) != side, axis=-1))[0]
    h = cfg.dt
    for _ in range(MAX_HALVINGS):
        if bad.size == 0:
            break
        h *= 0.5
        retry = _raw_step(state[bad], model, draws[bad], cfg, Form.ANGLE, h)
        new[bad] = retry
        bad = bad[np.any(_gap_side(retry, draws[bad]) != side[bad], axis=-1)]
    if bad.size:
        # no admissible move found: hold those rows in place for this step
        new[bad] = state[bad]
    return new


def advance(state, model, draws, cfg, form, weights=None):
    """One explicit step for a batch of states, without finiteness checks.

    ``weights``, if given, are the normalized weights of ``state`` and save
    one evaluation.
    """
    if model.kind is ModelKind.SINGLE_LAMBDA:
        return _separatrix_safe_step(state, model, draws, cfg)
    new = _raw_step(state, model, draws, cfg, form, cfg.dt, weights)
    if form is Form.ANGLE:
        return new
    if cfg.normalize_each_step:
        return new / np.sqrt(row_sum(squared_moduli(new)))
    return new


@np.errstate(over="ignore", invalid="ignore")
def step(state, model, draws, cfg, step_index=0):
    """Advance one state (angles or amplitudes) by one time step.

    The representation is taken from ``cfg.form`` or the model default;
    ``draws`` is a :class:`StochasticDraw` or an array in the model's own
    convention. Raises :class:`NumericalBlowupError` on non-finite output.
    """
    form = cfg.form_for(model)
    native = _native_draws(draws, model, form)
    y = np.asarray(state)
    if form is Form.ANGLE:
        y = y.astype(float)
    new = advance(y[None, :], model, native[None, :], cfg, form)[0]
    if not np.all(np.isfinite(new)):
        raise NumericalBlowupError(step_index)
    return new


def detect_outcome(weights, threshold):
    """Index of the pointer state with weight >= ``threshold``, else ``None``."""
    if not threshold > 0.5:
        raise ValueError("threshold must exceed 0.5 for the outcome to be unique")
    w = np.asarray(weights)
    j = int(np.argmax(w))
    return j if w[j] >= threshold else None


# ---------------------------------------------------------------------------
# single trajectories


@dataclass
class TrajectoryRecord:
    """Weight time series of one realisation and how it ended.

    ``state`` and ``draws`` hold everything needed to resume the run with
    :func:`continue_trajectory`.
    """

    times: np.ndarray
    weights: np.ndarray
    outcome: int | None
    steps_taken: int
    halted_reason: HaltReason
    state: np.ndarray = field(repr=False)
    draws: StochasticDraw = field(repr=False)
    form: Form = Form.ANGLE


def run_trajectory(initial, model, cfg, seed=None, draws=None):
    """Integrate one realisation until an outcome is detected or ``max_steps``.

    Either ``seed`` (a :class:`SeedSpec`) or explicit ``draws`` must be given.
    """
    w0 = validate_weights(initial)
    form = cfg.form_for(model)
    if draws is None:
        if seed is None:
            raise ValueError("need a seed or explicit draws")
        draws = sample_draws(model, seed, w0)
    elif not isinstance(draws, StochasticDraw):
        draws = StochasticDraw(np.asarray(draws, dtype=float), model.draw_convention)
    state = initial_state(w0, model, form)
    return _integrate_record(state, 0, model, draws, cfg, form, [], [])


def continue_trajectory(record, model, cfg):
    """Resume a trajectory halted by ``max_steps`` up to the new ``cfg.max_steps``."""
    if record.halted_reason is HaltReason.THRESHOLD:
        return record
    times = list(record.times)
    weights = list(record.weights)
    return _integrate_record(record.state, record.steps_taken, model, record.draws, cfg, record.form, times, weights)


@np.errstate(over="ignore", invalid="ignore")
def _integrate_record(state, start, model, draws, cfg, form, times, weights):
    native = _native_draws(draws, model, form)[None, :]
    y = np.asarray(state)[None, :]
    if form is Form.ANGLE:
        y = y.astype(float)
    dt, thr = cfg.dt, cfg.outcome_threshold
    n = start
    wb = state_weights(y, form)
    w = wb[0]
    if not times:
        times.append(n * dt)
        weights.append(w)
    outcome = detect_outcome(w, thr)
    while outcome is None and n < cfg.max_steps:
        y = advance(y, model, native, cfg, form, wb)
        n += 1
        if not np.all(np.isfinite(y)):
            raise NumericalBlowupError(n)
        wb = _fast_weights(y, form)
        w = wb[0]
        outcome = detect_outcome(w, thr)
        if n % cfg.record_every == 0 or outcome is not None:
            times.append(n * dt)
            weights.append(w)
    if times[-1] != n * dt:
        times.append(n * dt)
        weights.append(w)
    return TrajectoryRecord(
        times=np.asarray(times),
        weights=np.asarray(weights),
        outcome=outcome,
        steps_taken=n,
        halted_reason=HaltReason.THRESHOLD if outcome is not None else HaltReason.MAX_STEPS,
        state=y[0],
        draws=draws,
        form=form,
    )


# ---------------------------------------------------------------------------
# batches


def checkpoint_steps(max_steps, per_decade=20):
    """Geometrically spaced step indices ``1..max_steps`` used for time series."""
    top = np.log10(max_steps)
    grid = np.unique(np.round(np.logspace(0, top, int(np.ceil(top * per_decade)) + 1)).astype(np.int64))
    return np.concatenate([[0], grid[grid <= max_steps]])


@dataclass
class BatchResult:
    """Per-trajectory results of :func:`run_batch`.

    ``labels[k, i]`` is the running-argmax pointer state of trajectory ``i`` at
    ``checkpoints[k]`` (its final outcome once it has halted); ``outcomes`` is
    ``-1`` for trajectories stopped by ``max_steps``.
    """

    outcomes: np.ndarray
    steps: np.ndarray
    checkpoints: np.ndarray
    labels: np.ndarray


@np.errstate(over="ignore", invalid="ignore")
def run_batch(initial, model, cfg, draws, observer=None):
    """Integrate many realisations of the same initial state together.

    ``draws`` is a :class:`StochasticDraw` with one row per trajectory.
    Finished trajectories are dropped from the working set, so the cost is
    dominated by the slowest few. ``observer(step, index, weights)`` is called
    after every step with the weights of the still-running trajectories.
    """
    w0 = validate_weights(initial)
    form = cfg.form_for(model)
    native = _native_draws(draws, model, form)
    if native.ndim != 2:
        raise ValueError("batch draws need shape (n_trajectories, n_draws)")
    n_traj = native.shape[0]
    # column-major: each pointer-state column is contiguous, which keeps the
    # many short-axis slices in the velocity fields cheap
    y = np.asfortranarray(np.repeat(initial_state(w0, model, form)[None, :], n_traj, axis=0))
    native = np.asfortranarray(native)
    thr = cfg.outcome_threshold

    cps = checkpoint_steps(cfg.max_steps)
    labels = np.empty((len(cps), n_traj), dtype=np.int16)
    outcomes = np.full(n_traj, -1, dtype=np.int64)
    steps = np.full(n_traj, cfg.max_steps, dtype=np.int64)
    active = np.arange(n_traj)

    w = state_weights(y, form)
    done = _row_max(w)[:, 0] >= thr
    k = 0
    labels[k] = np.argmax(w, axis=-1)
    k += 1
    n = 0
    if np.any(done):
        outcomes[done] = np.argmax(w[done], axis=-1)
        steps[done] = 0
        keep = ~done
        active, y, native, w = active[keep], y[keep], native[keep], w[keep]

    while active.size and n < cfg.max_steps:
        y = advance(y, model, native, cfg, form, w)
        n += 1
        w = _fast_weights(y, form)
        if not np.all(np.isfinite(w)):
            bad = ~np.all(np.isfinite(w), axis=-1)
            raise NumericalBlowupError(n, int(active[np.argmax(bad)]))
        if observer is not None:
            observer(n, active, w)
        if n == cps[k]:
            labels[k] = outcomes_or_current(outcomes, active, w)
            k += 1
        done = _row_max(w)[:, 0] >= thr
        if np.any(done):
            idx = active[done]
            outcomes[idx] = np.argmax(w[done], axis=-1)
            steps[idx] = n
            keep = ~done
            active, y, native, w = active[keep], y[keep], native[keep], w[keep]
    last = int(np.searchsorted(cps, n, side="right"))
    labels[k:last] = outcomes_or_current(outcomes, active, w)
    return BatchResult(outcomes=outcomes, steps=steps, checkpoints=cps[:last], labels=labels[:last])


def outcomes_or_current(outcomes, active, w):
    lab = outcomes.copy()
    lab[active] = np.argmax(w, axis=-1)
    return lab

