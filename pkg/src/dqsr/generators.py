"""Right-hand sides of the four collapse models.

Two representations are used:

* generator diagonals ``G_j`` acting on amplitudes, ``da_j/dt = rate * G_j * a_j``
* angle velocities ``d(theta)/dt`` on the generalized Bloch sphere

Every function accepts a leading batch axis on its state argument; draws then
carry the same leading axis.
"""

from dataclasses import dataclass
from functools import lru_cache
from enum import Enum

import numpy as np

from .state import born_weights, row_cumprod, row_cumsum, row_sum, tail_sums, weights_from_angles

__all__ = [
    "Convention",
    "ModelKind",
    "ModelSpec",
    "StochasticDraw",
    "ModelMismatchError",
    "UnsupportedNError",
    "g_two_state",
    "two_state_diagonal",
    "sequential_diagonal",
    "bisection_diagonal",
    "theta_velocity_two_state",
    "separatrix_values",
    "theta_velocity_single_lambda",
    "g_sequential",
    "theta_velocity_sequential",
    "sign_partition",
    "sign_matrix",
    "g_bisection",
    "is_power_of_two",
]

EPS_SEP = 1e-9
EPS_TAIL = 1e-12


class ModelMismatchError(ValueError):
    """The state or draws do not fit the requested model."""


class UnsupportedNError(ModelMismatchError):
    """The bisection model needs a power-of-two number of pointer states."""


class Convention(str, Enum):
    XI = "xi"  # uniform on [-1, 1]
    LAMBDA = "lambda"  # uniform on [0, 1]


class ModelKind(str, Enum):
    TWO_STATE = "two_state"
    SINGLE_LAMBDA = "single_lambda"
    SEQUENTIAL = "sequential"
    BISECTION = "bisection"


def is_power_of_two(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class StochasticDraw:
    """Values of the stochastic variables for one (or a batch of) realisations."""

    values: np.ndarray
    convention: Convention = Convention.XI

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "convention", Convention(self.convention))
        lo = -1.0 if self.convention is Convention.XI else 0.0
        if not np.all(np.isfinite(v)) or np.any(v < lo) or np.any(v > 1.0):
            raise ValueError(f"draw values outside [{lo}, 1] for convention {self.convention.value}")

    def as_xi(self):
        if self.convention is Convention.XI:
            return self.values
        return 2.0 * self.values - 1.0

    def as_lambda(self):
        if self.convention is Convention.LAMBDA:
            return self.values
        return (self.values + 1.0) / 2.0

    def __len__(self):
        return self.values.shape[-1]


@dataclass(frozen=True)
class ModelSpec:
    """Which collapse model to run.

    ``rate`` is the single combined prefactor of every equation of motion
    (coupling strength times system size over hbar). ``eta`` is the hierarchy
    parameter and is ignored by the two-state and single-lambda models.
    """

    kind: ModelKind
    n_states: int
    rate: float = 1.0
    eta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.n_states < 2:
            raise ModelMismatchError("need at least two pointer states")
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise ModelMismatchError("rate must be positive")
        if self.kind is ModelKind.TWO_STATE and self.n_states != 2:
            raise ModelMismatchError("the two-state model needs exactly N = 2")
        if self.kind in (ModelKind.SEQUENTIAL, ModelKind.BISECTION) and not 0 < self.eta <= 1:
            raise ModelMismatchError("eta must lie in (0, 1]")
        if self.kind is ModelKind.BISECTION and not is_power_of_two(self.n_states):
            raise UnsupportedNError(
                f"bisection model needs N a power of two, got N = {self.n_states}; "
                "zero-pad the superposition to the next power of two"
            )

    @property
    def n_draws(self):
        if self.kind in (ModelKind.TWO_STATE, ModelKind.SINGLE_LAMBDA):
            return 1
        if self.kind is ModelKind.SEQUENTIAL:
            return self.n_states - 1
        return self.n_states.bit_length() - 1

    @property
    def draw_convention(self):
        if self.kind is ModelKind.SINGLE_LAMBDA:
            return Convention.LAMBDA
        return Convention.XI


def _powers(eta, count):
    # eta**0 .. eta**(count-1); 0**0 == 1
    return np.float64(eta) ** np.arange(count)


def _pole_sin(theta):
    # sin(theta) with exact zeros at both poles; np.sin(np.pi) is ~1e-16
    return np.where(theta >= np.pi, 0.0, np.sin(theta))


def _xi(draws):
    if isinstance(draws, StochasticDraw):
        return draws.as_xi()
    return np.asarray(draws, dtype=float)


def _lam(draws):
    if isinstance(draws, StochasticDraw):
        return draws.as_lambda()
    return np.asarray(draws, dtype=float)


# ---------------------------------------------------------------------------
# two states


def two_state_diagonal(w, xi):
    """:func:`g_two_state` on already normalized weights, without checks."""
    g0 = (w[..., 0:1] - w[..., 1:2]) - xi
    return np.concatenate([g0, -g0], axis=-1)


def g_two_state(amplitudes, xi):
    """Generator diagonal of the minimal two-state model.

    ``G_0 = (|a_0|^2 - |a_1|^2)/(|a_0|^2 + |a_1|^2) - xi`` and ``G_1 = -G_0``.
    """
    w = born_weights(amplitudes)
    if w.shape[-1] != 2:
        raise ModelMismatchError(f"two-state generator needs N = 2, got N = {w.shape[-1]}")
    return two_state_diagonal(w, _xi(xi).reshape(w.shape[:-1] + (1,)))


def theta_velocity_two_state(theta, xi, rate=1.0):
    """``rate * sin(theta) * (xi - cos(theta))``; fixed points at the poles."""
    theta = np.asarray(theta, dtype=float)
    return rate * _pole_sin(theta) * (_xi(xi) - np.cos(theta))


# ---------------------------------------------------------------------------
# one random variable, N states


def separatrix_values(weights):
    """Cumulative weights ``c_n = w_0 + ... + w_{n-1}`` for ``n = 1..N-1``.

    A uniform ``lambda`` falling in ``(c_j, c_{j+1})`` (with ``c_0 = 0`` and
    ``c_N = 1``) selects pointer state ``j``.
    """
    w = np.asarray(weights, dtype=float)
    return np.minimum(row_cumsum(w)[..., :-1], 1.0)


def _single_lambda_gaps(angles, lam):
    """``L_n = 1 - prod_{m<=n} cos^2(theta_m/2) - lambda``."""
    c2 = np.cos(np.asarray(angles, dtype=float) / 2.0) ** 2
    return 1.0 - row_cumprod(c2) - lam


def theta_velocity_single_lambda(angles, lam, rate=1.0, eps_sep=EPS_SEP):
    """Angle velocities ``rate * sin(theta_n) / L_n`` of the one-variable model.

    ``theta_n`` grows while ``lambda`` lies below the n-th cumulative weight,
    which sends the state to pointer state ``n-1`` when ``lambda`` sits in its
    block. ``|L_n|`` is floored at ``eps_sep`` (sign kept, zero counts as
    positive); the per-step cap on the resulting speed lives in the
    integrator.
    """
    th = np.asarray(angles, dtype=float)
    lam = _lam(lam)
    lam = lam[..., :1] if lam.ndim == th.ndim else lam[..., None]
    gap = _single_lambda_gaps(th, lam)
    gap = np.where(np.abs(gap) < eps_sep, np.where(gap < 0, -eps_sep, eps_sep), gap)
    return rate * _pole_sin(th) / gap


# ---------------------------------------------------------------------------
# N-1 random variables, sequential hierarchy


def sequential_diagonal(w, xi, eta, eps_tail=EPS_TAIL):
    """:func:`g_sequential` on already normalized weights, without checks."""
    # tail sums P_m = sum_{j>=m} w_j
    tail = tail_sums(w)
    p_m = tail[..., :-1]
    live = p_m >= eps_tail
    frac = (w[..., :-1] - tail[..., 1:]) / np.where(live, p_m, 1.0)
    scaled = np.where(live, frac - xi, 0.0) * _powers(eta, w.shape[-1] - 1)
    # G_j = s_j - sum_{m<j} s_m, with s_{N-1} = 0
    g = np.zeros_like(w)
    g[..., :-1] = scaled
    g[..., 1:] -= row_cumsum(scaled)
    return g


def g_sequential(amplitudes, xi, eta, eps_tail=EPS_TAIL):
    """Generator diagonal of the sequential (N-1 variable) model.

    Stage ``m`` decides between pointer state ``m`` and everything after it,
    with strength ``eta**m``. A stage whose remaining tail mass ``P_m`` is
    below ``eps_tail`` has already been decided and contributes nothing.
    """
    w = born_weights(amplitudes)
    n = w.shape[-1]
    xi = _xi(xi)
    if xi.shape[-1] != n - 1:
        raise ModelMismatchError(f"sequential model needs {n - 1} draws, got {xi.shape[-1]}")
    return sequential_diagonal(w, xi, eta, eps_tail)


def theta_velocity_sequential(angles, lam, eta, rate=1.0):
    """``rate * eta**(m-1) * sin(theta_m) * (lambda_m - cos^2(theta_m/2))``."""
    th = np.asarray(angles, dtype=float)
    lam = _lam(lam)
    if lam.shape[-1] != th.shape[-1]:
        raise ModelMismatchError(f"sequential model needs {th.shape[-1]} draws, got {lam.shape[-1]}")
    return rate * _powers(eta, th.shape[-1]) * _pole_sin(th) * (lam - np.cos(th / 2.0) ** 2)


# ---------------------------------------------------------------------------
# log2(N) random variables, bisection hierarchy


def sign_partition(j, p, n):
    """``(-1)**floor(j * 2**(p+1) / N)`` computed in exact integer arithmetic."""
    if not 0 <= j < n:
        raise ValueError(f"index {j} outside [0, {n})")
    return -1 if ((j * 2 ** (p + 1)) // n) % 2 else 1


@lru_cache(maxsize=None)
def sign_matrix(n, stages):
    """Array ``S[p, j] = sign_partition(j, p, n)`` of shape ``(stages, n)``."""
    j = np.arange(n)
    out = np.array([np.where(((j * 2 ** (p + 1)) // n) % 2, -1.0, 1.0) for p in range(stages)])
    out.flags.writeable = False
    return out


def bisection_diagonal(w, xi, eta):
    """:func:`g_bisection` on already normalized weights, without checks."""
    n = w.shape[-1]
    signs = sign_matrix(n, n.bit_length() - 1)
    g = np.zeros_like(w)
    for p, eta_p in enumerate(_powers(eta, len(signs))):
        imbalance = row_sum(w * signs[p])
        g += (eta_p * (imbalance - xi[..., p : p + 1])) * signs[p]
    return g


def g_bisection(amplitudes, xi, eta):
    """Generator diagonal of the bisection (log2 N variable) model.

    ``G_j = sum_p eta**p S(j,p) [sum_j' S(j',p) w_j' - xi_p]`` with ``S`` the
    sign partition that halves every block at each stage.
    """
    w = born_weights(amplitudes)
    n = w.shape[-1]
    if not is_power_of_two(n):
        raise UnsupportedNError(f"bisection model needs N a power of two, got N = {n}")
    k = n.bit_length() - 1
    xi = _xi(xi)
    if xi.shape[-1] != k:
        raise ModelMismatchError(f"bisection model needs {k} draws, got {xi.shape[-1]}")
    return bisection_diagonal(w, xi, eta)


def weights_of(state, angle_form):
    """Normalized weights of a state held in either representation."""
    if angle_form:
        return weights_from_angles(state)
    return born_weights(state)
