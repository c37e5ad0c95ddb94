"""Reproducible stochastic draws and the continuum random-field model.

Draw streams are keyed by ``(master_seed, stream_index)`` through
:class:`numpy.random.SeedSequence`, so trajectory ``i`` of an ensemble sees
the same values no matter how the ensemble is split up.

The continuum objects live on ``x in [0, 1)``: the square-wave sign function
``s(x, p)``, the random field ``Lambda(x) = -sum_p eta**p xi_p s(x, p)``, the
kernel ``Pi(x, x') = sum_p eta**p s(x, p) s(x', p)`` and the generator
``G(x) = Lambda(x) + <Pi(x)>``, with stages ``p = 0..gamma``.
"""

from dataclasses import dataclass

import numpy as np

from .generators import Convention, StochasticDraw
from .state import InvalidStateError

__all__ = [
    "SeedSpec",
    "FieldSpec",
    "Histogram",
    "rng_for",
    "draw_uniform",
    "sign_partition_continuum",
    "random_field_sample",
    "propagator_kernel",
    "continuum_generator",
    "grid_points",
    "field_samples",
    "field_pdf_histogram",
]

DEFAULT_GAMMA = 16


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")


@dataclass(frozen=True)
class FieldSpec:
    """Parameters of the continuum model.

    ``gamma`` is the ultraviolet cutoff (highest stage index kept) and
    ``grid_points`` the number of midpoint cells used for x-integrals.
    """

    eta: float
    gamma: int = DEFAULT_GAMMA
    grid_points: int = 64

    def __post_init__(self):
        if not 0 <= self.eta < 1:
            raise ValueError("field eta must lie in [0, 1)")
        if int(self.gamma) != self.gamma or self.gamma < 0:
            raise ValueError("gamma must be a non-negative integer")
        if self.grid_points < 2:
            raise ValueError("need at least two grid points")

    @property
    def stage_weights(self):
        # 0**0 == 1 in numpy, so eta = 0 keeps only stage 0
        return np.float64(self.eta) ** np.arange(self.gamma + 1)

    @property
    def bound(self):
        """Analytic sup of ``|Lambda(x)|`` and value of ``Pi(x, x)``."""
        return float(np.cumsum(self.stage_weights)[-1])


def rng_for(seed):
    """Independent PCG64 generator for one ``SeedSpec`` stream."""
    ss = np.random.SeedSequence(int(seed.master_seed), spawn_key=(int(seed.stream_index),))
    return np.random.Generator(np.random.PCG64(ss))


def draw_uniform(seed, count, convention=Convention.XI):
    """``count`` i.i.d. uniform draws, on [-1, 1] (xi) or [0, 1] (lambda)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    convention = Convention(convention)
    u = rng_for(seed).random(count)
    if convention is Convention.XI:
        u = 2.0 * u - 1.0
    return StochasticDraw(u, convention)


def sign_partition_continuum(x, p):
    """``(-1)**floor(x * 2**(p+1))`` for ``x`` in [0, 1)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x >= 1):
        raise ValueError("x must lie in [0, 1)")
    out = np.where(np.floor(x * 2.0 ** (p + 1)) % 2, -1.0, 1.0)
    return out if out.ndim else float(out)


def _sign_table(x, gamma):
    # shape (gamma+1,) + x.shape
    return np.stack([np.asarray(sign_partition_continuum(x, p)) for p in range(gamma + 1)])


def random_field_sample(draws, spec, x):
    """Value of ``Lambda(x)`` for one set of ``gamma+1`` xi draws.

    ``draws`` may carry a leading batch axis, giving one field value per row.
    """
    xi = draws.as_xi() if isinstance(draws, StochasticDraw) else np.asarray(draws, dtype=float)
    if xi.shape[-1] != spec.gamma + 1:
        raise ValueError(f"need gamma+1 = {spec.gamma + 1} draws, got {xi.shape[-1]}")
    signs = _sign_table(np.asarray(x, dtype=float), spec.gamma)
    coeff = spec.stage_weights * xi
    if signs.ndim == 1:
        return -np.cumsum(coeff * signs, axis=-1)[..., -1]
    return -np.tensordot(coeff, signs, axes=(-1, 0))


def propagator_kernel(x, x_prime, spec):
    """``Pi(x, x') = sum_p eta**p s(x, p) s(x', p)``; symmetric, ``Pi(x, x) > 0``."""
    s = _sign_table(np.asarray(x, dtype=float), spec.gamma)
    t = _sign_table(np.asarray(x_prime, dtype=float), spec.gamma)
    return float(np.cumsum(spec.stage_weights * s * t)[-1]) if s.ndim == 1 else np.tensordot(
        spec.stage_weights, s * t, axes=(0, 0)
    )


def grid_points(m):
    """Cell midpoints ``(i + 1/2)/m`` of the uniform grid on [0, 1]."""
    return (np.arange(m) + 0.5) / m


def continuum_generator(psi, draws, spec):
    """``G(x_i) = Lambda(x_i) + (1/M) sum_i' Pi(x_i, x_i') |psi_i'|^2 / Q``.

    ``psi`` holds M values on the midpoint grid and ``Q`` is its midpoint-rule
    norm. Everything reduces to sums over stage-wise imbalances, so the cost
    is ``O(M * gamma)`` rather than ``O(M**2)``.
    """
    psi = np.asarray(psi)
    m = psi.shape[-1]
    dens = np.abs(psi) ** 2
    q = np.cumsum(dens)[-1] / m
    if not np.isfinite(q) or q <= 0:
        raise InvalidStateError("wavefunction has zero norm on the grid")
    x = grid_points(m)
    signs = _sign_table(x, spec.gamma)  # (gamma+1, M)
    xi = draws.as_xi() if isinstance(draws, StochasticDraw) else np.asarray(draws, dtype=float)
    if xi.shape[-1] != spec.gamma + 1:
        raise ValueError(f"need gamma+1 = {spec.gamma + 1} draws, got {xi.shape[-1]}")
    w = dens / m / q
    g = np.zeros(m)
    for p, eta_p in enumerate(spec.stage_weights):
        imbalance = np.cumsum(w * signs[p])[-1]
        g = g + eta_p * signs[p] * (imbalance - xi[p])
    return g


def field_samples(spec, x, samples, seed):
    """``samples`` independent values of ``Lambda(x)`` (deterministic in ``seed``)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    xi = 2.0 * rng_for(seed).random((samples, spec.gamma + 1)) - 1.0
    return random_field_sample(xi, spec, x)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def density(self):
        total = self.counts.sum()
        return self.counts / (total * self.widths)

    def __add__(self, other):
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return Histogram(self.edges, self.counts + other.counts)


def field_pdf_histogram(spec, x, samples, bins, seed):
    """Histogram of ``Lambda(x)`` on the analytic support ``[-B, B]``.

    ``B = sum_p eta**p``. Counts sum to ``samples``.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    values = field_samples(spec, x, samples, seed)
    edges = np.linspace(-spec.bound, spec.bound, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return Histogram(edges, counts)
