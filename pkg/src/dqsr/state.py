"""Superposition states over N pointer states.

States are plain numpy arrays:

* amplitudes -- complex array of length N, not necessarily normalized
* weights -- real array of length N, non-negative, summing to one
* angles -- real array of length N-1 in [0, pi], the generalized Bloch angles

All functions also accept a leading batch axis (shape ``(n, N)``), which is
what the ensemble integrator uses.
"""

import numpy as np

__all__ = [
    "InvalidStateError",
    "born_weights",
    "squared_moduli",
    "row_sum",
    "row_cumsum",
    "row_cumprod",
    "tail_sums",
    "normalize",
    "weights_from_angles",
    "angles_from_weights",
    "validate_weights",
    "validate_angles",
]

# Tail mass below this is treated as exactly zero when inverting the angle map.
TAIL_EPS = 1e-15


class InvalidStateError(ValueError):
    """Raised for states with zero norm or weights outside the simplex."""


def row_cumsum(a):
    """Cumulative sum along the last axis, accumulated column by column.

    For the short last axes used here this is much faster than ``np.cumsum``
    on a batch, and the summation order is fixed per row, so a row gives the
    same bits whatever batch it sits in.
    """
    a = np.asarray(a)
    out = np.empty_like(a, dtype=np.result_type(a, np.float64))
    acc = out[..., 0] = a[..., 0]
    for j in range(1, a.shape[-1]):
        acc = out[..., j] = acc + a[..., j]
    return out


def row_cumprod(a):
    """Cumulative product along the last axis; see :func:`row_cumsum`."""
    a = np.asarray(a)
    out = np.empty_like(a, dtype=np.result_type(a, np.float64))
    acc = out[..., 0] = a[..., 0]
    for j in range(1, a.shape[-1]):
        acc = out[..., j] = acc * a[..., j]
    return out


def row_sum(a):
    """Sum over the last axis (kept as a length-1 axis); see :func:`row_cumsum`."""
    a = np.asarray(a)
    acc = a[..., 0]
    for j in range(1, a.shape[-1]):
        acc = acc + a[..., j]
    return np.asarray(acc)[..., None]


def tail_sums(a):
    """``T_j = sum_{k>=j} a_k`` along the last axis."""
    return np.flip(row_cumsum(np.flip(a, axis=-1)), axis=-1)


def squared_moduli(amplitudes):
    """``|a_j|^2`` elementwise."""
    a = np.asarray(amplitudes)
    if np.iscomplexobj(a):
        return a.real * a.real + a.imag * a.imag
    return a * a


def _squared_norm(amps):
    p = squared_moduli(amps)
    return p, row_sum(p)


def born_weights(amplitudes):
    """Normalized weights ``|a_j|^2 / sum_k |a_k|^2``.

    Independent of the overall norm and global phase of ``amplitudes``.
    """
    amps = np.asarray(amplitudes)
    if amps.shape[-1] < 2:
        raise InvalidStateError("need at least two pointer states")
    p, norm2 = _squared_norm(amps)
    if not np.all(np.isfinite(norm2)) or np.any(norm2 <= 0.0):
        raise InvalidStateError("state has zero (or non-finite) norm")
    return p / norm2


def normalize(amplitudes):
    """Rescale amplitudes to unit norm; phases are left untouched."""
    amps = np.asarray(amplitudes)
    _, norm2 = _squared_norm(amps)
    if not np.all(np.isfinite(norm2)) or np.any(norm2 <= 0.0):
        raise InvalidStateError("state has zero (or non-finite) norm")
    return amps / np.sqrt(norm2)


def weights_from_angles(angles):
    """Map generalized Bloch angles to pointer-state weights.

    ``w_0 = sin^2(t_1/2)``, ``w_j = sin^2(t_{j+1}/2) prod_{m<=j} cos^2(t_m/2)``
    and the last weight is the full product of cosines.
    """
    th = np.asarray(angles, dtype=float)
    s2 = np.sin(th / 2.0) ** 2
    c2 = np.cos(th / 2.0) ** 2
    # prefix products of cos^2, with an empty product of 1 in front
    order = "F" if th.ndim > 1 and th.flags.f_contiguous else "C"
    out = np.empty(th.shape[:-1] + (th.shape[-1] + 1,), order=order)
    out[..., 0] = 1.0
    out[..., 1:] = row_cumprod(c2)
    out[..., :-1] *= s2
    return out


def angles_from_weights(weights):
    """Inverse of :func:`weights_from_angles`.

    Where the remaining tail mass vanishes the angle is undetermined; it is
    set to 0 by convention.
    """
    w = np.asarray(weights, dtype=float)
    w = np.where(w < TAIL_EPS, 0.0, w)
    # tail mass T_j = 1 - sum_{k<j} w_k, computed as a reverse cumsum so it is
    # exactly zero once only zeros remain
    tail = tail_sums(w)[..., :-1]
    head = w[..., :-1]
    safe = tail > TAIL_EPS
    ratio = np.where(safe, head / np.where(safe, tail, 1.0), 0.0)
    return 2.0 * np.arcsin(np.sqrt(np.clip(ratio, 0.0, 1.0)))


def validate_weights(weights, atol=1e-9):
    """Return ``weights`` as a float array after checking the simplex constraints."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise InvalidStateError("weights must be a 1-d vector with N >= 2 entries")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidStateError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > atol:
        raise InvalidStateError(f"weights sum to {w.sum()!r}, expected 1")
    return w


def validate_angles(angles):
    th = np.asarray(angles, dtype=float)
    if th.ndim != 1 or th.size < 1:
        raise InvalidStateError("angles must be a 1-d vector with N-1 >= 1 entries")
    if not np.all(np.isfinite(th)) or np.any(th < 0) or np.any(th > np.pi):
        raise InvalidStateError("every angle must lie in [0, pi]")
    return th
