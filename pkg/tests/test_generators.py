import numpy as np
import pytest

from dqsr.generators import (
    Convention,
    ModelKind,
    ModelMismatchError,
    ModelSpec,
    StochasticDraw,
    UnsupportedNError,
    g_bisection,
    g_sequential,
    g_two_state,
    separatrix_values,
    sign_matrix,
    sign_partition,
    theta_velocity_sequential,
    theta_velocity_single_lambda,
    theta_velocity_two_state,
)
from dqsr.state import weights_from_angles


def random_amplitudes(rng, n, size=None):
    shape = (n,) if size is None else (size, n)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


# -- two states


@pytest.mark.parametrize(
    "w, xi, expected",
    [
        ([0.5, 0.5], 0.0, [0.0, 0.0]),
        ([1.0, 0.0], 0.0, [1.0, -1.0]),
        ([0.5, 0.5], 0.3, [-0.3, 0.3]),
    ],
)
def test_g_two_state_examples(w, xi, expected):
    np.testing.assert_allclose(g_two_state(np.sqrt(w), xi), expected, atol=1e-15)


def test_g_two_state_rejects_other_n():
    with pytest.raises(ModelMismatchError):
        g_two_state(np.ones(3), 0.0)


def test_theta_velocity_two_state_examples():
    for xi in (-1.0, -0.2, 0.7, 1.0):
        assert theta_velocity_two_state(0.0, xi) == 0.0
        assert theta_velocity_two_state(np.pi, xi) == 0.0
    v = theta_velocity_two_state(np.pi / 3, 0.9, 1.0)
    assert v == pytest.approx(np.sin(np.pi / 3) * 0.4, rel=1e-14)
    assert v > 0


# -- single lambda


@pytest.mark.parametrize(
    "w, expected",
    [
        ([0.4, 0.35, 0.25], [0.4, 0.75]),
        ([1.0, 0.0], [1.0]),
        ([0.25] * 4, [0.25, 0.5, 0.75]),
    ],
)
def test_separatrix_values(w, expected):
    c = separatrix_values(w)
    np.testing.assert_allclose(c, expected, atol=1e-15)
    assert np.all(np.diff(c) >= 0) and np.all((c >= 0) & (c <= 1))


def test_single_lambda_pointer_states_are_fixed_points():
    for th in ([0.0, 0.0, 0.0], [np.pi, 0.0, np.pi], [0.0, np.pi, np.pi]):
        for lam in (0.1, 0.5, 0.9):
            v = theta_velocity_single_lambda(np.array(th), lam)
            assert np.all(v == 0.0)
    np.testing.assert_array_equal(theta_velocity_single_lambda(np.zeros(3), 0.3), 0.0)


def test_single_lambda_direct_substitution():
    assert theta_velocity_single_lambda(np.array([np.pi / 2]), 0.25, 1.0)[0] == pytest.approx(4.0, rel=1e-12)


def test_single_lambda_gap_floor_keeps_sign():
    th = np.array([np.pi / 2])
    above = theta_velocity_single_lambda(th, 0.5 - 1e-12, 1.0)
    below = theta_velocity_single_lambda(th, 0.5 + 1e-12, 1.0)
    assert above[0] == pytest.approx(1e9) and below[0] == pytest.approx(-1e9)


def test_single_lambda_sign_matches_two_state_flow_at_n2():
    # The one-variable velocity grows theta when lambda sits below the
    # cumulative weight, the two-state lambda flow when it sits above
    # cos^2(theta/2); they describe the same flow with lambda -> 1 - lambda.
    rng = np.random.default_rng(2)
    th = rng.uniform(0, np.pi, 1000)
    lam = rng.uniform(0, 1, 1000)
    v_one = theta_velocity_single_lambda(th[:, None], lam, 1.0)[:, 0]
    v_two = np.sin(th) * ((1 - lam) - np.cos(th / 2) ** 2)
    assert np.array_equal(np.sign(v_one), np.sign(v_two))


def test_single_lambda_basin_from_interval():
    # velocity signs at the initial state already encode the outcome block
    w = np.array([0.4, 0.35, 0.25])
    th = np.array([2 * np.arcsin(np.sqrt(0.4)), 2 * np.arcsin(np.sqrt(0.35 / 0.6))])
    np.testing.assert_allclose(weights_from_angles(th), w)
    v = theta_velocity_single_lambda(th, 0.5)
    assert v[0] < 0 and v[1] > 0


# -- sequential


def test_g_sequential_reduces_to_two_state():
    rng = np.random.default_rng(4)
    a = random_amplitudes(rng, 2, 1000)
    xi = rng.uniform(-1, 1, (1000, 1))
    for eta in (0.05, 0.5, 1.0):
        diff = g_sequential(a, xi, eta) - g_two_state(a, xi)
        assert np.max(np.abs(diff)) <= 1e-12


def test_g_sequential_collapsed_state():
    for xi0 in (-0.7, 0.0, 0.6):
        g = g_sequential(np.array([1.0, 0.0, 0.0]), np.array([xi0, 0.9]), 0.1)
        assert g[0] == pytest.approx(1 - xi0) and g[0] >= 0
        # stage 1 sees zero tail mass and stays silent
        assert g[1] == pytest.approx(-(1 - xi0)) and g[2] == pytest.approx(-(1 - xi0))


def test_g_sequential_direct_substitution():
    g = g_sequential(np.sqrt([0.5, 0.25, 0.25]), np.zeros(2), 0.1)
    np.testing.assert_allclose(g, 0.0, atol=1e-15)


def sequential_by_loops(w, xi, eta):
    # term-by-term evaluation of the stage sums, no vectorization
    n = len(w)
    p = [sum(w[m:]) for m in range(n)]
    bracket = [eta**m * ((w[m] - p[m + 1]) / p[m] - xi[m]) for m in range(n - 1)]
    g = []
    for j in range(n):
        own = bracket[j] if j < n - 1 else 0.0
        g.append(own - sum(bracket[:j]))
    return np.array(g)


def test_g_sequential_matches_loop_oracle():
    rng = np.random.default_rng(9)
    for n in (3, 4, 7):
        a = random_amplitudes(rng, n)
        w = np.abs(a) ** 2 / np.sum(np.abs(a) ** 2)
        xi = rng.uniform(-1, 1, n - 1)
        np.testing.assert_allclose(g_sequential(a, xi, 0.3), sequential_by_loops(w, xi, 0.3), atol=1e-13)


def test_theta_velocity_sequential_examples():
    assert np.all(theta_velocity_sequential(np.array([0.0, np.pi, 0.0]), np.array([0.2, 0.5, 0.9]), 0.1) == 0.0)
    v = theta_velocity_sequential(np.array([np.pi / 2, 1.0]), np.array([1.0, 0.3]), 0.1, 1.0)
    assert v[0] == pytest.approx(0.5)
    th, lam = np.array([1.1, 0.7, 2.0]), np.array([0.9, 0.1, 0.6])
    v1 = theta_velocity_sequential(th, lam, 0.1)
    v2 = theta_velocity_sequential(th, lam, 0.2)
    assert v2[0] == v1[0]
    assert v2[1] == pytest.approx(2 * v1[1], rel=1e-14)


# -- bisection


@pytest.mark.parametrize(
    "p, expected",
    [
        (0, [1, 1, 1, 1, -1, -1, -1, -1]),
        (1, [1, 1, -1, -1, 1, 1, -1, -1]),
        (2, [1, -1, 1, -1, 1, -1, 1, -1]),
    ],
)
def test_sign_partition_n8(p, expected):
    assert [sign_partition(j, p, 8) for j in range(8)] == expected
    np.testing.assert_array_equal(sign_matrix(8, 3)[p], expected)


def test_sign_partition_matches_float_formula():
    for n in (2, 4, 16, 64):
        for p in range(n.bit_length() - 1):
            for j in range(n):
                assert sign_partition(j, p, n) == (-1) ** int(np.floor(j * 2.0 ** (p + 1) / n))


def test_g_bisection_reduces_to_two_state():
    rng = np.random.default_rng(6)
    a = random_amplitudes(rng, 2, 1000)
    xi = rng.uniform(-1, 1, (1000, 1))
    assert np.max(np.abs(g_bisection(a, xi, 0.3) - g_two_state(a, xi))) <= 1e-12


def test_g_bisection_examples():
    np.testing.assert_allclose(g_bisection(np.full(4, 0.5), np.zeros(2), 0.3), 0.0, atol=1e-15)
    g = g_bisection(np.array([1.0, 0, 0, 0]), np.zeros(2), 0.5)
    np.testing.assert_allclose(g, [1.5, 0.5, -0.5, -1.5])
    assert np.argmax(g) == 0


def test_g_bisection_matches_loop_oracle():
    rng = np.random.default_rng(10)
    n, k, eta = 8, 3, 0.4
    a = random_amplitudes(rng, n)
    w = np.abs(a) ** 2 / np.sum(np.abs(a) ** 2)
    xi = rng.uniform(-1, 1, k)
    expected = [
        sum(eta**p * sign_partition(j, p, n) * (sum(sign_partition(i, p, n) * w[i] for i in range(n)) - xi[p]) for p in range(k))
        for j in range(n)
    ]
    np.testing.assert_allclose(g_bisection(a, xi, eta), expected, atol=1e-13)


def test_bisection_needs_power_of_two():
    with pytest.raises(UnsupportedNError, match="zero-pad"):
        ModelSpec("bisection", 6)
    with pytest.raises(UnsupportedNError):
        g_bisection(np.ones(3), np.zeros(1), 0.1)


def test_generators_keep_weight_sum_under_normalized_flow():
    # d/dt sum(w) = 2 sum w_j (G_j - <G>) = 0 identically
    rng = np.random.default_rng(1)
    for g_fn, n, k in ((g_sequential, 5, 4), (g_bisection, 8, 3)):
        a = random_amplitudes(rng, n)
        w = np.abs(a) ** 2 / np.sum(np.abs(a) ** 2)
        g = g_fn(a, rng.uniform(-1, 1, k), 0.2)
        assert abs(np.sum(w * (g - np.sum(w * g)))) < 1e-14


# -- types


def test_model_spec_validation():
    assert ModelSpec("sequential", 5).n_draws == 4
    assert ModelSpec("bisection", 16).n_draws == 4
    assert ModelSpec("single_lambda", 7).draw_convention is Convention.LAMBDA
    with pytest.raises(ModelMismatchError):
        ModelSpec("two_state", 3)
    with pytest.raises(ModelMismatchError):
        ModelSpec("sequential", 3, eta=0.0)
    with pytest.raises(ModelMismatchError):
        ModelSpec("sequential", 3, rate=-1.0)
    with pytest.raises(ValueError):
        ModelSpec("nonsense", 2)
    assert ModelSpec(ModelKind.BISECTION, 4).kind is ModelKind.BISECTION


def test_stochastic_draw_conventions():
    d = StochasticDraw(np.array([-1.0, 0.0, 1.0]), Convention.XI)
    np.testing.assert_allclose(d.as_lambda(), [0.0, 0.5, 1.0])
    lam = StochasticDraw(np.array([0.25]), "lambda")
    np.testing.assert_allclose(lam.as_xi(), [-0.5])
    with pytest.raises(ValueError):
        StochasticDraw(np.array([1.5]), Convention.LAMBDA)
    with pytest.raises(ValueError):
        StochasticDraw(np.array([-0.5]), Convention.LAMBDA)
