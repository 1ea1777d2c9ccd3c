import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsa2.errors import ParameterError
from dsa2.topology import Topology, gen_named, metropolis_weights
from dsa2.tracking import init_tracking, tracking_step


def test_init_examples():
    st0 = init_tracking(np.array([[2.0]]))
    assert st0.s[0, 0] == st0.z[0, 0] == st0.last_grad[0, 0] == 2.0
    st1 = init_tracking(np.array([[1.0], [3.0]]))
    assert st1.s.mean() == 2.0 == st1.last_grad.mean()
    st2 = init_tracking(np.zeros((3, 2)))
    assert not st2.s.any() and not st2.z.any()


def test_single_agent_tracker_is_exact():
    p = metropolis_weights(Topology(1, ()))
    state = init_tracking(np.array([[1.0, -1.0]]))
    for g in ([3.0, 0.5], [-2.0, 4.0]):
        state = tracking_step(state, p, np.array([g]))
        np.testing.assert_array_equal(state.s[0], g)


def test_constant_gradients_average_on_complete_two():
    p = metropolis_weights(gen_named("complete", 2))
    state = init_tracking(np.array([[0.0], [2.0]]))
    state = tracking_step(state, p, state.last_grad.copy())
    np.testing.assert_allclose(state.s, [[1.0], [1.0]])
    np.testing.assert_allclose(state.z, [[1.0], [3.0]])


def test_dimension_mismatch():
    p = metropolis_weights(gen_named("path", 3))
    state = init_tracking(np.zeros((3, 2)))
    with pytest.raises(ParameterError):
        tracking_step(state, p, np.zeros((3, 1)))
    with pytest.raises(ParameterError):
        tracking_step(state, metropolis_weights(gen_named("path", 2)), np.zeros((3, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**31))
def test_conservation_property(n, m, seed):
    rng = np.random.default_rng(seed)
    t = gen_named("path", n) if n > 1 else Topology(1, ())
    p = metropolis_weights(t)
    state = init_tracking(rng.uniform(-5, 5, (n, m)))
    for _ in range(200):
        state = tracking_step(state, p, rng.uniform(-5, 5, (n, m)))
        assert np.max(np.abs(state.s.mean(axis=0) - state.last_grad.mean(axis=0))) <= 1e-9


def test_mean_preserved_with_unchanged_gradients():
    rng = np.random.default_rng(3)
    p = metropolis_weights(gen_named("star", 6))
    state = init_tracking(rng.normal(size=(6, 2)))
    state = state.__class__(rng.normal(size=(6, 2)), state.z, state.last_grad)
    mean0 = state.s.mean(axis=0)
    for _ in range(10):
        state = tracking_step(state, p, state.last_grad)
    np.testing.assert_allclose(state.s.mean(axis=0), mean0, atol=1e-13)
