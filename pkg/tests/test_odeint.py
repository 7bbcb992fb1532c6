import math

import numpy as np
import pytest

from gendev.errors import NumericError
from gendev.odeint import OdeOptions, integrate


def _decay(t, y):
    return -y


def _oscillator(t, y):
    return np.stack([y[:, 1], -y[:, 0]], axis=1)


def test_exponential_decay():
    traj = integrate(_decay, np.array([[1.0]]), 0.0, 1.0, OdeOptions(step=1e-3))
    assert abs(traj.final[0, 0] - math.exp(-1)) <= 1e-10
    assert len(traj.t) == 1001


def test_oscillator_period():
    traj = integrate(_oscillator, np.array([[1.0, 0.0]]), 0.0, 2 * np.pi, OdeOptions(step=1e-3))
    assert np.abs(traj.final[0] - [1.0, 0.0]).max() <= 1e-8


def test_rk4_observed_order():
    errs = []
    for step in (1e-2, 5e-3):
        traj = integrate(_oscillator, np.array([[1.0, 0.0]]), 0.0, 2 * np.pi, OdeOptions(step=step))
        errs.append(np.abs(traj.final[0] - [1.0, 0.0]).max())
    assert math.log2(errs[0] / errs[1]) >= 3.8


def test_rk45_meets_tolerance():
    opts = OdeOptions(method="rk45", atol=1e-11, rtol=1e-11)
    traj = integrate(_oscillator, np.array([[1.0, 0.0]]), 0.0, 2 * np.pi, opts)
    assert np.abs(traj.final[0] - [1.0, 0.0]).max() <= 1e-8
    assert len(traj.t) < 2000


def test_dense_output():
    traj = integrate(_oscillator, np.array([[1.0, 0.0]]), 0.0, 1.0, OdeOptions(step=0.01))
    for i in (0, 17, 50, 100):
        assert np.array_equal(traj.evaluate(traj.t[i]), traj.y[i])
    t = 0.123456
    y = traj.evaluate(t)[0]
    assert np.abs(y - [math.cos(t), -math.sin(t)]).max() <= 1e-9
    dy = traj.evaluate(t, derivative=True)[0]
    assert np.abs(dy - [-math.sin(t), -math.cos(t)]).max() <= 1e-7
    with pytest.raises(ValueError):
        traj.evaluate(1.5)


def test_breakpoints_are_knots():
    traj = integrate(_decay, np.array([[1.0]]), 0.0, 1.0, OdeOptions(step=0.1), breakpoints=[0.333])
    assert 0.333 in traj.t


def test_deterministic():
    a = integrate(_oscillator, np.array([[1.0, 0.2]]), 0.0, 1.0)
    b = integrate(_oscillator, np.array([[1.0, 0.2]]), 0.0, 1.0)
    assert np.array_equal(a.y, b.y)


def test_non_finite_rhs_reported():
    def blow(t, y):
        return np.full_like(y, np.nan) if t > 0.5 else y

    with pytest.raises(NumericError) as info:
        integrate(blow, np.array([[1.0]]), 0.0, 1.0, OdeOptions(step=0.1))
    assert info.value.t is not None and info.value.t >= 0.5


def test_bad_options():
    with pytest.raises(ValueError):
        OdeOptions(step=0.0)
    with pytest.raises(ValueError):
        OdeOptions(method="euler")
    with pytest.raises(ValueError):
        integrate(_decay, np.array([[1.0]]), 1.0, 0.0)
