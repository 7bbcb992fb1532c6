"""Explicit initial-value integration with cubic Hermite dense output.

States may be arrays of any shape (a leading batch axis is the usual case);
all arithmetic is elementwise so a batch of independent systems integrates
in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError

__all__ = ["OdeOptions", "Trajectory", "integrate", "DEFAULT_STEP"]

DEFAULT_STEP = 1e-3

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OdeOptions:
    method: str = "rk4"          # "rk4" (fixed step) or "rk45" (Dormand-Prince)
    step: float = DEFAULT_STEP
    atol: float = 1e-10
    rtol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and not self.step > 0:
            raise ValueError("step must be positive")
        if self.method == "rk45" and not (self.atol > 0 and self.rtol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Knots ``(t_i, y_i)`` with slopes ``f_i``; evaluation between knots is
    cubic Hermite on the enclosing step."""
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    def evaluate(self, t: float, derivative: bool = False) -> np.ndarray:
        ts = self.t
        if t < ts[0] - 1e-12 * max(1.0, abs(ts[0])) or t > ts[-1] + 1e-12 * max(1.0, abs(ts[-1])):
            raise ValueError(f"t={t} outside trajectory range [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 2)
        if t == ts[i]:
            return (self.f[i] if derivative else self.y[i]).copy()
        if t == ts[i + 1]:
            return (self.f[i + 1] if derivative else self.y[i + 1]).copy()
        h = ts[i + 1] - ts[i]
        s = (t - ts[i]) / h
        y0, y1, f0, f1 = self.y[i], self.y[i + 1], self.f[i], self.f[i + 1]
        if derivative:
            d00 = (6 * s * s - 6 * s) / h
            d10 = 3 * s * s - 4 * s + 1
            d01 = (-6 * s * s + 6 * s) / h
            d11 = 3 * s * s - 2 * s
            return d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1

    def sample(self, times: Sequence[float]) -> np.ndarray:
        return np.stack([self.evaluate(float(t)) for t in times])


def _check(value: np.ndarray, t: float, y: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite right-hand side at t={t}", t=t, y=y)
    return value


def _segments(t0: float, t1: float, breakpoints: Sequence[float] | None) -> list[float]:
    edges = [t0]
    for b in sorted(set(breakpoints or ())):
        if t0 < b < t1 and b - edges[-1] > 1e-14 * (t1 - t0):
            edges.append(float(b))
    edges.append(t1)
    return edges


def _rk4(rhs: Rhs, y0, t0, t1, step, post_step, ts, ys, fs):
    nsteps = max(1, math.ceil((t1 - t0) / step - 1e-9))
    h = (t1 - t0) / nsteps
    y = ys[-1]
    f0 = fs[-1]
    for i in range(nsteps):
        t = t0 + i * h
        k1 = f0
        k2 = _check(rhs(t + 0.5 * h, y + (0.5 * h) * k1), t, y)
        k3 = _check(rhs(t + 0.5 * h, y + (0.5 * h) * k2), t, y)
        k4 = _check(rhs(t + h, y + h * k3), t, y)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tn = t1 if i == nsteps - 1 else t0 + (i + 1) * h
        if post_step is not None:
            y = post_step(tn, y)
        f0 = _check(rhs(tn, y), tn, y)
        ts.append(tn)
        ys.append(y)
        fs.append(f0)


# Dormand-Prince 5(4)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _rk45(rhs: Rhs, t0, t1, opts: OdeOptions, post_step, ts, ys, fs):
    span = t1 - t0
    min_step = 1e-14 * span
    y = ys[-1]
    f0 = fs[-1]
    t = t0
    scale0 = opts.atol + opts.rtol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / scale0) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale0) ** 2)))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * span
    h = min(max(h, 1e-6 * span), span)
    steps = 0
    while t < t1:
        if steps >= opts.max_steps:
            raise NumericError(f"maximum step count exceeded at t={t}", t=t, y=y)
        h = min(h, t1 - t)
        k = [f0]
        for s in range(1, 7):
            ys_ = y + h * sum(a * kk for a, kk in zip(_DP_A[s], k) if a)
            k.append(_check(rhs(t + _DP_C[s] * h, ys_), t, y))
        y_new = y + h * sum(b * kk for b, kk in zip(_DP_B, k) if b)
        err = h * sum(e * kk for e, kk in zip(_DP_E, k) if e)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if ratio <= 1.0:
            t_new = t1 if t1 - (t + h) <= min_step else t + h
            if post_step is not None:
                y_new = post_step(t_new, y_new)
            f_new = k[6] if post_step is None and t_new == t + h else _check(rhs(t_new, y_new), t_new, y_new)
            t, y, f0 = t_new, y_new, f_new
            ts.append(t)
            ys.append(y)
            fs.append(f0)
            steps += 1
            factor = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** (-1 / 5))
        else:
            factor = max(0.2, 0.9 * ratio ** (-1 / 5))
        h *= factor
        if h < min_step and t < t1:
            raise NumericError(f"step size underflow at t={t}", t=t, y=y)


def integrate(rhs: Rhs, y0, t0: float, t1: float, opts: OdeOptions | None = None,
              breakpoints: Sequence[float] | None = None,
              post_step: Callable[[float, np.ndarray], np.ndarray] | None = None) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1 > t0``.

    ``breakpoints`` split the interval so that no step straddles a point where
    the (continuous) right-hand side has a derivative jump.  With ``rk4`` every segment
    of length ``L`` takes ``ceil(L / step)`` equal steps.  ``post_step`` may
    replace the state after each accepted step (used for optional frame
    re-orthonormalisation).
    """
    opts = opts or OdeOptions()
    if not t1 > t0:
        raise ValueError("integration requires t0 < t1")
    y = np.array(y0, dtype=float)
    ts = [float(t0)]
    ys = [y]
    fs = [_check(np.asarray(rhs(float(t0), y), dtype=float), t0, y)]
    edges = _segments(float(t0), float(t1), breakpoints)
    for a, b in zip(edges[:-1], edges[1:]):
        if opts.method == "rk4":
            _rk4(rhs, y, a, b, opts.step, post_step, ts, ys, fs)
        else:
            _rk45(rhs, a, b, opts, post_step, ts, ys, fs)
    return Trajectory(np.array(ts), np.stack(ys), np.stack(fs),
                      {"method": opts.method, "step": opts.step,
                       "atol": opts.atol, "rtol": opts.rtol})
