"""Parametrised curves in a chart, on the parameter interval [0, 1].

Most curve types are batch-capable: endpoints or control points given with a
leading batch axis produce ``position(t)`` of shape ``(K, n)``, so a whole
family of curves integrates in one vectorised ODE solve.
"""
from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .charts import ScalarField, parse_scalar_field
from .errors import GeometryError

__all__ = [
    "Curve", "ExpressionCurve", "PolylineCurve", "LineCurve", "ConstantCurve",
    "CoordinatePolyline", "BezierCurve", "FunctionCurve", "StackedCurves",
    "ReversedCurve", "read_curve_csv", "write_curve_csv", "format_float",
]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


class Curve:
    """Base class.  Subclasses implement ``position`` and ``velocity``."""
    dim: int
    breakpoints: tuple[float, ...] = ()

    @property
    def batch_size(self) -> int | None:
        return None

    def position(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def velocity(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def reversed(self) -> "Curve":
        return ReversedCurve(self)

    def sample(self, count: int) -> np.ndarray:
        return np.stack([self.position(t) for t in np.linspace(0.0, 1.0, count)])


class ExpressionCurve(Curve):
    """Components given as expressions in the parameter ``t`` (alias ``x1``)."""

    def __init__(self, components: Sequence[ScalarField | str]):
        fields = []
        for c in components:
            f = parse_scalar_field(c, 1, aliases={"t": 1}) if isinstance(c, str) else c
            if f.dim != 1:
                raise GeometryError("curve components must be functions of one variable")
            fields.append(f)
        self.components = fields
        self.dim = len(fields)
        self._d = [f.diff(0) for f in fields]

    def position(self, t):
        return np.array([f(np.array([t])) for f in self.components])

    def velocity(self, t):
        return np.array([f(np.array([t])) for f in self._d])


class PolylineCurve(Curve):
    """Sampled curve with C1 cubic Hermite interpolation.

    Slopes at the samples are second-order finite differences; the parameter is
    rescaled linearly onto [0, 1].
    """

    def __init__(self, t: Sequence[float], points: np.ndarray):
        t = np.asarray(t, dtype=float)
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or len(t) != len(points):
            raise GeometryError("polyline needs one point per parameter value")
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise GeometryError("polyline parameters must be strictly increasing")
        self.source_t = t
        u = (t - t[0]) / (t[-1] - t[0])
        self.knots = u
        self.points = points
        self.dim = points.shape[1]
        edge = 2 if len(u) > 2 else 1
        slopes = np.gradient(points, u, axis=0, edge_order=edge)
        self._spline = CubicHermiteSpline(u, points, slopes, axis=0)
        self._dspline = self._spline.derivative()
        self.breakpoints = tuple(float(x) for x in u[1:-1])

    def position(self, t):
        return self._spline(t)

    def velocity(self, t):
        return self._dspline(t)


class LineCurve(Curve):
    """Straight chart segment ``p0 + t (p1 - p0)``; endpoints may be batched."""

    def __init__(self, p0, p1):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        self.p0, self.p1 = np.broadcast_arrays(p0, p1)
        self.dim = self.p0.shape[-1]

    @property
    def batch_size(self):
        return self.p0.shape[0] if self.p0.ndim == 2 else None

    def position(self, t):
        return self.p0 + t * (self.p1 - self.p0)

    def velocity(self, t):
        return self.p1 - self.p0


class ConstantCurve(LineCurve):
    def __init__(self, p):
        super().__init__(p, p)


def _smoothstep(s):
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)


class CoordinatePolyline(Curve):
    """Axis-aligned path from ``p0`` to ``p1``: coordinate 1 moves first, then
    coordinate 2, and so on.  Each leg takes an equal share of [0, 1] and uses
    the cubic smoothstep, so the curve is C1 with zero velocity at the corners.
    """

    def __init__(self, p0, p1, order: Sequence[int] | None = None):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        self.p0, self.p1 = np.broadcast_arrays(p0, p1)
        self.dim = self.p0.shape[-1]
        self.order = tuple(order) if order is not None else tuple(range(self.dim))
        legs = len(self.order)
        self.breakpoints = tuple(k / legs for k in range(1, legs))

    @property
    def batch_size(self):
        return self.p0.shape[0] if self.p0.ndim == 2 else None

    def _leg(self, t):
        legs = len(self.order)
        k = min(int(t * legs), legs - 1)
        s = t * legs - k
        return k, s, legs

    def position(self, t):
        k, s, _ = self._leg(t)
        x = self.p0.copy()
        for j, axis in enumerate(self.order):
            if j < k:
                x[..., axis] = self.p1[..., axis]
            elif j == k:
                w, _ = _smoothstep(s)
                x[..., axis] = self.p0[..., axis] + w * (self.p1[..., axis] - self.p0[..., axis])
        return x

    def velocity(self, t):
        k, s, legs = self._leg(t)
        v = np.zeros_like(self.p0)
        axis = self.order[k]
        _, dw = _smoothstep(s)
        v[..., axis] = legs * dw * (self.p1[..., axis] - self.p0[..., axis])
        return v


class BezierCurve(Curve):
    """Cubic Bezier curve; ``control`` has shape ``(4, n)`` or ``(K, 4, n)``."""

    def __init__(self, control):
        control = np.asarray(control, dtype=float)
        if control.shape[-2] != 4:
            raise GeometryError("cubic Bezier curves need four control points")
        self.control = control
        self.dim = control.shape[-1]

    @property
    def batch_size(self):
        return self.control.shape[0] if self.control.ndim == 3 else None

    def position(self, t):
        c = self.control
        u = 1.0 - t
        return (u**3 * c[..., 0, :] + 3 * u * u * t * c[..., 1, :]
                + 3 * u * t * t * c[..., 2, :] + t**3 * c[..., 3, :])

    def velocity(self, t):
        c = self.control
        u = 1.0 - t
        return 3 * (u * u * (c[..., 1, :] - c[..., 0, :]) + 2 * u * t * (c[..., 2, :] - c[..., 1, :])
                    + t * t * (c[..., 3, :] - c[..., 2, :]))


class FunctionCurve(Curve):
    """Curve from user callables ``position(t)`` and ``velocity(t)``."""

    def __init__(self, position, velocity, dim: int, breakpoints=(), batch_size=None):
        self._pos = position
        self._vel = velocity
        self.dim = dim
        self.breakpoints = tuple(breakpoints)
        self._batch = batch_size

    @property
    def batch_size(self):
        return self._batch

    def position(self, t):
        return np.asarray(self._pos(t), dtype=float)

    def velocity(self, t):
        return np.asarray(self._vel(t), dtype=float)


class StackedCurves(Curve):
    """Batch made of arbitrary single curves (evaluated one by one)."""

    def __init__(self, curves: Sequence[Curve]):
        if not curves:
            raise GeometryError("empty curve list")
        dims = {c.dim for c in curves}
        if len(dims) != 1:
            raise GeometryError("curves have different dimensions")
        self.curves = list(curves)
        self.dim = dims.pop()
        self.breakpoints = tuple(sorted({b for c in curves for b in c.breakpoints}))

    @property
    def batch_size(self):
        return len(self.curves)

    def position(self, t):
        return np.stack([np.reshape(c.position(t), (-1, self.dim)) for c in self.curves]).reshape(-1, self.dim)

    def velocity(self, t):
        return np.stack([np.reshape(c.velocity(t), (-1, self.dim)) for c in self.curves]).reshape(-1, self.dim)


class ReversedCurve(Curve):
    def __init__(self, curve: Curve):
        self.curve = curve
        self.dim = curve.dim
        self.breakpoints = tuple(sorted(1.0 - b for b in curve.breakpoints))

    @property
    def batch_size(self):
        return self.curve.batch_size

    def position(self, t):
        return self.curve.position(1.0 - t)

    def velocity(self, t):
        return -self.curve.velocity(1.0 - t)


def read_curve_csv(source) -> PolylineCurve:
    """Read ``t,x1,...,xn`` CSV (path or file-like) into a polyline curve."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise GeometryError("empty curve file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t" or any(h != f"x{i}" for i, h in enumerate(header[1:], start=1)):
        raise GeometryError(f"curve header must be t,x1,...,xn; got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise GeometryError(f"malformed curve row: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise GeometryError("curve rows do not match the header")
    return PolylineCurve(data[:, 0], data[:, 1:])


def write_curve_csv(target, t: Sequence[float], points: np.ndarray, prefix: str = "x") -> None:
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    lines = [",".join(["t"] + [f"{prefix}{i}" for i in range(1, n + 1)])]
    for ti, p in zip(t, points):
        lines.append(",".join([format_float(ti)] + [format_float(v) for v in p]))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
