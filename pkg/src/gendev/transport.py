"""Parallel transport, developments and generalized developments.

Frames are stored as rows: ``frames[..., A, :]`` holds the chart components of
the A-th frame vector.  All solvers integrate a whole batch of curves at once;
single inputs are promoted to a batch of one and squeezed again on output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .charts import BundleSpec, MetricField
from .curves import Curve
from .errors import ChartExitError, DriftError, GeometryError
from .odeint import OdeOptions, Trajectory, integrate

__all__ = [
    "DevelopOptions", "SplitSeed", "DevelopmentResult", "parallel_transport",
    "bundle_transport", "develop", "generalized_develop", "d_map",
    "orthonormalize", "gram_drift", "frame_coupling", "StatePacker",
    "transport_frames",
]


@dataclass(frozen=True)
class DevelopOptions:
    """``drift_bound`` is the tolerated frame Gram defect per unit parameter;
    ``None`` only reports it.  ``reorthonormalize`` projects frames back onto
    orthonormality after every step (off by default so drift stays visible)."""
    ode: OdeOptions = field(default_factory=OdeOptions)
    reorthonormalize: bool = False
    drift_bound: float | None = 1e-8


class StatePacker:
    """Packs named blocks of shape ``(K, *shape)`` into one ``(K, m)`` state."""

    def __init__(self, **shapes: tuple[int, ...]):
        self.shapes = shapes
        self.slices = {}
        start = 0
        for name, shape in shapes.items():
            size = int(np.prod(shape, dtype=int))
            self.slices[name] = slice(start, start + size)
            start += size
        self.size = start

    def pack(self, **blocks: np.ndarray) -> np.ndarray:
        k = next(iter(blocks.values())).shape[0]
        y = np.zeros((k, self.size))
        for name, value in blocks.items():
            y[:, self.slices[name]] = value.reshape(k, -1)
        return y

    def unpack(self, y: np.ndarray) -> dict[str, np.ndarray]:
        lead = y.shape[:-1]
        return {name: y[..., sl].reshape(lead + self.shapes[name])
                for name, sl in self.slices.items()}


def orthonormalize(frames: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gram-Schmidt (via Cholesky) of frame rows with respect to ``g``.

    ``frames`` is ``(K, M, N)`` and ``g`` is ``(K, N, N)``.  Row order is kept:
    row A only mixes rows 0..A, as in classical Gram-Schmidt.  Two passes
    keep the result orthonormal to rounding for ill-conditioned input.
    """
    for _ in range(2):
        gram = np.einsum("kAi,kij,kBj->kAB", frames, g, frames)
        frames = np.linalg.solve(np.linalg.cholesky(gram), frames)
    return frames


def gram_drift(frames: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``max |<E_A, E_B> - delta_AB|`` per leading index."""
    gram = np.einsum("...Ai,...ij,...Bj->...AB", frames, g, frames)
    eye = np.eye(frames.shape[-2])
    return np.abs(gram - eye).reshape(gram.shape[:-2] + (-1,)).max(axis=-1)


def frame_coupling(hv: np.ndarray, n: int) -> np.ndarray:
    """Antisymmetric coupling ``K`` with ``K[a, alpha] = hv[alpha, a]``.

    ``hv[k, alpha, a] = h^alpha_ab v_b``; the result is ``(K, n+s, n+s)``.
    """
    k, s, _ = hv.shape
    out = np.zeros((k, n + s, n + s))
    out[:, :n, n:] = np.swapaxes(hv, 1, 2)
    out[:, n:, :n] = -hv
    return out


def _check_domain(metric: MetricField, x: np.ndarray, t: float) -> None:
    if metric.domain is not None:
        inside = metric.domain.contains(x)
        if not np.all(inside):
            bad = int(np.argmin(inside))
            raise ChartExitError(f"curve left the chart at t={t:.6g} "
                                 f"(point {x[bad].tolist()})", t=t, y=x)


@dataclass(frozen=True)
class SplitSeed:
    """Base point and ``n + s`` frame rows, the first ``n`` spanning ``T``."""
    point: np.ndarray
    frame: np.ndarray
    n: int

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float)
        e = np.asarray(self.frame, dtype=float)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "frame", e)
        if e.shape[-1] != p.shape[-1] or e.shape[-2] != p.shape[-1]:
            raise GeometryError("seed frame must be square with the ambient dimension")
        if not 0 <= self.n <= e.shape[-2]:
            raise GeometryError("tangent block size out of range")

    @property
    def s(self) -> int:
        return self.frame.shape[-2] - self.n

    def validate(self, ambient: MetricField, tol: float = 1e-12) -> None:
        g = ambient.matrix(self.point)
        drift = gram_drift(self.frame, g)
        if np.any(drift > tol):
            raise GeometryError(f"seed frame is not orthonormal (defect {float(np.max(drift)):.3e})")

    @classmethod
    def from_basis(cls, ambient: MetricField, point, basis, n: int) -> "SplitSeed":
        """Orthonormalise ``basis`` rows (Gram-Schmidt, order kept)."""
        point = np.asarray(point, dtype=float)
        basis = np.asarray(basis, dtype=float)
        pb = point.reshape(-1, point.shape[-1])
        bb = basis.reshape((-1,) + basis.shape[-2:])
        frame = orthonormalize(bb, ambient.matrix(pb)).reshape(basis.shape)
        return cls(point, frame, n)


@dataclass(frozen=True)
class DevelopmentResult:
    """Dense trajectory of ``(point, frame)`` for a batch of developments."""
    trajectory: Trajectory
    metric: MetricField
    n: int
    batched: bool
    drift: np.ndarray
    inputs: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def size(self) -> int:
        return self.trajectory.y.shape[1]

    def _split(self, y: np.ndarray):
        big_n = self.dim
        x = y[..., :big_n]
        e = y[..., big_n:big_n + big_n * big_n].reshape(y.shape[:-1] + (big_n, big_n))
        return x, e

    def _out(self, a: np.ndarray) -> np.ndarray:
        return a if self.batched else a[0]

    def position(self, t: float) -> np.ndarray:
        return self._out(self._split(self.trajectory.evaluate(t))[0])

    def velocity(self, t: float) -> np.ndarray:
        return self._out(self._split(self.trajectory.evaluate(t, derivative=True))[0])

    def frame(self, t: float) -> np.ndarray:
        return self._out(self._split(self.trajectory.evaluate(t))[1])

    @property
    def endpoint(self) -> np.ndarray:
        return self._out(self._split(self.trajectory.final)[0])

    @property
    def final_frame(self) -> np.ndarray:
        return self._out(self._split(self.trajectory.final)[1])

    def knots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(t, points (T, K, N), frames (T, K, N, N))`` at the integrator knots."""
        x, e = self._split(self.trajectory.y)
        return self.trajectory.t, x, e

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))

    def d_map(self, t1: float, t2: float, w) -> np.ndarray:
        return d_map(self, t1, t2, w)


def d_map(dev: DevelopmentResult, t1: float, t2: float, w) -> np.ndarray:
    """Expand ``w`` (chart components at ``dev(t1)``) in the frame at ``t1`` and
    re-emit the coefficients on the frame at ``t2``.

    ``w`` may hold several vectors along its second-to-last axis.
    """
    e1 = np.asarray(dev.trajectory.evaluate(t1))
    e2 = np.asarray(dev.trajectory.evaluate(t2))
    _, f1 = dev._split(e1)
    _, f2 = dev._split(e2)
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1 or (dev.batched and w.ndim == 2)
    wb = w if dev.batched else w[None]
    if single:
        wb = wb[..., None, :]
    # w = c_A E_A  <=>  w = F^T c
    coeff = np.linalg.solve(np.swapaxes(f1, -1, -2), np.swapaxes(wb, -1, -2))
    out = np.swapaxes(np.swapaxes(f2, -1, -2) @ coeff, -1, -2)
    if single:
        out = out[..., 0, :]
    return out if dev.batched else out[0]


def _sampler(value, k: int, shape: tuple[int, ...]) -> Callable[[float], np.ndarray]:
    if callable(value):
        def call(t):
            return np.broadcast_to(np.asarray(value(t), dtype=float), (k,) + shape)
        return call
    arr = np.broadcast_to(np.asarray(value, dtype=float), (k,) + shape)
    return lambda t: arr


def _post_step(metric: MetricField, big_n: int, m: int, offset: int):
    def post(t, y):
        x = y[:, :big_n]
        e = y[:, offset:offset + m * big_n].reshape(-1, m, big_n)
        y = y.copy()
        y[:, offset:offset + m * big_n] = orthonormalize(e, metric.matrix(x)).reshape(len(y), -1)
        return y
    return post


def _finish(traj: Trajectory, metric: MetricField, n: int, batched: bool,
            opts: DevelopOptions, inputs: dict) -> DevelopmentResult:
    big_n = metric.dim
    x = traj.y[..., :big_n]
    e = traj.y[..., big_n:big_n + big_n * big_n].reshape(traj.y.shape[:2] + (big_n, big_n))
    g = metric.matrix(x.reshape(-1, big_n)).reshape(x.shape[:2] + (big_n, big_n))
    drift = gram_drift(e, g).max(axis=0)
    res = DevelopmentResult(traj, metric, n, batched, drift, inputs)
    span = traj.t1 - traj.t0
    if opts.drift_bound is not None and np.any(drift > opts.drift_bound * max(span, 1.0)):
        raise DriftError(f"frame drift {float(drift.max()):.3e} exceeds bound "
                         f"{opts.drift_bound:g}", t=traj.t1, y=None)
    return res


def generalized_develop(ambient: MetricField, seed: SplitSeed, v, h=None,
                        opts: DevelopOptions | None = None, t1: float = 1.0,
                        breakpoints=()) -> DevelopmentResult:
    """Generalized development of ``v`` and ``h`` from ``seed``.

    ``v`` gives the coefficients ``v_a`` of the tangent velocity in the seed's
    first ``n`` vectors: an array or a callable ``t -> (K, n)``.  ``h`` gives
    ``h^alpha_ab`` in the seed frame, shape ``(K, s, n, n)`` (array or
    callable); ``None`` means zero.  The frame evolves by

        d/dt E_a = h^alpha_ab v_b E_alpha,   d/dt E_alpha = -h^alpha_ab v_b E_a

    (covariantly along the curve) and the curve by ``x' = v_a E_a``.
    """
    opts = opts or DevelopOptions()
    seed.validate(ambient)
    big_n, n, s = ambient.dim, seed.n, seed.s
    batched = seed.point.ndim == 2
    p = seed.point if batched else seed.point[None]
    frame = seed.frame if seed.frame.ndim == 3 else np.broadcast_to(seed.frame, (len(p), big_n, big_n))
    k = max(len(p), len(frame))
    if callable(v):
        probe = np.asarray(v(0.0))
        if probe.ndim == 2:
            k = max(k, probe.shape[0])
            batched = True
    elif np.ndim(v) == 2:
        k = max(k, np.shape(v)[0])
        batched = True
    p = np.broadcast_to(p, (k, big_n))
    frame = np.broadcast_to(frame, (k, big_n, big_n))
    vs = _sampler(v, k, (n,))
    hs = None if h is None or s == 0 else _sampler(h, k, (s, n, n))
    packer = StatePacker(x=(big_n,), e=(big_n, big_n))

    def rhs(t, y):
        st = packer.unpack(y)
        x, e = st["x"], st["e"]
        _check_domain(ambient, x, t)
        vt = vs(t)
        vel = np.einsum("ka,kac->kc", vt, e[:, :n])
        gam = ambient.geometry(x)["gamma"]
        if hs is not None:
            hv = np.einsum("kgab,kb->kga", hs(t), vt)
            coupling = frame_coupling(hv, n)
        else:
            coupling = np.zeros((k, 0, 0))
        de = kernels.frame_rhs(gam, vel, e, coupling)
        return np.concatenate([vel, de.reshape(k, -1)], axis=1)

    post = _post_step(ambient, big_n, big_n, big_n) if opts.reorthonormalize else None
    y0 = packer.pack(x=p, e=frame)
    traj = integrate(rhs, y0, 0.0, t1, opts.ode, breakpoints, post)
    return _finish(traj, ambient, n, batched, opts, {"v": v, "h": h, "seed": seed})


def develop(metric: MetricField, p, frame, v, opts: DevelopOptions | None = None,
            t1: float = 1.0, breakpoints=()) -> DevelopmentResult:
    """Classical development: ``gamma(0) = p``, ``gamma' = P_0^t(v(t))``.

    ``frame`` is an orthonormal basis of ``T_pM`` (rows) and ``v`` the
    coefficients of the tangent curve in that basis.
    """
    frame = np.asarray(frame, dtype=float)
    return generalized_develop(metric, SplitSeed(p, frame, metric.dim), v, None,
                               opts, t1, breakpoints)


def transport_frames(metric: MetricField, curve: Curve, frames, t1: float = 0.0,
                     t2: float = 1.0, opts: OdeOptions | None = None,
                     bundle: BundleSpec | None = None, bundle_frames=None):
    """Transport rows of ``frames`` (``(K, M, n)``) along a batched curve from
    ``t1`` to ``t2``; optionally co-transport bundle coefficient rows
    (``(K, L, s)``) by the bundle connection.  Returns the trajectory and the
    packer describing its state layout.
    """
    n = metric.dim
    frames = np.asarray(frames, dtype=float)
    k, m = frames.shape[0], frames.shape[1]
    src = curve
    a, b = t1, t2
    if t1 > t2:
        src = curve.reversed()
        a, b = 1.0 - t1, 1.0 - t2
    shapes = {"e": (m, n)}
    if bundle is not None:
        bf = np.asarray(bundle_frames, dtype=float)
        shapes["c"] = bf.shape[1:]
    packer = StatePacker(**shapes)

    def rhs(t, y):
        st = packer.unpack(y)
        x = np.broadcast_to(src.position(t), (k, n))
        vel = np.broadcast_to(src.velocity(t), (k, n))
        _check_domain(metric, x, t)
        gam = metric.geometry(np.ascontiguousarray(x))["gamma"]
        out = [kernels.frame_rhs(gam, vel, st["e"], np.zeros((k, 0, 0))).reshape(k, -1)]
        if bundle is not None:
            om = np.einsum("kaBA,ka->kBA", bundle.connection(x), vel)
            out.append(-np.einsum("kLA,kBA->kLB", st["c"], om).reshape(k, -1))
        return np.concatenate(out, axis=1)

    blocks = {"e": frames}
    if bundle is not None:
        blocks["c"] = bf
    y0 = packer.pack(**blocks)
    return integrate(rhs, y0, a, b, opts, src.breakpoints), packer


def _promote(curve: Curve, vectors, last: int):
    vectors = np.asarray(vectors, dtype=float)
    if curve.batch_size is None:
        shape = vectors.shape
        rows = vectors.reshape(1, -1, last)
        return rows, lambda out: out.reshape(shape)
    k = curve.batch_size
    shape = vectors.shape
    rows = vectors.reshape(k, -1, last)
    return rows, lambda out: out.reshape(shape)


def parallel_transport(metric: MetricField, curve: Curve, v0, t1: float = 0.0,
                       t2: float = 1.0, opts: OdeOptions | None = None) -> np.ndarray:
    """Levi-Civita transport of ``v0`` from ``curve(t1)`` to ``curve(t2)``.

    For a single curve ``v0`` may be one vector or a stack of vectors; for a
    batched curve its leading axis is the batch.
    """
    if t1 == t2:
        return np.array(v0, dtype=float)
    rows, restore = _promote(curve, v0, metric.dim)
    traj, packer = transport_frames(metric, curve, rows, t1, t2, opts)
    return restore(packer.unpack(traj.final)["e"])


def bundle_transport(bundle: BundleSpec, curve: Curve, c0, t1: float = 0.0,
                     t2: float = 1.0, opts: OdeOptions | None = None) -> np.ndarray:
    """Transport bundle coefficients ``c0`` (declared frame) by the connection."""
    if t1 == t2:
        return np.array(c0, dtype=float)
    rows, restore = _promote(curve, c0, bundle.rank)
    k = rows.shape[0]
    dummy = MetricField.euclidean(bundle.base_dim)
    traj, packer = transport_frames(dummy, curve, np.zeros((k, 0, bundle.base_dim)), t1, t2,
                                    opts, bundle, rows)
    return restore(packer.unpack(traj.final)["c"])
