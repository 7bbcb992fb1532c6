"""Co-integration of the base transport and the ambient generalized development.

The base side carries an orthonormal tangent frame ``E`` (Levi-Civita
transport) and a bundle frame ``B`` (transport by the bundle connection)
along a base curve.  At every stage time the tangent velocity and ``h`` are
read off in these frames and drive the ambient generalized development, so
the ambient inputs are exactly ``phi(P_t^0 gamma')`` and ``(phi^-1)^* P_t^0 h``.

The base curve is either prescribed (a :class:`~gendev.curves.Curve`) or
itself a development of frame coefficients ``v(t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .curves import Curve
from .fundeq import h_in_frame, tau_from_frames
from .odeint import Trajectory, integrate
from .problem import StartData
from .transport import (DevelopmentResult, DevelopOptions, StatePacker, _check_domain,
                        frame_coupling, gram_drift, orthonormalize)

__all__ = ["CoIntegration", "co_integrate"]

Extra = Callable[[float, dict, dict], dict]


@dataclass(frozen=True)
class CoIntegration:
    problem: object
    trajectory: Trajectory
    packer: StatePacker
    start: StartData
    drift: np.ndarray

    def state(self, t: float | None = None) -> dict[str, np.ndarray]:
        y = self.trajectory.final if t is None else self.trajectory.evaluate(t)
        return self.packer.unpack(y)

    def knots(self) -> dict[str, np.ndarray]:
        return self.packer.unpack(self.trajectory.y)

    def final(self) -> dict[str, np.ndarray]:
        return self.state()

    def tau(self) -> np.ndarray:
        st = self.final()
        return tau_from_frames(st["E"], st["B"], st["Et"])

    def ambient_development(self) -> DevelopmentResult:
        """View of the ambient part as a development result."""
        sl_x = self.packer.slices["xt"]
        sl_e = self.packer.slices["Et"]
        idx = np.r_[sl_x.start:sl_x.stop, sl_e.start:sl_e.stop]
        tr = self.trajectory
        view = Trajectory(tr.t, tr.y[..., idx], tr.f[..., idx], tr.meta)
        return DevelopmentResult(view, self.problem.ambient, self.problem.n, True,
                                 self.drift, {"start": self.start})


def co_integrate(problem, start: StartData, curve: Curve | None = None,
                 velocity: Callable[[float], np.ndarray] | None = None,
                 opts: DevelopOptions | None = None, breakpoints=(),
                 extra_shapes: dict | None = None, extra_init: dict | None = None,
                 extra_rhs: Extra | None = None, curvature: bool = False) -> CoIntegration:
    """Integrate over ``t`` in ``[0, 1]`` for a batch of ``start.size`` curves.

    Exactly one of ``curve`` (batched or single, broadcast over the batch) and
    ``velocity`` (``t -> (K, n)`` coefficients in the transported frame) must be
    given.  ``extra_*`` append further state blocks whose derivatives are
    computed by ``extra_rhs(t, state, derived)``; ``derived`` exposes the
    quantities already computed for the main system; with ``curvature`` the
    geometry entries also carry the lowered curvature tensors.
    """
    if (curve is None) == (velocity is None):
        raise ValueError("give exactly one of curve and velocity")
    opts = opts or DevelopOptions()
    n, s, big_n = problem.n, problem.s, problem.big_n
    k = start.size
    base, ambient = problem.base, problem.ambient
    shapes = {"E": (n, n), "B": (s, s), "xt": (big_n,), "Et": (big_n, big_n)}
    if velocity is not None:
        shapes = {"x": (n,), **shapes}
    shapes.update(extra_shapes or {})
    packer = StatePacker(**shapes)

    def rhs(t, y):
        st = packer.unpack(y)
        e, b = st["E"], st["B"]
        if curve is not None:
            x = np.ascontiguousarray(np.broadcast_to(curve.position(t), (k, n)))
            vel = np.broadcast_to(curve.velocity(t), (k, n))
            _check_domain(base, x, t)
            geo = base.geometry(x, curvature)
            v = np.einsum("kac,kcd,kd->ka", e, geo["g"], vel)
        else:
            x = st["x"]
            _check_domain(base, x, t)
            geo = base.geometry(x, curvature)
            v = np.broadcast_to(velocity(t), (k, n))
            vel = np.einsum("ka,kac->kc", v, e)
        out = {"E": kernels.frame_rhs(geo["gamma"], vel, e, np.zeros((k, 0, 0)))}
        if curve is None:
            out["x"] = vel
        if s:
            om = np.einsum("kaBA,ka->kBA", problem.bundle.connection(x), vel)
            out["B"] = -np.einsum("kLA,kBA->kLB", b, om)
            hf = h_in_frame(problem, x, e, b)
            hv = np.einsum("kgab,kb->kga", hf, v)
            coupling = frame_coupling(hv, n)
        else:
            out["B"] = np.zeros((k, 0, 0))
            hf = np.zeros((k, 0, n, n))
            coupling = np.zeros((k, 0, 0))
        xt, et = st["xt"], st["Et"]
        _check_domain(ambient, xt, t)
        vt = np.einsum("ka,kac->kc", v, et[:, :n])
        geo_t = ambient.geometry(xt, curvature)
        out["xt"] = vt
        out["Et"] = kernels.frame_rhs(geo_t["gamma"], vt, et, coupling)
        if extra_rhs is not None:
            derived = {"x": x, "vel": vel, "v": v, "geo": geo, "geo_t": geo_t,
                       "h_frame": hf, "coupling": coupling}
            out.update(extra_rhs(t, st, derived))
        return np.concatenate([out[name].reshape(k, -1) for name in packer.shapes], axis=1)

    blocks = {"E": start.frame, "B": start.bundle, "xt": start.ambient_point,
              "Et": start.ambient_frame}
    if velocity is not None:
        blocks["x"] = start.x
    blocks.update(extra_init or {})
    y0 = packer.pack(**blocks)
    bps = tuple(breakpoints) + (tuple(curve.breakpoints) if curve is not None else ())
    post = _reorthonormalize(problem, packer, curve, k) if opts.reorthonormalize else None
    traj = integrate(rhs, y0, 0.0, 1.0, opts.ode, bps, post)
    st = packer.unpack(traj.y)
    gt = ambient.matrix(st["xt"].reshape(-1, big_n)).reshape(st["xt"].shape + (big_n,))
    drift = gram_drift(st["Et"], gt).max(axis=0)
    return CoIntegration(problem, traj, packer, start, drift)


def _reorthonormalize(problem, packer: StatePacker, curve: Curve | None, k: int):
    """Per-step projection of all three frames back onto orthonormality."""
    n = problem.n

    def post(t, y):
        st = packer.unpack(y)
        x = st["x"] if curve is None else np.broadcast_to(curve.position(t), (k, n))
        st["E"] = orthonormalize(st["E"], problem.base.matrix(x))
        if problem.s:
            st["B"] = orthonormalize(st["B"], problem.bundle.metric(x))
        st["Et"] = orthonormalize(st["Et"], problem.ambient.matrix(st["xt"]))
        return packer.pack(**st)
    return post
