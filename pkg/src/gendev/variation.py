"""Variation fields of one-parameter families of (generalized) developments.

A family is given by frame velocities ``v_a(u, t)`` (expressions in ``u`` and
``t``).  For a point seed every member starts at the seed with the seed
frames; for a submanifold seed member ``u`` starts at ``S(theta(u))`` with
frames carried along ``theta`` (tangent and normal parts of the base frame
parallel for the connections of ``S``, bundle frame parallel for ``D``).

Along the center member ``u`` the ambient system for ``(U~, U~', X~)`` and the
base system for ``(U, U', X, X_V)`` are integrated together with the
development itself.  ``u``-derivatives of the transported ``h`` are central
differences over the neighbouring members ``u +- eps``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .charts import ScalarField, parse_scalar_field
from .errors import GeometryError
from .export import dumps
from .fundeq import dh_in_frame, h_in_frame
from .pipeline import co_integrate
from .problem import PointSeed, Problem, StartData, SubmanifoldSeed
from .transport import DevelopOptions, frame_coupling

__all__ = [
    "CurveFamily", "VariationTrajectory", "AnsatzReport", "integrate_gvariation",
    "integrate_base_variation", "integrate_variations", "verify_ansatz", "FD_STEP",
]

FD_STEP = 1e-6


def _field(value, dim: int, aliases: dict[str, int]) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, (int, float)):
        return ScalarField.constant(float(value), dim)
    return parse_scalar_field(value, dim, aliases)


class CurveFamily:
    """Frame velocities ``v_a(u, t)`` and, for submanifold seeds, the curve
    ``theta(u)`` of start parameters on ``S``.

    ``components`` are expressions in ``u`` and ``t`` (equivalently ``x1``
    and ``x2``); ``theta`` entries are expressions in ``u``.
    """

    def __init__(self, components: Sequence, theta: Sequence | None = None):
        alias = {"u": 1, "t": 2}
        self.components = [_field(c, 2, alias) for c in components]
        self._du = [f.diff(0) for f in self.components]
        self._dt = [f.diff(1) for f in self.components]
        self._dudt = [f.diff(1) for f in self._du]
        self.theta = None if theta is None else [_field(c, 1, {"u": 1}) for c in theta]
        self._dtheta = None if theta is None else [f.diff(0) for f in self.theta]

    @property
    def dim(self) -> int:
        return len(self.components)

    @staticmethod
    def _eval(fields, u, t) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        pts = np.stack([u, np.full_like(u, t)], axis=1)
        return np.stack([np.broadcast_to(f(pts), u.shape) for f in fields], axis=1)

    def velocity(self, u, t: float) -> np.ndarray:
        return self._eval(self.components, u, t)

    def du(self, u, t: float) -> np.ndarray:
        return self._eval(self._du, u, t)

    def dt(self, u, t: float) -> np.ndarray:
        return self._eval(self._dt, u, t)

    def dudt(self, u, t: float) -> np.ndarray:
        return self._eval(self._dudt, u, t)

    def theta_point(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
        return np.stack([np.broadcast_to(f(u), u.shape[:1]) for f in self.theta], axis=1)

    def theta_velocity(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
        return np.stack([np.broadcast_to(f(u), u.shape[:1]) for f in self._dtheta], axis=1)


@dataclass(frozen=True)
class VariationTrajectory:
    """Variation state at the integrator knots of the center member.

    ``U`` and ``dU`` are frame components ``(M, m)``, ``X`` the frame rotation
    ``(M, m, m)``; on the base side ``XV`` holds the bundle block.  ``h_frame``
    is ``h`` in the transported frames ``[M, alpha, a, b]``.
    """
    kind: str
    t: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    X: np.ndarray
    XV: np.ndarray | None
    h_frame: np.ndarray
    n: int
    s: int
    u: float

    def antisymmetry_defect(self) -> float:
        out = float(np.abs(self.X + np.swapaxes(self.X, 1, 2)).max(initial=0.0))
        if self.XV is not None and self.XV.size:
            out = max(out, float(np.abs(self.XV + np.swapaxes(self.XV, 1, 2)).max()))
        return out

    def at(self, t: np.ndarray) -> "VariationTrajectory":
        """Linear resampling onto other knot times (exact at shared knots)."""
        t = np.asarray(t, dtype=float)

        def res(a):
            if a is None:
                return None
            flat = a.reshape(len(self.t), -1)
            cols = [np.interp(t, self.t, flat[:, j]) for j in range(flat.shape[1])]
            return np.stack(cols, axis=1).reshape((len(t),) + a.shape[1:])

        return VariationTrajectory(self.kind, t, res(self.U), res(self.dU), res(self.X),
                                   res(self.XV), res(self.h_frame), self.n, self.s, self.u)


def _members(u: float, eps: float) -> np.ndarray:
    return np.array([u - eps, u, u + eps])


def _frame_rhs_along_s(problem: Problem, seed: SubmanifoldSeed, family: CurveFamily,
                       u: float, e: np.ndarray, b: np.ndarray):
    """``d/du`` of base and bundle frame rows carried along ``theta``."""
    n, r = problem.n, seed.r
    th = family.theta_point(u)
    x = seed.point(th)
    jac = seed.embed.jacobian(th)
    xdot = np.einsum("ki,kic->kc", family.theta_velocity(u), jac)
    geo = problem.base.geometry(x)
    g = geo["g"]
    comps = np.einsum("kc,kcd,kAd->kA", xdot, g, e)         # frame components of xdot
    gram = np.einsum("kic,kcd,kjd->kij", jac, g, jac)
    coef = np.linalg.solve(gram, np.einsum("kic,kcd,kAd->kiA", jac, g, e[:, :r]))
    sig = np.einsum("kpA,kqB,kpqc->kABc", coef, coef, seed.sigma(problem, th))
    sig_f = np.einsum("kABc,kcd,kmd->kABm", sig, g, e[:, r:])  # sigma^mu_ij
    cmat = np.zeros((1, n, n))
    cmat[:, :r, r:] = np.einsum("kijm,kj->kim", sig_f, comps[:, :r])
    cmat[:, r:, :r] = -np.swapaxes(cmat[:, :r, r:], 1, 2)
    de = kernels.frame_rhs(geo["gamma"], xdot, e, cmat)
    if problem.s:
        om = np.einsum("kaBA,ka->kBA", problem.bundle.connection(x), xdot)
        db = -np.einsum("kLA,kBA->kLB", b, om)
    else:
        db = np.zeros_like(b)
    return de, db, comps, sig_f


def _carry_frames(problem, seed, family, u0, e0, b0, du):
    """One classical RK4 step of the frame equations along ``theta``."""
    def f(u, e, b):
        de, db, _, _ = _frame_rhs_along_s(problem, seed, family, u, e, b)
        return de, db
    k1 = f(u0, e0, b0)
    k2 = f(u0 + du / 2, e0 + du / 2 * k1[0], b0 + du / 2 * k1[1])
    k3 = f(u0 + du / 2, e0 + du / 2 * k2[0], b0 + du / 2 * k2[1])
    k4 = f(u0 + du, e0 + du * k3[0], b0 + du * k3[1])
    e = e0 + du / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    b = b0 + du / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return e, b


@dataclass(frozen=True)
class _Seeded:
    start: StartData
    theta: np.ndarray | None       # frame components of the S-velocity, (r,)
    sigma: np.ndarray | None       # sigma^mu_ij in the center frame, (r, r, n - r)


def _member_start(problem: Problem, family: CurveFamily, u: float, eps: float) -> _Seeded:
    seed = problem.seed
    if isinstance(seed, PointSeed):
        if family.theta is not None:
            raise GeometryError("theta(u) is only meaningful for a submanifold seed")
        return _Seeded(problem.start(3), None, None)
    if family.theta is None:
        raise GeometryError("a submanifold seed needs the start curve theta(u)")
    if len(family.theta) != seed.r:
        raise GeometryError(f"theta has {len(family.theta)} components, S has dimension {seed.r}")
    center = seed.frames(problem, family.theta_point(u))
    e0, b0 = center.frame, center.bundle
    rows = []
    for du in (-eps, 0.0, eps):
        e, b = (e0, b0) if du == 0.0 else _carry_frames(problem, seed, family, u, e0, b0, du)
        th = family.theta_point(u + du)
        rows.append(StartData(seed.point(th), e, b, seed.ambient_point(th),
                              seed.ambient_frame(problem, th, e, b), th))
    start = StartData(*(np.concatenate([getattr(r_, f) for r_ in rows]) for f in
                        ("x", "frame", "bundle", "ambient_point", "ambient_frame", "params")))
    _, _, comps, sig = _frame_rhs_along_s(problem, seed, family, u, e0, b0)
    return _Seeded(start, comps[0, :seed.r], sig[0])


def _initial_data(problem: Problem, family: CurveFamily, u: float, seeded: _Seeded):
    """Initial ``(U, U', X, X_V)`` on the base and ``(U~, U~', X~)`` on the ambient side."""
    n, s = problem.n, problem.s
    big_n = n + s
    v0 = family.velocity(u, 0.0)[0]
    dv0 = family.du(u, 0.0)[0]
    ub, xb, xv = np.zeros(n), np.zeros((n, n)), np.zeros((s, s))
    ua, xa = np.zeros(big_n), np.zeros((big_n, big_n))
    if seeded.theta is not None:
        r = len(seeded.theta)
        st = seeded.start.take(slice(1, 2))
        th = family.theta_point(u)
        seed = problem.seed
        # frame components of the variation of the start point, computed on both sides
        sdot = np.einsum("ki,kic->kc", family.theta_velocity(u), seed.embed.jacobian(th))
        ub = np.einsum("kc,kcd,kAd->kA", sdot, problem.base.matrix(st.x), st.frame)[0]
        tdot = np.einsum("ki,kic->kc", family.theta_velocity(u), seed.ambient_embed.jacobian(th))
        ua = np.einsum("kc,kcd,kAd->kA", tdot, problem.ambient.matrix(st.ambient_point),
                       st.ambient_frame)[0]
        sig = np.einsum("ijm,j->im", seeded.sigma, seeded.theta)
        xb[:r, r:] = sig
        xb[r:, :r] = -sig.T
        xa[:n, :n] = xb
        if s:
            hf = h_in_frame(problem, st.x, st.frame, st.bundle)[0]
            ha = np.einsum("gai,i->ag", hf[:, :, :r], seeded.theta)
            xa[:n, n:] = ha
            xa[n:, :n] = -ha.T
    w0 = np.concatenate([v0, np.zeros(s)])
    dw0 = np.concatenate([dv0, np.zeros(s)])
    k0 = _coupling(problem, seeded.start.take(slice(1, 2)), v0)
    dua = dw0 + w0 @ xa - ua @ k0
    dub = dv0 + v0 @ xb
    return (ub, dub, xb, xv), (ua, dua, xa)


def _coupling(problem: Problem, st: StartData, v: np.ndarray) -> np.ndarray:
    if not problem.s:
        return np.zeros((problem.n, problem.n))
    hf = h_in_frame(problem, st.x, st.frame, st.bundle)
    return frame_coupling(np.einsum("kgab,b->kga", hf, v), problem.n)[0]


def integrate_variations(problem: Problem, family: CurveFamily, u: float,
                         opts: DevelopOptions | None = None, eps: float = FD_STEP,
                         sides: tuple[str, ...] = ("base", "ambient"),
                         ) -> dict[str, VariationTrajectory]:
    """Integrate the requested variation systems along the member ``u``."""
    opts = opts or DevelopOptions()
    n, s = problem.n, problem.s
    big_n = n + s
    if family.dim != n:
        raise GeometryError(f"family has {family.dim} velocity components, base dimension is {n}")
    seeded = _member_start(problem, family, u, eps)
    us = _members(u, eps)
    (ub, dub, xb, xv), (ua, dua, xa) = _initial_data(problem, family, u, seeded)
    shapes, init = {}, {}
    if "base" in sides:
        shapes.update(Ub=(n,), dUb=(n,), Xb=(n, n), XV=(s, s))
        init.update(Ub=ub, dUb=dub, Xb=xb, XV=xv)
    if "ambient" in sides:
        shapes.update(Ua=(big_n,), dUa=(big_n,), Xa=(big_n, big_n))
        init.update(Ua=ua, dUa=dua, Xa=xa)
    init = {k: np.broadcast_to(v, (3,) + v.shape).copy() for k, v in init.items()}

    def extra(t, st, d):
        v = d["v"]
        e, b = st["E"], st["B"]
        out = {}
        dtv = family.dt(u, t)[0]
        dudtv = family.dudt(u, t)[0]
        if "base" in sides:
            rf = kernels.tensor4_in_frame(d["geo"]["riemann"][1:2], e[1:2])[0]
            U, dU, X = st["Ub"][1], st["dUb"][1], st["Xb"][1]
            ddu = np.einsum("cadb,c,d,b->a", rf, v[1], v[1], U) + dudtv + dtv @ X
            dx = np.einsum("cdab,c,d->ab", rf, v[1], U)
            if s:
                rv = problem.bundle.curvature(d["x"][1:2])
                rvf = np.einsum("GDcd,AG,BD,ac,bd->ABab", rv[0], b[1], b[1], e[1], e[1])
                dxv = np.einsum("ABab,a,b->AB", rvf, v[1], U)
            else:
                dxv = np.zeros((0, 0))
            for name, val in (("Ub", dU), ("dUb", ddu), ("Xb", dx), ("XV", dxv)):
                out[name] = np.broadcast_to(val, (3,) + val.shape)
        if "ambient" in sides:
            k_all = d["coupling"]
            if s:
                q_all = np.concatenate([np.broadcast_to(family.dt(us, t), (3, n)),
                                        np.einsum("kgab,ka,kb->kg", d["h_frame"], v, v)], axis=1)
                hf = d["h_frame"][1]
                dhf = dh_in_frame(problem, d["x"][1:2], e[1:2], b[1:2], d["geo"]["gamma"][1:2])[0]
                dt_hf = np.einsum("cgab,c->gab", dhf, v[1])
                dt_hv = np.einsum("gab,b->ga", dt_hf, v[1]) + np.einsum("gab,b->ga", hf, dtv)
                dk = frame_coupling(dt_hv[None], n)[0]
            else:
                q_all = np.broadcast_to(family.dt(us, t), (3, n))
                dk = np.zeros((n, n))
            K = k_all[1]
            du_k = (k_all[2] - k_all[0]) / (2 * eps)
            du_q = (q_all[2] - q_all[0]) / (2 * eps)
            q = q_all[1]
            w = np.concatenate([v[1], np.zeros(s)])
            rt = kernels.tensor4_in_frame(d["geo_t"]["riemann"][1:2], st["Et"][1:2])[0]
            U, dU, X = st["Ua"][1], st["dUa"][1], st["Xa"][1]
            ddu = (-2 * K.T @ dU - dk.T @ U - (K @ K).T @ U + du_q + X.T @ q
                   + np.einsum("ABCD,A,B,C->D", rt, w, U, w))
            dx = du_k + K @ X - X @ K + np.einsum("CDAB,C,D->AB", rt, w, U)
            for name, val in (("Ua", dU), ("dUa", ddu), ("Xa", dx)):
                out[name] = np.broadcast_to(val, (3,) + val.shape)
        return out

    run = co_integrate(problem, seeded.start, velocity=lambda t: family.velocity(us, t),
                       opts=opts, extra_shapes=shapes, extra_init=init, extra_rhs=extra,
                       curvature=True)
    knots = run.knots()
    t = run.trajectory.t
    hf = h_in_frame(problem, knots["x"][:, 1], knots["E"][:, 1], knots["B"][:, 1])
    out = {}
    if "base" in sides:
        out["base"] = VariationTrajectory("base", t, knots["Ub"][:, 1], knots["dUb"][:, 1],
                                          knots["Xb"][:, 1], knots["XV"][:, 1], hf, n, s, u)
    if "ambient" in sides:
        out["ambient"] = VariationTrajectory("ambient", t, knots["Ua"][:, 1], knots["dUa"][:, 1],
                                             knots["Xa"][:, 1], None, hf, n, s, u)
    out["run"] = run
    return out


def integrate_gvariation(problem: Problem, family: CurveFamily, u: float,
                         opts: DevelopOptions | None = None,
                         eps: float = FD_STEP) -> VariationTrajectory:
    """Variation field ``U~`` and frame rotation ``X~`` of the generalized
    developments driven by the transported family, along member ``u``."""
    return integrate_variations(problem, family, u, opts, eps, ("ambient",))["ambient"]


def integrate_base_variation(problem: Problem, family: CurveFamily, u: float,
                             opts: DevelopOptions | None = None,
                             eps: float = FD_STEP) -> VariationTrajectory:
    """Variation field ``U`` and rotations ``X`` (tangent) and ``X_V`` (bundle)
    of the base developments along member ``u``."""
    return integrate_variations(problem, family, u, opts, eps, ("base",))["base"]


@dataclass(frozen=True)
class AnsatzReport:
    max_U_alpha: float
    max_U_diff: float
    max_Xab_diff: float
    max_Xalphabeta_diff: float
    max_Xaalpha_diff: float

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}

    def to_json(self, extra: dict | None = None) -> str:
        data = self.as_dict()
        if extra:
            data.update(extra)
        return dumps(data)

    def max(self) -> float:
        return max(self.as_dict().values())


def verify_ansatz(base: VariationTrajectory, ambient: VariationTrajectory,
                  h_frame: np.ndarray | None = None) -> AnsatzReport:
    """Largest deviations from ``U~_a = U_a``, ``U~_alpha = 0``, ``X~_ab = X_ab``,
    ``X~_alpha beta = X_alpha beta`` and ``X~_a alpha = h^alpha_ab U_b`` over
    the knots of ``base`` (``ambient`` is resampled when its knots differ)."""
    if base.n != ambient.n or base.s != ambient.s:
        raise GeometryError("base and ambient variations have different dimensions")
    n = base.n
    if ambient.t.shape != base.t.shape or np.any(ambient.t != base.t):
        ambient = ambient.at(base.t)
    hf = base.h_frame if h_frame is None else np.asarray(h_frame)
    xa = ambient.X
    m = lambda a: float(np.abs(a).max(initial=0.0))     # noqa: E731
    return AnsatzReport(
        max_U_alpha=m(ambient.U[:, n:]),
        max_U_diff=m(ambient.U[:, :n] - base.U),
        max_Xab_diff=m(xa[:, :n, :n] - base.X),
        max_Xalphabeta_diff=m(xa[:, n:, n:] - base.XV),
        max_Xaalpha_diff=m(xa[:, :n, n:] - np.einsum("kgab,kb->kag", hf, base.U)),
    )
