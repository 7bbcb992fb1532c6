"""The transported isometry and the Gauss, Codazzi and Ricci residuals.

Residuals are evaluated in orthonormal frames: a tangent frame ``E`` of the
base, a bundle frame ``B`` (rows of declared-frame coefficients) and their
images ``Et`` in the ambient.  All functions are batched over a leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .charts import BundleSpec, MetricField, SecondFundamentalField
from .curves import Curve
from .export import dumps
from .errors import GeometryError
from .odeint import OdeOptions
from .transport import DevelopmentResult, transport_frames

__all__ = [
    "weingarten", "h_in_frame", "covariant_dh", "dh_in_frame", "TauMap",
    "tau_from_frames", "tau_gamma", "residuals", "gauss_residual",
    "codazzi_residual", "ricci_residual", "ResidualReport", "random_reframing",
]


def weingarten(h: SecondFundamentalField, metric: MetricField, bundle: BundleSpec,
               xi, x) -> np.ndarray:
    """Matrix of ``A_xi`` on ``T_xM``: ``(A_xi)^c_a = g^{cb} h^alpha_ab frak_{alpha beta} xi^beta``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    ginv = metric.inverse(x)
    lowered = np.einsum("...gab,...gd,...d->...ab", h.values(x), bundle.metric(x), xi)
    return np.einsum("...cb,...ab->...ca", ginv, lowered)


def h_in_frame(problem, x: np.ndarray, frame: np.ndarray, bundle_frame: np.ndarray,
               hvals: np.ndarray | None = None) -> np.ndarray:
    """``[k, alpha, a, b] = <h(E_a, E_b), B_alpha>``."""
    if hvals is None:
        hvals = problem.h.values(x)
    frak = problem.bundle.metric(x)
    lowered = np.einsum("kgcd,kgl,kAl->kAcd", hvals, frak, bundle_frame)
    return np.einsum("kAcd,kac,kbd->kAab", lowered, frame, frame)


def covariant_dh(problem, x: np.ndarray, gamma: np.ndarray | None = None) -> np.ndarray:
    """Coordinate components ``[k, c, alpha, a, b] = (D_c h)^alpha_ab``.

    Levi-Civita on both tangent slots, the bundle connection on the value.
    """
    h = problem.h.values(x)
    dh = problem.h.derivatives(x)
    if gamma is None:
        gamma = problem.base.geometry(x)["gamma"]
    om = problem.bundle.connection(x)          # om[k, c, alpha, beta] = omega^alpha_{c beta}
    return (dh + np.einsum("kcAB,kBab->kcAab", om, h)
            - np.einsum("kdca,kAdb->kcAab", gamma, h)
            - np.einsum("kdcb,kAad->kcAab", gamma, h))


def dh_in_frame(problem, x, frame, bundle_frame, gamma=None) -> np.ndarray:
    """``[k, c, alpha, a, b] = <(D_{E_c} h)(E_a, E_b), B_alpha>``."""
    cov = covariant_dh(problem, x, gamma)
    frak = problem.bundle.metric(x)
    lowered = np.einsum("kcGpq,kGl,kAl->kcApq", cov, frak, bundle_frame)
    return np.einsum("kcApq,kCc,kap,kbq->kCAab", lowered, frame, frame, frame)


@dataclass(frozen=True)
class TauMap:
    """``tau`` as a matrix from base chart components followed by bundle
    declared-frame components to ambient chart components at ``target``.

    The frames it was built from are kept: ``tau`` sends tangent frame row
    ``a`` to ambient frame row ``a`` and bundle row ``alpha`` to row ``n + alpha``.
    """
    base_point: np.ndarray
    target: np.ndarray
    matrix: np.ndarray
    frame: np.ndarray
    bundle_frame: np.ndarray
    ambient_frame: np.ndarray

    def frame_matrix(self, problem) -> np.ndarray:
        """``tau`` in the orthonormal frames on both sides (orthogonal)."""
        cols = _block_columns(self.frame[None], self.bundle_frame[None])[0]
        return self.ambient_frame @ problem.ambient.matrix(self.target) @ self.matrix @ cols

    def gram_defect(self, problem) -> float:
        return float(tau_gram_defect(problem, self.base_point[None], self.target[None],
                                     self.matrix[None])[0])


def _block_columns(frame: np.ndarray, bundle_frame: np.ndarray) -> np.ndarray:
    k, n, _ = frame.shape
    s = bundle_frame.shape[1]
    out = np.zeros((k, n + s, n + s))
    out[:, :n, :n] = np.swapaxes(frame, 1, 2)
    out[:, n:, n:] = np.swapaxes(bundle_frame, 1, 2)
    return out


def tau_from_frames(frame, bundle_frame, ambient_frame) -> np.ndarray:
    """``tau`` with ``tau(E_a) = Et_a`` and ``tau(B_alpha) = Et_{n+alpha}``."""
    cols = _block_columns(frame, bundle_frame)
    return np.linalg.solve(np.swapaxes(cols, 1, 2), ambient_frame).swapaxes(1, 2)


def tau_gram_defect(problem, x, xt, tau) -> np.ndarray:
    n, s = problem.n, problem.s
    block = np.zeros((len(x), n + s, n + s))
    block[:, :n, :n] = problem.base.matrix(x)
    if s:
        block[:, n:, n:] = problem.bundle.metric(x)
    pull = np.einsum("kAi,kAB,kBj->kij", tau, problem.ambient.matrix(xt), tau)
    return np.abs(pull - block).reshape(len(x), -1).max(axis=1)


def tau_gamma(problem, curve: Curve, dev: DevelopmentResult, start=None,
              opts: OdeOptions | None = None) -> TauMap:
    """``D_0^1 o phi o P_1^0`` for one curve, composed from separately computed
    transports: base and bundle frames are carried along ``curve`` and ``dev``
    supplies the ambient frame at ``t = 1``."""
    if start is None:
        start = problem.start(1)
    e0, b0 = start.frame[:1], start.bundle[:1]
    traj, packer = transport_frames(problem.base, curve, e0, 0.0, 1.0, opts,
                                    problem.bundle, b0)
    st = packer.unpack(traj.final)
    e1, b1 = st["e"], st["c"]
    et1 = np.asarray(dev.final_frame).reshape(1, problem.big_n, problem.big_n)
    tau = tau_from_frames(e1, b1, et1)
    x1 = np.asarray(curve.position(1.0), dtype=float).reshape(1, -1)
    return TauMap(x1[0], np.asarray(dev.endpoint).reshape(-1), tau[0], e1[0], b1[0], et1[0])


def random_reframing(rng: np.random.Generator, count: int, n: int, s: int) -> np.ndarray:
    """Random block-diagonal orthogonal matrices (tangent block, bundle block)."""
    out = np.zeros((count, n + s, n + s))
    for size, sl in ((n, slice(0, n)), (s, slice(n, n + s))):
        if size:
            q, r = np.linalg.qr(rng.standard_normal((count, size, size)))
            q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
            out[:, sl, sl] = q
    return out


def residuals(problem, x, xt, frame, bundle_frame, ambient_frame,
              rotation: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Sup-norm Gauss, Codazzi and Ricci residuals per batch entry.

    ``rotation`` (block-diagonal orthogonal, ``(K, n+s, n+s)``) re-chooses the
    orthonormal frames before taking the sup-norm.
    """
    n, s = problem.n, problem.s
    x = np.atleast_2d(x)
    xt = np.atleast_2d(xt)
    if rotation is not None:
        frame = np.einsum("kab,kbc->kac", rotation[:, :n, :n], frame)
        bundle_frame = np.einsum("kab,kbc->kac", rotation[:, n:, n:], bundle_frame)
        ambient_frame = np.einsum("kAB,kBC->kAC", rotation, ambient_frame)
    geo = problem.base.geometry(x, curvature=True)
    r_base = kernels.tensor4_in_frame(geo["riemann"], frame)
    r_amb = kernels.tensor4_in_frame(problem.ambient.geometry(xt, curvature=True)["riemann"],
                                     ambient_frame)
    k = len(x)
    out = {}
    r_tan = r_amb[:, :n, :n, :n, :n]
    if s:
        hf = h_in_frame(problem, x, frame, bundle_frame)
        quad = (np.einsum("kgad,kgbc->kabcd", hf, hf) - np.einsum("kgac,kgbd->kabcd", hf, hf))
    else:
        hf = np.zeros((k, 0, n, n))
        quad = 0.0
    gauss = r_base - r_tan - quad
    out["gauss"] = np.abs(gauss).reshape(k, -1).max(axis=1, initial=0.0)
    if s:
        dhf = dh_in_frame(problem, x, frame, bundle_frame, geo["gamma"])
        lhs = np.einsum("kxgyz->kxyzg", dhf) - np.einsum("kygxz->kxyzg", dhf)
        rhs = np.einsum("kzgxy->kxyzg", r_amb[:, :n, n:, :n, :n])
        out["codazzi"] = np.abs(lhs - rhs).reshape(k, -1).max(axis=1)
        rv = problem.bundle.curvature(x)
        rvf = np.einsum("kGDcd,kAG,kBD,kac,kbd->kABab", rv, bundle_frame, bundle_frame, frame, frame)
        comm = (np.einsum("kAyc,kBxc->kABxy", hf, hf) - np.einsum("kByc,kAxc->kABxy", hf, hf))
        ricci = rvf - r_amb[:, n:, n:, :n, :n] - comm
        out["ricci"] = np.abs(ricci).reshape(k, -1).max(axis=1)
    else:
        out["codazzi"] = np.zeros(k)
        out["ricci"] = np.zeros(k)
    return out


def _tau_residual(problem, tau: TauMap, which: str) -> float:
    res = residuals(problem, tau.base_point[None], tau.target[None], tau.frame[None],
                    tau.bundle_frame[None], tau.ambient_frame[None])
    return float(res[which][0])


def gauss_residual(problem, tau: TauMap) -> float:
    return _tau_residual(problem, tau, "gauss")


def codazzi_residual(problem, tau: TauMap) -> float:
    return _tau_residual(problem, tau, "codazzi")


def ricci_residual(problem, tau: TauMap) -> float:
    return _tau_residual(problem, tau, "ricci")


@dataclass(frozen=True)
class ResidualReport:
    curve_id: str
    point: tuple[float, ...]
    gauss: float
    codazzi: float
    ricci: float

    def __post_init__(self):
        for name in ("gauss", "codazzi", "ricci"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise GeometryError(f"invalid {name} residual {value!r}")

    def as_dict(self) -> dict:
        return {"curve_id": self.curve_id, "point": [float(v) for v in self.point],
                "gauss": float(self.gauss), "codazzi": float(self.codazzi),
                "ricci": float(self.ricci)}

    def to_json(self, extra: dict | None = None) -> str:
        data = self.as_dict()
        if extra:
            data.update(extra)
        return dumps(data)
