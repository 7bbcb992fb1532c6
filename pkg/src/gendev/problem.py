"""Immersion problems: base manifold, bundle, candidate h, ambient and seed.

Index conventions follow the rest of the package: tangent indices ``a, b``
run over ``0..n-1``, bundle indices over ``0..s-1`` and ambient frame rows
stack the ``n`` tangent rows on top of the ``s`` bundle rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .charts import (AmbientSpec, BundleSpec, ChartDomain, MetricField, ScalarField,
                     SecondFundamentalField, _as_field)
from .errors import GeometryError
from .expr import compile_nodes, diff
from .transport import gram_drift, orthonormalize

__all__ = ["PointSeed", "SubmanifoldSeed", "Problem", "StartData", "orthonormal_basis"]


def orthonormal_basis(g: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal frame rows w.r.t. ``g`` (``(K, n, n)``).

    The first ``r`` rows orthonormalise ``rows`` (``(K, r, n)``) by
    Gram-Schmidt; the remaining ``n - r`` complete them to a basis.
    """
    k, n, _ = g.shape
    low = np.linalg.cholesky(g)                        # g = L L^T
    if rows is None:
        rows = np.zeros((k, 0, n))
    r = rows.shape[1]
    y = np.einsum("kji,kAj->kAi", low, rows)           # y = L^T x, Euclidean inner product
    q, rr = np.linalg.qr(np.swapaxes(y, 1, 2), mode="complete")
    if r:
        signs = np.sign(np.diagonal(rr[:, :r, :r], axis1=1, axis2=2))
        if np.any(signs == 0):
            raise GeometryError("tangent vectors of the submanifold are linearly dependent")
        q[:, :, :r] *= signs[:, None, :]
    basis_y = np.swapaxes(q, 1, 2)                     # rows
    out = np.linalg.solve(np.swapaxes(low, 1, 2), np.swapaxes(basis_y, 1, 2))
    return np.swapaxes(out, 1, 2)


@dataclass(frozen=True)
class StartData:
    """Batched initial data of the co-integrated base/ambient system."""
    x: np.ndarray          # (K, n) base point
    frame: np.ndarray      # (K, n, n) base frame rows
    bundle: np.ndarray     # (K, s, s) bundle frame rows (declared-frame coefficients)
    ambient_point: np.ndarray   # (K, N)
    ambient_frame: np.ndarray   # (K, N, N)
    params: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def take(self, index) -> "StartData":
        pick = (lambda a: None if a is None else a[index])
        return StartData(*(pick(getattr(self, f)) for f in
                           ("x", "frame", "bundle", "ambient_point", "ambient_frame", "params")))


@dataclass(frozen=True)
class PointSeed:
    """``p`` in the base chart, ``ptilde`` in the ambient chart and ``phi``,
    the ``N x (n+s)`` matrix sending base chart components followed by bundle
    declared-frame components to ambient chart components."""
    p: np.ndarray
    ptilde: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("p", "ptilde", "phi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def _field_matrix(entries, rows: int, cols: int, dim: int) -> list[list[ScalarField]]:
    if len(entries) != rows or any(len(r) != cols for r in entries):
        raise GeometryError(f"expected a {rows}x{cols} matrix of fields")
    return [[_as_field(v, dim) for v in row] for row in entries]


class _VectorField:
    """Vector of scalar fields with compiled value and Jacobian evaluators."""

    def __init__(self, comps: Sequence, dim: int):
        self.fields = [_as_field(c, dim) for c in comps]
        self.dim = dim
        nodes = [f.node for f in self.fields]
        self._f = compile_nodes(nodes, dim)
        self._j = compile_nodes([diff(nd, i) for i in range(dim) for nd in nodes], dim)
        self._h = compile_nodes([diff(diff(nd, i), j) for i in range(dim) for j in range(dim)
                                 for nd in nodes], dim)

    def __len__(self) -> int:
        return len(self.fields)

    def value(self, u: np.ndarray) -> np.ndarray:
        return self._f(u)

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """``[k, i, c] = d_i x^c``."""
        return self._j(u).reshape(len(u), self.dim, len(self))

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """``[k, i, j, c] = d_i d_j x^c``."""
        return self._h(u).reshape(len(u), self.dim, self.dim, len(self))


class SubmanifoldSeed:
    """Seed submanifold ``S`` (parameters ``u_1..u_r``) with its image ``S~``.

    ``embed`` gives the ``n`` base chart coordinates of ``S``, ``ambient_embed``
    the ``N`` ambient chart coordinates of ``S~`` (this realises the isometry
    ``S -> S~``).  ``psi`` is an ``N x (n+s)`` matrix field; only its action on
    the normal space of ``S`` and on the bundle is used, the tangent part is
    replaced by the pushforward.  ``sigma`` optionally overrides the second
    fundamental form of ``S``: a callable ``u (K, r) -> (K, r, r, n)`` giving
    ``sigma(d_i, d_j)`` in base chart components.
    """

    def __init__(self, r: int, embed: Sequence, ambient_embed: Sequence, psi,
                 sigma: Callable | None = None, domain: ChartDomain | None = None,
                 samples=None):
        if r < 1:
            raise GeometryError("submanifold dimension must be positive")
        self.r = r
        self.embed = _VectorField(embed, r)
        self.ambient_embed = _VectorField(ambient_embed, r)
        self.n = len(self.embed)
        self.big_n = len(self.ambient_embed)
        psi = list(psi)
        cols = len(psi[0]) if psi else 0
        self.psi_fields = _field_matrix(psi, self.big_n, cols, r)
        self._psi = compile_nodes([f.node for row in self.psi_fields for f in row], r)
        self._psi_cols = cols
        self.sigma_override = sigma
        self.domain = domain
        self.samples = None if samples is None else np.atleast_2d(np.asarray(samples, dtype=float))

    def point(self, u) -> np.ndarray:
        return self.embed.value(np.atleast_2d(u))

    def ambient_point(self, u) -> np.ndarray:
        return self.ambient_embed.value(np.atleast_2d(u))

    def psi(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        return self._psi(u).reshape(len(u), self.big_n, self._psi_cols)

    # -- frames -----------------------------------------------------------------------

    def base_frames(self, problem: "Problem", u) -> tuple[np.ndarray, np.ndarray]:
        """Adapted orthonormal base frame rows and the coefficient matrix ``C``
        with ``e_i = C_ij d_j x`` for the tangent rows."""
        u = np.atleast_2d(u)
        x = self.point(u)
        jac = self.embed.jacobian(u)                    # (K, r, n)
        g = problem.base.matrix(x)
        e = orthonormal_basis(g, jac)
        gram = np.einsum("kic,kcd,kjd->kij", jac, g, jac)
        low = np.linalg.cholesky(gram)
        coeff = np.linalg.inv(low)                      # e_i = coeff @ jac
        return e, coeff

    def ambient_frame(self, problem: "Problem", u, frame: np.ndarray,
                      bundle_frame: np.ndarray) -> np.ndarray:
        """Image under ``psi~`` of base frame rows and bundle frame rows at ``S(u)``:
        the tangent part of each base row is pushed forward to ``S~``, the
        normal part and the bundle rows are mapped by ``psi``."""
        u = np.atleast_2d(u)
        n = problem.n
        x = self.point(u)
        jac, jact = self.embed.jacobian(u), self.ambient_embed.jacobian(u)
        g = problem.base.matrix(x)
        gram = np.einsum("kic,kcd,kjd->kij", jac, g, jac)
        coef = np.linalg.solve(gram, np.einsum("kic,kcd,kAd->kiA", jac, g, frame))
        tangent = np.einsum("kiA,kic->kAc", coef, jac)
        psi = self.psi(u)
        out = np.einsum("kiA,kiC->kAC", coef, jact)
        out = out + np.einsum("kCc,kAc->kAC", psi[:, :, :n], frame - tangent)
        if problem.s:
            out = np.concatenate([out, np.einsum("kCg,kAg->kAC", psi[:, :, n:], bundle_frame)],
                                 axis=1)
        return out

    def frames(self, problem: "Problem", u) -> StartData:
        u = np.atleast_2d(u)
        x = self.point(u)
        e, _ = self.base_frames(problem, u)
        b = problem.bundle_frame(x)
        return StartData(x, e, b, self.ambient_point(u), self.ambient_frame(problem, u, e, b), u)

    # -- second fundamental forms -----------------------------------------------------

    def sigma(self, problem: "Problem", u) -> np.ndarray:
        """``sigma(d_i, d_j)`` in base chart components, ``(K, r, r, n)``."""
        u = np.atleast_2d(u)
        if self.sigma_override is not None:
            return np.asarray(self.sigma_override(u), dtype=float)
        return _normal_part(problem.base, self.point(u), self.embed.jacobian(u),
                            self.embed.hessian(u))

    def sigma_tilde(self, problem: "Problem", u) -> np.ndarray:
        u = np.atleast_2d(u)
        return _normal_part(problem.ambient, self.ambient_point(u),
                            self.ambient_embed.jacobian(u), self.ambient_embed.hessian(u))

    def sigma_frame(self, problem: "Problem", u) -> np.ndarray:
        """``sigma^mu_ij = <sigma(e_i, e_j), e_mu>`` in the adapted frame, ``(K, r, r, n-r)``."""
        u = np.atleast_2d(u)
        e, coeff = self.base_frames(problem, u)
        g = problem.base.matrix(self.point(u))
        sig = self.sigma(problem, u)
        sig_e = np.einsum("kip,kjq,kpqc->kijc", coeff, coeff, sig)
        return np.einsum("kijc,kcd,kmd->kijm", sig_e, g, e[:, self.r:])

    # -- validation -------------------------------------------------------------------

    def defects(self, problem: "Problem", u) -> dict[str, float]:
        u = np.atleast_2d(u)
        r, n = self.r, problem.n
        start = self.frames(problem, u)
        gt = problem.ambient.matrix(start.ambient_point)
        metric = float(gram_drift(start.ambient_frame, gt).max())
        # isometry of S -> S~
        jac, jact = self.embed.jacobian(u), self.ambient_embed.jacobian(u)
        g = problem.base.matrix(start.x)
        iso = np.abs(np.einsum("kic,kcd,kjd->kij", jac, g, jac)
                     - np.einsum("kic,kcd,kjd->kij", jact, gt, jact)).max()
        # psi^* sigma~ = sigma + h|_S, tested on the adapted tangent frame
        _, coeff = self.base_frames(problem, u)
        st = np.einsum("kip,kjq,kpqC->kijC", coeff, coeff, self.sigma_tilde(problem, u))
        sig = np.einsum("kip,kjq,kpqc->kijc", coeff, coeff, self.sigma(problem, u))
        e_t = start.frame[:, :r]
        hv = np.einsum("kgcd,kic,kjd->kijg", problem.h.values(start.x), e_t, e_t)
        psi = self.psi(u)
        rhs = np.einsum("kCc,kijc->kijC", psi[:, :, :n], sig)
        if problem.s:
            rhs = rhs + np.einsum("kCg,kijg->kijC", psi[:, :, n:], hv)
        compat = float(np.abs(st - rhs).max())
        return {"metric": metric, "isometry": float(iso), "compatibility": compat}

    def validate(self, problem: "Problem", u=None, metric_tol: float = 1e-10,
                 compat_tol: float = 1e-8) -> None:
        if u is None:
            u = self.samples
        if u is None:
            return
        d = self.defects(problem, u)
        if d["metric"] > metric_tol or d["isometry"] > metric_tol:
            raise GeometryError(f"submanifold seed is not metric preserving: {d}")
        if d["compatibility"] > compat_tol:
            raise GeometryError(f"second fundamental forms are incompatible: {d}")


def _normal_part(metric: MetricField, x: np.ndarray, jac: np.ndarray, hess: np.ndarray) -> np.ndarray:
    geo = metric.geometry(x)
    acc = hess + np.einsum("kcpq,kip,kjq->kijc", geo["gamma"], jac, jac)
    g = geo["g"]
    gram = np.einsum("kic,kcd,kjd->kij", jac, g, jac)
    coef = np.linalg.solve(gram[:, None, None], np.einsum("kijc,kcd,kld->kijl", acc, g, jac)[..., None])[..., 0]
    return acc - np.einsum("kijl,klc->kijc", coef, jac)


@dataclass(frozen=True)
class Problem:
    base: MetricField
    bundle: BundleSpec
    h: SecondFundamentalField
    ambient: AmbientSpec | MetricField
    seed: PointSeed | SubmanifoldSeed
    name: str = ""
    seed_tol: float = 1e-12
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n, s = self.base.dim, self.bundle.rank
        if self.bundle.base_dim != n:
            raise GeometryError("bundle base dimension does not match the base metric")
        if self.h.base_dim != n or self.h.rank != s:
            raise GeometryError("second fundamental form has inconsistent dimensions")
        if self.ambient.dim != n + s:
            raise GeometryError(f"ambient dimension {self.ambient.dim} differs from n + s = {n + s}")
        seed = self.seed
        if isinstance(seed, PointSeed):
            if seed.p.shape != (n,) or seed.ptilde.shape != (n + s,):
                raise GeometryError("seed points have the wrong number of coordinates")
            if seed.phi.shape != (n + s, n + s):
                raise GeometryError(f"phi must have {(n + s) ** 2} entries "
                                    f"({n + s}x{n + s}); got shape {seed.phi.shape}")
            block = np.zeros((n + s, n + s))
            block[:n, :n] = self.base.matrix(seed.p)
            if s:
                block[n:, n:] = self.bundle.metric(seed.p)
            pull = seed.phi.T @ self.ambient.matrix(seed.ptilde) @ seed.phi
            defect = float(np.abs(pull - block).max())
            if defect > self.seed_tol * max(1.0, float(np.abs(block).max())):
                raise GeometryError(f"phi is not an isometry at the seed (defect {defect:.3e})")
        else:
            if seed.n != n or seed.big_n != n + s:
                raise GeometryError("submanifold embeddings have inconsistent dimensions")
            seed.validate(self)

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def s(self) -> int:
        return self.bundle.rank

    @property
    def big_n(self) -> int:
        return self.ambient.dim

    def with_h(self, h: SecondFundamentalField) -> "Problem":
        return replace(self, h=h)

    def scaled_h(self, factor: float) -> "Problem":
        return replace(self, h=self.h.scaled(factor), name=f"{self.name}*{factor:g}")

    def base_frame(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return orthonormal_basis(self.base.matrix(x))

    def bundle_frame(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if not self.s:
            return np.zeros((len(x), 0, 0))
        frak = self.bundle.metric(x)
        return orthonormalize(np.broadcast_to(np.eye(self.s), frak.shape).copy(), frak)

    def start(self, count: int = 1, params=None) -> StartData:
        """Initial data for ``count`` curves (point seed) or at S-parameters."""
        seed = self.seed
        if isinstance(seed, SubmanifoldSeed):
            if params is None:
                raise GeometryError("a submanifold seed needs start parameters")
            return seed.frames(self, params)
        n = self.n
        x = np.broadcast_to(seed.p, (count, n)).copy()
        e = self.base_frame(seed.p)
        b = self.bundle_frame(seed.p)
        et = np.zeros((1, self.big_n, self.big_n))
        et[:, :n] = e @ seed.phi[:, :n].T
        if self.s:
            et[:, n:] = b @ seed.phi[:, n:].T
        rep = (lambda a: np.broadcast_to(a, (count,) + a.shape[1:]).copy())
        return StartData(x, rep(e), rep(b), np.broadcast_to(seed.ptilde, (count, self.big_n)).copy(),
                         rep(et))
