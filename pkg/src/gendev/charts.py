"""Single-chart manifolds, bundles and their curvature.

All index arguments in this module are 0-based.  Points are arrays whose last
axis is the chart dimension; any leading axes are treated as a batch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr, kernels
from .errors import GeometryError, SingularMetricError
from .expr import EvaluationError, Node

__all__ = [
    "ChartDomain", "ScalarField", "parse_scalar_field", "MetricField",
    "AmbientSpec", "BundleSpec", "SecondFundamentalField", "CurvatureValue",
    "christoffel", "riemann_curvature", "bundle_curvature",
]


@dataclass(frozen=True)
class ChartDomain:
    """Axis-aligned box of admissible chart coordinates."""
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise GeometryError("domain bounds have different lengths")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise GeometryError("domain lower bound must be below upper bound")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.05) -> np.ndarray:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(count, self.dim))


class ScalarField:
    """A function of chart coordinates given by an expression tree."""

    def __init__(self, node: Node, dim: int, source: str | None = None):
        if dim < 1:
            raise GeometryError("dimension must be positive")
        self.node = node
        self.dim = dim
        self.source = source if source is not None else expr.to_text(node)
        self._fn = None

    @classmethod
    def constant(cls, value: float, dim: int) -> "ScalarField":
        return cls(expr.Const(float(value)), dim)

    def __call__(self, x):
        if self._fn is None:
            self._fn = expr.compile_nodes([self.node], self.dim)
        x = np.asarray(x, dtype=float)
        out = self._fn(x)[..., 0]
        return float(out) if out.ndim == 0 else out

    def diff(self, index: int) -> "ScalarField":
        """Symbolic partial derivative in coordinate ``index`` (0-based)."""
        if not 0 <= index < self.dim:
            raise IndexError(f"coordinate index {index} out of range")
        return ScalarField(expr.diff(self.node, index), self.dim)

    @property
    def is_zero(self) -> bool:
        return isinstance(self.node, expr.Const) and self.node.value == 0.0

    def __repr__(self) -> str:
        return f"ScalarField({self.source!r}, dim={self.dim})"


def parse_scalar_field(src: str | bytes, dim: int,
                       aliases: dict[str, int] | None = None) -> ScalarField:
    if isinstance(src, bytes):
        src = src.decode("utf-8")
    return ScalarField(expr.parse(src, dim, aliases), dim, source=src.strip())


def _as_field(value, dim: int) -> ScalarField:
    if isinstance(value, ScalarField):
        if value.dim != dim:
            raise GeometryError(f"field has dimension {value.dim}, expected {dim}")
        return value
    if isinstance(value, (int, float)):
        return ScalarField.constant(value, dim)
    if isinstance(value, str):
        return parse_scalar_field(value, dim)
    raise TypeError(f"cannot interpret {value!r} as a scalar field")


class _Block:
    """A list of expression nodes with lazily compiled value and derivative
    evaluators over the same chart."""

    def __init__(self, nodes: Sequence[Node], dim: int):
        self.nodes = list(nodes)
        self.dim = dim
        self._cache: dict[int, object] = {}
        self._derived: dict[int, list[Node]] = {0: self.nodes}

    def _nodes(self, order: int) -> list[Node]:
        if order not in self._derived:
            prev = self._nodes(order - 1)
            self._derived[order] = [expr.diff(node, c) for c in range(self.dim) for node in prev]
        return self._derived[order]

    def is_constant(self) -> bool:
        return all(isinstance(node, expr.Const) for node in self.nodes)

    def __call__(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """Values with ``order`` leading derivative axes: ``(K, dim, ..., dim, m)``."""
        x = np.asarray(x, dtype=float)
        k = x.shape[0]
        m = len(self.nodes)
        if order and self.is_constant():
            return np.zeros((k,) + (self.dim,) * order + (m,))
        if order not in self._cache:
            self._cache[order] = expr.compile_nodes(self._nodes(order), self.dim)
        out = self._cache[order](x)
        return out.reshape((k,) + (self.dim,) * order + (m,))


def _batch(x, dim: int) -> tuple[np.ndarray, tuple[int, ...]]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise GeometryError(f"point has {x.shape[-1]} coordinates, expected {dim}")
    lead = x.shape[:-1]
    return x.reshape(-1, dim), lead


def _sym_pairs(n: int) -> tuple[list[tuple[int, int]], np.ndarray]:
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    index = np.empty((n, n), dtype=int)
    for k, (a, b) in enumerate(pairs):
        index[a, b] = index[b, a] = k
    return pairs, index


def _symmetric_components(components: Mapping, n: int, dim: int, what: str,
                          default_diag: float | None = None) -> list[ScalarField]:
    pairs, _ = _sym_pairs(n)
    table: dict[tuple[int, int], ScalarField] = {}
    for key, value in components.items():
        a, b = key
        if not (0 <= a < n and 0 <= b < n):
            raise GeometryError(f"{what} index {key} out of range for size {n}")
        k = (min(a, b), max(a, b))
        if k in table:
            raise GeometryError(f"{what} component {k} given twice")
        table[k] = _as_field(value, dim)
    out = []
    for a, b in pairs:
        if (a, b) in table:
            out.append(table[(a, b)])
        elif a != b:
            out.append(ScalarField.constant(0.0, dim))
        elif default_diag is not None:
            out.append(ScalarField.constant(default_diag, dim))
        else:
            raise GeometryError(f"{what} diagonal component ({a}, {a}) is missing")
    return out


class MetricField:
    """Riemannian metric ``g_ab`` on a single chart.

    ``components`` maps index pairs (0-based, either order) to scalar fields,
    expression strings or numbers.  Off-diagonal entries default to zero.
    """

    def __init__(self, dim: int, components: Mapping, domain: ChartDomain | None = None):
        if dim < 1:
            raise GeometryError("metric dimension must be positive")
        if domain is not None and domain.dim != dim:
            raise GeometryError("domain dimension does not match the metric")
        self.dim = dim
        self.domain = domain
        self.components = _symmetric_components(components, dim, dim, "metric")
        self._pairs, self._index = _sym_pairs(dim)
        self._block = _Block([f.node for f in self.components], dim)

    @classmethod
    def euclidean(cls, dim: int, scale: float = 1.0, domain=None) -> "MetricField":
        return cls(dim, {(a, a): scale for a in range(dim)}, domain)

    @property
    def is_flat_constant(self) -> bool:
        return self._block.is_constant()

    def _full(self, vals: np.ndarray) -> np.ndarray:
        return vals[..., self._index]

    def _check_pd(self, g: np.ndarray, x: np.ndarray) -> None:
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            w = np.linalg.eigvalsh(g)
            bad = int(np.argmax(w[..., 0] <= 0)) if w.ndim > 1 else 0
            point = x[bad] if x.ndim > 1 else x
            raise SingularMetricError(
                f"metric is not positive definite at {np.asarray(point).tolist()}",
                point) from None

    def matrix(self, x) -> np.ndarray:
        xb, lead = _batch(x, self.dim)
        g = self._full(self._block(xb))
        self._check_pd(g, xb)
        return g.reshape(lead + (self.dim, self.dim))

    def inverse(self, x) -> np.ndarray:
        return np.linalg.inv(self.matrix(x))

    def derivatives(self, x, order: int) -> np.ndarray:
        """``order`` = 1: ``[..., c, a, b] = d_c g_ab``; 2: ``[..., e, c, a, b]``."""
        xb, lead = _batch(x, self.dim)
        vals = self._full(self._block(xb, order))
        return vals.reshape(lead + (self.dim,) * (order + 2))

    def geometry(self, xb: np.ndarray, curvature: bool = False) -> dict[str, np.ndarray]:
        """Batched evaluation at ``xb`` of shape ``(K, dim)``.

        Returns ``g``, ``ginv``, ``gamma`` and, when requested, ``riemann``
        (fully lowered).  The metric is checked for positive definiteness.
        """
        n = self.dim
        k = xb.shape[0]
        g = self._full(self._block(xb))
        self._check_pd(g, xb)
        ginv = np.linalg.inv(g)
        out = {"g": g, "ginv": ginv}
        if self.is_flat_constant:
            out["gamma"] = np.zeros((k, n, n, n))
            if curvature:
                out["riemann"] = np.zeros((k, n, n, n, n))
            return out
        dg = self._full(self._block(xb, 1))
        gam = kernels.christoffel(ginv, dg)
        out["gamma"] = gam
        if curvature:
            d2g = self._full(self._block(xb, 2))
            dgam = kernels.christoffel_derivative(ginv, dg, d2g)
            out["riemann"] = kernels.riemann_lower(g, gam, dgam)
        return out

    def christoffel(self, x) -> np.ndarray:
        """``[..., c, a, b] = Gamma^c_ab``."""
        xb, lead = _batch(x, self.dim)
        return self.geometry(xb)["gamma"].reshape(lead + (self.dim,) * 3)

    def curvature(self, x) -> np.ndarray:
        """Fully lowered ``R_abcd = <R(d_a, d_b) d_c, d_d>``."""
        xb, lead = _batch(x, self.dim)
        return self.geometry(xb, curvature=True)["riemann"].reshape(lead + (self.dim,) * 4)

    def check_domain(self, x) -> np.ndarray:
        if self.domain is None:
            return np.ones(np.shape(x)[:-1], dtype=bool)
        return self.domain.contains(x)

    def __repr__(self) -> str:
        comps = {p: f.source for p, f in zip(self._pairs, self.components)}
        return f"{type(self).__name__}(dim={self.dim}, {comps})"


class AmbientSpec(MetricField):
    """Metric of the target manifold (dimension ``n + s``)."""


class BundleSpec:
    """Riemannian vector bundle over a chart, in a declared local frame.

    ``metric`` maps ``(alpha, beta)`` to the fiber metric; it defaults to the
    identity when empty.  ``connection`` maps ``(a, alpha, beta)`` to
    ``omega^beta_{a alpha}``, i.e. ``D_{d_a} e_alpha = omega^beta_{a alpha} e_beta``;
    missing entries are zero.
    """

    def __init__(self, rank: int, base_dim: int, metric: Mapping | None = None,
                 connection: Mapping | None = None, sample_points=None,
                 tol: float = 1e-10):
        if rank < 0:
            raise GeometryError("bundle rank must be non-negative")
        self.rank = rank
        self.base_dim = base_dim
        metric = metric or {}
        self.metric_components = _symmetric_components(
            metric, rank, base_dim, "bundle metric",
            default_diag=1.0 if not metric else None)
        self._pairs, self._index = _sym_pairs(rank)
        table: dict[tuple[int, int, int], ScalarField] = {}
        for key, value in (connection or {}).items():
            a, al, be = key
            if not (0 <= a < base_dim and 0 <= al < rank and 0 <= be < rank):
                raise GeometryError(f"connection index {key} out of range")
            if key in table:
                raise GeometryError(f"connection component {key} given twice")
            table[key] = _as_field(value, base_dim)
        zero = ScalarField.constant(0.0, base_dim)
        # stored as omega[a][beta][alpha] so that Omega_a acts on coefficient vectors
        self.connection_components = [
            [[table.get((a, al, be), zero) for al in range(rank)] for be in range(rank)]
            for a in range(base_dim)]
        self._mblock = _Block([f.node for f in self.metric_components], base_dim)
        self._cblock = _Block([f.node for row in self.connection_components
                               for col in row for f in col], base_dim)
        if sample_points is not None:
            self.check_compatibility(sample_points, tol)

    @classmethod
    def trivial(cls, rank: int, base_dim: int) -> "BundleSpec":
        return cls(rank, base_dim)

    @property
    def is_flat_trivial(self) -> bool:
        return self._mblock.is_constant() and all(
            f.is_zero for row in self.connection_components for col in row for f in col)

    def metric(self, x) -> np.ndarray:
        xb, lead = _batch(x, self.base_dim)
        h = self._mblock(xb)[..., self._index] if self.rank else np.zeros((len(xb), 0, 0))
        if self.rank:
            try:
                np.linalg.cholesky(h)
            except np.linalg.LinAlgError:
                raise SingularMetricError("bundle metric is not positive definite") from None
        return h.reshape(lead + (self.rank, self.rank))

    def metric_derivative(self, x) -> np.ndarray:
        """``[..., a, alpha, beta] = d_a frak_alpha,beta``."""
        xb, lead = _batch(x, self.base_dim)
        s = self.rank
        if not s:
            return np.zeros(lead + (self.base_dim, 0, 0))
        return self._mblock(xb, 1)[..., self._index].reshape(lead + (self.base_dim, s, s))

    def connection(self, x) -> np.ndarray:
        """``Omega[..., a, beta, alpha] = omega^beta_{a alpha}``."""
        xb, lead = _batch(x, self.base_dim)
        n, s = self.base_dim, self.rank
        if not s:
            return np.zeros(lead + (n, 0, 0))
        return self._cblock(xb).reshape(lead + (n, s, s))

    def connection_derivative(self, x) -> np.ndarray:
        """``[..., c, a, beta, alpha] = d_c omega^beta_{a alpha}``."""
        xb, lead = _batch(x, self.base_dim)
        n, s = self.base_dim, self.rank
        if not s:
            return np.zeros(lead + (n, n, 0, 0))
        return self._cblock(xb, 1).reshape(lead + (n, n, s, s))

    def curvature(self, x) -> np.ndarray:
        """``[..., alpha, beta, a, b] = <R^V(d_a, d_b) e_alpha, e_beta>``,
        antisymmetrized in ``(alpha, beta)`` (a no-op for compatible connections)."""
        xb, lead = _batch(x, self.base_dim)
        n, s = self.base_dim, self.rank
        if not s:
            return np.zeros(lead + (0, 0, n, n))
        om = self.connection(xb)
        dom = self.connection_derivative(xb)
        f = (np.einsum("kabgd->kabgd", dom) - np.swapaxes(dom, 1, 2)
             + np.einsum("kagp,kbpd->kabgd", om, om)
             - np.einsum("kbgp,kapd->kabgd", om, om))
        frak = self.metric(xb)
        rv = np.einsum("kabgl,kgm->klmab", f, frak)
        rv = 0.5 * (rv - np.swapaxes(rv, 1, 2))
        return rv.reshape(lead + (s, s, n, n))

    def compatibility_defect(self, x) -> np.ndarray:
        """``max |d_a frak - (Omega_a^T frak + frak Omega_a)|`` per point."""
        xb, lead = _batch(x, self.base_dim)
        if not self.rank:
            return np.zeros(lead)
        frak = self.metric(xb)
        dfrak = self.metric_derivative(xb)
        om = self.connection(xb)
        rhs = np.einsum("kagb,kgd->kabd", om, frak) + np.einsum("kbg,kagd->kabd", frak, om)
        # rhs[k, a, alpha, beta] = frak_{gamma beta} om^gamma_{a alpha} + frak_{alpha gamma} om^gamma_{a beta}
        defect = np.abs(dfrak - rhs).reshape(len(xb), -1).max(axis=1)
        return defect.reshape(lead)

    def check_compatibility(self, points, tol: float = 1e-10) -> None:
        defect = self.compatibility_defect(np.atleast_2d(points))
        if np.any(defect > tol):
            raise GeometryError(
                f"bundle connection is not compatible with its metric "
                f"(defect {float(defect.max()):.3e} > {tol:g})")


class SecondFundamentalField:
    """Candidate second fundamental form ``h^alpha_{ab}`` (symmetric in a, b).

    ``components`` maps ``(alpha, a, b)`` to fields; missing entries are zero.
    """

    def __init__(self, base_dim: int, rank: int, components: Mapping | None = None):
        self.base_dim = base_dim
        self.rank = rank
        table: dict[tuple[int, int, int], ScalarField] = {}
        for key, value in (components or {}).items():
            al, a, b = key
            if not (0 <= al < rank and 0 <= a < base_dim and 0 <= b < base_dim):
                raise GeometryError(f"second fundamental form index {key} out of range")
            k = (al, min(a, b), max(a, b))
            if k in table:
                raise GeometryError(f"second fundamental form component {k} given twice")
            table[k] = _as_field(value, base_dim)
        zero = ScalarField.constant(0.0, base_dim)
        self._pairs, self._index = _sym_pairs(base_dim)
        self.components = [[table.get((al, a, b), zero) for (a, b) in self._pairs]
                           for al in range(rank)]
        self._block = _Block([f.node for row in self.components for f in row], base_dim)

    @classmethod
    def zero(cls, base_dim: int, rank: int) -> "SecondFundamentalField":
        return cls(base_dim, rank)

    def scaled(self, factor: float) -> "SecondFundamentalField":
        comps = {}
        for al in range(self.rank):
            for (a, b), f in zip(self._pairs, self.components[al]):
                if not f.is_zero:
                    comps[(al, a, b)] = ScalarField(expr.mul(expr.Const(float(factor)), f.node),
                                                    self.base_dim)
        return SecondFundamentalField(self.base_dim, self.rank, comps)

    def values(self, x) -> np.ndarray:
        """``[..., alpha, a, b]``."""
        xb, lead = _batch(x, self.base_dim)
        n, s = self.base_dim, self.rank
        if not s:
            return np.zeros(lead + (0, n, n))
        m = len(self._pairs)
        vals = self._block(xb).reshape(len(xb), s, m)[..., self._index]
        return vals.reshape(lead + (s, n, n))

    def derivatives(self, x) -> np.ndarray:
        """``[..., c, alpha, a, b] = d_c h^alpha_ab``."""
        xb, lead = _batch(x, self.base_dim)
        n, s = self.base_dim, self.rank
        if not s:
            return np.zeros(lead + (n, 0, n, n))
        m = len(self._pairs)
        vals = self._block(xb, 1).reshape(len(xb), n, s, m)[..., self._index]
        return vals.reshape(lead + (n, s, n, n))


@dataclass(frozen=True)
class CurvatureValue:
    """Fully lowered curvature components at a point.

    ``kind`` is ``"riemann"`` for ``R_abcd`` or ``"bundle"`` for
    ``R^V_{alpha beta a b}``.
    """
    components: np.ndarray
    kind: str = "riemann"

    def defects(self) -> dict[str, float]:
        r = self.components
        scale = max(float(np.abs(r).max(initial=0.0)), 1e-300)
        out = {
            "antisym_first": float(np.abs(r + np.swapaxes(r, -4, -3)).max(initial=0.0)) / scale,
            "antisym_last": float(np.abs(r + np.swapaxes(r, -2, -1)).max(initial=0.0)) / scale,
        }
        if self.kind == "riemann":
            pair = np.moveaxis(r, (-4, -3), (-2, -1))
            out["pair"] = float(np.abs(r - pair).max(initial=0.0)) / scale
            # R_abcd + R_bcad + R_cabd
            b1 = r + np.einsum("...bcad->...abcd", r) + np.einsum("...cabd->...abcd", r)
            out["bianchi"] = float(np.abs(b1).max(initial=0.0)) / scale
        return out

    def check(self, tol: float = 1e-9) -> None:
        bad = {k: v for k, v in self.defects().items() if v > tol}
        if bad:
            raise GeometryError(f"curvature symmetry defects exceed {tol:g}: {bad}")


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Christoffel symbols ``[..., c, a, b] = Gamma^c_ab`` at ``x``."""
    return metric.christoffel(x)


def riemann_curvature(metric: MetricField, x) -> CurvatureValue:
    return CurvatureValue(metric.curvature(x), "riemann")


def bundle_curvature(bundle: BundleSpec, x) -> CurvatureValue:
    return CurvatureValue(bundle.curvature(x), "bundle")


# re-exported for callers that only import charts
EvaluationError = EvaluationError
