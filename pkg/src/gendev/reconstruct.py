"""Pointwise reconstruction of an isometric immersion by generalized developments."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .charts import ChartDomain
from .curves import BezierCurve, CoordinatePolyline, Curve, LineCurve, StackedCurves
from .errors import GeometryError, NumericError
from .expr import EvaluationError
from .fundeq import ResidualReport, TauMap, residuals, tau_gram_defect
from .pipeline import CoIntegration, co_integrate
from .problem import PointSeed, Problem, StartData, SubmanifoldSeed
from .transport import DevelopOptions

__all__ = [
    "Problem", "PointSeed", "SubmanifoldSeed", "PointResult", "ImmersionSample",
    "reconstruct_point", "reconstruct_batch", "reconstruct_grid", "grid_points",
    "path_independence_audit", "AuditReport", "align_rigid", "RigidAlignment",
    "POLICIES",
]

POLICIES = ("polyline", "radial", "normal")
_FAILURES = (NumericError, GeometryError, EvaluationError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class PointResult:
    point: np.ndarray
    tau: TauMap
    report: ResidualReport
    drift: float
    tau_defect: float


@dataclass
class _Batch:
    """Per-curve outputs of one co-integration (arrays over the batch)."""
    base: np.ndarray
    ambient: np.ndarray
    tau: np.ndarray
    frame: np.ndarray
    bundle: np.ndarray
    ambient_frame: np.ndarray
    gauss: np.ndarray
    codazzi: np.ndarray
    ricci: np.ndarray
    drift: np.ndarray
    tau_defect: np.ndarray


def _evaluate(problem: Problem, run: CoIntegration, base_end: np.ndarray) -> _Batch:
    st = run.final()
    tau = run.tau()
    res = residuals(problem, base_end, st["xt"], st["E"], st["B"], st["Et"])
    return _Batch(base_end, st["xt"], tau, st["E"], st["B"], st["Et"], res["gauss"],
                  res["codazzi"], res["ricci"], run.drift,
                  tau_gram_defect(problem, base_end, st["xt"], tau))


def _run(problem: Problem, start: StartData, curve: Curve | None, velocity,
         opts: DevelopOptions) -> _Batch:
    if curve is not None:
        run = co_integrate(problem, start, curve=curve, opts=opts)
        end = np.broadcast_to(curve.position(1.0), start.x.shape).copy()
    else:
        vel = np.asarray(velocity, dtype=float)
        run = co_integrate(problem, start, velocity=lambda t: vel, opts=opts)
        end = run.final()["x"]
    return _evaluate(problem, run, end)


def reconstruct_point(problem: Problem, curve: Curve, opts: DevelopOptions | None = None,
                      start_params=None, curve_id: str = "c0") -> PointResult:
    """Develop along ``curve`` (which must start at the seed) and return the
    ambient endpoint, ``tau`` and the residual report at ``curve(1)``."""
    opts = opts or DevelopOptions()
    start = problem.start(1, start_params)
    _check_start(problem, start, curve)
    b = _run(problem, start, curve, None, opts)
    _check_drift(b, opts)
    tau = TauMap(b.base[0], b.ambient[0], b.tau[0], b.frame[0], b.bundle[0], b.ambient_frame[0])
    report = ResidualReport(curve_id, tuple(b.base[0]), float(b.gauss[0]),
                            float(b.codazzi[0]), float(b.ricci[0]))
    return PointResult(b.ambient[0], tau, report, float(b.drift[0]), float(b.tau_defect[0]))


def _check_start(problem: Problem, start: StartData, curve: Curve) -> None:
    x0 = np.broadcast_to(curve.position(0.0), start.x.shape)
    if np.abs(x0 - start.x).max() > 1e-9:
        raise GeometryError("curve does not start at the seed point")


def _check_drift(b: _Batch, opts: DevelopOptions) -> None:
    if opts.drift_bound is not None and np.any(b.drift > opts.drift_bound):
        from .errors import DriftError
        raise DriftError(f"frame drift {float(b.drift.max()):.3e} exceeds {opts.drift_bound:g}")


def reconstruct_batch(problem: Problem, curve: Curve | None = None, velocity=None,
                      start: StartData | None = None, opts: DevelopOptions | None = None,
                      jobs: int = 1) -> tuple[_Batch, np.ndarray, list[str | None]]:
    """Reconstruct a batch of curves, isolating failures.

    A failing batch is split in halves until the failing curves are found;
    those are marked invalid with their error message.  Returns the outputs,
    a validity mask and the per-curve error messages.
    """
    opts = opts or DevelopOptions()
    if curve is not None:
        k = curve.batch_size or 1
    else:
        k = len(velocity)
    if start is None:
        start = problem.start(k)

    def sub_curve(idx):
        if curve is None:
            return None
        return _select_curve(curve, idx)

    def solve(idx: np.ndarray):
        try:
            vel = None if velocity is None else np.asarray(velocity)[idx]
            return [(idx, _run(problem, start.take(idx), sub_curve(idx), vel, opts), None)]
        except _FAILURES as exc:
            if len(idx) == 1:
                return [(idx, None, f"{type(exc).__name__}: {exc}")]
            mid = len(idx) // 2
            return solve(idx[:mid]) + solve(idx[mid:])

    chunks = [c for c in np.array_split(np.arange(k), max(1, min(jobs, k))) if len(c)]
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(itertools.chain.from_iterable(pool.map(solve, chunks)))
    else:
        parts = list(itertools.chain.from_iterable(solve(c) for c in chunks))
    n, s, big_n = problem.n, problem.s, problem.big_n
    out = _Batch(np.full((k, n), np.nan), np.full((k, big_n), np.nan),
                 np.full((k, big_n, big_n), np.nan), np.full((k, n, n), np.nan),
                 np.full((k, s, s), np.nan), np.full((k, big_n, big_n), np.nan),
                 *(np.full(k, np.nan) for _ in range(5)))
    valid = np.zeros(k, dtype=bool)
    errors: list[str | None] = [None] * k
    for idx, batch, err in parts:
        if batch is None:
            errors[int(idx[0])] = err
            continue
        for name in out.__dataclass_fields__:
            getattr(out, name)[idx] = getattr(batch, name)
        valid[idx] = True
    if opts.drift_bound is not None:
        bad = valid & (out.drift > opts.drift_bound)
        for i in np.flatnonzero(bad):
            errors[i] = f"DriftError: frame drift {out.drift[i]:.3e} exceeds {opts.drift_bound:g}"
        valid &= ~bad
    return out, valid, errors


def _select_curve(curve: Curve, idx: np.ndarray) -> Curve:
    if isinstance(curve, CoordinatePolyline):
        return CoordinatePolyline(_rows(curve.p0, idx), _rows(curve.p1, idx), curve.order)
    if isinstance(curve, LineCurve):
        return LineCurve(_rows(curve.p0, idx), _rows(curve.p1, idx))
    if isinstance(curve, BezierCurve):
        return BezierCurve(curve.control[idx] if curve.control.ndim == 3 else curve.control)
    if isinstance(curve, StackedCurves):
        return StackedCurves([curve.curves[i] for i in idx])
    if curve.batch_size is None:
        return curve
    raise GeometryError(f"cannot split a batched {type(curve).__name__}")


def _rows(a: np.ndarray, idx) -> np.ndarray:
    return a[idx] if a.ndim == 2 else a


@dataclass
class ImmersionSample:
    """Reconstructed grid: base points, ambient images, ``tau`` maps, residuals."""
    base_points: np.ndarray
    ambient_points: np.ndarray
    taus: np.ndarray
    residuals: dict[str, np.ndarray]
    valid: np.ndarray
    shape: tuple[int, int]
    faces: list[tuple[int, int, int, int]]
    errors: list[str | None]
    policy: str
    grid_coords: np.ndarray
    frames: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.base_points)

    def reports(self) -> list[ResidualReport]:
        out = []
        for i in np.flatnonzero(self.valid):
            out.append(ResidualReport(f"p{i}", tuple(self.base_points[i]),
                                      float(self.residuals["gauss"][i]),
                                      float(self.residuals["codazzi"][i]),
                                      float(self.residuals["ricci"][i])))
        return out


def grid_points(ranges, counts) -> np.ndarray:
    """Tensor grid over two coordinates, ``x1`` varying slowest."""
    (a0, a1), (b0, b1) = ranges
    na, nb = counts
    if na < 1 or nb < 1:
        raise GeometryError("grid counts must be positive")
    xa = np.linspace(a0, a1, na) if na > 1 else np.array([a0])
    xb = np.linspace(b0, b1, nb) if nb > 1 else np.array([b0])
    return np.stack(np.meshgrid(xa, xb, indexing="ij"), axis=-1).reshape(-1, 2)


def _quads(na: int, nb: int) -> list[tuple[int, int, int, int]]:
    return [(i * nb + j, (i + 1) * nb + j, (i + 1) * nb + j + 1, i * nb + j + 1)
            for i in range(na - 1) for j in range(nb - 1)]


def reconstruct_grid(problem: Problem, ranges, counts, policy: str = "polyline",
                     opts: DevelopOptions | None = None, jobs: int = 1) -> ImmersionSample:
    """Reconstruct ``f`` on a ``counts[0] x counts[1]`` grid.

    ``polyline`` and ``radial`` policies need a point seed and a 2-dimensional
    base; grid coordinates are base chart coordinates.  The ``normal`` policy
    needs a submanifold seed of dimension ``r``; grid coordinates are the
    ``r`` parameters on ``S`` followed by the ``n - r`` normal coefficients of
    the initial geodesic velocity.
    """
    if policy not in POLICIES:
        raise GeometryError(f"unknown curve policy {policy!r}; expected one of {POLICIES}")
    coords = grid_points(ranges, counts)
    n = problem.n
    if policy == "normal":
        seed = problem.seed
        if not isinstance(seed, SubmanifoldSeed):
            raise GeometryError("the normal policy needs a submanifold seed")
        r = seed.r
        if n != 2 or r != 1:
            raise GeometryError("normal grids need a curve S in a 2-dimensional base")
        params = coords[:, :r]
        start = problem.start(params=params)
        vel = np.zeros((len(coords), n))
        vel[:, r:] = coords[:, r:]
        out, valid, errors = reconstruct_batch(problem, velocity=vel, start=start, opts=opts,
                                               jobs=jobs)
    else:
        if not isinstance(problem.seed, PointSeed):
            raise GeometryError(f"the {policy} policy needs a point seed")
        if n != 2:
            raise GeometryError("grid reconstruction needs a 2-dimensional base")
        p = problem.seed.p
        curve = (CoordinatePolyline(np.broadcast_to(p, coords.shape).copy(), coords)
                 if policy == "polyline" else LineCurve(np.broadcast_to(p, coords.shape).copy(), coords))
        out, valid, errors = reconstruct_batch(problem, curve=curve, opts=opts, jobs=jobs)
    res = {"gauss": out.gauss, "codazzi": out.codazzi, "ricci": out.ricci,
           "drift": out.drift, "tau_defect": out.tau_defect}
    frames = {"E": out.frame, "B": out.bundle, "Et": out.ambient_frame}
    return ImmersionSample(out.base, out.ambient, out.tau, res, valid, tuple(counts),
                           _quads(*counts), errors, policy, coords, frames)


@dataclass(frozen=True)
class AuditReport:
    target: np.ndarray
    k: int
    spread: float
    endpoints: np.ndarray
    seed: int

    def as_dict(self) -> dict:
        return {"target": [float(v) for v in self.target], "k": int(self.k),
                "spread": float(self.spread), "seed": int(self.seed),
                "endpoints": [[float(v) for v in p] for p in self.endpoints]}


def _curve_inside(problem: Problem, control: np.ndarray, samples: int = 65) -> bool:
    dom: ChartDomain | None = problem.base.domain
    curve = BezierCurve(control)
    pts = np.stack([curve.position(t) for t in np.linspace(0, 1, samples)])
    if dom is not None and not np.all(dom.contains(pts)):
        return False
    try:
        problem.base.matrix(pts)
    except _FAILURES:
        return False
    return True


def random_curves(problem: Problem, target, k: int, rng: np.random.Generator,
                  scale: float = 0.5, retries: int = 200) -> BezierCurve:
    """``k`` random cubic Bezier curves from the seed point to ``target``."""
    p = np.asarray(problem.seed.p, dtype=float)
    q = np.asarray(target, dtype=float)
    span = max(float(np.linalg.norm(q - p)), 1e-3)
    controls = []
    attempts = 0
    while len(controls) < k:
        if attempts >= retries * k:
            raise GeometryError("could not sample in-chart curves within the retry budget")
        attempts += 1
        c1 = p + (q - p) / 3 + scale * span * rng.standard_normal(len(p))
        c2 = p + 2 * (q - p) / 3 + scale * span * rng.standard_normal(len(p))
        ctrl = np.stack([p, c1, c2, q])
        if _curve_inside(problem, ctrl):
            controls.append(ctrl)
    return BezierCurve(np.stack(controls))


def path_independence_audit(problem: Problem, target, k: int = 10, seed: int = 0,
                            opts: DevelopOptions | None = None, scale: float = 0.5,
                            retries: int = 200) -> AuditReport:
    """Reconstruct ``target`` along ``k`` random curves and report the spread
    (largest pairwise distance of the ambient endpoints, chart norm)."""
    if k < 2:
        raise GeometryError("the audit needs at least two curves")
    if not isinstance(problem.seed, PointSeed):
        raise GeometryError("the audit needs a point seed")
    rng = np.random.Generator(np.random.PCG64(seed))
    curves = random_curves(problem, target, k, rng, scale, retries)
    out, valid, errors = reconstruct_batch(problem, curve=curves, opts=opts)
    if not np.all(valid):
        bad = [e for e in errors if e]
        raise NumericError(f"audit curve failed: {bad[0]}")
    pts = out.ambient
    spread = max(float(np.linalg.norm(a - b)) for a, b in itertools.combinations(pts, 2))
    return AuditReport(np.asarray(target, dtype=float), k, spread, pts, seed)


@dataclass(frozen=True)
class RigidAlignment:
    rotation: np.ndarray
    translation: np.ndarray
    rms: float

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation


def align_rigid(a, b) -> RigidAlignment:
    """Proper rigid motion ``x -> R x + t`` taking ``a`` closest to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise GeometryError("point sets must have equal shape (count, dim)")
    count, dim = a.shape
    if count < 3:
        raise GeometryError("alignment needs at least three points")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    a0, b0 = a - ca, b - cb
    scale = max(float(np.abs(a0).max()), 1e-300)
    if np.linalg.matrix_rank(a0, tol=1e-10 * scale) < dim - 1:
        raise GeometryError("degenerate point configuration for alignment")
    u, _, vt = np.linalg.svd(b0.T @ a0)
    d = np.ones(dim)
    d[-1] = np.sign(np.linalg.det(u @ vt)) or 1.0
    rot = (u * d) @ vt
    trans = cb - rot @ ca
    rms = float(np.sqrt(np.mean(np.sum((a @ rot.T + trans - b) ** 2, axis=1))))
    return RigidAlignment(rot, trans, rms)
