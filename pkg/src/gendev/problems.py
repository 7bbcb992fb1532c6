"""Reference problems with known immersions, used by tests, benchmarks and the CLI.

Each builder returns a :class:`~gendev.problem.Problem`; most also have a
closed-form immersion ``F`` (``*_embedding``) that the reconstruction must
reproduce.
"""
from __future__ import annotations

import numpy as np

from .charts import AmbientSpec, BundleSpec, ChartDomain, MetricField, SecondFundamentalField
from .problem import PointSeed, Problem, SubmanifoldSeed

__all__ = [
    "sphere", "sphere_embedding", "stereographic_sphere", "stereographic_embedding",
    "cylinder", "cylinder_embedding", "flat", "flat_rotation", "graph_surface",
    "graph_embedding", "clifford_torus", "clifford_embedding", "small_sphere_in_s3",
    "sphere_to_sphere", "commutator", "equator_band", "rotation_bundle", "CORPUS",
]

SPHERE_DOMAIN = ChartDomain((0.02, -3.5), (np.pi - 0.02, 3.5))


def _flat_ambient(dim: int) -> AmbientSpec:
    return AmbientSpec(dim, {(a, a): 1.0 for a in range(dim)})


def _round_sphere_metric() -> MetricField:
    return MetricField(2, {(0, 0): 1.0, (1, 1): "sin(x1)^2"}, SPHERE_DOMAIN)


def sphere(scale: float = 1.0) -> Problem:
    """Unit sphere in flat 3-space, polar chart ``(theta, phi)``, seed at
    ``(pi/2, 0)`` mapped to ``(1, 0, 0)`` with the inward normal."""
    base = _round_sphere_metric()
    h = SecondFundamentalField(2, 1, {(0, 0, 0): 1.0, (0, 1, 1): "sin(x1)^2"})
    phi = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    prob = Problem(base, BundleSpec.trivial(1, 2), h, _flat_ambient(3),
                   PointSeed([np.pi / 2, 0.0], [1.0, 0.0, 0.0], phi), name="sphere")
    return prob if scale == 1.0 else prob.scaled_h(scale)


def sphere_embedding(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    th, ph = x[..., 0], x[..., 1]
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)


def stereographic_sphere() -> Problem:
    """Unit sphere in stereographic coordinates centred at the north pole."""
    conf = "4/(1 + x1^2 + x2^2)^2"
    base = MetricField(2, {(0, 0): conf, (1, 1): conf}, ChartDomain((-3.0, -3.0), (3.0, 3.0)))
    h = SecondFundamentalField(2, 1, {(0, 0, 0): conf, (0, 1, 1): conf})
    phi = np.array([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]])
    return Problem(base, BundleSpec.trivial(1, 2), h, _flat_ambient(3),
                   PointSeed([0.0, 0.0], [0.0, 0.0, 1.0], phi), name="stereographic")


def stereographic_embedding(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    q = np.sum(x ** 2, axis=-1)
    return np.stack([2 * x[..., 0], 2 * x[..., 1], 1 - q], axis=-1) / (1 + q)[..., None]


def cylinder(radius: float = 1.0) -> Problem:
    """Flat plane rolled onto a cylinder of the given radius around the x-axis
    direction ``(0, 1, 0)``; ``x1`` wraps, ``x2`` runs along the axis."""
    base = MetricField.euclidean(2)
    h = SecondFundamentalField(2, 1, {(0, 0, 0): 1.0 / radius})
    return Problem(base, BundleSpec.trivial(1, 2), h, _flat_ambient(3),
                   PointSeed([0.0, 0.0], [0.0, 0.0, 0.0], np.eye(3)), name="cylinder",
                   meta={"radius": radius})


def cylinder_embedding(x, radius: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a = x[..., 0] / radius
    return np.stack([radius * np.sin(a), x[..., 1], radius * (1 - np.cos(a))], axis=-1)


def flat_rotation(angle: float = 0.4) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return rz @ rx


def flat(s: int = 1, angle: float = 0.4) -> Problem:
    """Euclidean plane with ``h = 0`` and a flat trivial bundle of rank ``s``."""
    n = 2
    phi = np.eye(n + s)
    phi[:3, :3] = flat_rotation(angle) if n + s >= 3 else phi[:3, :3]
    return Problem(MetricField.euclidean(n), BundleSpec.trivial(s, n),
                   SecondFundamentalField.zero(n, s), _flat_ambient(n + s),
                   PointSeed([0.3, -0.2], np.linspace(1.0, 2.0, n + s), phi), name="flat")


GRAPH = "0.3*x1^2 - 0.2*x2^2 + 0.1*x1*x2"
_GX = "(0.6*x1 + 0.1*x2)"
_GY = "(0.1*x1 - 0.4*x2)"


def graph_surface() -> Problem:
    """Graph ``z = f(x, y)`` of a quadratic in flat 3-space with upward normal."""
    w = f"sqrt(1 + {_GX}^2 + {_GY}^2)"
    base = MetricField(2, {(0, 0): f"1 + {_GX}^2", (0, 1): f"{_GX}*{_GY}", (1, 1): f"1 + {_GY}^2"},
                       ChartDomain((-2.0, -2.0), (2.0, 2.0)))
    h = SecondFundamentalField(2, 1, {(0, 0, 0): f"0.6/{w}", (0, 0, 1): f"0.1/{w}",
                                      (0, 1, 1): f"-0.4/{w}"})
    return Problem(base, BundleSpec.trivial(1, 2), h, _flat_ambient(3),
                   PointSeed([0.0, 0.0], [0.0, 0.0, 0.0], np.eye(3)), name="graph")


def graph_embedding(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a, b = x[..., 0], x[..., 1]
    return np.stack([a, b, 0.3 * a ** 2 - 0.2 * b ** 2 + 0.1 * a * b], axis=-1)


def clifford_torus() -> Problem:
    """Flat torus ``(cos x1, sin x1, cos x2, sin x2)`` in flat 4-space; the
    normal bundle has rank two and is flat in the radial frame."""
    h = SecondFundamentalField(2, 2, {(0, 0, 0): -1.0, (1, 1, 1): -1.0})
    phi = np.zeros((4, 4))
    phi[1, 0] = phi[3, 1] = phi[0, 2] = phi[2, 3] = 1.0
    return Problem(MetricField.euclidean(2), BundleSpec.trivial(2, 2), h, _flat_ambient(4),
                   PointSeed([0.0, 0.0], [1.0, 0.0, 1.0, 0.0], phi), name="clifford")


def clifford_embedding(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.stack([np.cos(x[..., 0]), np.sin(x[..., 0]), np.cos(x[..., 1]), np.sin(x[..., 1])],
                    axis=-1)


def small_sphere_in_s3(chi0: float = 1.0) -> Problem:
    """The level set ``chi = chi0`` of the unit 3-sphere in hyperspherical
    coordinates ``(chi, theta, phi)``; the immersion is ``(t, p) -> (chi0, t, p)``."""
    r2 = repr(float(np.sin(chi0) ** 2))
    base = MetricField(2, {(0, 0): r2, (1, 1): f"{r2}*sin(x1)^2"}, SPHERE_DOMAIN)
    k = float(-np.sin(chi0) * np.cos(chi0))
    h = SecondFundamentalField(2, 1, {(0, 0, 0): k, (0, 1, 1): f"{k!r}*sin(x1)^2"})
    ambient = AmbientSpec(3, {(0, 0): 1.0, (1, 1): "sin(x1)^2", (2, 2): "sin(x1)^2*sin(x2)^2"},
                          ChartDomain((0.02, 0.02, -3.5), (np.pi - 0.02, np.pi - 0.02, 3.5)))
    phi = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return Problem(base, BundleSpec.trivial(1, 2), h, ambient,
                   PointSeed([np.pi / 2, 0.0], [chi0, np.pi / 2, 0.0], phi),
                   name="small-sphere", meta={"chi0": chi0})


def sphere_to_sphere() -> Problem:
    """Codimension-zero problem: polar chart of the unit sphere into the
    stereographic chart of the unit sphere."""
    conf = "4/(1 + x1^2 + x2^2)^2"
    ambient = AmbientSpec(2, {(0, 0): conf, (1, 1): conf})
    return Problem(_round_sphere_metric(), BundleSpec.trivial(0, 2),
                   SecondFundamentalField.zero(2, 0), ambient,
                   PointSeed([np.pi / 2, 0.0], [0.0, 0.0], 0.5 * np.eye(2)), name="sphere-s0")


def commutator() -> Problem:
    """Flat base, flat rank-2 bundle, ``A_xi = diag(1, 0)`` and
    ``A_eta = offdiag(1, 1)``: violates the Ricci equation by exactly one."""
    h = SecondFundamentalField(2, 2, {(0, 0, 0): 1.0, (1, 0, 1): 1.0})
    return Problem(MetricField.euclidean(2), BundleSpec.trivial(2, 2), h, _flat_ambient(4),
                   PointSeed([0.0, 0.0], [0.0, 0.0, 0.0, 0.0], np.eye(4)), name="commutator")


def rotation_bundle() -> BundleSpec:
    """Rank-2 bundle over the plane with ``omega_1 = x2 J`` and ``omega_2 = 0``."""
    return BundleSpec(2, 2, connection={(0, 0, 1): "x2", (0, 1, 0): "-x2"})


def equator_band() -> Problem:
    """The sphere problem seeded along the equator ``theta = pi/2`` (parameter
    ``x1`` is the longitude); the normal direction of ``S`` is ``d/dtheta``."""
    base = sphere()
    seed = SubmanifoldSeed(
        1, ["pi/2", "x1"], ["cos(x1)", "sin(x1)", "0"],
        [["0", "-sin(x1)", "-cos(x1)"], ["0", "cos(x1)", "-sin(x1)"], ["-1", "0", "0"]],
        samples=np.linspace(-2.0, 2.0, 5)[:, None])
    return Problem(base.base, base.bundle, base.h, base.ambient, seed, name="equator-band")


CORPUS = {
    "sphere": sphere,
    "stereographic": stereographic_sphere,
    "cylinder": cylinder,
    "flat": flat,
    "graph": graph_surface,
    "clifford": clifford_torus,
    "small-sphere": small_sphere_in_s3,
    "sphere-s0": sphere_to_sphere,
}
