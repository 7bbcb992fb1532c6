import numpy as np
import pytest
import sympy as sp

from gendev import problems
from gendev.charts import (BundleSpec, MetricField, bundle_curvature, christoffel,
                           riemann_curvature)
from gendev.errors import GeometryError

from conftest import corpus


def _fd_christoffel(metric, x, step=1e-6):
    """Finite-difference oracle on the metric components."""
    n = metric.dim
    dg = np.zeros((n, n, n))
    for d in range(n):
        e = np.zeros(n)
        e[d] = step
        dg[d] = (metric.matrix(x + e) - metric.matrix(x - e)) / (2 * step)
    ginv = np.linalg.inv(metric.matrix(x))
    low = 0.5 * (np.einsum("adb->dab", dg) + np.einsum("bda->dab", dg) - dg)
    return np.einsum("cd,dab->cab", ginv, low)


def _sympy_riemann(components, n, x):
    """Lowered curvature from a symbolic metric, same sign convention."""
    xs = sp.symbols(f"x1:{n + 1}")
    g = sp.Matrix(n, n, lambda i, j: components(xs)[i][j])
    ginv = g.inv()
    gam = [[[sum(ginv[c, d] * (sp.diff(g[d, b], xs[a]) + sp.diff(g[d, a], xs[b])
                               - sp.diff(g[a, b], xs[d])) for d in range(n)) / 2
             for b in range(n)] for a in range(n)] for c in range(n)]
    # R^d_{cab} with R(d_a, d_b) d_c = R^d_{cab} d_d
    out = np.zeros((n, n, n, n))
    subs = dict(zip(xs, x))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    r = (sp.diff(gam[d][b][c], xs[a]) - sp.diff(gam[d][a][c], xs[b])
                         + sum(gam[d][a][e] * gam[e][b][c] - gam[d][b][e] * gam[e][a][c]
                               for e in range(n)))
                    out[a, b, c, d] = float(r.subs(subs))
    gx = np.array(g.subs(subs), dtype=float)
    return np.einsum("abce,ed->abcd", out, gx)


def test_euclidean_christoffel_zero():
    assert np.all(christoffel(MetricField.euclidean(3), [0.1, 0.2, 0.3]) == 0)


def test_polar_christoffel():
    polar = MetricField(2, {(0, 0): 1.0, (1, 1): "x1^2"})
    gam = christoffel(polar, [2.0, 0.7])
    assert gam[0, 1, 1] == pytest.approx(-2.0, abs=1e-12)
    assert gam[1, 0, 1] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(gam, _fd_christoffel(polar, np.array([2.0, 0.7])), atol=1e-8)


def test_sphere_christoffel():
    gam = christoffel(corpus("sphere").base, [np.pi / 4, 0.1])
    assert gam[0, 1, 1] == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("name", ["sphere", "stereographic", "graph", "small-sphere"])
def test_christoffel_exactly_symmetric(name, rng):
    metric = corpus(name).base
    x = metric.domain.sample(rng, 50) if metric.domain else rng.uniform(-1, 1, (50, 2))
    gam = christoffel(metric, x)
    assert np.array_equal(gam, np.swapaxes(gam, -1, -2))
    for xi in x[:5]:
        assert np.allclose(christoffel(metric, xi), _fd_christoffel(metric, xi), atol=1e-7)


def _corpus_metrics():
    for name, build in problems.CORPUS.items():
        prob = corpus(name)
        yield f"{name}-base", prob.base
        yield f"{name}-ambient", prob.ambient


@pytest.mark.parametrize("label, metric", list(_corpus_metrics()), ids=lambda v: v if isinstance(v, str) else "")
def test_curvature_symmetries(label, metric, rng):
    if metric.domain is not None:
        x = metric.domain.sample(rng, 50)
    else:
        x = rng.uniform(-1.0, 1.0, size=(50, metric.dim))
    value = riemann_curvature(metric, x)
    value.check(1e-9)


def test_sphere_space_form_identity(rng):
    metric = corpus("sphere").base
    x = metric.domain.sample(rng, 20)
    r = metric.curvature(x)
    g = metric.matrix(x)
    form = np.einsum("kad,kbc->kabcd", g, g) - np.einsum("kac,kbd->kabcd", g, g)
    assert np.abs(r - form).max() <= 1e-8
    # sectional curvature +1 at the equator
    r0 = metric.curvature([np.pi / 2, 0.0])
    assert r0[0, 1, 1, 0] == pytest.approx(1.0, abs=1e-12)


def test_curvature_matches_symbolic_oracle():
    def comps(xs):
        return [[1 + xs[0] ** 2, xs[0] * xs[1]], [xs[0] * xs[1], 2 + sp.sin(xs[1]) ** 2]]

    metric = MetricField(2, {(0, 0): "1 + x1^2", (0, 1): "x1*x2", (1, 1): "2 + sin(x2)^2"})
    x = np.array([0.3, -0.7])
    assert np.allclose(metric.curvature(x), _sympy_riemann(comps, 2, x), atol=1e-10)


def test_scaled_flat_curvature_zero():
    metric = MetricField(3, {(0, 0): 4.0, (1, 1): 4.0, (2, 2): 4.0})
    assert np.all(metric.curvature([0.2, 0.1, 0.3]) == 0)


def test_singular_metric_rejected():
    metric = MetricField(2, {(0, 0): 1.0, (1, 1): "x1^2"})
    with pytest.raises(GeometryError):
        metric.christoffel([0.0, 0.0])


def test_bundle_curvature_examples(rng):
    x = rng.uniform(-2, 2, size=(10, 2))
    assert np.all(bundle_curvature(BundleSpec.trivial(2, 2), x).components == 0)
    rank1 = BundleSpec(1, 2, connection={(0, 0, 0): "x2", (1, 0, 0): "x1^2"})
    assert np.abs(bundle_curvature(rank1, x).components).max() <= 1e-14
    rot = problems.rotation_bundle()
    value = bundle_curvature(rot, x)
    assert np.allclose(value.components[:, 0, 1, 0, 1], -1.0, atol=1e-14)
    assert np.allclose(value.components[:, 1, 0, 0, 1], 1.0, atol=1e-14)
    value.check(1e-12)


def test_bundle_compatibility_check():
    bad = BundleSpec(2, 2, connection={(0, 0, 1): "x2"})
    with pytest.raises(GeometryError):
        bad.check_compatibility(np.array([[0.1, 0.5]]))
    problems.rotation_bundle().check_compatibility(np.array([[0.1, 0.5]]))
