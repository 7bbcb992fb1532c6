import json

import numpy as np
import pytest
import sympy as sp

from gendev import problems
from gendev.curves import BezierCurve, ConstantCurve, ExpressionCurve, LineCurve
from gendev.fundeq import (ResidualReport, codazzi_residual, gauss_residual, random_reframing,
                           residuals, ricci_residual, weingarten)
from gendev.reconstruct import reconstruct_batch, reconstruct_point
from gendev.transport import parallel_transport

from conftest import corpus


def test_weingarten_sphere_identity(rng):
    prob = corpus("sphere")
    x = prob.base.domain.sample(rng, 10)
    a = weingarten(prob.h, prob.base, prob.bundle, [1.0], x)
    assert np.allclose(a, np.eye(2), atol=1e-14)


def test_weingarten_cylinder_eigenvalues():
    prob = problems.cylinder(2.0)
    a = weingarten(prob.h, prob.base, prob.bundle, [1.0], [0.3, -0.4])
    assert np.allclose(sorted(np.linalg.eigvals(a).real), [0.0, 0.5], atol=1e-15)


def test_weingarten_linear_and_self_adjoint(rng):
    prob = corpus("graph")
    x = rng.uniform(-1, 1, 2)
    xi = rng.standard_normal(1)
    c = float(rng.uniform(-3, 3))
    a = weingarten(prob.h, prob.base, prob.bundle, xi, x)
    assert np.allclose(weingarten(prob.h, prob.base, prob.bundle, c * xi, x), c * a, atol=1e-14)
    g = prob.base.matrix(x)
    assert np.allclose(g @ a, (g @ a).T, atol=1e-14)


def test_tau_of_constant_curve_is_phi():
    for name in ("sphere", "clifford", "small-sphere"):
        prob = corpus(name)
        res = reconstruct_point(prob, ConstantCurve(prob.seed.p))
        assert np.allclose(res.tau.matrix, prob.seed.phi, atol=1e-14)
        assert np.allclose(res.point, prob.seed.ptilde, atol=1e-14)


def test_tau_is_isometry_on_sphere():
    prob = corpus("sphere")
    res = reconstruct_point(prob, ExpressionCurve(["pi/2 - 0.6*t", "0.9*t + 0.3*sin(3*t)"]))
    assert res.tau.gram_defect(prob) <= 1e-9
    q = res.tau.frame_matrix(prob)
    assert np.allclose(q.T @ q, np.eye(3), atol=1e-9)


def _stereo_image_expressions():
    """Closed-form immersion of the polar chart into the stereographic chart
    matching the sphere-s0 seed, composed with the base curve below."""
    t = sp.symbols("t")
    th, ph = sp.pi / 2 - sp.Rational(2, 5) * t, sp.Rational(4, 5) * t + sp.sin(t) / 4
    # rotation taking (1,0,0) to the north pole with d_theta -> x-axis
    x0, y0, z0 = sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)
    big_x, big_y, big_z = -z0, y0, x0
    comps = [big_x / (1 + big_z), big_y / (1 + big_z)]
    base = [th, ph]
    fmt = (lambda e: sp.sstr(e).replace("**", "^"))
    return [fmt(c) for c in comps], [fmt(c) for c in base]


def test_tau_without_bundle_matches_independent_transports():
    prob = corpus("sphere-s0")
    amb_expr, base_expr = _stereo_image_expressions()
    curve = ExpressionCurve(base_expr)
    image = ExpressionCurve(amb_expr)
    assert np.allclose(image.position(0.0), prob.seed.ptilde, atol=1e-15)
    res = reconstruct_point(prob, curve)
    assert np.abs(res.point - image.position(1.0)).max() <= 1e-9
    w = np.eye(2)
    back = parallel_transport(prob.base, curve, w, 1.0, 0.0)
    mapped = back @ prob.seed.phi.T
    forward = parallel_transport(prob.ambient, image, mapped, 0.0, 1.0)
    assert np.abs(forward - (res.tau.matrix @ w.T).T).max() <= 1e-9


@pytest.mark.parametrize("lam", [1.05, 1.1, 1.2])
def test_gauss_residual_detects_scaled_h(lam):
    prob = corpus("sphere").scaled_h(lam)
    res = reconstruct_point(prob, ExpressionCurve(["pi/2 + 0.3*t", "0.5*t"]))
    assert res.report.gauss == pytest.approx(abs(1 - lam ** 2), abs=1e-6)
    assert gauss_residual(prob, res.tau) == res.report.gauss


def test_sphere_residuals_small():
    prob = corpus("sphere")
    res = reconstruct_point(prob, ExpressionCurve(["pi/2 - 0.8*t", "1.3*t^2"]))
    for value in (res.report.gauss, res.report.codazzi, res.report.ricci):
        assert value <= 1e-8
    assert codazzi_residual(prob, res.tau) == res.report.codazzi
    assert ricci_residual(prob, res.tau) == res.report.ricci


def test_flat_plane_residuals_zero():
    prob = corpus("flat")
    res = reconstruct_point(prob, LineCurve(prob.seed.p, prob.seed.p + [0.5, 0.7]))
    assert max(res.report.gauss, res.report.codazzi, res.report.ricci) <= 1e-10


def test_ricci_commutator_oracle():
    prob = problems.commutator()
    res = reconstruct_point(prob, LineCurve(prob.seed.p, [0.4, -0.3]))
    assert res.report.ricci == pytest.approx(1.0, abs=1e-12)
    # flat base and ambient: Gauss reduces to h11.h22 - h12.h12 = -1 in the eta slot
    assert res.report.gauss == pytest.approx(1.0, abs=1e-12)


def test_codazzi_mixed_curvature_vanishes_in_space_form():
    prob = corpus("small-sphere")
    res = reconstruct_point(prob, LineCurve(prob.seed.p, prob.seed.p + [0.3, 0.4]))
    r = prob.ambient.geometry(res.point[None], curvature=True)["riemann"][0]
    et = res.tau.ambient_frame
    rf = np.einsum("abcd,Aa,Bb,Cc,Dd->ABCD", r, et, et, et, et)
    assert np.abs(rf[:2, 2:, :2, :2]).max() <= 1e-12


def test_residuals_on_genuine_submanifolds(rng):
    for name in ("sphere", "graph", "small-sphere", "clifford", "stereographic", "cylinder"):
        prob = corpus(name)
        p = prob.seed.p
        targets = p + rng.uniform(-0.6, 0.6, (20, 2))
        mids = p + rng.uniform(-0.6, 0.6, (20, 2, 2))
        ctrl = np.concatenate([np.broadcast_to(p, (20, 1, 2)), mids, targets[:, None]], axis=1)
        out, valid, errors = reconstruct_batch(prob, curve=BezierCurve(ctrl))
        assert valid.all(), errors
        worst = max(out.gauss.max(), out.codazzi.max(), out.ricci.max())
        assert worst <= 1e-7, name


def test_frame_invariance_small(rng):
    prob = problems.commutator()
    x = rng.uniform(-1, 1, size=(20, 2))
    st = prob.start(20)
    ref = residuals(prob, x, st.ambient_point, st.frame, st.bundle, st.ambient_frame)
    rot = random_reframing(rng, 20, 2, 2)
    again = residuals(prob, x, st.ambient_point, st.frame, st.bundle, st.ambient_frame, rot)
    for key in ref:
        assert np.abs(ref[key] - again[key]).max() <= 1e-12
    assert np.allclose(np.einsum("kab,kcb->kac", rot, rot), np.eye(4), atol=1e-14)


def test_report_json():
    rep = ResidualReport("c1", (0.5, 0.25), 1e-12, 0.0, 3e-17)
    data = json.loads(rep.to_json({"step": 0.001}))
    assert data == {"curve_id": "c1", "point": [0.5, 0.25], "gauss": 1e-12, "codazzi": 0.0,
                    "ricci": 3e-17, "step": 0.001}
    with pytest.raises(ValueError):
        ResidualReport("c1", (0.0,), float("nan"), 0.0, 0.0)
