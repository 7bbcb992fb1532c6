import functools
import json

import numpy as np
import pytest

from gendev.pipeline import co_integrate
from gendev.problem import Problem, SubmanifoldSeed
from gendev.variation import (AnsatzReport, CurveFamily, integrate_base_variation,
                              integrate_gvariation, integrate_variations, verify_ansatz)

from conftest import corpus

SPHERE_FAMILY = ("cos(u)*(1 + 0.3*t)", "sin(u) + 0.2*t")


@functools.lru_cache(maxsize=None)
def _run(name: str, components: tuple, u: float, theta: tuple | None = None, scale: float = 1.0):
    prob = LATITUDE() if name == "latitude" else corpus(name)
    if scale != 1.0:
        prob = prob.scaled_h(scale)
    family = CurveFamily(list(components), None if theta is None else list(theta))
    return prob, family, integrate_variations(prob, family, u)


@functools.lru_cache(maxsize=None)
def LATITUDE(c: float = 1.1) -> Problem:
    """Sphere problem seeded on the latitude circle ``theta = c``."""
    sphere = corpus("sphere")
    cc, sc = repr(float(np.cos(c))), repr(float(np.sin(c)))
    psi = [[f"{cc}*cos(x1)", f"-{sc}*sin(x1)", f"-{sc}*cos(x1)"],
           [f"{cc}*sin(x1)", f"{sc}*cos(x1)", f"-{sc}*sin(x1)"],
           [f"-{sc}", "0", f"-{cc}"]]
    seed = SubmanifoldSeed(1, [repr(c), "x1"], [f"{sc}*cos(x1)", f"{sc}*sin(x1)", cc], psi,
                           samples=np.linspace(-1.0, 1.0, 3)[:, None])
    return Problem(sphere.base, sphere.bundle, sphere.h, sphere.ambient, seed, name="latitude")


def _endpoints(prob, family, us):
    us = np.asarray(us, dtype=float)
    run = co_integrate(prob, prob.start(len(us)), velocity=lambda t: family.velocity(us, t))
    return run.final()["xt"]


@pytest.mark.parametrize("name, comps", [
    ("flat", ("cos(u)", "sin(u)")),
    ("sphere", SPHERE_FAMILY),
    ("cylinder", ("cos(u) + t", "sin(u)*t")),
])
def test_variation_matches_endpoint_differences(name, comps):
    prob, family, out = _run(name, comps, 0.4)
    st = out["run"].final()
    field = out["ambient"].U[-1] @ st["Et"][1]
    eps = 1e-4
    lo, hi = _endpoints(prob, family, [0.4 - eps, 0.4 + eps])
    assert np.abs(field - (hi - lo) / (2 * eps)).max() <= 1e-5


def test_flat_variation_is_linear():
    _, family, out = _run("flat", ("cos(u)", "sin(u)"), 0.4)
    amb = out["ambient"]
    dv = family.du(0.4, 0.0)[0]
    assert np.allclose(amb.U[:, :2], amb.t[:, None] * dv[None], atol=1e-13)
    assert np.allclose(out["base"].U, amb.t[:, None] * dv[None], atol=1e-13)


def test_point_seed_initial_data_exact():
    _, family, out = _run("sphere", SPHERE_FAMILY, 0.3)
    for side in ("base", "ambient"):
        tr = out[side]
        assert np.all(tr.U[0] == 0) and np.all(tr.X[0] == 0)
    amb = out["ambient"]
    assert np.all(amb.dU[0, 2:] == 0)
    assert np.array_equal(amb.dU[0, :2], family.du(0.3, 0.0)[0])


@pytest.mark.parametrize("name", ["sphere", "clifford", "small-sphere"])
def test_antisymmetry_and_ansatz(name):
    _, _, out = _run(name, SPHERE_FAMILY, 0.3)
    assert out["base"].antisymmetry_defect() <= 1e-9
    assert out["ambient"].antisymmetry_defect() <= 1e-9
    rep = verify_ansatz(out["base"], out["ambient"])
    assert rep.max() <= 1e-7, rep


@pytest.mark.parametrize("c", [0.7, 1.3])
def test_sphere_geodesic_family_jacobi_field(c):
    comps = (f"{c}*cos(u)", f"{c}*sin(u)")
    _, family, out = _run("sphere", comps, 0.5)
    dv = family.du(0.5, 0.0)[0]
    want = np.sin(c * out["base"].t)[:, None] / c * dv[None]
    assert np.abs(out["base"].U - want).max() <= 1e-9
    assert np.abs(out["ambient"].U[:, :2] - want).max() <= 1e-9


def test_single_side_wrappers_agree():
    prob, family, out = _run("sphere", SPHERE_FAMILY, 0.3)
    base = integrate_base_variation(prob, family, 0.3)
    amb = integrate_gvariation(prob, family, 0.3)
    assert np.allclose(base.U, out["base"].U, atol=1e-12)
    assert np.allclose(amb.U, out["ambient"].U, atol=1e-12)


def test_submanifold_initial_data_on_latitude():
    c = 1.1
    prob, family, out = _run("latitude", ("0.3 + 0.2*t", "0.8*cos(u)"), 0.2, ("u",))
    start = out["run"].start.take(slice(1, 2))
    frame = start.frame[0]
    g = prob.base.matrix(start.x[0])
    # theta_i: components of d/du S(u) = d_phi in the transported frame
    theta = frame @ g @ np.array([0.0, 1.0])
    # geodesic curvature of the latitude: nabla_T T = -cot(c) d_theta for unit T
    sigma = float(frame[1] @ g @ np.array([-1.0 / np.tan(c), 0.0]))
    v0 = family.velocity(0.2, 0.0)[0]
    dv0 = family.du(0.2, 0.0)[0]
    base, amb = out["base"], out["ambient"]
    assert abs(base.U[0, 0] - theta[0]) <= 1e-14 and abs(base.U[0, 1]) <= 1e-14
    assert abs(theta[1]) <= 1e-14
    assert abs(base.dU[0, 0] - (dv0[0] - v0[1] * sigma * theta[0])) <= 1e-14
    assert abs(amb.U[0, 0] - theta[0]) <= 1e-14
    assert np.abs(amb.U[0, 1:]).max() <= 1e-14
    # X~_{i mu} = sigma^mu_ij theta_j and X~_{a alpha} = h^alpha_ai theta_i (h = g in the frame)
    assert abs(amb.X[0, 0, 1] - sigma * theta[0]) <= 1e-14
    assert abs(amb.X[0, 0, 2] - theta[0]) <= 1e-14
    rep = verify_ansatz(base, amb)
    assert rep.max() <= 1e-7, rep


def test_gauss_violation_is_detected():
    _, _, out = _run("sphere", SPHERE_FAMILY, 0.3, None, 1.1)
    rep = verify_ansatz(out["base"], out["ambient"])
    # the developments stay on a sphere of radius 1/1.1, so U~_alpha is not the witness
    assert rep.max_U_alpha <= 1e-6
    assert rep.max_U_diff >= 1e-3
    assert rep.max_Xab_diff >= 1e-3


def test_report_json():
    rep = AnsatzReport(1e-9, 2e-9, 0.0, 0.0, 3e-10)
    data = json.loads(rep.to_json({"u": 0.3}))
    assert set(data) == {"max_U_alpha", "max_U_diff", "max_Xab_diff", "max_Xalphabeta_diff",
                         "max_Xaalpha_diff", "u"}
    assert rep.max() == 2e-9


def test_family_dimension_checked():
    with pytest.raises(ValueError):
        integrate_variations(corpus("sphere"), CurveFamily(["u", "t", "1"]), 0.0)
