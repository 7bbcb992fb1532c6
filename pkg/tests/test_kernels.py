import os
import subprocess
import sys

import numpy as np
import pytest

from gendev import kernels

from conftest import corpus

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _inputs(rng, n, k=7):
    a = rng.standard_normal((k, n, n))
    g = np.einsum("kab,kcb->kac", a, a) + n * np.eye(n)
    dg = rng.standard_normal((k, n, n, n))
    dg = 0.5 * (dg + np.swapaxes(dg, 2, 3))
    d2g = rng.standard_normal((k, n, n, n, n))
    d2g = 0.5 * (d2g + np.swapaxes(d2g, 1, 2))
    d2g = 0.5 * (d2g + np.swapaxes(d2g, 3, 4))
    return g, np.linalg.inv(g), dg, d2g


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_numba_matches_numpy(rng, n):
    g, ginv, dg, d2g = _inputs(rng, n)
    np_impl, nb_impl = kernels.numpy_impl, kernels.numba_impl
    gam = np_impl.christoffel(ginv, dg)
    assert np.allclose(nb_impl.christoffel(ginv, dg), gam, rtol=1e-13, atol=1e-13)
    dgam = np_impl.christoffel_derivative(ginv, dg, d2g)
    assert np.allclose(nb_impl.christoffel_derivative(ginv, dg, d2g), dgam, rtol=1e-12, atol=1e-12)
    r = np_impl.riemann_lower(g, gam, dgam)
    assert np.allclose(nb_impl.riemann_lower(g, gam, dgam), r, rtol=1e-12, atol=1e-12)
    m = n + 1
    vel = rng.standard_normal((7, m))
    frames = rng.standard_normal((7, m, m))
    gam_m = rng.standard_normal((7, m, m, m))
    coupling = rng.standard_normal((7, m, m))
    assert np.allclose(nb_impl.frame_rhs(gam_m, vel, frames, coupling),
                       np_impl.frame_rhs(gam_m, vel, frames, coupling), rtol=1e-13, atol=1e-13)
    empty = np.zeros((7, 0, 0))
    assert np.allclose(nb_impl.frame_rhs(gam_m, vel, frames, empty),
                       np_impl.frame_rhs(gam_m, vel, frames, empty), rtol=1e-13, atol=1e-13)
    f = rng.standard_normal((7, n, n))
    assert np.allclose(nb_impl.tensor4_in_frame(r, f), np_impl.tensor4_in_frame(r, f),
                       rtol=1e-12, atol=1e-12)


def test_backend_switch_gives_same_geometry(each_backend, rng):
    metric = corpus("small-sphere").ambient
    x = metric.domain.sample(rng, 20)
    kernels.use_backend("numpy")
    ref = metric.geometry(x, curvature=True)
    kernels.use_backend(each_backend)
    out = metric.geometry(x, curvature=True)
    assert kernels.backend() == each_backend
    for key in ("gamma", "riemann"):
        assert np.allclose(out[key], ref[key], rtol=1e-12, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@needs_numba
def test_env_flag_selects_numba():
    code = "from gendev import kernels; print(kernels.backend())"
    env = dict(os.environ, GENDEV_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numba"
    env["GENDEV_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
