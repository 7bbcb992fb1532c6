"""Batched numeric kernels with a numba backend.

Every kernel takes arrays with a leading batch axis ``K``.  The numpy
implementations are the reference; the numba ones are explicit loops that
must agree to rounding.  The backend is picked from ``GENDEV_NUMBA``
(``1``/``true``/``yes`` selects numba when it is importable) and can be
switched at runtime with :func:`use_backend`.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

__all__ = [
    "christoffel", "christoffel_derivative", "riemann_lower", "frame_rhs",
    "tensor4_in_frame", "use_backend", "backend", "numpy_impl", "numba_impl",
    "HAVE_NUMBA",
]


# -- numpy reference -------------------------------------------------------------

def _np_christoffel(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # dg[k, c, a, b] = d_c g_ab ; result[k, c, a, b] = Gamma^c_ab
    x = np.swapaxes(dg, 1, 2)                  # x[k, d, a, b] = d_a g_db
    t = x + np.swapaxes(x, 2, 3) - dg          # d_a g_db + d_b g_da - d_d g_ab
    gam = 0.5 * np.einsum("kcd,kdab->kcab", ginv, t)
    n = gam.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    gam[..., ju, iu] = gam[..., iu, ju]
    return gam


def _np_christoffel_derivative(ginv: np.ndarray, dg: np.ndarray,
                               d2g: np.ndarray) -> np.ndarray:
    # d2g[k, e, c, a, b] = d_e d_c g_ab ; result[k, e, c, a, b] = d_e Gamma^c_ab
    x = np.swapaxes(dg, 1, 2)
    t = x + np.swapaxes(x, 2, 3) - dg
    y = np.swapaxes(d2g, 2, 3)                 # y[k, e, d, a, b] = d_e d_a g_db
    dt = y + np.swapaxes(y, 3, 4) - d2g
    dginv = -np.einsum("kcp,kepq,kqd->kecd", ginv, dg, ginv)
    out = 0.5 * (np.einsum("kecd,kdab->kecab", dginv, t)
                 + np.einsum("kcd,kedab->kecab", ginv, dt))
    return out


def _np_riemann_lower(g: np.ndarray, gam: np.ndarray, dgam: np.ndarray) -> np.ndarray:
    # R^d_abc = d_a G^d_bc - d_b G^d_ac + G^e_bc G^d_ae - G^e_ac G^d_be
    r_up = (np.einsum("kadbc->kdabc", dgam) - np.einsum("kbdac->kdabc", dgam)
            + np.einsum("kebc,kdae->kdabc", gam, gam)
            - np.einsum("keac,kdbe->kdabc", gam, gam))
    return np.einsum("keabc,ked->kabcd", r_up, g)


def _np_frame_rhs(gam: np.ndarray, vel: np.ndarray, frames: np.ndarray,
                  coupling: np.ndarray) -> np.ndarray:
    # frames[k, A, :] are vector components; d/dt E_A = -Gamma(vel, E_A) + K_AB E_B
    out = -np.einsum("kcde,kd,kAe->kAc", gam, vel, frames)
    if coupling.shape[1]:
        out += np.einsum("kAB,kBc->kAc", coupling, frames)
    return out


def _np_tensor4_in_frame(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    # out[k, A, B, C, D] = t[k, a, b, c, d] f[k, A, a] f[k, B, b] f[k, C, c] f[k, D, d]
    out = np.einsum("kabcd,kDd->kabcD", t, f)
    out = np.einsum("kabcD,kCc->kabCD", out, f)
    out = np.einsum("kabCD,kBb->kaBCD", out, f)
    return np.einsum("kaBCD,kAa->kABCD", out, f)


numpy_impl = SimpleNamespace(
    christoffel=_np_christoffel,
    christoffel_derivative=_np_christoffel_derivative,
    riemann_lower=_np_riemann_lower,
    frame_rhs=_np_frame_rhs,
    tensor4_in_frame=_np_tensor4_in_frame,
)


# -- numba -------------------------------------------------------------------------

try:
    import numba as _nb
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _nb = None
    HAVE_NUMBA = False


def _build_numba() -> SimpleNamespace:
    njit = _nb.njit(cache=True, fastmath=False)

    @njit
    def christoffel_nb(ginv, dg):
        kk, n = dg.shape[0], dg.shape[1]
        out = np.zeros((kk, n, n, n))
        t = np.empty(n)
        for k in range(kk):
            for a in range(n):
                for b in range(a, n):
                    for d in range(n):
                        t[d] = (dg[k, a, d, b] + dg[k, b, d, a]) - dg[k, d, a, b]
                    for c in range(n):
                        s = 0.0
                        for d in range(n):
                            s += ginv[k, c, d] * t[d]
                        out[k, c, a, b] = 0.5 * s
                        out[k, c, b, a] = 0.5 * s
        return out

    @njit
    def christoffel_derivative_nb(ginv, dg, d2g):
        kk, n = dg.shape[0], dg.shape[1]
        out = np.zeros((kk, n, n, n, n))
        t = np.empty((n, n, n))
        dt = np.empty((n, n, n, n))
        dginv = np.empty((n, n, n))
        for k in range(kk):
            for d in range(n):
                for a in range(n):
                    for b in range(n):
                        t[d, a, b] = dg[k, a, d, b] + dg[k, b, d, a] - dg[k, d, a, b]
                        for e in range(n):
                            dt[e, d, a, b] = (d2g[k, e, a, d, b] + d2g[k, e, b, d, a]
                                              - d2g[k, e, d, a, b])
            for e in range(n):
                for c in range(n):
                    for d in range(n):
                        s = 0.0
                        for p in range(n):
                            for q in range(n):
                                s += ginv[k, c, p] * dg[k, e, p, q] * ginv[k, q, d]
                        dginv[e, c, d] = -s
            for e in range(n):
                for c in range(n):
                    for a in range(n):
                        for b in range(n):
                            s = 0.0
                            for d in range(n):
                                s += dginv[e, c, d] * t[d, a, b] + ginv[k, c, d] * dt[e, d, a, b]
                            out[k, e, c, a, b] = 0.5 * s
        return out

    @njit
    def riemann_lower_nb(g, gam, dgam):
        kk, n = g.shape[0], g.shape[1]
        out = np.zeros((kk, n, n, n, n))
        rup = np.empty((n, n, n, n))
        for k in range(kk):
            for d in range(n):
                for a in range(n):
                    for b in range(n):
                        for c in range(n):
                            s = dgam[k, a, d, b, c] - dgam[k, b, d, a, c]
                            for e in range(n):
                                s += gam[k, e, b, c] * gam[k, d, a, e] - gam[k, e, a, c] * gam[k, d, b, e]
                            rup[d, a, b, c] = s
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        for d in range(n):
                            s = 0.0
                            for e in range(n):
                                s += rup[e, a, b, c] * g[k, e, d]
                            out[k, a, b, c, d] = s
        return out

    @njit
    def frame_rhs_nb(gam, vel, frames, coupling):
        kk, m, n = frames.shape
        out = np.zeros((kk, m, n))
        gv = np.empty((n, n))
        for k in range(kk):
            for c in range(n):
                for e in range(n):
                    s = 0.0
                    for d in range(n):
                        s += gam[k, c, d, e] * vel[k, d]
                    gv[c, e] = s
            for A in range(m):
                for c in range(n):
                    s = 0.0
                    for e in range(n):
                        s -= gv[c, e] * frames[k, A, e]
                    if coupling.shape[1] > 0:
                        for B in range(m):
                            s += coupling[k, A, B] * frames[k, B, c]
                    out[k, A, c] = s
        return out

    @njit
    def tensor4_in_frame_nb(t, f):
        kk, m, n = f.shape
        out = np.zeros((kk, m, m, m, m))
        w1 = np.empty((n, n, n, m))
        w2 = np.empty((n, n, m, m))
        w3 = np.empty((n, m, m, m))
        for k in range(kk):
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        for D in range(m):
                            s = 0.0
                            for d in range(n):
                                s += t[k, a, b, c, d] * f[k, D, d]
                            w1[a, b, c, D] = s
            for a in range(n):
                for b in range(n):
                    for C in range(m):
                        for D in range(m):
                            s = 0.0
                            for c in range(n):
                                s += w1[a, b, c, D] * f[k, C, c]
                            w2[a, b, C, D] = s
            for a in range(n):
                for B in range(m):
                    for C in range(m):
                        for D in range(m):
                            s = 0.0
                            for b in range(n):
                                s += w2[a, b, C, D] * f[k, B, b]
                            w3[a, B, C, D] = s
            for A in range(m):
                for B in range(m):
                    for C in range(m):
                        for D in range(m):
                            s = 0.0
                            for a in range(n):
                                s += w3[a, B, C, D] * f[k, A, a]
                            out[k, A, B, C, D] = s
        return out

    def wrap(fn):
        def call(*arrays):
            return fn(*[np.ascontiguousarray(a, dtype=np.float64) for a in arrays])
        call.__name__ = fn.__name__
        call.jitted = fn
        return call

    return SimpleNamespace(
        christoffel=wrap(christoffel_nb),
        christoffel_derivative=wrap(christoffel_derivative_nb),
        riemann_lower=wrap(riemann_lower_nb),
        frame_rhs=wrap(frame_rhs_nb),
        tensor4_in_frame=wrap(tensor4_in_frame_nb),
    )


numba_impl = _build_numba() if HAVE_NUMBA else None

_active = numpy_impl
_name = "numpy"


def use_backend(name: str) -> None:
    """Select ``"numpy"`` or ``"numba"`` for subsequent kernel calls."""
    global _active, _name
    if name == "numpy":
        _active, _name = numpy_impl, "numpy"
    elif name == "numba":
        if numba_impl is None:
            raise RuntimeError("numba is not installed")
        _active, _name = numba_impl, "numba"
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return _name


if os.environ.get("GENDEV_NUMBA", "").strip().lower() in ("1", "true", "yes", "on"):
    if HAVE_NUMBA:
        use_backend("numba")


def christoffel(ginv, dg):
    return _active.christoffel(ginv, dg)


def christoffel_derivative(ginv, dg, d2g):
    return _active.christoffel_derivative(ginv, dg, d2g)


def riemann_lower(g, gam, dgam):
    return _active.riemann_lower(g, gam, dgam)


def frame_rhs(gam, vel, frames, coupling):
    return _active.frame_rhs(gam, vel, frames, coupling)


def tensor4_in_frame(t, f):
    return _active.tensor4_in_frame(t, f)
