"""Sequential propagation kernels with selectable backend.

The only loops in this package that cannot be vectorized are the
state-update sweeps of the unitary propagator (each step depends on the
previous state). Those sweeps are implemented twice: as numba @njit
kernels and as pure-numpy/Python fallbacks. The backend is chosen by the
``QGPLAB_BACKEND`` environment variable:

    QGPLAB_BACKEND=auto    use numba when importable (default)
    QGPLAB_BACKEND=numba   require numba, fail at import if missing
    QGPLAB_BACKEND=numpy   force the pure-numpy path

``benchmarks/bench_propagation.py`` compares the two paths.

Everything else in the package (eigensolves along grids, plaquette sums,
phase fixing) is expressed as batched numpy array operations and needs no
JIT.
"""

import math
import os

import numpy as np

_ENV_VAR = "QGPLAB_BACKEND"


def _numpy_evolve_su2(c0, bx, by, bz, dt, psi0):
    # exp(-i dt (c0*I + b.sigma)) applied step by step; python scalars to
    # keep the fallback loop overhead tolerable
    m = c0.shape[0]
    out = np.empty((m + 1, 2), dtype=np.complex128)
    p0 = complex(psi0[0])
    p1 = complex(psi0[1])
    out[0, 0] = p0
    out[0, 1] = p1
    for k in range(m):
        h = dt[k]
        r = math.sqrt(bx[k] * bx[k] + by[k] * by[k] + bz[k] * bz[k])
        phase = complex(math.cos(c0[k] * h), -math.sin(c0[k] * h))
        if r == 0.0:
            q0, q1 = p0, p1
        else:
            co = math.cos(r * h)
            sn = math.sin(r * h) / r
            uz = complex(co, -sn * bz[k])
            uo = complex(-sn * by[k], -sn * bx[k])
            q0 = uz * p0 + uo * p1
            q1 = -uo.conjugate() * p0 + uz.conjugate() * p1
        p0 = phase * q0
        p1 = phase * q1
        out[k + 1, 0] = p0
        out[k + 1, 1] = p1
    return out


def _numpy_evolve_eig(evals, evecs, dt, psi0):
    m = evals.shape[0]
    out = np.empty((m + 1, psi0.shape[0]), dtype=np.complex128)
    psi = psi0.astype(np.complex128)
    out[0] = psi
    for k in range(m):
        v = evecs[k]
        coeff = v.conj().T @ psi
        coeff *= np.exp(-1j * evals[k] * dt[k])
        psi = v @ coeff
        out[k + 1] = psi
    return out


def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def evolve_su2(c0, bx, by, bz, dt, psi0):
        m = c0.shape[0]
        out = np.empty((m + 1, 2), dtype=np.complex128)
        p0 = psi0[0]
        p1 = psi0[1]
        out[0, 0] = p0
        out[0, 1] = p1
        for k in range(m):
            h = dt[k]
            r = math.sqrt(bx[k] * bx[k] + by[k] * by[k] + bz[k] * bz[k])
            phase = complex(math.cos(c0[k] * h), -math.sin(c0[k] * h))
            if r == 0.0:
                q0 = p0
                q1 = p1
            else:
                co = math.cos(r * h)
                sn = math.sin(r * h) / r
                uz = complex(co, -sn * bz[k])
                uo = complex(-sn * by[k], -sn * bx[k])
                q0 = uz * p0 + uo * p1
                q1 = -np.conj(uo) * p0 + np.conj(uz) * p1
            p0 = phase * q0
            p1 = phase * q1
            out[k + 1, 0] = p0
            out[k + 1, 1] = p1
        return out

    @njit(cache=True)
    def evolve_eig(evals, evecs, dt, psi0):
        m = evals.shape[0]
        n = psi0.shape[0]
        out = np.empty((m + 1, n), dtype=np.complex128)
        psi = psi0.copy()
        out[0] = psi
        for k in range(m):
            v = evecs[k]
            coeff = np.dot(np.conj(v.T), psi)
            for j in range(n):
                arg = evals[k, j] * dt[k]
                coeff[j] = coeff[j] * complex(math.cos(arg), -math.sin(arg))
            psi = np.dot(v, coeff)
            out[k + 1] = psi
        return out

    return {"evolve_su2": evolve_su2, "evolve_eig": evolve_eig}


_NUMPY_IMPLS = {"evolve_su2": _numpy_evolve_su2, "evolve_eig": _numpy_evolve_eig}

_active = {"name": None, "impls": None}


def set_backend(name: str) -> str:
    """Select the kernel backend ("auto", "numba" or "numpy").

    Returns the name actually activated. Not intended to be called while
    other threads are inside kernel code.
    """
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numpy":
        _active["name"] = "numpy"
        _active["impls"] = _NUMPY_IMPLS
        return "numpy"
    try:
        impls = _build_numba_impls()
    except ImportError:
        if name == "numba":
            raise
        _active["name"] = "numpy"
        _active["impls"] = _NUMPY_IMPLS
        return "numpy"
    _active["name"] = "numba"
    _active["impls"] = impls
    return "numba"


def active_backend() -> str:
    return _active["name"]


def evolve_su2(c0, bx, by, bz, dt, psi0):
    """Apply exp(-i*dt_k*(c0_k*I + b_k.sigma)) sequentially to a 2-vector.

    Parameters are per-step float64 arrays of equal length m; returns the
    (m+1, 2) complex trajectory including the initial state.
    """
    return _active["impls"]["evolve_su2"](c0, bx, by, bz, dt, psi0)


def evolve_eig(evals, evecs, dt, psi0):
    """Apply exp(-i*dt_k*H_k) via precomputed eigensystems, sequentially.

    evals: (m, n) float64, evecs: (m, n, n) complex128 with eigenvectors in
    columns, dt: (m,) float64. Returns the (m+1, n) trajectory.
    """
    return _active["impls"]["evolve_eig"](evals, evecs, dt, psi0)


set_backend(os.environ.get(_ENV_VAR, "auto"))
