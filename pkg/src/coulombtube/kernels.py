"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The dominant inner loop of the package is the transverse quadrature of the
screened Coulomb profile

    profile(x) = sum_n  u0w[n] / (sqrt(x^2 + eps^2 * ynorm2[n]) + reg)

evaluated for thousands of axial positions x (operator assembly, potential
integrals, pointwise envelope checks).  ``u0w`` carries the squared ground
mode times quadrature weights, ``ynorm2`` the squared node radii, ``reg``
the additive regularization (0 for the bare potential).

Set ``COULOMBTUBE_DISABLE_NUMBA=1`` to force the numpy path (used by the
benchmark in ``bench/`` and as a safety hatch on platforms without a
working JIT).  Both paths produce identical results up to floating-point
summation order; the numba path sums in node order per x, the numpy path
uses pairwise summation, so agreement is to ~1e-14 relative.
"""

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("COULOMBTUBE_DISABLE_NUMBA", "0") not in ("", "0")

_CHUNK = 4096  # numpy fallback: bound temporary size to _CHUNK * len(ynorm2)


def coulomb_profile_numpy(xs, ynorm2, u0w, eps, reg):
    """Pure-numpy evaluation of the screened Coulomb profile."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    out = np.empty(xs.shape[0], dtype=np.float64)
    for start in range(0, xs.shape[0], _CHUNK):
        block = xs[start:start + _CHUNK]
        denom = np.sqrt(block[:, None] ** 2 + (eps * eps) * ynorm2[None, :]) + reg
        out[start:start + _CHUNK] = (u0w[None, :] / denom).sum(axis=1)
    return out


def bump_profile_numpy(xs, radius):
    """Pure-numpy mollifier bump: exp(1 - 1/(1 - (x/r)^2)) inside |x| < r."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.zeros(xs.shape, dtype=np.float64)
    t = xs / radius
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


if not NUMBA_DISABLED:
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _coulomb_profile_numba(xs, ynorm2, u0w, eps, reg):
        nx = xs.shape[0]
        nm = ynorm2.shape[0]
        out = np.empty(nx, dtype=np.float64)
        e2 = eps * eps
        for i in prange(nx):
            x2 = xs[i] * xs[i]
            acc = 0.0
            for n in range(nm):
                acc += u0w[n] / (np.sqrt(x2 + e2 * ynorm2[n]) + reg)
            out[i] = acc
        return out

    @njit(cache=True)
    def _bump_profile_numba(xs, radius):
        out = np.zeros(xs.shape[0], dtype=np.float64)
        for i in range(xs.shape[0]):
            t = xs[i] / radius
            if abs(t) < 1.0:
                out[i] = np.exp(1.0 - 1.0 / (1.0 - t * t))
        return out

    def coulomb_profile(xs, ynorm2, u0w, eps, reg):
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        return _coulomb_profile_numba(
            np.ascontiguousarray(xs),
            np.ascontiguousarray(ynorm2),
            np.ascontiguousarray(u0w),
            float(eps),
            float(reg),
        )

    def bump_profile(xs, radius):
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        return _bump_profile_numba(np.ascontiguousarray(xs), float(radius))

    BACKEND = "numba"
else:
    coulomb_profile = coulomb_profile_numpy
    bump_profile = bump_profile_numpy
    BACKEND = "numpy"


def backend_name():
    return BACKEND
