"""Shooting oracle for the half-line Coulomb problem with a wall at 0.

Independent check for the grid eigensolvers: integrates

    -u''(x) - (kappa/x) u(x) = E u(x),   u(0) = 0,  u -> 0 at infinity,

outward from a series start near the origin with an adaptive ODE solver
and roots the mismatch against the decaying tail.  Nothing here touches
the finite-difference machinery.
"""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import SolverError


def series_start(kappa, E, x0):
    """Regular solution u = x + c2 x^2 + c3 x^3 near the wall.

    Matching powers in -u'' - (kappa/x) u = E u gives c2 = -kappa/2 and
    c3 = (kappa^2/2 - E) / 6.
    """
    c2 = -kappa / 2.0
    c3 = (kappa * kappa / 2.0 - E) / 6.0
    u = x0 + c2 * x0**2 + c3 * x0**3
    du = 1.0 + 2.0 * c2 * x0 + 3.0 * c3 * x0**2
    return u, du


def _log_derivative_miss(E, kappa, x0, x_far, rtol):
    def rhs(x, y):
        return [y[1], -(E + kappa / x) * y[0]]

    u0, du0 = series_start(kappa, E, x0)
    sol = solve_ivp(
        rhs, (x0, x_far), [u0, du0], method="RK45", rtol=rtol, atol=1e-12,
        dense_output=False,
    )
    if not sol.success:
        raise SolverError("eigensolver-stall", f"shooting integration failed: {sol.message}")
    u, du = sol.y[0, -1], sol.y[1, -1]
    k = np.sqrt(-E)
    # normalized mismatch against the decaying tail exp(-k x)
    return (du + k * u) / np.hypot(u, du)


def shoot_eigenvalue(kappa, bracket, x0=1e-6, x_far=None, rtol=1e-10, xtol=1e-12):
    """Eigenvalue inside an energy bracket (both ends negative)."""
    lo, hi = bracket
    if not (lo < hi < 0):
        raise SolverError("eigensolver-stall", "bracket must satisfy lo < hi < 0")
    if x_far is None:
        # past the classical turning point kappa/|E| plus several decay lengths
        x_far = kappa / (-hi) + 30.0 / np.sqrt(-hi)

    def miss(E):
        return _log_derivative_miss(E, kappa, x0, x_far, rtol)

    f_lo, f_hi = miss(lo), miss(hi)
    if f_lo * f_hi > 0:
        raise SolverError(
            "eigensolver-stall",
            f"no sign change in bracket ({lo}, {hi}): miss = ({f_lo:.2e}, {f_hi:.2e})",
        )
    return brentq(miss, lo, hi, xtol=xtol)


def hydrogen_levels(kappa, n_levels=3, **kw):
    """The lowest wall-at-origin Coulomb eigenvalues, found by shooting.

    Brackets are centered on the hydrogenic sequence -kappa^2/(4 n^2) with
    +/-25 percent margins, which keeps consecutive levels separated.
    """
    out = []
    for n in range(1, n_levels + 1):
        center = -(kappa * kappa) / (4.0 * n * n)
        out.append(shoot_eigenvalue(kappa, (1.25 * center, 0.75 * center), **kw))
    return np.array(out)


def shoot_eigenfunction(kappa, E, xs, x0=1e-6, rtol=1e-10):
    """Sampled eigenfunction for boundary-data extraction (not normalized)."""
    def rhs(x, y):
        return [y[1], -(E + kappa / x) * y[0]]

    u0, du0 = series_start(kappa, E, x0)
    xs = np.asarray(xs, dtype=float)
    sol = solve_ivp(
        rhs, (x0, xs.max()), [u0, du0], method="RK45", rtol=rtol, atol=1e-12,
        t_eval=xs, dense_output=False,
    )
    if not sol.success:
        raise SolverError("eigensolver-stall", f"shooting integration failed: {sol.message}")
    return sol.y[0], sol.y[1]
