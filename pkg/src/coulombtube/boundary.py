"""Boundary data at the Coulomb singularity and the extension family.

Functions in the adjoint domain of the 1D Coulomb operator have finite
lateral limits phi(0+-) and finite log-regularized derivatives

    phitilde(0+-) = lim_{x -> 0+-} ( phi'(x) +- kappa phi(x) ln(+-|kappa| x) ).

A 2x2 unitary U picks one self-adjoint realization through the linear
relation

    (I - U) (phitilde(0+), phitilde(0-))^T = -i (I + U) (-phi(0+), phi(0-))^T,

with U = I the Dirichlet choice (both lateral limits vanish).  This module
extracts the boundary quadruple from sampled functions by extrapolation on
geometrically shrinking radii and checks the membership relation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_CONTRACT_RATIO = 0.95   # successive-difference ratio above this means "not settling"
_SETTLE_ABS = 1e-13      # differences below this scale count as settled


# ---------------------------------------------------------------------------
# Extension matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionMatrix:
    """2x2 unitary labeling one self-adjoint realization."""

    U: np.ndarray

    @classmethod
    def from_angles(cls, theta_global=0.0, theta_mix=0.0, theta_phase1=0.0, theta_phase2=0.0):
        """Full U(2) coverage: global phase times an SU(2) element."""
        cm, sm = np.cos(theta_mix), np.sin(theta_mix)
        su2 = np.array(
            [
                [np.exp(1j * theta_phase1) * cm, np.exp(1j * theta_phase2) * sm],
                [-np.exp(-1j * theta_phase2) * sm, np.exp(-1j * theta_phase1) * cm],
            ]
        )
        return cls(np.exp(1j * theta_global) * su2)

    @classmethod
    def identity(cls):
        return cls(np.eye(2, dtype=complex))

    @classmethod
    def minus_identity(cls):
        return cls(-np.eye(2, dtype=complex))

    def unitarity_defect(self):
        return float(np.max(np.abs(self.U @ self.U.conj().T - np.eye(2))))

    def validate(self):
        if self.unitarity_defect() > 1e-12:
            raise ValidationError("not-unitary", "extension matrix fails U U* = I")


@dataclass
class BoundaryData:
    """Lateral limits and log-regularized derivatives at the origin."""

    phi_plus: float | complex
    phi_minus: float | complex
    phitilde_plus: float | complex
    phitilde_minus: float | complex
    flags: dict = field(default_factory=dict)   # entry name -> diverged?

    def any_divergent(self):
        return any(self.flags.values())

    def as_record(self):
        return {
            "phi_plus": _jsonify(self.phi_plus),
            "phi_minus": _jsonify(self.phi_minus),
            "phitilde_plus": _jsonify(self.phitilde_plus),
            "phitilde_minus": _jsonify(self.phitilde_minus),
            "flags": dict(self.flags),
        }


def _jsonify(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return float(v)


# ---------------------------------------------------------------------------
# Extrapolation of boundary data
# ---------------------------------------------------------------------------

def _neville_at_zero(xs, ys):
    """Polynomial extrapolation of (xs, ys) to x = 0."""
    t = np.array(ys, dtype=complex if np.iscomplexobj(ys) else float)
    n = len(xs)
    for level in range(1, n):
        for j in range(n - level):
            x0, x1 = xs[j], xs[j + level]
            t[j] = (x0 * t[j + 1] - x1 * t[j]) / (x0 - x1)
    return t[0]


def _diverges(seq):
    """True when the tail of seq stops contracting (log or power growth)."""
    d = np.abs(np.diff(np.asarray(seq)))
    scale = max(np.max(np.abs(seq)), 1.0)
    if np.all(d <= _SETTLE_ABS * scale):
        return False
    checks = []
    for k in range(max(0, len(d) - 3), len(d) - 1):
        if d[k] <= _SETTLE_ABS * scale:
            checks.append(False)
        else:
            checks.append(d[k + 1] > _CONTRACT_RATIO * d[k])
    return len(checks) > 0 and all(checks)


def boundary_data(phi, dphi, kappa, r0=1e-3, n_samples=6):
    """Boundary quadruple of a function sampled near 0 on both sides.

    Parameters
    ----------
    phi, dphi : callables
        The function and its derivative, defined on both signs of x near 0.
    kappa : float
        Coulomb coupling; the log regularization is undefined at kappa = 0.
    r0, n_samples : float, int
        Extrapolation radii r0 * 2^-j, j = 0 .. n_samples-1 (at least 3).

    Returns
    -------
    BoundaryData with divergence flags set for entries whose sample
    sequence fails to settle.
    """
    if kappa == 0:
        raise ValidationError("log-regularization-undefined", "kappa must be nonzero")
    if n_samples < 3:
        raise ValidationError("need-3-points", "extrapolation needs >= 3 radii")
    radii = r0 * 0.5 ** np.arange(n_samples)

    out = {}
    flags = {}
    for side, sign in (("plus", 1.0), ("minus", -1.0)):
        xs = sign * radii
        ph = np.array([phi(x) for x in xs])
        dp = np.array([dphi(x) for x in xs])
        out[f"phi_{side}"] = _neville_at_zero(radii, ph)
        flags[f"phi_{side}"] = _diverges(ph)
        reg = dp + sign * kappa * ph * np.log(np.abs(kappa) * radii)
        out[f"phitilde_{side}"] = _neville_at_zero(radii, reg)
        flags[f"phitilde_{side}"] = _diverges(reg)
    return BoundaryData(
        phi_plus=out["phi_plus"],
        phi_minus=out["phi_minus"],
        phitilde_plus=out["phitilde_plus"],
        phitilde_minus=out["phitilde_minus"],
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Membership in a self-adjoint realization
# ---------------------------------------------------------------------------

def membership_residual(data: BoundaryData, ext: ExtensionMatrix):
    """Max-norm residual of the extension relation for this boundary data."""
    if data.any_divergent():
        raise ValidationError(
            "not-in-adjoint-domain", f"divergent boundary entries: {data.flags}"
        )
    ext.validate()
    tilde = np.array([data.phitilde_plus, data.phitilde_minus], dtype=complex)
    lateral = np.array([-data.phi_plus, data.phi_minus], dtype=complex)
    I = np.eye(2)
    lhs = (I - ext.U) @ tilde
    rhs = -1j * (I + ext.U) @ lateral
    return float(np.max(np.abs(lhs - rhs)))


def check_extension_membership(data: BoundaryData, ext: ExtensionMatrix, tol=1e-8):
    res = membership_residual(data, ext)
    return res <= tol, res


def solve_boundary_values(ext: ExtensionMatrix, phitilde_plus, phitilde_minus):
    """Lateral limits that place the given regularized derivatives in dom(U).

    Solves the 2x2 relation for (phi(0+), phi(0-)); requires I + U to be
    invertible (true for generic U, fails for U = -I where the lateral
    limits are unconstrained).
    """
    ext.validate()
    I = np.eye(2)
    tilde = np.array([phitilde_plus, phitilde_minus], dtype=complex)
    rhs = (I - ext.U) @ tilde
    lateral = np.linalg.solve(-1j * (I + ext.U), rhs)
    return BoundaryData(
        phi_plus=-lateral[0],
        phi_minus=lateral[1],
        phitilde_plus=phitilde_plus,
        phitilde_minus=phitilde_minus,
        flags={},
    )
