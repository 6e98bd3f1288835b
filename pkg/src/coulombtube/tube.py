"""Rescaled tube operators on the product of an axis grid and a section.

The assembled forms act on the flattened tensor grid (axis index times
transverse index) in the weighted representation: a coefficient vector v
corresponds to nodal values psi = v / sqrt(cell mass), so the Euclidean
inner product of coefficients equals the L2 inner product of functions and
every operator is a plain symmetric sparse matrix.

Forms:

    b(psi) = |D_x psi - a'(x) (Ry.grad) psi|^2
             + (1/eps^2) (|grad_perp psi|^2 - lambda0 |psi|^2)
             - kappa |psi|^2 / sqrt(x^2 + eps^2 y^2)

    a(psi) = same with the regularized tail 1/(sqrt(x^2+eps^2 y^2) + eps^delta)
    adot   = a + (c/eps^delta) |psi|^2

lambda0 is the *discrete* ground eigenvalue of the assembled transverse
block, so the transverse part is exactly nonnegative at the matrix level
and vanishes identically on the ground-mode sector.

Two grid modes: ``full_tensor`` (any section, twist allowed) and
``axisymmetric`` (disk section, zero twist; radial coordinate with weight
2 pi r dr), which block-reduces the disk problem to 2D.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry, kernels
from .errors import SolverError, ValidationError
from .onedim import Grid1D, TwistProfile, _kinetic_entries

_DEFAULT_BUDGET = 3_000_000


# ---------------------------------------------------------------------------
# Specs and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TubeOperatorSpec:
    kappa: float
    eps: float
    cross_section: geometry.CrossSectionSpec
    twist: TwistProfile
    x_length: float = 20.0
    x_spacing: float = 0.05
    delta: float | None = None       # regularization exponent, in (0, 1/2)
    c: float | None = None           # constant shift coefficient
    mode: str = "full_tensor"        # or "axisymmetric"
    budget: int = _DEFAULT_BUDGET

    def validate(self):
        if self.eps <= 0 or self.eps > 1:
            raise ValidationError("delta-range", "eps must lie in (0, 1]")
        if self.delta is not None and not 0.0 < self.delta < 0.5:
            raise ValidationError("delta-range", "requires 0 < delta < 1/2")
        if self.c is not None and self.kappa > 0 and self.c <= self.kappa:
            raise ValidationError("shift-too-small", "attractive case requires c > kappa")
        if self.mode == "axisymmetric":
            if self.cross_section.shape != "disk":
                raise ValidationError("mode-conflict", "axisymmetric mode needs a disk section")
            if self.twist.family != "zero":
                raise ValidationError("mode-conflict", "axisymmetric mode needs zero twist")
        elif self.mode != "full_tensor":
            raise ValidationError("mode-conflict", f"unknown mode {self.mode!r}")


@dataclass
class TubeGrid:
    """Discretized tube: axis grid x transverse section, plus transverse data."""

    axis: Grid1D
    mode: str
    trans_hat: sp.csr_matrix      # transverse operator, weighted representation
    trans_lambda0: float
    trans_lambda1: float
    u0rho: np.ndarray             # unit ground vector (weighted rep)
    u1rho: np.ndarray             # unit second vector (weighted rep)
    ynorm2: np.ndarray            # |y|^2 per transverse node
    trans_mass: np.ndarray        # transverse cell mass per node
    mesh: geometry.GridMesh2D | None = None
    modes: geometry.TransverseModes | None = None
    rot_matrix: sp.csr_matrix | None = None   # (Ry.grad) in nodal values

    @property
    def n_axis(self):
        return self.axis.n

    @property
    def n_trans(self):
        return self.u0rho.shape[0]

    @property
    def n_total(self):
        return self.n_axis * self.n_trans

    def u0_squared_mass(self):
        """u0(y)^2 * mass(y) per node; equals u0rho^2 in the weighted rep."""
        return self.u0rho**2

    def values_to_coeffs(self, psi):
        w = np.sqrt(self.axis.h * self.trans_mass)
        return (psi.reshape(self.n_axis, self.n_trans) * w[None, :]).ravel()

    def coeffs_to_values(self, v):
        w = np.sqrt(self.axis.h * self.trans_mass)
        return (v.reshape(self.n_axis, self.n_trans) / w[None, :]).ravel()


def radial_section(radius, n_r):
    """Staggered radial grid for the axisymmetric disk block.

    Nodes at (j + 1/2) h, natural reflection at r = 0 (correct for the
    rotation-invariant sector), Dirichlet wall at r = radius via the final
    half-edge.  Returns (r, mass, A_hat, lambda0, lambda1, u0rho, u1rho).
    """
    h = radius / n_r
    r = (np.arange(n_r) + 0.5) * h
    mass = 2.0 * np.pi * r * h
    # value-rep form matrix: interior edges + Dirichlet half-edge at the wall
    diag = np.zeros(n_r)
    off = np.zeros(n_r - 1)
    for j in range(n_r - 1):
        cond = 2.0 * np.pi * (r[j] + h / 2) / h
        diag[j] += cond
        diag[j + 1] += cond
        off[j] -= cond
    r_mid = radius - h / 4
    diag[-1] += 2.0 * np.pi * r_mid * 2.0 / h
    Q = sp.diags([off, diag, off], offsets=(-1, 0, 1), format="csr")
    d = 1.0 / np.sqrt(mass)
    A_hat = sp.diags(d) @ Q @ sp.diags(d)
    evals, evecs = np.linalg.eigh(A_hat.toarray())
    u0rho = evecs[:, 0]
    if u0rho.sum() < 0:
        u0rho = -u0rho
    return r, mass, A_hat.tocsr(), float(evals[0]), float(evals[1]), u0rho, evecs[:, 1]


def build_tube_grid(spec: TubeOperatorSpec, n_r=None) -> TubeGrid:
    """Build the discretized tube for a spec; raises "grid-budget" if too big."""
    spec.validate()
    axis = Grid1D.make(spec.x_length, spec.x_spacing)
    if spec.mode == "axisymmetric":
        radius = spec.cross_section.params[0]
        if n_r is None:
            n_r = max(2, int(round(radius * spec.cross_section.resolution)))
        r, mass, A_hat, lam0, lam1, u0rho, u1rho = radial_section(radius, n_r)
        grid = TubeGrid(
            axis=axis, mode=spec.mode, trans_hat=A_hat,
            trans_lambda0=lam0, trans_lambda1=lam1,
            u0rho=u0rho, u1rho=u1rho, ynorm2=r * r, trans_mass=mass,
        )
    else:
        mesh = geometry.build_mesh(spec.cross_section)
        op = geometry.assemble_transverse_laplacian(mesh)
        modes = geometry.solve_modes(op, mesh)
        grid = TubeGrid(
            axis=axis, mode=spec.mode, trans_hat=op,
            trans_lambda0=modes.lambda0, trans_lambda1=modes.lambda1,
            u0rho=modes.u0 * mesh.h, u1rho=modes.u1 * mesh.h,
            ynorm2=np.sum(mesh.points**2, axis=1), trans_mass=mesh.weights.copy(),
            mesh=mesh, modes=modes,
            rot_matrix=geometry.rotational_derivative_matrix(mesh),
        )
    if grid.n_total > spec.budget:
        raise ValidationError(
            "grid-budget", f"{grid.n_total} unknowns exceed budget {spec.budget}"
        )
    return grid


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _centered_x_derivative(axis: Grid1D, dirichlet_origin=False) -> sp.csr_matrix:
    """Centered d/dx with antisymmetric Dirichlet ghosts at the +/-L caps."""
    n = axis.n
    c = 0.5 / axis.h
    D = sp.diags([np.full(n - 1, -c), np.full(n - 1, c)], offsets=(-1, 1)).tolil()
    D[0, 0] += c          # ghost value -v[0] beyond the left cap
    D[-1, -1] -= c
    if dirichlet_origin:
        mid = axis.n_half
        D[mid - 1, mid] = 0.0
        D[mid, mid - 1] = 0.0
        D[mid - 1, mid - 1] -= c
        D[mid, mid] += c
    return D.tocsr()


def _potential_diagonal(spec: TubeOperatorSpec, grid: TubeGrid, reg):
    x = grid.axis.x
    pot = -spec.kappa / (
        np.sqrt(x[:, None] ** 2 + spec.eps**2 * grid.ynorm2[None, :]) + reg
    )
    return pot.ravel()


def _assemble(spec: TubeOperatorSpec, grid: TubeGrid, reg, shift,
              dirichlet_origin=False) -> sp.csr_matrix:
    kdiag, koff = _kinetic_entries(grid.axis, coupled_origin=not dirichlet_origin)
    Kx = sp.diags([koff, kdiag, koff], offsets=(-1, 0, 1), format="csr")
    I_t = sp.identity(grid.n_trans, format="csr")
    I_x = sp.identity(grid.n_axis, format="csr")
    trans = (grid.trans_hat - grid.trans_lambda0 * I_t) / spec.eps**2
    A = sp.kron(Kx, I_t) + sp.kron(I_x, trans)
    A = A + sp.diags(_potential_diagonal(spec, grid, reg) + shift)

    ap = spec.twist.alpha_prime(grid.axis.x)
    if np.any(ap != 0.0):
        if grid.rot_matrix is None or grid.mesh is None:
            raise ValidationError("mode-conflict", "twist requires full_tensor mode")
        # rotational-derivative quadrature uses the wall-extended cells: the
        # integrand |(Ry.grad) psi|^2 is O(1) at the Dirichlet wall
        omega = sp.diags(grid.mesh.cell_weights / grid.mesh.weights)
        T = grid.rot_matrix
        Dx = _centered_x_derivative(grid.axis, dirichlet_origin)
        A = A + sp.kron(sp.diags(ap * ap), (T.T @ omega @ T).tocsr())
        # form value -2 <Dx psi, a' (Ry.grad) psi>, symmetrized
        cross = sp.kron((sp.diags(ap) @ Dx).T.tocsr(), (omega @ T).tocsr())
        A = A - (cross + cross.T)
    return A.tocsr()


def assemble_b_form(spec: TubeOperatorSpec, grid: TubeGrid,
                    dirichlet_origin=False) -> sp.csr_matrix:
    """Unregularized tube form (bare Coulomb tail); meaningful for kappa < 0."""
    spec.validate()
    return _assemble(spec, grid, reg=0.0, shift=0.0, dirichlet_origin=dirichlet_origin)


def assemble_a_forms(spec: TubeOperatorSpec, grid: TubeGrid, dirichlet_origin=False):
    """Regularized pair (A, Adot); Adot - A = (c/eps^delta) I holds exactly.

    With dirichlet_origin=True the assembly decouples the half-lines at
    x = 0, which is exactly the odd-in-x (wall-respecting) sector of the
    coupled operator: the sector whose spectrum survives the confinement
    limit while the even branch collapses.
    """
    spec.validate()
    if spec.delta is None or spec.c is None:
        raise ValidationError("delta-range", "regularized forms need delta and c")
    reg = spec.eps**spec.delta
    A = _assemble(spec, grid, reg=reg, shift=0.0, dirichlet_origin=dirichlet_origin)
    shift = spec.c / spec.eps**spec.delta
    Adot = (A + shift * sp.identity(A.shape[0], format="csr")).tocsr()
    return A, Adot


def effective_potential_1d(spec: TubeOperatorSpec, grid: TubeGrid, xs, reg=None):
    """Section-averaged potential profile V(x) on this grid's transverse data."""
    if reg is None:
        reg = spec.eps**spec.delta if spec.delta is not None else 0.0
    return -spec.kappa * kernels.coulomb_profile(
        xs, grid.ynorm2, grid.u0_squared_mass(), spec.eps, reg
    )


def assemble_t_operator(spec: TubeOperatorSpec, grid: TubeGrid):
    """Effective shifted axis operator -d^2/dx^2 + V(x) + c/eps^delta.

    Shares the grid's transverse data so the tensor and reduced operators
    describe the same discrete section average.
    """
    if spec.delta is None or spec.c is None:
        raise ValidationError("delta-range", "effective operator needs delta and c")
    kdiag, koff = _kinetic_entries(grid.axis, coupled_origin=True)
    V = effective_potential_1d(spec, grid, grid.axis.x)
    diag = kdiag + V + spec.c / spec.eps**spec.delta
    return diag, koff


# ---------------------------------------------------------------------------
# L-sector projection
# ---------------------------------------------------------------------------

def project_onto_L(psi, grid: TubeGrid):
    """Split a coefficient vector into (w, eta): psi = w x u0 + eta.

    w is the 1D coefficient vector of the ground-sector component; eta is
    u0-orthogonal on every axis slice.  Exact Pythagoras by construction.
    """
    Psi = psi.reshape(grid.n_axis, grid.n_trans)
    w = Psi @ grid.u0rho
    eta = Psi - np.outer(w, grid.u0rho)
    return w, eta.ravel()


def embed_from_L(w, grid: TubeGrid):
    """Inverse of the L-projection on the ground sector: w -> w x u0."""
    return np.outer(w, grid.u0rho).ravel()


def slice_orthogonality(eta, grid: TubeGrid):
    """Max slice inner product with u0, relative to |eta|; 0 for eta in Lperp."""
    E = eta.reshape(grid.n_axis, grid.n_trans)
    per_slice = E @ grid.u0rho
    nrm = np.linalg.norm(eta)
    return float(np.max(np.abs(per_slice)) / nrm) if nrm > 0 else 0.0


def cross_term_check(w, eta, spec: TubeOperatorSpec, grid: TubeGrid, tol=1e-8):
    """Coupling integral between the ground sector and its complement.

        m = -kappa * integral (w u0) eta / (sqrt(x^2+eps^2 y^2) + eps^delta)

    Returns (m, bound_ratio) with bound_ratio = |m| / (eps^(1-delta/2) sqrt(t adot)),
    the epsilon-normalized Cauchy-Schwarz ratio whose boundedness across a
    ladder witnesses the vanishing of the coupling.
    """
    if slice_orthogonality(eta, grid) > tol:
        raise ValidationError("not-orthogonal", "eta has ground-sector content")
    if spec.kappa == 0:
        return 0.0, 0.0
    psi_w = embed_from_L(w, grid)
    reg = spec.eps**spec.delta
    denom = (
        np.sqrt(grid.axis.x[:, None] ** 2 + spec.eps**2 * grid.ynorm2[None, :]) + reg
    ).ravel()
    m = -spec.kappa * float(np.dot(psi_w / denom, eta))
    tdiag, toff = assemble_t_operator(spec, grid)
    t_val = float(np.dot(w, tdiag * w) + 2.0 * np.dot(w[:-1] * toff, w[1:]))
    _, Adot = assemble_a_forms(spec, grid)
    adot_val = float(eta @ (Adot @ eta))
    if t_val <= 0 or adot_val <= 0:
        return m, np.inf
    ratio = abs(m) / (spec.eps ** (1.0 - spec.delta / 2.0) * np.sqrt(t_val * adot_val))
    return m, ratio


# ---------------------------------------------------------------------------
# Resolvents and eigenvalues
# ---------------------------------------------------------------------------

@dataclass
class ResolventSolve:
    z: complex
    psi: np.ndarray
    iterations: int
    residual: float
    method: str


class FactorizedResolvent:
    """(A - z)^{-1} through a cached sparse LU factorization.

    For real symmetric A the adjoint resolvent is the resolvent at the
    conjugate shift, available from the same factorization.
    """

    def __init__(self, A, z):
        self.z = complex(z)
        n = A.shape[0]
        if self.z.imag != 0.0 or np.iscomplexobj(A.data):
            M = (A.astype(complex) - self.z * sp.identity(n, format="csr")).tocsc()
        else:
            M = (A - self.z.real * sp.identity(n, format="csr")).tocsc()
        self.lu = spla.splu(M)
        self.complex = np.iscomplexobj(M.data)

    def solve(self, b):
        return self.lu.solve(b.astype(complex) if self.complex else b)

    def solve_adjoint(self, b):
        if not self.complex:
            return self.lu.solve(b)
        return np.conj(self.lu.solve(np.conj(b)))


def apply_resolvent(A, z, theta, rtol=1e-9, method="auto", maxiter=5000,
                    grid: TubeGrid = None, eps=None):
    """Solve (A - z) psi = theta and verify the residual against rtol.

    method "cg" runs preconditioned conjugate gradients (valid when A - z
    is positive definite, i.e. real z below the spectrum); "direct"
    factorizes; "auto" picks CG for real nonpositive shifts when the grid
    is supplied (the separable transverse-diagonalization preconditioner
    tames the 1/eps^2 stiffness) and the factorization otherwise.
    """
    n = A.shape[0]
    z = complex(z)
    theta = np.asarray(theta)
    spd_shift = np.isrealobj(theta) and z.imag == 0.0 and z.real <= 0
    if method == "auto":
        method = "cg" if (spd_shift and grid is not None and eps is not None) else "direct"
    if method == "cg":
        M = (A - z.real * sp.identity(n, format="csr")).tocsr()
        prec = None
        if grid is not None and eps is not None:
            prec = SeparablePreconditioner(grid, eps, -z.real).as_linear_operator()
        hist = []

        def callback(xk):
            hist.append(float(np.linalg.norm(M @ xk - theta)))

        psi, info = spla.cg(M, theta, rtol=rtol * 0.1, atol=0.0, maxiter=maxiter,
                            M=prec, callback=callback)
        if info != 0:
            raise SolverError("linear-solve-stall", f"CG info={info}", history=hist)
        iterations = len(hist)
    else:
        psi = FactorizedResolvent(A, z).solve(theta)
        iterations = 1
    residual = float(np.linalg.norm(A @ psi - z * psi - theta) / np.linalg.norm(theta))
    if residual > rtol:
        raise SolverError(
            "linear-solve-stall", f"residual {residual:.2e} exceeds rtol {rtol:.2e}"
        )
    return ResolventSolve(z=z, psi=psi, iterations=iterations, residual=residual,
                          method=method)


class SeparablePreconditioner:
    """Exact inverse of the twist-free separable part of a tube operator.

    Diagonalizing the transverse block turns the axis-kinetic plus
    transverse-gap plus constant-shift operator into independent
    tridiagonal systems per transverse eigenvalue, solved by a vectorized
    Thomas sweep.  Used to precondition solves and eigensolves of the full
    operator (potential and twist are relatively bounded perturbations).

    Transverse diagonalization is dense for small sections; full-rectangle
    lattices (rectangle section aligned with the grid) use the sine
    transform instead, which scales to millions of unknowns.
    """

    def __init__(self, grid: TubeGrid, eps, shift, dirichlet_origin=False):
        self.grid = grid
        self.kdiag, self.koff = _kinetic_entries(
            grid.axis, coupled_origin=not dirichlet_origin
        )
        self._dst_shape = _full_rectangle_shape(grid)
        if self._dst_shape is not None:
            n2, n1 = self._dst_shape
            h = grid.mesh.h
            mu1 = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, n1 + 1) / (n1 + 1))) / h**2
            mu2 = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, n2 + 1) / (n2 + 1))) / h**2
            evals = (mu2[:, None] + mu1[None, :]).ravel()
            self.Phi = None
        else:
            evals, evecs = np.linalg.eigh(grid.trans_hat.toarray())
            self.Phi = evecs
        self.mu = (evals - grid.trans_lambda0) / eps**2 + shift

    def _to_modes(self, V):
        if self.Phi is not None:
            return V @ self.Phi
        from scipy.fft import dstn

        n2, n1 = self._dst_shape
        W = V.reshape(-1, n2, n1)
        return dstn(W, type=1, axes=(1, 2), norm="ortho").reshape(V.shape)

    def _from_modes(self, V):
        if self.Phi is not None:
            return V @ self.Phi.T
        return self._to_modes(V)    # DST-I is its own inverse in ortho norm

    def solve(self, v):
        g = self.grid
        V = self._to_modes(v.reshape(g.n_axis, g.n_trans))
        X = _thomas_many(self.kdiag, self.koff, self.mu, V)
        return self._from_modes(X).ravel()

    def as_linear_operator(self):
        n = self.grid.n_total
        return spla.LinearOperator((n, n), matvec=self.solve)


def _full_rectangle_shape(grid: TubeGrid):
    """(n2, n1) when the section mesh is a complete rectangular lattice
    whose walls sit exactly on the lattice (all cut fractions equal 1)."""
    if grid.mesh is None:
        return None
    for theta in grid.mesh.wall_theta.values():
        if np.any(np.abs(theta - 1.0) > 1e-12):
            return None
    lat = grid.mesh.lattice
    rows = np.nonzero((lat >= 0).any(axis=1))[0]
    cols = np.nonzero((lat >= 0).any(axis=0))[0]
    block = lat[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    if block.size == grid.n_trans and (block >= 0).all():
        expected = np.arange(grid.n_trans).reshape(block.shape)
        if np.array_equal(block, expected):
            return block.shape
    return None


def _thomas_many(kdiag, koff, shifts, B):
    """Solve (tridiag(koff, kdiag, koff) + shifts[k] I) x_k = B[:, k] for all k."""
    n, m = B.shape
    dtype = np.result_type(B.dtype, np.asarray(shifts).dtype, kdiag.dtype)
    d = kdiag[:, None] + np.asarray(shifts)[None, :]
    cp = np.empty((n - 1, m), dtype=dtype)
    bp = np.empty((n, m), dtype=dtype)
    w = d[0].astype(dtype)
    cp[0] = koff[0] / w
    bp[0] = B[0] / w
    for i in range(1, n):
        w = d[i] - koff[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = koff[i] / w
        bp[i] = (B[i] - koff[i - 1] * bp[i - 1]) / w
    x = np.empty((n, m), dtype=dtype)
    x[-1] = bp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = bp[i] - cp[i] * x[i + 1]
    return x


def lowest_eigenvalue(A, grid: TubeGrid = None, eps=None, shift_hint=None, k=1,
                      seed=1234, tol=1e-9, maxiter=400, dirichlet_origin=False):
    """Smallest eigenvalue(s) of a positive tube operator.

    Moderate problems go through shift-invert Lanczos; large tensor grids
    use LOBPCG with the separable preconditioner (needs grid and eps).
    """
    n = A.shape[0]
    if n <= 400_000 or grid is None:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        vals = spla.eigsh(A, k=k, sigma=0.0, which="LM", v0=v0,
                          return_eigenvectors=False, tol=tol)
        return np.sort(vals)
    rng = np.random.default_rng(seed)
    prec = SeparablePreconditioner(grid, eps, shift_hint if shift_hint else 1.0,
                                   dirichlet_origin=dirichlet_origin)
    X = rng.standard_normal((n, max(k, 2)))
    X[:, 0] = embed_from_L(np.exp(-np.abs(grid.axis.x) / 2.0), grid)
    vals, _ = spla.lobpcg(
        A, X, M=prec.as_linear_operator(), largest=False, tol=tol,
        maxiter=maxiter,
    )
    return np.sort(vals)[:k]
