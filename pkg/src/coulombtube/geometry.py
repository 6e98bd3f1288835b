"""Cross-section geometry and the transverse Dirichlet eigenproblem.

A bounded planar section S containing the origin is discretized on a
uniform lattice of spacing h = 1/resolution; nodes strictly inside S are
kept (Dirichlet clipping: every missing neighbor is a zero-value wall one
spacing away).  The 5-point Laplacian on that mesh yields the two lowest
eigenpairs, the positive normalized ground mode u0, and the rotational
coupling constant

    C(S) = integral_S |grad(u0) . Ry|^2 dy,   R = [[0, -1], [1, 0]],

which is zero exactly when u0 is radial (disk) and positive otherwise.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, ValidationError

_BOUNDARY_TOL = 1e-9  # nodes this close to the wall count as outside
_DENSE_CUTOFF = 600   # below this many nodes use a dense eigensolver

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# Cross-section specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossSectionSpec:
    """Parametric planar section; use the class-method constructors."""

    shape: str           # disk | ellipse | rectangle | polygon
    params: tuple
    resolution: int      # lattice points per unit length

    @classmethod
    def disk(cls, radius=1.0, resolution=64):
        return cls("disk", (float(radius),), int(resolution))

    @classmethod
    def ellipse(cls, a, b, resolution=64):
        return cls("ellipse", (float(a), float(b)), int(resolution))

    @classmethod
    def rectangle(cls, w, h, resolution=64):
        return cls("rectangle", (float(w), float(h)), int(resolution))

    @classmethod
    def polygon(cls, vertices, resolution=64):
        verts = tuple((float(x), float(y)) for x, y in vertices)
        return cls("polygon", verts, int(resolution))

    # -- geometric queries --------------------------------------------------

    def bounding_box(self):
        if self.shape == "disk":
            r = self.params[0]
            return (-r, r, -r, r)
        if self.shape == "ellipse":
            a, b = self.params
            return (-a, a, -b, b)
        if self.shape == "rectangle":
            w, h = self.params
            return (-w / 2, w / 2, -h / 2, h / 2)
        vx = np.array([p[0] for p in self.params])
        vy = np.array([p[1] for p in self.params])
        return (vx.min(), vx.max(), vy.min(), vy.max())

    def bounding_radius_sq(self):
        """K = max over the closure of S of |y|^2."""
        if self.shape == "disk":
            return self.params[0] ** 2
        if self.shape == "ellipse":
            return max(self.params) ** 2
        if self.shape == "rectangle":
            w, h = self.params
            return (w / 2) ** 2 + (h / 2) ** 2
        return max(x * x + y * y for x, y in self.params)

    def area(self):
        if self.shape == "disk":
            return np.pi * self.params[0] ** 2
        if self.shape == "ellipse":
            return np.pi * self.params[0] * self.params[1]
        if self.shape == "rectangle":
            return self.params[0] * self.params[1]
        v = np.array(self.params)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def perimeter(self):
        if self.shape == "disk":
            return 2 * np.pi * self.params[0]
        if self.shape == "ellipse":
            a, b = self.params
            # Ramanujan approximation; only used for tolerance budgets
            hh = ((a - b) / (a + b)) ** 2
            return np.pi * (a + b) * (1 + 3 * hh / (10 + np.sqrt(4 - 3 * hh)))
        if self.shape == "rectangle":
            return 2 * (self.params[0] + self.params[1])
        v = np.array(self.params)
        return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    def contains(self, points, tol=0.0):
        """Strict-interior mask for an (n, 2) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "disk":
            r = self.params[0] - tol
            return pts[:, 0] ** 2 + pts[:, 1] ** 2 < r * r
        if self.shape == "ellipse":
            a, b = self.params
            val = (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2
            return val < 1.0 - tol
        if self.shape == "rectangle":
            w, h = self.params
            return (np.abs(pts[:, 0]) < w / 2 - tol) & (np.abs(pts[:, 1]) < h / 2 - tol)
        return _polygon_interior(np.array(self.params), pts, tol)

    def validate(self):
        if self.resolution < 1:
            raise ValidationError("mesh-too-coarse", "resolution must be positive")
        if self.shape == "disk" and self.params[0] <= 0:
            raise ValidationError("origin-exclusion", "disk radius must be positive")
        if self.shape == "ellipse" and min(self.params) <= 0:
            raise ValidationError("origin-exclusion", "ellipse axes must be positive")
        if self.shape == "rectangle" and min(self.params) <= 0:
            raise ValidationError("origin-exclusion", "rectangle sides must be positive")
        if self.shape == "polygon":
            if len(self.params) < 3:
                raise ValidationError("origin-exclusion", "polygon needs >= 3 vertices")
            if not _polygon_is_simple(np.array(self.params)):
                raise ValidationError("origin-exclusion", "polygon is self-intersecting")
        if not bool(self.contains(np.zeros((1, 2)))[0]):
            raise ValidationError("origin-exclusion", "section does not contain the origin")


def _polygon_interior(verts, pts, tol):
    """Even-odd ray casting; points within tol of an edge count as outside."""
    n = len(verts)
    inside = np.zeros(len(pts), dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    near_edge = np.zeros(len(pts), dtype=bool)
    guard = max(tol, _BOUNDARY_TOL)
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
        # distance from point to segment
        dx, dy = x2 - x1, y2 - y1
        L2 = dx * dx + dy * dy
        t = np.clip(((x - x1) * dx + (y - y1) * dy) / L2, 0.0, 1.0)
        d2 = (x - (x1 + t * dx)) ** 2 + (y - (y1 + t * dy)) ** 2
        near_edge |= d2 < guard * guard
    return inside & ~near_edge


def _polygon_is_simple(verts):
    n = len(verts)

    def seg_cross(p, q, r, s):
        d1 = np.cross(q - p, r - p)
        d2 = np.cross(q - p, s - p)
        d3 = np.cross(s - r, p - r)
        d4 = np.cross(s - r, q - r)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            r, s = verts[j], verts[(j + 1) % n]
            if seg_cross(p, q, r, s):
                return False
    return True


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------

@dataclass
class GridMesh2D:
    """Interior nodes of the clipping lattice, row-major by y2 then y1.

    Two quadrature rules are carried.  ``weights`` (h^2 per node) is the
    mass used for normalization and for integrands that vanish at the
    Dirichlet wall.  ``cell_weights`` extends each rim node's cell by h/2
    toward every missing neighbor so the full section is tiled; it is
    needed for integrands that stay O(1) at the wall (the rotational
    coupling), where the bare midpoint rule loses an O(h) strip.
    """

    points: np.ndarray        # (n, 2) node coordinates
    h: float
    weights: np.ndarray       # (n,) midpoint quadrature weights, = h^2 each
    cell_weights: np.ndarray  # (n,) wall-extended cell weights
    lattice: np.ndarray       # (n2, n1) node index or -1
    y1_vals: np.ndarray
    y2_vals: np.ndarray
    spec: CrossSectionSpec | None = None
    wall_theta: dict = field(default_factory=dict)  # direction -> theta in (0,1], 1 where a neighbor exists

    @property
    def n_nodes(self):
        return self.points.shape[0]

    def neighbor_index(self, direction):
        """Node index of the lattice neighbor in +/-y1 or +/-y2, -1 if absent.

        direction: one of "+y1", "-y1", "+y2", "-y2".
        """
        lat = self.lattice
        n2, n1 = lat.shape
        shifted = np.full_like(lat, -1)
        if direction == "+y1":
            shifted[:, :-1] = lat[:, 1:]
        elif direction == "-y1":
            shifted[:, 1:] = lat[:, :-1]
        elif direction == "+y2":
            shifted[:-1, :] = lat[1:, :]
        elif direction == "-y2":
            shifted[1:, :] = lat[:-1, :]
        else:
            raise ValueError(direction)
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        mask = lat >= 0
        out[lat[mask]] = shifted[mask]
        return out


def build_mesh(spec: CrossSectionSpec) -> GridMesh2D:
    """Uniform lattice of spacing 1/resolution clipped to the strict interior."""
    spec.validate()
    h = 1.0 / spec.resolution
    x0, x1, y0, y1 = spec.bounding_box()
    i_lo, i_hi = int(np.floor(x0 / h)) - 1, int(np.ceil(x1 / h)) + 1
    j_lo, j_hi = int(np.floor(y0 / h)) - 1, int(np.ceil(y1 / h)) + 1
    y1_vals = np.arange(i_lo, i_hi + 1) * h
    y2_vals = np.arange(j_lo, j_hi + 1) * h
    Y1, Y2 = np.meshgrid(y1_vals, y2_vals)          # shape (n2, n1)
    pts = np.column_stack([Y1.ravel(), Y2.ravel()])
    mask = spec.contains(pts, tol=_BOUNDARY_TOL).reshape(Y1.shape)

    lattice = np.full(Y1.shape, -1, dtype=np.int64)
    lattice[mask] = np.arange(int(mask.sum()))
    points = pts[mask.ravel()]
    n = points.shape[0]
    if n < 9:
        raise ValidationError("mesh-too-coarse", f"only {n} interior nodes")
    _check_connected(lattice)
    weights = np.full(n, h * h)
    mesh = GridMesh2D(points, h, weights, weights.copy(), lattice, y1_vals, y2_vals, spec)
    extension = np.zeros(n)
    for direction in ("+y1", "-y1", "+y2", "-y2"):
        rim = mesh.neighbor_index(direction) < 0
        theta = np.ones(n)
        theta[rim] = _wall_theta(spec, points[rim], direction, h)
        mesh.wall_theta[direction] = theta
        extension[rim] += theta[rim] - 0.5
    mesh.cell_weights = h * h * (1.0 + extension)
    return mesh


_DIR_VECTORS = {
    "+y1": np.array([1.0, 0.0]),
    "-y1": np.array([-1.0, 0.0]),
    "+y2": np.array([0.0, 1.0]),
    "-y2": np.array([0.0, -1.0]),
}


def _wall_theta(spec, pts, direction, h):
    """Fraction theta in (0, 1] of one spacing from each rim node to the wall.

    The node is strictly inside and its lattice neighbor in ``direction`` is
    outside, so the boundary crossing lies within one spacing.
    """
    if len(pts) == 0:
        return np.zeros(0)
    d = _DIR_VECTORS[direction]
    axis = 0 if d[0] != 0.0 else 1
    sgn = d[axis]
    s = pts[:, axis] * sgn          # signed coordinate along the walk
    q = pts[:, 1 - axis]            # transverse coordinate
    if spec.shape == "disk":
        r = spec.params[0]
        dist = np.sqrt(np.maximum(r * r - q * q, 0.0)) - s
    elif spec.shape == "ellipse":
        a, b = spec.params
        semi = a if axis == 0 else b
        other = b if axis == 0 else a
        dist = semi * np.sqrt(np.maximum(1.0 - (q / other) ** 2, 0.0)) - s
    elif spec.shape == "rectangle":
        wid, hei = spec.params
        half = wid / 2 if axis == 0 else hei / 2
        dist = half - s
    else:
        dist = _polygon_ray_distance(np.array(spec.params), pts, d)
    theta = np.clip(dist / h, 1e-6, 1.0)
    return theta


def _polygon_ray_distance(verts, pts, d):
    """Smallest positive crossing distance from pts along direction d."""
    n = len(verts)
    best = np.full(len(pts), np.inf)
    x, y = pts[:, 0], pts[:, 1]
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        ex, ey = x2 - x1, y2 - y1
        denom = d[0] * (-ey) + d[1] * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((x1 - x) * (-ey) + (y1 - y) * ex) / denom
            u = ((x1 - x) * (-d[1]) + (y1 - y) * d[0]) / denom
        hit = np.isfinite(t) & (t > 0) & (u >= 0.0) & (u <= 1.0)
        best = np.where(hit & (t < best), t, best)
    best[~np.isfinite(best)] = 1.0
    return best


def _check_connected(lattice):
    idx = np.argwhere(lattice >= 0)
    if len(idx) == 0:
        raise ValidationError("mesh-too-coarse", "empty mesh")
    seen = np.zeros(lattice.shape, dtype=bool)
    stack = [tuple(idx[0])]
    seen[tuple(idx[0])] = True
    count = 0
    while stack:
        i, j = stack.pop()
        count += 1
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < lattice.shape[0] and 0 <= b < lattice.shape[1]:
                if lattice[a, b] >= 0 and not seen[a, b]:
                    seen[a, b] = True
                    stack.append((a, b))
    if count != int((lattice >= 0).sum()):
        raise ValidationError("mesh-too-coarse", "mesh is disconnected at this resolution")


# ---------------------------------------------------------------------------
# Transverse operator and modes
# ---------------------------------------------------------------------------

def assemble_transverse_laplacian(mesh: GridMesh2D) -> sp.csr_matrix:
    """5-point Dirichlet Laplacian, exactly symmetric by edge assembly.

    Interior edges carry conductance 1/h^2.  Where the wall cuts an edge at
    fraction theta of a spacing, the Dirichlet leg contributes 1/(theta h^2)
    to the diagonal, so walls that sit exactly on the lattice (theta = 1)
    reproduce the textbook stencil with diagonal 4/h^2.
    """
    n = mesh.n_nodes
    inv_h2 = 1.0 / (mesh.h * mesh.h)
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for direction in ("+y1", "-y1", "+y2", "-y2"):
        nb = mesh.neighbor_index(direction)
        has = nb >= 0
        diag[has] += inv_h2
        rim = np.nonzero(~has)[0]
        diag[rim] += inv_h2 / mesh.wall_theta[direction][rim]
        if direction in ("+y1", "+y2"):
            src = np.nonzero(has)[0]
            dst = nb[src]
            rows.extend([src, dst])
            cols.extend([dst, src])
            vals.extend([np.full(len(src), -inv_h2)] * 2)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return A.tocsr()


@dataclass
class TransverseModes:
    """Two lowest Dirichlet eigenpairs of the section, plus derived constants.

    u0 is L2(S)-normalized via the mesh quadrature and positive on every
    node; u1 is kept for building mode-orthogonal test data.
    """

    lambda0: float
    lambda1: float
    u0: np.ndarray
    u1: np.ndarray
    resolution: int
    C_S: float | None = None
    orthogonality_residual: float | None = None
    eig_residuals: tuple = field(default=())

    def as_record(self):
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "C_S": self.C_S,
            "orthogonality_residual": self.orthogonality_residual,
            "resolution": self.resolution,
        }


def solve_modes(op: sp.csr_matrix, mesh: GridMesh2D, tol=1e-10) -> TransverseModes:
    """Two lowest eigenpairs of the transverse Laplacian.

    Small meshes are solved densely; larger ones by shift-invert Lanczos
    with a fixed start vector so repeated runs are bit-identical.

    Raises
    ------
    SolverError("eigensolver-stall") if the returned pairs fail their
    residual check, SolverError("ground-state-degenerate") if the gap
    lambda1 - lambda0 falls below 1e-8.
    """
    n = op.shape[0]
    if n <= _DENSE_CUTOFF:
        evals, evecs = np.linalg.eigh(op.toarray())
        lam = evals[:2]
        vecs = evecs[:, :2]
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        lam, vecs = spla.eigsh(op, k=2, sigma=0.0, which="LM", v0=v0, tol=tol)
        order = np.argsort(lam)
        lam, vecs = lam[order], vecs[:, order]

    residuals = []
    for i in range(2):
        r = np.linalg.norm(op @ vecs[:, i] - lam[i] * vecs[:, i]) / max(abs(lam[i]), 1.0)
        residuals.append(float(r))
    if max(residuals) > 1e-7:
        raise SolverError("eigensolver-stall", f"eigen residuals {residuals}")
    if lam[1] - lam[0] < 1e-8:
        raise SolverError(
            "ground-state-degenerate",
            f"lambda1 - lambda0 = {lam[1] - lam[0]:.3e} violates simplicity",
        )

    v0_vec = vecs[:, 0]
    if v0_vec.sum() < 0:
        v0_vec = -v0_vec
    u0 = v0_vec / mesh.h          # quadrature normalization: sum u0^2 h^2 = 1
    if u0.min() <= 0:
        raise SolverError("eigensolver-stall", "ground mode is not positive on all nodes")
    u1 = vecs[:, 1] / mesh.h
    return TransverseModes(
        lambda0=float(lam[0]),
        lambda1=float(lam[1]),
        u0=u0,
        u1=u1,
        resolution=mesh.spec.resolution if mesh.spec else 0,
        eig_residuals=tuple(residuals),
    )


def gradient_matrices(mesh: GridMesh2D):
    """Sparse d/dy1 and d/dy2 from a 3-point unequal-spacing stencil.

    Interior nodes see both lattice neighbors (plain centered difference).
    At the rim the missing sample is the Dirichlet wall itself, a zero value
    at the true crossing distance theta*h, which keeps the rim derivative
    consistent on curved sections instead of smearing the wall to the next
    lattice line.
    """
    n = mesh.n_nodes
    h = mesh.h
    mats = []
    for plus, minus in (("+y1", "-y1"), ("+y2", "-y2")):
        nb_p = mesh.neighbor_index(plus)
        nb_m = mesh.neighbor_index(minus)
        dp = np.where(nb_p >= 0, 1.0, mesh.wall_theta[plus]) * h
        dm = np.where(nb_m >= 0, 1.0, mesh.wall_theta[minus]) * h
        # derivative at node: c_m*v(-dm) + c_0*v(0) + c_p*v(+dp); wall samples are 0
        c_m = -dp / (dm * (dm + dp))
        c_0 = (dp - dm) / (dm * dp)
        c_p = dm / (dp * (dm + dp))
        rows = [np.arange(n)]
        cols = [np.arange(n)]
        vals = [c_0]
        i = np.nonzero(nb_p >= 0)[0]
        rows.append(i)
        cols.append(nb_p[i])
        vals.append(c_p[i])
        i = np.nonzero(nb_m >= 0)[0]
        rows.append(i)
        cols.append(nb_m[i])
        vals.append(c_m[i])
        G = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        mats.append(G.tocsr())
    return mats[0], mats[1]


def rotational_derivative_matrix(mesh: GridMesh2D) -> sp.csr_matrix:
    """Sparse operator for (Ry . grad) u = -y2 du/dy1 + y1 du/dy2."""
    Gx, Gy = gradient_matrices(mesh)
    y1 = mesh.points[:, 0]
    y2 = mesh.points[:, 1]
    return sp.diags(-y2) @ Gx + sp.diags(y1) @ Gy


def compute_CS(modes: TransverseModes, mesh: GridMesh2D) -> float:
    """Rotational coupling constant; stored into modes.C_S.

    Uses the wall-extended cell weights: the integrand |grad u0 . Ry|^2
    stays O(1) at the Dirichlet wall, so the bare midpoint rule would lose
    an O(h) rim strip.
    """
    T = rotational_derivative_matrix(mesh)
    g = T @ modes.u0
    c = float(np.sum(mesh.cell_weights * g * g))
    modes.C_S = c
    return c


def check_orthogonality(modes: TransverseModes, mesh: GridMesh2D) -> float:
    """| integral_S u0 (grad u0 . Ry) dy |; zero in the continuum."""
    T = rotational_derivative_matrix(mesh)
    res = abs(float(np.sum(mesh.cell_weights * modes.u0 * (T @ modes.u0))))
    modes.orthogonality_residual = res
    return res


def transverse_modes(spec: CrossSectionSpec):
    """Convenience pipeline: mesh -> operator -> modes -> C(S) & residual."""
    mesh = build_mesh(spec)
    op = assemble_transverse_laplacian(mesh)
    modes = solve_modes(op, mesh)
    compute_CS(modes, mesh)
    check_orthogonality(modes, mesh)
    return mesh, op, modes
