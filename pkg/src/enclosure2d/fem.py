"""P1 Galerkin solver for div((sigma - i omega epsilon) grad u) = 0 and the
boundary-operator matrices built from it.

The voltage-to-current boundary operator is realized as the bilinear pairing

    <L f, g> = integral over the domain of (sigma - i omega epsilon) grad u_f . grad v_g

with u_f the discrete solution for trace f and v_g any discrete extension of
g; at the Galerkin level the value is extension-independent up to the linear
solver residual.  One sparse factorization of the interior block is shared by
all right-hand sides, so assembling a full operator matrix costs one
factorization plus one back-substitution per basis function.

A separated-variables oracle for the concentric two-layer disk provides the
reference eigenvalues used to validate the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admittivity import AdmittivityField, complex_admittivity, sym_eig_bounds
from .mesh import Mesh

_SOLVER_TOL = 1e-10


class SolverError(RuntimeError):
    """Singular or ill-conditioned system, or an invalid coefficient field."""


# ---------------------------------------------------------------------------
# Boundary bases


@dataclass(frozen=True)
class BoundaryBasis:
    """Trace discretization on the boundary loop.

    kind "nodal": one hat function per boundary node (coefficients are nodal
    values).  kind "fourier": interpolated modes exp(i n theta), |n| <= N,
    ordered n = -N..N.  ``thetas`` are the polar angles of the boundary nodes
    and ``radius`` the circle they sit on, kept here so that traces can be
    expanded and probes evaluated without access to the mesh interior.
    """

    kind: str
    thetas: np.ndarray
    n_modes: int = 0
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("nodal", "fourier"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "fourier" and self.n_modes < 1:
            raise ValueError("fourier basis needs N >= 1")
        np.asarray(self.thetas).setflags(write=False)

    @property
    def size(self) -> int:
        return 2 * self.n_modes + 1 if self.kind == "fourier" else len(self.thetas)

    @property
    def points(self) -> np.ndarray:
        """Boundary node coordinates on the domain circle."""
        return self.radius * np.stack([np.cos(self.thetas), np.sin(self.thetas)], axis=1)

    @property
    def mode_numbers(self) -> np.ndarray:
        if self.kind != "fourier":
            raise ValueError("mode numbers only exist for the fourier basis")
        return np.arange(-self.n_modes, self.n_modes + 1)

    def nodal_matrix(self) -> np.ndarray:
        """(n_boundary_nodes, size) matrix of basis-function nodal values."""
        if self.kind == "nodal":
            return np.eye(len(self.thetas), dtype=complex)
        return np.exp(1j * np.outer(self.thetas, self.mode_numbers))

    def expand(self, values: np.ndarray) -> tuple[np.ndarray, float]:
        """Least-squares coefficients of boundary-node values in this basis,
        with the relative interpolation residual."""
        v = np.asarray(values, dtype=complex)
        if self.kind == "nodal":
            return v.copy(), 0.0
        p = self.nodal_matrix()
        coef, *_ = np.linalg.lstsq(p, v, rcond=None)
        res = np.linalg.norm(p @ coef - v) / max(np.linalg.norm(v), 1e-300)
        return coef, float(res)

    def conjugate_coefficients(self, coef: np.ndarray) -> np.ndarray:
        """Coefficients of the complex-conjugate trace: nodal conjugates, or
        conj(c_{-n}) at mode n for the fourier basis."""
        c = np.asarray(coef, dtype=complex)
        if self.kind == "nodal":
            return np.conj(c)
        return np.conj(c[::-1])


def fourier_basis_for_mesh(mesh: Mesh, n_modes: int) -> BoundaryBasis:
    nb = len(mesh.boundary_loop)
    if n_modes > nb // 8:
        raise ValueError(f"N = {n_modes} exceeds the aliasing limit {nb // 8} "
                         f"for {nb} boundary nodes")
    return BoundaryBasis(kind="fourier", thetas=_boundary_thetas(mesh),
                         n_modes=n_modes, radius=mesh.domain_radius)


def nodal_basis_for_mesh(mesh: Mesh) -> BoundaryBasis:
    return BoundaryBasis(kind="nodal", thetas=_boundary_thetas(mesh),
                         radius=mesh.domain_radius)


def _boundary_thetas(mesh: Mesh) -> np.ndarray:
    p = mesh.boundary_points
    return np.arctan2(p[:, 1], p[:, 0])


def fourier_trace(mesh: Mesh, n: int) -> np.ndarray:
    """Nodal values of exp(i n theta) on the boundary loop."""
    return np.exp(1j * n * _boundary_thetas(mesh))


# ---------------------------------------------------------------------------
# Assembly and Dirichlet solves


@dataclass
class SolveResult:
    """Nodal solution with its relative interior residual and the factorization
    used (reusable across further right-hand sides)."""

    u: np.ndarray
    residual: float
    system: "DirichletSystem"


class DirichletSystem:
    """Assembled P1 stiffness with the interior block factorized once.

    The coefficient is a per-triangle complex symmetric 2x2 matrix; the real
    part must be uniformly positive definite.
    """

    def __init__(self, mesh: Mesh, gamma: np.ndarray):
        gamma = np.asarray(gamma, dtype=complex)
        if gamma.shape != (mesh.n_triangles, 2, 2):
            raise SolverError("gamma must have shape (n_triangles, 2, 2)")
        lo, _ = sym_eig_bounds(gamma.real)
        if lo.min() <= 0:
            raise SolverError("real part of the coefficient must be positive definite")
        self.mesh = mesh
        self.stiffness = _assemble_stiffness(mesh, gamma)
        n = mesh.n_vertices
        self.boundary = np.asarray(mesh.boundary_loop)
        mask = np.ones(n, dtype=bool)
        mask[self.boundary] = False
        self.interior = np.flatnonzero(mask)
        k = self.stiffness.tocsr()
        self.k_ii = k[self.interior][:, self.interior].tocsc()
        self.k_ib = k[self.interior][:, self.boundary].tocsc()
        self._iterative = False
        try:
            self._lu = spla.splu(self.k_ii)
        except MemoryError:
            # diagonal-preconditioned iterative fallback for memory-bound cases
            self._iterative = True
            self._diag_inv = 1.0 / self.k_ii.diagonal()
        except RuntimeError as exc:
            raise SolverError(f"interior block factorization failed: {exc}") from exc

    def _solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        if not self._iterative:
            return self._lu.solve(rhs)
        precond = spla.LinearOperator(self.k_ii.shape, matvec=lambda x: self._diag_inv * x)
        if rhs.ndim == 1:
            cols = [rhs]
        else:
            cols = [rhs[:, j] for j in range(rhs.shape[1])]
        out = []
        for col in cols:
            x, info = spla.gmres(self.k_ii, col, rtol=1e-10, M=precond, maxiter=5000)
            if info != 0:
                raise SolverError(f"iterative solve stalled (info={info})")
            out.append(x)
        return out[0] if rhs.ndim == 1 else np.stack(out, axis=1)

    def solve(self, trace: np.ndarray) -> SolveResult:
        """Solution with the given boundary-node values (ordered as the loop)."""
        trace = np.asarray(trace, dtype=complex)
        if trace.shape != (len(self.boundary),):
            raise SolverError("trace length must match the boundary loop")
        rhs = -(self.k_ib @ trace)
        ui = self._solve_interior(rhs)
        res = np.linalg.norm(self.k_ii @ ui - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > 1e-6:
            raise SolverError(f"direct solve residual {res:.3g}; system may be singular")
        u = np.zeros(self.mesh.n_vertices, dtype=complex)
        u[self.boundary] = trace
        u[self.interior] = ui
        return SolveResult(u=u, residual=float(res), system=self)

    def solve_block(self, traces: np.ndarray) -> np.ndarray:
        """Solutions for several traces at once; returns (n_vertices, k)."""
        traces = np.asarray(traces, dtype=complex)
        rhs = -(self.k_ib @ traces)
        ui = self._solve_interior(rhs)
        u = np.zeros((self.mesh.n_vertices, traces.shape[1]), dtype=complex)
        u[self.boundary] = traces
        u[self.interior] = ui
        return u

    def pairing(self, u_full: np.ndarray, g_trace: np.ndarray) -> complex:
        """Bilinear boundary pairing <L f, g> evaluated with the zero extension
        of g (extension-independent up to the solve residual)."""
        r = self.stiffness @ u_full
        return complex(np.dot(np.asarray(g_trace, dtype=complex), r[self.boundary]))

    def energy(self, u_full: np.ndarray) -> float:
        """Dirichlet energy of |grad u| (unit coefficient)."""
        g = element_gradients(self.mesh, u_full)
        areas = self.mesh.triangle_areas()
        return float(np.sum(areas * (np.abs(g) ** 2).sum(axis=1)))


def _assemble_stiffness(mesh: Mesh, gamma: np.ndarray) -> sp.csr_matrix:
    p = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    x, y = p[..., 0], p[..., 1]
    bvec = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    cvec = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (bvec[:, 0] * cvec[:, 1] - bvec[:, 1] * cvec[:, 0])
    # grad(lambda_i) = (b_i, c_i) / (2A); constant per triangle
    grads = np.stack([bvec, cvec], axis=2) / (2.0 * area)[:, None, None]
    ke = np.einsum("tik,tkl,tjl->tij", grads, gamma, grads) * area[:, None, None]
    idx = mesh.triangles
    rows = np.repeat(idx, 3, axis=1).ravel()
    cols = np.tile(idx, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def element_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Per-triangle constant gradient of a P1 function; (nt, 2) complex."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    bvec = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    cvec = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (bvec[:, 0] * cvec[:, 1] - bvec[:, 1] * cvec[:, 0])
    uv = np.asarray(u, dtype=complex)[mesh.triangles]
    gx = (uv * bvec).sum(axis=1) / (2.0 * area)
    gy = (uv * cvec).sum(axis=1) / (2.0 * area)
    return np.stack([gx, gy], axis=1)


def solve_dirichlet(mesh: Mesh, field: AdmittivityField, trace: np.ndarray) -> SolveResult:
    """P1 solution of the admittivity equation with the given boundary values."""
    return DirichletSystem(mesh, complex_admittivity(field)).solve(trace)


def dtn_pairing(mesh: Mesh, field: AdmittivityField,
                f_trace: np.ndarray, g_trace: np.ndarray,
                system: Optional[DirichletSystem] = None) -> complex:
    """<L f, g> for boundary-node traces f and g."""
    sys_ = system or DirichletSystem(mesh, complex_admittivity(field))
    res = sys_.solve(np.asarray(f_trace, dtype=complex))
    return sys_.pairing(res.u, g_trace)


# ---------------------------------------------------------------------------
# Boundary-operator matrices


@dataclass(frozen=True)
class DtNMatrix:
    """Bilinear boundary-operator matrix B[j, k] = <L phi_j, phi_k> (no
    conjugation; complex symmetric for symmetric coefficient fields)."""

    basis: BoundaryBasis
    omega: float
    matrix: np.ndarray
    mesh_h: float
    solver_tol: float = _SOLVER_TOL

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def symmetry_defect(self) -> float:
        b = self.matrix
        return float(np.linalg.norm(b - b.T) / max(np.linalg.norm(b), 1e-300))


def assemble_dtn_matrix(mesh: Mesh, field: AdmittivityField,
                        basis: BoundaryBasis,
                        system: Optional[DirichletSystem] = None,
                        block: int = 64) -> DtNMatrix:
    """Assemble B over the basis, reusing one factorization for all columns."""
    if len(basis.thetas) != len(mesh.boundary_loop):
        raise SolverError("basis does not match the mesh boundary loop")
    sys_ = system or DirichletSystem(mesh, complex_admittivity(field))
    p = basis.nodal_matrix()                       # (nb, m)
    m = p.shape[1]
    b = np.empty((m, m), dtype=complex)
    k = sys_.stiffness
    bnd = sys_.boundary
    for start in range(0, m, block):
        cols = slice(start, min(start + block, m))
        u = sys_.solve_block(p[:, cols])
        r = (k @ u)[bnd]                           # (nb, nblk)
        b[cols, :] = r.T @ p                       # row j: <L phi_j, phi_k> over k
    return DtNMatrix(basis=basis, omega=field.omega, matrix=b, mesh_h=mesh.h)


def analytic_two_layer_dtn(rho: float, k: complex, n: int) -> complex:
    """Boundary-operator eigenvalue of the concentric two-layer unit disk.

    Separation of variables with contrast k inside radius rho gives
    lambda_n = |n| (1 - mu rho^(2|n|)) / (1 + mu rho^(2|n|)), mu = (1-k)/(1+k).
    """
    if not (0 < rho < 1):
        raise ValueError("rho must lie in (0, 1)")
    if k == -1:
        raise ValueError("contrast k = -1 is singular")
    n = abs(int(n))
    if n == 0:
        return 0.0 + 0.0j
    mu = (1.0 - k) / (1.0 + k)
    q = mu * rho ** (2 * n)
    return n * (1.0 - q) / (1.0 + q)


# ---------------------------------------------------------------------------
# Quadratic-form utilities


DtnPair = tuple[DtNMatrix, DtNMatrix]


def gap_matrix(pair: DtnPair) -> np.ndarray:
    """Difference matrix of a (perturbed, background) operator pair."""
    b1, b0 = pair
    if b1.basis.kind != b0.basis.kind or b1.basis.size != b0.basis.size:
        raise SolverError("operator pair bases do not match")
    return b1.matrix - b0.matrix


def quadratic_gap(gap: np.ndarray, basis: BoundaryBasis, coef: np.ndarray) -> float:
    """Re <(L1 - L0) f, conj(f)> from expansion coefficients of f."""
    c = np.asarray(coef, dtype=complex)
    cc = basis.conjugate_coefficients(c)
    return float(np.real(np.dot(c, gap @ cc)))


def energy_gap(data: Union[DtnPair, tuple[Mesh, AdmittivityField]],
               f: np.ndarray) -> float:
    """Re <(L_{sigma,eps} - L_{1,0}) f, conj(f)>.

    ``data`` is either an assembled (perturbed, background) matrix pair with
    ``f`` given as expansion coefficients, or (mesh, field) with ``f`` given as
    boundary-node values, in which case both operators are applied directly.
    """
    first = data[0]
    if isinstance(first, DtNMatrix):
        pair: DtnPair = data  # type: ignore[assignment]
        return quadratic_gap(gap_matrix(pair), pair[0].basis, f)
    mesh, field = data  # type: ignore[misc]
    f = np.asarray(f, dtype=complex)
    v1 = dtn_pairing(mesh, field, f, np.conj(f))
    bg = AdmittivityField(mesh=mesh, a=np.zeros((mesh.n_triangles, 2, 2)),
                          b=np.zeros((mesh.n_triangles, 2, 2)), omega=field.omega)
    v0 = dtn_pairing(mesh, bg, f, np.conj(f))
    return float(np.real(v1 - v0))


# ---------------------------------------------------------------------------
# Integral-inequality check for two coefficient pairs


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    gap: float
    rhs: float
    slack: float
    passed: bool


def prop21_check(field1: AdmittivityField, field2: AdmittivityField,
                 omega: float, f_trace: np.ndarray,
                 slack_factor: float = 5.0,
                 systems: Optional[tuple[DirichletSystem, DirichletSystem]] = None
                 ) -> InequalityReport:
    """Sandwich check LHS <= Re <(L2 - L1) f, conj f> <= RHS with

      LHS = int (s1 + i w e1) { (s1 + w^2 e1 s1^-1 e1)^-1 - s2^-1 } (s1 - i w e1)
            grad u1 . conj(grad u1)
      RHS = int { (s2 + w^2 e2 s2^-1 e2) - s1 } grad u1 . conj(grad u1)

    evaluated on the discrete solution u1.  The allowed slack is
    ``slack_factor`` times an a-priori first-order energy-error bound h * E(u1);
    at the Galerkin level the inequalities hold to solver precision, so the
    slack only guards against roundoff on near-equality cases.
    """
    mesh = field1.mesh
    if field2.mesh is not mesh:
        raise SolverError("fields must share a mesh")
    if abs(field1.omega - omega) > 0 or abs(field2.omega - omega) > 0:
        raise SolverError("omega must match both fields")
    f_trace = np.asarray(f_trace, dtype=complex)

    if systems is None:
        sys1 = DirichletSystem(mesh, complex_admittivity(field1))
        sys2 = DirichletSystem(mesh, complex_admittivity(field2))
    else:
        sys1, sys2 = systems
    u1 = sys1.solve(f_trace).u
    g1 = element_gradients(mesh, u1)
    areas = mesh.triangle_areas()

    s1, e1 = field1.sigma(), field1.epsilon()
    s2, e2 = field2.sigma(), field2.epsilon()
    s1_inv = np.linalg.inv(s1)
    s2_inv = np.linalg.inv(s2)
    t1 = s1 + omega ** 2 * np.einsum("tij,tjk,tkl->til", e1, s1_inv, e1)
    mid = np.linalg.inv(t1) - s2_inv
    a_plus = s1 + 1j * omega * e1
    a_minus = s1 - 1j * omega * e1
    m_lhs = np.einsum("tij,tjk,tkl->til", a_plus, mid.astype(complex), a_minus)
    m_rhs = (s2 + omega ** 2 * np.einsum("tij,tjk,tkl->til", e2, s2_inv, e2) - s1)

    def form(mat, g):
        return float(np.real(np.sum(areas * np.einsum(
            "ti,tij,tj->t", np.conj(g), mat.astype(complex), g))))

    lhs = form(m_lhs, g1)
    rhs = form(m_rhs, g1)

    conj_f = np.conj(f_trace)
    gap = float(np.real(sys2.pairing(sys2.solve(f_trace).u, conj_f)
                        - sys1.pairing(u1, conj_f)))
    # the discrete inequalities are exact, so the slack only needs to cover
    # solver roundoff; it is still capped by the first-order energy bound
    energy = sys1.energy(u1)
    slack = slack_factor * min(mesh.h * energy,
                               1e-9 * (1.0 + abs(lhs) + abs(rhs) + energy))
    passed = (lhs <= gap + slack) and (gap <= rhs + slack)
    return InequalityReport(lhs=lhs, gap=gap, rhs=rhs, slack=slack, passed=passed)


# ---------------------------------------------------------------------------
# Operator-matrix exchange format


def write_dtn(dtn: DtNMatrix, path, provenance: Optional[dict] = None) -> None:
    """Header (basis kind, size descriptor, omega, mesh h), node angles, then
    row-major 're im' entries."""
    with open(path, "w") as f:
        f.write("# enclosure2d dtn v1\n")
        for key, val in (provenance or {}).items():
            f.write(f"# {key}: {val}\n")
        n_param = dtn.basis.n_modes if dtn.basis.kind == "fourier" else dtn.basis.size
        f.write(f"{dtn.basis.kind} {n_param} {dtn.omega:.17g} {dtn.mesh_h:.17g} "
                f"{len(dtn.basis.thetas)} {dtn.basis.radius:.17g}\n")
        f.write(" ".join(f"{t:.17g}" for t in dtn.basis.thetas) + "\n")
        for row in dtn.matrix:
            f.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


def read_dtn(path) -> DtNMatrix:
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    kind, n_param, omega, h, n_thetas, radius = lines[0].split()
    thetas = np.array([float(x) for x in lines[1].split()])
    if len(thetas) != int(n_thetas):
        raise SolverError("corrupt operator file: node angle count mismatch")
    basis = BoundaryBasis(kind=kind, thetas=thetas,
                          n_modes=int(n_param) if kind == "fourier" else 0,
                          radius=float(radius))
    rows = []
    for ln in lines[2:2 + basis.size]:
        vals = np.array([float(x) for x in ln.split()])
        rows.append(vals[0::2] + 1j * vals[1::2])
    return DtNMatrix(basis=basis, omega=float(omega), matrix=np.array(rows),
                     mesh_h=float(h))
