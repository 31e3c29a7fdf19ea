"""
Ultra-weak DPG discretization: elementwise assembly, static condensation,
global solve, and the built-in residual error estimator.

The trial space couples elementwise L2 fields with skeleton traces,

    u     elementwise polynomials of degree p (p+1 in the augmented space),
    sigma elementwise polynomial vector fields of degree p,
    uhat  the trace of globally continuous degree-(p+1) polynomials,
    shat  a single-valued normal flux, one degree-p polynomial per edge,

and is tested against the broken space of degree-(p + delta_p) scalar and
vector polynomials per element (delta_p = 2 by default).  The bilinear
form moves all derivatives onto the test pair (v, tau):

    reaction-diffusion:  (u, div tau + v) + (sigma, tau + grad v)
                         - <uhat, tau.n> - <shat, v>
    poisson:             (u, div tau) + (sigma, tau + grad v)
                         - <uhat, tau.n> - <shat, v>

Because the test space has no continuity across elements, the test-space
Gram matrix is block diagonal and the mixed saddle-point system can be
condensed element by element to a symmetric positive definite system in
the trial unknowns:

    S = sum_T  B_T' G_T^{-1} B_T,      rhs = sum_T B_T' G_T^{-1} F_T.

The elementwise residual representer eps_T = G_T^{-1} (F_T - B_T x_T)
recovered after the solve carries the localized error estimator
eta(T)^2 = eps_T' G_T eps_T.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .spaces import (REFERENCE_VERTICES, edge_basis, edge_bubbles,
                     edge_quadrature, scalar_basis, triangle_quadrature)

REACTION_DIFFUSION = "reaction-diffusion"
POISSON = "poisson"

PROBLEM_KINDS = (REACTION_DIFFUSION, POISSON)


class SolverError(RuntimeError):
    """Linear solver did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class TrialSpace:
    """Polynomial order of the trial space.

    The scalar field u is sought at degree p, or p+1 when augmented;
    fluxes and traces stay at order p either way.
    """
    p: int
    augmented: bool = False

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("polynomial order p must be >= 0")

    @property
    def u_degree(self):
        return self.p + 1 if self.augmented else self.p


def _dim(degree):
    return (degree + 1) * (degree + 2) // 2


class DofMap:
    """Global numbering of trial unknowns on a mesh.

    Layout: element-interior blocks [u | sigma_x | sigma_y] for every
    element first, then one uhat dof per mesh vertex, then p uhat
    edge-interior dofs per edge, then p+1 flux dofs per edge.  Boundary
    vertex and boundary edge-interior uhat dofs are constrained by the
    Dirichlet data (zero in the homogeneous case); everything else is
    free.  num_free is the reported dof count D_h.
    """

    def __init__(self, mesh, trial):
        p = trial.p
        self.mesh = mesh
        self.trial = trial
        self.n_u = _dim(trial.u_degree)
        self.n_s = _dim(p)
        self.k_int = self.n_u + 2 * self.n_s
        nt, nv, ne = mesh.num_triangles, mesh.num_vertices, mesh.num_edges

        self.interior_count = nt * self.k_int
        self.vertex_offset = self.interior_count
        self.bubble_offset = self.vertex_offset + nv
        self.flux_offset = self.bubble_offset + ne * p
        self.n_total = self.flux_offset + ne * (p + 1)

        free = np.ones(self.n_total, dtype=bool)
        free[self.vertex_offset + np.flatnonzero(mesh.boundary_vertex)] = False
        if p > 0:
            bdry = np.flatnonzero(mesh.boundary_edge)
            idx = (self.bubble_offset + bdry[:, None] * p +
                   np.arange(p)[None, :]).ravel()
            free[idx] = False
        self.free = free
        self.num_free = int(free.sum())

        # local trial columns per element:
        #   [u | sigma_x | sigma_y | uhat vertices | uhat bubbles | flux]
        self.n_local = self.k_int + 3 + 3 * p + 3 * (p + 1)
        cols = np.empty((nt, self.n_local), dtype=np.int64)
        cols[:, :self.k_int] = (np.arange(nt)[:, None] * self.k_int +
                                np.arange(self.k_int)[None, :])
        pos = self.k_int
        cols[:, pos:pos + 3] = self.vertex_offset + mesh.triangles
        pos += 3
        for le in range(3):
            ge = mesh.tri_edges[:, le]
            cols[:, pos:pos + p] = (self.bubble_offset + ge[:, None] * p +
                                    np.arange(p)[None, :])
            pos += p
        for le in range(3):
            ge = mesh.tri_edges[:, le]
            cols[:, pos:pos + p + 1] = (self.flux_offset +
                                        ge[:, None] * (p + 1) +
                                        np.arange(p + 1)[None, :])
            pos += p + 1
        self.local_cols = cols

    def vertex_dof(self, v):
        return self.vertex_offset + v

    def bubble_dofs(self, e):
        p = self.trial.p
        return self.bubble_offset + e * p + np.arange(p)

    def flux_dofs(self, e):
        p = self.trial.p
        return self.flux_offset + e * (p + 1) + np.arange(p + 1)


@dataclass
class Solution:
    """Discrete solution with the recovered residual representer."""
    mesh: object
    trial: TrialSpace
    kind: str
    dofmap: DofMap
    coeffs: np.ndarray              # all trial dofs, prescribed ones included
    u_coeffs: np.ndarray            # (nt, dim u)
    sigma_coeffs: np.ndarray        # (nt, 2, dim sigma)
    residual_coeffs: np.ndarray     # (nt, test dim) representer eps_T
    eta_local: np.ndarray           # (nt,) local estimator eta(T)
    eta: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def num_dofs(self):
        return self.dofmap.num_free


@lru_cache(maxsize=None)
def _reference_tables(u_degree, p, r, exactness):
    """Reference-element contraction tensors shared by all elements."""
    tri = triangle_quadrature(exactness)
    edge = edge_quadrature(exactness)
    w = tri.weights
    ubasis = scalar_basis(u_degree)
    sbasis = scalar_basis(p)
    tbasis = scalar_basis(r)

    U = ubasis.values(tri.points)
    S = sbasis.values(tri.points)
    V = tbasis.values(tri.points)
    Vg = tbasis.gradients(tri.points)

    tab = {
        "tri_points": tri.points,
        "n_u": ubasis.dim, "n_s": sbasis.dim, "n_t": tbasis.dim,
        "V": V,
        # volume contractions against the quadrature weight
        "M0": np.einsum("ik,jk,k->ij", V, V, w),
        "T1": np.einsum("ika,jkb,k->abij", Vg, Vg, w),
        "MU": np.einsum("ik,jk,k->ij", V, U, w),
        "GU": np.einsum("ika,jk,k->aij", Vg, U, w),
        "MS": np.einsum("ik,jk,k->ij", V, S, w),
        "GS": np.einsum("ika,jk,k->aij", Vg, S, w),
    }

    # trace contractions for the six (local edge, flip) configurations;
    # t parametrizes each edge from its lower- to higher-numbered endpoint
    t, we = edge.points, edge.weights
    hat = np.vstack([1.0 - t, t])
    bub = edge_bubbles(p, t)
    leg = edge_basis(p).values(t)
    HB, BB, LB = {}, {}, {}
    for le in range(3):
        for flip in (False, True):
            s_loc, e_loc = (le + 1) % 3, (le + 2) % 3
            if flip:
                s_loc, e_loc = e_loc, s_loc
            a, b = REFERENCE_VERTICES[s_loc], REFERENCE_VERTICES[e_loc]
            pts = a[None, :] + t[:, None] * (b - a)[None, :]
            EV = tbasis.values(pts)                      # (n_t, nqe)
            HB[le, flip] = np.einsum("wk,ik,k->wi", hat, EV, we)
            BB[le, flip] = np.einsum("jk,ik,k->ji", bub, EV, we)
            LB[le, flip] = np.einsum("jk,ik,k->ji", leg, EV, we)
    tab["HB"], tab["BB"], tab["LB"] = HB, BB, LB
    return tab


def _geometry(mesh, elements):
    verts = mesh.vertices[mesh.triangles[elements]]
    jac = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]],
                   axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    return verts, jac, det, inv


def default_exactness(p, delta_p=2):
    """Quadrature exactness used for assembly: products of enriched test
    functions with themselves and one extra order for the load."""
    return 2 * (p + delta_p + 1)


def _local_systems(mesh, trial, kind, source, delta_p, exactness, elements):
    """Gram matrices, coupling matrices, and loads for a set of elements.

    Returns (G, B, F) with shapes (ne, m, m), (ne, m, n_local), (ne, m),
    where m = 3 * dim P^{p+delta_p} and columns follow DofMap layout.
    """
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    p = trial.p
    r = p + delta_p
    if exactness is None:
        exactness = default_exactness(p, delta_p)
    tab = _reference_tables(trial.u_degree, p, r, exactness)
    n_u, n_s, n_t = tab["n_u"], tab["n_s"], tab["n_t"]
    m = 3 * n_t

    elements = np.arange(mesh.num_triangles) if elements is None \
        else np.asarray(elements, dtype=np.int64)
    ne = elements.shape[0]
    verts, jac, det, inv = _geometry(mesh, elements)
    inv_t = inv.transpose(0, 2, 1)    # J^{-T}, maps reference gradients

    sv = slice(0, n_t)
    st = (slice(n_t, 2 * n_t), slice(2 * n_t, 3 * n_t))

    # test-space Gram: (v, mu) + (grad v, grad mu) + (tau, lam) + (div tau, div lam)
    G = np.zeros((ne, m, m))
    metric = np.einsum("eca,ecb->eab", inv_t, inv_t)
    stiff = np.einsum("e,eab,abij->eij", det, metric, tab["T1"])
    mass = det[:, None, None] * tab["M0"]
    G[:, sv, sv] = mass + stiff
    for c in range(2):
        for d in range(2):
            block = np.einsum("e,ea,eb,abij->eij", det,
                              inv_t[:, c], inv_t[:, d], tab["T1"])
            if c == d:
                block = block + mass
            G[:, st[c], st[d]] = block

    # trial-to-test coupling
    n_local = n_u + 2 * n_s + 3 + 3 * p + 3 * (p + 1)
    B = np.zeros((ne, m, n_local))
    cu = slice(0, n_u)
    cs = (slice(n_u, n_u + n_s), slice(n_u + n_s, n_u + 2 * n_s))
    vert_col = n_u + 2 * n_s
    bub_col = vert_col + 3
    flux_col = bub_col + 3 * p

    # (u, div tau) and, for reaction-diffusion, (u, v)
    for c in range(2):
        B[:, st[c], cu] = np.einsum("e,ea,aij->eij", det, inv_t[:, c],
                                    tab["GU"])
    if kind == REACTION_DIFFUSION:
        B[:, sv, cu] = det[:, None, None] * tab["MU"]

    # (sigma, tau + grad v)
    for c in range(2):
        B[:, st[c], cs[c]] = det[:, None, None] * tab["MS"]
        B[:, sv, cs[c]] = np.einsum("e,ea,aij->eij", det, inv_t[:, c],
                                    tab["GS"])

    # skeleton terms: -<uhat, tau.n> and -<shat, v> edge by edge
    tris = mesh.triangles[elements]
    for le in range(3):
        ge = mesh.tri_edges[elements, le]
        start_loc, end_loc = (le + 1) % 3, (le + 2) % 3
        d = verts[:, end_loc] - verts[:, start_loc]
        length = np.hypot(d[:, 0], d[:, 1])
        normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
        flip = tris[:, start_loc] != mesh.edges[ge, 0]
        sign = np.where(flip, -1.0, 1.0)
        for fl in (False, True):
            g = np.flatnonzero(flip == fl)
            if g.size == 0:
                continue
            HB = tab["HB"][le, fl]
            BB = tab["BB"][le, fl]
            LB = tab["LB"][le, fl]
            # hat functions attach to the endpoint vertices in global
            # orientation: row 0 of HB is the lower-numbered endpoint
            a_loc, b_loc = (end_loc, start_loc) if fl else (start_loc, end_loc)
            for c in range(2):
                B[g, st[c], vert_col + a_loc] -= np.outer(length[g] * normal[g, c], HB[0])
                B[g, st[c], vert_col + b_loc] -= np.outer(length[g] * normal[g, c], HB[1])
                for j in range(p):
                    B[g, st[c], bub_col + le * p + j] -= np.outer(length[g] * normal[g, c], BB[j])
            for j in range(p + 1):
                B[g, sv, flux_col + le * (p + 1) + j] -= np.outer(sign[g] * length[g], LB[j])

    # load (f, v); tau rows stay zero
    F = np.zeros((ne, m))
    if source is not None:
        pts = tab["tri_points"]
        xy = verts[:, None, 0, :] + np.einsum("eDd,kd->ekD", jac, pts)
        fv = np.asarray(source(xy[..., 0], xy[..., 1]), dtype=float)
        wq = det[:, None] * triangle_quadrature(exactness).weights[None, :]
        F[:, sv] = np.einsum("ek,ik->ei", wq * fv, tab["V"])
    return G, B, F


def local_gram(mesh, tri, p, delta_p=2, exactness=None):
    """Test-space Gram matrix of one element (symmetric positive definite)."""
    G, _, _ = _local_systems(mesh, TrialSpace(p), REACTION_DIFFUSION, None,
                             delta_p, exactness, [tri])
    return G[0]


def local_b(mesh, tri, trial, kind, delta_p=2, exactness=None):
    """Trial-to-test coupling matrix of one element.

    Columns follow the DofMap layout [u | sigma_x | sigma_y | uhat
    vertices | uhat edge modes | flux edge modes].
    """
    _, B, _ = _local_systems(mesh, trial, kind, None, delta_p, exactness,
                             [tri])
    return B[0]


def local_load(mesh, tri, f, p, delta_p=2, exactness=None):
    """Load vector (f, v)_T of one element; tau components are zero."""
    _, _, F = _local_systems(mesh, TrialSpace(p), REACTION_DIFFUSION, f,
                             delta_p, exactness, [tri])
    return F[0]


def condense(gram, coupling, load=None):
    """Schur complement of one local saddle-point block.

    Eliminates the residual representer from the mixed system, producing
    S = B' G^{-1} B and r = B' G^{-1} F.  This realizes the discrete
    trial-to-test operator G^{-1} B locally.
    """
    try:
        np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "local test-space Gram is not SPD (quadrature or basis bug)"
        ) from exc
    ginv_b = np.linalg.solve(gram, coupling)
    schur = coupling.T @ ginv_b
    if load is None:
        return schur, None
    return schur, coupling.T @ np.linalg.solve(gram, load)


def _dirichlet_values(mesh, dofmap, data, exactness):
    """Prescribed uhat values: vertex interpolation plus edgewise L2
    projection of the remainder onto the edge-interior modes."""
    p = dofmap.trial.p
    values = np.zeros(dofmap.n_total)
    bverts = np.flatnonzero(mesh.boundary_vertex)
    xy = mesh.vertices[bverts]
    values[dofmap.vertex_offset + bverts] = data(xy[:, 0], xy[:, 1])
    if p > 0:
        rule = edge_quadrature(exactness + 4)
        t, w = rule.points, rule.weights
        bub = edge_bubbles(p, t)
        gram = np.einsum("ik,jk,k->ij", bub, bub, w)
        bedges = np.flatnonzero(mesh.boundary_edge)
        a = mesh.vertices[mesh.edges[bedges, 0]]
        b = mesh.vertices[mesh.edges[bedges, 1]]
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        gvals = np.asarray(data(pts[..., 0], pts[..., 1]), dtype=float)
        ga = values[dofmap.vertex_offset + mesh.edges[bedges, 0]]
        gb = values[dofmap.vertex_offset + mesh.edges[bedges, 1]]
        resid = gvals - (np.outer(ga, 1.0 - t) + np.outer(gb, t))
        rhs = np.einsum("ek,jk,k->ej", resid, bub, w)
        coeff = np.linalg.solve(gram, rhs.T).T
        for i, e in enumerate(bedges):
            values[dofmap.bubble_dofs(e)] = coeff[i]
    return values


def assemble_solve(mesh, trial, kind, source, dirichlet=None, *, delta_p=2,
                   exactness=None, solver_tol=1e-10, max_iter=None):
    """Assemble the condensed DPG system, solve it, and recover the
    elementwise residual representer.

    Parameters
    ----------
    mesh : Mesh
    trial : TrialSpace
    kind : REACTION_DIFFUSION or POISSON
    source : callable f(x, y) or None for f = 0
    dirichlet : callable g(x, y) or None for homogeneous data
    delta_p : int
        Test-space enrichment; the experiments all use 2.
    exactness : int, optional
        Assembly quadrature exactness, default 2(p + delta_p + 1).
    solver_tol : float
        Relative residual target of the linear solve.
    max_iter : int, optional
        Iteration cap of the conjugate-gradient fallback, default
        50 sqrt(num dofs).

    Returns
    -------
    Solution
    """
    p = trial.p
    if exactness is None:
        exactness = default_exactness(p, delta_p)
    dofmap = DofMap(mesh, trial)
    G, B, F = _local_systems(mesh, trial, kind, source, delta_p, exactness,
                             None)
    nt = mesh.num_triangles
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "a local test-space Gram is not SPD (quadrature or basis bug)"
        ) from exc

    rhs_block = np.concatenate([B, F[:, :, None]], axis=2)
    sol_block = np.linalg.solve(G, rhs_block)
    ginv_b, ginv_f = sol_block[:, :, :-1], sol_block[:, :, -1]
    S_loc = np.einsum("emi,emj->eij", B, ginv_b)
    r_loc = np.einsum("emi,em->ei", B, ginv_f)

    cols = dofmap.local_cols
    n_local = dofmap.n_local
    rows = np.repeat(cols[:, :, None], n_local, axis=2)
    colix = np.repeat(cols[:, None, :], n_local, axis=1)
    S = sp.coo_matrix((S_loc.ravel(), (rows.ravel(), colix.ravel())),
                      shape=(dofmap.n_total, dofmap.n_total)).tocsr()
    rhs = np.zeros(dofmap.n_total)
    np.add.at(rhs, cols.ravel(), r_loc.ravel())

    # move prescribed Dirichlet trace values to the right-hand side
    if dirichlet is not None:
        prescribed = _dirichlet_values(mesh, dofmap, dirichlet, exactness)
        rhs = rhs - S @ prescribed
    else:
        prescribed = np.zeros(dofmap.n_total)

    ifree = np.flatnonzero(dofmap.free)
    A = S[ifree][:, ifree].tocsc()
    b = rhs[ifree]
    x_free, diag = _solve_spd(A, b, solver_tol, max_iter)

    x = prescribed.copy()
    x[ifree] = x_free

    # residual representer and localized estimator
    x_loc = x[cols]
    eps = np.linalg.solve(
        G, (F - np.einsum("emn,en->em", B, x_loc))[:, :, None])[:, :, 0]
    eta_sq = np.einsum("em,emn,en->e", eps, G, eps)
    eta_local = np.sqrt(np.maximum(eta_sq, 0.0))

    # Galerkin orthogonality of the mixed system: B' eps vanishes on the
    # free trial dofs up to solver accuracy
    gal = np.zeros(dofmap.n_total)
    np.add.at(gal, cols.ravel(), np.einsum("emn,em->en", B, eps).ravel())
    scale = float(np.abs(b).max()) if b.size else 0.0
    diag["galerkin_residual"] = float(np.abs(gal[ifree]).max()) if ifree.size else 0.0
    diag["load_scale"] = scale

    interior = x[:dofmap.interior_count].reshape(nt, dofmap.k_int)
    u_coeffs = interior[:, :dofmap.n_u].copy()
    sigma_coeffs = interior[:, dofmap.n_u:].reshape(nt, 2, dofmap.n_s).copy()

    return Solution(mesh=mesh, trial=trial, kind=kind, dofmap=dofmap,
                    coeffs=x, u_coeffs=u_coeffs, sigma_coeffs=sigma_coeffs,
                    residual_coeffs=eps, eta_local=eta_local,
                    eta=float(np.sqrt(eta_sq.sum())), diagnostics=diag)


def _solve_spd(A, b, tol, max_iter):
    """Direct sparse solve with iterative refinement; CG fallback."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), {"method": "trivial", "iterations": 0,
                             "rel_residual": 0.0}
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), {"method": "direct", "iterations": 0,
                             "rel_residual": 0.0}
    try:
        lu = spla.splu(A)
        x = lu.solve(b)
        rel = None
        for it in range(4):
            res = b - A @ x
            rel = float(np.linalg.norm(res)) / bnorm
            if rel <= tol:
                return x, {"method": "direct", "iterations": it,
                           "rel_residual": rel}
            x = x + lu.solve(res)
        direct_fail = rel
    except RuntimeError:
        direct_fail = np.inf

    if max_iter is None:
        max_iter = int(50 * np.sqrt(n)) + 10
    dinv = 1.0 / A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda v: v * dinv)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=precond,
                      callback=count)
    rel = float(np.linalg.norm(b - A @ x)) / bnorm
    if info != 0 and rel > tol:
        raise SolverError(
            f"linear solver failed: direct residual {direct_fail:.3e}, "
            f"cg residual {rel:.3e} after {iters} iterations "
            f"(target {tol:.1e})", residual=rel)
    return x, {"method": "cg", "iterations": iters, "rel_residual": rel}


def estimator(solution):
    """Built-in DPG error estimator.

    Returns (eta, eta_local) with eta(T)^2 = eps_T' G_T eps_T and
    eta^2 = sum_T eta(T)^2, taken from the residual representer that the
    solve recovered element by element.
    """
    return solution.eta, solution.eta_local
