"""2D elastoplasticity with linearly kinematic hardening.

Assembles the block system of the mixed displacement / plastic-strain /
multiplier formulation on the uniform square mesh and provides the
per-node projection residuals chi_i together with their subgradient pairs.
The isotropic material law is C tau = lam tr(tau) I + 2 mu tau with a
scalar hardening modulus; on trace-free inputs C acts as 2 mu, which makes
the strain-strain block an exact multiple of the biorthogonal diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .blocks import BlockSystem, Dimensions, SemismoothBlockFamily, StateVector
from .fem import (
    DofMap,
    Mesh,
    deviatoric_basis,
    gauss_rule,
    gauss_rule_1d,
    reference_element,
)

MAX_DEGREE = 10


@dataclass(frozen=True)
class MaterialParams:
    """Lame constants, scalar hardening modulus and yield stress."""

    lam: float = 1000.0
    mu: float = 1000.0
    hardening: float = 500.0
    sigma_y: float = 5.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.hardening <= 0:
            raise ValueError("hardening modulus must be positive")
        if self.sigma_y <= 0:
            raise ValueError("yield stress must be positive")


def benchmark_traction(x):
    """Downward quartic pressure bump on the middle half of the top edge."""
    x = np.asarray(x, dtype=float)
    ty = -400.0 * np.minimum(0.0, x * x - 0.25) ** 2
    return np.column_stack([np.zeros_like(x), ty])


def chi_eval(q, mu_, sigma, rho):
    """Projection residual max{sigma, |mu + rho q|} mu - sigma (mu + rho q).

    ``q`` and ``mu_`` are coefficient vectors in the orthonormal deviatoric
    basis (shape (..., L)), so the Euclidean norm equals the Frobenius norm
    of the represented tensors.  ``sigma`` broadcasts over the leading axes.
    """
    q = np.asarray(q, dtype=float)
    mu_ = np.asarray(mu_, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    v = mu_ + rho * q
    nv = np.linalg.norm(v, axis=-1)
    m = np.maximum(sigma, nv)
    return m[..., None] * mu_ - sigma[..., None] * v


def chi_subgradient(q, mu_, sigma, rho, kink_tau=1.0, kink_tol=1e-12):
    """One subgradient pair (X, Y) of the projection residual.

    Off the yield surface the pair is the classical Jacobian; within the
    relative band | |v| - sigma | <= kink_tol * sigma the convex weight
    ``kink_tau`` in [0, 1] selects the subgradient element.  Shapes:
    inputs (..., L), outputs (..., L, L).
    """
    q = np.asarray(q, dtype=float)
    mu_ = np.asarray(mu_, dtype=float)
    L = q.shape[-1]
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), q.shape[:-1]).astype(float)
    v = mu_ + rho * q
    nv = np.linalg.norm(v, axis=-1)
    plastic = nv - sigma > kink_tol * sigma
    elastic = sigma - nv > kink_tol * sigma
    tau = np.where(plastic, 1.0, np.where(elastic, 0.0, kink_tau))

    vhat = np.zeros_like(v)
    nz = nv > 0
    vhat[nz] = v[nz] / nv[nz][..., None]
    outer = mu_[..., :, None] * vhat[..., None, :]
    eye = np.eye(L)
    X = tau[..., None, None] * rho * outer - rho * sigma[..., None, None] * eye
    Y = tau[..., None, None] * (outer + (nv - sigma)[..., None, None] * eye)
    return X, Y


class ChiBlockFamily(SemismoothBlockFamily):
    """Vectorized family of the per-node projection residuals."""

    def __init__(self, sigma_node, rho, kink_tau=1.0, kink_tol=1e-12, block_size=2):
        self.sigma_node = np.asarray(sigma_node, dtype=float).ravel()
        self.rho = float(rho)
        self.kink_tau = float(kink_tau)
        self.kink_tol = float(kink_tol)
        if self.rho <= 0:
            raise ValueError("projection parameter rho must be positive")
        super().__init__(
            n_blocks=self.sigma_node.size,
            block_size=block_size,
            evaluate=lambda i, b, c: chi_eval(b, c, self.sigma_node[i], self.rho),
            subgradient=lambda i, b, c: chi_subgradient(
                b, c, self.sigma_node[i], self.rho, self.kink_tau, self.kink_tol
            ),
        )

    def evaluate_all(self, b, c):
        L = self.block_size
        return chi_eval(
            b.reshape(-1, L), c.reshape(-1, L), self.sigma_node, self.rho
        )

    def subgradient_all(self, b, c):
        L = self.block_size
        return chi_subgradient(
            b.reshape(-1, L),
            c.reshape(-1, L),
            self.sigma_node,
            self.rho,
            self.kink_tau,
            self.kink_tol,
        )


@dataclass
class DiscreteProblem:
    """One assembled-ready instance of the elastoplastic discretization."""

    mesh: Mesh
    p: int
    material: MaterialParams
    rho: float
    load_scale: float
    basis: np.ndarray = field(repr=False)
    dofmap: DofMap = field(repr=False)
    d_node: np.ndarray = field(repr=False)
    sigma_node: np.ndarray = field(repr=False)
    traction: Callable = field(repr=False)
    traction_breakpoints: tuple = (-0.5, 0.5)
    volume_load: Callable | None = None

    @property
    def L(self) -> int:
        return self.basis.shape[0]

    @property
    def n_strain_nodes(self) -> int:
        return self.d_node.size

    def chi(self, i: int, q_i, mu_i) -> np.ndarray:
        return chi_eval(q_i, mu_i, self.sigma_node[i], self.rho)

    def chi_subgradient(self, i: int, q_i, mu_i, kink_tau=1.0, kink_tol=1e-12):
        return chi_subgradient(
            q_i, mu_i, self.sigma_node[i], self.rho, kink_tau, kink_tol
        )

    def block_family(self, kink_tau=1.0, kink_tol=1e-12) -> ChiBlockFamily:
        return ChiBlockFamily(self.sigma_node, self.rho, kink_tau, kink_tol, self.L)


def build_problem(
    h_exponent: int,
    p: int,
    material: MaterialParams | None = None,
    rho: float = 25.0,
    load_scale: float = 1.0,
    volume_load: Callable | None = None,
) -> DiscreteProblem:
    """Set up mesh, DOF maps and per-node data for the benchmark domain."""
    if not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"p must lie in [1, {MAX_DEGREE}] for assembly, got {p}")
    if rho <= 0:
        raise ValueError("projection parameter rho must be positive")
    material = material or MaterialParams()
    mesh = Mesh(h_exponent)
    dm = DofMap(mesh, p)

    detJ = (mesh.h / 2.0) ** 2
    _, w2 = gauss_rule(p, dim=2)
    d_node = np.tile(detJ * w2, mesh.n_elements)
    sigma_node = np.full(dm.n_strain_nodes, material.sigma_y)

    scale = float(load_scale)

    def traction(x):
        return scale * benchmark_traction(x)

    return DiscreteProblem(
        mesh=mesh,
        p=p,
        material=material,
        rho=float(rho),
        load_scale=scale,
        basis=deviatoric_basis(2),
        dofmap=dm,
        d_node=d_node,
        sigma_node=sigma_node,
        traction=traction,
        volume_load=volume_load,
    )


def _local_matrices(problem: DiscreteProblem):
    """Element matrices (identical for all congruent square elements)."""
    p = problem.p
    mat = problem.material
    ref = reference_element(p, p + 1)
    h = problem.mesh.h
    detJ = (h / 2.0) ** 2
    grad = ref["disp_grad"] * (2.0 / h)  # physical gradients, (n_loc, nq, 2)
    qw = ref["qw"]
    sv = ref["strain_vals"]
    n_loc = grad.shape[0]

    lam, mu = mat.lam, mat.mu
    t_lam = np.einsum("q,aqk,bql->akbl", qw, grad, grad) * lam
    t_cross = np.einsum("q,aql,bqk->akbl", qw, grad, grad) * mu
    t_dot = np.einsum("q,aqd,bqd->ab", qw, grad, grad) * mu
    A_loc = t_lam + t_cross
    A_loc[:, 0, :, 0] += t_dot
    A_loc[:, 1, :, 1] += t_dot
    A_loc = (A_loc * detJ).reshape(2 * n_loc, 2 * n_loc)

    B_loc = -2.0 * mat.mu * detJ * np.einsum(
        "q,sq,aqd,lkd->aksl", qw, sv, grad, problem.basis
    )
    L = problem.basis.shape[0]
    B_loc = B_loc.reshape(2 * n_loc, L * sv.shape[0])
    return A_loc, B_loc


def _neumann_load(problem: DiscreteProblem, l_vec: np.ndarray):
    """Accumulate -<g, v> over the loaded top edge into the load vector.

    Each edge element is split at the traction's polynomial breakpoints so
    the Gauss rule integrates every piece exactly.
    """
    p = problem.p
    dm = problem.dofmap
    mesh = problem.mesh
    h = mesh.h
    nodes_1d = np.linspace(-1.0, 1.0, p + 1)
    gx, gw = gauss_rule_1d(p + 3)

    from .fem import lagrange_values

    for e in mesh.top_elements:
        x0, _ = mesh.element_origin(e)
        x1 = x0 + h
        cuts = sorted({x0, x1} | {b for b in problem.traction_breakpoints if x0 < b < x1})
        free = dm.element_free(e)
        edge_free = free[p * (p + 1) : (p + 1) * (p + 1)]  # local nodes with y on top
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            jac = 0.5 * (s1 - s0)
            xs = s0 + jac * (gx + 1.0)
            xi = 2.0 * (xs - x0) / h - 1.0
            theta = lagrange_values(nodes_1d, xi)  # (p+1, n_g)
            g_vals = problem.traction(xs)  # (n_g, 2)
            contrib = jac * np.einsum("g,ig,gk->ik", gw, theta, g_vals)
            for i_loc, fn in enumerate(edge_free):
                if fn < 0:
                    continue
                l_vec[2 * fn] -= contrib[i_loc, 0]
                l_vec[2 * fn + 1] -= contrib[i_loc, 1]


def _volume_load(problem: DiscreteProblem, l_vec: np.ndarray):
    p = problem.p
    ref = reference_element(p, p + 2)
    dm = problem.dofmap
    mesh = problem.mesh
    detJ = (mesh.h / 2.0) ** 2
    half = 0.5 * mesh.h
    qp, qw = ref["qp"], ref["qw"]
    vals = ref["disp_vals"]
    for e in range(mesh.n_elements):
        x0, y0 = mesh.element_origin(e)
        pts = np.column_stack([x0 + half * (qp[:, 0] + 1), y0 + half * (qp[:, 1] + 1)])
        f_vals = np.asarray(problem.volume_load(pts), dtype=float)
        contrib = detJ * np.einsum("q,iq,qk->ik", qw, vals, f_vals)
        free = dm.element_free(e)
        for i_loc, fn in enumerate(free):
            if fn < 0:
                continue
            l_vec[2 * fn] -= contrib[i_loc, 0]
            l_vec[2 * fn + 1] -= contrib[i_loc, 1]


def assemble(problem: DiscreteProblem) -> BlockSystem:
    """Assemble the block system (A, B, C, D, l) of the discretization."""
    p = problem.p
    dm = problem.dofmap
    mesh = problem.mesh
    mat = problem.material
    L = problem.L
    n_T = p * p

    A_loc, B_loc = _local_matrices(problem)
    n_loc = (p + 1) ** 2

    rows_A, cols_A, vals_A = [], [], []
    rows_B, cols_B, vals_B = [], [], []
    for e in range(mesh.n_elements):
        free = dm.element_free(e)
        gdof = np.where(
            np.repeat(free, 2) >= 0,
            2 * np.repeat(free, 2) + np.tile([0, 1], n_loc),
            -1,
        )
        keep = gdof >= 0
        idx = np.nonzero(keep)[0]
        gkeep = gdof[idx]

        sub = A_loc[np.ix_(idx, idx)]
        rows_A.append(np.repeat(gkeep, gkeep.size))
        cols_A.append(np.tile(gkeep, gkeep.size))
        vals_A.append(sub.ravel())

        scols = e * n_T * L + np.arange(n_T * L)
        subB = B_loc[idx, :]
        rows_B.append(np.repeat(gkeep, scols.size))
        cols_B.append(np.tile(scols, gkeep.size))
        vals_B.append(subB.ravel())

    n_disp = dm.n_disp_dofs
    n_strain = L * dm.n_strain_nodes
    A = sp.csr_matrix(
        (np.concatenate(vals_A), (np.concatenate(rows_A), np.concatenate(cols_A))),
        shape=(n_disp, n_disp),
    )
    B = sp.csr_matrix(
        (np.concatenate(vals_B), (np.concatenate(rows_B), np.concatenate(cols_B))),
        shape=(n_disp, n_strain),
    )
    C = sp.diags((2.0 * mat.mu + mat.hardening) * np.repeat(problem.d_node, L)).tocsr()

    l_vec = np.zeros(n_disp)
    _neumann_load(problem, l_vec)
    if problem.volume_load is not None:
        _volume_load(problem, l_vec)

    dims = Dimensions(d=2, M=dm.n_free_nodes, N=dm.n_strain_nodes, L=L)
    return BlockSystem(A, B, C, problem.d_node, l_vec, block_size=L, dims=dims)


def quad_Qhp(mesh: Mesh, p: int, f) -> float:
    """Mesh-dependent quadrature: midpoint times area for p = 1, the
    tensor Gauss rule of the strain nodes otherwise."""
    if p == 1:
        pts = np.array([mesh.element_center(e) for e in range(mesh.n_elements)])
        return float(mesh.element_area * np.sum(f(pts)))
    ref, w2 = gauss_rule(p, dim=2)
    detJ = (mesh.h / 2.0) ** 2
    half = 0.5 * mesh.h
    total = 0.0
    for e in range(mesh.n_elements):
        x0, y0 = mesh.element_origin(e)
        pts = np.column_stack([x0 + half * (ref[:, 0] + 1), y0 + half * (ref[:, 1] + 1)])
        total += detJ * float(w2 @ np.asarray(f(pts), dtype=float))
    return total


def psi_hp(problem: DiscreteProblem, b: np.ndarray) -> float:
    """Discrete plasticity functional: quadrature of sigma_y |q_hp|_F."""
    bb = np.asarray(b, dtype=float).reshape(-1, problem.L)
    return float(np.sum(problem.d_node * problem.sigma_node * np.linalg.norm(bb, axis=1)))


def strain_tensor_coefficients(problem: DiscreteProblem, a: np.ndarray) -> np.ndarray:
    """Coefficients of dev(eps(u)) in the deviatoric basis at strain nodes.

    Returns an (N, L) array with row i the coefficients at strain node i.
    """
    p = problem.p
    dm = problem.dofmap
    ref = reference_element(p, p + 1)
    gs = ref["disp_grad_at_strain"] * (2.0 / problem.mesh.h)  # (n_loc, n_T, 2)
    n_T = p * p
    out = np.empty((dm.n_strain_nodes, problem.L))
    a = np.asarray(a, dtype=float)
    for e in range(problem.mesh.n_elements):
        free = dm.element_free(e)
        u_loc = np.zeros((free.size, 2))
        mask = free >= 0
        u_loc[mask, 0] = a[2 * free[mask]]
        u_loc[mask, 1] = a[2 * free[mask] + 1]
        grad_u = np.einsum("nm,nsd->smd", u_loc, gs)  # (n_T, 2, 2), d/dx_d of u_m
        eps = 0.5 * (grad_u + grad_u.transpose(0, 2, 1))
        out[e * n_T : (e + 1) * n_T] = np.einsum("smd,lmd->sl", eps, problem.basis)
    return out


def recover_multiplier(problem: DiscreteProblem, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiplier recovered from the stress: projection of
    dev(C(eps(u) - p) - H p) onto the strain space.

    On this discretization the projection reduces to nodewise evaluation,
    giving 2 mu dev(eps(u)) - (2 mu + hardening) p at each strain node.
    """
    mat = problem.material
    eps_coef = strain_tensor_coefficients(problem, a)
    b_coef = np.asarray(b, dtype=float).reshape(-1, problem.L)
    lam_coef = 2.0 * mat.mu * eps_coef - (2.0 * mat.mu + mat.hardening) * b_coef
    return lam_coef.ravel()


def complementarity_residuals(problem: DiscreteProblem, b: np.ndarray, c: np.ndarray):
    """(feasibility, complementarity) residuals of the multiplier constraints.

    r1 = max_i (|c_i| - sigma_i)_+ and r2 = max_i |c_i . b_i - sigma_i |b_i||;
    both vanish exactly when every chi_i does.
    """
    L = problem.L
    bb = np.asarray(b, dtype=float).reshape(-1, L)
    cc = np.asarray(c, dtype=float).reshape(-1, L)
    nc = np.linalg.norm(cc, axis=1)
    nb = np.linalg.norm(bb, axis=1)
    r1 = float(np.maximum(nc - problem.sigma_node, 0.0).max())
    r2 = float(np.abs(np.sum(cc * bb, axis=1) - problem.sigma_node * nb).max())
    return r1, r2


def elastic_displacement(system: BlockSystem) -> np.ndarray:
    """Displacement of the purely elastic problem A a = -l."""
    import scipy.sparse.linalg as spla

    return spla.splu(system.A.tocsc()).solve(-system.l)


def elastic_state(system: BlockSystem) -> StateVector:
    """Elastic predictor: p = 0 and the multiplier balancing the stress."""
    a = elastic_displacement(system)
    b = np.zeros(system.n_strain)
    c = -(system.B.T @ a) / system.d_diag
    return StateVector(a, b, c)
