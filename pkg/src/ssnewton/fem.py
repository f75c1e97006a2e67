"""Meshing, quadrature and DOF numbering on the square domain (-1, 1)^2.

Uniform axis-aligned square elements of size h = 2^-m; the bilinear element
maps are affine with constant Jacobian, which is what makes the Gauss-point
strain basis orthogonal (its dual basis coincides with itself).
Displacements use continuous tensor-Lagrange elements of degree p on a
uniform nodal grid, clamped on the bottom edge y = -1; strains use the
discontinuous Gauss-point Lagrange basis of degree p - 1 per element.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT6 = np.sqrt(6.0)

DEVIATORIC_BASIS_2D = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
    ]
) / SQRT2

DEVIATORIC_BASIS_3D = np.array(
    [
        np.array([[1, 0, 0], [0, -1, 0], [0, 0, 0]]) / SQRT2,
        np.array([[1, 0, 0], [0, 1, 0], [0, 0, -2]]) / SQRT6,
        np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]) / SQRT2,
        np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]]) / SQRT2,
        np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]]) / SQRT2,
    ]
)


def deviatoric_basis(d: int) -> np.ndarray:
    """Orthonormal (Frobenius) basis of trace-free symmetric d x d matrices."""
    if d == 2:
        return DEVIATORIC_BASIS_2D.copy()
    if d == 3:
        return DEVIATORIC_BASIS_3D.copy()
    raise ValueError(f"d must be 2 or 3, got {d}")


def gauss_rule_1d(n: int):
    """n-point Gauss-Legendre rule on [-1, 1], exact to degree 2n - 1."""
    if n < 1:
        raise ValueError("quadrature order must be >= 1")
    return np.polynomial.legendre.leggauss(n)


def gauss_rule(n: int, dim: int = 2):
    """Tensor-product Gauss rule on [-1, 1]^dim.

    Points are ordered with the first coordinate fastest; returns
    (points (n^dim, dim), weights (n^dim,)).
    """
    x, w = gauss_rule_1d(n)
    if dim == 1:
        return x[:, None].copy(), w.copy()
    if dim == 2:
        X, Y = np.meshgrid(x, x, indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.outer(w, w).ravel()
        return pts, wts
    raise ValueError(f"dim must be 1 or 2, got {dim}")


def lagrange_values(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the 1D Lagrange basis on ``nodes`` at points ``x``.

    Returns an array of shape (len(nodes), len(x)).
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = nodes.size
    vals = np.ones((n, x.size))
    for i in range(n):
        for j in range(n):
            if j != i:
                vals[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return vals


def lagrange_derivatives(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """First derivatives of the 1D Lagrange basis at points ``x``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = nodes.size
    der = np.zeros((n, x.size))
    for i in range(n):
        for k in range(n):
            if k == i:
                continue
            term = np.ones(x.size) / (nodes[i] - nodes[k])
            for j in range(n):
                if j not in (i, k):
                    term *= (x - nodes[j]) / (nodes[i] - nodes[j])
            der[i] += term
    return der


@dataclass(frozen=True)
class Mesh:
    """Uniform square mesh of (-1, 1)^2 with element size h = 2^-m.

    The bottom edge y = -1 is the clamped (Dirichlet) boundary; the rest of
    the boundary carries the traction.  m = -1 gives the single-element
    mesh (h = 2), m = 0 the 2x2 mesh, and so on.
    """

    h_exponent: int

    def __post_init__(self):
        if self.h_exponent < -1:
            raise ValueError("h_exponent must be >= -1 (at least one element)")

    @property
    def h(self) -> float:
        return 2.0 ** (-self.h_exponent)

    @property
    def n_per_side(self) -> int:
        return 2 ** (self.h_exponent + 1)

    @property
    def n_elements(self) -> int:
        return self.n_per_side**2

    @property
    def element_area(self) -> float:
        return self.h**2

    @property
    def vertices(self) -> np.ndarray:
        g = np.linspace(-1.0, 1.0, self.n_per_side + 1)
        X, Y = np.meshgrid(g, g, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def connectivity(self) -> np.ndarray:
        ne = self.n_per_side
        nv = ne + 1
        conn = np.empty((self.n_elements, 4), dtype=int)
        for ey in range(ne):
            for ex in range(ne):
                v0 = ey * nv + ex
                conn[ey * ne + ex] = (v0, v0 + 1, v0 + nv + 1, v0 + nv)
        return conn

    def element_origin(self, e: int):
        ne = self.n_per_side
        ex, ey = e % ne, e // ne
        return -1.0 + ex * self.h, -1.0 + ey * self.h

    def element_center(self, e: int):
        x0, y0 = self.element_origin(e)
        return x0 + 0.5 * self.h, y0 + 0.5 * self.h

    @property
    def top_elements(self) -> np.ndarray:
        ne = self.n_per_side
        return np.arange(ne * (ne - 1), ne * ne)

    @property
    def dirichlet_vertices(self) -> np.ndarray:
        return np.arange(self.n_per_side + 1)


def dof_counts(h_exponent: int, p: int, d: int = 2):
    """(dM, LN) for the uniform mesh, by pure counting (no assembly).

    Works for arbitrary degree p >= 1, including degrees far beyond what
    the assembly path supports.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if d != 2:
        raise ValueError("only d = 2 meshes are counted")
    mesh = Mesh(h_exponent)
    ne = mesh.n_per_side
    n_grid = p * ne + 1
    free_nodes = n_grid * n_grid - n_grid
    L = (d - 1) * (d + 2) // 2
    return d * free_nodes, L * ne * ne * p * p


class DofMap:
    """Displacement and strain DOF numbering for one (mesh, p) pair.

    Displacement nodes live on the global uniform grid of (p*ne + 1)^2
    points; the bottom row is eliminated.  Strain nodes are the per-element
    tensor Gauss points, numbered element-major: zeta(k, T) = T * p^2 + k.
    """

    def __init__(self, mesh: Mesh, p: int):
        if p < 1:
            raise ValueError("p must be >= 1")
        self.mesh = mesh
        self.p = p
        ne = mesh.n_per_side
        self.n_grid = p * ne + 1

        grid_ids = np.arange(self.n_grid * self.n_grid).reshape(self.n_grid, self.n_grid)
        free = np.full(self.n_grid * self.n_grid, -1, dtype=int)
        interior = grid_ids[1:, :].ravel()  # rows gy >= 1 (y > -1)
        free[interior] = np.arange(interior.size)
        self._free_index = free
        self.n_free_nodes = interior.size

        gx, gw = gauss_rule_1d(p)
        self._strain_ref_1d = gx
        self._strain_w_1d = gw

    @property
    def n_disp_dofs(self) -> int:
        return 2 * self.n_free_nodes

    @property
    def n_strain_nodes(self) -> int:
        return self.mesh.n_elements * self.p**2

    def grid_node(self, gx: int, gy: int) -> int:
        return gy * self.n_grid + gx

    def node_coords(self, node: int):
        step = 2.0 / (self.n_grid - 1)
        gy, gx = divmod(node, self.n_grid)
        return -1.0 + gx * step, -1.0 + gy * step

    def free_index(self, node: int) -> int:
        """Free-node number of a grid node, or -1 when clamped."""
        return int(self._free_index[node])

    def element_nodes(self, e: int) -> np.ndarray:
        """Global grid nodes of element e, local order x-fastest."""
        p = self.p
        ne = self.mesh.n_per_side
        ex, ey = e % ne, e // ne
        gx = ex * p + np.arange(p + 1)
        gy = ey * p + np.arange(p + 1)
        return (gy[:, None] * self.n_grid + gx[None, :]).ravel()

    def element_free(self, e: int) -> np.ndarray:
        """Free-node numbers of element e's nodes (-1 where clamped)."""
        return self._free_index[self.element_nodes(e)]

    def zeta(self, k: int, e: int) -> int:
        """Element-local Gauss node k of element e -> global strain node."""
        n_T = self.p**2
        if not 0 <= k < n_T:
            raise ValueError(f"local strain node {k} out of range for p={self.p}")
        return e * n_T + k

    def strain_coords(self) -> np.ndarray:
        """Physical coordinates of all strain nodes, zeta order."""
        p = self.p
        mesh = self.mesh
        ref, _ = gauss_rule(p, dim=2)
        coords = np.empty((self.n_strain_nodes, 2))
        half = 0.5 * mesh.h
        for e in range(mesh.n_elements):
            x0, y0 = mesh.element_origin(e)
            coords[e * p * p : (e + 1) * p * p, 0] = x0 + half * (ref[:, 0] + 1.0)
            coords[e * p * p : (e + 1) * p * p, 1] = y0 + half * (ref[:, 1] + 1.0)
        return coords

    def free_node_coords(self) -> np.ndarray:
        """Coordinates of the free displacement nodes, free order."""
        coords = np.empty((self.n_free_nodes, 2))
        for node in range(self.n_grid * self.n_grid):
            idx = self._free_index[node]
            if idx >= 0:
                coords[idx] = self.node_coords(node)
        return coords


@lru_cache(maxsize=32)
def reference_element(p: int, nq: int):
    """Precomputed reference-element data for degree p and nq quad points.

    Returns a dict with the 2D quadrature (points/weights), values and
    reference gradients of the (p+1)^2 displacement shape functions at the
    quadrature points, values of the p^2 strain shape functions there, and
    the displacement gradients at the p^2 strain (Gauss) nodes.
    """
    disp_nodes = np.linspace(-1.0, 1.0, p + 1)
    strain_nodes, _ = gauss_rule_1d(p)
    qp, qw = gauss_rule(nq, dim=2)
    qx, qy = qp[:, 0], qp[:, 1]

    dv_x = lagrange_values(disp_nodes, qx)
    dv_y = lagrange_values(disp_nodes, qy)
    dd_x = lagrange_derivatives(disp_nodes, qx)
    dd_y = lagrange_derivatives(disp_nodes, qy)
    sv_x = lagrange_values(strain_nodes, qx)
    sv_y = lagrange_values(strain_nodes, qy)

    n_disp = (p + 1) ** 2
    n_strain = p * p
    disp_vals = np.empty((n_disp, qp.shape[0]))
    disp_grad = np.empty((n_disp, qp.shape[0], 2))
    for j in range(p + 1):
        for i in range(p + 1):
            n = j * (p + 1) + i
            disp_vals[n] = dv_x[i] * dv_y[j]
            disp_grad[n, :, 0] = dd_x[i] * dv_y[j]
            disp_grad[n, :, 1] = dv_x[i] * dd_y[j]
    strain_vals = np.empty((n_strain, qp.shape[0]))
    for j in range(p):
        for i in range(p):
            strain_vals[j * p + i] = sv_x[i] * sv_y[j]

    # Displacement gradients at the strain (Gauss) nodes, x-fastest order.
    gp, _ = gauss_rule(p, dim=2)
    gdx = lagrange_derivatives(disp_nodes, gp[:, 0])
    gvx = lagrange_values(disp_nodes, gp[:, 0])
    gdy = lagrange_derivatives(disp_nodes, gp[:, 1])
    gvy = lagrange_values(disp_nodes, gp[:, 1])
    disp_grad_at_strain = np.empty((n_disp, n_strain, 2))
    for j in range(p + 1):
        for i in range(p + 1):
            n = j * (p + 1) + i
            disp_grad_at_strain[n, :, 0] = gdx[i] * gvy[j]
            disp_grad_at_strain[n, :, 1] = gvx[i] * gdy[j]

    return {
        "qp": qp,
        "qw": qw,
        "disp_vals": disp_vals,
        "disp_grad": disp_grad,
        "strain_vals": strain_vals,
        "disp_grad_at_strain": disp_grad_at_strain,
    }
