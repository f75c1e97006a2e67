"""Block-structured nonsmooth systems.

The residual couples an affine map, built from a positive definite 2x2
block matrix [A B; B^T C] plus a positive block-constant diagonal D, with
per-node semismooth maps S_i that act only on the i-th length-L slices of
(b, c).  Any generalized Jacobian then has the 3x3 layout

    [ A   B   0 ]
    [ B^T C   D ]
    [ 0   X   Y ]

with X, Y block-diagonal.  This module evaluates residuals, assembles such
Jacobian elements, and provides the two Schur complements used by the
regularity diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class Dimensions:
    """Size bookkeeping for the mixed discretization.

    d: spatial dimension, M: scalar displacement basis count, N: strain
    nodes, L: deviatoric dimension.  K = d*M + L*N is the affine output
    length; the full residual has length K + L*N.
    """

    d: int
    M: int
    N: int
    L: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")
        if self.L != (self.d - 1) * (self.d + 2) // 2:
            raise ValueError(f"L must be {(self.d - 1) * (self.d + 2) // 2} for d={self.d}")
        if min(self.M, self.N) < 1:
            raise ValueError("M and N must be positive")

    @property
    def K(self) -> int:
        return self.d * self.M + self.L * self.N

    @property
    def total(self) -> int:
        return self.K + self.L * self.N


def _to_csr(M, name):
    if sp.issparse(M):
        return M.tocsr()
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    return sp.csr_matrix(M)


def _check_symmetric(M, name):
    scale = abs(M).max() if M.nnz else 0.0
    if scale == 0.0:
        return
    asym = abs(M - M.T).max()
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric: max asymmetry {asym:.3e}")


class BlockSystem:
    """The affine data (A, B, C, D, l) of one system instance.

    D is stored through its per-node values (one positive number per strain
    node, repeated ``block_size`` times on the diagonal).  ``dims`` is
    optional metadata attached by the finite element layer; the block
    algebra itself only needs the matrix shapes and the block size.
    """

    def __init__(self, A, B, C, d_node, l, block_size: int, dims: Dimensions | None = None):
        self.A = _to_csr(A, "A")
        self.B = _to_csr(B, "B")
        self.C = _to_csr(C, "C")
        self.d_node = np.asarray(d_node, dtype=float).ravel()
        self.l = np.asarray(l, dtype=float).ravel()
        self.L = int(block_size)
        self.dims = dims

        n_disp = self.A.shape[0]
        if self.A.shape != (n_disp, n_disp):
            raise ValueError("A must be square")
        if self.L < 1:
            raise ValueError("block_size must be positive")
        if self.d_node.size < 1:
            raise ValueError("at least one strain node required")
        n_strain = self.L * self.d_node.size
        if self.B.shape != (n_disp, n_strain):
            raise ValueError(f"B must be {n_disp} x {n_strain}, got {self.B.shape}")
        if self.C.shape != (n_strain, n_strain):
            raise ValueError(f"C must be {n_strain} x {n_strain}, got {self.C.shape}")
        if self.l.shape != (n_disp,):
            raise ValueError(f"l must have length {n_disp}")
        if np.any(self.d_node <= 0):
            raise ValueError("all diagonal node values of D must be positive")
        _check_symmetric(self.A, "A")
        _check_symmetric(self.C, "C")
        if dims is not None and (dims.d * dims.M != n_disp or dims.N != self.n_blocks or dims.L != self.L):
            raise ValueError("dims inconsistent with matrix shapes")

    @property
    def n_disp(self) -> int:
        return self.A.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.d_node.size

    @property
    def n_strain(self) -> int:
        return self.L * self.n_blocks

    @property
    def K(self) -> int:
        return self.n_disp + self.n_strain

    @property
    def total(self) -> int:
        """Length of the full residual and of the unknown (a, b, c)."""
        return self.K + self.n_strain

    @property
    def d_diag(self) -> np.ndarray:
        return np.repeat(self.d_node, self.L)

    @property
    def D(self) -> sp.csr_matrix:
        return sp.diags(self.d_diag).tocsr()

    @property
    def E(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, self.B], [self.B.T, self.C]], format="csr")


@dataclass
class StateVector:
    """The unknown triple (a, b, c) with per-node slicing of b and c."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.b.shape != self.c.shape:
            raise ValueError("b and c must have equal lengths")

    @classmethod
    def zero(cls, sys: BlockSystem) -> "StateVector":
        return cls(np.zeros(sys.n_disp), np.zeros(sys.n_strain), np.zeros(sys.n_strain))

    @classmethod
    def from_concat(cls, sys: BlockSystem, x: np.ndarray) -> "StateVector":
        x = np.asarray(x, dtype=float).ravel()
        if x.size != sys.total:
            raise ValueError(f"expected length {sys.total}, got {x.size}")
        n, m = sys.n_disp, sys.n_strain
        return cls(x[:n].copy(), x[n : n + m].copy(), x[n + m :].copy())

    def concat(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.c])

    def block_b(self, i: int, L: int) -> np.ndarray:
        return self.b[L * i : L * (i + 1)]

    def block_c(self, i: int, L: int) -> np.ndarray:
        return self.c[L * i : L * (i + 1)]

    def copy(self) -> "StateVector":
        return StateVector(self.a.copy(), self.b.copy(), self.c.copy())


class SemismoothBlockFamily:
    """Per-node semismooth maps S_i(b_i, c_i) and their subgradient pairs.

    ``evaluate(i, b_i, c_i)`` returns the length-L block value and
    ``subgradient(i, b_i, c_i)`` one valid pair (X_i, Y_i) of L x L partial
    subgradients.  Subclasses may override the vectorized ``*_all`` hooks.
    """

    def __init__(
        self,
        n_blocks: int,
        block_size: int,
        evaluate: Callable[[int, np.ndarray, np.ndarray], np.ndarray],
        subgradient: Callable[[int, np.ndarray, np.ndarray], tuple],
    ):
        self.n_blocks = n_blocks
        self.block_size = block_size
        self._evaluate = evaluate
        self._subgradient = subgradient

    def evaluate(self, i: int, b_i, c_i) -> np.ndarray:
        return np.asarray(self._evaluate(i, np.asarray(b_i, float), np.asarray(c_i, float)), float)

    def subgradient(self, i: int, b_i, c_i):
        X_i, Y_i = self._subgradient(i, np.asarray(b_i, float), np.asarray(c_i, float))
        return np.asarray(X_i, float), np.asarray(Y_i, float)

    def evaluate_all(self, b: np.ndarray, c: np.ndarray) -> np.ndarray:
        L = self.block_size
        bb = b.reshape(self.n_blocks, L)
        cc = c.reshape(self.n_blocks, L)
        return np.stack([self.evaluate(i, bb[i], cc[i]) for i in range(self.n_blocks)])

    def subgradient_all(self, b: np.ndarray, c: np.ndarray):
        L = self.block_size
        bb = b.reshape(self.n_blocks, L)
        cc = c.reshape(self.n_blocks, L)
        X = np.empty((self.n_blocks, L, L))
        Y = np.empty((self.n_blocks, L, L))
        for i in range(self.n_blocks):
            X[i], Y[i] = self.subgradient(i, bb[i], cc[i])
        return X, Y


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    """Sparse block-diagonal matrix from an (N, L, L) stack."""
    n, L, _ = blocks.shape
    base = np.arange(n)[:, None, None] * L
    rows = (base + np.arange(L)[None, :, None]).repeat(L, axis=2)
    cols = (base + np.arange(L)[None, None, :]).repeat(L, axis=1)
    return sp.csr_matrix(
        (blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n * L, n * L)
    )


@dataclass
class SubgradientElement:
    """One generalized-Jacobian element: the fixed blocks plus (X, Y)."""

    system: BlockSystem
    X_blocks: np.ndarray = field(repr=False)
    Y_blocks: np.ndarray = field(repr=False)

    def __post_init__(self):
        N, L = self.system.n_blocks, self.system.L
        if self.X_blocks.shape != (N, L, L) or self.Y_blocks.shape != (N, L, L):
            raise ValueError(f"X/Y blocks must have shape ({N}, {L}, {L})")

    @property
    def X(self) -> sp.csr_matrix:
        return _block_diag(self.X_blocks)

    @property
    def Y(self) -> sp.csr_matrix:
        return _block_diag(self.Y_blocks)

    @property
    def H(self) -> sp.csr_matrix:
        s = self.system
        return sp.bmat(
            [
                [s.A, s.B, None],
                [s.B.T, s.C, s.D],
                [None, self.X, self.Y],
            ],
            format="csr",
        )


def _check_state(sys: BlockSystem, x: StateVector):
    if x.a.size != sys.n_disp or x.b.size != sys.n_strain:
        raise ValueError(
            f"state has sizes ({x.a.size}, {x.b.size}, {x.c.size}), "
            f"system expects ({sys.n_disp}, {sys.n_strain}, {sys.n_strain})"
        )


def eval_affine(sys: BlockSystem, x: StateVector) -> np.ndarray:
    """[A B 0; B^T C D] (a, b, c)^T + (l, 0)^T."""
    _check_state(sys, x)
    top = sys.A @ x.a + sys.B @ x.b + sys.l
    mid = sys.B.T @ x.a + sys.C @ x.b + sys.d_diag * x.c
    return np.concatenate([top, mid])


def eval_F(sys: BlockSystem, blocks: SemismoothBlockFamily, x: StateVector) -> np.ndarray:
    """Full residual: affine part stacked over the per-node block values."""
    _check_state(sys, x)
    if blocks.n_blocks != sys.n_blocks or blocks.block_size != sys.L:
        raise ValueError("block family does not match system layout")
    s_vals = blocks.evaluate_all(x.b, x.c)
    return np.concatenate([eval_affine(sys, x), s_vals.ravel()])


def assemble_H(sys: BlockSystem, blocks: SemismoothBlockFamily, x: StateVector) -> SubgradientElement:
    """One generalized-Jacobian element at x (the family picks (X_i, Y_i))."""
    _check_state(sys, x)
    X, Y = blocks.subgradient_all(x.b, x.c)
    return SubgradientElement(sys, X, Y)


def is_positive_definite(M) -> bool:
    """Attempted Cholesky factorization of a (dense copy of a) matrix."""
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if np.abs(Md - Md.T).max() > SYMMETRY_RTOL * max(np.abs(Md).max(), 1e-300):
        return False
    try:
        np.linalg.cholesky(Md)
    except np.linalg.LinAlgError:
        return False
    return True


def schur_E(sys: BlockSystem) -> np.ndarray:
    """Dense Schur complement C - B^T A^-1 B (diagnostic use)."""
    lu = spla.splu(sys.A.tocsc())
    AinvB = lu.solve(sys.B.toarray())
    S = sys.C.toarray() - sys.B.T @ AinvB
    return 0.5 * (S + S.T)


def schur_H(sub: SubgradientElement) -> np.ndarray:
    """Dense Schur complement Y - X S_E^-1 D of H with respect to E."""
    sys = sub.system
    S_E = schur_E(sys)
    Z = scipy.linalg.solve(S_E, np.diag(sys.d_diag), assume_a="pos")
    return sub.Y.toarray() - sub.X @ Z


def solve_monolithic(sub: SubgradientElement, r: np.ndarray) -> np.ndarray:
    """Solve H z = r with one sparse LU of the full matrix."""
    return spla.splu(sub.H.tocsc()).solve(np.asarray(r, dtype=float))


def solve_via_schur(sub: SubgradientElement, r: np.ndarray) -> np.ndarray:
    """Solve H z = r by block elimination through S_H.

    Diagnostic-only companion of :func:`solve_monolithic`; both must agree
    for regular H.
    """
    sys = sub.system
    r = np.asarray(r, dtype=float)
    K = sys.K
    r_E, r_Y = r[:K], r[K:]
    E_lu = spla.splu(sys.E.tocsc())
    t = E_lu.solve(r_E)
    rhs = r_Y - sub.X @ t[sys.n_disp :]
    S_H = schur_H(sub)
    z_c = scipy.linalg.solve(S_H, rhs)
    shifted = r_E.copy()
    shifted[sys.n_disp :] -= sys.d_diag * z_c
    z_E = E_lu.solve(shifted)
    return np.concatenate([z_E, z_c])
