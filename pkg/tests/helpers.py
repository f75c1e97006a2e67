"""Shared test utilities: independent oracles and synthetic instances."""

import numpy as np

from ssnewton.blocks import BlockSystem, SemismoothBlockFamily, StateVector, eval_F


def fd_jacobian(system, family, x, rel_step=1e-6):
    """Central finite-difference Jacobian of the full residual at x.

    Independent of the assembled subgradient path: only calls eval_F.
    """
    xc = x.concat()
    n = xc.size
    J = np.empty((n, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(xc[j]))
        xp, xm = xc.copy(), xc.copy()
        xp[j] += h
        xm[j] -= h
        Fp = eval_F(system, family, StateVector.from_concat(system, xp))
        Fm = eval_F(system, family, StateVector.from_concat(system, xm))
        J[:, j] = (Fp - Fm) / (2.0 * h)
    return J


def random_block_system(rng, n_disp=6, n_blocks=3, L=2, coupling=0.1):
    """Synthetic positive definite block system with random data."""
    m = n_blocks * L
    A0 = rng.standard_normal((n_disp, n_disp))
    A = A0 @ A0.T + n_disp * np.eye(n_disp)
    C0 = rng.standard_normal((m, m))
    C = C0 @ C0.T + m * np.eye(m)
    B = coupling * rng.standard_normal((n_disp, m))
    d_node = rng.uniform(0.5, 2.0, n_blocks)
    l = rng.standard_normal(n_disp)
    return BlockSystem(A, B, C, d_node, l, block_size=L)


def linear_family(n_blocks, L):
    """Blocks S_i(b_i, c_i) = c_i: the whole system becomes affine."""
    return SemismoothBlockFamily(
        n_blocks,
        L,
        evaluate=lambda i, b, c: c,
        subgradient=lambda i, b, c: (np.zeros((L, L)), np.eye(L)),
    )


def zero_family(n_blocks, L):
    """Blocks S_i identically zero (degenerate: H is singular)."""
    return SemismoothBlockFamily(
        n_blocks,
        L,
        evaluate=lambda i, b, c: np.zeros(L),
        subgradient=lambda i, b, c: (np.zeros((L, L)), np.zeros((L, L))),
    )


def off_kink_state(rng, system, sigma_node, rho, margin=0.25):
    """Random state with every block kept away from the yield surface."""
    x = StateVector(
        0.05 * rng.standard_normal(system.n_disp),
        0.3 * rng.standard_normal(system.n_strain),
        3.0 * rng.standard_normal(system.n_strain),
    )
    L = system.L
    while True:
        v = (x.c + rho * x.b).reshape(-1, L)
        nv = np.linalg.norm(v, axis=1)
        bad = np.abs(nv - sigma_node) < margin * sigma_node
        if not bad.any():
            return x
        x.c.reshape(-1, L)[bad] += 2.0 * rng.standard_normal((int(bad.sum()), L))
