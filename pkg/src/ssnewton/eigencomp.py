"""Certificates for eigencomplementary matrix pairs.

A pair (F, G) of symmetric L x L matrices is *eigencomplementary* when

  * F is negative semidefinite,
  * G is positive semidefinite,
  * F and G share an orthogonal eigenbasis, and
  * if both are singular, the paired spectra are complementary columnwise:
    xi_j * eta_j = 0 with xi_j and eta_j never both zero.  Equivalently, the
    span of F's negative eigenvectors equals the kernel of G.

The checker produces an explicit certificate (shared basis plus paired
spectra) so that downstream diagnostics and tests can re-verify it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

FAIL_F_NOT_NEG_SEMIDEF = "F_not_neg_semidef"
FAIL_G_NOT_POS_SEMIDEF = "G_not_pos_semidef"
FAIL_NO_COMMON_BASIS = "no_common_basis"
FAIL_SINGULAR_SUM = "singular_sum_condition_violated"

DEFAULT_TOL = 1e-9


class PairSymmetryError(ValueError):
    """Raised when a matrix handed to the checker is not symmetric."""


class LemmaInapplicableError(ValueError):
    """Raised when a lemma's regularity precondition does not hold."""


def _as_square(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    return M


@dataclass
class SymmetricPair:
    """A candidate pair (F, G); F is the negative-semidefinite candidate.

    ``tol`` is relative to the largest entry magnitude of the pair, so the
    check behaves identically under a common rescaling of both matrices.
    """

    F: np.ndarray
    G: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.F = _as_square(self.F, "F")
        self.G = _as_square(self.G, "G")
        if self.F.shape != self.G.shape:
            raise ValueError(
                f"F and G must have equal shapes, got {self.F.shape} and {self.G.shape}"
            )
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        scale = self.scale
        for name, M in (("F", self.F), ("G", self.G)):
            asym = np.abs(M - M.T).max() if M.size else 0.0
            if asym > max(self.tol * scale, 1e-300):
                raise PairSymmetryError(
                    f"{name} is not symmetric: max |{name} - {name}^T| = {asym:.3e}"
                )

    @property
    def scale(self) -> float:
        s = max(np.abs(self.F).max(), np.abs(self.G).max())
        return s if s > 0 else 1.0

    @property
    def dim(self) -> int:
        return self.F.shape[0]


@dataclass
class EigencompCertificate:
    """Outcome of the eigencomplementarity check.

    When ``is_eigencomplementary`` the columns of ``shared_basis`` are a
    common orthonormal eigenbasis, with ``eig_neg[j]`` / ``eig_pos[j]`` the
    eigenvalues of F and G on column j.
    """

    is_eigencomplementary: bool
    shared_basis: np.ndarray | None
    eig_neg: np.ndarray | None
    eig_pos: np.ndarray | None
    failure_reason: str | None
    tol_abs: float

    def to_dict(self) -> dict:
        return {
            "is_eigencomplementary": self.is_eigencomplementary,
            "shared_basis": None if self.shared_basis is None else self.shared_basis.tolist(),
            "eig_neg": None if self.eig_neg is None else self.eig_neg.tolist(),
            "eig_pos": None if self.eig_pos is None else self.eig_pos.tolist(),
            "failure_reason": self.failure_reason,
            "tol_abs": self.tol_abs,
        }


def _joint_eigenbasis(F, G, cluster_tol):
    """Common eigenbasis of two commuting symmetric matrices.

    Eigendecomposes F, then diagonalizes G restricted to each (clustered)
    eigenspace of F.  Robust for repeated eigenvalues of F, which occur
    systematically in the application (rank-one update of a multiple of the
    identity).  Returns (S, xi, eta, offdiag_residual).
    """
    xi, V = np.linalg.eigh(F)
    L = F.shape[0]
    S = np.empty_like(V)
    eta = np.empty(L)
    start = 0
    while start < L:
        stop = start + 1
        while stop < L and xi[stop] - xi[stop - 1] <= cluster_tol:
            stop += 1
        Vc = V[:, start:stop]
        Gc = Vc.T @ G @ Vc
        Gc = 0.5 * (Gc + Gc.T)
        w, W = np.linalg.eigh(Gc)
        S[:, start:stop] = Vc @ W
        eta[start:stop] = w
        start = stop
    R = S.T @ G @ S
    off = np.abs(R - np.diag(np.diag(R))).max() if L > 1 else 0.0
    return S, xi, eta, off


def check_pair(pair: SymmetricPair) -> EigencompCertificate:
    """Certify whether (F, G) is eigencomplementary.

    Conditions are tested in order: F negative semidefinite, G positive
    semidefinite, existence of a common eigenbasis (commutator test followed
    by joint diagonalization), and -- when both matrices are singular -- the
    columnwise complementarity of the paired spectra.  The first violated
    condition is reported as ``failure_reason``.
    """
    F, G = pair.F, pair.G
    tol_abs = pair.tol * pair.scale

    def fail(reason):
        return EigencompCertificate(False, None, None, None, reason, tol_abs)

    xi_only = np.linalg.eigvalsh(F)
    if xi_only.max() > tol_abs:
        return fail(FAIL_F_NOT_NEG_SEMIDEF)
    eta_only = np.linalg.eigvalsh(G)
    if eta_only.min() < -tol_abs:
        return fail(FAIL_G_NOT_POS_SEMIDEF)

    # Commuting is necessary and (for symmetric matrices) sufficient for a
    # common eigenbasis; the explicit construction below re-validates it.
    scale_f = max(np.abs(F).max(), 1e-300)
    scale_g = max(np.abs(G).max(), 1e-300)
    comm = np.abs(F @ G - G @ F).max()
    if comm > 100.0 * pair.tol * scale_f * scale_g:
        return fail(FAIL_NO_COMMON_BASIS)

    S, xi, eta, off = _joint_eigenbasis(F, G, cluster_tol=tol_abs)
    if off > 100.0 * pair.tol * scale_g:
        return fail(FAIL_NO_COMMON_BASIS)

    f_singular = np.abs(xi).min() <= tol_abs
    g_singular = np.abs(eta).min() <= tol_abs
    if f_singular and g_singular:
        zero_f = np.abs(xi) <= tol_abs
        zero_g = np.abs(eta) <= tol_abs
        # Each column must carry exactly one zero eigenvalue.
        if np.any(zero_f & zero_g) or np.any(~zero_f & ~zero_g):
            return fail(FAIL_SINGULAR_SUM)

    return EigencompCertificate(True, S, xi, eta, None, tol_abs)


def certify(F, G, tol: float = DEFAULT_TOL) -> EigencompCertificate:
    """Build the pair and run :func:`check_pair` in one call."""
    return check_pair(SymmetricPair(F, G, tol))


def certify_either_order(F, G, tol: float = DEFAULT_TOL):
    """Try (F, G) and, if that fails, (G, F).

    Returns ``(certificate, swapped)`` where ``swapped`` marks that the
    reversed order was the certified one.
    """
    cert = certify(F, G, tol)
    if cert.is_eigencomplementary:
        return cert, False
    cert_swapped = certify(G, F, tol)
    if cert_swapped.is_eigencomplementary:
        return cert_swapped, True
    return cert, False


def neg_semidef_product(pair: SymmetricPair):
    """Return (F^-1 G, verdict) for a certified pair with F regular.

    Falls back to (F G^-1, verdict) when only G is regular.  The verdict
    states whether all eigenvalues of the product are <= tol (they are
    xi^-1 * eta <= 0 in exact arithmetic).
    """
    cert = check_pair(pair)
    if not cert.is_eigencomplementary:
        raise ValueError(f"pair is not eigencomplementary ({cert.failure_reason})")
    tol_abs = cert.tol_abs
    f_regular = np.abs(cert.eig_neg).min() > tol_abs
    g_regular = np.abs(cert.eig_pos).min() > tol_abs
    if f_regular:
        M = np.linalg.solve(pair.F, pair.G)
    elif g_regular:
        # F G^-1 = (G^-1 F)^T by symmetry of both factors.
        M = np.linalg.solve(pair.G, pair.F).T
    else:
        raise LemmaInapplicableError(
            "lemma inapplicable: neither matrix of the pair is regular"
        )
    ev = np.linalg.eigvals(M)
    verdict = bool(ev.real.max() <= pair.tol * max(np.abs(M).max(), 1.0))
    return M, verdict


def singular_orthogonality_witness(pair: SymmetricPair, u, w) -> float:
    """Return u^T w for a singular certified pair with G u = F w.

    For singular eigencomplementary pairs this inner product vanishes; the
    returned value is the numerical witness of that orthogonality.
    """
    u = np.asarray(u, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    cert = check_pair(pair)
    if not cert.is_eigencomplementary:
        raise ValueError(f"pair is not eigencomplementary ({cert.failure_reason})")
    tol_abs = cert.tol_abs
    if np.abs(cert.eig_neg).min() > tol_abs or np.abs(cert.eig_pos).min() > tol_abs:
        raise LemmaInapplicableError("lemma inapplicable: pair is not both singular")
    gap = np.abs(pair.G @ u - pair.F @ w).max() if u.size else 0.0
    if gap > 10.0 * tol_abs * max(np.linalg.norm(u), np.linalg.norm(w), 1.0):
        raise ValueError(f"precondition G u = F w violated: max residual {gap:.3e}")
    return float(u @ w)


class GeneratedPair(NamedTuple):
    """An eigencomplementary pair with its construction ground truth."""

    pair: SymmetricPair
    basis: np.ndarray
    eig_neg: np.ndarray
    eig_pos: np.ndarray


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_eigencomplementary_pair(
    rng: np.random.Generator,
    L: int,
    singular: bool = False,
    tol: float = DEFAULT_TOL,
) -> GeneratedPair:
    """Draw a pair satisfying the definition by construction.

    With ``singular=True`` both matrices are singular and the spectra are
    complementary (each basis column carries exactly one zero eigenvalue);
    otherwise F is negative definite and G's eigenvalues are nonnegative
    with a few zeros mixed in.
    """
    S = random_orthogonal(rng, L)
    if singular:
        if L < 2:
            raise ValueError("singular pairs need L >= 2")
        k = int(rng.integers(1, L))
        xi = np.zeros(L)
        eta = np.zeros(L)
        xi[:k] = -rng.uniform(0.5, 2.0, size=k)
        eta[k:] = rng.uniform(0.5, 2.0, size=L - k)
        perm = rng.permutation(L)
        xi, eta = xi[perm], eta[perm]
    else:
        xi = -rng.uniform(0.5, 2.0, size=L)
        eta = rng.uniform(0.5, 2.0, size=L)
        eta[rng.random(L) < 0.3] = 0.0
    F = (S * xi) @ S.T
    G = (S * eta) @ S.T
    F = 0.5 * (F + F.T)
    G = 0.5 * (G + G.T)
    return GeneratedPair(SymmetricPair(F, G, tol), S, xi, eta)


def singular_witness_vectors(rng: np.random.Generator, gen: GeneratedPair):
    """Draw (u, w) with G u = F w = 0 for a singular generated pair.

    ``u`` is supported on the kernel of G (where F acts invertibly) and
    ``w`` on the kernel of F, mirroring the coordinate split used in the
    orthogonality argument.
    """
    in_ker_g = gen.eig_pos == 0.0
    gamma = np.where(in_ker_g, rng.standard_normal(gen.eig_pos.size), 0.0)
    beta = np.where(~in_ker_g, rng.standard_normal(gen.eig_pos.size), 0.0)
    return gen.basis @ gamma, gen.basis @ beta


def load_pair_file(path) -> SymmetricPair:
    """Read a pair from a whitespace-separated text file.

    Format: first line is L, followed by L rows of F and L rows of G.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError(f"{path}: empty pair file")
    try:
        L = int(tokens[0])
    except ValueError as exc:
        raise ValueError(f"{path}: first token must be the dimension L") from exc
    need = 1 + 2 * L * L
    if len(tokens) != need:
        raise ValueError(
            f"{path}: expected {need} numbers for L={L}, found {len(tokens)}"
        )
    vals = np.array([float(t) for t in tokens[1:]])
    F = vals[: L * L].reshape(L, L)
    G = vals[L * L :].reshape(L, L)
    return SymmetricPair(F, G)
