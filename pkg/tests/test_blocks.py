"""Tests for the block-system algebra and Schur complements."""

import numpy as np
import pytest
import scipy.sparse as sp

from helpers import linear_family, random_block_system, zero_family

from ssnewton.blocks import (
    BlockSystem,
    Dimensions,
    StateVector,
    SubgradientElement,
    assemble_H,
    eval_F,
    eval_affine,
    is_positive_definite,
    schur_E,
    schur_H,
    solve_monolithic,
    solve_via_schur,
)


class TestDimensions:
    def test_deviatoric_dimension_rule(self):
        assert Dimensions(2, 3, 4, 2).K == 2 * 3 + 2 * 4
        assert Dimensions(3, 2, 2, 5).total == 3 * 2 + 5 * 2 + 5 * 2

    @pytest.mark.parametrize("d,L", [(2, 5), (3, 2), (4, 2)])
    def test_invalid_combinations(self, d, L):
        with pytest.raises(ValueError):
            Dimensions(d, 1, 1, L)


class TestBlockSystemValidation:
    def test_rejects_asymmetric_A(self):
        A = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            BlockSystem(A, np.zeros((2, 2)), np.eye(2), [1.0], np.zeros(2), 2)

    def test_rejects_nonpositive_D(self):
        with pytest.raises(ValueError, match="positive"):
            BlockSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), [0.0], np.zeros(2), 2)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            BlockSystem(np.eye(2), np.zeros((2, 4)), np.eye(2), [1.0], np.zeros(2), 2)

    def test_d_diag_repeats_node_values(self):
        sys = BlockSystem(np.eye(2), np.zeros((2, 4)), np.eye(4), [3.0, 7.0], np.zeros(2), 2)
        assert np.array_equal(sys.d_diag, [3.0, 3.0, 7.0, 7.0])


class TestStateVector:
    def test_block_accessors_partition(self):
        x = StateVector(np.zeros(2), np.arange(6.0), np.arange(6.0) + 10)
        parts = [x.block_b(i, 2) for i in range(3)]
        assert np.array_equal(np.concatenate(parts), x.b)
        assert np.array_equal(x.block_c(1, 2), [12.0, 13.0])

    def test_concat_round_trip(self):
        rng = np.random.default_rng(0)
        sys = random_block_system(rng)
        x = StateVector(
            rng.standard_normal(sys.n_disp),
            rng.standard_normal(sys.n_strain),
            rng.standard_normal(sys.n_strain),
        )
        y = StateVector.from_concat(sys, x.concat())
        assert np.array_equal(y.a, x.a) and np.array_equal(y.b, x.b)


class TestEvalAffine:
    def test_zero_everything(self):
        sys = BlockSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), [1.0], np.zeros(2), 2)
        x = StateVector.zero(sys)
        assert np.array_equal(eval_affine(sys, x), np.zeros(4))

    def test_offset_only(self):
        l = np.array([2.0, -1.0])
        sys = BlockSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), [1.0], l, 2)
        out = eval_affine(sys, StateVector.zero(sys))
        assert np.array_equal(out, [2.0, -1.0, 0.0, 0.0])

    def test_one_node_hand_example(self):
        # A=[2], B=0, C=[1], D=[3], l=[-1], state (1, 2, 1):
        # rows (2*1 - 1, 0 + 2 + 3*1) = (1, 5).
        sys = BlockSystem([[2.0]], [[0.0]], [[1.0]], [3.0], [-1.0], block_size=1)
        out = eval_affine(sys, StateVector([1.0], [2.0], [1.0]))
        assert np.array_equal(out, [1.0, 5.0])

    def test_dimension_mismatch(self):
        sys = BlockSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), [1.0], np.zeros(2), 2)
        with pytest.raises(ValueError, match="sizes"):
            eval_affine(sys, StateVector(np.zeros(3), np.zeros(2), np.zeros(2)))


class TestEvalF:
    def test_zero_blocks_pad_affine(self):
        rng = np.random.default_rng(1)
        sys = random_block_system(rng)
        fam = zero_family(sys.n_blocks, sys.L)
        x = StateVector(
            rng.standard_normal(sys.n_disp),
            rng.standard_normal(sys.n_strain),
            rng.standard_normal(sys.n_strain),
        )
        out = eval_F(sys, fam, x)
        assert np.array_equal(out[: sys.K], eval_affine(sys, x))
        assert np.array_equal(out[sys.K :], np.zeros(sys.n_strain))

    def test_family_shape_mismatch(self):
        rng = np.random.default_rng(2)
        sys = random_block_system(rng, n_blocks=3)
        fam = zero_family(4, sys.L)
        with pytest.raises(ValueError, match="family"):
            eval_F(sys, fam, StateVector.zero(sys))


class TestAssembleH:
    def test_layout_matches_manual_blocks(self):
        rng = np.random.default_rng(3)
        sys = random_block_system(rng, n_disp=4, n_blocks=2, L=2)
        fam = linear_family(2, 2)
        sub = assemble_H(sys, fam, StateVector.zero(sys))
        H = sub.H.toarray()
        n, m = sys.n_disp, sys.n_strain
        manual = np.zeros((n + 2 * m, n + 2 * m))
        manual[:n, :n] = sys.A.toarray()
        manual[:n, n : n + m] = sys.B.toarray()
        manual[n : n + m, :n] = sys.B.toarray().T
        manual[n : n + m, n : n + m] = sys.C.toarray()
        manual[n : n + m, n + m :] = np.diag(sys.d_diag)
        manual[n + m :, n + m :] = np.eye(m)
        assert np.array_equal(H, manual)

    def test_off_block_entries_exactly_zero(self):
        rng = np.random.default_rng(4)
        sys = random_block_system(rng, n_blocks=3, L=2)
        X = rng.standard_normal((3, 2, 2))
        Y = rng.standard_normal((3, 2, 2))
        sub = SubgradientElement(sys, X, Y)
        Xd = sub.X.toarray()
        for i in range(3):
            block = Xd[2 * i : 2 * i + 2, 2 * i : 2 * i + 2]
            assert np.array_equal(block, X[i])
        mask = np.kron(np.eye(3), np.ones((2, 2)))
        assert np.all(Xd[mask == 0] == 0.0)

    def test_zero_family_singular(self):
        rng = np.random.default_rng(5)
        sys = random_block_system(rng)
        sub = assemble_H(sys, zero_family(sys.n_blocks, sys.L), StateVector.zero(sys))
        assert np.linalg.matrix_rank(sub.H.toarray()) < sys.total


class TestSchurComplements:
    def test_schur_E_without_coupling(self):
        rng = np.random.default_rng(6)
        sys = random_block_system(rng, coupling=0.0)
        assert np.allclose(schur_E(sys), sys.C.toarray())

    def test_schur_E_identity_arithmetic(self):
        # A = I, B = I, C = 2I: S_E = 2I - I = I.
        n = 4
        sys = BlockSystem(np.eye(n), np.eye(n), 2 * np.eye(n), [1.0, 1.0], np.zeros(n), 2)
        assert np.allclose(schur_E(sys), np.eye(n))

    def test_schur_E_positive_definite(self):
        rng = np.random.default_rng(7)
        sys = random_block_system(rng)
        S = schur_E(sys)
        assert is_positive_definite(S)

    def test_schur_H_without_X(self):
        rng = np.random.default_rng(8)
        sys = random_block_system(rng, n_blocks=3, L=2)
        Y = rng.standard_normal((3, 2, 2))
        sub = SubgradientElement(sys, np.zeros((3, 2, 2)), Y)
        assert np.allclose(schur_H(sub), sub.Y.toarray())

    def test_schur_H_elastic_state(self):
        # Y = 0 and X = -rho*sigma*I gives S_H = rho*sigma * S_E^-1 D,
        # which is regular.
        rng = np.random.default_rng(9)
        sys = random_block_system(rng, n_blocks=3, L=2)
        rho_sigma = 125.0
        X = np.tile(-rho_sigma * np.eye(2), (3, 1, 1))
        sub = SubgradientElement(sys, X, np.zeros((3, 2, 2)))
        S_H = schur_H(sub)
        expected = rho_sigma * np.linalg.solve(schur_E(sys), np.diag(sys.d_diag))
        assert np.allclose(S_H, expected)
        assert np.linalg.matrix_rank(S_H) == 6

    def test_schur_H_regular_for_eigencomplementary_pairs(self):
        from ssnewton.eigencomp import random_eigencomplementary_pair

        rng = np.random.default_rng(10)
        for trial in range(25):
            L = int(rng.integers(2, 4))
            n_blocks = int(rng.integers(2, 5))
            sys = random_block_system(rng, n_disp=5, n_blocks=n_blocks, L=L)
            X = np.empty((n_blocks, L, L))
            Y = np.empty((n_blocks, L, L))
            for i in range(n_blocks):
                gen = random_eigencomplementary_pair(rng, L, singular=bool(rng.integers(0, 2)))
                X[i], Y[i] = gen.pair.F, gen.pair.G
            S_H = schur_H(SubgradientElement(sys, X, Y))
            sv = np.linalg.svd(S_H, compute_uv=False)
            assert sv.min() > 1e-10 * sv.max()

    def test_block_elimination_matches_monolithic(self):
        rng = np.random.default_rng(11)
        sys = random_block_system(rng, n_disp=8, n_blocks=4, L=2)
        X = np.tile(-2.0 * np.eye(2), (4, 1, 1))
        Y = np.tile(np.eye(2), (4, 1, 1)) + 0.1 * rng.standard_normal((4, 2, 2))
        sub = SubgradientElement(sys, X, Y)
        r = rng.standard_normal(sys.total)
        z_mono = solve_monolithic(sub, r)
        z_schur = solve_via_schur(sub, r)
        assert np.linalg.norm(z_mono - z_schur) <= 1e-10 * np.linalg.norm(z_mono)


class TestPositiveDefinite:
    def test_accepts_spd(self):
        assert is_positive_definite(np.eye(3))

    def test_rejects_indefinite(self):
        assert not is_positive_definite(np.diag([1.0, -1.0]))

    def test_rejects_asymmetric(self):
        assert not is_positive_definite(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_sparse_input(self):
        assert is_positive_definite(sp.eye(4))
