import numpy as np
import pytest

from chaincg.blocks import (BlockSystem, SingularOperatorError, build_blocks,
                            build_selection, effective_frequency, reduced_forms,
                            sherman_morrison_solve)
from chaincg.chain import ContractError, mode_basis

GRID = [(630, 1, 2), (630, 30, 3), (630, 30, 8), (630, 100, 16), (630, 315, 5),
        (16, 2, 8), (16, 4, 4), (630, 1, 64)]


def dense_blocks(basis):
    S, T = build_selection(basis)
    W2 = np.diag(basis.fine_frequencies ** 2).astype(complex)
    return S, T, T.conj().T @ T, T.conj().T @ W2 @ T


class TestSelection:
    def test_d2_shape(self):
        basis = mode_basis(630, 30, 2)
        S, T = build_selection(basis)
        assert T.shape == (2, 1)
        c = basis.scaled_coeffs
        assert T[0, 0] == pytest.approx(-c[1] / c[0])
        assert T[1, 0] == 1.0

    def test_empty_environment(self):
        S, T = build_selection(mode_basis(16, 3, 1))
        assert T.shape == (1, 0)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_selection_spans_modes(self, M, L, d):
        basis = mode_basis(M, L, d)
        S, T = build_selection(basis)
        full = np.hstack([S, T])
        assert np.linalg.matrix_rank(full) == d


class TestBlocks:
    def test_d2_mass_block(self):
        basis = mode_basis(630, 30, 2)
        blocks = build_blocks(basis)
        c = basis.scaled_coeffs
        expect = 1.0 + abs(c[1]) ** 2 / abs(c[0]) ** 2
        assert blocks.m_tt.shape == (1, 1)
        assert blocks.m_tt[0, 0].real == pytest.approx(expect)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_mass_block_matches_dense(self, M, L, d):
        basis = mode_basis(M, L, d)
        blocks = build_blocks(basis)
        _, _, m_dense, v_dense = dense_blocks(basis)
        assert np.allclose(blocks.m_tt, m_dense, atol=1e-13)
        assert np.allclose(blocks.v_tt, v_dense, atol=1e-12)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_reduced_forms_match_dense_solve(self, M, L, d):
        basis = mode_basis(M, L, d)
        blocks = build_blocks(basis)
        S, T, m_dense, v_dense = dense_blocks(basis)
        minv = np.linalg.inv(m_dense)
        W2 = np.diag(basis.fine_frequencies ** 2).astype(complex)
        m_st = (S.conj().T @ T)[0]
        v_st = (S.conj().T @ W2 @ T)[0]
        m_ss = (S.conj().T @ S)[0, 0].real
        v_ss = (S.conj().T @ W2 @ S)[0, 0].real
        kin, pot, coup = reduced_forms(blocks)
        assert kin == pytest.approx(m_ss - np.real(m_st @ minv @ np.conj(m_st)),
                                    rel=1e-10)
        assert pot == pytest.approx(v_ss - np.real(m_st @ minv @ np.conj(v_st)),
                                    rel=1e-10)
        dense_coup = -(v_st - m_st @ minv @ v_dense)
        assert np.allclose(coup, dense_coup, rtol=1e-10, atol=1e-13)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_reduction_constant_is_unity(self, M, L, d):
        kin, pot, _ = reduced_forms(build_blocks(mode_basis(M, L, d)))
        w0 = mode_basis(M, L, d).fine_frequencies[0]
        assert kin == pytest.approx(1.0, abs=1e-12)
        assert pot == pytest.approx(w0 ** 2, rel=1e-12, abs=1e-300)

    def test_d2_reduced_forms_by_hand(self):
        # single environment mode: everything collapses to scalars
        basis = mode_basis(630, 30, 2)
        c0, c1 = basis.scaled_coeffs
        w0, w1 = basis.fine_frequencies
        kin, pot, coup = reduced_forms(build_blocks(basis))
        denom = abs(c0) ** 2 + abs(c1) ** 2
        assert kin == pytest.approx(1.0 / denom)
        assert pot == pytest.approx(w0 ** 2 / denom)
        assert coup[0] == pytest.approx(c1 * (w0 ** 2 - w1 ** 2) / denom)


class TestEffectiveFrequency:
    def test_d2_scalar_ratio(self):
        blocks = build_blocks(mode_basis(630, 30, 2))
        sd = effective_frequency(blocks)
        expect = blocks.v_tt[0, 0].real / blocks.m_tt[0, 0].real
        assert sd.eigvals_sq[0] == pytest.approx(expect)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_half_power_squares(self, M, L, d):
        blocks = build_blocks(mode_basis(M, L, d))
        assert np.allclose(blocks.m_tt_half @ blocks.m_tt_half, blocks.m_tt,
                           atol=1e-12)
        eye = np.eye(blocks.environment_dim)
        assert np.allclose(blocks.m_tt_half @ blocks.m_tt_half_inv, eye, atol=1e-12)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_eigvals_positive_and_bounded(self, M, L, d):
        if L == 0:
            return
        blocks = build_blocks(mode_basis(M, L, d))
        sd = effective_frequency(blocks)
        wb2 = blocks.env_frequencies ** 2
        rayleigh_hi = float(np.max(np.linalg.eigvalsh(blocks.v_tt)))
        assert np.all(sd.eigvals_sq > 0)
        assert sd.eigvals_sq[0] >= np.min(wb2) * (1 - 1e-12) or \
            sd.eigvals_sq[0] <= np.min(wb2)  # lowest may dip below the diagonal
        assert sd.eigvals_sq[-1] <= rayleigh_hi * (1 + 1e-12)

    @pytest.mark.parametrize("M,L,d", GRID)
    def test_eigensystem_reconstructs_matrix(self, M, L, d):
        blocks = build_blocks(mode_basis(M, L, d))
        sd = effective_frequency(blocks)
        mat = blocks.m_tt_half_inv @ blocks.v_tt @ blocks.m_tt_half_inv
        rec = (sd.eigvecs * sd.eigvals_sq) @ sd.eigvecs.conj().T
        assert np.allclose(rec, mat, atol=1e-12)

    def test_size_guard(self):
        blocks = BlockSystem(1, np.ones(5000) / np.sqrt(5000), np.ones(5000))
        with pytest.raises(ContractError):
            effective_frequency(blocks)


class TestShermanMorrison:
    def test_plain_diagonal(self):
        f = np.array([2.0, 3.0, 4.0])
        y = np.array([1.0, 1.0, 1.0])
        x = sherman_morrison_solve(f, np.zeros(3), 1.0, y)
        assert np.allclose(x, y / f)

    def test_matches_dense(self):
        rng = np.random.default_rng(8)
        for lam in (0.7, -0.45):
            f = rng.uniform(0.5, 2.0, size=9)
            u = rng.normal(size=9) + 1j * rng.normal(size=9)
            y = rng.normal(size=9) + 1j * rng.normal(size=9)
            mat = np.diag(f).astype(complex) + lam * np.outer(u, np.conj(u))
            x = sherman_morrison_solve(f, u, lam, y)
            assert np.allclose(x, np.linalg.solve(mat, y), atol=1e-12)

    def test_one_zero_diagonal(self):
        rng = np.random.default_rng(9)
        f = np.array([1.3, 0.0, 2.4, 0.9])
        u = rng.normal(size=4) + 1j * rng.normal(size=4)
        y = rng.normal(size=4) + 1j * rng.normal(size=4)
        lam = -0.8
        mat = np.diag(f).astype(complex) + lam * np.outer(u, np.conj(u))
        x = sherman_morrison_solve(f, u, lam, y)
        assert np.allclose(mat @ x, y, atol=1e-12)

    def test_two_zero_diagonals_singular(self):
        with pytest.raises(SingularOperatorError):
            sherman_morrison_solve(np.array([0.0, 0.0, 1.0]), np.ones(3), 1.0,
                                   np.ones(3))

    def test_potential_block_round_trip(self):
        rng = np.random.default_rng(10)
        blocks = build_blocks(mode_basis(630, 30, 16))
        x = rng.normal(size=15) + 1j * rng.normal(size=15)
        back = blocks.v_tt @ blocks.solve_v_tt(x)
        assert np.allclose(back, x, rtol=1e-10, atol=1e-12)
