"""Selection matrices and block mass/potential matrices for one coarse mode.

Per coarse mode the d participating fine modes split into the followed
combination (coefficients c_k, k=0..d-1) and d-1 environment modes.  In the
scaled units used throughout (mass = spring_frequency = 1, sum |c_k|^2 = 1)
the blocks are

    M_SS = 1/|c0|^2            M_TT = I + u u+        u_b = conj(c_b)/|c0|
    V_SS = w0^2/|c0|^2 * |c0|^2 ...                   (see build_blocks)
    V_TT = diag(w_b^2) + w0^2 u u+

i.e. identity/diagonal plus a rank-one update, which is what every solver
here exploits.  The reduced single-mode forms collapse to constants because
sum |c_k|^2 = 1 (the physical constant is group_size * mass).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chain import ContractError, ModeBasis

DENSE_EIG_LIMIT = 4096


class SingularOperatorError(np.linalg.LinAlgError):
    """Diagonal-plus-rank-one system is genuinely singular."""


def sherman_morrison_solve(diagonal, vector, coeff, rhs):
    """Solve (diag(diagonal) + coeff * vector vector^H) x = rhs in O(d).

    Handles one exactly-zero diagonal entry provided the rank-one part is
    nonzero there (the inverse still exists); more than one zero, or a zero
    paired with a vanishing vector entry, is genuinely singular.
    """
    f = np.asarray(diagonal, dtype=complex)
    u = np.asarray(vector, dtype=complex)
    y = np.asarray(rhs, dtype=complex)
    if f.shape != u.shape or f.shape != y.shape:
        raise ContractError("diagonal, vector, rhs must share shape")
    if coeff == 0 or not np.any(u):
        if np.any(f == 0):
            raise SingularOperatorError("zero diagonal entry with no rank-one part")
        return y / f
    zero = np.flatnonzero(f == 0)
    if zero.size == 0:
        fy = y / f
        fu = u / f
        denom = 1.0 + coeff * np.vdot(u, fu)
        if denom == 0:
            raise SingularOperatorError("rank-one update cancels the diagonal")
        return fy - fu * (coeff * np.vdot(u, fy) / denom)
    if zero.size > 1:
        raise SingularOperatorError("more than one vanishing diagonal entry")
    i0 = zero[0]
    if u[i0] == 0:
        raise SingularOperatorError("zero diagonal entry with zero vector entry")
    # row i0 fixes s = u^H x, the rest follows entrywise
    s = y[i0] / (coeff * u[i0])
    mask = np.ones(f.size, dtype=bool)
    mask[i0] = False
    x = np.zeros_like(y)
    x[mask] = (y[mask] - coeff * u[mask] * s) / f[mask]
    x[i0] = (s - np.vdot(u[mask], x[mask])) / np.conj(u[i0])
    return x


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigendecomposition of the effective frequency matrix M^-1/2 V M^-1/2."""

    eigvals_sq: np.ndarray     # nu_k^2, ascending
    eigvecs: np.ndarray        # columns v_k, orthonormal

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.eigvals_sq)


@dataclass(eq=False)
class BlockSystem:
    """Blocks for one coarse mode, stored through their rank-one structure."""

    mode_index: int
    coeffs: np.ndarray            # all d scaled coefficients, coeffs[0] = c0
    frequencies: np.ndarray       # all d scaled frequencies, frequencies[0] = w0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if self.coeffs.shape != self.frequencies.shape:
            raise ContractError("coeffs and frequencies must share shape")

    # -- scalars and vectors -------------------------------------------------
    @property
    def c0(self) -> complex:
        return self.coeffs[0]

    @property
    def env_coeffs(self) -> np.ndarray:
        return self.coeffs[1:]

    @property
    def w0(self) -> float:
        return self.frequencies[0]

    @property
    def env_frequencies(self) -> np.ndarray:
        return self.frequencies[1:]

    @property
    def environment_dim(self) -> int:
        return self.coeffs.size - 1

    @cached_property
    def rank_one_vector(self) -> np.ndarray:
        """u with M_TT = I + u u^H and V_TT = diag(w_b^2) + w0^2 u u^H."""
        return np.conj(self.env_coeffs) / abs(self.c0)

    @property
    def m_ss(self) -> float:
        return 1.0 / abs(self.c0) ** 2

    @property
    def v_ss(self) -> float:
        return self.w0 ** 2 / abs(self.c0) ** 2

    @property
    def m_st(self) -> np.ndarray:
        return -self.env_coeffs / abs(self.c0) ** 2

    @property
    def v_st(self) -> np.ndarray:
        return -self.w0 ** 2 * self.env_coeffs / abs(self.c0) ** 2

    @cached_property
    def m_tt(self) -> np.ndarray:
        u = self.rank_one_vector
        return np.eye(self.environment_dim) + np.outer(u, np.conj(u))

    @cached_property
    def v_tt(self) -> np.ndarray:
        u = self.rank_one_vector
        return np.diag(self.env_frequencies ** 2) + self.w0 ** 2 * np.outer(u, np.conj(u))

    @property
    def omega_q_sq(self) -> np.ndarray:
        return self.env_frequencies ** 2

    # -- rank-one solves -----------------------------------------------------
    def solve_m_tt(self, rhs: np.ndarray) -> np.ndarray:
        u = self.rank_one_vector
        return sherman_morrison_solve(np.ones(u.size), u, 1.0, rhs)

    def solve_v_tt(self, rhs: np.ndarray) -> np.ndarray:
        u = self.rank_one_vector
        return sherman_morrison_solve(self.env_frequencies ** 2, u, self.w0 ** 2, rhs)

    def solve_v_minus_w2_m(self, w_sq: float, rhs: np.ndarray) -> np.ndarray:
        """Apply (V_TT - w^2 M_TT)^-1; exists even when one diagonal entry vanishes."""
        u = self.rank_one_vector
        return sherman_morrison_solve(self.env_frequencies ** 2 - w_sq, u,
                                      self.w0 ** 2 - w_sq, rhs)

    def _half_power(self, sign: int) -> np.ndarray:
        u = self.rank_one_vector
        uu = float(np.real(np.vdot(u, u)))
        eye = np.eye(self.environment_dim)
        if uu == 0:
            return eye
        beta = (1.0 + uu) ** (0.5 * sign) - 1.0
        return eye + beta * np.outer(u, np.conj(u)) / uu

    @cached_property
    def m_tt_half(self) -> np.ndarray:
        """Closed-form square root of I + u u^H."""
        return self._half_power(+1)

    @cached_property
    def m_tt_half_inv(self) -> np.ndarray:
        return self._half_power(-1)

    @cached_property
    def spectral(self) -> SpectralData:
        return effective_frequency(self)

    def coupling_row(self) -> np.ndarray:
        """Weights c_b (w0^2 - w_b^2) of the environment modes in the noise."""
        return self.env_coeffs * (self.w0 ** 2 - self.env_frequencies ** 2)

    @cached_property
    def spectral_weights(self) -> np.ndarray:
        """alpha_k = sum_b c_b (w0^2 - w_b^2) (M^-1/2 v_k)_b per eigenpair."""
        sd = self.spectral
        return self.coupling_row() @ (self.m_tt_half_inv @ sd.eigvecs)

    @cached_property
    def transform_weights(self) -> np.ndarray:
        """beta_k = v_k^H M^-1/2 conj(c), right factor of the retarded kernel."""
        sd = self.spectral
        return np.conj(sd.eigvecs).T @ (self.m_tt_half_inv @ np.conj(self.env_coeffs))


def build_selection(basis: ModeBasis):
    """Explicit selection matrices: S picks the followed combination, T the rest.

    For clump_size 1 the environment is empty: T has zero columns.
    """
    c = basis.scaled_coeffs
    d = basis.clump_size
    S = np.zeros((d, 1), dtype=complex)
    S[0, 0] = 1.0 / c[0]
    T = np.zeros((d, d - 1), dtype=complex)
    if d >= 2:
        T[0, :] = -c[1:] / c[0]
        T[1:, :] = np.eye(d - 1)
    return S, T


def build_blocks(basis: ModeBasis) -> BlockSystem:
    """BlockSystem for one coarse mode, in scaled units."""
    return BlockSystem(mode_index=basis.mode_index,
                       coeffs=basis.scaled_coeffs.copy(),
                       frequencies=basis.fine_frequencies.copy())


def reduced_forms(blocks: BlockSystem):
    """Single-mode reduction (kinetic, potential, coupling vector).

    kinetic = 1/sum|c|^2 (= group_size * mass in physical units), potential =
    kinetic * w0^2, coupling_b = kinetic * c_b (w0^2 - w_b^2).
    """
    total = abs(blocks.c0) ** 2 + float(np.sum(np.abs(blocks.env_coeffs) ** 2))
    kinetic = 1.0 / total
    potential = kinetic * blocks.w0 ** 2
    coupling = kinetic * blocks.env_coeffs * (blocks.w0 ** 2 - blocks.env_frequencies ** 2)
    return kinetic, potential, coupling


def effective_frequency(blocks: BlockSystem) -> SpectralData:
    """Spectral data of M_TT^-1/2 V_TT M_TT^-1/2 (dense Hermitian solve)."""
    n = blocks.environment_dim
    if n == 0:
        return SpectralData(np.zeros(0), np.zeros((0, 0)))
    if n > DENSE_EIG_LIMIT:
        raise ContractError(
            f"dense eigendecomposition capped at {DENSE_EIG_LIMIT}; noise strength "
            "and kernel traces have O(d) closed forms that avoid it")
    mat = blocks.m_tt_half_inv @ blocks.v_tt @ blocks.m_tt_half_inv
    vals, vecs = np.linalg.eigh(mat)
    if np.any(vals <= 0) and blocks.mode_index > 0:
        raise SingularOperatorError("effective frequency matrix not positive definite")
    return SpectralData(vals, vecs)
