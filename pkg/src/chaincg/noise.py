"""Classical noise acting on a coarse mode: both closed forms and statistics.

Scaled units throughout: mass = spring_frequency = kT = 1 and normalized
coefficients (sum |c_k|^2 = 1).  In these units the time-averaged noise
strength S^2 is directly in the reporting unit kT*omega^2/(group_size*mass),
and times are in units of 1/omega.

Two algebraically different noise forms drive the same dynamics:
  * simple     -- environment modes evolved at their own frequencies,
  * lagrangian -- environment eliminated through the coupled mass matrix,
                  oscillating at the effective frequencies nu_k.
They are related by an invertible Volterra transform (see verify module).

Thermal statistics of the environment offsets come in two flavors:
  * "conditional"  -- thermal fluctuations at fixed followed mode; covariances
                      kT V_TT^-1 (offsets) and kT M_TT^-1 (velocities).
  * "independent"  -- plain per-mode thermal sampling; diagonal covariances.
The conditional flavor is what the noise-strength curves use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockSystem
from .chain import ContractError, ModeBasis, mode_basis


@dataclass(eq=False)
class NoiseRealization:
    """One draw of initial environment offsets/velocities (deviations from means)."""

    env_offsets: np.ndarray
    env_velocities: np.ndarray
    form: str = "simple"

    def __post_init__(self):
        self.env_offsets = np.asarray(self.env_offsets, dtype=complex)
        self.env_velocities = np.asarray(self.env_velocities, dtype=complex)
        if self.env_offsets.shape != self.env_velocities.shape:
            raise ContractError("offsets and velocities must share shape")
        if self.form not in ("simple", "lagrangian"):
            raise ContractError(f"unknown noise form {self.form!r}")


@dataclass(frozen=True)
class NoiseSpectrum:
    """Time-averaged noise strength of one (L, d) point and its per-mode split."""

    mode_index: int
    clump_size: int
    strength: float                      # S^2, units kT w^2 / (group_size mass)
    per_mode: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.strength < -1e-15:
            raise ContractError("noise strength must be nonnegative")


def thermal_realization(blocks: BlockSystem, rng: np.random.Generator,
                        kT: float = 1.0, stats: str = "conditional") -> NoiseRealization:
    """Draw (env offsets, env velocities) from the thermal environment.

    conditional: sample all d participating modes thermally, then subtract the
    regression on the followed combination, which realizes the fixed-coarse-mode
    covariances kT V_TT^-1 / kT M_TT^-1 exactly.
    """
    c = blocks.coeffs
    w = blocks.frequencies
    d = c.size
    if blocks.environment_dim == 0:
        return NoiseRealization(np.zeros(0), np.zeros(0))
    if blocks.mode_index == 0:
        # followed frequency 0: no thermal amplitude for it; environment decoupled
        amp_var = np.concatenate([[0.0], kT / w[1:] ** 2])
    else:
        amp_var = kT / w ** 2
    a = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) * np.sqrt(amp_var / 2)
    v = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) * np.sqrt(kT / 2)
    if stats == "independent":
        return NoiseRealization(a[1:], v[1:])
    if stats != "conditional":
        raise ContractError(f"unknown stats flavor {stats!r}")
    A = c @ a
    Adot = c @ v
    var_a = np.sum(np.abs(c) ** 2 * amp_var)
    var_v = np.sum(np.abs(c) ** 2) * kT
    dq = a[1:] - (np.conj(c[1:]) * amp_var[1:] / var_a) * A if var_a > 0 else a[1:]
    dv = v[1:] - (np.conj(c[1:]) * kT / var_v) * Adot
    return NoiseRealization(dq, dv)


def noise_simple(t, realization: NoiseRealization, blocks: BlockSystem):
    """Direct noise form: coupling-weighted free evolution of the environment."""
    wb = blocks.env_frequencies
    if blocks.environment_dim == 0:
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
    tt = np.asarray(t, dtype=float)[..., None]
    motion = (np.cos(wb * tt) * realization.env_offsets
              + np.sin(wb * tt) * realization.env_velocities / wb)
    out = motion @ blocks.coupling_row()
    return out if np.ndim(t) else complex(out)


def noise_lagrangian(t, realization: NoiseRealization, blocks: BlockSystem):
    """Eliminated-environment noise form, via spectral data of the effective matrix.

    Scaled so that it equals (I + G) applied to the simple form; the physical
    prefactor is group_size * mass.
    """
    if blocks.environment_dim == 0:
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
    sd = blocks.spectral
    nu = sd.frequencies
    alpha = blocks.spectral_weights
    yq = np.conj(sd.eigvecs).T @ (blocks.m_tt_half @ realization.env_offsets)
    yv = np.conj(sd.eigvecs).T @ (blocks.m_tt_half @ realization.env_velocities)
    tt = np.asarray(t, dtype=float)[..., None]
    out = (np.cos(nu * tt) * yq + np.sin(nu * tt) * yv / nu) @ alpha
    return out if np.ndim(t) else complex(out)


def mean_force(t, blocks: BlockSystem, env_mean_offsets, env_mean_velocities):
    """Expected forcing from nonzero environment means (excited low modes)."""
    wb = blocks.env_frequencies
    if blocks.environment_dim == 0:
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
    q0 = np.asarray(env_mean_offsets, dtype=complex)
    v0 = np.asarray(env_mean_velocities, dtype=complex)
    tt = np.asarray(t, dtype=float)[..., None]
    motion = np.cos(wb * tt) * q0 + np.sin(wb * tt) * v0 / wb
    out = motion @ blocks.coupling_row()
    return out if np.ndim(t) else complex(out)


def _rank_one_denominator(blocks: BlockSystem) -> float:
    """Shared denominator of the fixed-coarse-mode covariance corrections.

    Cq_{bb'} = kT [delta/wb^2 - w0^2 conj(c_b) c_b' / (wb^2 wb'^2 Z)],
    Cp_{bb'} = kT [delta - conj(c_b) c_b']  (with sum |c_k|^2 = 1).
    """
    cb = blocks.env_coeffs
    wb = blocks.env_frequencies
    return abs(blocks.c0) ** 2 + blocks.w0 ** 2 * np.sum(np.abs(cb) ** 2 / wb ** 2)


def corr_simple(t, tp, blocks: BlockSystem, kT: float = 1.0,
                stats: str = "conditional") -> float:
    """Two-time correlation of the simple noise form, units kT w^2/(group_size mass)."""
    if blocks.environment_dim == 0:
        return 0.0
    cb = blocks.env_coeffs
    wb = blocks.env_frequencies
    w = blocks.coupling_row()
    cos_t, cos_tp = np.cos(wb * t), np.cos(wb * tp)
    sin_t, sin_tp = np.sin(wb * t) / wb, np.sin(wb * tp) / wb
    diag_q = 1.0 / wb ** 2
    val = np.sum(np.abs(w) ** 2 * (cos_t * cos_tp * diag_q + sin_t * sin_tp))
    if stats == "conditional":
        Z = _rank_one_denominator(blocks)
        gq = w * np.conj(cb) / wb ** 2
        gp = w * np.conj(cb)
        val -= blocks.w0 ** 2 * np.real((gq @ cos_t) * np.conj(gq @ cos_tp)) / Z
        val -= np.real((gp @ sin_t) * np.conj(gp @ sin_tp))
    elif stats != "independent":
        raise ContractError(f"unknown stats flavor {stats!r}")
    return kT * float(np.real(val))


def corr_lagrangian(t, tp, blocks: BlockSystem, kT: float = 1.0) -> float:
    """Two-time correlation of the eliminated-environment noise form.

    Scaled value; the physical correlation carries an extra group_size * kT *
    mass * omega^2 prefactor relative to the simple form's unit.
    """
    if blocks.environment_dim == 0:
        return 0.0
    sd = blocks.spectral
    alpha = blocks.spectral_weights
    return kT * float(np.sum(np.abs(alpha) ** 2
                             * np.cos(sd.frequencies * (t - tp)) / sd.eigvals_sq))


def noise_strength(L: int, clump_size: int, groups: int,
                   exact_final_factor: bool = True,
                   exact_average: bool = False,
                   basis: ModeBasis | None = None) -> NoiseSpectrum:
    """Time-averaged noise strength S^2 in units kT w^2/(group_size mass).

    The per-mode final factor (w_b^2 V_TT^-1 + M_TT^-1)_{bb}/2 comes from the
    fixed-coarse-mode thermal statistics; with exact_final_factor=False it is
    replaced by 1 (plain per-mode thermal sampling).  exact_average adds the
    cross terms of exactly degenerate environment frequencies (integer
    coincidences of the wavenumber map), which only exist at L in {0, groups/2}.
    """
    if basis is None:
        basis = mode_basis(groups, L, clump_size)
    if clump_size == 1:
        return NoiseSpectrum(L, 1, 0.0, np.zeros(0))
    cb = basis.scaled_coeffs[1:]
    wb = basis.fine_frequencies[1:]
    w0 = basis.fine_frequencies[0]
    ab2 = np.abs(cb) ** 2
    base = ab2 * (wb ** 2 - w0 ** 2) ** 2 / wb ** 2
    if exact_final_factor:
        Z = np.abs(basis.scaled_coeffs[0]) ** 2 + w0 ** 2 * np.sum(ab2 / wb ** 2)
        v_inv_kk = 1.0 / wb ** 2 - w0 ** 2 * ab2 / (wb ** 4 * Z)
        m_inv_kk = 1.0 - ab2
        factor = 0.5 * (wb ** 2 * v_inv_kk + m_inv_kk)
    else:
        factor = np.ones_like(wb)
    per_mode = base * factor
    total = float(np.sum(per_mode))
    if exact_average and exact_final_factor:
        total += _degenerate_cross_terms(basis)
    return NoiseSpectrum(L, clump_size, total, per_mode)


def _degenerate_cross_terms(basis: ModeBasis) -> float:
    """Time-average cross terms between exactly equal environment frequencies.

    Degeneracy is decided by integer equality of the wavenumber map, not by
    floating comparison.  Under circularly-symmetric mode statistics the pairs
    (which share a single fine mode) have vanishing conjugated covariance, so
    only the fixed-coarse-mode rank-one correction contributes.
    """
    m = basis.index_map[1:]
    cb = basis.scaled_coeffs[1:]
    wb = basis.fine_frequencies[1:]
    w0 = basis.fine_frequencies[0]
    c0 = basis.scaled_coeffs[0]
    Z = abs(c0) ** 2 + w0 ** 2 * np.sum(np.abs(cb) ** 2 / wb ** 2)
    w = cb * (w0 ** 2 - wb ** 2)
    total = 0.0
    groups: dict[int, list[int]] = {}
    for i, mi in enumerate(m):
        groups.setdefault(int(mi), []).append(i)
    for idxs in groups.values():
        for a in idxs:
            for b in idxs:
                if a == b:
                    continue
                gq = w[a] * np.conj(cb[a]) / wb[a] ** 2 * np.conj(w[b] * np.conj(cb[b]) / wb[b] ** 2)
                gp = w[a] * np.conj(cb[a]) * np.conj(w[b] * np.conj(cb[b]))
                total -= 0.5 * float(np.real(w0 ** 2 * gq / Z + gp))
    return total


def asymptotic_estimates(L: int, clump_size: int, groups: int) -> tuple[float, float]:
    """Small-L estimates: ((pi L/groups)^2, (pi L/groups)^2/clump_size).

    These are the quoted order-of-magnitude forms.  The honest large-d limit
    of S^2 * d is 4 sin^2(pi L/groups), a factor ~4 above the second estimate;
    see large_d_limit.
    """
    base = (np.pi * L / groups) ** 2
    return base, base / clump_size


def large_d_limit(L: int, groups: int) -> float:
    """Exact large-clump-size limit of S^2 * d: 4 sin^2(pi L / groups)."""
    return 4.0 * np.sin(np.pi * L / groups) ** 2
