"""Decoherence kernel of the coarse-graining family and derived timescales.

The interference-suppressing kernel for one coarse mode is proportional to the
two-time correlation of the eliminated-environment noise form.  Its equal-time
value is time-independent, so the time-averaged per-mode trace collapses to a
closed quadratic form in V_TT^-1, evaluated here in O(d) through the rank-one
structure.

Reporting units follow the curve conventions: kernel traces in
group_size*kT*mass*omega^2/(4 hbar^2), noise strengths in
kT*omega^2/(group_size*mass).  The timescale estimates are order-of-magnitude
relations and are flagged as such in every emitted record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockSystem, sherman_morrison_solve
from .chain import ChainGeometry, CoarseGrainingSpec, ContractError, ModeBasis, mode_basis
from .noise import noise_strength

# CODATA-style constants (SI)
HBAR = 1.054571817e-34          # J s
K_BOLTZMANN = 1.380649e-23      # J / K
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg


@dataclass(frozen=True)
class DecoherenceReport:
    """Per-(L, d) kernel trace plus the predictability timescale estimates."""

    mode_index: int
    clump_size: int
    kernel_trace: float          # units group_size kT mass omega^2 / (4 hbar^2)
    classical_ratio: float       # kernel trace / noise strength, dimensionless
    t_dyn: float
    t_decoh: float
    ratio_decoh_dyn: float
    thermal_wavelength: float
    noise_force: float
    dynamical_force: float
    noise_force_ratio: float
    thermal_excitation_scale: float
    op_count: float
    order_of_magnitude: bool = True

    def __post_init__(self):
        if self.kernel_trace < -1e-15:
            raise ContractError("kernel trace must be nonnegative")


def kernel_scaled(t, tp, blocks: BlockSystem) -> float:
    """Decoherence kernel K(t, t') in curve units (prefactor divided out)."""
    if blocks.environment_dim == 0:
        return 0.0
    sd = blocks.spectral
    alpha = blocks.spectral_weights
    return float(np.sum(np.abs(alpha) ** 2
                        * np.cos(sd.frequencies * (t - tp)) / sd.eigvals_sq))


def kernel(t, tp, blocks: BlockSystem, geometry: ChainGeometry) -> float:
    """Physical decoherence kernel, units of 1/time^2 (inverse action squared x energy...).

    Equals (group_size kT mass omega^2 / (4 hbar^2)) times the scaled kernel.
    """
    pref = (geometry.group_size * geometry.kT * geometry.mass
            * geometry.spring_frequency ** 2 / (4.0 * geometry.hbar ** 2))
    return pref * kernel_scaled(t, tp, blocks)


def trace_measure(L: int, clump_size: int, groups: int,
                  basis: ModeBasis | None = None) -> float:
    """Time-averaged kernel trace for mode L, in curve units.

    The equal-time kernel is stationary, so the average equals the instantaneous
    closed form c (w0^2 - WQ^2) V_TT^-1 (w0^2 - WQ^2) c-bar, computed in O(d).
    """
    if basis is None:
        basis = mode_basis(groups, L, clump_size)
    if clump_size == 1:
        return 0.0
    cb = basis.scaled_coeffs[1:]
    wb = basis.fine_frequencies[1:]
    w0 = basis.fine_frequencies[0]
    c0 = basis.scaled_coeffs[0]
    y = (w0 ** 2 - wb ** 2) * cb
    # V_TT^-1 y-bar with the pairing that cancels the coefficient phases
    u = np.conj(cb) / abs(c0)
    x = sherman_morrison_solve(wb ** 2, u, w0 ** 2, np.conj(y))
    return float(np.real(y @ x))


def trace_measure_physical(L: int, geometry: ChainGeometry) -> float:
    pref = (geometry.group_size * geometry.kT * geometry.mass
            * geometry.spring_frequency ** 2 / (4.0 * geometry.hbar ** 2))
    return pref * trace_measure(L, geometry.clump_size, geometry.groups)


def thermal_de_broglie(geometry: ChainGeometry) -> float:
    """hbar / sqrt(kT * mass)."""
    return geometry.hbar / np.sqrt(geometry.kT * geometry.mass)


def predictability_report(geometry: ChainGeometry, cg: CoarseGrainingSpec,
                          L: int, clump_size: int | None = None,
                          excitation_scale: float = 1.0,
                          horizon: float | None = None) -> DecoherenceReport:
    """Order-of-magnitude comparison of decoherence, noise, and evolution cost.

    t_dyn ~ (d/omega)(groups/L); F_noise ~ sqrt(kT omega^2 mass) sqrt(N/d) L/groups;
    t_decoh ~ hbar/(F_noise * range_width); the ratio collapses to
    (lambda_dB/range_width)/sqrt(N d).  All "~" relations; tolerances downstream
    should be factors, not percents.
    """
    d = geometry.clump_size if clump_size is None else clump_size
    if d < 2:
        raise ContractError("timescale estimates need an environment (clump_size >= 2)")
    if L < 1:
        raise ContractError("timescale estimates need a propagating mode (L >= 1)")
    cg.validate(geometry)
    M, N = geometry.groups, geometry.group_size
    w = geometry.spring_frequency
    kT = geometry.kT
    mass = geometry.mass
    t_dyn = (d / w) * (M / L)
    f_noise = np.sqrt(kT * w ** 2 * mass) * np.sqrt(N / d) * (L / M)
    t_decoh = geometry.hbar / (f_noise * cg.range_width)
    ratio = (thermal_de_broglie(geometry) / cg.range_width) / np.sqrt(N * d)
    f_dyn = N * mass * excitation_scale / t_dyn ** 2
    omega_l = 2.0 * w * np.sin(np.pi * L / (M * d))
    thermal_scale = np.sqrt(kT / (N * mass * omega_l ** 2))
    span = t_dyn if horizon is None else horizon
    ops = L * w * span / d
    ktr = trace_measure(L, d, M)
    s2 = noise_strength(L, d, M).strength
    return DecoherenceReport(
        mode_index=L, clump_size=d,
        kernel_trace=ktr,
        classical_ratio=ktr / s2 if s2 > 0 else float("nan"),
        t_dyn=t_dyn, t_decoh=t_decoh, ratio_decoh_dyn=ratio,
        thermal_wavelength=thermal_de_broglie(geometry),
        noise_force=f_noise, dynamical_force=f_dyn,
        noise_force_ratio=f_noise / f_dyn,
        thermal_excitation_scale=thermal_scale,
        op_count=ops,
    )


def realistic_string_geometry(temperature: float = 300.0,
                              mass_amu: float = 10.0) -> ChainGeometry:
    """SI-unit benchmark chain: 10 cm of matter at 1 angstrom spacing.

    1e9 atoms in 1e3 groups of 1e6; sound speed 5 km/s fixes the spring
    frequency through c = omega * spacing.
    """
    spacing = 1.0e-10
    return ChainGeometry(
        groups=1000, group_size=10 ** 6, clump_size=10 ** 6,
        mass=mass_amu * ATOMIC_MASS_UNIT,
        spring_frequency=5.0e3 / spacing,
        lattice_spacing=spacing,
        temperature=temperature,
        hbar=HBAR, boltzmann=K_BOLTZMANN,
    )
