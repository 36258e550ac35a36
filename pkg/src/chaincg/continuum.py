"""Small-gradient lattice dynamics of the group averages and the wave limit.

For long-wavelength excitations the group averages obey the nearest-neighbor
difference equation

    X''_J = (omega/d)^2 (X_{J+1} - 2 X_J + X_{J-1}),

whose continuum limit is the wave equation with density sigma = mass/spacing,
Young's modulus Y = mass*omega^2*spacing and speed c = omega*spacing.  The
convergence study compares the exact chain evolution of a single long mode
against the spectral wave-equation solution over one period; the sup-norm
error falls off as (L/groups)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (ChainGeometry, ContractError, atoms_from_fine_modes,
                    fine_mode_frequency, project_to_coarse)


@dataclass(eq=False)
class WaveField:
    """Group-average displacement field with its continuum constants."""

    positions: np.ndarray
    velocities: np.ndarray
    density: float
    youngs_modulus: float
    wave_speed: float

    @classmethod
    def from_geometry(cls, positions, velocities, geometry: ChainGeometry) -> "WaveField":
        mu, w, dx = geometry.mass, geometry.spring_frequency, geometry.lattice_spacing
        return cls(np.asarray(positions, float).copy(),
                   np.asarray(velocities, float).copy(),
                   density=mu / dx, youngs_modulus=mu * w ** 2 * dx,
                   wave_speed=w * dx)


def lattice_wave_step(field: WaveField, dt: float, geometry: ChainGeometry,
                      clump_size: int | None = None, n_steps: int = 1) -> WaveField:
    """Advance the difference equation with velocity-Verlet (time reversible).

    Stability demands (omega/d) * dt <= 1.
    """
    d = geometry.clump_size if clump_size is None else clump_size
    w = geometry.spring_frequency
    if (w / d) * dt > 1.0 + 1e-12:
        raise ContractError(f"CFL violated: (omega/d)*dt = {(w / d) * dt:.3f} > 1")
    coef = (w / d) ** 2
    x = field.positions.copy()
    v = field.velocities.copy()
    acc = coef * (np.roll(x, -1) - 2 * x + np.roll(x, 1))
    for _ in range(n_steps):
        v += 0.5 * dt * acc
        x += dt * v
        acc = coef * (np.roll(x, -1) - 2 * x + np.roll(x, 1))
        v += 0.5 * dt * acc
    return WaveField(x, v, field.density, field.youngs_modulus, field.wave_speed)


def lattice_dispersion(L: int, groups: int, geometry: ChainGeometry,
                       clump_size: int | None = None) -> float:
    """Exact oscillation frequency of Fourier mode L under the difference equation."""
    d = geometry.clump_size if clump_size is None else clump_size
    return 2.0 * (geometry.spring_frequency / d) * np.sin(np.pi * L / groups)


def discrete_energy(field: WaveField, geometry: ChainGeometry,
                    clump_size: int | None = None) -> float:
    """Standard energy of the difference equation (per unit group mass)."""
    d = geometry.clump_size if clump_size is None else clump_size
    coef = (geometry.spring_frequency / d) ** 2
    x, v = field.positions, field.velocities
    return float(0.5 * np.sum(v ** 2) + 0.5 * coef * np.sum((np.roll(x, -1) - x) ** 2))


def continuum_solution(initial_profile, initial_velocity, t: float,
                       wave_speed: float, period_length: float) -> np.ndarray:
    """Exact spectral solution of the periodic wave equation at time t.

    Profiles are sampled on a uniform grid of the periodic domain; each Fourier
    mode advances as cos(c k t) with the velocity feeding sin(c k t)/(c k).
    """
    x0 = np.asarray(initial_profile, dtype=float)
    v0 = np.asarray(initial_velocity, dtype=float)
    n = x0.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=period_length / n)
    ck = wave_speed * k
    xh = np.fft.rfft(x0)
    vh = np.fft.rfft(v0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sin_term = np.where(ck > 0, np.sin(ck * t) / np.where(ck > 0, ck, 1.0), t)
    out = xh * np.cos(ck * t) + vh * sin_term
    return np.fft.irfft(out, n=n)


def convergence_study(L: int, groups_list, group_size: int,
                      samples_per_period: int = 64):
    """Sup-norm error of the exact chain vs the wave equation over one period.

    The chain starts in a single fine standing wave of mode L (the d = N case,
    every group one clump); the continuum run starts from the same projected
    profile.  Returns rows (groups, sup_error) and the fitted log-log slope.
    """
    rows = []
    for M in groups_list:
        geom = ChainGeometry(groups=M, group_size=group_size, clump_size=group_size)
        nn = geom.total_atoms
        amps = np.zeros(nn // 2 + 1, dtype=complex)
        amps[L] = 0.5 * np.sqrt(nn)           # x_j(0) = cos(2 pi j L / nn)
        x_atoms = atoms_from_fine_modes(amps, nn)
        X0 = project_to_coarse(x_atoms, geom)
        V0 = np.zeros_like(X0)
        w_chain = fine_mode_frequency(L, geom)
        c = geom.spring_frequency * geom.lattice_spacing
        length = nn * geom.lattice_spacing
        w_cont = c * 2.0 * np.pi * L / length
        period = 2.0 * np.pi / w_cont
        sup = 0.0
        for t in np.linspace(0.0, period, samples_per_period):
            X_chain = X0 * np.cos(w_chain * t)   # exact evolution of the single mode
            X_cont = continuum_solution(X0, V0, t, c, length)
            sup = max(sup, float(np.max(np.abs(X_chain - X_cont))))
        rows.append((M, sup / float(np.max(np.abs(X0)))))
    Ms = np.array([r[0] for r in rows], dtype=float)
    errs = np.array([r[1] for r in rows], dtype=float)
    slope = float(np.polyfit(np.log(Ms), np.log(errs), 1)[0])
    return rows, slope
