"""Geometry and normal-mode structure of the group-averaged harmonic chain.

A periodic chain of total_atoms equal masses with nearest-neighbor springs is
split into `groups` groups of `group_size` atoms; each group consists of
group_size/clump_size clumps of `clump_size` adjacent atoms, clumps spaced
groups*clump_size apart.  The followed variables are the per-group average
displacements X_J and their spatial Fourier modes A_L.

Each coarse mode A_L is a superposition of exactly `clump_size` fine modes.
All per-mode quantities here are functions of (groups, L, clump_size) only;
group_size enters nowhere except unit conversions downstream.  Frequencies are
quoted in units of the spring frequency unless a geometry is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """Input violates a documented shape or precondition contract."""


@dataclass(frozen=True)
class ChainGeometry:
    """Integer layout plus physical constants of one coarse-graining family member.

    groups must be even (the index map uses half-group offsets) and clump_size
    must divide group_size.  Natural units are the defaults.
    """

    groups: int
    group_size: int
    clump_size: int
    mass: float = 1.0
    spring_frequency: float = 1.0
    lattice_spacing: float = 1.0
    temperature: float = 1.0
    hbar: float = 1.0
    boltzmann: float = 1.0

    def __post_init__(self):
        if self.groups <= 0 or self.group_size <= 0 or self.clump_size <= 0:
            raise ContractError("groups, group_size, clump_size must be positive")
        if self.groups % 2 != 0:
            raise ContractError("groups must be even")
        if self.group_size % self.clump_size != 0:
            raise ContractError("clump_size must divide group_size")
        for name in ("mass", "spring_frequency", "lattice_spacing", "temperature"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")

    @property
    def total_atoms(self) -> int:
        return self.groups * self.group_size

    @property
    def kT(self) -> float:
        return self.boltzmann * self.temperature


@dataclass(frozen=True)
class CoarseGrainingSpec:
    """History coarse-graining parameters: bin width, time step, excitation cutoff."""

    range_width: float
    time_step: float
    cutoff_mode: int

    def validate(self, geometry: ChainGeometry) -> None:
        if self.range_width <= 0 or self.time_step <= 0:
            raise ContractError("range_width and time_step must be positive")
        if not 0 <= self.cutoff_mode <= geometry.total_atoms // 2:
            raise ContractError("cutoff_mode outside [0, total_atoms/2]")


def fine_mode_frequency(ell: int, geometry: ChainGeometry) -> float:
    """Frequency of fine normal mode ell: 2*omega*sin(pi*ell/total_atoms)."""
    nn = geometry.total_atoms
    if not 0 <= ell <= nn // 2:
        raise ContractError(f"mode index {ell} outside [0, {nn // 2}]")
    return 2.0 * geometry.spring_frequency * np.sin(np.pi * ell / nn)


def index_map(L: int, k: int, groups: int) -> int:
    """Wavenumber index m(k) of the k-th fine mode feeding coarse mode L."""
    if k < 0:
        raise ContractError("k must be nonnegative")
    if not 0 <= L <= groups // 2:
        raise ContractError(f"L={L} outside [0, {groups // 2}]")
    if k % 2 == 0:
        return L + k * groups // 2
    return -L + (k + 1) * groups // 2


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """One coarse mode's fine-mode content, in reduced (group_size-free) form.

    scaled_coeffs are normalized so sum |c_k|^2 = 1; the physical superposition
    coefficients are scaled_coeffs/sqrt(group_size).  fine_frequencies are in
    units of the spring frequency; coarse_frequency carries physical units.
    """

    mode_index: int
    groups: int
    clump_size: int
    index_map: np.ndarray          # m(k), k = 0..d-1
    scaled_coeffs: np.ndarray      # complex, phase exp(i m(k) phase)
    fine_frequencies: np.ndarray   # 2 sin(pi m(k)/(groups*d)), units of omega
    coarse_frequency: float
    phase: float
    spring_frequency: float = 1.0

    @property
    def environment_dim(self) -> int:
        return self.clump_size - 1


def mode_basis(groups: int, L: int, clump_size: int,
               spring_frequency: float = 1.0) -> ModeBasis:
    """Build the ModeBasis for coarse mode L of the (groups, clump_size) family."""
    if not 0 <= L <= groups // 2:
        raise ContractError(f"L={L} outside [0, {groups // 2}]")
    if clump_size <= 0:
        raise ContractError("clump_size must be positive")
    d = clump_size
    k = np.arange(d)
    m = np.where(k % 2 == 0, L + k * (groups // 2), -L + (k + 1) * (groups // 2))
    phase = 0.0 if d % 2 == 1 else -np.pi / (groups * d)
    num = np.sin(np.pi * m / groups)
    den = np.sin(np.pi * m / (groups * d))
    # m = 0 only at (L=0, k=0); the sine ratio tends to d there
    ratio = np.where(m == 0, float(d),
                     np.divide(num, den, out=np.ones_like(num), where=m != 0))
    coeffs = (ratio / d) * np.exp(1j * m * phase)
    freqs = 2.0 * np.sin(np.pi * m / (groups * d))
    return ModeBasis(
        mode_index=L, groups=groups, clump_size=d,
        index_map=m.astype(int), scaled_coeffs=coeffs, fine_frequencies=freqs,
        coarse_frequency=spring_frequency * freqs[0], phase=phase,
        spring_frequency=spring_frequency,
    )


def build_mode_basis(L: int, geometry: ChainGeometry) -> ModeBasis:
    """ModeBasis for mode L under the geometry's clump size and spring frequency."""
    return mode_basis(geometry.groups, L, geometry.clump_size,
                      geometry.spring_frequency)


# ---------------------------------------------------------------------------
# group averaging and its mode-space form
# ---------------------------------------------------------------------------

def clump_offsets(d: int) -> np.ndarray:
    """Atom offsets within one clump: [-d/2]+1 .. [d/2] (even d), symmetric (odd d)."""
    lo = -(d // 2) + 1 if d % 2 == 0 else -((d - 1) // 2)
    return np.arange(lo, d // 2 + 1)


def project_to_coarse(displacements: np.ndarray, geometry: ChainGeometry) -> np.ndarray:
    """Per-group average displacements X_J of a length-total_atoms configuration."""
    x = np.asarray(displacements)
    nn = geometry.total_atoms
    if x.shape[-1] != nn:
        raise ContractError(f"expected {nn} displacements, got {x.shape[-1]}")
    M, N, d = geometry.groups, geometry.group_size, geometry.clump_size
    J = np.arange(M)[:, None, None]
    kcl = np.arange(N // d)[None, :, None]
    off = clump_offsets(d)[None, None, :]
    idx = (J * d + off + kcl * M * d) % nn
    return x[..., idx].sum(axis=(-1, -2)) / N


def synthesize_from_modes(coarse_modes: np.ndarray, groups: int) -> np.ndarray:
    """X_J = sum_L [A_L F_L(J) + c.c.], F_L(J) = exp(2 pi i J L / groups)/sqrt(groups)."""
    A = np.asarray(coarse_modes, dtype=complex)
    if A.shape[-1] != groups // 2 + 1:
        raise ContractError(f"expected {groups // 2 + 1} coarse modes")
    J = np.arange(groups)
    L = np.arange(groups // 2 + 1)
    F = np.exp(2j * np.pi * np.outer(J, L) / groups) / np.sqrt(groups)
    return 2.0 * np.real(A @ F.T)


def decompose_to_modes(group_positions: np.ndarray) -> np.ndarray:
    """Inverse of synthesize_from_modes for real X_J; edge modes come out real."""
    X = np.asarray(group_positions)
    M = X.shape[-1]
    J = np.arange(M)
    L = np.arange(M // 2 + 1)
    F = np.exp(2j * np.pi * np.outer(J, L) / M) / np.sqrt(M)
    A = X @ np.conj(F)
    A[..., 0] *= 0.5
    if M % 2 == 0:
        A[..., M // 2] *= 0.5
    return A


def atoms_from_fine_modes(amplitudes: np.ndarray, total_atoms: int) -> np.ndarray:
    """x_j = sum_{l=0}^{total_atoms/2} [a_l f_l(j) + c.c.] for complex amplitudes a."""
    a = np.asarray(amplitudes, dtype=complex)
    nn = total_atoms
    if a.shape[-1] != nn // 2 + 1:
        raise ContractError(f"expected {nn // 2 + 1} fine modes")
    j = np.arange(nn)
    ell = np.arange(nn // 2 + 1)
    f = np.exp(2j * np.pi * np.outer(j, ell) / nn) / np.sqrt(nn)
    return 2.0 * np.real(a @ f.T)


def fine_modes_from_atoms(displacements: np.ndarray) -> np.ndarray:
    """Inverse of atoms_from_fine_modes; self-conjugate modes (0, n/2) come out real."""
    x = np.asarray(displacements)
    nn = x.shape[-1]
    j = np.arange(nn)
    ell = np.arange(nn // 2 + 1)
    f = np.exp(2j * np.pi * np.outer(j, ell) / nn) / np.sqrt(nn)
    a = x @ np.conj(f)
    a[..., 0] *= 0.5
    if nn % 2 == 0:
        a[..., nn // 2] *= 0.5
    return a


def coarse_mode_from_fine(fine_amplitudes: np.ndarray, basis: ModeBasis,
                          group_size: int) -> complex | np.ndarray:
    """Assemble A_L from the fine-mode amplitudes it is built of.

    Reality folding: even-k terms enter as conj(c_k) a_{l(k)}, odd-k (reflected
    wavenumber) terms as c_k conj(a_{l(k)}); fine modes listed twice by the
    index map (only at L = groups/2) are counted once.
    """
    a = np.asarray(fine_amplitudes, dtype=complex)
    d = basis.clump_size
    step = group_size // d
    val = np.zeros(a.shape[:-1], dtype=complex)
    seen: set[int] = set()
    for k in range(d):
        m = int(basis.index_map[k])
        if m in seen:
            continue
        seen.add(m)
        h = np.conj(basis.scaled_coeffs[k]) / np.sqrt(group_size)
        if k % 2 == 0:
            val = val + h * a[..., m * step]
        else:
            val = val + np.conj(h) * np.conj(a[..., m * step])
    return val
