"""Thermal ensembles of the fine chain and their coarse-grained statistics.

Initial condition: modes below a cutoff may carry nonzero means (excitations),
everything fluctuates thermally.  Per interior complex mode the equilibrium
variances are M[|da|^2] = kT/(mass w^2) and M[|dpi|^2] = mass kT with
pi = mass * da/dt (each real component carries half).  The self-conjugate
modes (0 and total/2) are real with effective mass 4*mass; the zero mode has
no normalizable thermal amplitude, so its amplitude is pinned to its mean and
only its momentum fluctuates.

Evolution is exact mode rotation, so per-mode energies are conserved to
roundoff and second derivatives of coarse modes are available analytically.

Seeding discipline: one master seed; the stream of sample i is
default_rng(SeedSequence(master_seed, spawn_key=(i,))), so results are
independent of how samples are partitioned across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockSystem
from .chain import (ChainGeometry, ContractError, ModeBasis, build_mode_basis,
                    coarse_mode_from_fine, project_to_coarse,
                    synthesize_from_modes)
from .noise import NoiseRealization


@dataclass(eq=False)
class InitialCondition:
    """Excited means below cutoff_mode plus thermal fluctuations at temperature."""

    cutoff_mode: int
    amp_means: np.ndarray       # length total/2+1 complex; zero from cutoff up
    mom_means: np.ndarray
    temperature: float
    seed: int = 0

    def __post_init__(self):
        self.amp_means = np.asarray(self.amp_means, dtype=complex)
        self.mom_means = np.asarray(self.mom_means, dtype=complex)
        if self.amp_means.shape != self.mom_means.shape:
            raise ContractError("mean arrays must share shape")
        if np.any(self.amp_means[self.cutoff_mode:] != 0) or \
           np.any(self.mom_means[self.cutoff_mode:] != 0):
            raise ContractError("means must vanish at and above the cutoff mode")

    @classmethod
    def thermal(cls, geometry: ChainGeometry, seed: int = 0) -> "InitialCondition":
        n = geometry.total_atoms // 2 + 1
        return cls(0, np.zeros(n, complex), np.zeros(n, complex),
                   geometry.temperature, seed)


@dataclass(eq=False)
class TrajectoryRecord:
    """One sampled trajectory on a uniform grid, with analytic accelerations."""

    times: np.ndarray
    fine_modes: np.ndarray        # (n_t, n_modes) complex
    coarse_modes: np.ndarray      # (n_t, groups/2+1) complex
    coarse_accel: np.ndarray
    group_positions: np.ndarray   # (n_t, groups)
    residuals: dict[int, np.ndarray] = field(default_factory=dict)


def _mode_variances(geometry: ChainGeometry):
    """Thermal amplitude/momentum variances per real component, all modes."""
    nn = geometry.total_atoms
    ell = np.arange(nn // 2 + 1)
    w = 2.0 * geometry.spring_frequency * np.sin(np.pi * ell / nn)
    kT, mu = geometry.kT, geometry.mass
    amp = np.zeros(ell.size)
    mom = np.zeros(ell.size)
    amp[1:-1] = kT / (2 * mu * w[1:-1] ** 2)
    mom[1:-1] = mu * kT / 2
    # self-conjugate real modes carry effective mass 4*mass
    amp[-1] = kT / (4 * mu * w[-1] ** 2)
    mom[-1] = mu * kT / 4
    amp[0] = 0.0                 # amplitude pinned (no normalizable distribution)
    mom[0] = mu * kT / 4
    return w, amp, mom


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-derived per-sample stream, independent of worker partitioning."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def sample_initial(ic: InitialCondition, geometry: ChainGeometry,
                   rng: np.random.Generator):
    """Draw one fine-mode phase-space point (amplitudes, momenta pi = mass*da/dt)."""
    if ic.temperature <= 0:
        return ic.amp_means.copy(), ic.mom_means.copy()
    scale = ic.temperature / geometry.temperature
    w, amp_var, mom_var = _mode_variances(geometry)
    amp_var = amp_var * scale
    mom_var = mom_var * scale
    n = w.size
    da = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(amp_var)
    dp = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(mom_var)
    for edge in (0, n - 1):       # real modes: keep the real draw only
        da[edge] = da[edge].real
        dp[edge] = dp[edge].real
    return ic.amp_means + da, ic.mom_means + dp


def condition_on_followed(amps, moms, geometry: ChainGeometry,
                          ic: InitialCondition) -> tuple[np.ndarray, np.ndarray]:
    """Pin every followed coarse mode (value and velocity) to its ensemble mean.

    Implemented as exact Gaussian regression per coarse-mode block; the
    adjusted environment carries the fixed-coarse-mode covariances
    kT V_TT^-1 / kT M_TT^-1.  Blocks containing a self-conjugate fine mode
    (only L = groups/2 with odd clump size) keep that component unadjusted.
    """
    a = np.array(amps, dtype=complex)
    p = np.array(moms, dtype=complex)
    w, amp_var, mom_var = _mode_variances(geometry)
    scale = ic.temperature / geometry.temperature
    amp_var, mom_var = 2 * amp_var * scale, 2 * mom_var * scale  # complex variances
    nn = geometry.total_atoms
    N, d = geometry.group_size, geometry.clump_size
    for L in range(1, geometry.groups // 2 + 1):
        chans = _assembly_channels(build_mode_basis(L, geometry), N)
        chans = [c for c in chans if c[0] not in (0, nn // 2)]
        if not chans:
            continue
        ells = [c[0] for c in chans]
        wts = np.array([c[1] for c in chans])
        conj = np.array([c[2] for c in chans])
        for arr, var, mean_arr in ((a, amp_var, ic.amp_means),
                                   (p, mom_var, ic.mom_means)):
            eta = np.where(conj, np.conj(arr[ells]), arr[ells])
            means = np.where(conj, np.conj(mean_arr[ells]), mean_arr[ells])
            svar = var[ells]
            var_tot = float(np.sum(np.abs(wts) ** 2 * svar))
            if var_tot == 0:
                continue
            fluct = wts @ (eta - means)
            eta = eta - (np.conj(wts) * svar / var_tot) * fluct
            arr[ells] = np.where(conj, np.conj(eta), eta)
    return a, p


def _assembly_channels(basis: ModeBasis, group_size: int):
    """(fine index, weight, conjugated) triples entering one coarse mode.

    The coarse mode is sum of weight*a over unconjugated channels plus
    conj(weight)*conj(a) over conjugated ones; duplicated wavenumbers
    (L = groups/2 only) are listed once.
    """
    seen: set[int] = set()
    out = []
    step = group_size // basis.clump_size
    for k in range(basis.clump_size):
        m = int(basis.index_map[k])
        if m in seen:
            continue
        seen.add(m)
        hw = np.conj(basis.scaled_coeffs[k]) / np.sqrt(group_size)
        if k % 2 == 1:
            out.append((m * step, np.conj(hw), True))
        else:
            out.append((m * step, hw, False))
    return out


def evolve_exact(amps, moms, t, geometry: ChainGeometry):
    """Exact harmonic evolution of every mode; zero mode drifts freely."""
    if t < 0:
        raise ContractError("time must be nonnegative")
    w, _, _ = _mode_variances(geometry)
    mu = geometry.mass
    a = np.asarray(amps, dtype=complex)
    p = np.asarray(moms, dtype=complex)
    cos = np.cos(w * t)
    sin = np.sin(w * t)
    with np.errstate(invalid="ignore", divide="ignore"):
        sw = np.where(w > 0, sin / np.where(w > 0, w, 1.0), 0.0)
    a_t = a * cos + (p / mu) * sw
    p_t = p * cos - mu * w * sin * a
    a_t[0] = a[0] + p[0] * t / mu
    p_t[0] = p[0]
    return a_t, p_t


def mode_energies(amps, moms, geometry: ChainGeometry) -> np.ndarray:
    """Conserved per-mode energies (interior convention: mass |da/dt|^2 + mass w^2 |a|^2)."""
    w, _, _ = _mode_variances(geometry)
    mu = geometry.mass
    return mu * np.abs(np.asarray(moms) / mu) ** 2 + mu * w ** 2 * np.abs(amps) ** 2


def coarse_trajectory(amps, moms, geometry: ChainGeometry,
                      times) -> TrajectoryRecord:
    """Evolve exactly and assemble coarse modes, accelerations, group positions."""
    times = np.asarray(times, dtype=float)
    n_l = geometry.groups // 2 + 1
    bases = [build_mode_basis(L, geometry) for L in range(n_l)]
    fine = np.empty((times.size, amps.shape[-1]), dtype=complex)
    A = np.empty((times.size, n_l), dtype=complex)
    Add = np.empty_like(A)
    w, _, _ = _mode_variances(geometry)
    for i, t in enumerate(times):
        a_t, _ = evolve_exact(amps, moms, t, geometry)
        fine[i] = a_t
        acc = -w ** 2 * a_t
        for L in range(n_l):
            A[i, L] = coarse_mode_from_fine(a_t, bases[L], geometry.group_size)
            Add[i, L] = coarse_mode_from_fine(acc, bases[L], geometry.group_size)
    X = synthesize_from_modes(A, geometry.groups)
    return TrajectoryRecord(times=times, fine_modes=fine, coarse_modes=A,
                            coarse_accel=Add, group_positions=X)


def residual(record: TrajectoryRecord, L: int, geometry: ChainGeometry,
             ic: InitialCondition | None = None) -> np.ndarray:
    """Deviation from the closed coarse-mode equation, mean forcing subtracted.

    E_L(t) = A''_L + Omega_L^2 A_L - F_L(t); F_L is the same expression on the
    mean trajectory (linearity), nonzero only when excited modes feed mode L.
    """
    basis = build_mode_basis(L, geometry)
    om2 = basis.coarse_frequency ** 2
    raw = record.coarse_accel[:, L] + om2 * record.coarse_modes[:, L]
    if ic is not None and (np.any(ic.amp_means) or np.any(ic.mom_means)):
        mean_rec = coarse_trajectory(ic.amp_means, ic.mom_means, geometry,
                                     record.times)
        raw = raw - (mean_rec.coarse_accel[:, L] + om2 * mean_rec.coarse_modes[:, L])
    record.residuals[L] = raw
    return raw


# ---------------------------------------------------------------------------
# forced-oscillator integration driven by a noise realization
# ---------------------------------------------------------------------------

def _duhamel_coeffs(nu: float, w: np.ndarray, h: float):
    """Closed-form step integrals of sin/cos(nu(h-s)) against cos/sin(w s)."""
    close = np.abs(nu - w) <= 1e-9 * np.maximum(nu, w)
    den = np.where(close, 1.0, nu ** 2 - w ** 2)
    i1c = np.where(close, h * np.sin(w * h) / 2,
                   nu * (np.cos(w * h) - np.cos(nu * h)) / den)
    i1s = np.where(close, (np.sin(w * h) - w * h * np.cos(w * h)) / (2 * w),
                   (nu * np.sin(w * h) - w * np.sin(nu * h)) / den)
    i0c = np.where(close, (np.sin(w * h) + w * h * np.cos(w * h)) / (2 * w),
                   (nu * np.sin(nu * h) - w * np.sin(w * h)) / den)
    i0s = np.where(close, h * np.sin(w * h) / 2,
                   w * (np.cos(w * h) - np.cos(nu * h)) / den)
    return i1c, i1s, i0c, i0s


def langevin_evolve(blocks: BlockSystem, realization: NoiseRealization,
                    times, A0=0.0, Adot0=0.0,
                    forcing_scale: float = 1.0) -> np.ndarray:
    """Integrate A'' + Omega^2 A = forcing_scale * noise_simple(t) on a uniform grid.

    Exact rotation for the homogeneous part (symplectic) plus closed-form
    forced response of the trigonometric noise over each step.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 2 or not np.allclose(np.diff(times), times[1] - times[0]):
        raise ContractError("langevin_evolve needs a uniform time grid")
    h = float(times[1] - times[0])
    nu = blocks.w0
    if nu <= 0:
        raise ContractError("followed mode must have positive frequency")
    wb = blocks.env_frequencies
    wmax = max(float(np.max(wb, initial=0.0)), nu)
    if wmax * h > 0.5:
        raise ContractError(f"step too large: max frequency * step = {wmax * h:.3f} > 0.5")
    coup = blocks.coupling_row() * forcing_scale
    P = coup * realization.env_offsets
    Q = coup * realization.env_velocities / wb if wb.size else np.zeros(0, complex)
    i1c, i1s, i0c, i0s = _duhamel_coeffs(nu, wb, h)
    out = np.empty(times.size, dtype=complex)
    A, Ad = complex(A0), complex(Adot0)
    out[0] = A
    cos_h, sin_h = np.cos(nu * h), np.sin(nu * h)
    for i in range(1, times.size):
        t = times[i - 1]
        cwt, swt = np.cos(wb * t), np.sin(wb * t)
        C = P * cwt + Q * swt
        S = -P * swt + Q * cwt
        A_new = A * cos_h + Ad * sin_h / nu + (C @ i1c + S @ i1s) / nu
        Ad_new = -A * nu * sin_h + Ad * cos_h + (C @ i0c + S @ i0s)
        A, Ad = A_new, Ad_new
        out[i] = A
    return out


# ---------------------------------------------------------------------------
# ensemble reductions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    """Per-time-bin statistics of one observable over the sample ensemble."""

    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    stderr_mean: np.ndarray
    stderr_variance: np.ndarray
    n_samples: int


def residual_ensemble(geometry: ChainGeometry, L: int, times, n_samples: int,
                      master_seed: int = 0, conditioned: bool = True,
                      ic: InitialCondition | None = None) -> EnsembleSummary:
    """Monte Carlo statistics of the coarse-mode residual E_L on a time grid.

    Samples in index order with counter-derived streams; reductions are a
    single deterministic pairwise sum, so the output is independent of any
    worker partitioning upstream.
    """
    times = np.asarray(times, dtype=float)
    if ic is None:
        ic = InitialCondition.thermal(geometry, master_seed)
    basis = build_mode_basis(L, geometry)
    om2 = basis.coarse_frequency ** 2
    w, _, _ = _mode_variances(geometry)
    vals = np.empty((n_samples, times.size), dtype=complex)
    for i in range(n_samples):
        rng = sample_rng(master_seed, i)
        a0, p0 = sample_initial(ic, geometry, rng)
        if conditioned:
            a0, p0 = condition_on_followed(a0, p0, geometry, ic)
        for j, t in enumerate(times):
            a_t, _ = evolve_exact(a0, p0, t, geometry)
            A = coarse_mode_from_fine(a_t, basis, geometry.group_size)
            Add = coarse_mode_from_fine(-w ** 2 * a_t, basis, geometry.group_size)
            vals[i, j] = Add + om2 * A
    if np.any(ic.amp_means) or np.any(ic.mom_means):
        mean_rec = coarse_trajectory(ic.amp_means, ic.mom_means, geometry, times)
        vals -= mean_rec.coarse_accel[:, L] + om2 * mean_rec.coarse_modes[:, L]
    return _summarize(times, vals)


def _summarize(times: np.ndarray, vals: np.ndarray) -> EnsembleSummary:
    n = vals.shape[0]
    mean = vals.mean(axis=0)
    sq = np.abs(vals - mean) ** 2
    var = sq.sum(axis=0) / (n - 1)
    se_mean = np.sqrt(var / n)
    # distribution-free standard error of the variance estimate
    se_var = np.sqrt(np.var(sq, axis=0, ddof=1) / n)
    return EnsembleSummary(times=times, mean=mean, variance=var,
                           stderr_mean=se_mean, stderr_variance=se_var,
                           n_samples=n)
