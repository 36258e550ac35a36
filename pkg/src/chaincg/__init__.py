"""Coarse-grained mode dynamics, noise, and decoherence of the harmonic chain."""

__version__ = "0.1.0"

from .chain import (ChainGeometry, CoarseGrainingSpec, ContractError, ModeBasis,
                    build_mode_basis, fine_mode_frequency, index_map, mode_basis,
                    project_to_coarse, synthesize_from_modes)
from .blocks import (BlockSystem, SpectralData, build_blocks, build_selection,
                     effective_frequency, reduced_forms, sherman_morrison_solve)
from .noise import (NoiseRealization, NoiseSpectrum, asymptotic_estimates,
                    corr_lagrangian, corr_simple, large_d_limit, mean_force,
                    noise_lagrangian, noise_simple, noise_strength,
                    thermal_realization)
from .decoherence import (DecoherenceReport, kernel, kernel_scaled,
                          predictability_report, trace_measure,
                          trace_measure_physical)
from .ensemble import (InitialCondition, TrajectoryRecord, coarse_trajectory,
                       condition_on_followed, evolve_exact, langevin_evolve,
                       residual, residual_ensemble, sample_initial)
from .continuum import (WaveField, continuum_solution, convergence_study,
                        lattice_dispersion, lattice_wave_step)
from . import verify

__all__ = [name for name in dir() if not name.startswith("_")]
