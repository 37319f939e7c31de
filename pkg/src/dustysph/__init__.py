"""One-dimensional two-fluid SPH for gas with N dust fractions."""
from .core import (PRESETS, ConfigError, DustyShockIC, DustyWaveIC, ParticleSet, RunPreset,
                   SimConfig, dump_config, load_config, preset, validate_config)
from .drag import EmptyFractionCell, solve_cell_velocities
from .reference import (OracleError, effective_sound_speed, shock_reference, solve_dustywave,
                        wave_solution_at)
from .sim import SimulationState, run, setup, step

__version__ = "0.1.0"
