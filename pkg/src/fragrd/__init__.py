"""Fragmented reserves and harvesting in a 2-D logistic reaction-diffusion model."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, FragrdError, InfeasibleTargetError,
                     InvalidMaskError, LandscapeParseError, NumericalError)
from .harvest import HarvestKind, HarvestStrategy, removal_rate, rho_eps
from .landscape import (GeneratorConfig, Landscape, aggregation_index, build_ensemble,
                        deserialize, feasibility_bounds, generate, serialize)
from .model import Field, ModelParams, NumericsConfig
from .observables import (Trajectory, annual_yield, boundary_flux, relative_loss,
                          total_population)
from .solver import initial_field, laplacian, solve, step
from .sweep import EnsembleSpec, SweepConfig, SweepResult, pr_diagram, run_sweep
