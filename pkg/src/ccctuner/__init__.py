"""Energy-optimal tuning of connected cruise controllers from traffic spectra."""

from ._kernels import NUMBA_ENABLED
from .config import default_config, load_config
from .energy import (MomentSummary, expected_energy, speed_variance,
                     theta_squared, theta_squared_quad)
from .harness import (CrossEvalPlan, ExperimentReport, cross_evaluate,
                      delay_benefit_study, generate_dataset, ingest_external,
                      leader_sweep, tune_controllers)
from .tuner import TuneProblem, TuneResult, delay_sweep, objective, tune
from .freqdom import (InfeasibleRegionError, LinkTransfer, PoleError,
                      StabilityRegion, char_fn, find_characteristic_roots,
                      link_tf, rightmost_root_oracle, stability_region)
from .gp import (CirculantEmbeddingError, GpConfig, MaternKernel, matern_acf,
                 matern_psd, sample_gp)
from .oracle import oracle_spectral_matrix, ovm_link_tf
from .simulate import (CollisionError, EnergyReport, energy_from_series,
                       simulate_ovm_chain, simulate_truck_linear,
                       simulate_truck_nonlinear)
from .spectral import (SpectralEstimate, WelchConfig, centralize,
                       default_welch_config, estimate_matrix, fold_weights,
                       integrate_onesided, periodogram_cross, welch_cross)
from .trajectory import SpeedTrajectory, read_trajectory_csv, write_trajectory_csv
from .vehicles import (ControllerParams, HumanParams, PlantParams,
                       PolicyParams, range_policy, resistance, saturate,
                       speed_policy)

__version__ = "0.1.0"
