"""spintrack: simulation and real-time estimation for continuously measured
spin-precession magnetometers.

Submodules
----------
sensor      conditional-moment dynamics of the probed ensemble
signals     Ornstein-Uhlenbeck and cardiac-like (Van der Pol) field models
ekf         extended Kalman filter with measurement-correlated process noise
control     LQR precession-cancelling feedback
bounds      decoherence-dictated lower bounds on the tracking error
experiment  closed-loop trajectories and seeded Monte Carlo ensembles
backend     compiled/pure kernel selection
presets     ready-made scenario configurations
cli         command-line interface (`spintrack ...`)
"""

from .backend import TrajectoryError, available_backends, get_backend
from .bounds import (
    BoundQuery,
    cs_bound_amse,
    cs_bound_finite_prior,
    effective_dephasing,
    n_averaged_bound,
    sql_bound,
    variance_closed_form,
    variance_recursion,
)
from .control import LqrParams, lqr_control
from .ekf import (
    EkfState,
    FilterDivergenceError,
    NoiseModel,
    OupEkfModel,
    VdpEkfModel,
    ekf_step,
    init_ekf,
    jacobian_f_oup,
    jacobian_f_vdp,
    jacobian_g,
    kalman_gain,
    measurement_row,
)
from .experiment import (
    EnsembleError,
    EnsembleStats,
    ScenarioConfig,
    TrajectoryRecord,
    amse_series,
    run_ensemble,
    run_trajectory,
    sample_atom_number,
)
from .sensor import (
    AtomicMoments,
    IntegrationInstabilityError,
    SensorParams,
    atomic_diffusion,
    atomic_drift,
    css_initial_state,
    measurement_strength_from_probe,
    photocurrent_sample,
    squeezing_db,
    step_truth,
    t2_time,
)
from .signals import (
    OupParams,
    OupState,
    VdpParams,
    VdpState,
    noisy_drive_increment,
    oup_stationary_variance,
    oup_step,
    vdp_step,
)

__version__ = "0.1.0"
