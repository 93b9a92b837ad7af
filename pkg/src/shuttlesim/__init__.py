"""Shuttlecock flight simulation, camera perception, EKF tracking, interception
prediction and evaluation metrics."""

from .dynamics import (
    LaunchDistribution,
    ShuttleParams,
    ShuttleState,
    SimulationError,
    Trajectory,
    propagate,
    sample_launch,
    simulate,
    step_rk4,
)
from .estimation import EkfConfig, EkfState, ekf_ingest, ekf_predict, ekf_update, nees
from .impact import RacketState, deflection_error, outgoing_velocity
from .perception import (
    CameraModel,
    CameraTrack,
    Measurement,
    NoiseModel,
    fit_noise_model,
    in_fov,
    line_of_sight_rate,
    observe,
)
from .prediction import (
    CourtGeometry,
    InterceptionTarget,
    NotInterceptable,
    linearized_interception,
    predict_interception,
    qualify_trajectory,
    target_persistence,
)

__version__ = "0.1.0"
