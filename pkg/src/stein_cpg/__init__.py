"""Eight-neuron Stein-model central pattern generator for quadruped gaits."""
from .errors import (
    CPGError,
    ConfigError,
    IntegrationDiverged,
    NotPeriodicError,
    OutOfWorkspace,
    SubgroupError,
    WaitTimeout,
)
from .kernel import BACKEND
from .model import (
    GAIT_NAMES,
    GAITS,
    INITIAL_STATE,
    CouplingConfig,
    GaitParams,
    NetworkState,
    NeuronConstants,
    NeuronState,
    driving_signal,
    gait_params,
    network_derivative,
    stein_derivative,
)
from .stimulation import StimulationEnvelope, envelope_multiplier

__version__ = "0.1.0"
