"""On-device learning anomaly detection with an OS-ELM autoencoder ensemble."""

from .ensemble import Detection, Mode, MovingAverageDriftDetector, OdlEnsemble, pack_detection, unpack_detection
from .energymodel import CASES, PowerProfile, case_energy, memory_usage, workload_sweep
from .errors import (
    ConfigurationError,
    DatasetIOError,
    FormatError,
    InfeasibleWorkloadError,
    InvalidInputError,
    ModeError,
    NumericalFailureError,
    OdlError,
    StateError,
)
from .metrics import auc, classification_accuracy, greedy_instance_mapping
from .oselm import HiddenProjection, OselmInstance, init_instance, init_projection
from .preprocess import PreprocessConfig, SampleWindow, Spectrum, fft_magnitude, pipeline

__version__ = "0.1.0"
