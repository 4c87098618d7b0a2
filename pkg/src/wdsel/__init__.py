"""Wavelet-domain enhancement for inertial signals with learned basis selection.

The package splits into layers that can be used independently:

* ``signals`` / ``wavelets``: the 6-channel container, the filter bank, DWT,
  and threshold denoising.
* ``sim``: trajectory synthesis, the sensor error model, and window datasets.
* ``model`` / ``pipeline``: the selector network, its regularizers, training,
  and the soft/hard enhancement paths.
* ``allan`` / ``nav`` / ``metrics``: Allan-deviation coefficient reads,
  strapdown reconstruction, and trajectory or guidance scoring.
* ``config`` / ``datasetio`` / ``checkpoint`` / ``evaluate`` / ``cli``: the
  experiment harness around all of the above.
"""

from .allan import (AllanCurve, NoiseCoefficients, allan_deviation,
                    compare_reports, extract_coefficients)
from .checkpoint import (load_checkpoint, read_architecture, save_checkpoint)
from .config import (ExperimentConfig, config_from_dict, config_to_dict,
                     default_config, load_config, save_config)
from .datasetio import (DatasetBundle, read_dataset, read_signal_csv,
                        write_dataset, write_signal_csv, write_trajectory_csv)
from .errors import (AlignmentError, AnalysisError, ArchitectureMismatchError,
                     CheckpointError, CheckpointVersionError, ConfigError,
                     CorruptCheckpointError, DataFormatError,
                     DecompositionError, DegenerateMatrixError,
                     EmptySelectionError, InputError,
                     RegularizerSaturationError, SchemaError, StructureError,
                     WdselError)
from .evaluate import run_evaluation, write_reports
from .metrics import (TrajectoryScore, align_then_score, guidance_errors,
                      silhouette_details, silhouette_score)
from .model import ModelConfig, SelectorModel, architecture_descriptor
from .nav import (GIMBAL_PITCH_LIMIT, AttitudeChange, StateHistory,
                  integrate_attitude, strapdown, window_attitude_change,
                  window_displacement)
from .pipeline import (TrainConfig, TrainReport, denoise_bank, enhance_hard,
                       enhance_soft, evaluate_guidance, train, training_step)
from .signals import CHANNEL_NAMES, Signal
from .sim import (MOTION_CLASSES, Capture, DatasetConfig, GroundTruth,
                  NoiseModel, TrajectorySpec, WindowSample, generate_trajectory,
                  ideal_imu, inject_noise, make_capture, make_dataset,
                  window_labels)
from .wavelets import (BANK_ORDER, Decomposition, DenoiseConfig, WaveletBasis,
                       bank_table_rows, denoise, denoise_channel, dwt,
                       get_basis, idwt, standard_bank)

__version__ = "0.1.0"

__all__ = [
    "AllanCurve", "NoiseCoefficients", "allan_deviation", "compare_reports",
    "extract_coefficients",
    "load_checkpoint", "read_architecture", "save_checkpoint",
    "ExperimentConfig", "config_from_dict", "config_to_dict", "default_config",
    "load_config", "save_config",
    "DatasetBundle", "read_dataset", "read_signal_csv", "write_dataset",
    "write_signal_csv", "write_trajectory_csv",
    "AlignmentError", "AnalysisError", "ArchitectureMismatchError",
    "CheckpointError", "CheckpointVersionError", "ConfigError",
    "CorruptCheckpointError", "DataFormatError", "DecompositionError",
    "DegenerateMatrixError", "EmptySelectionError", "InputError",
    "RegularizerSaturationError", "SchemaError", "StructureError", "WdselError",
    "run_evaluation", "write_reports",
    "TrajectoryScore", "align_then_score", "guidance_errors",
    "silhouette_details", "silhouette_score",
    "ModelConfig", "SelectorModel", "architecture_descriptor",
    "GIMBAL_PITCH_LIMIT", "AttitudeChange", "StateHistory",
    "integrate_attitude", "strapdown", "window_attitude_change",
    "window_displacement",
    "TrainConfig", "TrainReport", "denoise_bank", "enhance_hard",
    "enhance_soft", "evaluate_guidance", "train", "training_step",
    "CHANNEL_NAMES", "Signal",
    "MOTION_CLASSES", "Capture", "DatasetConfig", "GroundTruth", "NoiseModel",
    "TrajectorySpec", "WindowSample", "generate_trajectory", "ideal_imu",
    "inject_noise", "make_capture", "make_dataset", "window_labels",
    "BANK_ORDER", "Decomposition", "DenoiseConfig", "WaveletBasis",
    "bank_table_rows", "denoise", "denoise_channel", "dwt", "get_basis",
    "idwt", "standard_bank",
]
