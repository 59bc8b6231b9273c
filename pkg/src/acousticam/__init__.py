"""Camera-aligned acoustic imaging.

Calibrates a planar microphone array against a camera's pixel grid with a
tensor-product polynomial regression, and renders per-pixel phase-transform
energy maps in real time through an offline low-rank factorization of the
steering matrix.
"""

from .camera import CameraModel
from .dsp import (
    CalibrationIncompleteError,
    FrameSpectra,
    gcc_phat_tdoa,
    measure_targets,
    phat_supervector,
    stft_frame,
)
from .geometry import ArrayGeometry, load_geometry, mic_pairs, nominal_square_array
from .imaging import (
    SteeringMatrix,
    SvdPhatModel,
    build_steering,
    image_brute,
    image_fast,
    op_counts,
    steering_rank,
    truncate,
)
from .regression import (
    RegressionModel,
    SingularDesignError,
    TargetSet,
    UnderdeterminedFitError,
    design_matrix,
    fit,
    normalize_pixel,
)
from .study import RmseReport, StudyConfig, run_simulation_study, target_grid
from .synth import SourceEvent, SynthScriptError, parse_script, synthesize
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "CameraModel",
    "CalibrationIncompleteError",
    "FrameSpectra",
    "RegressionModel",
    "RmseReport",
    "SingularDesignError",
    "SourceEvent",
    "SteeringMatrix",
    "StudyConfig",
    "SvdPhatModel",
    "SynthScriptError",
    "TargetSet",
    "UnderdeterminedFitError",
    "build_steering",
    "design_matrix",
    "fit",
    "gcc_phat_tdoa",
    "image_brute",
    "image_fast",
    "load_geometry",
    "measure_targets",
    "mic_pairs",
    "nominal_square_array",
    "normalize_pixel",
    "op_counts",
    "parse_script",
    "phat_supervector",
    "read_wav",
    "run_simulation_study",
    "steering_rank",
    "stft_frame",
    "synthesize",
    "target_grid",
    "truncate",
    "write_wav",
]
