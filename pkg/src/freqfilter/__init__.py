"""Frequency-domain denoising and short-horizon forecasting for evenly sampled series."""

from .data_io import (
    CheckpointError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    CsvFormatError,
    NormStats,
    SyntheticConfig,
    fit_normalization,
    generate_synthetic,
    load_checkpoint,
    load_csv,
    save_checkpoint,
    save_csv,
)
from .filters import (
    FilterModuleState,
    PointwiseLinear,
    SpectralKernel,
    blend_with_original,
    filter_backward,
    filter_forward,
    moving_average,
    zero_gradients,
)
from .metrics import MetricsReport, compute_metrics, metrics_csv_line, render_metrics_table
from .predictors import (
    CopyLastStepPredictor,
    FilteredCopyLastStepPredictor,
    FilterPredictorState,
    RollingReport,
    copy_last_step,
    filter_predict,
    filtered_copy_last_step,
    rolling_evaluate,
)
from .spectral import (
    Spectrum,
    circular_convolve,
    dft_reference,
    idft_reference,
    irfft,
    rfft,
    spectrum_to_full,
)
from .tensor import ComplexPlane, TimeSeriesTensor, elementwise_complex_multiply, slice_window
from .training import (
    TrainConfig,
    TrainingDivergedError,
    TrainingLog,
    WindowedDataset,
    adam_step,
    mae_loss,
    make_windows,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "CheckpointShapeError",
    "CheckpointTruncatedError",
    "CheckpointVersionError",
    "ComplexPlane",
    "CopyLastStepPredictor",
    "CsvFormatError",
    "FilterModuleState",
    "FilterPredictorState",
    "FilteredCopyLastStepPredictor",
    "MetricsReport",
    "NormStats",
    "PointwiseLinear",
    "RollingReport",
    "SpectralKernel",
    "Spectrum",
    "SyntheticConfig",
    "TimeSeriesTensor",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingLog",
    "WindowedDataset",
    "adam_step",
    "blend_with_original",
    "circular_convolve",
    "compute_metrics",
    "copy_last_step",
    "dft_reference",
    "elementwise_complex_multiply",
    "filter_backward",
    "filter_forward",
    "filter_predict",
    "filtered_copy_last_step",
    "fit_normalization",
    "generate_synthetic",
    "idft_reference",
    "irfft",
    "load_checkpoint",
    "load_csv",
    "mae_loss",
    "make_windows",
    "metrics_csv_line",
    "moving_average",
    "render_metrics_table",
    "rfft",
    "rolling_evaluate",
    "save_checkpoint",
    "save_csv",
    "slice_window",
    "spectrum_to_full",
    "train",
    "zero_gradients",
]
