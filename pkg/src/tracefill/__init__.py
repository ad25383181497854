"""tracefill: recover fully missing channels of a multivariate time series.

Train an LSTM autoencoder on complete recordings, then freeze it and run
gradient descent on the unknown channel itself until the network's view of
the signals becomes self-consistent. Built on a small tape-based reverse-
mode autodiff core; ships with a nonlinear filter circuit simulator that
generates the bundled synthetic benchmark suite.
"""

from .autodiff import (
    NonFiniteError,
    ShapeError,
    Tape,
    Var,
    grad_check,
    run_op_checks,
)
from .circuit import (
    SUITE_PARAMS,
    CircuitParams,
    Dc,
    Sine,
    Trapezoid,
    WaveformSpec,
    capacitance,
    generate_suite,
    kcl_residual,
    simulate,
)
from .metrics import FeatureReport, amplitude_spectrum, rmse_per_feature, rmse_report
from .nn import (
    AutoencoderParams,
    NetConfig,
    autoencoder_forward,
    forward_steps,
    init_params,
    lift_params,
    lstm_step,
    param_count,
)
from .optim import Adam, mse, reduced_loss
from .preprocess import (
    ScalerParams,
    TimeSeriesSet,
    WindowBatch,
    fit_scaler,
    inverse_transform,
    overlap_mean,
    sliding_windows,
    transform,
)
from .reconstruct import ReconstructionResult, ReconstructionSpec, reconstruct, refine
from .training import (
    DivergenceError,
    EvalReport,
    TrainConfig,
    TrainedModel,
    evaluate_model,
    train,
)

__version__ = "0.1.0"
