"""Motion-compensated 4D fMRI series reconstruction toolkit.

Forward/adjoint slice-wise rigid acquisition modelling, an ADMM solver with
low-rank tensor and total-variation regularization, per-volume scattered-data
interpolation baselines, a synthetic moving phantom, image-quality metrics,
and a functional-connectivity evaluation pipeline, plus a CLI tying the
pieces together.
"""

from .errors import NumericError
from .fc import (
    Carpet,
    FCMatrix,
    RoiTimeSeries,
    bandpass,
    carpet_export,
    pearson_fc,
    roi_average,
)
from .geometry import (
    AcquisitionGeometry,
    BlurSpec,
    GridSpec,
    MotionTrajectory,
    ProjectionOperator,
    RigidTransform,
    adjoint_project,
    compose_grid_positions,
    forward_project,
    transform_point,
)
from .interp3d import ScatteredSamples, interpolate_volume, reconstruct_series_3d
from .metrics import (
    MetricsReport,
    evaluate_methods,
    psnr,
    sharpness_laplacian,
    snr,
    ssim,
    temporal_sd,
)
from .phantom import (
    DegradationSpec,
    PhantomSpec,
    degrade,
    make_motion,
    make_phantom,
    region_labels,
    region_mean_series,
)
from .recon import (
    AdmmState,
    ConvergenceReport,
    ReconConfig,
    data_fidelity,
    objective,
    reconstruct,
    tv_gradient,
    tv_value,
    u_update,
    x_update,
    y_update,
)
from .tensor4d import (
    Volume4D,
    fold,
    rank_surrogate,
    singular_values,
    svt,
    trace_norm,
    truncated_svd_reconstruct,
    unfold,
)
from .volfile import read_labels, read_volume, write_labels, write_volume

__version__ = "0.1.0"

__all__ = [
    "NumericError",
    "AcquisitionGeometry",
    "AdmmState",
    "BlurSpec",
    "Carpet",
    "ConvergenceReport",
    "DegradationSpec",
    "FCMatrix",
    "GridSpec",
    "MetricsReport",
    "MotionTrajectory",
    "PhantomSpec",
    "ProjectionOperator",
    "ReconConfig",
    "RigidTransform",
    "RoiTimeSeries",
    "ScatteredSamples",
    "Volume4D",
    "adjoint_project",
    "bandpass",
    "carpet_export",
    "compose_grid_positions",
    "data_fidelity",
    "degrade",
    "evaluate_methods",
    "fold",
    "forward_project",
    "interpolate_volume",
    "make_motion",
    "make_phantom",
    "objective",
    "pearson_fc",
    "psnr",
    "rank_surrogate",
    "read_labels",
    "read_volume",
    "reconstruct",
    "reconstruct_series_3d",
    "region_labels",
    "region_mean_series",
    "roi_average",
    "sharpness_laplacian",
    "singular_values",
    "snr",
    "ssim",
    "svt",
    "temporal_sd",
    "trace_norm",
    "transform_point",
    "truncated_svd_reconstruct",
    "tv_gradient",
    "tv_value",
    "u_update",
    "unfold",
    "write_labels",
    "write_volume",
    "x_update",
    "y_update",
    "__version__",
]
