"""High-impedance fault localization from piecewise V-I trajectory fits."""
from ._accel import USE_NUMBA
from .features import (
    FeatureVector,
    Scaler,
    apply_scaler,
    features_from_fit,
    features_linear,
    features_quadratic,
    fit_scaler,
)
from .piecewise import (
    DesignMatrix,
    FitBounds,
    LinearFit,
    QuadFit,
    build_linear_design,
    build_quadratic_design,
    evaluate_fit,
    fit_from_dict,
    fit_residual,
    linear_slopes,
    solve_linear_fit,
    solve_quadratic_fit,
)
from .prep import BreakpointGrid, Segmentation, extract_lower_branch, segment_samples, select_breakpoints
from .sim import (
    FaultScenario,
    HifCircuitParams,
    SourceSpec,
    Trajectory,
    add_measurement_noise,
    diode_branch_current,
    generate_dataset,
    simulate_hif_trajectory,
)
from .svm import (
    BinarySvm,
    KernelSpec,
    MulticlassSvmModel,
    decision_value,
    kernel_eval,
    load_model,
    predict,
    save_model,
    train_binary_svm,
    train_multiclass,
)

__version__ = "0.1.0"
