"""Simulated prosthetic vision: scene simplification, axon-map rendering,
experimental sessions, and detection-task statistics."""

from .dataset import (
    Category,
    StimulusCatalog,
    StimulusClip,
    generate_synthetic_catalog,
    generate_synthetic_clip,
    load_catalog,
    load_clip_frames,
    save_catalog,
)
from .errors import PhosphorError
from .render import (
    STANDARD_GRID_SIZES,
    STANDARD_LAMBDAS,
    STANDARD_RHOS,
    AmplitudeFrame,
    AxonMapParams,
    ElectrodeGrid,
    PerceptFrame,
    PhospheneRenderer,
    SensitivityTable,
    axis_ratio,
    build_sensitivity_table,
    moment_ellipse,
    render_fast,
    render_oracle,
    render_video,
)
from .retina import (
    DEFAULT_BUNDLE_MODEL,
    DEFAULT_FRAME,
    AxonBundle,
    BundleModelConfig,
    Eye,
    PerceptGrid,
    RetinalCoordinateFrame,
    build_percept_grid,
    path_length_to,
    trace_bundle,
)
from .scene import (
    AuxMaps,
    GrayFrame,
    Provenance,
    SceneEncoder,
    Strategy,
    apply_strategy,
    encode_amplitudes,
    fallback_saliency,
    to_gray,
)
from .server import create_app, read_response_log
from .session import (
    GRID_SIZES,
    PARAM_CELLS,
    SessionAnalysis,
    SessionPlan,
    TrialRecord,
    TrialSpec,
    analyze_records,
    assign_param_cells,
    load_session,
    make_session,
    save_session,
    simulate_responses,
)
from .stats import (
    DetectionCounts,
    FdrMode,
    MetricsReport,
    Pooling,
    RateCorrection,
    StatTestResult,
    adjust_results,
    bootstrap_diff,
    classification_metrics,
    compute_counts,
    d_prime,
    fdr_adjust,
    inverse_normal_cdf,
    metrics_report,
    normal_cdf,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
