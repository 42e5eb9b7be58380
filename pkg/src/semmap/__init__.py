"""Semantic map fusion for sparse visual SLAM outputs.

Fuses per-frame semantic score rasters into per-point label beliefs, aligns
the map to GPS via a scaled rigid transform, attaches a fuzzy landmark layer,
and builds a topological navigation graph.
"""

from .errors import (
    DegenerateDistributionError,
    DegenerateGeometryError,
    DegenerateObservationError,
    InsufficientAnchorsError,
    ParseError,
    PipelineStageError,
    SemmapError,
    UnknownPointError,
    ValidationError,
    ZeroScaleError,
)
from .fusion import (
    FusionReport,
    ScoreRaster,
    fuse_frame,
    load_raster,
    nearest_pixel,
    project_point,
    sample_scores,
    save_raster,
)
from .geoalign import (
    AnchorSet,
    GeoFix,
    LocalTangentOrigin,
    SimilarityTransform,
    apply_transform,
    estimate_similarity,
    identity_transform,
    local_to_wgs84,
    sample_anchors,
    wgs84_to_local,
)
from .io import (
    SemanticMapDocument,
    SlamExport,
    documents_equal,
    export_dot,
    export_ply,
    load_gps_csv,
    load_landmarks_csv,
    load_map,
    load_slam_export,
    save_gps_csv,
    save_landmarks_csv,
    save_map,
    save_slam_export,
)
from .labels import LABEL_INDEX, LABEL_NAMES, N_LABELS, PALETTE, label_color
from .landmarks import (
    DEFAULT_SIGMA,
    Landmark,
    LandmarkAssociation,
    associate_landmarks,
    membership,
    place_landmarks,
    rank_landmarks,
)
from .model import (
    KeyframeRecord,
    SemanticMap,
    SemanticMapPoint,
    bayes_update,
    map_label,
    normalized_belief,
    one_hot_belief,
    uniform_belief,
    validate_belief,
    wrap_angle,
)
from .pipeline import PipelineConfig, run_pipeline
from .synth import (
    GroundTruth,
    World,
    WorldSpec,
    build_world,
    generate_world,
    load_ground_truth,
    margin_mix_weight,
    noisy_observation,
    oracle_fuse,
    oracle_similarity_error,
    random_rotation,
    random_similarity,
    rotation_about_z,
    synthetic_anchor_set,
)
from .topo import (
    TopoEdge,
    TopoGraph,
    TopoNode,
    build_topo,
    detect_turns,
    fuse_revisits,
    graph_from_dict,
    graph_to_dict,
    to_dot,
)

__version__ = "0.1.0"
