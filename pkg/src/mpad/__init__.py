"""Differential makeup presentation attack detection toolkit."""

from .core import (
    Embedding,
    LabeledScoreSet,
    LandmarkSet,
    PairRecord,
    RasterImage,
    SampleRef,
    load_embedding,
    load_landmarks,
    load_manifest,
    save_embedding,
    save_landmarks,
)
from .errors import FormatError, GeometryError, MpadError
from .features import (
    FeatureVector,
    embedding_difference,
    landmark_difference,
    lbp_code,
    lbp_grid_features,
    probe_only_feature,
)
from .geometry import AlignedFace, align_face, align_landmarks, eye_centers, normalize_landmarks
from .metrics import (
    DetCurve,
    VulnerabilityReport,
    apcer_bpcer,
    bpcer_at_apcer,
    d_eer,
    det_curve,
    distribution_stats,
    fmr_fnmr,
    iapmr,
    riapar,
    threshold_at_fmr,
    vulnerability_report,
)
from .ppm import read_ppm, write_ppm
from .svm import TrainedDetector, load_model, rbf_kernel, save_model, score, train
from .synth import (
    QualityGateReport,
    TriangleMesh,
    delaunay_mesh,
    generate_corpus,
    makeup_color_transfer,
    quality_gate,
    warp_to_target,
)

__version__ = "0.1.0"
