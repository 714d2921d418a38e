"""Perceptual quality scoring for generated images.

The package couples a global-local perceptual score (attention-guided
patch overlap plus feature-distribution discrepancy) with interpolative
Likert binning, classical reference metrics, and a batch harness that
compares everything against human study averages.
"""

from .backend import (
    AttentionMap,
    BackendManifest,
    FeatureSet,
    FixtureBackend,
    OnnxBackend,
    load_backend,
    load_manifest,
    resolve_backend_spec,
)
from .baselines import (
    GaussianSummary,
    SsimParams,
    fid,
    fit_gaussian,
    kid,
    mad,
    mape,
    ms_ssim,
    psnr,
    ssim,
)
from .errors import BackendError, GlipsError, InputError
from .harness import (
    DatasetManifest,
    EvaluationReport,
    HumanScores,
    LambdaSweepResult,
    ManifestEntry,
    ReportRow,
    emit_report,
    evaluate,
    lambda_sweep,
    load_dataset_manifest,
    load_human_scores,
    shipped_human_scores_path,
)
from .ibs import Bin, BinTable, classify, ibs_score, likert_label, load_bin_tables
from .imagery import (
    ImageTensor,
    PatchGrid,
    PreprocessSpec,
    decode_image,
    extract_pixel_patch,
    patch_matrix,
    resize,
    save_image,
)
from .scoring import (
    GlipsConfig,
    GlipsResult,
    KernelSpec,
    SalientSelection,
    dice_patch,
    glips_score,
    kernel_eval,
    local_similarity,
    mmd,
    resolve_median_heuristic,
    select_salient,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionMap",
    "BackendError",
    "BackendManifest",
    "Bin",
    "BinTable",
    "DatasetManifest",
    "EvaluationReport",
    "FeatureSet",
    "FixtureBackend",
    "GaussianSummary",
    "GlipsConfig",
    "GlipsError",
    "GlipsResult",
    "HumanScores",
    "ImageTensor",
    "InputError",
    "KernelSpec",
    "LambdaSweepResult",
    "ManifestEntry",
    "OnnxBackend",
    "PatchGrid",
    "PreprocessSpec",
    "ReportRow",
    "SalientSelection",
    "SsimParams",
    "classify",
    "decode_image",
    "dice_patch",
    "emit_report",
    "evaluate",
    "extract_pixel_patch",
    "fid",
    "fit_gaussian",
    "glips_score",
    "ibs_score",
    "kernel_eval",
    "kid",
    "lambda_sweep",
    "likert_label",
    "load_backend",
    "load_bin_tables",
    "load_dataset_manifest",
    "load_human_scores",
    "load_manifest",
    "local_similarity",
    "mad",
    "mape",
    "mmd",
    "ms_ssim",
    "patch_matrix",
    "psnr",
    "resize",
    "resolve_backend_spec",
    "resolve_median_heuristic",
    "save_image",
    "select_salient",
    "shipped_human_scores_path",
    "ssim",
]
