"""Budget-aware semantic video segmentation: a recurrent
priming/approximating/ensemble pipeline with runtime scheduling, exact
IoU/density evaluation, a subsampling oracle, and a synthetic dataset
generator, all runnable end to end on a CPU.
"""

__version__ = "0.1.0"

from .core import (
    ClassDef,
    ClassTable,
    Frame,
    Image,
    LabelMap,
    ScoreMap,
    VideoSequence,
    argmax_labels,
    one_hot_scores,
    validate_sequence,
)
from .errors import CheckpointError, DataError, NumericError
from .metrics import (
    ConfusionMatrix,
    DensityReport,
    MetricsReport,
    accumulate,
    class_avg_accuracy,
    compute_report,
    iou,
    miou,
    spatial_density,
    temporal_density,
)
from .resample import bilinear_resize, downsample_image, nn_subsample, nn_upscale
from .subn import SubNReport, run_subn
from .synthgen import SceneConfig, class_table, generate, generate_many
from .dataio import LoadedDataset, load_dataset, save_dataset, split_by_distribution
from .pipeline import (
    CostModel,
    FrameCost,
    PipelineNets,
    ScheduleConfig,
    SegmentationResult,
    amortized_relative_runtime,
    approx_only_labels,
    budget_curve,
    calibrate_cost_model,
    evaluate_approx_only,
    evaluate_sequences,
    per_frame_confusions,
    segment_sequence,
    train_joint,
    train_priming,
)
