"""Collaborative image-taxonomy workbench.

Build a hierarchical taxonomy over an image corpus with multiple coders,
compare and merge their sessions, and predict labels for uncoded images.
"""

from .assist import (
    ClusterPart,
    ClusterPartition,
    EmbeddingTable,
    cluster_taxon,
    cosine,
    fallback_embed,
    kmeans,
    postprocess_caption,
)
from .compare import (
    AnnotatedMergedTree,
    MergedNode,
    MetricsReport,
    agreement_report,
    dissensus_images,
    exact_match_ratio,
    majority_merge,
    node_iou,
    pairwise_jaccard,
    truncate_labels,
    union_merge,
    unsure_images,
)
from .model import (
    CoderSession,
    ImageRecord,
    LabelAssignment,
    TaxonNode,
    TaxonPath,
    create_session,
    format_path,
    parse_path,
)
from .predict import (
    ProbabilityRow,
    ancestor_closure,
    evaluate,
    loo_evaluate,
    similarity_predict,
    zero_shot_predict,
)
from .storage import (
    BatchPlan,
    load_dataset,
    load_labeling,
    load_session,
    load_table,
    read_session,
    sample_batches,
    save_session,
    write_session,
)

__version__ = "0.1.0"
