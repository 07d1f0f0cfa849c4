"""Message type inference for unknown binary network protocols.

The pipeline: segment captured messages, compute a continuous dissimilarity
between segments of any lengths, align messages on segment similarity to
obtain message dissimilarities, cluster them with auto-configured DBSCAN,
align each cluster around its medoid, refine clusters by splitting on
discriminator fields and merging compatible structures, and finally score
the result against ground-truth labels when available.
"""

from .align import (
    AlignmentTable,
    build_message_matrix,
    degap,
    medoid,
    message_dissimilarity,
    nw_align,
    nw_score,
    progressive_align_cluster,
)
from .cluster import (
    NOISE,
    ClusterSet,
    KDistanceProfile,
    autoconfigure_epsilon,
    dbscan,
    gaussian_smooth,
    knn_profile,
)
from .dissim import (
    SegmentDissimilarityMatrix,
    build_segment_matrix,
    canberra,
    mixed_dissimilarity,
    pair_dissimilarity,
    sliding_min_canberra,
)
from .evaluation import ConfusionCounts, QualityReport, confusion_counts, precision_recall
from .ingest import Trace, preprocess, read_pcap, read_trace_json, write_trace_json
from .model import AnalysisConfig, Message, Segment, feature_vector
from .refinement import (
    FieldClass,
    FieldClassKind,
    abstract_structure,
    find_distinguishing_field,
    merge_clusters,
    mergeable,
    refine,
    split_cluster,
)
from .segmenter import (
    Segmentation,
    detect_char_sequence,
    heuristic_refine,
    refine_char_merge,
    refine_first_segment_split,
    refine_frequent_value_split,
    segment_fixed,
    segment_from_boundaries,
    segment_trace,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentTable",
    "AnalysisConfig",
    "ClusterSet",
    "ConfusionCounts",
    "FieldClass",
    "FieldClassKind",
    "KDistanceProfile",
    "Message",
    "NOISE",
    "QualityReport",
    "Segment",
    "SegmentDissimilarityMatrix",
    "Segmentation",
    "Trace",
    "abstract_structure",
    "autoconfigure_epsilon",
    "build_message_matrix",
    "build_segment_matrix",
    "canberra",
    "confusion_counts",
    "dbscan",
    "degap",
    "detect_char_sequence",
    "feature_vector",
    "find_distinguishing_field",
    "gaussian_smooth",
    "heuristic_refine",
    "knn_profile",
    "medoid",
    "merge_clusters",
    "mergeable",
    "message_dissimilarity",
    "mixed_dissimilarity",
    "nw_align",
    "nw_score",
    "pair_dissimilarity",
    "precision_recall",
    "preprocess",
    "progressive_align_cluster",
    "read_pcap",
    "read_trace_json",
    "refine",
    "refine_char_merge",
    "refine_first_segment_split",
    "refine_frequent_value_split",
    "segment_fixed",
    "segment_from_boundaries",
    "segment_trace",
    "sliding_min_canberra",
    "split_cluster",
    "write_trace_json",
]
