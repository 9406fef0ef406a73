//! Training-free evaluations: acoustic word discrimination, unsupervised word
//! segmentation and spoken sentence similarity.

mod ap;
mod awd;
mod dtw;
mod sts;
mod wordseg;

pub use ap::average_precision;
pub use awd::{
    awd_dtw_score, awd_pool_score, awd_score, cosine, pair_similarity, AwdConfig, AwdOutcome,
    AwdSimilarity,
};
pub use dtw::{cosine_cost_matrix, dtw_align, dtw_distance, DtwAlignment, DtwNorm};
pub use sts::{group_sts_rows, naive_text_overlap, sts_correlation, sts_pair_score, StsPair};
pub use wordseg::{
    count_matches, detect_word_boundaries, dissimilarity_curve, evaluate_segmentation,
    find_peaks, grid_search, moving_average, peak_prominences, reference_boundaries,
    segmentation_counts, segmentation_metrics, BoundaryConfig, FrameDistance, Matching,
    SegCounts, SegGrid, SegScores, SegUtterance,
};
