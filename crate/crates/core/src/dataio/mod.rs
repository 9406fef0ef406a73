//! On-disk formats: binary feature matrices, label lists, attribute maps,
//! segment alignments, pair manifests and CTC posterior grids.

mod attributes;
mod features;
mod labels;
mod manifests;
mod posterior;
mod segments;

pub use attributes::{read_attribute_map, AttributeMap};
pub use features::{
    read_feature_matrix, write_feature_matrix, FeatureMatrix, CSV_MAX_ELEMENTS, FEATURE_MAGIC,
};
pub use labels::{align_labels, read_label_tokens, LabelVector};
pub use manifests::{
    parse_awd_pairs, parse_sts_manifest, read_awd_pairs, read_sts_manifest, AwdPairRow,
    StsManifestRow,
};
pub use posterior::{parse_vocab, read_posterior_grid, read_vocab, PosteriorGrid};
pub use segments::{read_segments, Segment, SegmentTable};

use std::path::Path;

use crate::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Iterate non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("{what}: {field:?} is not a number"),
    })
}
