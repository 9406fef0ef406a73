//! Spoken language understanding scores: NER tuple F1, NEL frame and word F1,
//! CTC span extraction, entity accuracy and WER.

mod io;
mod nel;
mod ner;
mod text;

pub use io::{align_records, parse_entity_records, read_entity_records, EntityRecord, MetricScore};
pub use nel::{
    ctc_entity_spans, nel_frame_counts, nel_frame_f1, nel_word_f1, words_in_entities, CtcMarkers,
    CtcSpans, EntitySpan, NelConfig, WordF1Counts, WordF1Utterance,
};
pub use ner::{
    label_counts, label_f1, multiset_counts, ner_micro_counts, ner_micro_f1, normalize_phrase,
    EntityTuple, F1Counts, PrfScores, MARKER_CHARS,
};
pub use text::{edit_distance, ne_accuracy, wer};
