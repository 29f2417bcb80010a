//! Loading manifests into in-memory utterances.

use crate::error::Result;
use crate::lattice::Vocabulary;
use crate::train::Utterance;

use super::features::load_features;
use super::text::{read_boundaries, read_label_tokens, read_labels, ManifestEntry};

/// Union of label tokens in order of first appearance.
pub fn vocabulary_from_labels(entries: &[ManifestEntry]) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::default();
    for e in entries {
        for t in read_label_tokens(&e.labels)? {
            vocab.insert(&t);
        }
    }
    Ok(vocab)
}

/// Reads features, labels and (when listed) reference boundaries.
pub fn load_utterances(entries: &[ManifestEntry], vocab: &Vocabulary) -> Result<Vec<Utterance>> {
    entries
        .iter()
        .map(|e| {
            let features = load_features(&e.features)?;
            let phonemes = read_labels(&e.labels, vocab)?;
            let reference = e
                .reference
                .as_ref()
                .map(|p| read_boundaries(p, features.frame_shift(), vocab))
                .transpose()?;
            Ok(Utterance {
                id: e.utt_id.clone(),
                features,
                phonemes,
                reference,
            })
        })
        .collect()
}
