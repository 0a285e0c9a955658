//! Direct substring scanning over the plaintext collection, used to check
//! index answers.

use super::MatchPosition;
use crate::fasta::SequenceCollection;

/// Every (possibly overlapping) occurrence of `pattern`, sorted.
pub fn naive_locate(collection: &SequenceCollection, pattern: &[u8]) -> Vec<MatchPosition> {
    let mut out = Vec::new();
    if pattern.is_empty() {
        return out;
    }
    for (item, r) in collection.records.iter().enumerate() {
        for (offset, w) in r.bases.windows(pattern.len()).enumerate() {
            if w == pattern {
                out.push(MatchPosition {
                    item,
                    offset: offset as u64,
                });
            }
        }
    }
    out
}

pub fn naive_count(collection: &SequenceCollection, pattern: &[u8]) -> u64 {
    if pattern.is_empty() {
        return 0;
    }
    collection
        .records
        .iter()
        .map(|r| {
            r.bases
                .windows(pattern.len())
                .filter(|w| *w == pattern)
                .count() as u64
        })
        .sum()
}
