//! Synthetic repetitive collections: a random reference plus individuals
//! derived from it by point mutations and short insertions/deletions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fasta::{SequenceCollection, SequenceRecord};

const BASES: &[u8; 4] = b"ACGT";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub reference_length: usize,
    pub individuals: usize,
    /// Per-base probability of a point substitution.
    pub mutation_rate: f64,
    /// Per-base probability of starting an insertion or deletion.
    pub indel_rate: f64,
    /// Inclusive length bounds for insertions and deletions.
    pub indel_lengths: (usize, usize),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            reference_length: 500_000,
            individuals: 100,
            mutation_rate: 0.001,
            indel_rate: 0.00013,
            indel_lengths: (1, 16),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [
            ("mutation rate", self.mutation_rate),
            ("indel rate", self.indel_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name} {r} is outside [0, 1]"));
            }
        }
        let (lo, hi) = self.indel_lengths;
        if lo == 0 || lo > hi {
            return Err(format!("indel length range [{lo}, {hi}] is invalid"));
        }
        if self.reference_length == 0 {
            return Err("reference length must be positive".into());
        }
        Ok(())
    }
}

/// Edit counts applied while deriving the individuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub bases_scanned: u64,
    pub substitutions: u64,
    pub insertions: u64,
    pub deletions: u64,
}

/// Generates `individuals` records named `ind_<i>`. Deterministic in the seed.
pub fn generate(spec: &CorpusSpec) -> (SequenceCollection, CorpusStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let reference: Vec<u8> = (0..spec.reference_length)
        .map(|_| BASES[rng.gen_range(0..4)])
        .collect();
    let mut stats = CorpusStats::default();
    let records = (0..spec.individuals)
        .map(|i| {
            let bases = mutate(&reference, spec, &mut rng, &mut stats);
            SequenceRecord::new(format!("ind_{i}"), bases)
        })
        .collect();
    (SequenceCollection::new(records), stats)
}

fn mutate(
    reference: &[u8],
    spec: &CorpusSpec,
    rng: &mut ChaCha8Rng,
    stats: &mut CorpusStats,
) -> Vec<u8> {
    let (lo, hi) = spec.indel_lengths;
    let mut out = Vec::with_capacity(reference.len() + 64);
    let mut i = 0;
    while i < reference.len() {
        stats.bases_scanned += 1;
        if spec.indel_rate > 0.0 && rng.gen_bool(spec.indel_rate) {
            let len = rng.gen_range(lo..=hi);
            if rng.gen_bool(0.5) {
                stats.insertions += 1;
                out.extend((0..len).map(|_| BASES[rng.gen_range(0..4)]));
            } else {
                stats.deletions += 1;
                i += len;
                continue;
            }
        }
        let mut b = reference[i];
        if spec.mutation_rate > 0.0 && rng.gen_bool(spec.mutation_rate) {
            stats.substitutions += 1;
            let shift = rng.gen_range(1..4);
            let idx = BASES.iter().position(|&x| x == b).unwrap();
            b = BASES[(idx + shift) % 4];
        }
        out.push(b);
        i += 1;
    }
    if out.is_empty() {
        out.push(BASES[rng.gen_range(0..4)]);
    }
    out
}
