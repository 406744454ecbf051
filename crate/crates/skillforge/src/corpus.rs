//! Vocabulary construction and skip-gram pair generation.
//!
//! The context window is maximal: every skill in a document is a context of
//! every other, so a context of `n` in-vocabulary skills contributes exactly
//! `n·(n−1)` ordered (center, context) pairs. There are no sliding
//! sub-windows and no frequent-skill subsampling.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;

use crate::extractor::SkillContext;
use crate::lexicon::{Lexicon, SkillId};
use crate::rng::seeded_rng;

/// One vocabulary slot: a skill admitted into training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub skill: SkillId,
    pub canonical: String,
    /// Document frequency: number of contexts containing the skill.
    pub count: u32,
}

/// Dense training vocabulary. Indices are assigned by descending document
/// frequency, ties broken by canonical string, so identical inputs always
/// produce identical indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<VocabEntry>,
    by_skill: HashMap<SkillId, u32>,
    min_count: u32,
}

/// An ordered (center, context) training example in dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainingPair {
    pub center: u32,
    pub context: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no skill meets min_count {min_count}")]
    EmptyVocab { min_count: u32 },
    #[error("min_count must be at least 1")]
    ZeroMinCount,
    #[error("duplicate canonical {canonical:?} in vocabulary input")]
    DuplicateCanonical { canonical: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io(_))
    }
}

impl Vocab {
    /// Core constructor from `(skill id, canonical, document count)` rows.
    pub fn new(
        rows: Vec<(SkillId, String, u32)>,
        min_count: u32,
    ) -> Result<Vocab, CorpusError> {
        if min_count == 0 {
            return Err(CorpusError::ZeroMinCount);
        }
        let mut seen = HashMap::new();
        for (_, canonical, _) in &rows {
            if seen.insert(canonical.clone(), ()).is_some() {
                return Err(CorpusError::DuplicateCanonical {
                    canonical: canonical.clone(),
                });
            }
        }
        let mut entries: Vec<VocabEntry> = rows
            .into_iter()
            .filter(|&(_, _, count)| count >= min_count)
            .map(|(skill, canonical, count)| VocabEntry {
                skill,
                canonical,
                count,
            })
            .collect();
        if entries.is_empty() {
            return Err(CorpusError::EmptyVocab { min_count });
        }
        entries.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| a.canonical.cmp(&b.canonical))
        });
        let by_skill = entries
            .iter()
            .enumerate()
            .map(|(dense, e)| (e.skill, dense as u32))
            .collect();
        Ok(Vocab {
            entries,
            by_skill,
            min_count,
        })
    }

    /// Counts document frequencies over extracted contexts and builds the
    /// vocabulary. Context skill lists are already deduplicated per
    /// document, so each context contributes at most one count per skill.
    pub fn build<'a>(
        contexts: impl IntoIterator<Item = &'a SkillContext>,
        lexicon: &Lexicon,
        min_count: u32,
    ) -> Result<Vocab, CorpusError> {
        let mut counts: HashMap<SkillId, u32> = HashMap::new();
        for context in contexts {
            for &skill in &context.skills {
                *counts.entry(skill).or_insert(0) += 1;
            }
        }
        let mut rows: Vec<(SkillId, String, u32)> = counts
            .into_iter()
            .map(|(skill, count)| {
                let canonical = lexicon.canonical(skill).unwrap_or_default().to_string();
                (skill, canonical, count)
            })
            .collect();
        rows.sort_by_key(|&(skill, _, _)| skill);
        Vocab::new(rows, min_count)
    }

    /// Builds a vocabulary from `(canonical, count)` rows, assigning skill
    /// ids by input position. Used when training from a contexts file
    /// without the original lexicon.
    pub fn from_counts(
        rows: Vec<(String, u32)>,
        min_count: u32,
    ) -> Result<Vocab, CorpusError> {
        Vocab::new(
            rows.into_iter()
                .enumerate()
                .map(|(i, (canonical, count))| (i as SkillId, canonical, count))
                .collect(),
            min_count,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn dense_index(&self, skill: SkillId) -> Option<u32> {
        self.by_skill.get(&skill).copied()
    }

    pub fn canonical(&self, dense: u32) -> Option<&str> {
        self.entries.get(dense as usize).map(|e| e.canonical.as_str())
    }

    pub fn count(&self, dense: u32) -> Option<u32> {
        self.entries.get(dense as usize).map(|e| e.count)
    }

    /// Counts in dense-index order, for noise-distribution construction.
    pub fn counts(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.count).collect()
    }

    /// Audit export: `canonical<TAB>doc_count<TAB>dense_index`, sorted by
    /// dense index.
    pub fn write_tsv(&self, w: &mut impl Write) -> io::Result<()> {
        for (dense, entry) in self.entries.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}", entry.canonical, entry.count, dense)?;
        }
        Ok(())
    }
}

/// Emits all ordered (center, context) pairs for one context after
/// filtering to vocabulary members: outer loop by position, inner loop by
/// position, self skipped.
pub fn generate_pairs(context: &SkillContext, vocab: &Vocab) -> Vec<TrainingPair> {
    let dense: Vec<u32> = context
        .skills
        .iter()
        .filter_map(|&skill| vocab.dense_index(skill))
        .collect();
    let n = dense.len();
    if n < 2 {
        return Vec::new();
    }
    let mut pairs = Vec::with_capacity(n * (n - 1));
    for (i, &center) in dense.iter().enumerate() {
        for (j, &context_idx) in dense.iter().enumerate() {
            if i != j {
                pairs.push(TrainingPair {
                    center,
                    context: context_idx,
                });
            }
        }
    }
    pairs
}

/// Deterministic epoch permutation keyed by `(seed, epoch)`; the pair
/// multiset is unchanged.
pub fn shuffle_epoch(pairs: &mut [TrainingPair], seed: u64, epoch: u32) {
    let mut rng = seeded_rng(seed, &["shuffle", &epoch.to_string()]);
    pairs.shuffle(&mut rng);
}
