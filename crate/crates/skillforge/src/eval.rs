//! Relevance evaluation: random query sampling, top-5 neighbor labeling by
//! a human (interactive or replayed from a label file), and a synthetic
//! planted-cluster oracle that makes embedding quality machine-checkable
//! when no labeled corpus is available.
//!
//! In synthetic mode "relevant" means "same planted cluster"; in human mode
//! the judgment is whatever the labeler decides, which is inherently
//! subjective and recorded as-is.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::extractor::SkillContext;
use crate::lexicon::{Lexicon, Normalizer, SkillId};
use crate::rng::seeded_rng;
use crate::vectorstore::{top_k, EmbeddingStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot sample {n} queries from a vocabulary of {vocab_size}")]
    SampleTooLarge { n: usize, vocab_size: usize },
    #[error("label file is missing {} entries, e.g. {}", .pairs.len(), format_pairs(.pairs))]
    MissingLabels { pairs: Vec<(String, String)> },
    #[error("{path}:{line}: bad label line: {reason}")]
    BadLabelLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("k={k} must be smaller than the smallest cluster ({size} skills)")]
    KTooLargeForClusters { k: usize, size: usize },
    #[error("skill {skill:?} has no ground-truth cluster")]
    MissingCluster { skill: String },
    #[error("invalid synthetic spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("labeling aborted: {reason}")]
    Aborted { reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .take(3)
        .map(|(q, n)| format!("({q}, {n})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl EvalError {
    pub fn is_io(&self) -> bool {
        match self {
            EvalError::Io { .. } => true,
            EvalError::Store(e) => e.is_io(),
            _ => false,
        }
    }
}

/// One scored neighbor inside a report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NeighborRecord {
    pub skill: String,
    pub score: f64,
}

/// One evaluated query: the neighbor list and, when labeled, one boolean
/// per neighbor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalQuery {
    pub query: String,
    pub neighbors: Vec<NeighborRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<bool>>,
}

/// Outcome of a labeling session. Queries are stored in the order they were
/// presented, for audit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub k: usize,
    pub store_digest: String,
    pub queries: Vec<EvalQuery>,
    /// Relevant labels divided by total labels.
    pub relevance_rate: f64,
}

/// Draws `n` distinct query skills uniformly without replacement,
/// deterministic per seed.
pub fn sample_queries(
    store: &EmbeddingStore,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    let v = store.len();
    if n > v {
        return Err(EvalError::SampleTooLarge { n, vocab_size: v });
    }
    let mut indices: Vec<usize> = (0..v).collect();
    let mut rng = seeded_rng(seed, &["sample-queries"]);
    indices.shuffle(&mut rng);
    indices.truncate(n);
    Ok(indices)
}

/// Supplies a relevance judgment for pairs absent from the label map.
pub trait LabelPrompt {
    fn ask(&mut self, query: &str, neighbor: &str, score: f64) -> Result<bool, EvalError>;
}

/// Loads a label CSV (`query,neighbor,relevant`); a leading header line is
/// tolerated.
pub fn load_label_file(path: &Path) -> Result<HashMap<(String, String), bool>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut labels = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "query,neighbor,relevant") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |reason: &str| EvalError::BadLabelLine {
            path: path.display().to_string(),
            line: n + 1,
            reason: reason.into(),
        };
        if fields.len() != 3 {
            return Err(bad("expected query,neighbor,relevant"));
        }
        let relevant = match fields[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(bad(&format!("relevant must be 0 or 1, got {other:?}"))),
        };
        labels.insert(
            (fields[0].trim().to_string(), fields[1].trim().to_string()),
            relevant,
        );
    }
    Ok(labels)
}

pub fn append_label(
    path: &Path,
    query: &str,
    neighbor: &str,
    relevant: bool,
) -> Result<(), EvalError> {
    use std::io::Write;
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
    writeln!(file, "{query},{neighbor},{}", u8::from(relevant)).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Runs (or replays) a labeling session over the sampled queries.
///
/// Presentation order is shuffled per seed to reduce anchoring; the report
/// keeps that order. Known labels come from `labels`; anything missing goes
/// to `prompt`, and without a prompt the full list of unlabeled pairs is
/// returned as an error so a file-based session can be completed offline.
pub fn run_labeling_session(
    store: &EmbeddingStore,
    query_indices: &[usize],
    k: usize,
    seed: u64,
    labels: &HashMap<(String, String), bool>,
    mut prompt: Option<&mut dyn LabelPrompt>,
    normalizer: &Normalizer,
) -> Result<EvalReport, EvalError> {
    let mut order: Vec<usize> = query_indices.to_vec();
    let mut rng = seeded_rng(seed, &["presentation"]);
    order.shuffle(&mut rng);

    let mut queries = Vec::with_capacity(order.len());
    let mut missing: Vec<(String, String)> = Vec::new();
    let mut relevant = 0u64;
    let mut total = 0u64;

    for &qi in &order {
        let query = store
            .word(qi)
            .expect("sampled index within store")
            .to_string();
        let neighbors: Vec<NeighborRecord> = top_k(&query, k, store, normalizer)?
            .into_iter()
            .map(|n| NeighborRecord {
                skill: store.word(n.index).unwrap_or_default().to_string(),
                score: n.score,
            })
            .collect();
        let mut query_labels = Vec::with_capacity(neighbors.len());
        for n in &neighbors {
            let key = (query.clone(), n.skill.clone());
            let label = match labels.get(&key) {
                Some(&l) => Some(l),
                None => match prompt.as_deref_mut() {
                    Some(p) => Some(p.ask(&query, &n.skill, n.score)?),
                    None => {
                        missing.push(key);
                        None
                    }
                },
            };
            if let Some(l) = label {
                total += 1;
                relevant += u64::from(l);
                query_labels.push(l);
            }
        }
        let labels_opt = (query_labels.len() == neighbors.len()).then_some(query_labels);
        queries.push(EvalQuery {
            query,
            neighbors,
            labels: labels_opt,
        });
    }

    if !missing.is_empty() {
        return Err(EvalError::MissingLabels { pairs: missing });
    }

    Ok(EvalReport {
        seed,
        k,
        store_digest: store.digest(),
        queries,
        relevance_rate: if total == 0 {
            0.0
        } else {
            relevant as f64 / total as f64
        },
    })
}

/// Parameters of a planted-cluster corpus.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub skills_per_cluster: usize,
    pub docs: usize,
    pub skills_per_doc: SizeRange,
    pub intra_cluster_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: String| Err(EvalError::InvalidSpec { reason });
        if self.clusters == 0 || self.skills_per_cluster == 0 || self.docs == 0 {
            return fail("clusters, skills_per_cluster and docs must be positive".into());
        }
        let total = self.clusters * self.skills_per_cluster;
        let SizeRange { min, max } = self.skills_per_doc;
        if min == 0 || min > max {
            return fail(format!("bad skills_per_doc range [{min}, {max}]"));
        }
        if max > total {
            return fail(format!(
                "skills_per_doc upper bound {max} exceeds the {total} available skills"
            ));
        }
        if !(self.intra_cluster_prob > 0.0 && self.intra_cluster_prob <= 1.0) {
            return fail("intra_cluster_prob must lie in (0, 1]".into());
        }
        if self.intra_cluster_prob == 1.0 && max > self.skills_per_cluster {
            return fail(format!(
                "with intra_cluster_prob 1.0, skills_per_doc max {max} cannot exceed the cluster size {}",
                self.skills_per_cluster
            ));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("spec serializes"));
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A generated corpus with its ground truth.
#[derive(Debug)]
pub struct SyntheticCorpus {
    pub lexicon: Lexicon,
    pub contexts: Vec<SkillContext>,
    /// Cluster index per skill id.
    pub cluster_of: Vec<usize>,
    /// Home cluster per document, index-aligned with `contexts`.
    pub home_of: Vec<usize>,
}

impl SyntheticCorpus {
    /// Ground-truth map keyed by canonical string, as the metric wants it.
    pub fn clusters_by_canonical(&self) -> HashMap<String, usize> {
        self.lexicon
            .skills()
            .iter()
            .map(|s| (s.canonical.clone(), self.cluster_of[s.id as usize]))
            .collect()
    }
}

/// Generates a planted-cluster corpus: every document picks a home cluster
/// uniformly, then draws distinct skills — from the home cluster with
/// probability `intra_cluster_prob`, otherwise from the whole vocabulary.
/// Deterministic per seed.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, EvalError> {
    spec.validate()?;
    let total = spec.clusters * spec.skills_per_cluster;
    let names: Vec<String> = (0..total)
        .map(|i| {
            format!(
                "c{:02}s{:02}",
                i / spec.skills_per_cluster,
                i % spec.skills_per_cluster
            )
        })
        .collect();
    let cluster_of: Vec<usize> = (0..total).map(|i| i / spec.skills_per_cluster).collect();
    let lexicon = Lexicon::build(
        names.iter().map(|n| (n.clone(), Vec::new())).collect(),
        Normalizer::default(),
        |n| n + 1,
    )
    .map_err(|e| EvalError::InvalidSpec {
        reason: format!("generated skill names failed validation: {e}"),
    })?;

    let mut rng = seeded_rng(spec.seed, &["synthetic"]);
    let mut contexts = Vec::with_capacity(spec.docs);
    let mut home_of = Vec::with_capacity(spec.docs);
    for doc in 0..spec.docs {
        let home = rng.random_range(0..spec.clusters);
        let size = rng.random_range(spec.skills_per_doc.min..=spec.skills_per_doc.max);
        let home_ids: Vec<SkillId> = (0..spec.skills_per_cluster)
            .map(|s| (home * spec.skills_per_cluster + s) as SkillId)
            .collect();
        let mut chosen: Vec<SkillId> = Vec::with_capacity(size);
        while chosen.len() < size {
            let use_home = rng.random::<f64>() < spec.intra_cluster_prob;
            let pool: Vec<SkillId> = if use_home {
                home_ids
                    .iter()
                    .copied()
                    .filter(|id| !chosen.contains(id))
                    .collect()
            } else {
                (0..total as SkillId)
                    .filter(|id| !chosen.contains(id))
                    .collect()
            };
            let pool = if pool.is_empty() {
                // Home cluster exhausted; fall back to the full vocabulary.
                (0..total as SkillId)
                    .filter(|id| !chosen.contains(id))
                    .collect()
            } else {
                pool
            };
            chosen.push(pool[rng.random_range(0..pool.len())]);
        }
        contexts.push(SkillContext {
            doc_id: format!("doc{doc:06}"),
            skills: chosen,
        });
        home_of.push(home);
    }
    Ok(SyntheticCorpus {
        lexicon,
        contexts,
        cluster_of,
        home_of,
    })
}

/// Mean, over every queryable skill in the store, of the fraction of its
/// top-k neighbors that share its ground-truth cluster.
pub fn cluster_precision_at_k(
    store: &EmbeddingStore,
    clusters: &HashMap<String, usize>,
    k: usize,
    normalizer: &Normalizer,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::KTooLargeForClusters { k, size: 0 });
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for word in store.words() {
        let cluster = clusters
            .get(word)
            .ok_or_else(|| EvalError::MissingCluster {
                skill: word.clone(),
            })?;
        *sizes.entry(*cluster).or_insert(0) += 1;
    }
    let min_size = sizes.values().copied().min().unwrap_or(0);
    if k >= min_size {
        return Err(EvalError::KTooLargeForClusters { k, size: min_size });
    }

    let mut sum = 0.0;
    let mut queries = 0usize;
    for (i, word) in store.words().iter().enumerate() {
        if store.is_zero_norm(i) {
            continue;
        }
        let own = clusters[word];
        let neighbors = top_k(word, k, store, normalizer)?;
        let hits = neighbors
            .iter()
            .filter(|n| clusters.get(store.word(n.index).unwrap_or_default()) == Some(&own))
            .count();
        sum += hits as f64 / k as f64;
        queries += 1;
    }
    Ok(if queries == 0 { 0.0 } else { sum / queries as f64 })
}

/// Machine-readable synthetic evaluation result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub spec: SyntheticSpec,
    pub spec_digest: String,
    pub store_digest: String,
    pub k: usize,
    pub precision: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorstore::EmbeddingStore;

    fn store(words: &[&str], matrix: Vec<f32>, dim: usize) -> EmbeddingStore {
        EmbeddingStore::from_rows(words.iter().map(|s| s.to_string()).collect(), matrix, dim)
            .unwrap()
    }

    fn axis_store() -> EmbeddingStore {
        // Two clusters on orthogonal axes, slightly perturbed so each skill
        // is distinct but cluster-mates stay closest.
        store(
            &["a0", "a1", "a2", "b0", "b1", "b2"],
            vec![
                1.0, 0.02, 0.0, //
                1.0, 0.01, 0.0, //
                1.0, 0.03, 0.0, //
                0.0, 0.02, 1.0, //
                0.0, 0.01, 1.0, //
                0.0, 0.03, 1.0,
            ],
            3,
        )
    }

    fn axis_clusters() -> HashMap<String, usize> {
        [("a0", 0), ("a1", 0), ("a2", 0), ("b0", 1), ("b1", 1), ("b2", 1)]
            .iter()
            .map(|(s, c)| (s.to_string(), *c))
            .collect()
    }

    #[test]
    fn sampling_whole_vocab_is_a_permutation() {
        let s = axis_store();
        let sample = sample_queries(&s, 6, 3).unwrap();
        let mut sorted = sample.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let s = axis_store();
        let a = sample_queries(&s, 4, 9).unwrap();
        let b = sample_queries(&s, 4, 9).unwrap();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
    }

    #[test]
    fn oversampling_is_an_error() {
        let s = axis_store();
        assert!(matches!(
            sample_queries(&s, 7, 0).unwrap_err(),
            EvalError::SampleTooLarge { .. }
        ));
    }

    fn full_labels(
        store: &EmbeddingStore,
        k: usize,
        value: impl Fn(usize) -> bool,
    ) -> HashMap<(String, String), bool> {
        let norm = Normalizer::default();
        let mut labels = HashMap::new();
        let mut i = 0;
        for word in store.words() {
            for n in top_k(word, k, store, &norm).unwrap() {
                labels.insert(
                    (word.clone(), store.word(n.index).unwrap().to_string()),
                    value(i),
                );
                i += 1;
            }
        }
        labels
    }

    #[test]
    fn all_true_labels_give_rate_one() {
        let s = axis_store();
        let labels = full_labels(&s, 2, |_| true);
        let queries = sample_queries(&s, 6, 1).unwrap();
        let report =
            run_labeling_session(&s, &queries, 2, 1, &labels, None, &Normalizer::default())
                .unwrap();
        assert_eq!(report.relevance_rate, 1.0);
        assert_eq!(report.queries.len(), 6);
    }

    #[test]
    fn rate_is_relevant_over_total() {
        // 6 queries × 2 neighbors = 12 labels; make 9 of them true: 0.75.
        let s = axis_store();
        let labels = full_labels(&s, 2, |i| i < 9);
        let queries = sample_queries(&s, 6, 1).unwrap();
        let report =
            run_labeling_session(&s, &queries, 2, 1, &labels, None, &Normalizer::default())
                .unwrap();
        assert!((report.relevance_rate - 0.75).abs() < 1e-12);
    }

    #[test]
    fn seventy_eight_of_one_hundred() {
        // Arithmetic anchor: 78 relevant out of 100 labeled is 0.78.
        let relevant = 78u64;
        let total = 100u64;
        assert!((relevant as f64 / total as f64 - 0.78).abs() < 1e-12);
    }

    #[test]
    fn replay_is_deterministic() {
        let s = axis_store();
        let labels = full_labels(&s, 2, |i| i % 3 != 0);
        let queries = sample_queries(&s, 6, 5).unwrap();
        let norm = Normalizer::default();
        let a = run_labeling_session(&s, &queries, 2, 5, &labels, None, &norm).unwrap();
        let b = run_labeling_session(&s, &queries, 2, 5, &labels, None, &norm).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_is_invariant_under_query_reordering() {
        let s = axis_store();
        let labels = full_labels(&s, 2, |i| i % 2 == 0);
        let norm = Normalizer::default();
        let queries = sample_queries(&s, 6, 5).unwrap();
        let mut reordered = queries.clone();
        reordered.reverse();
        let a = run_labeling_session(&s, &queries, 2, 5, &labels, None, &norm).unwrap();
        let b = run_labeling_session(&s, &reordered, 2, 5, &labels, None, &norm).unwrap();
        assert!((a.relevance_rate - b.relevance_rate).abs() < 1e-12);
    }

    #[test]
    fn missing_labels_are_enumerated() {
        let s = axis_store();
        let labels = HashMap::new();
        let queries = sample_queries(&s, 2, 1).unwrap();
        match run_labeling_session(&s, &queries, 2, 1, &labels, None, &Normalizer::default())
            .unwrap_err()
        {
            EvalError::MissingLabels { pairs } => assert_eq!(pairs.len(), 4),
            other => panic!("unexpected error: {other}"),
        }
    }

    struct ScriptedPrompt {
        answers: Vec<bool>,
        asked: usize,
    }
    impl LabelPrompt for ScriptedPrompt {
        fn ask(&mut self, _q: &str, _n: &str, _s: f64) -> Result<bool, EvalError> {
            let a = self.answers[self.asked % self.answers.len()];
            self.asked += 1;
            Ok(a)
        }
    }

    #[test]
    fn prompt_fills_missing_labels() {
        let s = axis_store();
        let labels = HashMap::new();
        let queries = sample_queries(&s, 3, 2).unwrap();
        let mut prompt = ScriptedPrompt { answers: vec![true, false], asked: 0 };
        let report = run_labeling_session(
            &s,
            &queries,
            2,
            2,
            &labels,
            Some(&mut prompt),
            &Normalizer::default(),
        )
        .unwrap();
        assert_eq!(prompt.asked, 6);
        assert!((report.relevance_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn label_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        append_label(&path, "java", "spark", true).unwrap();
        append_label(&path, "java", "hadoop", false).unwrap();
        let labels = load_label_file(&path).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[&("java".to_string(), "spark".to_string())], true);
        assert_eq!(labels[&("java".to_string(), "hadoop".to_string())], false);
    }

    #[test]
    fn bad_label_line_is_positioned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        std::fs::write(&path, "java,spark,2\n").unwrap();
        match load_label_file(&path).unwrap_err() {
            EvalError::BadLabelLine { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            clusters: 6,
            skills_per_cluster: 10,
            docs: 500,
            skills_per_doc: SizeRange { min: 4, max: 8 },
            intra_cluster_prob: 0.9,
            seed: 11,
        }
    }

    #[test]
    fn synthetic_corpus_respects_spec() {
        let corpus = generate_synthetic_corpus(&small_spec()).unwrap();
        assert_eq!(corpus.contexts.len(), 500);
        assert_eq!(corpus.lexicon.len(), 60);
        for ctx in &corpus.contexts {
            assert!((4..=8).contains(&ctx.skills.len()));
            let mut dedup = ctx.skills.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), ctx.skills.len(), "skills must be distinct");
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let a = generate_synthetic_corpus(&small_spec()).unwrap();
        let b = generate_synthetic_corpus(&small_spec()).unwrap();
        assert_eq!(a.contexts, b.contexts);
        assert_eq!(a.home_of, b.home_of);
    }

    #[test]
    fn pure_intra_cluster_documents_stay_home() {
        let spec = SyntheticSpec {
            intra_cluster_prob: 1.0,
            ..small_spec()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        for (ctx, &home) in corpus.contexts.iter().zip(&corpus.home_of) {
            for &skill in &ctx.skills {
                assert_eq!(corpus.cluster_of[skill as usize], home);
            }
        }
    }

    #[test]
    fn oversized_documents_are_rejected() {
        let spec = SyntheticSpec {
            skills_per_doc: SizeRange { min: 4, max: 100 },
            ..small_spec()
        };
        assert!(matches!(
            generate_synthetic_corpus(&spec).unwrap_err(),
            EvalError::InvalidSpec { .. }
        ));
    }

    #[test]
    fn intra_cluster_fraction_matches_expectation() {
        // Expected intra fraction: p + (1−p)/clusters.
        let spec = SyntheticSpec {
            docs: 20_000,
            ..small_spec()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let mut intra = 0u64;
        let mut total = 0u64;
        for (ctx, &home) in corpus.contexts.iter().zip(&corpus.home_of) {
            for &skill in &ctx.skills {
                total += 1;
                intra += u64::from(corpus.cluster_of[skill as usize] == home);
            }
        }
        assert!(total >= 100_000, "need at least 1e5 mentions, got {total}");
        let fraction = intra as f64 / total as f64;
        let expected = 0.9 + 0.1 / 6.0;
        assert!(
            (fraction - expected).abs() < 0.02,
            "fraction {fraction} vs expected {expected}"
        );
    }

    #[test]
    fn one_hot_clusters_give_precision_one() {
        let s = axis_store();
        let p = cluster_precision_at_k(&s, &axis_clusters(), 2, &Normalizer::default()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn degenerate_identical_vectors_match_brute_force() {
        // All-identical vectors: every cosine ties at 1.0 and neighbors are
        // purely lexicographic, so the metric must agree with a brute-force
        // recomputation.
        let words = ["a0", "a1", "b0", "b1", "c0", "c1"];
        let s = store(&words, vec![0.3, 0.4].repeat(6), 2);
        let clusters: HashMap<String, usize> = words
            .iter()
            .map(|w| (w.to_string(), usize::from(!w.starts_with('a')) + usize::from(w.starts_with('c'))))
            .collect();
        let norm = Normalizer::default();
        let got = cluster_precision_at_k(&s, &clusters, 1, &norm).unwrap();

        // Brute force: for each word, neighbors sorted by (score desc, word asc).
        let mut expected = 0.0;
        for w in &words {
            let mut cands: Vec<&str> = words.iter().filter(|x| *x != w).copied().collect();
            cands.sort();
            let hit = clusters[cands[0]] == clusters[*w];
            expected += f64::from(u8::from(hit));
        }
        expected /= words.len() as f64;
        assert_eq!(got, expected);
    }

    #[test]
    fn k_must_be_below_cluster_size() {
        let s = axis_store();
        match cluster_precision_at_k(&s, &axis_clusters(), 3, &Normalizer::default()).unwrap_err()
        {
            EvalError::KTooLargeForClusters { k, size } => {
                assert_eq!(k, 3);
                assert_eq!(size, 3);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn unknown_cluster_membership_is_an_error() {
        let s = axis_store();
        let mut clusters = axis_clusters();
        clusters.remove("b1");
        assert!(matches!(
            cluster_precision_at_k(&s, &clusters, 2, &Normalizer::default()).unwrap_err(),
            EvalError::MissingCluster { .. }
        ));
    }
}
