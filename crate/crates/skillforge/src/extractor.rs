//! Turns raw job-description text into per-document canonical skill sets.
//!
//! Matching runs over the cleaned token stream with leftmost-longest
//! semantics: at each position the longest dictionary phrase wins and its
//! tokens are consumed, so shorter matches inside it are suppressed.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::lexicon::{Lexicon, SkillId};

/// One raw input document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

/// The deduplicated skills extracted from one document, in first-occurrence
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillContext {
    pub doc_id: String,
    pub skills: Vec<SkillId>,
}

/// Counters reported after a corpus pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionSummary {
    pub documents: u64,
    pub mentions: u64,
    pub empty_contexts: u64,
}

impl ExtractionSummary {
    pub fn one_line(&self) -> String {
        format!(
            "{} docs, {} mentions, {} empty contexts",
            self.documents, self.mentions, self.empty_contexts
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("duplicate doc_id {doc_id:?}")]
    DuplicateDocId { doc_id: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ExtractError {
    pub fn is_io(&self) -> bool {
        matches!(self, ExtractError::Io(_))
    }
}

/// Token-level phrase matcher derived from a lexicon's alias index.
struct PhraseMatcher<'a> {
    /// first token → candidate (token sequence, skill id), longest first.
    heads: HashMap<&'a str, Vec<(Vec<&'a str>, SkillId)>>,
}

impl<'a> PhraseMatcher<'a> {
    fn new(lexicon: &'a Lexicon) -> Self {
        let mut heads: HashMap<&str, Vec<(Vec<&str>, SkillId)>> = HashMap::new();
        for (entry, &id) in lexicon.alias_index() {
            let tokens: Vec<&str> = entry.split(' ').collect();
            heads.entry(tokens[0]).or_default().push((tokens, id));
        }
        for bucket in heads.values_mut() {
            // Longest first; equal-length entries are distinct strings so at
            // most one can match at a given position.
            bucket.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        PhraseMatcher { heads }
    }

    fn scan(&self, tokens: &[&str]) -> Vec<SkillId> {
        let mut found = Vec::new();
        let mut pos = 0;
        'outer: while pos < tokens.len() {
            if let Some(bucket) = self.heads.get(tokens[pos]) {
                for (phrase, id) in bucket {
                    if pos + phrase.len() <= tokens.len()
                        && tokens[pos..pos + phrase.len()] == phrase[..]
                    {
                        found.push(*id);
                        pos += phrase.len();
                        continue 'outer;
                    }
                }
            }
            pos += 1;
        }
        found
    }
}

/// Extracts the skill context of a single document. Pure in
/// `(doc.text, lexicon)`; a document without matches yields an empty list.
pub fn extract(doc: &Document, lexicon: &Lexicon) -> SkillContext {
    let matcher = PhraseMatcher::new(lexicon);
    extract_with(doc, lexicon, &matcher)
}

fn extract_with(doc: &Document, lexicon: &Lexicon, matcher: &PhraseMatcher<'_>) -> SkillContext {
    let cleaned = lexicon.normalizer().normalize(&doc.text);
    let tokens: Vec<&str> = cleaned.split(' ').filter(|t| !t.is_empty()).collect();

    let mut seen = HashSet::new();
    let mut skills = Vec::new();
    for id in matcher.scan(&tokens) {
        if seen.insert(id) {
            skills.push(id);
        }
    }
    SkillContext {
        doc_id: doc.doc_id.clone(),
        skills,
    }
}

/// Runs [`extract`] over a document stream, feeding each context to `sink`
/// in input order. Duplicate doc ids abort the pass.
pub fn extract_corpus_streaming<E>(
    docs: impl IntoIterator<Item = Result<Document, ExtractError>>,
    lexicon: &Lexicon,
    mut sink: impl FnMut(&SkillContext) -> Result<(), E>,
) -> Result<ExtractionSummary, ExtractError>
where
    ExtractError: From<E>,
{
    let matcher = PhraseMatcher::new(lexicon);
    let mut summary = ExtractionSummary::default();
    let mut seen_ids = HashSet::new();
    for doc in docs {
        let doc = doc?;
        if !seen_ids.insert(doc.doc_id.clone()) {
            return Err(ExtractError::DuplicateDocId { doc_id: doc.doc_id });
        }
        let context = extract_with(&doc, lexicon, &matcher);
        summary.documents += 1;
        summary.mentions += context.skills.len() as u64;
        if context.skills.is_empty() {
            summary.empty_contexts += 1;
        }
        sink(&context).map_err(ExtractError::from)?;
    }
    Ok(summary)
}

/// Materialized variant of [`extract_corpus_streaming`].
pub fn extract_corpus(
    docs: impl IntoIterator<Item = Document>,
    lexicon: &Lexicon,
) -> Result<(Vec<SkillContext>, ExtractionSummary), ExtractError> {
    let mut contexts = Vec::new();
    let summary = extract_corpus_streaming::<ExtractError>(
        docs.into_iter().map(Ok),
        lexicon,
        |ctx| {
            contexts.push(ctx.clone());
            Ok(())
        },
    )?;
    Ok((contexts, summary))
}

/// Context record as persisted to JSON-lines: canonical strings rather than
/// ids, for human readability.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ContextRecord {
    pub doc_id: String,
    pub skills: Vec<String>,
}

impl ContextRecord {
    pub fn from_context(context: &SkillContext, lexicon: &Lexicon) -> ContextRecord {
        ContextRecord {
            doc_id: context.doc_id.clone(),
            skills: context
                .skills
                .iter()
                .map(|&id| lexicon.canonical(id).unwrap_or_default().to_string())
                .collect(),
        }
    }
}

/// Iterator over a JSON-lines document stream; blank lines are skipped and
/// parse errors carry the line number.
pub fn read_documents(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<Document, ExtractError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(n, line)| match line {
            Err(e) => Some(Err(ExtractError::Io(e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(
                serde_json::from_str::<Document>(&l)
                    .map_err(|source| ExtractError::Parse { line: n + 1, source }),
            ),
        })
}

/// Reads a contexts JSON-lines file back into records.
pub fn read_context_records(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<ContextRecord, ExtractError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(n, line)| match line {
            Err(e) => Some(Err(ExtractError::Io(e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(
                serde_json::from_str::<ContextRecord>(&l)
                    .map_err(|source| ExtractError::Parse { line: n + 1, source }),
            ),
        })
}

pub fn write_context_record(w: &mut impl Write, record: &ContextRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    writeln!(w)
}
