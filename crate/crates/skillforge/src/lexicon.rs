//! Canonical skill dictionary: alias resolution and the skill-string
//! cleaning pipeline.
//!
//! Cleaning runs four steps in a fixed order: (1) case-fold, trim and strip
//! punctuation (protected tokens such as `c++` survive verbatim), (2) replace
//! known long-form phrases with their canonical short forms, (3) apply the
//! regex rule set (standalone version tokens are dropped, whitespace is
//! unified), (4) suffix-stem residual plural and gerund forms per token.
//! Steps 2–4 iterate until the string stops changing, which makes the whole
//! pipeline idempotent for any replacement table that validates.
//!
//! The regex rule set is a reconstruction; the exact rules are not pinned
//! down anywhere authoritative, so they live in [`REGEX_RULES`] where they
//! can be audited. Homonyms (e.g. "spark" the framework vs. the word) are
//! not disambiguated.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

/// Identifier of a skill within one [`Lexicon`]; dense `0..N`.
pub type SkillId = u32;

/// Tokens exempt from punctuation stripping and stemming.
pub const DEFAULT_PROTECTED_TOKENS: &[&str] = &["c++", "c#", ".net", "node.js"];

/// Default long-form → short-form replacement table, shipped as an editable
/// TSV and embedded here so the tool works without extra files.
pub const DEFAULT_REPLACEMENTS_TSV: &str = include_str!("../data/replacements.tsv");

/// Regex rules applied in step 3, in order. Each entry is
/// `(rule name, pattern, replacement)`.
///
/// `\b` keeps glued digits intact: `html5` has no word boundary before the
/// digit, while a standalone `5` or `v2` does.
pub const REGEX_RULES: &[(&str, &str, &str)] = &[
    ("strip standalone version tokens", r"\bv?[0-9]+(\.[0-9]+)*\b", " "),
    ("unify separators", r"\s+", " "),
];

const MAX_PIPELINE_ITERATIONS: usize = 8;

/// Cleaning pipeline configuration: protected tokens plus the phrase
/// replacement table.
#[derive(Debug, Clone)]
pub struct Normalizer {
    /// Protected tokens, longest first so overlapping matches prefer the
    /// longer token.
    protected: Vec<String>,
    /// Long-form token sequence → short form.
    replacements: Vec<(Vec<String>, String)>,
    /// First token of each long form → indices into `replacements`, longest
    /// sequence first.
    replacement_heads: HashMap<String, Vec<usize>>,
    /// Short forms, consulted by the stemmer's length guard.
    short_forms: BTreeSet<String>,
}

fn rules() -> &'static [(Regex, &'static str)] {
    static RULES: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    RULES.get_or_init(|| {
        REGEX_RULES
            .iter()
            .map(|(_, pat, rep)| (Regex::new(pat).expect("rule pattern"), *rep))
            .collect()
    })
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::new(
            DEFAULT_PROTECTED_TOKENS.iter().map(|s| s.to_string()),
            parse_replacements(DEFAULT_REPLACEMENTS_TSV, "<builtin>")
                .expect("builtin replacement table is valid"),
        )
        .expect("builtin normalizer configuration is valid")
    }
}

impl Normalizer {
    /// Builds a normalizer from protected tokens and replacement pairs.
    ///
    /// Every replacement value must be a fixpoint of the resulting pipeline;
    /// otherwise normalization could not be idempotent and the table is
    /// rejected.
    pub fn new(
        protected: impl IntoIterator<Item = String>,
        replacements: Vec<(String, String)>,
    ) -> Result<Self, LexiconError> {
        let mut protected: Vec<String> = protected
            .into_iter()
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        protected.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        protected.dedup();

        let mut table = Vec::new();
        let mut heads: HashMap<String, Vec<usize>> = HashMap::new();
        let mut short_forms = BTreeSet::new();
        let mut seen_keys: HashMap<Vec<String>, String> = HashMap::new();
        for (long, short) in replacements {
            let key: Vec<String> = long.to_lowercase().split_whitespace().map(str::to_string).collect();
            let value = short.to_lowercase().trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(LexiconError::BadReplacement {
                    long,
                    reason: "empty long or short form".into(),
                });
            }
            match seen_keys.get(&key) {
                Some(prev) if *prev != value => {
                    return Err(LexiconError::BadReplacement {
                        long,
                        reason: format!("maps to both {prev:?} and {value:?}"),
                    })
                }
                Some(_) => continue,
                None => {}
            }
            seen_keys.insert(key.clone(), value.clone());
            short_forms.insert(value.clone());
            heads.entry(key[0].clone()).or_default().push(table.len());
            table.push((key, value));
        }
        for bucket in heads.values_mut() {
            bucket.sort_by(|&a, &b| table[b].0.len().cmp(&table[a].0.len()));
        }

        let normalizer = Normalizer {
            protected,
            replacements: table,
            replacement_heads: heads,
            short_forms,
        };

        // A short form that the pipeline rewrites would break idempotence.
        for (long, short) in &normalizer.replacements {
            let renormalized = normalizer.normalize(short);
            if renormalized != *short {
                return Err(LexiconError::BadReplacement {
                    long: long.join(" "),
                    reason: format!(
                        "short form {short:?} is not stable under cleaning (becomes {renormalized:?})"
                    ),
                });
            }
        }
        Ok(normalizer)
    }

    /// Default protected tokens plus replacement pairs read from a TSV file.
    pub fn with_replacements_file(path: &Path) -> Result<Self, LexiconError> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Normalizer::new(
            DEFAULT_PROTECTED_TOKENS.iter().map(|s| s.to_string()),
            parse_replacements(&text, &path.display().to_string())?,
        )
    }

    pub fn protected_tokens(&self) -> &[String] {
        &self.protected
    }

    /// Runs the full cleaning pipeline. An empty return value means "no
    /// skill" and must be treated as a miss by callers.
    pub fn normalize(&self, raw: &str) -> String {
        let mut current = self.strip_step(raw);
        for _ in 0..MAX_PIPELINE_ITERATIONS {
            let replaced = self.replace_step(&current);
            let ruled = regex_step(&replaced);
            let stemmed = self.stem_step(&ruled);
            if stemmed == current {
                break;
            }
            current = stemmed;
        }
        current
    }

    /// Step 1: case-fold, shield protected tokens, strip punctuation and
    /// symbols, collapse whitespace.
    fn strip_step(&self, raw: &str) -> String {
        let lower = raw.to_lowercase();
        // Drop any pre-existing private-use chars so they cannot collide with
        // the placeholders used to shield protected tokens.
        let lower: String = lower
            .chars()
            .map(|c| if ('\u{e000}'..='\u{f8ff}').contains(&c) { ' ' } else { c })
            .collect();

        let shielded = self.shield_protected(&lower);
        let stripped: String = shielded
            .chars()
            .map(|c| {
                if c.is_alphanumeric() || c.is_whitespace() || is_placeholder(c) {
                    c
                } else {
                    ' '
                }
            })
            .collect();
        let collapsed = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
        self.unshield_protected(&collapsed)
    }

    /// Replaces protected-token occurrences with private-use placeholders.
    /// An occurrence only counts when it is bounded by non-alphanumeric
    /// characters (or the string edge), so `.net` inside `asp.net` is not
    /// shielded.
    fn shield_protected(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            for (t, tok) in self.protected.iter().enumerate() {
                let tok_chars: Vec<char> = tok.chars().collect();
                if chars[i..].starts_with(&tok_chars) {
                    let left_ok = i == 0 || !chars[i - 1].is_alphanumeric();
                    let after = i + tok_chars.len();
                    let right_ok = after >= chars.len() || !chars[after].is_alphanumeric();
                    if left_ok && right_ok {
                        out.push(placeholder(t));
                        i = after;
                        continue 'outer;
                    }
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }

    fn unshield_protected(&self, text: &str) -> String {
        text.chars()
            .map(|c| match placeholder_index(c) {
                Some(t) if t < self.protected.len() => self.protected[t].clone(),
                _ => c.to_string(),
            })
            .collect()
    }

    /// Step 2: greedy leftmost-longest replacement of long-form phrases.
    fn replace_step(&self, text: &str) -> String {
        let tokens: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();
        let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
        let mut i = 0;
        'outer: while i < tokens.len() {
            if let Some(bucket) = self.replacement_heads.get(tokens[i]) {
                for &ri in bucket {
                    let (key, value) = &self.replacements[ri];
                    if i + key.len() <= tokens.len()
                        && tokens[i..i + key.len()].iter().zip(key).all(|(a, b)| a == b)
                    {
                        out.push(value);
                        i += key.len();
                        continue 'outer;
                    }
                }
            }
            out.push(tokens[i]);
            i += 1;
        }
        out.join(" ")
    }

    /// Step 4: per-token suffix stemming, iterated to a fixpoint. Applies
    /// only to purely alphabetic tokens; protected tokens and anything with
    /// digits or symbols pass through untouched.
    fn stem_step(&self, text: &str) -> String {
        text.split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| self.stem_token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn stem_token(&self, token: &str) -> String {
        if self.protected.iter().any(|p| p == token)
            || !token.chars().all(|c| c.is_alphabetic())
        {
            return token.to_string();
        }
        let mut cur = token.to_string();
        loop {
            let next = self.stem_once(&cur);
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    /// One pass of the suffix rules. A stripped result is accepted when it
    /// keeps at least three characters or is a known short form.
    fn stem_once(&self, token: &str) -> String {
        let ok = |stem: &str| stem.chars().count() >= 3 || self.short_forms.contains(stem);
        if token.ends_with("ss") {
            return token.to_string();
        }
        if let Some(stem) = token.strip_suffix("ies") {
            let candidate = format!("{stem}y");
            if ok(&candidate) {
                return candidate;
            }
        }
        if let Some(stem) = token.strip_suffix("es") {
            // "classes" → "class", "boxes" → "box"; but "databases" ends in
            // a bare "ses" and is a plain plural, handled by the s-rule.
            if (stem.ends_with("ss")
                || stem.ends_with('x')
                || stem.ends_with('z')
                || stem.ends_with("ch")
                || stem.ends_with("sh"))
                && ok(stem)
            {
                return stem.to_string();
            }
        }
        if let Some(stem) = token.strip_suffix('s') {
            if ok(stem) {
                return stem.to_string();
            }
        }
        if let Some(stem) = token.strip_suffix("ing") {
            if ok(stem) && stem.chars().any(is_vowel) {
                return undouble(stem);
            }
        }
        token.to_string()
    }
}

fn regex_step(text: &str) -> String {
    let mut current = text.to_string();
    for (re, rep) in rules() {
        current = re.replace_all(&current, *rep).into_owned();
    }
    current.trim().to_string()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Drops a trailing doubled consonant (`programm` → `program`), keeping
/// `l`/`s`/`z` doubled as conventional stemmers do.
fn undouble(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    if chars.len() >= 2 {
        let last = chars[chars.len() - 1];
        if last == chars[chars.len() - 2]
            && last.is_alphabetic()
            && !is_vowel(last)
            && !matches!(last, 'l' | 's' | 'z')
        {
            return chars[..chars.len() - 1].iter().collect();
        }
    }
    stem.to_string()
}

fn placeholder(index: usize) -> char {
    char::from_u32(0xe000 + index as u32).expect("placeholder in private use area")
}

fn placeholder_index(c: char) -> Option<usize> {
    let v = c as u32;
    (0xe000..=0xf8ff).contains(&v).then(|| (v - 0xe000) as usize)
}

fn is_placeholder(c: char) -> bool {
    placeholder_index(c).is_some()
}

/// Parses a replacement TSV: `long_form<TAB>short_form`, `#` comments.
pub fn parse_replacements(text: &str, origin: &str) -> Result<Vec<(String, String)>, LexiconError> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let long = fields.next().unwrap_or("").trim();
        let short = fields.next().unwrap_or("").trim();
        if long.is_empty() || short.is_empty() {
            return Err(LexiconError::BadReplacement {
                long: format!("{origin}:{}", lineno + 1),
                reason: "expected long_form<TAB>short_form".into(),
            });
        }
        pairs.push((long.to_string(), short.to_string()));
    }
    Ok(pairs)
}

/// One dictionary entry: a canonical skill string plus its aliases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalSkill {
    pub id: SkillId,
    pub canonical: String,
    pub aliases: BTreeSet<String>,
}

/// Immutable skill dictionary. Safe to share across threads after
/// construction.
#[derive(Debug, Clone)]
pub struct Lexicon {
    skills: Vec<CanonicalSkill>,
    alias_index: HashMap<String, SkillId>,
    normalizer: Normalizer,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: canonical {canonical:?} already defined on line {first_line}")]
    DuplicateCanonical {
        line: usize,
        first_line: usize,
        canonical: String,
    },
    #[error("line {line}: alias {alias:?} collides with {existing:?}")]
    AliasCollision {
        line: usize,
        alias: String,
        existing: String,
    },
    #[error("line {line}: skill is empty after cleaning ({raw:?})")]
    EmptyCanonical { line: usize, raw: String },
    #[error("replacement {long:?}: {reason}")]
    BadReplacement { long: String, reason: String },
    #[error("lexicon defines no skills")]
    Empty,
}

impl LexiconError {
    /// Coarse failure class, used by the CLI to pick an exit code.
    pub fn is_io(&self) -> bool {
        matches!(self, LexiconError::Io { .. })
    }
}

impl Lexicon {
    /// Builds a lexicon from `(canonical, aliases)` entries. Strings are run
    /// through the cleaning pipeline first; `line_of` positions error
    /// messages for file-based construction (entry index otherwise).
    pub fn build(
        entries: Vec<(String, Vec<String>)>,
        normalizer: Normalizer,
        line_of: impl Fn(usize) -> usize,
    ) -> Result<Lexicon, LexiconError> {
        let mut skills: Vec<CanonicalSkill> = Vec::with_capacity(entries.len());
        let mut alias_index: HashMap<String, SkillId> = HashMap::new();
        let mut canonical_lines: HashMap<String, usize> = HashMap::new();

        for (n, (raw_canonical, raw_aliases)) in entries.into_iter().enumerate() {
            let line = line_of(n);
            let canonical = normalizer.normalize(&raw_canonical);
            if canonical.is_empty() {
                return Err(LexiconError::EmptyCanonical {
                    line,
                    raw: raw_canonical,
                });
            }
            if let Some(&first_line) = canonical_lines.get(&canonical) {
                return Err(LexiconError::DuplicateCanonical {
                    line,
                    first_line,
                    canonical,
                });
            }
            if let Some(&other) = alias_index.get(&canonical) {
                return Err(LexiconError::AliasCollision {
                    line,
                    alias: canonical,
                    existing: format!("skill {:?}", skills[other as usize].canonical),
                });
            }
            let id = skills.len() as SkillId;
            canonical_lines.insert(canonical.clone(), line);
            alias_index.insert(canonical.clone(), id);

            let mut aliases = BTreeSet::new();
            for raw_alias in raw_aliases {
                let alias = normalizer.normalize(&raw_alias);
                if alias.is_empty() || alias == canonical {
                    continue; // redundant once cleaned
                }
                match alias_index.get(&alias) {
                    Some(&owner) if owner == id => {}
                    Some(&owner) => {
                        return Err(LexiconError::AliasCollision {
                            line,
                            alias,
                            existing: format!("skill {:?}", skills[owner as usize].canonical),
                        })
                    }
                    None => {
                        alias_index.insert(alias.clone(), id);
                        aliases.insert(alias);
                    }
                }
            }
            skills.push(CanonicalSkill {
                id,
                canonical,
                aliases,
            });
        }

        Ok(Lexicon {
            skills,
            alias_index,
            normalizer,
        })
    }

    /// Loads a lexicon TSV (`canonical<TAB>alias…`, `#` comments) with the
    /// default normalizer.
    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        Lexicon::load_with(path, Normalizer::default())
    }

    /// Loads a lexicon TSV with an explicit normalizer configuration.
    pub fn load_with(path: &Path, normalizer: Normalizer) -> Result<Lexicon, LexiconError> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t').map(str::trim);
            let canonical = fields.next().unwrap_or("").to_string();
            let aliases: Vec<String> = fields.filter(|f| !f.is_empty()).map(str::to_string).collect();
            entries.push((canonical, aliases));
            lines.push(lineno + 1);
        }
        Lexicon::build(entries, normalizer, |n| lines[n])
    }

    /// Resolves a raw string to a skill id; a miss is a value, not an error.
    pub fn resolve(&self, raw: &str) -> Option<SkillId> {
        let cleaned = self.normalizer.normalize(raw);
        if cleaned.is_empty() {
            return None;
        }
        self.alias_index.get(&cleaned).copied()
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn skills(&self) -> &[CanonicalSkill] {
        &self.skills
    }

    pub fn canonical(&self, id: SkillId) -> Option<&str> {
        self.skills.get(id as usize).map(|s| s.canonical.as_str())
    }

    /// Number of entries in the alias index (canonicals plus aliases).
    pub fn alias_index_len(&self) -> usize {
        self.alias_index.len()
    }

    pub fn alias_index(&self) -> &HashMap<String, SkillId> {
        &self.alias_index
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }
}

impl fmt::Display for Lexicon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lexicon of {} skills ({} index entries)", self.skills.len(), self.alias_index.len())
    }
}
