//! From text cells to countable language units.
//!
//! The pipeline is `tokenize` → `preprocess` → `build_ngrams` or
//! `build_cooccurrences`. Unit keys are tokens joined by a single space, so
//! tokens themselves never contain whitespace.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joiner between tokens of a multi-token unit key.
pub const UNIT_JOINER: &str = " ";

#[derive(Debug, Error)]
pub enum UnitError {
    #[error("unknown tokenizer `{0}`")]
    UnknownTokenizer(String),
    #[error("tokenizer `{tokenizer}` produced an invalid token {token:?} (tokens must be non-empty and whitespace-free)")]
    InvalidToken { tokenizer: String, token: String },
    #[error("stopword file not found: {}", .0.display())]
    StopwordFileNotFound(PathBuf),
    #[error("cannot read stopword file {}: {source}", path.display())]
    StopwordFile { path: PathBuf, source: io::Error },
    #[error("window {window} is smaller than n = {n}")]
    WindowTooSmall { window: usize, n: usize },
    #[error("invalid unit configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = UnitError> = std::result::Result<T, E>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenizerSpec {
    #[default]
    DefaultWhitespace,
    Custom { custom_id: String },
}

impl TokenizerSpec {
    pub fn custom(id: impl Into<String>) -> Self {
        TokenizerSpec::Custom {
            custom_id: id.into(),
        }
    }
}

pub type TokenizerFn = dyn Fn(&str) -> Vec<String> + Send + Sync;

/// Named custom tokenizers. `with_builtins` registers `char`, which emits
/// every non-whitespace character as its own token.
#[derive(Clone, Default)]
pub struct TokenizerRegistry {
    entries: HashMap<String, Arc<TokenizerFn>>,
}

impl TokenizerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register("char", |text: &str| {
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(String::from)
                .collect()
        });
        registry
    }

    pub fn register<F>(&mut self, id: impl Into<String>, f: F)
    where
        F: Fn(&str) -> Vec<String> + Send + Sync + 'static,
    {
        self.entries.insert(id.into(), Arc::new(f));
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn resolve(&self, spec: &TokenizerSpec) -> Result<Tokenizer> {
        match spec {
            TokenizerSpec::DefaultWhitespace => Ok(Tokenizer::Whitespace),
            TokenizerSpec::Custom { custom_id } => self
                .entries
                .get(custom_id)
                .map(|f| Tokenizer::Custom {
                    id: custom_id.clone(),
                    f: Arc::clone(f),
                })
                .ok_or_else(|| UnitError::UnknownTokenizer(custom_id.clone())),
        }
    }
}

impl fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ids: Vec<_> = self.entries.keys().collect();
        ids.sort();
        f.debug_struct("TokenizerRegistry").field("ids", &ids).finish()
    }
}

#[derive(Clone)]
pub enum Tokenizer {
    Whitespace,
    Custom { id: String, f: Arc<TokenizerFn> },
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        match self {
            // split_whitespace splits on the Unicode White_Space property
            Tokenizer::Whitespace => Ok(text.split_whitespace().map(str::to_owned).collect()),
            Tokenizer::Custom { id, f } => {
                let tokens = f(text);
                if let Some(bad) = tokens
                    .iter()
                    .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
                {
                    return Err(UnitError::InvalidToken {
                        tokenizer: id.clone(),
                        token: bad.clone(),
                    });
                }
                Ok(tokens)
            }
        }
    }
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tokenizer::Whitespace => f.write_str("Tokenizer::Whitespace"),
            Tokenizer::Custom { id, .. } => write!(f, "Tokenizer::Custom({id})"),
        }
    }
}

pub fn tokenize(text: &str, spec: &TokenizerSpec, registry: &TokenizerRegistry) -> Result<Vec<String>> {
    registry.resolve(spec)?.tokenize(text)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub lowercase: bool,
    pub stopword_files: Vec<PathBuf>,
    pub extra_stopwords: Vec<String>,
}

/// Compiled preprocessing step: lowercasing plus the merged stopword set.
#[derive(Clone, Debug, Default)]
pub struct Preprocessor {
    lowercase: bool,
    stopwords: HashSet<String>,
}

impl Preprocessor {
    pub fn new(opts: &PreprocessOptions) -> Result<Self> {
        let mut words: Vec<String> = opts.extra_stopwords.clone();
        for path in &opts.stopword_files {
            words.extend(read_stopword_file(path)?);
        }
        let stopwords = words
            .into_iter()
            .map(|w| if opts.lowercase { w.to_lowercase() } else { w })
            .collect();
        Ok(Preprocessor {
            lowercase: opts.lowercase,
            stopwords,
        })
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn apply(&self, tokens: Vec<String>) -> Vec<String> {
        tokens
            .into_iter()
            .map(|t| if self.lowercase { t.to_lowercase() } else { t })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}

/// Newline-delimited stopword list; lines are trimmed, blank lines and
/// `#` comments skipped.
pub fn read_stopword_file(path: &Path) -> Result<Vec<String>> {
    let content = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => UnitError::StopwordFileNotFound(path.to_owned()),
        _ => UnitError::StopwordFile {
            path: path.to_owned(),
            source: e,
        },
    })?;
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

pub fn preprocess(tokens: Vec<String>, opts: &PreprocessOptions) -> Result<Vec<String>> {
    Ok(Preprocessor::new(opts)?.apply(tokens))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    #[default]
    Ngram,
    Cooccurrence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitConfig {
    #[serde(default)]
    pub mode: UnitMode,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default)]
    pub dedup_same_surface: bool,
}

fn default_n() -> usize {
    1
}

impl Default for UnitConfig {
    fn default() -> Self {
        UnitConfig::ngram(1)
    }
}

impl UnitConfig {
    pub fn ngram(n: usize) -> Self {
        UnitConfig {
            mode: UnitMode::Ngram,
            n,
            window: None,
            dedup_same_surface: false,
        }
    }

    pub fn cooccurrence(n: usize, window: usize, dedup_same_surface: bool) -> Self {
        UnitConfig {
            mode: UnitMode::Cooccurrence,
            n,
            window: Some(window),
            dedup_same_surface,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(UnitError::InvalidConfig("n must be at least 1".into()));
        }
        match (self.mode, self.window) {
            (UnitMode::Ngram, Some(_)) => Err(UnitError::InvalidConfig(
                "window is only valid for co-occurrence units".into(),
            )),
            (UnitMode::Cooccurrence, None) => Err(UnitError::InvalidConfig(
                "co-occurrence units need a window".into(),
            )),
            (UnitMode::Cooccurrence, Some(window)) if window < self.n => {
                Err(UnitError::WindowTooSmall { window, n: self.n })
            }
            _ => Ok(()),
        }
    }
}

/// Multiset of unit keys from one text, plus its post-preprocessing token count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnitBag {
    pub units: BTreeMap<String, u64>,
    pub token_count: usize,
}

impl UnitBag {
    /// Number of units counted with multiplicity.
    pub fn len(&self) -> u64 {
        self.units.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    fn add(&mut self, key: String) {
        *self.units.entry(key).or_insert(0) += 1;
    }
}

pub fn build_ngrams(tokens: &[String], n: usize) -> UnitBag {
    assert!(n >= 1, "n-gram size must be positive");
    let mut bag = UnitBag {
        token_count: tokens.len(),
        ..UnitBag::default()
    };
    for window in tokens.windows(n) {
        bag.add(window.join(UNIT_JOINER));
    }
    bag
}

pub fn build_cooccurrences(tokens: &[String], cfg: &UnitConfig) -> Result<UnitBag> {
    let n = cfg.n;
    let window = cfg.window.unwrap_or(n);
    if n == 0 {
        return Err(UnitError::InvalidConfig("n must be at least 1".into()));
    }
    if window < n {
        return Err(UnitError::WindowTooSmall { window, n });
    }
    let mut bag = UnitBag {
        token_count: tokens.len(),
        ..UnitBag::default()
    };
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    for first in 0..tokens.len() {
        let last = (first + window - 1).min(tokens.len().saturating_sub(1));
        picked.clear();
        picked.push(first);
        combine(tokens, &mut picked, first + 1, last, n, cfg.dedup_same_surface, &mut bag);
    }
    Ok(bag)
}

fn combine(
    tokens: &[String],
    picked: &mut Vec<usize>,
    from: usize,
    last: usize,
    n: usize,
    dedup: bool,
    bag: &mut UnitBag,
) {
    if picked.len() == n {
        let mut surfaces: Vec<&str> = picked.iter().map(|&i| tokens[i].as_str()).collect();
        surfaces.sort_unstable();
        if dedup && surfaces.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        bag.add(surfaces.join(UNIT_JOINER));
        return;
    }
    let remaining = n - picked.len();
    let mut i = from;
    while i <= last && last + 1 - i >= remaining {
        picked.push(i);
        combine(tokens, picked, i + 1, last, n, dedup, bag);
        picked.pop();
        i += 1;
    }
}

pub fn unitize(tokens: &[String], cfg: &UnitConfig) -> Result<UnitBag> {
    match cfg.mode {
        UnitMode::Ngram => Ok(build_ngrams(tokens, cfg.n)),
        UnitMode::Cooccurrence => build_cooccurrences(tokens, cfg),
    }
}
