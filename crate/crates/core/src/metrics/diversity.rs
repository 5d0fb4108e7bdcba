use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CountsTable;
use crate::variables::ValueTuple;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiversityMeasure {
    /// V / N
    Ttr,
    /// V / sqrt(N)
    RootTtr,
    /// ln V / ln N
    LogTtr,
    /// (log10 N - log10 V) / (log10 N)^2
    Maas,
}

impl DiversityMeasure {
    /// `None` where the measure is undefined for the given counts.
    pub fn score(self, types: u64, tokens: u64) -> Option<f64> {
        if tokens == 0 {
            return None;
        }
        let (v, n) = (types as f64, tokens as f64);
        match self {
            DiversityMeasure::Ttr => Some(v / n),
            DiversityMeasure::RootTtr => Some(v / n.sqrt()),
            DiversityMeasure::LogTtr if tokens > 1 => Some(v.ln() / n.ln()),
            DiversityMeasure::Maas if tokens > 1 => {
                let log_n = n.log10();
                Some((log_n - v.log10()) / (log_n * log_n))
            }
            _ => None,
        }
    }
}

/// Per-tuple diversity over preprocessed unigram tokens, whatever the unit
/// configuration was.
pub fn lexical_diversity(
    counts: &CountsTable,
    measure: DiversityMeasure,
) -> BTreeMap<ValueTuple, Option<f64>> {
    counts
        .tuples()
        .map(|tuple| {
            let (types, tokens) = counts
                .token_freqs(tuple)
                .map(|f| (f.len() as u64, f.values().sum()))
                .unwrap_or((0, 0));
            (tuple.clone(), measure.score(types, tokens))
        })
        .collect()
}

/// Descriptive statistics for one tuple or for the whole corpus.
///
/// `avg_text_length` counts preprocessed tokens per text and is rounded to
/// two decimals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub num_texts: u64,
    pub num_units: u64,
    pub num_duplicates: u64,
    pub avg_text_length: f64,
    pub vocab_size: u64,
}

impl StatsRecord {
    fn new(num_texts: u64, num_units: u64, num_duplicates: u64, tokens: u64, vocab_size: u64) -> Self {
        let avg = if num_texts == 0 {
            0.0
        } else {
            (tokens as f64 / num_texts as f64 * 100.0).round() / 100.0
        };
        StatsRecord {
            num_texts,
            num_units,
            num_duplicates,
            avg_text_length: avg,
            vocab_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub per_tuple: BTreeMap<ValueTuple, StatsRecord>,
    pub global: StatsRecord,
}

pub fn basic_stats(counts: &CountsTable) -> StatsReport {
    let mut total_texts = 0;
    let mut total_tokens = 0;
    let per_tuple = counts
        .tuples()
        .map(|tuple| {
            let texts = counts.texts(tuple);
            let tokens = counts.tokens(tuple);
            total_texts += texts;
            total_tokens += tokens;
            let record = StatsRecord::new(
                texts,
                counts.tuple_count(tuple),
                counts.duplicates(tuple),
                tokens,
                counts.units_in(tuple).count() as u64,
            );
            (tuple.clone(), record)
        })
        .collect();
    let global = StatsRecord::new(
        total_texts,
        counts.total(),
        counts.global_duplicates(),
        total_tokens,
        counts.vocab_size() as u64,
    );
    StatsReport { per_tuple, global }
}
