//! Count tables and every metric family computed over them.
//!
//! Association metrics (PMI flavors and class relevance) score each
//! `(tuple, unit)` pair with a positive joint count. Lexical diversity and
//! descriptive statistics produce one value or record per tuple.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::variables::ValueTuple;

mod association;
mod counts;
mod diversity;

pub use association::{class_relevance, pmi, PmiFlavor, RelevanceFlags};
pub use counts::{build_counts, CountsTable, RowObservation};
pub use diversity::{basic_stats, lexical_diversity, DiversityMeasure, StatsRecord, StatsReport};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("corpus has no units (N = 0)")]
    EmptyCorpus,
    #[error("class relevance needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

/// Scores keyed by tuple, then unit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable(pub BTreeMap<ValueTuple, BTreeMap<String, f64>>);

impl ScoreTable {
    pub fn get(&self, tuple: &ValueTuple, unit: &str) -> Option<f64> {
        self.0.get(tuple)?.get(unit).copied()
    }

    pub fn len(&self) -> usize {
        self.0.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ValueTuple, &String, f64)> {
        self.0
            .iter()
            .flat_map(|(t, units)| units.iter().map(move |(u, s)| (t, u, *s)))
    }

    /// Keeps units for which `keep` holds, dropping tuples left empty.
    pub fn retain_units(&mut self, mut keep: impl FnMut(&str) -> bool) {
        for units in self.0.values_mut() {
            units.retain(|u, _| keep(u));
        }
        self.0.retain(|_, units| !units.is_empty());
    }
}

/// A score table plus non-fatal diagnostics raised while computing it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scored {
    pub table: ScoreTable,
    pub warnings: Vec<String>,
}

/// Per tuple, keep the `k` best units ordered by score descending, then
/// unit key ascending.
pub fn top_k(table: &ScoreTable, k: usize) -> ScoreTable {
    assert!(k >= 1, "top-k needs k >= 1");
    let mut out = BTreeMap::new();
    for (tuple, units) in &table.0 {
        let mut ranked: Vec<(&String, f64)> = units.iter().map(|(u, s)| (u, *s)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(k);
        out.insert(
            tuple.clone(),
            ranked.into_iter().map(|(u, s)| (u.clone(), s)).collect(),
        );
    }
    ScoreTable(out)
}

/// Every metric the engine can compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    Pmi,
    PPmi,
    NPmi,
    WPmi,
    NpPmi,
    NwPmi,
    PwPmi,
    NpwPmi,
    Relevance,
    PRelevance,
    WRelevance,
    PwRelevance,
    Ttr,
    RootTtr,
    LogTtr,
    Maas,
    Stats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Pmi(PmiFlavor),
    Relevance(RelevanceFlags),
    Diversity(DiversityMeasure),
    Stats,
}

impl MetricId {
    pub const ALL: [MetricId; 17] = [
        MetricId::Pmi,
        MetricId::PPmi,
        MetricId::NPmi,
        MetricId::WPmi,
        MetricId::NpPmi,
        MetricId::NwPmi,
        MetricId::PwPmi,
        MetricId::NpwPmi,
        MetricId::Relevance,
        MetricId::PRelevance,
        MetricId::WRelevance,
        MetricId::PwRelevance,
        MetricId::Ttr,
        MetricId::RootTtr,
        MetricId::LogTtr,
        MetricId::Maas,
        MetricId::Stats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Pmi => "pmi",
            MetricId::PPmi => "p_pmi",
            MetricId::NPmi => "n_pmi",
            MetricId::WPmi => "w_pmi",
            MetricId::NpPmi => "np_pmi",
            MetricId::NwPmi => "nw_pmi",
            MetricId::PwPmi => "pw_pmi",
            MetricId::NpwPmi => "npw_pmi",
            MetricId::Relevance => "relevance",
            MetricId::PRelevance => "p_relevance",
            MetricId::WRelevance => "w_relevance",
            MetricId::PwRelevance => "pw_relevance",
            MetricId::Ttr => "ttr",
            MetricId::RootTtr => "root_ttr",
            MetricId::LogTtr => "log_ttr",
            MetricId::Maas => "maas",
            MetricId::Stats => "stats",
        }
    }

    pub fn kind(self) -> MetricKind {
        use MetricId::*;
        let pmi = |normalized, positive, weighted| {
            MetricKind::Pmi(PmiFlavor {
                normalized,
                positive,
                weighted,
            })
        };
        let rel = |positive, weighted| MetricKind::Relevance(RelevanceFlags { positive, weighted });
        match self {
            Pmi => pmi(false, false, false),
            PPmi => pmi(false, true, false),
            NPmi => pmi(true, false, false),
            WPmi => pmi(false, false, true),
            NpPmi => pmi(true, true, false),
            NwPmi => pmi(true, false, true),
            PwPmi => pmi(false, true, true),
            NpwPmi => pmi(true, true, true),
            Relevance => rel(false, false),
            PRelevance => rel(true, false),
            WRelevance => rel(false, true),
            PwRelevance => rel(true, true),
            Ttr => MetricKind::Diversity(DiversityMeasure::Ttr),
            RootTtr => MetricKind::Diversity(DiversityMeasure::RootTtr),
            LogTtr => MetricKind::Diversity(DiversityMeasure::LogTtr),
            Maas => MetricKind::Diversity(DiversityMeasure::Maas),
            Stats => MetricKind::Stats,
        }
    }

    pub fn is_association(self) -> bool {
        matches!(self.kind(), MetricKind::Pmi(_) | MetricKind::Relevance(_))
    }

    /// True when every score of this metric is known to be `>= 0`.
    pub fn is_non_negative(self) -> bool {
        match self.kind() {
            MetricKind::Pmi(f) => f.positive,
            MetricKind::Relevance(f) => f.positive,
            MetricKind::Diversity(_) | MetricKind::Stats => true,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(id) = MetricId::ALL.iter().find(|id| id.as_str() == s) {
            return Ok(*id);
        }
        // relevance is always normalized, so the `n` prefix is accepted and dropped
        let alias = match s {
            "ppmi" => MetricId::PPmi,
            "npmi" => MetricId::NPmi,
            "n_relevance" => MetricId::Relevance,
            "np_relevance" => MetricId::PRelevance,
            "nw_relevance" => MetricId::WRelevance,
            "npw_relevance" => MetricId::PwRelevance,
            _ => return Err(MetricError::UnknownMetric(s.to_owned())),
        };
        Ok(alias)
    }
}

impl Serialize for MetricId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
