use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{CountsTable, MetricError, Result, ScoreTable, Scored};
use crate::variables::ValueTuple;

/// One of the eight PMI variants, as three independent switches.
///
/// Applied in a fixed order on top of `log2(p(u,v) / (p(u) p(v)))`:
/// normalization by `-log2 p(u,v)`, then weighting by the in-tuple relative
/// frequency `f(u,v) / f(v)`, then clamping at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PmiFlavor {
    pub normalized: bool,
    pub positive: bool,
    pub weighted: bool,
}

impl PmiFlavor {
    pub fn all() -> impl Iterator<Item = PmiFlavor> {
        (0u8..8).map(|bits| PmiFlavor {
            normalized: bits & 1 != 0,
            positive: bits & 2 != 0,
            weighted: bits & 4 != 0,
        })
    }
}

/// Class relevance is always normalized; these are the two optional switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RelevanceFlags {
    pub positive: bool,
    pub weighted: bool,
}

impl RelevanceFlags {
    pub fn all() -> impl Iterator<Item = RelevanceFlags> {
        (0u8..4).map(|bits| RelevanceFlags {
            positive: bits & 1 != 0,
            weighted: bits & 2 != 0,
        })
    }
}

pub fn pmi(counts: &CountsTable, flavor: PmiFlavor) -> Result<Scored> {
    let total = counts.total();
    if total == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let n = total as f64;
    let entries: Vec<(&ValueTuple, &BTreeMap<String, u64>)> = counts.joint_entries().collect();

    let per_tuple: Vec<(ValueTuple, BTreeMap<String, f64>, usize)> = entries
        .par_iter()
        .map(|&(tuple, units)| {
            let fv = counts.tuple_count(tuple) as f64;
            let mut degenerate = 0;
            let scores = units
                .iter()
                .map(|(unit, &joint)| {
                    let fuv = joint as f64;
                    let fu = counts.unit_count(unit) as f64;
                    let mut score = (fuv * n / (fu * fv)).log2();
                    if flavor.normalized {
                        if joint == total {
                            degenerate += 1;
                            score = 0.0;
                        } else {
                            // clamp only absorbs rounding; the exact value is within [-1, 1]
                            score = (score / -(fuv / n).log2()).clamp(-1.0, 1.0);
                        }
                    }
                    if flavor.weighted {
                        score *= fuv / fv;
                    }
                    if flavor.positive {
                        score = score.max(0.0);
                    }
                    (unit.clone(), score)
                })
                .collect();
            (tuple.clone(), scores, degenerate)
        })
        .collect();

    let mut scored = Scored::default();
    let mut degenerate = 0;
    for (tuple, scores, d) in per_tuple {
        degenerate += d;
        scored.table.0.insert(tuple, scores);
    }
    if degenerate > 0 {
        scored.warnings.push(format!(
            "DegenerateNormalization: {degenerate} pair(s) cover the whole corpus (f(u,v) = N); normalized score set to 0"
        ));
    }
    Ok(scored)
}

/// Normalized class relevance with Laplace smoothing.
///
/// With `C` classes and `p(u|c) = (f(u,c) + 1) / (f(c) + V)`, the share
/// `s(u,c) = p(u|c) / sum_c' p(u|c')` gives `log2(s * C) / log2(C)`, which is
/// 0 for a unit spread evenly over classes and at most 1.
pub fn class_relevance(counts: &CountsTable, flags: RelevanceFlags) -> Result<ScoreTable> {
    if counts.total() == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let classes: Vec<(&ValueTuple, u64)> = counts.classes().collect();
    if classes.len() < 2 {
        return Err(MetricError::SingleClass(classes.len()));
    }
    let vocab = counts.vocab_size() as f64;
    let class_count = classes.len() as f64;
    let norm = class_count.log2();
    let smoothed = |unit: &str, class: &ValueTuple, fc: u64| {
        (counts.joint(class, unit) as f64 + 1.0) / (fc as f64 + vocab)
    };

    let units: Vec<&String> = counts.vocab().map(|(u, _)| u).collect();
    let spread: BTreeMap<&str, f64> = units
        .par_iter()
        .map(|u| {
            let sum: f64 = classes.iter().map(|&(c, fc)| smoothed(u, c, fc)).sum();
            (u.as_str(), sum)
        })
        .collect();

    let per_class: Vec<(ValueTuple, BTreeMap<String, f64>)> = classes
        .par_iter()
        .map(|&(class, fc)| {
            let peak = counts.units_in(class).map(|(_, c)| c).max().unwrap_or(1) as f64;
            let scores = counts
                .units_in(class)
                .map(|(unit, joint)| {
                    let share = smoothed(unit, class, fc) / spread[unit.as_str()];
                    let mut score = (share * class_count).log2() / norm;
                    if flags.weighted {
                        score *= joint as f64 / peak;
                    }
                    if flags.positive {
                        score = score.max(0.0);
                    }
                    (unit.clone(), score)
                })
                .collect();
            (class.clone(), scores)
        })
        .collect();

    Ok(ScoreTable(per_class.into_iter().collect()))
}
