use std::collections::{BTreeMap, HashMap};

use crate::unitizer::UnitBag;
use crate::variables::ValueTuple;

/// Everything one logical row contributes to a [`CountsTable`].
#[derive(Clone, Copy, Debug)]
pub struct RowObservation<'a> {
    pub tuple: &'a ValueTuple,
    pub text: &'a str,
    /// Preprocessed unigram tokens, used for lexical diversity.
    pub tokens: &'a [String],
    pub bag: &'a UnitBag,
}

/// Joint and marginal frequencies of `(unit, tuple)` pairs plus the per-tuple
/// document bookkeeping needed by the descriptive statistics.
///
/// Tables built from disjoint row sets merge associatively and commutatively;
/// every count is an integer, so merge order never changes a result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountsTable {
    joint: BTreeMap<ValueTuple, BTreeMap<String, u64>>,
    unit_marginal: BTreeMap<String, u64>,
    tuple_marginal: BTreeMap<ValueTuple, u64>,
    total: u64,
    texts_per_tuple: BTreeMap<ValueTuple, u64>,
    tokens_per_tuple: BTreeMap<ValueTuple, u64>,
    token_freqs: BTreeMap<ValueTuple, BTreeMap<String, u64>>,
    text_occurrences: BTreeMap<ValueTuple, HashMap<String, u64>>,
}

pub fn build_counts<'a>(rows: impl IntoIterator<Item = RowObservation<'a>>) -> CountsTable {
    let mut table = CountsTable::default();
    for row in rows {
        table.observe(row);
    }
    table
}

fn add<K: Ord + Clone>(map: &mut BTreeMap<K, u64>, key: &K, by: u64) {
    if let Some(v) = map.get_mut(key) {
        *v += by;
    } else {
        map.insert(key.clone(), by);
    }
}

impl CountsTable {
    pub fn observe(&mut self, row: RowObservation<'_>) {
        let tuple = row.tuple;
        add(&mut self.texts_per_tuple, tuple, 1);
        add(&mut self.tokens_per_tuple, tuple, row.tokens.len() as u64);
        *self
            .text_occurrences
            .entry(tuple.clone())
            .or_default()
            .entry(row.text.to_owned())
            .or_insert(0) += 1;

        let freqs = self.token_freqs.entry(tuple.clone()).or_default();
        for token in row.tokens {
            add(freqs, token, 1);
        }

        let units = row.bag.len();
        if units == 0 {
            return;
        }
        let joint = self.joint.entry(tuple.clone()).or_default();
        for (unit, &count) in &row.bag.units {
            add(joint, unit, count);
            add(&mut self.unit_marginal, unit, count);
        }
        add(&mut self.tuple_marginal, tuple, units);
        self.total += units;
    }

    pub fn merge(&mut self, other: CountsTable) {
        fn merge_nested(
            into: &mut BTreeMap<ValueTuple, BTreeMap<String, u64>>,
            from: BTreeMap<ValueTuple, BTreeMap<String, u64>>,
        ) {
            for (tuple, units) in from {
                let target = into.entry(tuple).or_default();
                for (unit, c) in units {
                    *target.entry(unit).or_insert(0) += c;
                }
            }
        }
        fn merge_flat<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
            for (k, c) in from {
                *into.entry(k).or_insert(0) += c;
            }
        }

        merge_nested(&mut self.joint, other.joint);
        merge_nested(&mut self.token_freqs, other.token_freqs);
        merge_flat(&mut self.unit_marginal, other.unit_marginal);
        merge_flat(&mut self.tuple_marginal, other.tuple_marginal);
        merge_flat(&mut self.texts_per_tuple, other.texts_per_tuple);
        merge_flat(&mut self.tokens_per_tuple, other.tokens_per_tuple);
        for (tuple, texts) in other.text_occurrences {
            let target = self.text_occurrences.entry(tuple).or_default();
            for (text, c) in texts {
                *target.entry(text).or_insert(0) += c;
            }
        }
        self.total += other.total;
    }

    /// N: total number of units.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn joint(&self, tuple: &ValueTuple, unit: &str) -> u64 {
        self.joint
            .get(tuple)
            .and_then(|u| u.get(unit))
            .copied()
            .unwrap_or(0)
    }

    pub fn unit_count(&self, unit: &str) -> u64 {
        self.unit_marginal.get(unit).copied().unwrap_or(0)
    }

    pub fn tuple_count(&self, tuple: &ValueTuple) -> u64 {
        self.tuple_marginal.get(tuple).copied().unwrap_or(0)
    }

    /// Units observed with the tuple, with their joint counts.
    pub fn units_in(&self, tuple: &ValueTuple) -> impl Iterator<Item = (&String, u64)> {
        self.joint
            .get(tuple)
            .into_iter()
            .flat_map(|u| u.iter().map(|(k, c)| (k, *c)))
    }

    pub fn joint_entries(&self) -> impl Iterator<Item = (&ValueTuple, &BTreeMap<String, u64>)> {
        self.joint.iter()
    }

    /// Tuples with at least one unit, i.e. the classes of association metrics.
    pub fn classes(&self) -> impl Iterator<Item = (&ValueTuple, u64)> {
        self.tuple_marginal.iter().map(|(t, c)| (t, *c))
    }

    /// Every tuple with at least one text, in key order.
    pub fn tuples(&self) -> impl Iterator<Item = &ValueTuple> {
        self.texts_per_tuple.keys()
    }

    pub fn vocab(&self) -> impl Iterator<Item = (&String, u64)> {
        self.unit_marginal.iter().map(|(u, c)| (u, *c))
    }

    /// V: number of distinct units.
    pub fn vocab_size(&self) -> usize {
        self.unit_marginal.len()
    }

    pub fn texts(&self, tuple: &ValueTuple) -> u64 {
        self.texts_per_tuple.get(tuple).copied().unwrap_or(0)
    }

    pub fn tokens(&self, tuple: &ValueTuple) -> u64 {
        self.tokens_per_tuple.get(tuple).copied().unwrap_or(0)
    }

    /// Rows whose exact text already occurred earlier under the same tuple.
    pub fn duplicates(&self, tuple: &ValueTuple) -> u64 {
        self.text_occurrences
            .get(tuple)
            .map(|texts| texts.values().map(|c| c - 1).sum())
            .unwrap_or(0)
    }

    /// Rows whose exact text occurred earlier anywhere in the corpus.
    pub fn global_duplicates(&self) -> u64 {
        let mut all: HashMap<&str, u64> = HashMap::new();
        for texts in self.text_occurrences.values() {
            for (text, c) in texts {
                *all.entry(text).or_insert(0) += c;
            }
        }
        all.values().map(|c| c - 1).sum()
    }

    pub fn token_freqs(&self, tuple: &ValueTuple) -> Option<&BTreeMap<String, u64>> {
        self.token_freqs.get(tuple)
    }

    pub fn all_token_freqs(&self) -> impl Iterator<Item = (&ValueTuple, &BTreeMap<String, u64>)> {
        self.token_freqs.iter()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::unitizer::build_ngrams;
    use proptest::prelude::*;

    pub(crate) struct Row {
        pub tuple: ValueTuple,
        pub text: String,
        pub tokens: Vec<String>,
        pub bag: UnitBag,
    }

    pub(crate) fn row(text: &str, tuple: &str) -> Row {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        Row {
            tuple: ValueTuple::new([tuple]),
            text: text.to_owned(),
            bag: build_ngrams(&tokens, 1),
            tokens,
        }
    }

    pub(crate) fn counts(rows: &[Row]) -> CountsTable {
        build_counts(rows.iter().map(|r| RowObservation {
            tuple: &r.tuple,
            text: &r.text,
            tokens: &r.tokens,
            bag: &r.bag,
        }))
    }

    fn check_marginals(t: &CountsTable) {
        let mut unit_sum = 0;
        for (tuple, fv) in t.classes() {
            let s: u64 = t.units_in(tuple).map(|(_, c)| c).sum();
            assert_eq!(s, fv);
        }
        let tuple_sum: u64 = t.classes().map(|(_, c)| c).sum();
        for (u, fu) in t.vocab() {
            unit_sum += fu;
            for (tuple, _) in t.classes() {
                let j = t.joint(tuple, u);
                assert!(j <= fu.min(t.tuple_count(tuple)));
            }
        }
        assert_eq!(tuple_sum, t.total());
        assert_eq!(unit_sum, t.total());
    }

    #[test]
    fn toy_counts() {
        let t = counts(&[row("a b a", "A"), row("b c", "B")]);
        let (a, b) = (ValueTuple::new(["A"]), ValueTuple::new(["B"]));
        assert_eq!(t.total(), 5);
        assert_eq!(t.unit_count("a"), 2);
        assert_eq!(t.unit_count("b"), 2);
        assert_eq!(t.unit_count("c"), 1);
        assert_eq!(t.tuple_count(&a), 3);
        assert_eq!(t.tuple_count(&b), 2);
        assert_eq!(t.joint(&a, "a"), 2);
        assert_eq!(t.vocab_size(), 3);
        check_marginals(&t);
    }

    #[test]
    fn duplicate_texts() {
        let t = counts(&[row("x y", "A"), row("x y", "A"), row("x y", "B")]);
        assert_eq!(t.duplicates(&ValueTuple::new(["A"])), 1);
        assert_eq!(t.duplicates(&ValueTuple::new(["B"])), 0);
        assert_eq!(t.global_duplicates(), 2);
    }

    #[test]
    fn empty_table() {
        let t = counts(&[]);
        assert_eq!(t.total(), 0);
        assert_eq!(t.vocab_size(), 0);
        assert_eq!(t.classes().count(), 0);
    }

    #[test]
    fn text_without_units_still_counts_as_text() {
        let t = counts(&[row("", "A"), row("a", "B")]);
        assert_eq!(t.texts(&ValueTuple::new(["A"])), 1);
        assert_eq!(t.tuple_count(&ValueTuple::new(["A"])), 0);
        assert_eq!(t.classes().count(), 1);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(String, String)>> {
        prop::collection::vec(("[a-e]( [a-e]){0,6}", "[A-C]"), 0..25)
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(rows in arb_rows(), cut1 in 0usize..25, cut2 in 0usize..25) {
            let rows: Vec<Row> = rows.iter().map(|(t, c)| row(t, c)).collect();
            let whole = counts(&rows);
            let (c1, c2) = (cut1.min(rows.len()), cut2.min(rows.len()));
            let (lo, hi) = (c1.min(c2), c1.max(c2));
            let parts = [counts(&rows[..lo]), counts(&rows[lo..hi]), counts(&rows[hi..])];

            let mut forward = parts[0].clone();
            forward.merge(parts[1].clone());
            forward.merge(parts[2].clone());

            let mut backward = parts[2].clone();
            let mut tail = parts[1].clone();
            tail.merge(parts[0].clone());
            backward.merge(tail);

            check_marginals(&forward);
            prop_assert_eq!(&forward, &whole);
            prop_assert_eq!(&backward, &whole);
        }
    }
}
