//! Unit filtering with a regular-expression subset that behaves the same in
//! this crate and in a browser `RegExp`: literals, bracket classes with
//! ranges, `.`, `^`/`$`, groups, alternation and quantifiers.

use regex::Regex;
use regex_syntax::ast::{
    self, Ast, ClassSet, ClassSetItem, GroupKind, HexLiteralKind, LiteralKind, SpecialLiteralKind,
};

use super::ChartError;
use crate::metrics::ScoreTable;

/// A compiled unit pattern, matched anywhere in the unit key.
#[derive(Clone, Debug)]
pub struct UnitPattern {
    regex: Regex,
}

impl UnitPattern {
    pub fn new(pattern: &str) -> Result<Self, ChartError> {
        let invalid = |reason: String| ChartError::InvalidPattern {
            pattern: pattern.to_owned(),
            reason,
        };
        let parsed = ast::parse::Parser::new()
            .parse(pattern)
            .map_err(|e| invalid(e.kind().to_string()))?;
        check_portable(&parsed).map_err(|r| invalid(r.to_owned()))?;
        let regex = Regex::new(pattern).map_err(|e| invalid(e.to_string()))?;
        Ok(UnitPattern { regex })
    }

    pub fn as_str(&self) -> &str {
        self.regex.as_str()
    }

    pub fn is_match(&self, unit: &str) -> bool {
        self.regex.is_match(unit)
    }
}

pub fn filter_units(table: &ScoreTable, pattern: &str) -> Result<ScoreTable, ChartError> {
    let pattern = UnitPattern::new(pattern)?;
    let mut out = table.clone();
    out.retain_units(|u| pattern.is_match(u));
    Ok(out)
}

fn check_portable(node: &Ast) -> Result<(), &'static str> {
    match node {
        Ast::Empty(_) | Ast::Dot(_) => Ok(()),
        Ast::Literal(lit) => check_literal(lit),
        Ast::Assertion(a) => match a.kind {
            ast::AssertionKind::StartLine | ast::AssertionKind::EndLine => Ok(()),
            _ => Err("only the ^ and $ anchors are supported"),
        },
        Ast::Flags(_) => Err("inline flags are not supported"),
        Ast::ClassUnicode(_) => Err("Unicode classes (\\p, \\P) are not supported"),
        Ast::ClassPerl(_) => Err("\\d, \\w and \\s are not supported; use a bracket class such as [0-9]"),
        Ast::ClassBracketed(c) => check_class(&c.kind),
        Ast::Repetition(r) => check_portable(&r.ast),
        Ast::Group(g) => match &g.kind {
            GroupKind::CaptureIndex(_) => check_portable(&g.ast),
            GroupKind::NonCapturing(flags) if flags.items.is_empty() => check_portable(&g.ast),
            GroupKind::NonCapturing(_) => Err("inline flags are not supported"),
            GroupKind::CaptureName { .. } => Err("named groups are not supported"),
        },
        Ast::Alternation(a) => a.asts.iter().try_for_each(check_portable),
        Ast::Concat(c) => c.asts.iter().try_for_each(check_portable),
    }
}

fn check_literal(lit: &ast::Literal) -> Result<(), &'static str> {
    match &lit.kind {
        LiteralKind::Verbatim | LiteralKind::Meta => Ok(()),
        LiteralKind::HexFixed(HexLiteralKind::X | HexLiteralKind::UnicodeShort) => Ok(()),
        LiteralKind::Special(
            SpecialLiteralKind::Tab
            | SpecialLiteralKind::LineFeed
            | SpecialLiteralKind::CarriageReturn
            | SpecialLiteralKind::FormFeed
            | SpecialLiteralKind::VerticalTab,
        ) => Ok(()),
        _ => Err("unsupported escape sequence"),
    }
}

fn check_class(set: &ClassSet) -> Result<(), &'static str> {
    match set {
        ClassSet::BinaryOp(_) => Err("class set operations (&&, --, ~~) are not supported"),
        ClassSet::Item(item) => check_class_item(item),
    }
}

fn check_class_item(item: &ClassSetItem) -> Result<(), &'static str> {
    match item {
        ClassSetItem::Empty(_) | ClassSetItem::Range(_) => Ok(()),
        ClassSetItem::Literal(lit) => check_literal(lit),
        ClassSetItem::Union(u) => u.items.iter().try_for_each(check_class_item),
        ClassSetItem::Ascii(_) => Err("POSIX classes such as [[:alpha:]] are not supported"),
        ClassSetItem::Unicode(_) => Err("Unicode classes (\\p, \\P) are not supported"),
        ClassSetItem::Perl(_) => Err("\\d, \\w and \\s are not supported; use a bracket class such as [0-9]"),
        ClassSetItem::Bracketed(_) => Err("nested bracket classes are not supported"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variables::ValueTuple;
    use proptest::prelude::*;

    fn table(units: &[&str]) -> ScoreTable {
        let mut t = ScoreTable::default();
        let entry = t.0.entry(ValueTuple::new(["Lombardia"])).or_default();
        for (i, u) in units.iter().enumerate() {
            entry.insert(u.to_string(), i as f64);
        }
        t
    }

    fn units(t: &ScoreTable) -> Vec<String> {
        t.iter().map(|(_, u, _)| u.clone()).collect()
    }

    const UNITS: [&str; 5] = ["ghe", "ghs", "laghi", "xe", "gh"];

    #[test]
    fn anchored_literal() {
        let out = filter_units(&table(&UNITS), "^ghe$").unwrap();
        assert_eq!(units(&out), ["ghe"]);
    }

    #[test]
    fn unanchored_search() {
        let out = filter_units(&table(&["ghe", "ghs", "laghi", "xe"]), "gh").unwrap();
        let oracle: Vec<&str> = ["ghe", "ghs", "laghi", "xe"]
            .into_iter()
            .filter(|u| u.contains("gh"))
            .collect();
        assert_eq!(units(&out), oracle);
    }

    #[test]
    fn invalid_patterns() {
        for p in ["[", "(?i)ghe", "\\d+", "\\p{L}", "(?P<x>a)", "\\Aghe", "[[:alpha:]]", "a\\b", "[a&&b]"] {
            assert!(
                matches!(filter_units(&table(&UNITS), p), Err(ChartError::InvalidPattern { .. })),
                "{p} should be rejected"
            );
        }
    }

    #[test]
    fn portable_features_accepted() {
        for p in ["^g(h|x)[a-z]?$", "a{1,3}", "(?:la)+", "x\\.y", "[^a-c]", "\\x41\\u00e8", "e|s$"] {
            assert!(UnitPattern::new(p).is_ok(), "{p} should be accepted");
        }
    }

    #[test]
    fn filtering_everything_leaves_an_empty_table() {
        let out = filter_units(&table(&UNITS), "^zzz").unwrap();
        assert!(out.is_empty());
    }

    /// Expected matches were recorded with a browser-compatible `RegExp`.
    #[test]
    fn browser_parity_fixture() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/filter_parity.json");
        let fixture: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let all: Vec<&str> = fixture["units"]
            .as_array()
            .unwrap()
            .iter()
            .map(|u| u.as_str().unwrap())
            .collect();
        for case in fixture["cases"].as_array().unwrap() {
            let pattern = UnitPattern::new(case["pattern"].as_str().unwrap()).unwrap();
            let got: Vec<&str> = all.iter().copied().filter(|u| pattern.is_match(u)).collect();
            let want: Vec<&str> = case["matches"]
                .as_array()
                .unwrap()
                .iter()
                .map(|u| u.as_str().unwrap())
                .collect();
            assert_eq!(got, want, "pattern {}", pattern.as_str());
        }
    }

    proptest! {
        #[test]
        fn idempotent(pattern in "[a-z^$.|]{0,4}", us in prop::collection::vec("[a-z]{1,5}", 0..20)) {
            let refs: Vec<&str> = us.iter().map(String::as_str).collect();
            let t = table(&refs);
            if let Ok(once) = filter_units(&t, &pattern) {
                let twice = filter_units(&once, &pattern).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
