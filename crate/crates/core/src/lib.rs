//! Corpus analysis engine: reads tabular text data, groups rows by the
//! values of declared variables, and scores how lexical units associate
//! with those groups.

pub mod charts;
pub mod corpus;
pub mod inspector;
pub mod metrics;
pub mod unitizer;
pub mod variables;
