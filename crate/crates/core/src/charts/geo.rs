use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::ChartError;

pub const DEFAULT_PROPERTY: &str = "name";

/// Region shapes from a GeoJSON FeatureCollection, keyed by one string
/// property. Matching against variable values ignores case.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    property: String,
    features: Vec<Value>,
    by_key: BTreeMap<String, String>,
}

impl Geometry {
    pub fn load(path: &Path, property: &str) -> Result<Self, ChartError> {
        let bad = |reason: String| ChartError::Geometry {
            path: path.to_owned(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        Geometry::from_value(&value, property).map_err(bad)
    }

    /// Keeps each feature's geometry and the key property only.
    pub fn from_value(value: &Value, property: &str) -> Result<Self, String> {
        if value["type"] != "FeatureCollection" {
            return Err("expected a GeoJSON FeatureCollection".into());
        }
        let raw = value["features"]
            .as_array()
            .ok_or("FeatureCollection has no `features` array")?;
        let mut features = Vec::with_capacity(raw.len());
        let mut by_key = BTreeMap::new();
        for (i, f) in raw.iter().enumerate() {
            let key = f["properties"][property]
                .as_str()
                .ok_or_else(|| format!("feature {i} has no string property `{property}`"))?;
            if f["geometry"].is_null() {
                return Err(format!("feature {i} has no geometry"));
            }
            by_key.entry(key.to_lowercase()).or_insert_with(|| key.to_owned());
            features.push(json!({
                "type": "Feature",
                "properties": { property: key },
                "geometry": f["geometry"],
            }));
        }
        Ok(Geometry {
            property: property.to_owned(),
            features,
            by_key,
        })
    }

    pub fn property(&self) -> &str {
        &self.property
    }

    pub fn features(&self) -> &[Value] {
        &self.features
    }

    /// The feature key matching `value`, compared case-insensitively.
    pub fn lookup(&self, value: &str) -> Option<&str> {
        self.by_key.get(&value.to_lowercase()).map(String::as_str)
    }
}
