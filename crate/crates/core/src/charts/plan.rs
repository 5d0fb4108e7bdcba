use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::ChartError;
use crate::metrics::MetricId;
use crate::variables::{Axis, Semantics, VarType, VariableDecl};

/// Variables plus score plus unit may not exceed this many dimensions.
pub const MAX_DIMENSIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    Line,
    Heatmap,
    Scatter,
    GeoScatter,
    BinnedMap,
    Choropleth,
}

impl ChartType {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::Line => "line",
            ChartType::Heatmap => "heatmap",
            ChartType::Scatter => "scatter",
            ChartType::GeoScatter => "geo_scatter",
            ChartType::BinnedMap => "binned_map",
            ChartType::Choropleth => "choropleth",
        }
    }

    pub fn is_map(self) -> bool {
        matches!(self, ChartType::GeoScatter | ChartType::BinnedMap | ChartType::Choropleth)
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a datum ends up. `Region` is the geoshape of a choropleth,
/// `Dropdown` a selector over the values of one variable and `UnitFilter`
/// the unit widget; the last two filter rather than encode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Color,
    Size,
    Lat,
    Lon,
    Region,
    Dropdown,
    UnitFilter,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Variable(String),
    Score,
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitWidget {
    Dropdown,
    RegexSearch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChartPlan {
    pub chart_type: ChartType,
    pub metric: MetricId,
    pub assignments: BTreeMap<Channel, Field>,
    pub unit_widget: UnitWidget,
}

impl ChartPlan {
    fn build(chart_type: ChartType, metric: MetricId, pairs: &[(Channel, Field)]) -> Self {
        let mut assignments: BTreeMap<Channel, Field> = pairs.iter().cloned().collect();
        assignments.insert(Channel::UnitFilter, Field::Unit);
        let mut plan = ChartPlan {
            chart_type,
            metric,
            assignments,
            unit_widget: UnitWidget::RegexSearch,
        };
        if plan.dimensions() > 3 {
            plan.unit_widget = UnitWidget::Dropdown;
        }
        plan
    }

    /// Distinct data fields shown or filtered: variables, score and unit.
    pub fn dimensions(&self) -> usize {
        self.assignments.values().collect::<BTreeSet<_>>().len()
    }

    pub fn field(&self, channel: Channel) -> Option<&Field> {
        self.assignments.get(&channel)
    }

    pub fn variable(&self, channel: Channel) -> Option<&str> {
        match self.assignments.get(&channel)? {
            Field::Variable(name) => Some(name),
            _ => None,
        }
    }

    pub fn file_stem(&self) -> String {
        format!("{}__{}", self.metric, self.chart_type)
    }
}

fn var(d: &VariableDecl) -> Field {
    Field::Variable(d.name.clone())
}

/// Nominal, ordinal, or quantitative reduced to bins.
fn categorical(d: &VariableDecl) -> bool {
    match d.vtype {
        VarType::Nominal | VarType::Ordinal => true,
        VarType::Quantitative => d.is_binned(),
        VarType::Coordinate => false,
    }
}

fn temporal(d: &VariableDecl) -> bool {
    d.semantics == Semantics::Temporal
}

pub fn signature(decls: &[VariableDecl]) -> String {
    if decls.is_empty() {
        return "(no variables)".to_owned();
    }
    decls
        .iter()
        .map(|d| {
            let binned = if d.is_binned() { "[binned]" } else { "" };
            format!("{}/{}{binned}", d.vtype, d.semantics)
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

enum Slot<'a> {
    Single(&'a VariableDecl),
    Pair {
        lat: &'a VariableDecl,
        lon: &'a VariableDecl,
        binned: bool,
    },
}

/// Chart plans for one metric over the given variables, in emission order.
///
/// A latitude/longitude pair of coordinate variables fills a single
/// planning slot. `geometry` says whether region shapes are available for
/// choropleths.
pub fn plan_charts(
    metric: MetricId,
    decls: &[VariableDecl],
    geometry: bool,
) -> Result<Vec<ChartPlan>, ChartError> {
    let unsupported = |remediation: &str| ChartError::UnsupportedCombination {
        signature: signature(decls),
        remediation: remediation.to_owned(),
    };
    for d in decls {
        d.validate().map_err(|e| unsupported(&e.to_string()))?;
    }
    if decls.len() + 2 > MAX_DIMENSIONS {
        return Err(unsupported(
            "more than three variables exceed the five-dimension budget; inspect a subset of the variables",
        ));
    }

    let coords: Vec<&VariableDecl> = decls.iter().filter(|d| d.vtype == VarType::Coordinate).collect();
    let mut slots: Vec<Slot> = decls
        .iter()
        .filter(|d| d.vtype != VarType::Coordinate)
        .map(Slot::Single)
        .collect();
    match coords.as_slice() {
        [] => {}
        [a, b] => {
            let (lat, lon) = match (a.coordinate_axis(), b.coordinate_axis()) {
                (Some(Axis::Latitude), Some(Axis::Longitude)) => (*a, *b),
                (Some(Axis::Longitude), Some(Axis::Latitude)) => (*b, *a),
                _ => {
                    return Err(unsupported(
                        "coordinate variables must form one latitude/longitude pair; add :axis=latitude or :axis=longitude",
                    ))
                }
            };
            if lat.is_binned() != lon.is_binned() {
                return Err(unsupported("bin both coordinates or neither"));
            }
            slots.insert(
                0,
                Slot::Pair {
                    lat,
                    lon,
                    binned: lat.is_binned(),
                },
            );
        }
        _ => {
            return Err(unsupported(
                "coordinates are charted as one latitude/longitude pair; declare exactly two coordinate variables",
            ))
        }
    }

    use Channel::*;
    let plan = |t, pairs: &[(Channel, Field)]| ChartPlan::build(t, metric, pairs);
    let map_type = |binned| if binned { ChartType::BinnedMap } else { ChartType::GeoScatter };

    let plans = match slots.as_slice() {
        [] => vec![plan(ChartType::Bar, &[(X, Field::Unit), (Y, Field::Score)])],

        [Slot::Single(d)] => {
            let on_x = [(X, var(d)), (Y, Field::Score), (Color, Field::Unit)];
            if temporal(d) {
                vec![plan(ChartType::Line, &on_x)]
            } else if categorical(d) {
                let mut plans = vec![plan(ChartType::Bar, &on_x)];
                if d.vtype == VarType::Nominal && d.semantics == Semantics::Spatial && geometry {
                    plans.push(plan(ChartType::Choropleth, &[(Region, var(d)), (Color, Field::Score)]));
                }
                plans
            } else {
                vec![plan(ChartType::Scatter, &on_x)]
            }
        }

        [Slot::Pair { lat, lon, binned }] => vec![plan(
            map_type(*binned),
            &[(Lat, var(lat)), (Lon, var(lon)), (Color, Field::Score)],
        )],

        [Slot::Pair { lat, lon, binned }, Slot::Single(d)] => {
            let base = [(Lat, var(lat)), (Lon, var(lon)), (Color, Field::Score)];
            if categorical(d) {
                let mut pairs = base.to_vec();
                pairs.push((Dropdown, var(d)));
                vec![plan(map_type(*binned), &pairs)]
            } else if !binned {
                let mut pairs = base.to_vec();
                pairs.push((Size, var(d)));
                vec![plan(ChartType::GeoScatter, &pairs)]
            } else {
                return Err(unsupported(
                    "a binned map cannot size its cells by a quantitative variable; bin the variable with :bins=K",
                ));
            }
        }

        [Slot::Single(a), Slot::Single(b)] => {
            let plan = match (categorical(a), categorical(b)) {
                (true, true) => match (temporal(a), temporal(b)) {
                    (true, false) => plan(ChartType::Line, &[(X, var(a)), (Y, Field::Score), (Color, var(b))]),
                    (false, true) => plan(ChartType::Line, &[(X, var(b)), (Y, Field::Score), (Color, var(a))]),
                    _ => plan(ChartType::Heatmap, &[(X, var(a)), (Y, var(b)), (Color, Field::Score)]),
                },
                (false, true) | (true, false) => {
                    let (q, c) = if categorical(a) { (b, a) } else { (a, b) };
                    let t = if temporal(q) { ChartType::Line } else { ChartType::Scatter };
                    plan(t, &[(X, var(q)), (Y, Field::Score), (Color, var(c))])
                }
                (false, false) => plan(ChartType::Scatter, &[(X, var(a)), (Y, var(b)), (Color, Field::Score)]),
            };
            vec![plan]
        }

        [Slot::Single(_), Slot::Single(_), Slot::Single(_)] => {
            let singles: Vec<&VariableDecl> = decls.iter().collect();
            let cats: Vec<&VariableDecl> = singles.iter().copied().filter(|d| categorical(d)).collect();
            if cats.len() < 2 {
                return Err(unsupported(
                    "three variables are charted as a heatmap of two categorical variables; bin quantitative variables with :bins=K",
                ));
            }
            let (x, y) = (cats[0], cats[1]);
            let rest = singles
                .iter()
                .find(|d| d.name != x.name && d.name != y.name)
                .expect("three distinct variables");
            vec![plan(
                ChartType::Heatmap,
                &[(X, var(x)), (Y, var(y)), (Color, Field::Score), (Dropdown, var(rest))],
            )]
        }

        _ => {
            return Err(unsupported(
                "a coordinate pair with two more variables exceeds the five-dimension budget; drop a variable",
            ))
        }
    };
    debug_assert!(plans.iter().all(|p| p.dimensions() <= MAX_DIMENSIONS));
    Ok(plans)
}
