use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Map, Value};

use super::filter::UnitPattern;
use super::geo::{Geometry, DEFAULT_PROPERTY};
use super::plan::{plan_charts, ChartPlan, ChartType, Channel, Field, UnitWidget};
use super::ChartError;
use crate::inspector::{MetricResult, ResultsDocument};
use crate::metrics::{top_k, MetricId, ScoreTable};
use crate::variables::{parse_bin_label, parse_number, VarType, VariableInventory, MISSING_VALUE};

pub const VEGA_LITE_SCHEMA: &str = "https://vega.github.io/schema/vega-lite/v5.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputFormat {
    Html,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Html => "html",
            OutputFormat::Json => "json",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "html" => Ok(OutputFormat::Html),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}` (expected html or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisualizerArgs {
    pub output_dir: PathBuf,
    pub formats: BTreeSet<OutputFormat>,
    pub top_k: Option<usize>,
    pub unit_filter_list: Option<Vec<String>>,
    /// Keeps units matching this pattern anywhere; see [`UnitPattern`].
    pub unit_pattern: Option<String>,
    /// Region shapes for choropleths.
    pub geometry: Option<PathBuf>,
    /// Feature property matched against variable values.
    pub geometry_property: String,
    /// Shapes drawn behind spatial scatter plots and binned maps.
    pub background: Option<PathBuf>,
}

impl VisualizerArgs {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        VisualizerArgs {
            output_dir: output_dir.into(),
            formats: [OutputFormat::Html, OutputFormat::Json].into(),
            top_k: None,
            unit_filter_list: None,
            unit_pattern: None,
            geometry: None,
            geometry_property: DEFAULT_PROPERTY.to_owned(),
            background: None,
        }
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.top_k.is_some() && self.unit_filter_list.is_some() {
            return Err(ChartError::InvalidArgs(
                "top-k and a unit filter list are mutually exclusive".into(),
            ));
        }
        if self.top_k == Some(0) {
            return Err(ChartError::InvalidArgs("top-k must be at least 1".into()));
        }
        if self.formats.is_empty() {
            return Err(ChartError::InvalidArgs("at least one output format is required".into()));
        }
        if let Some(p) = &self.unit_pattern {
            UnitPattern::new(p)?;
        }
        Ok(())
    }
}

/// Geometry files referenced by [`VisualizerArgs`], loaded once per run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Shapes {
    pub regions: Option<Geometry>,
    pub background: Option<Geometry>,
}

impl Shapes {
    pub fn load(args: &VisualizerArgs) -> Result<Self, ChartError> {
        let load = |p: &Option<PathBuf>| {
            p.as_deref()
                .map(|p| Geometry::load(p, &args.geometry_property))
                .transpose()
        };
        Ok(Shapes {
            regions: load(&args.geometry)?,
            background: load(&args.background)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedChart {
    pub plan: ChartPlan,
    pub spec: Value,
    pub warnings: Vec<String>,
}

impl RenderedChart {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.spec).expect("chart specs serialize");
        s.push('\n');
        s
    }

    /// Single page embedding the spec and loading the renderer from a CDN.
    pub fn to_html(&self) -> String {
        let spec = serde_json::to_string(&self.spec)
            .expect("chart specs serialize")
            .replace("</", "<\\/");
        format!(
            r##"<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<script src="https://cdn.jsdelivr.net/npm/vega@5"></script>
<script src="https://cdn.jsdelivr.net/npm/vega-lite@5"></script>
<script src="https://cdn.jsdelivr.net/npm/vega-embed@6"></script>
</head>
<body>
<div id="chart"></div>
<script type="application/json" id="spec">{spec}</script>
<script>vegaEmbed("#chart", JSON.parse(document.getElementById("spec").textContent));</script>
</body>
</html>
"##,
            title = self.plan.file_stem()
        )
    }
}

/// Scores of one metric as a tuple → unit → score table. Diversity scores
/// use the metric id as their single unit (undefined values are dropped);
/// stats records use one unit per field.
pub fn metric_table(doc: &ResultsDocument, metric: MetricId) -> Result<ScoreTable, ChartError> {
    let result = doc.metrics.get(&metric).ok_or(ChartError::MissingMetric(metric))?;
    Ok(match result {
        MetricResult::Association(t) => t.clone(),
        MetricResult::Diversity(m) => ScoreTable(
            m.iter()
                .filter_map(|(t, s)| Some((t.clone(), [(metric.to_string(), (*s)?)].into())))
                .collect(),
        ),
        MetricResult::Stats(m) => ScoreTable(
            m.iter()
                .map(|(t, r)| {
                    let fields = [
                        ("num_texts", r.num_texts as f64),
                        ("num_units", r.num_units as f64),
                        ("num_duplicates", r.num_duplicates as f64),
                        ("avg_text_length", r.avg_text_length),
                        ("vocab_size", r.vocab_size as f64),
                    ];
                    (t.clone(), fields.iter().map(|(k, v)| (k.to_string(), *v)).collect())
                })
                .collect(),
        ),
    })
}

fn select_units(table: ScoreTable, args: &VisualizerArgs) -> Result<ScoreTable, ChartError> {
    let mut table = table;
    if let Some(list) = &args.unit_filter_list {
        let keep: BTreeSet<&str> = list.iter().map(String::as_str).collect();
        table.retain_units(|u| keep.contains(u));
    }
    if let Some(p) = &args.unit_pattern {
        let pattern = UnitPattern::new(p)?;
        table.retain_units(|u| pattern.is_match(u));
    }
    if let Some(k) = args.top_k {
        table = top_k(&table, k);
    }
    Ok(table)
}

struct Columns<'a> {
    inventories: &'a [VariableInventory],
}

impl Columns<'_> {
    fn index(&self, name: &str) -> usize {
        self.inventories
            .iter()
            .position(|v| v.decl.name == name)
            .expect("plans only reference document variables")
    }

    fn field_name(&self, name: &str) -> String {
        format!("v{}", self.index(name))
    }

    fn is_continuous(inv: &VariableInventory) -> bool {
        inv.decl.is_numeric() && !inv.decl.is_binned()
    }

    fn cell(inv: &VariableInventory, value: &str) -> Value {
        if Self::is_continuous(inv) {
            parse_number(value).map_or(Value::Null, |v| json!(v))
        } else {
            Value::String(value.to_owned())
        }
    }
}

pub fn render_chart(
    plan: &ChartPlan,
    doc: &ResultsDocument,
    args: &VisualizerArgs,
    shapes: &Shapes,
) -> Result<RenderedChart, ChartError> {
    let table = select_units(metric_table(doc, plan.metric)?, args)?;
    if table.is_empty() {
        return Err(ChartError::EmptySlice {
            metric: plan.metric,
            chart: plan.chart_type,
        });
    }
    let inventories = &doc.metadata.variables;
    let cols = Columns { inventories };
    let mut warnings = Vec::new();

    let region = match plan.chart_type {
        ChartType::Choropleth => Some(shapes.regions.as_ref().ok_or_else(|| {
            ChartError::InvalidArgs("a choropleth needs a geometry file".into())
        })?),
        _ => None,
    };
    let region_var = plan.variable(Channel::Region).map(|n| cols.index(n));

    let mut rows = Vec::with_capacity(table.len());
    let mut unmatched = BTreeSet::new();
    for (tuple, unit, score) in table.iter() {
        let mut row = Map::new();
        for (i, (inv, value)) in inventories.iter().zip(tuple.values()).enumerate() {
            row.insert(format!("v{i}"), Columns::cell(inv, value));
            if inv.decl.vtype == VarType::Coordinate && inv.decl.is_binned() {
                let center = parse_bin_label(value).map(|(lo, hi)| (lo + hi) / 2.0);
                row.insert(format!("v{i}_center"), center.map_or(Value::Null, |c| json!(c)));
            }
        }
        if let (Some(geo), Some(i)) = (region, region_var) {
            let value = &tuple.values()[i];
            match geo.lookup(value) {
                Some(key) => {
                    row.insert("geo_key".into(), Value::String(key.to_owned()));
                }
                None => {
                    if value != MISSING_VALUE {
                        unmatched.insert(value.clone());
                    }
                }
            }
        }
        row.insert("unit".into(), Value::String(unit.clone()));
        row.insert("score".into(), json!(score));
        rows.push(Value::Object(row));
    }
    for value in &unmatched {
        warnings.push(format!(
            "GeometryMismatch: value `{value}` has no feature whose `{}` matches",
            region.map_or(DEFAULT_PROPERTY, |g| g.property())
        ));
    }

    let units: BTreeSet<&String> = table.iter().map(|(_, u, _)| u).collect();
    let mut params = Vec::new();
    let mut filters = Vec::new();
    match plan.unit_widget {
        UnitWidget::RegexSearch => {
            params.push(json!({
                "name": "unit_regex",
                "value": "",
                "bind": {"input": "text", "name": "unit (regex) "}
            }));
            filters.push(json!({"filter": "test(regexp(unit_regex), datum.unit)"}));
        }
        UnitWidget::Dropdown => {
            params.push(json!({
                "name": "unit_choice",
                "value": units.first(),
                "bind": {"input": "select", "options": units, "name": "unit "}
            }));
            filters.push(json!({"filter": "datum.unit === unit_choice"}));
        }
    }
    if let Some(name) = plan.variable(Channel::Dropdown) {
        let i = cols.index(name);
        let present: BTreeSet<&String> = table.0.keys().map(|t| &t.values()[i]).collect();
        let options: Vec<&String> = inventories[i]
            .values
            .iter()
            .filter(|v| present.contains(v))
            .collect();
        let param = format!("v{i}_choice");
        params.push(json!({
            "name": param,
            "value": options.first(),
            "bind": {"input": "select", "options": options, "name": format!("{name} ")}
        }));
        filters.push(json!({"filter": format!("datum.v{i} === {param}")}));
    }

    let mut encoding = Map::new();
    for (&channel, field) in &plan.assignments {
        let name = match channel {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
            Channel::Size => "size",
            Channel::Lat => "latitude",
            Channel::Lon => "longitude",
            Channel::Region => "shape",
            Channel::Dropdown | Channel::UnitFilter => continue,
        };
        encoding.insert(name.into(), encode(plan, channel, field, &cols));
    }
    if plan.chart_type == ChartType::Bar && plan.field(Channel::Color) == Some(&Field::Unit) {
        encoding.insert("xOffset".into(), json!({"field": "unit"}));
    }
    let mut tooltip: Vec<Value> = inventories
        .iter()
        .enumerate()
        .map(|(i, inv)| json!({"field": format!("v{i}"), "title": inv.decl.name}))
        .collect();
    tooltip.push(json!({"field": "unit"}));
    tooltip.push(json!({"field": "score", "title": plan.metric.as_str()}));
    encoding.insert("tooltip".into(), Value::Array(tooltip));

    let mark = match plan.chart_type {
        ChartType::Bar => json!({"type": "bar"}),
        ChartType::Line => json!({"type": "line", "point": true}),
        ChartType::Heatmap => json!({"type": "rect"}),
        ChartType::Scatter => json!({"type": "point", "filled": true}),
        ChartType::GeoScatter => json!({"type": "circle"}),
        ChartType::BinnedMap => json!({"type": "square", "size": 60}),
        ChartType::Choropleth => json!({"type": "geoshape", "stroke": "white"}),
    };

    let mut transform = filters;
    if let Some(geo) = region {
        transform.push(json!({
            "lookup": "geo_key",
            "from": {"data": {"values": geo.features()}, "key": format!("properties.{}", geo.property())},
            "as": "geo"
        }));
    }

    let title = {
        let vars: Vec<&str> = inventories.iter().map(|v| v.decl.name.as_str()).collect();
        if vars.is_empty() {
            plan.metric.to_string()
        } else {
            format!("{} by {}", plan.metric, vars.join(", "))
        }
    };
    let data_layer = json!({
        "data": {"values": rows},
        "transform": transform,
        "mark": mark,
        "encoding": encoding,
    });

    let backdrop = match plan.chart_type {
        ChartType::Choropleth => region,
        ChartType::GeoScatter | ChartType::BinnedMap => shapes.background.as_ref(),
        _ => None,
    };
    let mut spec = Map::new();
    spec.insert("$schema".into(), json!(VEGA_LITE_SCHEMA));
    spec.insert("title".into(), json!(title));
    spec.insert("params".into(), Value::Array(params));
    if plan.chart_type.is_map() {
        spec.insert("width".into(), json!(600));
        spec.insert("height".into(), json!(500));
        spec.insert("projection".into(), json!({"type": "mercator"}));
    }
    match backdrop {
        Some(geo) => {
            let background = json!({
                "data": {"values": geo.features()},
                "mark": {"type": "geoshape", "fill": "#e5e5e5", "stroke": "white"}
            });
            spec.insert("layer".into(), json!([background, data_layer]));
        }
        None => {
            if let Value::Object(layer) = data_layer {
                spec.extend(layer);
            }
        }
    }

    Ok(RenderedChart {
        plan: plan.clone(),
        spec: Value::Object(spec),
        warnings,
    })
}

fn encode(plan: &ChartPlan, channel: Channel, field: &Field, cols: &Columns) -> Value {
    match field {
        Field::Score => {
            let mut enc = json!({"field": "score", "type": "quantitative", "title": plan.metric.as_str()});
            if channel == Channel::Color {
                enc["scale"] = if plan.metric.is_non_negative() {
                    json!({"scheme": "viridis"})
                } else {
                    json!({"scheme": "redblue", "domainMid": 0})
                };
            }
            enc
        }
        Field::Unit => json!({"field": "unit", "type": "nominal", "title": "unit"}),
        Field::Variable(name) => {
            let inv = &cols.inventories[cols.index(name)];
            let field = cols.field_name(name);
            match channel {
                Channel::Region => json!({"field": "geo", "type": "geojson", "title": name}),
                Channel::Lat | Channel::Lon => {
                    let f = if inv.decl.is_binned() { format!("{field}_center") } else { field };
                    json!({"field": f, "type": "quantitative", "title": name})
                }
                _ if Columns::is_continuous(inv) => {
                    json!({"field": field, "type": "quantitative", "title": name})
                }
                _ => {
                    let ordered = inv.decl.vtype == VarType::Ordinal
                        || inv.decl.is_binned()
                        || inv.decl.semantics == crate::variables::Semantics::Temporal;
                    json!({
                        "field": field,
                        "type": if ordered { "ordinal" } else { "nominal" },
                        "title": name,
                        "sort": inv.values,
                    })
                }
            }
        }
    }
}

/// Writes `<metric>__<chart_type>.<ext>` for every requested format.
pub fn write_chart(
    chart: &RenderedChart,
    dir: &Path,
    formats: &BTreeSet<OutputFormat>,
) -> Result<Vec<PathBuf>, ChartError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| ChartError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for format in formats {
        let path = dir.join(format!("{}.{}", chart.plan.file_stem(), format.extension()));
        let content = match format {
            OutputFormat::Json => chart.to_json(),
            OutputFormat::Html => chart.to_html(),
        };
        fs::write(&path, content).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisualizeReport {
    pub charts: Vec<RenderedChart>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Plans, renders and writes charts for every metric in the document.
pub fn visualize(doc: &ResultsDocument, args: &VisualizerArgs) -> Result<VisualizeReport, ChartError> {
    args.validate()?;
    let shapes = Shapes::load(args)?;
    let decls = doc.decls();
    let mut report = VisualizeReport::default();
    let mut planned = BTreeMap::new();
    for &metric in doc.metrics.keys() {
        planned.insert(metric, plan_charts(metric, &decls, shapes.regions.is_some())?);
    }
    for plans in planned.values() {
        for plan in plans {
            match render_chart(plan, doc, args, &shapes) {
                Ok(chart) => {
                    report.files.extend(write_chart(&chart, &args.output_dir, &args.formats)?);
                    report
                        .warnings
                        .extend(chart.warnings.iter().map(|w| format!("{}: {w}", plan.file_stem())));
                    report.charts.push(chart);
                }
                Err(e @ ChartError::EmptySlice { .. }) => {
                    report.warnings.push(format!("EmptySlice: {e}; skipped"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}
