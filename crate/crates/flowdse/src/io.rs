//! File formats: DSM JSON/CSV, module catalogs, scenario files, run
//! configuration, design wiring and the result CSVs.
//!
//! All CSV output is UTF-8 with LF line endings and fixed decimal places so
//! reruns are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use flowdse_core::controller::{ControllerParams, ProductionStrategy};
use flowdse_core::dsm::{Design, DesignSpaceMatrix, Direction, PortBounds, PortRef};
use flowdse_core::evaluate::{DesignScore, ScoreCell};
use flowdse_core::plant::Catalog;
use flowdse_core::scenario::{FlockModel, Recipe, Scenario, Season, MAX_FILLET_WEIGHT};
use flowdse_core::sim::{PerformanceRecord, SimParams, SweepRow};
use flowdse_core::Weight;
use serde::{Deserialize, Serialize};

use crate::Error;

pub fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::input(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::output(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::output(path, e))
}

fn from_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::invalid(path, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PortJson {
    module: String,
    port: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DsmJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    output_ports: Vec<PortJson>,
    input_ports: Vec<PortJson>,
    allowed: Vec<[usize; 2]>,
    #[serde(default)]
    bounds: BTreeMap<String, PortBounds>,
    #[serde(default)]
    all_or_none_modules: Vec<String>,
}

/// Resolves a `module.port` label; an input label is tried only if no output
/// carries it.
fn resolve_label(label: &str, outputs: &[PortRef], inputs: &[PortRef]) -> Result<PortRef, String> {
    let (m, p) = label.rsplit_once('.').ok_or_else(|| format!("bad port label {label:?}"))?;
    let out = outputs.iter().find(|q| q.module == m && q.port == p);
    let inp = inputs.iter().find(|q| q.module == m && q.port == p);
    match (out, inp) {
        (Some(_), Some(_)) => Err(format!("port label {label:?} names both an output and an input")),
        (Some(q), None) | (None, Some(q)) => Ok(q.clone()),
        (None, None) => Err(format!("bounds reference unknown port {label}")),
    }
}

pub fn parse_dsm_json(text: &str) -> Result<DesignSpaceMatrix, String> {
    let doc: DsmJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let outputs: Vec<PortRef> =
        doc.output_ports.into_iter().map(|p| PortRef::output(p.module, p.port)).collect();
    let inputs: Vec<PortRef> =
        doc.input_ports.into_iter().map(|p| PortRef::input(p.module, p.port)).collect();
    let mut bounds = Vec::new();
    for (label, b) in doc.bounds {
        bounds.push((resolve_label(&label, &outputs, &inputs)?, b));
    }
    DesignSpaceMatrix::new(
        outputs,
        inputs,
        doc.allowed.into_iter().map(|[o, i]| (o, i)),
        bounds,
        doc.all_or_none_modules.into_iter().collect(),
    )
    .map_err(|e| e.to_string())
}

pub fn dsm_to_json(dsm: &DesignSpaceMatrix) -> String {
    let port = |p: &PortRef| PortJson { module: p.module.clone(), port: p.port.clone() };
    let mut bounds = BTreeMap::new();
    for (k, p) in dsm.outputs().iter().enumerate() {
        bounds.insert(p.label(), dsm.output_bounds(k));
    }
    for (k, p) in dsm.inputs().iter().enumerate() {
        bounds.insert(p.label(), dsm.input_bounds(k));
    }
    let doc = DsmJson {
        notes: None,
        output_ports: dsm.outputs().iter().map(port).collect(),
        input_ports: dsm.inputs().iter().map(port).collect(),
        allowed: dsm.entries().iter().map(|&(o, i)| [o, i]).collect(),
        bounds,
        all_or_none_modules: dsm.all_or_none().iter().cloned().collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

const AON_ROW: &str = "All-or-none modules";

/// Matrix layout: header row of input labels then `Min,Max`; one row per
/// output with 0/1 cells and its bounds; `Min` and `Max` rows for the
/// inputs; an optional all-or-none row listing modules separated by `;`.
pub fn parse_dsm_csv(text: &str) -> Result<DesignSpaceMatrix, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> =
        rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let header = rows.first().ok_or("empty matrix file")?;
    let n_in = header.len().checked_sub(3).ok_or("header needs inputs plus Min and Max")?;
    if &header[n_in + 1] != "Min" || &header[n_in + 2] != "Max" {
        return Err("header must end with Min,Max".into());
    }
    let split = |label: &str| -> Result<(String, String), String> {
        label
            .rsplit_once('.')
            .map(|(m, p)| (m.to_string(), p.to_string()))
            .ok_or_else(|| format!("bad port label {label:?}"))
    };
    let mut inputs = Vec::new();
    for k in 0..n_in {
        let (m, p) = split(&header[k + 1])?;
        inputs.push(PortRef::input(m, p));
    }
    let num = |s: &str| -> Result<u32, String> {
        s.trim().parse().map_err(|_| format!("expected a count, found {s:?}"))
    };
    let mut outputs = Vec::new();
    let mut allowed = Vec::new();
    let mut bounds = Vec::new();
    let mut in_min = None;
    let mut in_max = None;
    let mut aon = BTreeSet::new();
    for row in &rows[1..] {
        match &row[0] {
            "Min" | "Max" => {
                let vals: Vec<u32> = (0..n_in).map(|k| num(&row[k + 1])).collect::<Result<_, _>>()?;
                if &row[0] == "Min" {
                    in_min = Some(vals);
                } else {
                    in_max = Some(vals);
                }
            }
            AON_ROW => {
                if let Some(list) = row.get(1) {
                    aon.extend(list.split(';').filter(|s| !s.is_empty()).map(str::to_string));
                }
            }
            label => {
                if row.len() != n_in + 3 {
                    return Err(format!("row {label} has {} cells, expected {}", row.len(), n_in + 3));
                }
                let (m, p) = split(label)?;
                let o = outputs.len();
                let port = PortRef::output(m, p);
                for k in 0..n_in {
                    match row[k + 1].trim() {
                        "1" => allowed.push((o, k)),
                        "0" | "" => {}
                        other => return Err(format!("cell {label}/{k}: expected 0 or 1, found {other:?}")),
                    }
                }
                bounds.push((port.clone(), PortBounds::new(num(&row[n_in + 1])?, num(&row[n_in + 2])?)));
                outputs.push(port);
            }
        }
    }
    let (in_min, in_max) = (in_min.ok_or("missing Min row")?, in_max.ok_or("missing Max row")?);
    for (k, p) in inputs.iter().enumerate() {
        bounds.push((p.clone(), PortBounds::new(in_min[k], in_max[k])));
    }
    DesignSpaceMatrix::new(outputs, inputs, allowed, bounds, aon).map_err(|e| e.to_string())
}

pub fn dsm_to_csv(dsm: &DesignSpaceMatrix) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut header = vec![String::from("output\\input")];
    header.extend(dsm.inputs().iter().map(PortRef::label));
    header.extend(["Min".to_string(), "Max".to_string()]);
    w.write_record(&header).expect("in-memory");
    for (o, p) in dsm.outputs().iter().enumerate() {
        let mut row = vec![p.label()];
        row.extend((0..dsm.inputs().len()).map(|i| if dsm.is_allowed(o, i) { "1" } else { "0" }.to_string()));
        let b = dsm.output_bounds(o);
        row.extend([b.min.to_string(), b.max.to_string()]);
        w.write_record(&row).expect("in-memory");
    }
    for (name, pick) in [("Min", true), ("Max", false)] {
        let mut row = vec![name.to_string()];
        row.extend((0..dsm.inputs().len()).map(|i| {
            let b = dsm.input_bounds(i);
            if pick { b.min } else { b.max }.to_string()
        }));
        row.extend([String::new(), String::new()]);
        w.write_record(&row).expect("in-memory");
    }
    if !dsm.all_or_none().is_empty() {
        let list: Vec<&str> = dsm.all_or_none().iter().map(String::as_str).collect();
        w.write_record([AON_ROW, &list.join(";")]).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}

/// Loads a DSM by extension: `.csv` as a matrix, anything else as JSON.
pub fn load_dsm(path: &Path) -> Result<DesignSpaceMatrix, Error> {
    let text = read_text(path)?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_dsm_csv(&text)
    } else {
        parse_dsm_json(&text)
    };
    parsed.map_err(|e| Error::invalid(path, e))
}

pub fn load_catalog(path: &Path) -> Result<Catalog, Error> {
    from_json(path)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RecipeJson {
    id: String,
    #[serde(default)]
    name: Option<String>,
    destination: String,
    #[serde(default)]
    priority: Option<u32>,
    #[serde(default)]
    target_per_min: f64,
    min_weight_g: f64,
    max_weight_g: f64,
    #[serde(default)]
    max_trim_g: f64,
    #[serde(default)]
    is_default: bool,
}

impl RecipeJson {
    fn into_recipe(self) -> Recipe {
        Recipe {
            name: self.name.unwrap_or_else(|| self.id.clone()),
            id: self.id,
            destination: self.destination,
            priority: self.priority,
            target_per_min: self.target_per_min,
            min_weight: Weight::from_grams(self.min_weight_g),
            max_weight: Weight::from_grams(self.max_weight_g),
            max_trim: Weight::from_grams(self.max_trim_g),
            is_default: self.is_default,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScenarioJson {
    id: u32,
    season: Season,
    mean_weight_g: f64,
    #[serde(default = "default_std_fraction")]
    std_fraction: f64,
    #[serde(default = "default_lanes")]
    lane_count: usize,
    #[serde(default)]
    lane_slots: Option<Vec<usize>>,
    #[serde(default)]
    arrival_rate_per_lane: Option<f64>,
}

fn default_std_fraction() -> f64 {
    0.10
}

fn default_lanes() -> usize {
    5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScenarioFile {
    arrival_rate_per_lane: f64,
    recipe_sets: BTreeMap<Season, Vec<RecipeJson>>,
    scenarios: Vec<ScenarioJson>,
}

pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, String> {
    let doc: ScenarioFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut ids = BTreeSet::new();
    let mut out = Vec::new();
    for s in doc.scenarios {
        if !ids.insert(s.id) {
            return Err(format!("duplicate scenario id {}", s.id));
        }
        let recipes = doc
            .recipe_sets
            .get(&s.season)
            .ok_or_else(|| format!("no recipe set for season {}", s.season.as_str()))?;
        let mut flock = FlockModel::new(s.mean_weight_g, s.std_fraction, s.lane_count);
        if let Some(slots) = s.lane_slots {
            flock.lane_slots = slots;
        }
        let scenario = Scenario {
            id: s.id,
            season: s.season,
            recipes: recipes.iter().cloned().map(RecipeJson::into_recipe).collect(),
            flock,
            arrival_rate_per_lane: s.arrival_rate_per_lane.unwrap_or(doc.arrival_rate_per_lane),
        };
        scenario.validate().map_err(|e| e.to_string())?;
        for r in &scenario.recipes {
            if r.max_weight > MAX_FILLET_WEIGHT {
                return Err(format!("recipe {}: max weight above 1000 g", r.id));
            }
        }
        out.push(scenario);
    }
    Ok(out)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, Error> {
    parse_scenarios(&read_text(path)?).map_err(|e| Error::invalid(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerJson {
    pub window_size: usize,
    pub recompute_period_s: f64,
    pub bin_width_g: f64,
}

/// Run configuration as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub duration_s: f64,
    pub warmup_s: f64,
    pub replications: u32,
    pub seed: u64,
    pub controller: ControllerJson,
}

impl From<&SimParams> for RunConfig {
    fn from(p: &SimParams) -> Self {
        RunConfig {
            duration_s: p.duration_s,
            warmup_s: p.warmup_s,
            replications: p.replications,
            seed: p.global_seed,
            controller: ControllerJson {
                window_size: p.controller.window_size,
                recompute_period_s: p.controller.recompute_period_s,
                bin_width_g: p.controller.bin_width.grams(),
            },
        }
    }
}

impl RunConfig {
    pub fn to_params(&self) -> SimParams {
        SimParams {
            duration_s: self.duration_s,
            warmup_s: self.warmup_s,
            replications: self.replications,
            global_seed: self.seed,
            controller: ControllerParams {
                window_size: self.controller.window_size,
                recompute_period_s: self.controller.recompute_period_s,
                bin_width: Weight::from_grams(self.controller.bin_width_g),
                max_weight: MAX_FILLET_WEIGHT,
            },
        }
    }
}

pub fn load_run_config(path: &Path) -> Result<SimParams, Error> {
    let cfg: RunConfig = from_json(path)?;
    let params = cfg.to_params();
    params.validate().map_err(|e| Error::invalid(path, e))?;
    Ok(params)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConnectionJson {
    from: PortJson,
    to: PortJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct WiringJson {
    connections: Vec<ConnectionJson>,
}

pub fn parse_wiring(text: &str) -> Result<Vec<(PortRef, PortRef)>, String> {
    let doc: WiringJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(doc
        .connections
        .into_iter()
        .map(|c| (PortRef::output(c.from.module, c.from.port), PortRef::input(c.to.module, c.to.port)))
        .collect())
}

pub fn wiring_to_json(wiring: &[(PortRef, PortRef)]) -> String {
    let port = |p: &PortRef| PortJson { module: p.module.clone(), port: p.port.clone() };
    let doc = WiringJson {
        connections: wiring.iter().map(|(a, b)| ConnectionJson { from: port(a), to: port(b) }).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn load_wiring(path: &Path) -> Result<Vec<(PortRef, PortRef)>, Error> {
    parse_wiring(&read_text(path)?).map_err(|e| Error::invalid(path, e))
}

/// `out.port>in.port` pairs joined by `;`.
pub fn design_connections(design: &Design, dsm: &DesignSpaceMatrix) -> String {
    design
        .wiring(dsm)
        .iter()
        .map(|(a, b)| format!("{}>{}", a.label(), b.label()))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_connections(s: &str) -> Result<Vec<(PortRef, PortRef)>, String> {
    s.split(';')
        .filter(|c| !c.is_empty())
        .map(|c| {
            let (a, b) = c.split_once('>').ok_or_else(|| format!("bad connection {c:?}"))?;
            let (am, ap) = a.rsplit_once('.').ok_or_else(|| format!("bad port {a:?}"))?;
            let (bm, bp) = b.rsplit_once('.').ok_or_else(|| format!("bad port {b:?}"))?;
            Ok((PortRef::output(am, ap), PortRef::input(bm, bp)))
        })
        .collect()
}

/// Enumeration listing: `design_id,connections`.
pub fn write_designs(
    out: &mut impl Write,
    dsm: &DesignSpaceMatrix,
    designs: impl Iterator<Item = Design>,
) -> std::io::Result<u64> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["design_id", "connections"])?;
    let mut n = 0;
    for d in designs {
        w.write_record([d.id.to_string(), design_connections(&d, dsm)])?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// A design's connections as `(output, input)` pairs.
pub type Wiring = Vec<(PortRef, PortRef)>;

pub fn read_designs(text: &str) -> Result<Vec<(u64, Wiring)>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let id = r[0].parse().map_err(|_| format!("bad design id {:?}", &r[0]))?;
            Ok((id, parse_connections(&r[1])?))
        })
        .collect()
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub const RECORD_HEADER: [&str; 9] = [
    "design_id",
    "scenario_id",
    "replication",
    "recipe_id",
    "delivered",
    "throughput_per_min",
    "pct_of_target",
    "trim_pieces",
    "trim_mass_g",
];

/// One row per recipe per run; the default recipe's row leaves
/// `pct_of_target` empty.
pub fn records_csv(records: &[PerformanceRecord], measured_minutes: f64) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER).expect("in-memory");
    for r in records {
        let trim_mass = format!("{:.3}", r.trim_mass_mg as f64 / 1000.0);
        let head = [r.design_id.to_string(), r.scenario_id.to_string(), r.replication.to_string()];
        for o in &r.recipes {
            let mut row = head.to_vec();
            row.extend([
                o.recipe_id.clone(),
                o.delivered.to_string(),
                f6(o.throughput_per_min),
                f6(o.pct_of_target),
                r.trim_pieces.to_string(),
                trim_mass.clone(),
            ]);
            w.write_record(&row).expect("in-memory");
        }
        let mut row = head.to_vec();
        row.extend([
            "default".to_string(),
            r.default_delivered.to_string(),
            f6(r.default_delivered as f64 / measured_minutes),
            String::new(),
            r.trim_pieces.to_string(),
            trim_mass,
        ]);
        w.write_record(&row).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}

/// Per-design score row with Pareto labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub score: DesignScore,
    pub pareto_swt: bool,
    pub pareto_sw: bool,
}

fn cell_column(c: &ScoreCell) -> String {
    format!("pct_sc{}_r{}_{}", c.scenario_id, c.recipe_id, c.season.as_str())
}

fn parse_cell_column(name: &str) -> Option<(u32, String, Season)> {
    let rest = name.strip_prefix("pct_sc")?;
    let (sc, rest) = rest.split_once("_r")?;
    let (recipe, season) = rest.rsplit_once('_')?;
    Some((sc.parse().ok()?, recipe.to_string(), season.parse().ok()?))
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["design_id", "s", "w", "t_trim", "roi", "pareto_swt", "pareto_sw", "trim_lanes"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(first) = rows.first() {
        header.extend(first.score.cells.iter().map(cell_column));
    }
    w.write_record(&header).expect("in-memory");
    for r in rows {
        let s = &r.score;
        let lanes: Vec<String> = s.trim_lanes.iter().map(usize::to_string).collect();
        let mut row = vec![
            s.design_id.to_string(),
            f6(s.s),
            f6(s.w),
            s.t_trim.to_string(),
            f6(s.roi),
            flag(r.pareto_swt).to_string(),
            flag(r.pareto_sw).to_string(),
            lanes.join(";"),
        ];
        row.extend(s.cells.iter().map(|c| f6(c.pct)));
        w.write_record(&row).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRow>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or(format!("missing column {name}"));
    let (c_id, c_s, c_w, c_t) = (col("design_id")?, col("s")?, col("w")?, col("t_trim")?);
    let c_roi = col("roi")?;
    let c_swt = header.iter().position(|h| h == "pareto_swt");
    let c_sw = header.iter().position(|h| h == "pareto_sw");
    let c_lanes = header.iter().position(|h| h == "trim_lanes");
    let cells: Vec<(usize, (u32, String, Season))> = header
        .iter()
        .enumerate()
        .filter_map(|(k, h)| parse_cell_column(h).map(|c| (k, c)))
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |k: usize| -> Result<f64, String> {
            rec[k].parse().map_err(|_| format!("bad number {:?} in column {}", &rec[k], &header[k]))
        };
        let t_trim: usize = rec[c_t].parse().map_err(|_| format!("bad t_trim {:?}", &rec[c_t]))?;
        let trim_lanes = match c_lanes {
            Some(k) => rec[k]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| format!("bad lane {s:?}")))
                .collect::<Result<Vec<usize>, String>>()?,
            None => Vec::new(),
        };
        let score = DesignScore {
            design_id: rec[c_id].parse().map_err(|_| format!("bad design id {:?}", &rec[c_id]))?,
            s: num(c_s)?,
            w: num(c_w)?,
            t_trim,
            trim_lanes,
            cells: cells
                .iter()
                .map(|(k, (sc, recipe, season))| {
                    Ok(ScoreCell { scenario_id: *sc, season: *season, recipe_id: recipe.clone(), pct: num(*k)? })
                })
                .collect::<Result<_, String>>()?,
            roi: num(c_roi)?,
        };
        out.push(ScoreRow {
            score,
            pareto_swt: c_swt.is_some_and(|k| &rec[k] == "1"),
            pareto_sw: c_sw.is_some_and(|k| &rec[k] == "1"),
        });
    }
    Ok(out)
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRow>, Error> {
    parse_scores(&read_text(path)?).map_err(|e| Error::invalid(path, e))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["duration_s", "replication", "estimate_pct", "error_pct"]).expect("in-memory");
    for r in rows {
        w.write_record([f6(r.duration_s), r.replication.to_string(), f6(r.estimate), f6(r.error)])
            .expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}

/// Strategy snapshot: `time_s, lane, lo_g, hi_g, recipe_id, trim`.
pub fn strategy_rows(time: f64, strategy: &ProductionStrategy, recipes: &[Recipe]) -> Vec<[String; 6]> {
    strategy
        .rows()
        .into_iter()
        .map(|(lane, lo, hi, r, trim)| {
            [
                format!("{time:.3}"),
                lane.to_string(),
                format!("{:.3}", lo.grams()),
                format!("{:.3}", hi.grams()),
                recipes[r].id.clone(),
                flag(trim).to_string(),
            ]
        })
        .collect()
}

/// Checks that every catalog module is known to the DSM and vice versa.
pub fn check_catalog(dsm: &DesignSpaceMatrix, catalog: &Catalog) -> Result<(), String> {
    for m in dsm.modules() {
        if !catalog.contains_key(m) {
            return Err(format!("module {m} is not in the catalog"));
        }
    }
    for p in dsm.outputs().iter().chain(dsm.inputs()) {
        let kind = &catalog[&p.module];
        let ports = match p.direction {
            Direction::Output => kind.output_ports(),
            Direction::Input => kind.input_ports(),
        };
        if !ports.contains(&p.port.as_str()) {
            return Err(format!("{} has no {:?} port {}", kind.name(), p.direction, p.port));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_STUDY: &str = include_str!("../data/case_study_dsm.json");

    #[test]
    fn dsm_json_and_csv_round_trip() {
        let dsm = parse_dsm_json(CASE_STUDY).unwrap();
        let again = parse_dsm_json(&dsm_to_json(&dsm)).unwrap();
        assert_eq!(dsm, again);
        let csv = dsm_to_csv(&dsm);
        let from_csv = parse_dsm_csv(&csv).unwrap();
        assert_eq!(dsm, from_csv);
        assert_eq!(dsm_to_csv(&from_csv), csv);
    }

    #[test]
    fn case_study_shape() {
        let dsm = parse_dsm_json(CASE_STUDY).unwrap();
        assert_eq!((dsm.outputs().len(), dsm.inputs().len()), (41, 29));
        assert!(dsm.warnings().is_empty());
    }

    #[test]
    fn infeasible_bounds_are_named() {
        let text = r#"{"output_ports":[{"module":"a","port":"out"}],
            "input_ports":[{"module":"b","port":"in"}],
            "allowed":[[0,0]],
            "bounds":{"b.in":{"min":2,"max":2}}}"#;
        let err = parse_dsm_json(text).unwrap_err();
        assert!(err.contains("b.in"), "{err}");
    }

    #[test]
    fn shipped_scenarios_match_catalog() {
        let parsed = parse_scenarios(include_str!("../data/scenarios.json")).unwrap();
        assert_eq!(parsed, flowdse_core::scenario::scenario_catalog());
    }

    #[test]
    fn connections_round_trip() {
        let dsm = parse_dsm_json(CASE_STUDY).unwrap();
        let d = dsm.designs().nth(17).unwrap();
        let back = parse_connections(&design_connections(&d, &dsm)).unwrap();
        assert_eq!(back, d.wiring(&dsm));
    }
}
