//! Enumerate, build, simulate and score designs in parallel, with an
//! append-only progress log so interrupted explorations can resume.
//!
//! Store layout under the output directory:
//!
//! * `manifest.json`: configuration, its digest, seed and version;
//! * `progress.jsonl`: one line per finished design (records and score, or
//!   the validation error);
//! * `records.csv`, `scores.csv`, `pareto.csv`: written when a pass finishes.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use flowdse_core::dsm::{sample_designs, Design, DesignSpaceMatrix};
use flowdse_core::evaluate::{pareto_by_trim_count, pareto_front, score_design, DesignScore, Orientation, RoiParams};
use flowdse_core::plant::{build_topology, derive_routings, Catalog, PlantTopology, RoutingTable};
use flowdse_core::scenario::Scenario;
use flowdse_core::sim::{run_simulation, PerformanceRecord, SimParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{self, RunConfig, ScoreRow};
use crate::Error;

/// Which designs to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    /// `k` designs drawn uniformly without replacement with the run seed.
    Sample { k: usize },
    /// Stop at the first design, in enumeration order, meeting every given
    /// threshold.
    Satisfice {
        min_s: Option<f64>,
        min_w: Option<f64>,
        min_roi: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub dsm: PathBuf,
    pub catalog: PathBuf,
    pub scenarios: PathBuf,
    pub run: RunConfig,
    pub roi: RoiParams,
    pub mode: Mode,
    #[serde(skip, default = "one")]
    pub workers: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub verbose: bool,
}

fn one() -> usize {
    1
}

impl ExplorationConfig {
    pub fn sim_params(&self) -> SimParams {
        self.run.to_params()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExplorationConfig,
    pub config_digest: String,
    pub seed: u64,
    pub created_unix: u64,
    pub designs_in_scope: Option<u64>,
    pub completed: u64,
    pub failed: u64,
    pub finished: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum Outcome {
    Ok {
        records: Vec<PerformanceRecord>,
        score: DesignScore,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LogEntry {
    design_id: u64,
    connections_digest: String,
    #[serde(flatten)]
    outcome: Outcome,
}

/// Final state of a store.
#[derive(Clone, Debug)]
pub struct ResultStore {
    pub out_dir: PathBuf,
    /// Sorted by design id.
    pub scores: Vec<ScoreRow>,
    pub failed: Vec<(u64, String)>,
    /// Satisfice mode: the design that met the thresholds, if any.
    pub satisficing: Option<u64>,
    /// Designs evaluated by this call (not loaded from the log).
    pub newly_evaluated: u64,
}

struct Context {
    dsm: DesignSpaceMatrix,
    catalog: Catalog,
    scenarios: Vec<Scenario>,
    params: SimParams,
    roi: RoiParams,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of everything that affects results: the configuration (minus
/// worker count and output location) and the input file contents.
pub fn config_digest(cfg: &ExplorationConfig) -> Result<String, Error> {
    let mut h = Sha256::new();
    let body = serde_json::json!({ "run": cfg.run, "roi": cfg.roi, "mode": cfg.mode });
    h.update(body.to_string().as_bytes());
    for path in [&cfg.dsm, &cfg.catalog, &cfg.scenarios] {
        h.update(b"\0");
        h.update(io::read_text(path)?.as_bytes());
    }
    Ok(hex(&h.finalize()))
}

fn connections_digest(design: &Design, dsm: &DesignSpaceMatrix) -> String {
    hex(&Sha256::digest(io::design_connections(design, dsm).as_bytes()))
}

fn load_context(cfg: &ExplorationConfig) -> Result<Context, Error> {
    let dsm = io::load_dsm(&cfg.dsm)?;
    let catalog = io::load_catalog(&cfg.catalog)?;
    io::check_catalog(&dsm, &catalog).map_err(|e| Error::invalid(&cfg.catalog, e))?;
    let scenarios = io::load_scenarios(&cfg.scenarios)?;
    let params = cfg.sim_params();
    params.validate().map_err(|e| Error::Invalid(e.to_string()))?;
    cfg.roi.validate().map_err(|e| Error::Invalid(e.to_string()))?;
    if cfg.workers == 0 {
        return Err(Error::Usage("--workers must be at least 1".into()));
    }
    Ok(Context { dsm, catalog, scenarios, params, roi: cfg.roi.clone() })
}

enum Prepared {
    Ready(Box<(PlantTopology, RoutingTable)>),
    Failed(String),
}

fn prepare(ctx: &Context, design: &Design) -> Prepared {
    match build_topology(&design.wiring(&ctx.dsm), &ctx.catalog) {
        Ok(t) => {
            let r = derive_routings(&t);
            Prepared::Ready(Box::new((t, r)))
        }
        Err(e) => Prepared::Failed(e.to_string()),
    }
}

/// Evaluates a batch of designs; runs are spread over the current rayon pool.
fn evaluate_batch(ctx: &Context, designs: &[Design]) -> Vec<LogEntry> {
    let prepared: Vec<Prepared> = designs.par_iter().map(|d| prepare(ctx, d)).collect();
    let reps = ctx.params.replications;
    let mut units = Vec::new();
    for (k, p) in prepared.iter().enumerate() {
        if matches!(p, Prepared::Ready(_)) {
            for s in 0..ctx.scenarios.len() {
                for r in 0..reps {
                    units.push((k, s, r));
                }
            }
        }
    }
    let results: Vec<Result<PerformanceRecord, String>> = units
        .par_iter()
        .map(|&(k, s, r)| {
            let Prepared::Ready(tr) = &prepared[k] else { unreachable!() };
            run_simulation(&tr.0, &tr.1, &ctx.scenarios[s], &ctx.params, designs[k].id, r)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut per_design: Vec<Vec<Result<PerformanceRecord, String>>> = designs.iter().map(|_| Vec::new()).collect();
    for (&(k, _, _), res) in units.iter().zip(results) {
        per_design[k].push(res);
    }
    designs
        .iter()
        .zip(prepared)
        .zip(per_design)
        .map(|((d, p), runs)| {
            let outcome = match p {
                Prepared::Failed(error) => Outcome::Failed { error },
                Prepared::Ready(tr) => match runs.into_iter().collect::<Result<Vec<_>, _>>() {
                    Err(error) => Outcome::Failed { error },
                    Ok(records) => {
                        match score_design(d.id, &records, &ctx.scenarios, tr.0.trim_lanes(), &ctx.roi) {
                            Ok(score) => Outcome::Ok { records, score },
                            Err(e) => Outcome::Failed { error: e.to_string() },
                        }
                    }
                },
            };
            LogEntry { design_id: d.id, connections_digest: connections_digest(d, &ctx.dsm), outcome }
        })
        .collect()
}

fn meets(score: &DesignScore, mode: &Mode) -> bool {
    match mode {
        Mode::Satisfice { min_s, min_w, min_roi } => {
            min_s.is_none_or(|v| score.s >= v)
                && min_w.is_none_or(|v| score.w >= v)
                && min_roi.is_none_or(|v| score.roi >= v)
        }
        _ => false,
    }
}

const PROGRESS: &str = "progress.jsonl";
const MANIFEST: &str = "manifest.json";

/// Reads the progress log, dropping a torn final line.
fn read_log(dir: &Path) -> Result<BTreeMap<u64, LogEntry>, Error> {
    let path = dir.join(PROGRESS);
    let mut text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(Error::input(&path, e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |k| k + 1);
        text.truncate(keep);
        fs::write(&path, &text).map_err(|e| Error::output(&path, e))?;
    }
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let e: LogEntry = serde_json::from_str(line)
            .map_err(|err| Error::invalid(&path, format!("line {}: {err}", n + 1)))?;
        out.insert(e.design_id, e);
    }
    Ok(out)
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(m).expect("serializable");
    text.push('\n');
    io::write_text(&dir.join(MANIFEST), &text)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, Error> {
    let path = dir.join(MANIFEST);
    serde_json::from_str(&io::read_text(&path)?).map_err(|e| Error::invalid(&path, e))
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Runs (or continues) an exploration. An existing store in `out_dir` with
/// the same configuration digest is resumed; a different digest is an error.
pub fn explore(cfg: &ExplorationConfig) -> Result<ResultStore, Error> {
    let mut cfg = cfg.clone();
    cfg.dsm = absolute(&cfg.dsm);
    cfg.catalog = absolute(&cfg.catalog);
    cfg.scenarios = absolute(&cfg.scenarios);
    let ctx = load_context(&cfg)?;
    let digest = config_digest(&cfg)?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::output(&dir, e))?;

    let mut manifest = match read_manifest(&dir) {
        Ok(m) => {
            if m.config_digest != digest {
                return Err(Error::Invalid(format!(
                    "{}: store was created with a different configuration (digest {} vs {})",
                    dir.display(),
                    m.config_digest,
                    digest
                )));
            }
            m
        }
        Err(_) if !dir.join(MANIFEST).exists() => Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            config_digest: digest,
            seed: cfg.run.seed,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            designs_in_scope: None,
            completed: 0,
            failed: 0,
            finished: false,
        },
        Err(e) => return Err(e),
    };
    write_manifest(&dir, &manifest)?;

    let mut done = read_log(&dir)?;
    let log_path = dir.join(PROGRESS);
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::output(&log_path, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Runtime(e.to_string()))?;

    let mut newly = 0u64;
    let mut satisficing = None;
    let mut append = |entries: Vec<LogEntry>, done: &mut BTreeMap<u64, LogEntry>| -> Result<(), Error> {
        let mut buf = String::new();
        for e in &entries {
            buf.push_str(&serde_json::to_string(e).expect("serializable"));
            buf.push('\n');
        }
        log.write_all(buf.as_bytes()).and_then(|_| log.flush()).map_err(|e| Error::output(&log_path, e))?;
        for e in entries {
            done.insert(e.design_id, e);
        }
        Ok(())
    };

    match &cfg.mode {
        Mode::Satisfice { .. } => {
            let mut seen = 0u64;
            for design in ctx.dsm.designs() {
                seen += 1;
                if !done.contains_key(&design.id) {
                    let entries = pool.install(|| evaluate_batch(&ctx, std::slice::from_ref(&design)));
                    newly += 1;
                    append(entries, &mut done)?;
                }
                if let Some(Outcome::Ok { score, .. }) = done.get(&design.id).map(|e| &e.outcome) {
                    if meets(score, &cfg.mode) {
                        satisficing = Some(design.id);
                        break;
                    }
                }
            }
            manifest.designs_in_scope = Some(seen);
        }
        mode => {
            let scope: Box<dyn Iterator<Item = Design>> = match mode {
                Mode::Sample { k } => Box::new(sample_designs(&ctx.dsm, *k, cfg.run.seed).into_iter()),
                _ => Box::new(ctx.dsm.designs()),
            };
            let mut in_scope = 0u64;
            let mut batch = Vec::new();
            let chunk = 64.max(cfg.workers * 4);
            let mut flush = |batch: &mut Vec<Design>, done: &mut BTreeMap<u64, LogEntry>| -> Result<(), Error> {
                if batch.is_empty() {
                    return Ok(());
                }
                let entries = pool.install(|| evaluate_batch(&ctx, batch));
                newly += batch.len() as u64;
                batch.clear();
                append(entries, done)?;
                if cfg.verbose {
                    eprintln!("{} designs evaluated", done.len());
                }
                Ok(())
            };
            for design in scope {
                in_scope += 1;
                if done.contains_key(&design.id) {
                    continue;
                }
                batch.push(design);
                if batch.len() >= chunk {
                    flush(&mut batch, &mut done)?;
                }
            }
            flush(&mut batch, &mut done)?;
            manifest.designs_in_scope = Some(in_scope);
        }
    }

    let store = finalize(&dir, &done, &ctx.params, satisficing, newly)?;
    manifest.completed = store.scores.len() as u64;
    manifest.failed = store.failed.len() as u64;
    manifest.finished = true;
    write_manifest(&dir, &manifest)?;
    Ok(store)
}

/// Continues the exploration recorded in `dir`. With `cfg`, the given
/// configuration must match the stored digest.
pub fn resume(dir: &Path, cfg: Option<&ExplorationConfig>, workers: usize) -> Result<ResultStore, Error> {
    let manifest = read_manifest(dir)?;
    let mut c = match cfg {
        Some(c) => c.clone(),
        None => manifest.config.clone(),
    };
    c.out_dir = dir.to_path_buf();
    c.workers = workers;
    explore(&c)
}

fn finalize(
    dir: &Path,
    done: &BTreeMap<u64, LogEntry>,
    params: &SimParams,
    satisficing: Option<u64>,
    newly_evaluated: u64,
) -> Result<ResultStore, Error> {
    let mut scores = Vec::new();
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for e in done.values() {
        match &e.outcome {
            Outcome::Ok { records: r, score } => {
                scores.push(score.clone());
                let mut r = r.clone();
                r.sort_by_key(|x| (x.scenario_id, x.replication));
                records.extend(r);
            }
            Outcome::Failed { error } => failed.push((e.design_id, error.clone())),
        }
    }
    let rows = label_scores(scores);
    io::write_text(&dir.join("records.csv"), &io::records_csv(&records, params.measured_minutes()))?;
    io::write_text(&dir.join("scores.csv"), &io::scores_csv(&rows))?;
    io::write_text(&dir.join("pareto.csv"), &pareto_csv(&rows))?;
    Ok(ResultStore { out_dir: dir.to_path_buf(), scores: rows, failed, satisficing, newly_evaluated })
}

/// Attaches the `(s, w, t_trim)` and `(s, w)` front labels.
pub fn label_scores(scores: Vec<DesignScore>) -> Vec<ScoreRow> {
    use Orientation::{Max, Min};
    let swt: Vec<Vec<f64>> = scores.iter().map(|s| vec![s.s, s.w, s.t_trim as f64]).collect();
    let sw: Vec<Vec<f64>> = scores.iter().map(|s| vec![s.s, s.w]).collect();
    let f_swt = pareto_front(&swt, &[Max, Max, Min]).expect("fixed dimensions");
    let f_sw = pareto_front(&sw, &[Max, Max]).expect("fixed dimensions");
    scores
        .into_iter()
        .zip(f_swt.into_iter().zip(f_sw))
        .map(|(score, (pareto_swt, pareto_sw))| ScoreRow { score, pareto_swt, pareto_sw })
        .collect()
}

/// Designs on any of the three fronts.
pub fn pareto_csv(rows: &[ScoreRow]) -> String {
    let scores: Vec<DesignScore> = rows.iter().map(|r| r.score.clone()).collect();
    let by_trim = pareto_by_trim_count(&scores);
    let mut out = String::from("design_id,s,w,t_trim,roi,pareto_swt,pareto_sw,pareto_by_trim_count\n");
    for (r, t) in rows.iter().zip(by_trim) {
        if r.pareto_swt || r.pareto_sw || t {
            let s = &r.score;
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.6},{},{},{}\n",
                s.design_id,
                s.s,
                s.w,
                s.t_trim,
                s.roi,
                u8::from(r.pareto_swt),
                u8::from(r.pareto_sw),
                u8::from(t)
            ));
        }
    }
    out
}
