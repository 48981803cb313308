//! Command-line dispatcher. Results go to files named by flags (or stdout
//! for the short answers of `count` and `rank`); diagnostics go to stderr.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowdse_core::dsm::{count_designs, design_by_id, find_design, Design};
use flowdse_core::evaluate::{
    parse_objectives, partition_compare, pareto_front, rank_by_objective, DesignScore, Objective,
    Predicate, RoiParams,
};
use flowdse_core::plant::{build_topology, derive_routings, PlantTopology, RoutingTable};
use flowdse_core::scenario::Scenario;
use flowdse_core::sim::{duration_sweep, run_simulation_with, SimObserver, SimParams};

use crate::explorer::{self, ExplorationConfig, Mode};
use crate::io::{self, RunConfig};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "flowdse", version, about = "Design-space exploration for flow-production lines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a design space matrix.
    ValidateDsm(ValidateArgs),
    /// Print the number of designs a matrix permits.
    Count(CountArgs),
    /// Write every design as `design_id,connections`.
    Enumerate(EnumerateArgs),
    /// Simulate one design under one scenario.
    SimulateOne(SimulateArgs),
    /// Enumerate, simulate and score designs.
    Explore(ExploreArgs),
    /// Replicate one design over several run durations.
    SweepDuration(SweepArgs),
    /// Label the Pareto front of a scores file.
    Pareto(ParetoArgs),
    /// Rank a scores file by one objective.
    Rank(RankArgs),
    /// Split designs by a predicate and compare fronts.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dsm: PathBuf,
    /// Also check module kinds and port names against a catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Write the matrix back out (`.csv` or `.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub dsm: PathBuf,
    /// Comma-separated modules left free; all other connections are fixed
    /// to `--base`.
    #[arg(long, value_delimiter = ',', requires = "base")]
    pub free_modules: Vec<String>,
    /// Wiring JSON of the design to hold fixed.
    #[arg(long)]
    pub base: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub dsm: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub limit: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub dsm: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub scenarios: PathBuf,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Position of the design in enumeration order.
    #[arg(long, conflicts_with = "design")]
    pub design_id: Option<u64>,
    /// Wiring JSON of the design.
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run-config JSON; the flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long)]
    pub warmup_s: Option<f64>,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    fn params(&self) -> Result<SimParams, Error> {
        let mut p = match &self.config {
            Some(path) => io::load_run_config(path)?,
            None => SimParams::default(),
        };
        if let Some(v) = self.duration_s {
            p.duration_s = v;
        }
        if let Some(v) = self.warmup_s {
            p.warmup_s = v;
        }
        if let Some(v) = self.reps {
            p.replications = v;
        }
        if let Some(v) = self.seed {
            p.global_seed = v;
        }
        p.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub scenario_id: u32,
    #[command(flatten)]
    pub run: RunArgs,
    /// Records CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of every strategy recomputation.
    #[arg(long)]
    pub strategy_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Sample,
    Satisfice,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: ModeArg,
    /// Sample size for `--mode sample`.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_s: Option<f64>,
    #[arg(long)]
    pub min_w: Option<f64>,
    #[arg(long)]
    pub min_roi: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub scenario_id: u32,
    #[arg(long, value_delimiter = ',', default_value = "400,800,1600,3200")]
    pub durations: Vec<f64>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// `name:max|min,...`
    #[arg(long, default_value = "s:max,w:max,t_trim:min")]
    pub objectives: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Scatter data: `design_id,s,w,t_trim,highlight`.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "roi")]
    pub objective: String,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Write the ranking here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// `trim_in_lane(k)`, `t_trim>=n` (also `>`, `<=`, `<`, `==`), `!p`.
    #[arg(long)]
    pub predicate: String,
    /// Maximised axes.
    #[arg(long, value_delimiter = ',', default_value = "s,w")]
    pub objectives: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(stdout, "{e}").map_err(|e| Error::Runtime(e.to_string()))?;
            return Ok(());
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    dispatch(cli.command, stdout)
}

fn out_err(e: std::io::Error) -> Error {
    Error::Runtime(e.to_string())
}

pub fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<(), Error> {
    match cmd {
        Command::ValidateDsm(a) => validate(a, stdout),
        Command::Count(a) => count(a, stdout),
        Command::Enumerate(a) => enumerate(a),
        Command::SimulateOne(a) => simulate_one(a),
        Command::Explore(a) => explore(a, stdout),
        Command::SweepDuration(a) => sweep(a),
        Command::Pareto(a) => pareto(a),
        Command::Rank(a) => rank(a, stdout),
        Command::Compare(a) => compare(a),
    }
}

fn validate(a: ValidateArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let dsm = io::load_dsm(&a.dsm)?;
    for w in dsm.warnings() {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.catalog {
        let catalog = io::load_catalog(path)?;
        io::check_catalog(&dsm, &catalog).map_err(|e| Error::invalid(path, e))?;
    }
    if let Some(out) = &a.out {
        let text = if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            io::dsm_to_csv(&dsm)
        } else {
            io::dsm_to_json(&dsm)
        };
        io::write_text(out, &text)?;
    }
    writeln!(
        stdout,
        "ok: {} outputs, {} inputs, {} allowed connections",
        dsm.outputs().len(),
        dsm.inputs().len(),
        dsm.entries().len()
    )
    .map_err(out_err)
}

fn count(a: CountArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let dsm = io::load_dsm(&a.dsm)?;
    let n = match &a.base {
        Some(base_path) => {
            let wiring = io::load_wiring(base_path)?;
            let base = find_design(&dsm, &wiring)
                .ok_or_else(|| Error::invalid(base_path, "wiring is not a design of this matrix"))?;
            let free: BTreeSet<String> = a.free_modules.iter().cloned().collect();
            count_designs(&dsm.restrict(&free, &base))
        }
        None => count_designs(&dsm),
    };
    writeln!(stdout, "{n}").map_err(out_err)
}

fn enumerate(a: EnumerateArgs) -> Result<(), Error> {
    let dsm = io::load_dsm(&a.dsm)?;
    let mut buf = Vec::new();
    let limit = a.limit.unwrap_or(u64::MAX);
    io::write_designs(&mut buf, &dsm, dsm.designs().take(limit as usize)).map_err(out_err)?;
    io::write_text(&a.out, std::str::from_utf8(&buf).expect("utf-8"))
}

struct Model {
    scenarios: Vec<Scenario>,
    design: Design,
    topology: PlantTopology,
    routing: RoutingTable,
}

fn load_model(m: &ModelArgs, d: &DesignArgs) -> Result<Model, Error> {
    let dsm = io::load_dsm(&m.dsm)?;
    let catalog = io::load_catalog(&m.catalog)?;
    io::check_catalog(&dsm, &catalog).map_err(|e| Error::invalid(&m.catalog, e))?;
    let scenarios = io::load_scenarios(&m.scenarios)?;
    let design = match (&d.design_id, &d.design) {
        (Some(id), None) => design_by_id(&dsm, *id)
            .ok_or_else(|| Error::Invalid(format!("design id {id} is out of range")))?,
        (None, Some(path)) => find_design(&dsm, &io::load_wiring(path)?)
            .ok_or_else(|| Error::invalid(path, "wiring is not a design of this matrix"))?,
        _ => return Err(Error::Usage("give exactly one of --design-id and --design".into())),
    };
    let topology = build_topology(&design.wiring(&dsm), &catalog)
        .map_err(|e| Error::Invalid(format!("design {}: {e}", design.id)))?;
    for w in &topology.warnings {
        eprintln!("warning: {w}");
    }
    let routing = derive_routings(&topology);
    Ok(Model { scenarios, design, topology, routing })
}

fn scenario(scenarios: &[Scenario], id: u32) -> Result<&Scenario, Error> {
    scenarios
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Invalid(format!("unknown scenario id {id}")))
}

#[derive(Default)]
struct StrategyLog {
    rows: Vec<[String; 6]>,
    recipes: Vec<flowdse_core::scenario::Recipe>,
}

impl SimObserver for StrategyLog {
    fn strategy(&mut self, time: f64, s: &flowdse_core::controller::ProductionStrategy) {
        self.rows.extend(io::strategy_rows(time, s, &self.recipes));
    }
}

fn simulate_one(a: SimulateArgs) -> Result<(), Error> {
    let model = load_model(&a.model, &a.design)?;
    let params = a.run.params()?;
    let sc = scenario(&model.scenarios, a.scenario_id)?;
    let mut records = Vec::new();
    let mut log = StrategyLog { rows: Vec::new(), recipes: sc.recipes.clone() };
    for r in 0..params.replications {
        let rec = run_simulation_with(
            &model.topology,
            &model.routing,
            sc,
            &params,
            model.design.id,
            r,
            &sc.flock,
            &mut log,
        )
        .map_err(|e| Error::Runtime(e.to_string()))?;
        records.push(rec);
    }
    io::write_text(&a.out, &io::records_csv(&records, params.measured_minutes()))?;
    if let Some(path) = &a.strategy_out {
        let mut text = String::from("time_s,lane,lo_g,hi_g,recipe_id,trim\n");
        for row in &log.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        io::write_text(path, &text)?;
    }
    Ok(())
}

fn explore(a: ExploreArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let params = a.run.params()?;
    let mode = match a.mode {
        ModeArg::Exhaustive => Mode::Exhaustive,
        ModeArg::Sample => Mode::Sample {
            k: a.k.ok_or_else(|| Error::Usage("--mode sample needs --k".into()))?,
        },
        ModeArg::Satisfice => {
            if a.min_s.is_none() && a.min_w.is_none() && a.min_roi.is_none() {
                return Err(Error::Usage("--mode satisfice needs --min-s, --min-w or --min-roi".into()));
            }
            Mode::Satisfice { min_s: a.min_s, min_w: a.min_w, min_roi: a.min_roi }
        }
    };
    let cfg = ExplorationConfig {
        dsm: a.model.dsm,
        catalog: a.model.catalog,
        scenarios: a.model.scenarios,
        run: RunConfig::from(&params),
        roi: RoiParams::default(),
        mode,
        workers: a.workers,
        out_dir: a.out,
        verbose: a.verbose,
    };
    let store = explorer::explore(&cfg)?;
    for (id, e) in &store.failed {
        eprintln!("design {id} failed: {e}");
    }
    writeln!(
        stdout,
        "{} designs scored, {} failed, {} evaluated in this pass",
        store.scores.len(),
        store.failed.len(),
        store.newly_evaluated
    )
    .map_err(out_err)?;
    if let Some(id) = store.satisficing {
        writeln!(stdout, "first satisfying design: {id}").map_err(out_err)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let model = load_model(&a.model, &a.design)?;
    let params = a.run.params()?;
    let sc = scenario(&model.scenarios, a.scenario_id)?;
    if a.durations.is_empty() || a.durations.iter().any(|&d| d <= params.warmup_s) {
        return Err(Error::Usage("durations must be nonempty and exceed the warm-up".into()));
    }
    let rows = duration_sweep(
        &model.topology,
        &model.routing,
        sc,
        &params,
        model.design.id,
        &a.durations,
        params.replications,
    )
    .map_err(|e| Error::Runtime(e.to_string()))?;
    io::write_text(&a.out, &io::sweep_csv(&rows))
}

fn load_scores(path: &Path) -> Result<Vec<DesignScore>, Error> {
    Ok(io::load_scores(path)?.into_iter().map(|r| r.score).collect())
}

fn pareto(a: ParetoArgs) -> Result<(), Error> {
    let scores = load_scores(&a.scores)?;
    let spec = parse_objectives(&a.objectives).map_err(|e| Error::Usage(e.to_string()))?;
    let (objs, orient): (Vec<Objective>, Vec<_>) = spec.into_iter().unzip();
    let points: Vec<Vec<f64>> = scores.iter().map(|s| objs.iter().map(|o| o.value(s)).collect()).collect();
    let labels = pareto_front(&points, &orient).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut text = String::from("design_id");
    for o in &objs {
        text.push(',');
        text.push_str(&o.to_string());
    }
    text.push_str(",is_pareto\n");
    for ((s, p), on) in scores.iter().zip(&points).zip(&labels) {
        text.push_str(&s.design_id.to_string());
        for v in p {
            text.push_str(&format!(",{v:.6}"));
        }
        text.push_str(if *on { ",1\n" } else { ",0\n" });
    }
    io::write_text(&a.out, &text)?;
    if let Some(plot) = &a.plot {
        let mut text = String::from("design_id,s,w,t_trim,highlight\n");
        for (s, on) in scores.iter().zip(&labels) {
            text.push_str(&format!("{},{:.6},{:.6},{},{}\n", s.design_id, s.s, s.w, s.t_trim, u8::from(*on)));
        }
        io::write_text(plot, &text)?;
    }
    Ok(())
}

fn rank(a: RankArgs, stdout: &mut dyn Write) -> Result<(), Error> {
    let scores = load_scores(&a.scores)?;
    let objective: Objective = a.objective.parse().map_err(|e: flowdse_core::evaluate::EvaluateError| Error::Usage(e.to_string()))?;
    let order = rank_by_objective(&scores, &objective);
    let mut text = format!("rank,design_id,{objective},s,w,t_trim,roi\n");
    for (n, &k) in order.iter().take(a.top).enumerate() {
        let s = &scores[k];
        text.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.6}\n",
            n + 1,
            s.design_id,
            objective.value(s),
            s.s,
            s.w,
            s.t_trim,
            s.roi
        ));
    }
    match &a.out {
        Some(path) => io::write_text(path, &text),
        None => stdout.write_all(text.as_bytes()).map_err(out_err),
    }
}

fn compare(a: CompareArgs) -> Result<(), Error> {
    let scores = load_scores(&a.scores)?;
    let predicate: Predicate = a.predicate.parse().map_err(|e: flowdse_core::evaluate::EvaluateError| Error::Usage(e.to_string()))?;
    let objectives: Vec<Objective> = a
        .objectives
        .iter()
        .map(|o| o.parse())
        .collect::<Result<_, _>>()
        .map_err(|e: flowdse_core::evaluate::EvaluateError| Error::Usage(e.to_string()))?;
    let rows = partition_compare(&scores, &predicate, &objectives);
    let mut text = String::from("design_id");
    for o in &objectives {
        text.push(',');
        text.push_str(&o.to_string());
    }
    text.push_str(",subset,subset_front,union_front\n");
    for (s, r) in scores.iter().zip(&rows) {
        text.push_str(&s.design_id.to_string());
        for o in &objectives {
            text.push_str(&format!(",{:.6}", o.value(s)));
        }
        text.push_str(&format!(
            ",{},{},{}\n",
            if r.in_subset { "match" } else { "other" },
            u8::from(r.subset_front),
            u8::from(r.union_front)
        ));
    }
    io::write_text(&a.out, &text)
}
