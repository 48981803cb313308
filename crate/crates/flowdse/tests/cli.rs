use std::fs;
use std::path::{Path, PathBuf};

use flowdse::cli;
use flowdse::io;
use flowdse::Error;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn run(args: &[&str]) -> Result<String, Error> {
    let mut out = Vec::new();
    cli::run(std::iter::once("flowdse").chain(args.iter().copied()), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn explore_args(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = [
        "explore",
        "--dsm",
        &data("case_study_dsm.json"),
        "--catalog",
        &data("catalog.json"),
        "--scenarios",
        &data("scenarios.json"),
        "--duration-s",
        "300",
        "--warmup-s",
        "100",
        "--seed",
        "5",
        "--out",
        &out.display().to_string(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_owned(args: &[String]) -> Result<String, Error> {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn count_full_and_restricted() {
    assert_eq!(run(&["count", "--dsm", &data("case_study_dsm.json")]).unwrap().trim(), "11520");
    let restricted = run(&[
        "count",
        "--dsm",
        &data("case_study_dsm.json"),
        "--free-modules",
        "trim1,trim2,trim3,trim4,trim5",
        "--base",
        &data("current_design.json"),
    ])
    .unwrap();
    assert_eq!(restricted.trim(), "32");
}

#[test]
fn enumerate_writes_ids_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("designs.csv");
    run(&["enumerate", "--dsm", &data("case_study_dsm.json"), "--out", out.to_str().unwrap(), "--limit", "5"]).unwrap();
    let designs = io::read_designs(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(designs.iter().map(|d| d.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn simulate_one_writes_records() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("records.csv");
    let strat = tmp.path().join("strategy.csv");
    run(&[
        "simulate-one",
        "--dsm",
        &data("case_study_dsm.json"),
        "--catalog",
        &data("catalog.json"),
        "--scenarios",
        &data("scenarios.json"),
        "--design",
        &data("current_design.json"),
        "--scenario-id",
        "3",
        "--duration-s",
        "400",
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--strategy-out",
        strat.to_str().unwrap(),
    ])
    .unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&io::RECORD_HEADER.join(",")));
    // Two replications of four recipes plus the default row.
    assert_eq!(text.lines().count(), 1 + 2 * 5);
    assert!(fs::read_to_string(&strat).unwrap().lines().count() > 1);
}

#[test]
fn explore_resumes_after_torn_log() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let part = tmp.path().join("part");
    run_owned(&explore_args(&full, &["--mode", "sample", "--k", "6"])).unwrap();
    run_owned(&explore_args(&part, &["--mode", "sample", "--k", "6"])).unwrap();

    // Keep two complete entries and half of the third.
    let log = part.join("progress.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let torn = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
    fs::write(&log, torn).unwrap();
    fs::remove_file(part.join("scores.csv")).unwrap();

    run_owned(&explore_args(&part, &["--mode", "sample", "--k", "6"])).unwrap();
    for f in ["scores.csv", "pareto.csv", "records.csv"] {
        assert_eq!(fs::read_to_string(full.join(f)).unwrap(), fs::read_to_string(part.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 6);
}

#[test]
fn changed_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    run_owned(&explore_args(&out, &["--mode", "sample", "--k", "2"])).unwrap();
    let mut args = explore_args(&out, &["--mode", "sample", "--k", "2"]);
    let seed = args.iter().position(|a| a == "--seed").unwrap();
    args[seed + 1] = "6".into();
    let err = run_owned(&args).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn satisfice_stops_at_first_design() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    let said = run_owned(&explore_args(&out, &["--mode", "satisfice", "--min-s", "0"])).unwrap();
    assert!(said.contains("first satisfying design: 0"), "{said}");
    let scores = io::load_scores(&out.join("scores.csv")).unwrap();
    assert_eq!(scores.len(), 1);
}

#[test]
fn rank_pareto_and_compare_on_a_store() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    run_owned(&explore_args(&out, &["--mode", "sample", "--k", "8"])).unwrap();
    let scores_path = out.join("scores.csv");
    let scores = io::load_scores(&scores_path).unwrap();
    let best = scores
        .iter()
        .max_by(|a, b| a.score.roi.total_cmp(&b.score.roi).then(b.score.design_id.cmp(&a.score.design_id)))
        .unwrap();
    let s = scores_path.to_str().unwrap();
    let ranked = run(&["rank", "--scores", s, "--top", "1"]).unwrap();
    let row: Vec<&str> = ranked.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[1], best.score.design_id.to_string());

    let pareto: PathBuf = tmp.path().join("front.csv");
    run(&["pareto", "--scores", s, "--objectives", "s:max,w:max", "--out", pareto.to_str().unwrap()]).unwrap();
    let text = fs::read_to_string(&pareto).unwrap();
    assert!(text.lines().count() > 1);

    let cmp = tmp.path().join("compare.csv");
    run(&["compare", "--scores", s, "--predicate", "t_trim>=1", "--out", cmp.to_str().unwrap()]).unwrap();
    assert_eq!(fs::read_to_string(&cmp).unwrap().lines().count(), 1 + scores.len());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["count"]).unwrap_err().exit_code(), 2);
    assert_eq!(run(&["count", "--dsm", "/nonexistent/dsm.json"]).unwrap_err().exit_code(), 3);
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["count", "--dsm", bad.to_str().unwrap()]).unwrap_err().exit_code(), 3);
    let blocked = tmp.path().join("file");
    fs::write(&blocked, "").unwrap();
    let err = run(&[
        "enumerate",
        "--dsm",
        &data("case_study_dsm.json"),
        "--out",
        blocked.join("x.csv").to_str().unwrap(),
        "--limit",
        "1",
    ])
    .unwrap_err();
    assert_eq!(err.exit_code(), 4);
}
