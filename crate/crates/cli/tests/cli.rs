use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invmatch"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A small synthetic corpus with an ingested split and trained factors.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        ok(&["synth", "--out", "corpus", "--seed", "7", "--investors", "30", "--companies", "45"], p);
        ok(&["ingest", "--corpus", "corpus", "--out", "split", "--seed", "7"], p);
        ok(&["train", "--corpus", "corpus", "--train", "split/train.tsv", "--out", "factors.bin"], p);
        Self { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn model_args(&self) -> Vec<&'static str> {
        vec!["--corpus", "corpus", "--train", "split/train.tsv", "--factors", "factors.bin"]
    }
}

fn dir_contents(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (PathBuf::from(path.file_name().unwrap()), fs::read(&path).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synth_twice_gives_identical_directories() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", "a", "--seed", "7"], dir.path());
    ok(&["synth", "--out", "b", "--seed", "7"], dir.path());
    let a = dir_contents(&dir.path().join("a"));
    assert_eq!(a.len(), 3);
    assert_eq!(a, dir_contents(&dir.path().join("b")));

    ok(&["synth", "--out", "c", "--seed", "8"], dir.path());
    assert_ne!(a, dir_contents(&dir.path().join("c")));
}

#[test]
fn recommend_top_25_is_sorted_descending() {
    let ws = Workspace::new();
    let links = fs::read_to_string(ws.path().join("corpus/links.tsv")).unwrap();
    let company = links.lines().next().unwrap().split('\t').nth(1).unwrap().to_string();
    let mut args = vec!["recommend"];
    args.extend(ws.model_args());
    args.extend(["--for-company", &company, "--top", "25"]);
    let out = ok(&args, ws.path());
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("rank\tid\tFS"));
    let scores: Vec<f64> = lines
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(!scores.is_empty() && scores.len() <= 25, "{} rows", scores.len());
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
}

#[test]
fn explain_after_score_matches_the_stored_breakdown() {
    let ws = Workspace::new();
    let mut args = vec!["score"];
    args.extend(ws.model_args());
    args.extend(["--pairs", "split/test_positive.tsv", "--out", "breakdowns.tsv"]);
    ok(&args, ws.path());
    let stored = fs::read_to_string(ws.path().join("breakdowns.tsv")).unwrap();

    for row in stored.lines().skip(1).take(10) {
        let f: Vec<&str> = row.split('\t').collect();
        let mut args = vec!["explain"];
        args.extend(ws.model_args());
        args.extend(["--investor", f[0], "--company", f[1], "--params-out", "params.tsv"]);
        let text = ok(&args, ws.path());
        assert!(text.contains(&format!("\"{}\"", f[0])));
        assert!(!text.contains("[param"));

        let params = fs::read_to_string(ws.path().join("params.tsv")).unwrap();
        let p: Vec<&str> = params.lines().nth(1).unwrap().split('\t').collect();
        let cbs: f64 = f[2].parse().unwrap();
        let cb: f64 = f[4].parse().unwrap();
        assert_eq!((p[0], p[1]), (f[0], f[1]));
        assert_eq!(p[4], f[3], "closest company");
        assert_eq!(p[5], format!("{cbs:.2}"));
        if p[7] == "full" {
            assert_eq!(p[2], f[5], "closest investor");
            assert_eq!(p[3], format!("{cb:.2}"));
        }
    }
}

#[test]
fn score_output_does_not_depend_on_jobs() {
    let ws = Workspace::new();
    for jobs in ["1", "4"] {
        let out = format!("all_{jobs}.tsv");
        let mut args = vec!["--jobs", jobs, "score"];
        args.extend(ws.model_args());
        args.extend(["--out", &out]);
        ok(&args, ws.path());
    }
    let one = fs::read(ws.path().join("all_1.tsv")).unwrap();
    assert_eq!(one, fs::read(ws.path().join("all_4.tsv")).unwrap());
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 1 + 30 * 45);
}

#[test]
fn stored_factors_and_on_the_fly_factors_score_the_same() {
    let ws = Workspace::new();
    let base = ["score", "--corpus", "corpus", "--train", "split/train.tsv", "--pairs", "split/test_negative.tsv"];
    let mut a = base.to_vec();
    a.extend(["--factors", "factors.bin", "--out", "stored.tsv"]);
    ok(&a, ws.path());
    let mut b = base.to_vec();
    b.extend(["--out", "fresh.tsv"]);
    ok(&b, ws.path());
    assert_eq!(
        fs::read(ws.path().join("stored.tsv")).unwrap(),
        fs::read(ws.path().join("fresh.tsv")).unwrap()
    );
}

#[test]
fn embedding_file_from_embed_reproduces_stub_scores() {
    let ws = Workspace::new();
    ok(&["embed", "--corpus", "corpus", "--out", "emb.tsv"], ws.path());
    let header = fs::read_to_string(ws.path().join("emb.tsv")).unwrap();
    assert!(header.starts_with("#dim=256\n"));
    let mut a = vec!["score"];
    a.extend(ws.model_args());
    a.extend(["--pairs", "split/test_positive.tsv", "--out", "stub.tsv"]);
    ok(&a, ws.path());
    let mut b = a.clone();
    b.truncate(b.len() - 1);
    b.extend(["file.tsv", "--embeddings", "emb.tsv"]);
    ok(&b, ws.path());
    let stub = fs::read_to_string(ws.path().join("stub.tsv")).unwrap();
    let file = fs::read_to_string(ws.path().join("file.tsv")).unwrap();
    // the file stores 8 decimals, so compare at the breakdown's precision loosely
    for (x, y) in stub.lines().skip(1).zip(file.lines().skip(1)) {
        let (fx, fy): (Vec<&str>, Vec<&str>) = (x.split('\t').collect(), y.split('\t').collect());
        let fs_x: f64 = fx[8].parse().unwrap();
        let fs_y: f64 = fy[8].parse().unwrap();
        assert!((fs_x - fs_y).abs() <= 1e-5, "{x}\n{y}");
    }
}

#[test]
fn ablate_emits_fifteen_rows() {
    let ws = Workspace::new();
    let out = ok(&["ablate", "--corpus", "corpus", "--split", "split"], ws.path());
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "features\tpositive_link_rate\tnegative_link_rate");
    assert_eq!(lines.len(), 16);
    assert!(lines[15].starts_with("funding_status+description+industry_focus+location\t"));
}

#[test]
fn evaluate_and_stability_write_reports() {
    let ws = Workspace::new();
    let out = ok(
        &["evaluate", "--corpus", "corpus", "--split", "split", "--report-out", "eval.json", "--histogram-out", "hist.tsv"],
        ws.path(),
    );
    assert!(out.starts_with("positive_link_rate\t"));
    let report = fs::read_to_string(ws.path().join("eval.json")).unwrap();
    assert!(report.contains("\"negative_link_rate\""));
    assert_eq!(fs::read_to_string(ws.path().join("hist.tsv")).unwrap().lines().count(), 21);

    let out = ok(
        &["stability", "--corpus", "corpus", "--samples", "3", "--investors-per-sample", "20", "--seed", "3"],
        ws.path(),
    );
    assert_eq!(out.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 3);
    assert!(out.contains("std_positive_rate\t"));
}

#[test]
fn help_lists_score_defaults() {
    let out = ok(&["score", "--help"], Path::new("."));
    for (flag, default) in [
        ("--w1", "0.5"),
        ("--w2", "0.5"),
        ("--w-cbs", "0.5"),
        ("--w-cb", "0.5"),
        ("--cb-thresh", "0.5"),
        ("--link-threshold", "0.75"),
    ] {
        let at = out.find(flag).unwrap_or_else(|| panic!("{flag} missing"));
        let section = &out[at..];
        let end = section[2..].find("\n  -").map_or(section.len(), |e| e + 2);
        assert!(section[..end].contains(&format!("[default: {default}]")), "{flag}");
    }
    let d = invmatch_defaults();
    assert_eq!(d, [0.5, 0.5, 0.5, 0.5, 0.5, 0.75]);
}

fn invmatch_defaults() -> [f64; 6] {
    let c = invmatch::ScoreConfig::default();
    [c.w1, c.w2, c.w_cbs, c.w_cb, c.cb_thresh, c.link_threshold]
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["synth", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["score", "--corpus", "c"], dir.path()).status.code(), Some(1));
    let missing = run(&["score", "--corpus", "missing", "--out", "x.tsv"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing"));

    ok(&["synth", "--out", "c", "--investors", "6", "--companies", "8"], dir.path());
    let unknown = run(&["recommend", "--corpus", "c", "--for-company", "no such company"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    let bad_weights = run(&["evaluate", "--corpus", "c", "--w1", "0.9"], dir.path());
    assert_eq!(bad_weights.status.code(), Some(1));
    assert_eq!(run(&["--jobs", "0", "synth", "--out", "d"], dir.path()).status.code(), Some(1));
}
