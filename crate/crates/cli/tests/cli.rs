use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn caas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caas")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = caas(args);
    assert!(
        out.status.success(),
        "caas {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn desk() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios/desk.toml")
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn validate_reports_grid() {
    let out = ok(&["validate", &desk()]);
    assert!(out.contains("zones        20"), "{out}");
    assert!(out.contains("cells        240"), "{out}");
    let hash = out.lines().find(|l| l.starts_with("hash")).expect("hash line");
    assert_eq!(hash.split_whitespace().nth(1).unwrap().len(), 64);
}

#[test]
fn validate_rejects_missing_file() {
    let out = caas(&["validate", "/nonexistent/scenario.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn run_writes_outputs_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |o: &Path| {
        vec![
            "run".to_string(),
            desk(),
            "--policy".into(),
            "omdd".into(),
            "--fleet-size".into(),
            "10".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            s(o).into(),
        ]
    };
    let first = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    let second = ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(first, second);
    assert!(first.contains("omdd") && first.contains("seed    3"), "{first}");
    for f in ["summaries.jsonl", "metrics.csv", "zone_waits.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_rejects_depot_outside_city() {
    let out = caas(&["run", &desk(), "--depot", "20"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
}

#[test]
fn sweep_then_export_reproduces_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    let out = ok(&[
        "sweep",
        &desk(),
        "--fleet-size",
        "5",
        "--fleet-size",
        "10",
        "--seed",
        "1",
        "--seed",
        "2",
        "--threads",
        "2",
        "--out",
        s(&sweep),
    ]);
    assert_eq!(out.lines().count(), 2 * 3 * 2);
    let summaries = fs::read_to_string(sweep.join("summaries.jsonl")).unwrap();
    assert_eq!(summaries.lines().count(), 12);
    let manifest = fs::read_to_string(sweep.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"runs\": 12"), "{manifest}");

    let again = dir.path().join("again");
    ok(&["export", s(&sweep.join("summaries.jsonl")), "--out", s(&again)]);
    for f in ["metrics.csv", "zone_waits.csv", "manifest.json"] {
        assert_eq!(fs::read(sweep.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gen_synth_round_trips_through_every_storage() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for m in ["none", "inline", "csv"] {
        let path = dir.path().join(format!("{m}.toml"));
        ok(&[
            "gen-synth",
            "--zones",
            "6",
            "--hotspots",
            "2",
            "--hotspot-weight",
            "0.2",
            "--k",
            "0.5",
            "--ldev",
            "100",
            "--fleet-sizes",
            "2,4",
            "--seeds",
            "1,2",
            "--materialize",
            m,
            "--out",
            s(&path),
        ]);
        let v = ok(&["validate", s(&path)]);
        assert!(v.contains("zones        6") && v.contains("cells        12"), "{v}");
        let run = ok(&["run", s(&path), "--policy", "oml"]);
        assert!(run.contains("fleet    2"), "{run}");
        hashes.push(run.split("wait").nth(1).unwrap().to_string());
    }
    assert!(dir.path().join("csv_matrices/distance.csv").exists());
    // the same city gives the same run however it is stored
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
}

#[test]
fn depot_search_ranks_every_zone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    ok(&[
        "gen-synth", "--zones", "4", "--k", "0.5", "--ldev", "100", "--seeds", "1,2", "--out", s(&path),
    ]);
    let out_dir = dir.path().join("search");
    let out = ok(&[
        "depot-search",
        s(&path),
        "--policy",
        "oml",
        "--fleet-size",
        "3",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.starts_with("policy oml (fleet 3)"), "{out}");
    assert_eq!(out.lines().filter(|l| l.contains(". zone")).count(), 4);
    let csv = fs::read_to_string(out_dir.join("depot_ranking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(out_dir.join("depot_search.json").exists());
}
