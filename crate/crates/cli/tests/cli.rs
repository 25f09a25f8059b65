use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use recon_core::service::{BeaconClient, ClientConfig};

const SMALL: &str = "synthetic:donors=200,blocks=60,seed=3";

fn recon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recon"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_of(args: &[&str]) -> String {
    let out = recon(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn column<'a>(csv: &'a str, name: &str) -> Vec<&'a str> {
    let mut lines = csv.lines();
    let at = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines.map(|l| l.split(',').nth(at).unwrap()).collect()
}

#[test]
fn single_newcomer_sweep_is_exact_and_deterministic() {
    let args = [
        "sweep",
        "--population",
        SMALL,
        "--m",
        "1",
        "--trials",
        "4",
        "--seed",
        "9",
    ];
    let csv = stdout_of(&args);
    assert_eq!(csv.lines().count(), 5);
    assert!(column(&csv, "precision").iter().all(|p| *p == "1"));
    assert!(column(&csv, "recall").iter().all(|p| *p == "1"));
    assert!(column(&csv, "identification")
        .iter()
        .all(|p| *p == "oracle"));
    assert_eq!(stdout_of(&args), csv);
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    std::fs::write(&conf, "# shared setup\npopulation = synthetic:donors=200,blocks=60,seed=3\nattack = greedy\ntrials = 2\nm_prime = 2\n").unwrap();
    let csv = stdout_of(&["sweep", "--config", conf.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(csv.lines().count(), 4);
    assert!(column(&csv, "attack").iter().all(|a| *a == "greedy"));
    assert!(column(&csv, "m_prime").iter().all(|m| *m == "2"));

    std::fs::write(&conf, "colour = red\n").unwrap();
    assert!(!recon(&["sweep", "--config", conf.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn swept_axis_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, summary) = (dir.path().join("rows.csv"), dir.path().join("summary.csv"));
    stdout_of(&[
        "sweep",
        "--population",
        SMALL,
        "--vary",
        "m",
        "--values",
        "1,2",
        "--trials",
        "2",
        "--out",
        rows.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    let rows = std::fs::read_to_string(rows).unwrap();
    assert_eq!(column(&rows, "m"), ["1", "1", "2", "2"]);
    assert_eq!(std::fs::read_to_string(summary).unwrap().lines().count(), 3);
    assert!(!recon(&["sweep", "--vary", "m"]).status.success());
}

#[test]
fn chain_writes_a_power_curve() {
    let dir = tempfile::tempdir().unwrap();
    let b1 = dir.path().join("b1.txt");
    let b2 = dir.path().join("b2.txt");
    std::fs::write(&b1, (0..50).map(|i| format!("d{i}\n")).collect::<String>()).unwrap();
    std::fs::write(
        &b2,
        (50..110)
            .map(|i| format!("d{i}"))
            .collect::<Vec<_>>()
            .join(","),
    )
    .unwrap();
    let csv = stdout_of(&[
        "chain",
        "--population",
        "synthetic:donors=400,blocks=500,block_size=2",
        "--b1",
        b1.to_str().unwrap(),
        "--b2",
        b2.to_str().unwrap(),
        "--reps",
        "1",
        "--max-queries",
        "5",
    ]);
    assert_eq!(column(&csv, "queries"), ["1", "2", "3", "4", "5"]);
    let power: Vec<f64> = column(&csv, "power")
        .iter()
        .map(|p| p.parse().unwrap())
        .collect();
    assert!(power.iter().all(|p| (0.0..=1.0).contains(p)));

    std::fs::write(&b2, "d0\n").unwrap();
    let overlap = recon(&[
        "chain",
        "--population",
        SMALL,
        "--b1",
        b1.to_str().unwrap(),
        "--b2",
        b2.to_str().unwrap(),
    ]);
    assert!(!overlap.status.success());
}

#[test]
fn risk_reports_a_percentile() {
    let json = stdout_of(&[
        "risk",
        "--population",
        SMALL,
        "--donor",
        "d7",
        "--baseline-size",
        "8",
    ]);
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    let percentile = report["percentile"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&percentile));
    assert_eq!(report["baseline"].as_array().unwrap().len(), 8);
    assert!(
        !recon(&["risk", "--population", SMALL, "--donor", "nobody"])
            .status
            .success()
    );
    assert!(!recon(&[
        "risk",
        "--population",
        SMALL,
        "--donor",
        "d7",
        "--baseline-size",
        "0"
    ])
    .status
    .success());
}

#[test]
fn generated_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("pop.tsv");
    stdout_of(&[
        "generate",
        "--population",
        "synthetic:donors=120,blocks=30,traits=2",
        "--out",
        matrix.to_str().unwrap(),
    ]);
    for suffix in [".maf", ".pheno.tsv"] {
        assert!(Path::new(&format!("{}{suffix}", matrix.display())).exists());
    }
    let csv = stdout_of(&[
        "sweep",
        "--population",
        matrix.to_str().unwrap(),
        "--m",
        "1",
        "--trials",
        "2",
    ]);
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn serve_answers_queries() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_recon"))
        .args(["serve", "--bind", "127.0.0.1:0", "--dataset", SMALL])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap()
        .to_string();
    let meta = BeaconClient::new(addr.as_str(), ClientConfig::default())
        .unwrap()
        .meta();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(meta.unwrap().member_count, 200);
}
