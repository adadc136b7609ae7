use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jkoflow::profiles::ch_steady;
use jkoflow_cli::experiment::DIAGNOSTICS_HEADER;

fn jkoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jkoflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a CSV file that starts with a `#` comment line.
fn read_csv(path: &Path) -> (String, Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let body: String = lines.map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (comment, header, rows)
}

#[test]
fn run_writes_consistent_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = jkoflow(&["run", "saturation1d-small", "--out", path_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (comment, header, rows) = read_csv(&dir.path().join("diagnostics.csv"));
    assert!(comment.starts_with("# {"), "{comment}");
    let cfg: serde_json::Value = serde_json::from_str(&comment[2..]).unwrap();
    assert_eq!(cfg["preset"], "saturation1d-small");
    assert_eq!(header, DIAGNOSTICS_HEADER);
    assert_eq!(rows.len(), 101);

    let delta = 1e-5 * 8f64.sqrt();
    let m0 = rows[0][3];
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k as f64);
        assert!(row[4] >= -1e-12 && row[5] <= 1.0 + 1e-12, "bounds at step {k}");
        assert!((row[3] - m0).abs() <= k as f64 * delta * 8f64.sqrt(), "mass at step {k}");
        if k > 0 {
            let prev = rows[k - 1][2];
            assert!(row[2] <= prev + 1e-5 * (1.0 + prev.abs()), "energy at step {k}");
            assert!(row[6] >= 1.0);
        }
    }

    for step in [0, 25, 50, 75, 100] {
        let (_, header, snap) = read_csv(&dir.path().join(format!("snap_{step}.csv")));
        assert_eq!(header, ["x", "rho"]);
        assert_eq!(snap.len(), 100);
        assert!((snap[0][0] + 3.96).abs() < 1e-12);
    }
}

fn final_error(dir: &Path, steps: usize) -> f64 {
    let (_, _, snap) = read_csv(&dir.join(format!("snap_{steps}.csv")));
    let dx = snap[1][0] - snap[0][0];
    snap.iter()
        .map(|r| (r[1] - ch_steady(r[0], 0.1)).powi(2) * dx)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn refined_run_beats_the_coarse_one() {
    let coarse = tempfile::tempdir().unwrap();
    let fine = tempfile::tempdir().unwrap();
    for (dir, dx) in [(&coarse, "0.04"), (&fine, "0.02")] {
        let out = jkoflow(&["run", "ch1d-converge", "--dx", dx, "--out", path_arg(dir.path())]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (e_coarse, e_fine) = (final_error(coarse.path(), 1000), final_error(fine.path(), 1000));
    assert!(e_fine.is_finite() && e_fine < e_coarse, "{e_fine} vs {e_coarse}");
}

#[test]
fn converge_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = jkoflow(&[
        "converge",
        "ch1d-converge-small",
        "--dx-list",
        "0.1,0.05",
        "--out",
        path_arg(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dx,error,order");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(','));
    let order: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order.is_finite());
}

#[test]
fn seeded_runs_are_reproducible() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, seed) in dirs.iter().zip(["3", "3", "4"]) {
        let out = jkoflow(&[
            "run",
            "ch2d-separation-small",
            "--seed",
            seed,
            "--out",
            path_arg(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    // The comment line records the output directory, so compare the data only.
    let read = |i: usize| {
        let text = fs::read_to_string(dirs[i].path().join("diagnostics.csv")).unwrap();
        text.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(read(0), read(1));
    assert_ne!(read(0), read(2));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = dir.path().join("bad.toml");
    fs::write(&bad_key, "[solver]\nlamda = 2.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "no-such-preset"],
        vec!["run", "ch2d-separation-small", "--out", path_arg(&out_dir)],
        vec!["run", "ch1d-log-small", "--dx", "0.03"],
        vec!["run", "ch1d-log-small", "--config", path_arg(&bad_key)],
        vec!["converge", "saturation1d-small", "--dx-list", "0.08"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = jkoflow(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let err = String::from_utf8_lossy(&jkoflow(&["run", "ch1d-log-small", "--config", path_arg(&bad_key)]).stderr)
        .to_string();
    assert!(err.contains("lamda"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn help_and_proxcheck_succeed() {
    assert_eq!(jkoflow(&["--help"]).status.code(), Some(0));
    let out = jkoflow(&["proxcheck", "--count", "70", "--seed", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("failures = 0"));
}
