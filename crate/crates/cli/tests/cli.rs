use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nkfeedback"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Header and numeric rows of a CSV file (non-numeric cells become NaN).
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn evolve_perfect_feedback_keeps_coherence() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["evolve", "--eta", "1", "--lambda", "1", "--theta", "1.5707963", "--t-final", "3"]);
    let (h, rows) = table(&dir.path().join("evolve.csv"));
    assert_eq!(h, ["t", "rx", "ry", "rz", "abs_rho01", "analytic_abs_rho01"]);
    let c = column(&h, "abs_rho01");
    assert_eq!(rows.len(), 3001);
    assert!(rows.iter().all(|r| (r[c] - 0.5).abs() < 1e-12));
}

#[test]
fn evolve_numeric_matches_analytic_column() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["evolve", "--eta", "0.3", "--lambda", "0.7", "--omega", "2", "--t-final", "2", "--out", "e.csv"]);
    let (h, rows) = table(&dir.path().join("e.csv"));
    let (a, b) = (column(&h, "abs_rho01"), column(&h, "analytic_abs_rho01"));
    assert!(rows.iter().all(|r| (r[a] - r[b]).abs() < 1e-8));
}

#[test]
fn evolve_zero_time_is_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["evolve", "--t-final", "0"]);
    let (_, rows) = table(&dir.path().join("evolve.csv"));
    assert_eq!(rows, vec![vec![0.0, 1.0, 0.0, 0.0, 0.5, 0.5]]);
}

#[test]
fn dissipative_evolve_has_no_analytic_column() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["evolve", "--kind", "dissipative", "--t-final", "0.5"]);
    let (h, _) = table(&dir.path().join("evolve.csv"));
    assert_eq!(h, ["t", "rx", "ry", "rz", "abs_rho01"]);
}

#[test]
fn trajectories_are_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "trajectories", "--n-traj", "300", "--seed", "9", "--sample-every", "100", "--dump", "2", "--out", "ens.csv",
    ];
    ok(dir.path(), &args);
    let first = std::fs::read(dir.path().join("ens.csv")).unwrap();
    let dump = std::fs::read(dir.path().join("ens_traj_1.csv")).unwrap();
    ok(dir.path(), &args);
    assert_eq!(first, std::fs::read(dir.path().join("ens.csv")).unwrap());
    assert_eq!(dump, std::fs::read(dir.path().join("ens_traj_1.csv")).unwrap());
    assert!(!dir.path().join("ens_traj_2.csv").exists());

    let (h, rows) = table(&dir.path().join("ens.csv"));
    let (lo, hi, exact) = (column(&h, "rx_lo"), column(&h, "rx_hi"), column(&h, "exact_rx"));
    assert_eq!(rows.len(), 11);
    let inside = rows.iter().filter(|r| r[lo] <= r[exact] && r[exact] <= r[hi]).count();
    assert!(inside >= 10, "{inside}/11 inside the 3 SE band");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ens_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["photocurrent"]["zero_mean_pass"], true);
    assert_eq!(summary["n_traj"], 300);
}

#[test]
fn fig2_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fig2", "--grid-eta", "0.05:0.95:19"]);
    let (h, rows) = table(&dir.path().join("fig2.csv"));
    assert_eq!(h, ["eta", "exact_bound", "approx_bound", "opt_t", "opt_lambda", "converged"]);
    assert_eq!(rows.len(), 19);
    assert!(rows.iter().all(|r| r[1] <= r[2] + 1e-12 && r[5] == 1.0));
    let quarter = rows.iter().find(|r| (r[0] - 0.25).abs() < 1e-12).unwrap();
    assert!((quarter[2] - 1.59726).abs() < 1e-4);

    let out = run(dir.path(), &["fig2", "--grid-eta", "0:1:11"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fig2_probe_count_divides_bounds() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fig2", "--grid-eta", "0.25:0.25:1", "--probes", "4"]);
    let (_, rows) = table(&dir.path().join("fig2.csv"));
    assert!((rows[0][2] - 1.59726 / 4.0).abs() < 1e-4);
}

#[test]
fn fig3_ordering_and_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fig3"]);
    let (h, rows) = table(&dir.path().join("fig3.csv"));
    assert_eq!(h, ["eta", "simultaneous", "independent", "converged"]);
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[1] <= r[2]));
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1] && w[1][2] <= w[0][2]));
    let half = &rows[4];
    assert!((half[1] - 3.177_964_831).abs() < 1e-6);
}

#[test]
fn qfi_scan_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "qfi-scan", "--grid-eta", "0.2:0.8:3", "--grid-lambda", "0:2:3", "--grid-theta", "0:6.283185307179586:9",
            "--grid-t", "0.5:1.5:2",
        ],
    );
    assert!(stdout.contains("0 flagged"), "{stdout}");
    let (h, rows) = table(&dir.path().join("qfi_scan.csv"));
    assert_eq!(rows.len(), 3 * 3 * 9 * 2);
    let (l, th, t, e) = (column(&h, "lambda"), column(&h, "theta"), column(&h, "t"), column(&h, "eta"));
    let cols = [column(&h, "qfi_closed"), column(&h, "qfi_spectral"), column(&h, "qfi_2x2")];
    for r in &rows {
        let scale = cols.iter().map(|&c| r[c].abs()).fold(1e-12, f64::max);
        assert!((r[cols[0]] - r[cols[1]]).abs() / scale < 1e-6);
        assert!((r[cols[0]] - r[cols[2]]).abs() / scale < 1e-6);
        if r[l] == 0.0 {
            assert!(cols.iter().all(|&c| r[c] == 0.0));
        }
    }
    // θ = π/2 is the best angle for each (η, λ > 0, t)
    for r in rows.iter().filter(|r| r[l] > 0.0) {
        let best = rows
            .iter()
            .filter(|q| q[e] == r[e] && q[l] == r[l] && q[t] == r[t])
            .max_by(|a, b| a[cols[0]].total_cmp(&b[cols[0]]))
            .unwrap();
        assert!((best[th] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"grid-eta": "0.2:0.6:3", "out": "from_config.csv", "probes": 2}"#,
    )
    .unwrap();
    ok(dir.path(), &["fig3", "--config", "run.json", "--grid-eta", "0.5:0.5:1"]);
    let (_, rows) = table(&dir.path().join("from_config.csv"));
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 3.177_964_831 / 2.0).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["evolve", "--eta", "1.5"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["evolve", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["evolve", "--config", "missing.json"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["fig2", "--grid-eta", "0.5:0.6:0"]).status.code(), Some(1));
    // RK4 at γ·dt ≫ 1 blows up
    let out = run(dir.path(), &["evolve", "--lambda", "100", "--dt", "0.1", "--t-final", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run(dir.path(), &["--help"]).status.success());
}
