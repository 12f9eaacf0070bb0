use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nkfeedback::dynamics::{evolve_analytic_dephasing, evolve_numeric, ChannelKind, EvolutionSpec, FeedbackChannel};
use nkfeedback::estimation::{probe_family, qfi_eta_closed, scan_eta_bounds, scan_simultaneous, ETA};
use nkfeedback::fisher::{qfi_2d, qfi_mixed_eigen};
use nkfeedback::qubit::DensityMatrix;
use nkfeedback::trajectories::{ensemble_stats_sampled, simulate_trajectory};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        // adding +0 turns −0 into +0
        format!("{:.15e}", x + 0.0)
    }
}

struct Csv {
    w: BufWriter<File>,
}

impl Csv {
    fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut csv = Self { w: BufWriter::new(file) };
        csv.line(path, &header.join(","))?;
        Ok(csv)
    }

    fn line(&mut self, path: &Path, line: &str) -> Result<(), CliError> {
        writeln!(self.w, "{line}").map_err(|e| CliError::io(path, e))
    }

    fn row(&mut self, path: &Path, cells: &[String]) -> Result<(), CliError> {
        self.line(path, &cells.join(","))
    }

    fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.w.flush().map_err(|e| CliError::io(path, e))
    }
}

fn channel(cfg: &RunConfig) -> Result<FeedbackChannel, CliError> {
    Ok(FeedbackChannel::new(cfg.kind, cfg.eta, cfg.lambda, cfg.theta, cfg.omega)?)
}

fn keep(step: usize, last: usize, every: usize) -> bool {
    step.is_multiple_of(every) || step == last
}

pub fn evolve(cfg: &RunConfig) -> Result<(), CliError> {
    let ch = channel(cfg)?;
    let evo = evolve_numeric(&EvolutionSpec::new(ch, DensityMatrix::plus(), cfg.t_final, cfg.dt)?)?;
    let dephasing = cfg.kind == ChannelKind::Dephasing;

    let mut header = vec!["t", "rx", "ry", "rz", "abs_rho01"];
    if dephasing {
        header.push("analytic_abs_rho01");
    }
    let mut csv = Csv::create(&cfg.out, &header)?;
    let last = evo.states.len() - 1;
    let mut max_dev = 0.0f64;
    for (k, (&t, s)) in evo.times.iter().zip(&evo.states).enumerate() {
        let r = s.to_bloch();
        let coh = s.coherence().norm();
        let mut cells = vec![num(t), num(r.x), num(r.y), num(r.z), num(coh)];
        if dephasing {
            let exact = evolve_analytic_dephasing(&ch, t)?.coherence().norm();
            max_dev = max_dev.max((coh - exact).abs());
            cells.push(num(exact));
        }
        if keep(k, last, cfg.sample_every) {
            csv.row(&cfg.out, &cells)?;
        }
    }
    csv.finish(&cfg.out)?;
    if dephasing {
        println!("evolve: {} steps, max |numeric - analytic| |rho01| = {max_dev:.3e}", last);
    } else {
        println!("evolve: {} steps", last);
    }
    Ok(())
}

pub fn trajectories(cfg: &RunConfig) -> Result<(), CliError> {
    let ch = channel(cfg)?;
    let plus = DensityMatrix::plus();
    let spec = EvolutionSpec::new(ch, plus, cfg.t_final, cfg.dt)?;
    let reference = evolve_numeric(&spec)?;
    let h = if spec.steps() == 0 { 0.0 } else { cfg.t_final / spec.steps() as f64 };

    let dumps: Vec<_> = (0..cfg.dump.min(cfg.n_traj) as u64)
        .into_par_iter()
        .map(|i| simulate_trajectory(&ch, &plus, cfg.t_final, cfg.dt, cfg.seed.wrapping_add(i)))
        .collect::<Result<_, _>>()?;
    for (i, rec) in dumps.iter().enumerate() {
        let path = cfg.sibling(&format!("_traj_{i}"), "csv");
        rec.write_csv(&path).map_err(|e| CliError::io(&path, e))?;
    }

    let stats = ensemble_stats_sampled(&ch, &plus, cfg.t_final, cfg.dt, cfg.n_traj, cfg.seed, cfg.sample_every)?;
    let mut csv = Csv::create(
        &cfg.out,
        &[
            "t", "rx", "ry", "rz", "rx_lo", "rx_hi", "ry_lo", "ry_hi", "rz_lo", "rz_hi", "exact_rx", "exact_ry",
            "exact_rz",
        ],
    )?;
    let mut inside = 0usize;
    for ((&t, m), se) in stats.times.iter().zip(&stats.mean).zip(&stats.std_err) {
        let step = if h == 0.0 { 0 } else { (t / h).round() as usize };
        let exact = reference.states[step].to_bloch().as_array();
        let m = m.as_array();
        let mut cells = vec![num(t), num(m[0]), num(m[1]), num(m[2])];
        let mut ok = true;
        for c in 0..3 {
            cells.push(num(m[c] - 3.0 * se[c]));
            cells.push(num(m[c] + 3.0 * se[c]));
            ok &= (m[c] - exact[c]).abs() <= 3.0 * se[c] + 1e-12;
        }
        cells.extend(exact.iter().copied().map(num));
        inside += ok as usize;
        csv.row(&cfg.out, &cells)?;
    }
    csv.finish(&cfg.out)?;

    let pc = stats.photocurrent;
    let summary = json!({
        "kind": format!("{:?}", cfg.kind).to_lowercase(),
        "eta": cfg.eta,
        "lambda": cfg.lambda,
        "theta": cfg.theta,
        "omega": cfg.omega,
        "t_final": cfg.t_final,
        "dt": cfg.dt,
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "within_3se_fraction": inside as f64 / stats.times.len() as f64,
        "min_eigenvalue": stats.min_eigenvalue,
        "photocurrent": {
            "samples": pc.samples,
            "mean": pc.mean,
            "std_err": pc.std_err(),
            "mean_signal": pc.mean_signal,
            "corr_bloch": pc.corr_bloch,
            "zero_mean_pass": pc.zero_mean(3.0),
            "uncorrelated_pass": pc.uncorrelated(3.0),
        },
    });
    let path = cfg.sibling("_summary", "json");
    let text = serde_json::to_string_pretty(&summary).expect("summary is plain JSON");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    println!(
        "trajectories: {} runs, {}/{} samples within 3 SE of the master equation, photocurrent zero-mean {}",
        cfg.n_traj,
        inside,
        stats.times.len(),
        if pc.zero_mean(3.0) { "PASS" } else { "FAIL" }
    );
    Ok(())
}

pub fn fig2(cfg: &RunConfig) -> Result<(), CliError> {
    let etas = cfg.open_eta_grid()?;
    let n = cfg.probes as f64;
    let mut csv = Csv::create(&cfg.out, &["eta", "exact_bound", "approx_bound", "opt_t", "opt_lambda", "converged"])?;
    let mut sandwich = true;
    for (eta, row) in etas.iter().zip(scan_eta_bounds(&etas)) {
        let cells = match row {
            Ok((exact, approx)) => {
                sandwich &= exact.bound_value <= approx.bound_value + 1e-12;
                vec![
                    num(*eta),
                    num(exact.bound_value / n),
                    num(approx.bound_value / n),
                    num(exact.optimal_t),
                    num(exact.optimal_lambda),
                    (exact.converged as u8).to_string(),
                ]
            }
            Err(e) => {
                eprintln!("fig2: eta = {eta}: {e}");
                vec![num(*eta), num(f64::NAN), num(f64::NAN), num(f64::NAN), num(f64::NAN), "0".into()]
            }
        };
        csv.row(&cfg.out, &cells)?;
    }
    csv.finish(&cfg.out)?;
    println!("fig2: {} rows, exact <= approx on every row: {sandwich}", etas.len());
    Ok(())
}

pub fn fig3(cfg: &RunConfig) -> Result<(), CliError> {
    let etas = cfg.open_eta_grid()?;
    let n = cfg.probes as f64;
    let mut csv = Csv::create(&cfg.out, &["eta", "simultaneous", "independent", "converged"])?;
    let mut ordered = true;
    for (eta, row) in etas.iter().zip(scan_simultaneous(&etas)) {
        let cells = match row {
            Ok(r) => {
                ordered &= r.simultaneous_bound <= r.independent_bound;
                vec![
                    num(*eta),
                    num(r.simultaneous_bound / n),
                    num(r.independent_bound / n),
                    (r.converged as u8).to_string(),
                ]
            }
            Err(e) => {
                eprintln!("fig3: eta = {eta}: {e}");
                vec![num(*eta), num(f64::NAN), num(f64::NAN), "0".into()]
            }
        };
        csv.row(&cfg.out, &cells)?;
    }
    csv.finish(&cfg.out)?;
    println!("fig3: {} rows, simultaneous <= independent on every row: {ordered}", etas.len());
    Ok(())
}

struct QfiRow {
    point: [f64; 4],
    values: [f64; 3],
    flag: String,
}

fn qfi_row(eta: f64, lambda: f64, theta: f64, t: f64) -> QfiRow {
    let mut values = [f64::NAN; 3];
    let mut flags = Vec::new();
    match qfi_eta_closed(eta, lambda, theta, t) {
        Ok(v) => values[0] = v,
        Err(e) => flags.push(format!("closed: {e}")),
    }
    match probe_family(0.0, eta, lambda, theta, t) {
        Ok(fam) => {
            match qfi_mixed_eigen(&fam, ETA) {
                Ok(v) => values[1] = v,
                Err(e) => flags.push(format!("spectral: {e}")),
            }
            match qfi_2d(&fam, ETA) {
                Ok(v) => values[2] = v,
                Err(e) => flags.push(format!("2x2: {e}")),
            }
        }
        Err(e) => flags.push(e.to_string()),
    }
    let flag = if flags.is_empty() {
        "ok".to_string()
    } else {
        // keep the CSV single-field
        format!("\"{}\"", flags.join("; ").replace('"', "'"))
    };
    QfiRow {
        point: [eta, lambda, theta, t],
        values,
        flag,
    }
}

/// Relative deviation; values below 1e-12 count as zero (sinθ round-off at θ = π).
fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub fn qfi_scan(cfg: &RunConfig) -> Result<(), CliError> {
    let etas = cfg.open_eta_grid()?;
    let lambdas = cfg.grid_lambda.points();
    let thetas = cfg.grid_theta.points();
    let times = cfg.grid_t.points();
    if let Some(t) = times.iter().find(|&&t| !(t > 0.0)) {
        return Err(CliError::Config(format!("--grid-t points must be positive, got {t}")));
    }

    let mut points = Vec::with_capacity(etas.len() * lambdas.len() * thetas.len() * times.len());
    for &eta in &etas {
        for &lambda in &lambdas {
            for &theta in &thetas {
                for &t in &times {
                    points.push((eta, lambda, theta, t));
                }
            }
        }
    }
    let rows: Vec<QfiRow> = points.par_iter().map(|&(e, l, th, t)| qfi_row(e, l, th, t)).collect();

    let mut csv = Csv::create(
        &cfg.out,
        &["eta", "lambda", "theta", "t", "qfi_closed", "qfi_spectral", "qfi_2x2", "flag"],
    )?;
    let mut max_dev = 0.0f64;
    let mut flagged = 0usize;
    for r in &rows {
        let mut cells: Vec<String> = r.point.iter().chain(&r.values).copied().map(num).collect();
        cells.push(r.flag.clone());
        csv.row(&cfg.out, &cells)?;
        if r.flag == "ok" {
            let [a, b, c] = r.values;
            max_dev = max_dev.max(rel_dev(a, b)).max(rel_dev(a, c)).max(rel_dev(b, c));
        } else {
            flagged += 1;
        }
    }
    csv.finish(&cfg.out)?;
    println!(
        "qfi-scan: {} rows, {flagged} flagged, max pairwise relative deviation {max_dev:.3e}",
        rows.len()
    );
    Ok(())
}
