use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use nkfeedback::dynamics::ChannelKind;
use nkfeedback::optimize::linspace;
use serde::Deserialize;

use crate::CliError;

/// `start:stop:count`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected start:stop:count, got {s:?}"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("{v:?} is not a finite number"))
        };
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("{count:?} is not a non-negative integer"))?;
        if count == 0 {
            return Err("grid count must be at least 1".into());
        }
        Ok(Self::new(num(start)?, num(stop)?, count))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the JSON config,
/// then to the subcommand default.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    /// Detection efficiency η ∈ [0, 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Feedback gain λ
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Homodyne angle θ (radians)
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Qubit frequency ω
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Coupling: dephasing or dissipative
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every k-th step in time-series output
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Number of individual trajectories written to their own files
    #[arg(long)]
    pub dump: Option<usize>,
    /// Probe count N dividing every bound
    #[arg(long)]
    pub probes: Option<u64>,
    #[arg(long, value_name = "START:STOP:COUNT")]
    pub grid_eta: Option<Grid>,
    #[arg(long, value_name = "START:STOP:COUNT", allow_negative_numbers = true)]
    pub grid_lambda: Option<Grid>,
    #[arg(long, value_name = "START:STOP:COUNT", allow_negative_numbers = true)]
    pub grid_theta: Option<Grid>,
    #[arg(long, value_name = "START:STOP:COUNT")]
    pub grid_t: Option<Grid>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// JSON file whose keys mirror these flag names
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! prefer {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        Overrides {
            $($field: $flags.$field.or($file.$field),)*
            config: $flags.config,
        }
    };
}

impl Overrides {
    /// Merge with the config file named by `--config`, flags taking precedence.
    pub fn resolve(self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: Overrides = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let flags = self;
        Ok(prefer!(flags, file;
            eta, lambda, theta, omega, kind, t_final, dt, n_traj, seed, sample_every, dump, probes,
            grid_eta, grid_lambda, grid_theta, grid_t, out))
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ChannelKind,
    pub eta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub omega: f64,
    pub t_final: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub sample_every: usize,
    pub dump: usize,
    pub probes: u64,
    pub grid_eta: Grid,
    pub grid_lambda: Grid,
    pub grid_theta: Grid,
    pub grid_t: Grid,
    pub out: PathBuf,
}

/// Per-subcommand fallbacks for the settings that differ between them.
pub struct Defaults {
    pub dt: f64,
    pub grid_eta: Grid,
    pub out: &'static str,
}

impl RunConfig {
    pub fn build(o: Overrides, d: Defaults) -> Result<Self, CliError> {
        let o = o.resolve()?;
        let kind = match o.kind.as_deref() {
            None => ChannelKind::Dephasing,
            Some(k) => k.parse().map_err(|e: nkfeedback::Error| CliError::Config(e.to_string()))?,
        };
        let n_traj = o.n_traj.unwrap_or(100);
        let cfg = Self {
            kind,
            eta: o.eta.unwrap_or(0.5),
            lambda: o.lambda.unwrap_or(1.0),
            theta: o.theta.unwrap_or(FRAC_PI_2),
            omega: o.omega.unwrap_or(0.0),
            t_final: o.t_final.unwrap_or(1.0),
            dt: o.dt.unwrap_or(d.dt),
            n_traj,
            seed: o.seed.unwrap_or(0),
            sample_every: o.sample_every.unwrap_or(1),
            dump: o.dump.unwrap_or(n_traj.min(3)),
            probes: o.probes.unwrap_or(1),
            grid_eta: o.grid_eta.unwrap_or(d.grid_eta),
            grid_lambda: o.grid_lambda.unwrap_or(Grid::new(0.0, 2.0, 5)),
            grid_theta: o.grid_theta.unwrap_or(Grid::new(0.0, PI, 5)),
            grid_t: o.grid_t.unwrap_or(Grid::new(0.5, 2.0, 4)),
            out: o.out.unwrap_or_else(|| PathBuf::from(d.out)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        for (name, v) in [
            ("eta", self.eta),
            ("lambda", self.lambda),
            ("theta", self.theta),
            ("omega", self.omega),
            ("t-final", self.t_final),
            ("dt", self.dt),
        ] {
            if !v.is_finite() {
                return bad(format!("--{name} must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("--eta must lie in [0, 1], got {}", self.eta));
        }
        if self.t_final < 0.0 {
            return bad(format!("--t-final must be non-negative, got {}", self.t_final));
        }
        if self.dt <= 0.0 {
            return bad(format!("--dt must be positive, got {}", self.dt));
        }
        if self.n_traj == 0 {
            return bad("--n-traj must be at least 1".into());
        }
        if self.sample_every == 0 {
            return bad("--sample-every must be at least 1".into());
        }
        if self.probes == 0 {
            return bad("--probes must be at least 1".into());
        }
        if self.out.as_os_str().is_empty() {
            return bad("--out must not be empty".into());
        }
        Ok(())
    }

    /// η grid restricted to the open interval (0, 1).
    pub fn open_eta_grid(&self) -> Result<Vec<f64>, CliError> {
        let etas = self.grid_eta.points();
        match etas.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            Some(e) => Err(CliError::Config(format!(
                "--grid-eta points must lie strictly inside (0, 1), got {e}"
            ))),
            None => Ok(etas),
        }
    }

    /// `out` with `suffix` appended to its file stem, keeping the extension.
    pub fn sibling(&self, suffix: &str, ext: &str) -> PathBuf {
        sibling(&self.out, suffix, ext)
    }
}

pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults {
            dt: 1e-3,
            grid_eta: Grid::new(0.1, 0.9, 9),
            out: "out.csv",
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("0.05:0.95:19".parse::<Grid>().unwrap(), Grid::new(0.05, 0.95, 19));
        assert_eq!("-1:1:3".parse::<Grid>().unwrap().points(), vec![-1.0, 0.0, 1.0]);
        assert!("0:1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("a:1:2".parse::<Grid>().is_err());
        assert!("0:inf:2".parse::<Grid>().is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"eta": 0.3, "lambda": 2.0, "grid-eta": "0.2:0.4:3", "t-final": 4}"#).unwrap();
        let o = Overrides {
            eta: Some(0.7),
            config: Some(path),
            ..Default::default()
        };
        let cfg = RunConfig::build(o, defaults()).unwrap();
        assert_eq!(cfg.eta, 0.7);
        assert_eq!(cfg.lambda, 2.0);
        assert_eq!(cfg.t_final, 4.0);
        assert_eq!(cfg.grid_eta, Grid::new(0.2, 0.4, 3));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"etaa": 0.3}"#).unwrap();
        let o = Overrides {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(RunConfig::build(o, defaults()), Err(CliError::Config(_))));
    }

    #[test]
    fn range_checks() {
        let with = |o: Overrides| RunConfig::build(o, defaults());
        assert!(with(Overrides { eta: Some(1.2), ..Default::default() }).is_err());
        assert!(with(Overrides { dt: Some(0.0), ..Default::default() }).is_err());
        assert!(with(Overrides { n_traj: Some(0), ..Default::default() }).is_err());
        assert!(with(Overrides { kind: Some("amplitude".into()), ..Default::default() }).is_err());
        let cfg = with(Overrides { grid_eta: Some(Grid::new(0.0, 0.5, 3)), ..Default::default() }).unwrap();
        assert!(cfg.open_eta_grid().is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("runs/ens.csv"), "_traj_0", "csv"), PathBuf::from("runs/ens_traj_0.csv"));
        assert_eq!(sibling(Path::new("ens"), "_summary", "json"), PathBuf::from("ens_summary.json"));
    }
}
