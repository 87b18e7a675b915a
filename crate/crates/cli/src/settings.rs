//! Resolution of the shared flags against an optional `key=value` config
//! file: an explicit flag wins, then the config file, then the built-in
//! default.

use std::fs;
use std::path::PathBuf;

use clap::ValueEnum;
use ehcap_core::numerics::QuadratureSpec;
use ehcap_core::solver::SolveOptions;

use crate::{CommonArgs, Failure};

/// Machine-readable output formats.
#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved run parameters.
#[derive(Clone, Debug)]
pub struct Settings {
    pub tol: f64,
    pub quad_points: usize,
    pub kmax: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub bits: bool,
    pub seed: u64,
}

/// Values read from a config file; all optional.
#[derive(Default)]
struct FileValues {
    tol: Option<f64>,
    quad_points: Option<usize>,
    kmax: Option<usize>,
    seed: Option<u64>,
}

fn parse_config(path: &PathBuf) -> Result<FileValues, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut values = FileValues::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| {
                Failure::Usage(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                ))
            })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| {
            Failure::Usage(format!("config key {key}: bad value {value:?} ({e})"))
        };
        match key {
            "tol" => values.tol = Some(value.parse().map_err(|e| bad(&e))?),
            "quad-points" => values.quad_points = Some(value.parse().map_err(|e| bad(&e))?),
            "kmax" => values.kmax = Some(value.parse().map_err(|e| bad(&e))?),
            "seed" => values.seed = Some(value.parse().map_err(|e| bad(&e))?),
            other => {
                return Err(Failure::Usage(format!("unknown config key {other:?}")));
            }
        }
    }
    Ok(values)
}

impl Settings {
    /// Resolve the shared flags: flag > config file > default.
    pub fn resolve(args: &CommonArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(path) => parse_config(path)?,
            None => FileValues::default(),
        };
        let settings = Settings {
            tol: args.tol.or(file.tol).unwrap_or(1e-6),
            quad_points: args.quad_points.or(file.quad_points).unwrap_or(32),
            kmax: args.kmax.or(file.kmax).unwrap_or(8),
            out: args.out.clone(),
            format: args.format,
            bits: args.bits,
            seed: args.seed.or(file.seed).unwrap_or(0),
        };
        if !(settings.tol > 0.0) {
            return Err(Failure::Usage(format!(
                "tol must be positive, got {}",
                settings.tol
            )));
        }
        if settings.kmax < 2 {
            return Err(Failure::Usage(format!(
                "kmax must be at least 2, got {}",
                settings.kmax
            )));
        }
        Ok(settings)
    }

    /// Quadrature spec with the resolved density and the default tail.
    pub fn quad(&self) -> QuadratureSpec {
        QuadratureSpec {
            points_per_unit: self.quad_points,
            ..QuadratureSpec::default()
        }
    }

    /// Solver options with the resolved tolerance and support cap.
    pub fn solve_options(&self) -> SolveOptions<f64> {
        SolveOptions {
            tol: self.tol,
            k_max: self.kmax,
            ..SolveOptions::default()
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn args() -> CommonArgs {
        CommonArgs {
            tol: None,
            quad_points: None,
            kmax: None,
            out: None,
            format: None,
            bits: false,
            seed: None,
            config: None,
        }
    }

    #[test]
    fn defaults_apply_without_config() {
        let settings = Settings::resolve(&args()).expect("defaults must resolve");
        assert!((settings.tol - 1e-6).abs() < 1e-18, "tol {}", settings.tol);
        assert_eq!(settings.quad_points, 32);
        assert_eq!(settings.kmax, 8);
        assert_eq!(settings.seed, 0);
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let mut file = tempfile::NamedTempFile::new().expect("temp file");
        writeln!(file, "# comment\ntol = 1e-4\nkmax = 5").expect("write config");
        let mut a = args();
        a.config = Some(file.path().to_path_buf());
        a.tol = Some(1e-3);
        let settings = Settings::resolve(&a).expect("config must resolve");
        assert!((settings.tol - 1e-3).abs() < 1e-15, "flag wins: {}", settings.tol);
        assert_eq!(settings.kmax, 5, "config wins over default");
        assert_eq!(settings.quad_points, 32, "default survives");
    }

    #[test]
    fn unknown_config_key_is_usage_error() {
        let mut file = tempfile::NamedTempFile::new().expect("temp file");
        writeln!(file, "tolerance = 1e-4").expect("write config");
        let mut a = args();
        a.config = Some(file.path().to_path_buf());
        match Settings::resolve(&a) {
            Err(Failure::Usage(msg)) => {
                assert!(msg.contains("tolerance"), "message names the key: {msg}");
            }
            other => panic!("expected usage failure, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_tol_rejected() {
        let mut a = args();
        a.tol = Some(0.0);
        assert!(matches!(Settings::resolve(&a), Err(Failure::Usage(_))));
    }
}
