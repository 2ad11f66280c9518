//! Run configuration: TOML file, then command-line overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use psipi::imaging::PortPair;
use psipi::interferometer::NoiseLaw;
use psipi::Statistics;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TwoMode,
    Multimode,
    Herzog,
    NoiseSweep,
    Reconstruct,
    Verify,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::TwoMode => "two-mode",
            Self::Multimode => "multimode",
            Self::Herzog => "herzog",
            Self::NoiseSweep => "noise-sweep",
            Self::Reconstruct => "reconstruct",
            Self::Verify => "verify",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StatisticsSpec {
    #[default]
    Boson,
    Fermion,
}

impl From<StatisticsSpec> for Statistics {
    fn from(s: StatisticsSpec) -> Self {
        match s {
            StatisticsSpec::Boson => Statistics::Boson,
            StatisticsSpec::Fermion => Statistics::Fermion,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKindSpec {
    #[default]
    Quadratic1d,
    Cubic2d,
    LinearRamp,
    File,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    #[default]
    Delta,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Phases {
    pub phi_s: f64,
    pub phi_s_prime: f64,
    pub gamma_i: f64,
    pub gamma_i_prime: f64,
    pub scan_points: usize,
}

impl Default for Phases {
    fn default() -> Self {
        Self { phi_s: 0.0, phi_s_prime: 0.0, gamma_i: 0.0, gamma_i_prime: 0.0, scan_points: 64 }
    }
}

/// `ny` absent means a 1D grid. Both absent picks 64 px (1D) or 32×32 (2D)
/// from the object kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectSpec {
    pub kind: ObjectKindSpec,
    /// Multiplier on the shape; absent means the object spans 6π.
    pub scale: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSpec {
    pub model: CorrelationKind,
    /// Gaussian width in pixels.
    pub sigma: f64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        Self { model: CorrelationKind::Delta, sigma: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Frame-noise amplitudes for `noise-sweep`; empty means 0..π in 9 steps.
    pub amplitudes: Vec<f64>,
    pub frames: usize,
    pub law: NoiseLaw,
    pub subtract_background: bool,
    /// Expected shot-noise counts for imaging maps; absent means noiseless.
    pub total_counts: Option<u64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { amplitudes: Vec::new(), frames: 10_000, law: NoiseLaw::Uniform, subtract_background: false, total_counts: None }
    }
}

impl NoiseSpec {
    pub fn amplitude_list(&self) -> Vec<f64> {
        if self.amplitudes.is_empty() {
            (0..9).map(|i| PI * i as f64 / 8.0).collect()
        } else {
            self.amplitudes.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSpec {
    pub map: Option<PathBuf>,
    /// Ground truth; defaults to `object.grid` next to the map when present.
    pub truth: Option<PathBuf>,
    /// Reference pixel; defaults to the grid centre.
    pub reference: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub out: PathBuf,
    pub statistics: StatisticsSpec,
    pub gain: f64,
    pub ports: PortPair,
    pub phases: Phases,
    pub grid: GridSpec,
    pub object: ObjectSpec,
    pub correlation: CorrelationSpec,
    pub noise: NoiseSpec,
    pub reconstruct: ReconstructSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            out: PathBuf::from("psipi-out"),
            statistics: StatisticsSpec::Boson,
            gain: psipi::spdc::DEFAULT_GAIN,
            ports: PortPair::BB,
            phases: Phases::default(),
            grid: GridSpec::default(),
            object: ObjectSpec::default(),
            correlation: CorrelationSpec::default(),
            noise: NoiseSpec::default(),
            reconstruct: ReconstructSpec::default(),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        CliError::Config { message: e.message().trim().to_string(), line: Some(line), column: Some(column) }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Grid shape for an imaging run.
    pub fn grid_shape(&self) -> (usize, Option<usize>) {
        match (self.grid.nx, self.grid.ny) {
            (Some(nx), ny) => (nx, ny),
            (None, Some(ny)) => (ny, Some(ny)),
            (None, None) => match self.object.kind {
                ObjectKindSpec::Cubic2d => (32, Some(32)),
                _ => (64, None),
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let Some(exp) = self.experiment else {
            return Err(CliError::config("no experiment selected"));
        };
        if !(self.gain.is_finite() && self.gain > 0.0 && self.gain < 1.0) {
            return Err(CliError::config("gain must lie in (0, 1)"));
        }
        let p = &self.phases;
        if ![p.phi_s, p.phi_s_prime, p.gamma_i, p.gamma_i_prime].iter().all(|v| v.is_finite()) {
            return Err(CliError::config("phases must be finite"));
        }
        match exp {
            Experiment::TwoMode if p.scan_points < 2 => {
                return Err(CliError::config("phases.scan_points must be at least 2"));
            }
            Experiment::Multimode | Experiment::Herzog => {
                let (nx, ny) = self.grid_shape();
                if nx == 0 || ny == Some(0) {
                    return Err(CliError::config("grid dimensions must be positive"));
                }
                match self.object.kind {
                    ObjectKindSpec::Quadratic1d if ny.is_some() => {
                        return Err(CliError::config("object quadratic1d needs a 1D grid (omit grid.ny)"));
                    }
                    ObjectKindSpec::Cubic2d if ny.is_none() => {
                        return Err(CliError::config("object cubic2d needs a 2D grid (set grid.ny)"));
                    }
                    ObjectKindSpec::File if self.object.path.is_none() => {
                        return Err(CliError::config("object kind `file` needs object.path"));
                    }
                    _ => {}
                }
                if let Some(s) = self.object.scale {
                    if !s.is_finite() {
                        return Err(CliError::config("object.scale must be finite"));
                    }
                }
                if self.correlation.model == CorrelationKind::Gaussian && !(self.correlation.sigma > 0.0) {
                    return Err(CliError::config("correlation.sigma must be positive"));
                }
                if self.noise.total_counts == Some(0) {
                    return Err(CliError::config("noise.total_counts must be positive"));
                }
            }
            Experiment::NoiseSweep => {
                if self.noise.frames == 0 {
                    return Err(CliError::config("noise.frames must be positive"));
                }
                if self.noise.amplitude_list().iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return Err(CliError::config("noise amplitudes must be finite and non-negative"));
                }
            }
            Experiment::Reconstruct if self.reconstruct.map.is_none() => {
                return Err(CliError::config("reconstruct needs a map (reconstruct.map or --map)"));
            }
            _ => {}
        }
        Ok(())
    }
}
