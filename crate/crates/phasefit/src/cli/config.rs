//! Flat `key = value` run configuration with section-prefixed keys
//! (`sampler.s1 = 5.0`). Unknown keys are rejected so typos fail loudly.

use super::CliError;
use crate::fbst::FbstSettings;
use crate::model::GridMode;
use crate::projection::{LikelihoodSettings, MassConstraint};
use crate::sampler::{InputOptions, SamplerSettings};
use crate::synth::ToyDfKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// What the invocation should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fit chains to a data file and persist traces, profiles and a summary.
    Run,
    /// Run the isotropy significance test against a fitted main chain.
    Fbst,
    /// Generate a synthetic data set from a toy model.
    Synth,
    /// Print human-readable tables from stored artifacts.
    Report,
}

/// Grid shape knobs (maps onto [`InputOptions`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub mode: GridMode,
    pub n_energy: usize,
    pub n_momentum: usize,
    pub n_radial: usize,
    pub r_max_factor: f64,
    pub depth_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let o = InputOptions::default();
        Self {
            mode: GridMode::Isotropic,
            n_energy: o.n_energy_bins,
            n_momentum: o.n_momentum_bins,
            n_radial: o.n_radial_bins,
            r_max_factor: o.r_max_factor,
            depth_factor: o.depth_factor,
        }
    }
}

/// Quadrature resolutions and the optional enclosed-mass constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    pub x3_nodes: usize,
    pub hermite_nodes: usize,
    pub v_plane_nodes: usize,
    pub mass_m0: Option<f64>,
    pub mass_delta_m0: Option<f64>,
    pub mass_radius: Option<f64>,
    pub mass_alpha: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        let s = LikelihoodSettings::default();
        Self {
            x3_nodes: s.x3_nodes(),
            hermite_nodes: s.hermite_nodes(),
            v_plane_nodes: s.v_plane_nodes(),
            mass_m0: None,
            mass_delta_m0: None,
            mass_radius: None,
            mass_alpha: 1.0,
        }
    }
}

impl LikelihoodConfig {
    pub fn to_settings(&self) -> Result<LikelihoodSettings, CliError> {
        let constraint = match (self.mass_m0, self.mass_delta_m0, self.mass_radius) {
            (None, None, None) => None,
            (Some(m0), Some(delta_m0), Some(radius)) => Some(MassConstraint {
                m0,
                delta_m0,
                radius,
                alpha: self.mass_alpha,
            }),
            _ => {
                return Err(CliError::Config(
                    "likelihood.mass_m0, likelihood.mass_delta_m0 and likelihood.mass_radius \
                     must be set together"
                        .into(),
                ))
            }
        };
        LikelihoodSettings::new(self.x3_nodes, self.hermite_nodes, self.v_plane_nodes, constraint)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Toy model, annulus plan and noise for `mode = synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub kind: ToyDfKind,
    /// Absolute DF velocity scale in km/s; when absent, `sigma_factor` times
    /// the test potential's velocity scale is used.
    pub sigma: Option<f64>,
    pub sigma_factor: f64,
    pub r_a: f64,
    pub noise_sigma: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Test potential scale: enclosed mass at `mass_radius`, and core radius.
    pub mass: f64,
    pub mass_radius: f64,
    pub core_radius: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: ToyDfKind::Gauss,
            sigma: None,
            sigma_factor: 0.45,
            r_a: 1.0,
            noise_sigma: 0.0,
            edges: vec![3.0, 6.0, 9.0],
            counts: vec![200, 200, 100],
            mass: 4.06e11,
            mass_radius: 8.7,
            core_radius: 2.0,
            seed: 1,
        }
    }
}

/// A parsed run configuration; every field beyond `mode` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub data: Option<PathBuf>,
    pub output: PathBuf,
    pub grid: GridConfig,
    pub likelihood: LikelihoodConfig,
    pub sampler: SamplerSettings,
    pub fbst: FbstSettings,
    pub synth: SynthConfig,
    /// Radius for reported enclosed masses; defaults to the constraint
    /// radius, or half the radial grid extent when no constraint is set.
    pub report_mass_radius: Option<f64>,
}

impl RunConfig {
    pub fn input_options(&self) -> Result<InputOptions, CliError> {
        Ok(InputOptions {
            n_energy_bins: self.grid.n_energy,
            n_momentum_bins: self.grid.n_momentum,
            n_radial_bins: self.grid.n_radial,
            r_max_factor: self.grid.r_max_factor,
            depth_factor: self.grid.depth_factor,
            likelihood: self.likelihood.to_settings()?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut mode = None;
        let mut cfg = Self {
            mode: Mode::Run,
            data: None,
            output: PathBuf::from("out"),
            grid: GridConfig::default(),
            likelihood: LikelihoodConfig::default(),
            sampler: SamplerSettings::default(),
            fbst: FbstSettings::default(),
            synth: SynthConfig::default(),
            report_mass_radius: None,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let n = i + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {n}: expected 'key = value', got '{line}'"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(CliError::Config(format!("line {n}: key '{key}' has no value")));
            }
            if key == "mode" {
                mode = Some(parse_mode(value, n)?);
            } else {
                cfg.set(key, value, n)?;
            }
        }
        cfg.mode = mode.ok_or_else(|| CliError::Config("missing required key: mode".into()))?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, n: usize) -> Result<(), CliError> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "output" => self.output = PathBuf::from(value),

            "grid.mode" => self.grid.mode = parse_grid_mode(value, n)?,
            "grid.n_energy" => self.grid.n_energy = num(key, value, n)?,
            "grid.n_momentum" => self.grid.n_momentum = num(key, value, n)?,
            "grid.n_radial" => self.grid.n_radial = num(key, value, n)?,
            "grid.r_max_factor" => self.grid.r_max_factor = num(key, value, n)?,
            "grid.depth_factor" => self.grid.depth_factor = num(key, value, n)?,

            "likelihood.x3_nodes" => self.likelihood.x3_nodes = num(key, value, n)?,
            "likelihood.hermite_nodes" => self.likelihood.hermite_nodes = num(key, value, n)?,
            "likelihood.v_plane_nodes" => self.likelihood.v_plane_nodes = num(key, value, n)?,
            "likelihood.mass_m0" => self.likelihood.mass_m0 = Some(num(key, value, n)?),
            "likelihood.mass_delta_m0" => {
                self.likelihood.mass_delta_m0 = Some(num(key, value, n)?)
            }
            "likelihood.mass_radius" => self.likelihood.mass_radius = Some(num(key, value, n)?),
            "likelihood.mass_alpha" => self.likelihood.mass_alpha = num(key, value, n)?,

            "sampler.s1" => self.sampler.s1 = num(key, value, n)?,
            "sampler.s2" => self.sampler.s2 = num(key, value, n)?,
            "sampler.t0" => self.sampler.t0 = num(key, value, n)?,
            "sampler.cooling" => self.sampler.cooling = num(key, value, n)?,
            "sampler.steps_per_temperature" => {
                self.sampler.steps_per_temperature = num(key, value, n)?
            }
            "sampler.total_steps" => self.sampler.total_steps = num(key, value, n)?,
            "sampler.seed" => self.sampler.seed = num(key, value, n)?,
            "sampler.n_chains" => self.sampler.n_chains = num(key, value, n)?,
            "sampler.data_fraction" => self.sampler.data_fraction = num(key, value, n)?,
            "sampler.burn_in" => self.sampler.burn_in = num(key, value, n)?,

            "fbst.n_resamples" => self.fbst.n_resamples = num(key, value, n)?,
            "fbst.sample_size" => self.fbst.sample_size = num(key, value, n)?,
            "fbst.steps_per_run" => self.fbst.steps_per_run = num(key, value, n)?,
            "fbst.seed" => self.fbst.seed = num(key, value, n)?,
            "fbst.noise_sigma" => self.fbst.noise_sigma = num(key, value, n)?,

            "synth.kind" => self.synth.kind = parse_kind(value, n)?,
            "synth.sigma" => self.synth.sigma = Some(num(key, value, n)?),
            "synth.sigma_factor" => self.synth.sigma_factor = num(key, value, n)?,
            "synth.r_a" => self.synth.r_a = num(key, value, n)?,
            "synth.noise_sigma" => self.synth.noise_sigma = num(key, value, n)?,
            "synth.edges" => self.synth.edges = list(key, value, n)?,
            "synth.counts" => self.synth.counts = list(key, value, n)?,
            "synth.mass" => self.synth.mass = num(key, value, n)?,
            "synth.mass_radius" => self.synth.mass_radius = num(key, value, n)?,
            "synth.core_radius" => self.synth.core_radius = num(key, value, n)?,
            "synth.seed" => self.synth.seed = num(key, value, n)?,

            "report.mass_radius" => self.report_mass_radius = Some(num(key, value, n)?),

            _ => {
                return Err(CliError::Config(format!("line {n}: unknown key '{key}'")));
            }
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str, n: usize) -> Result<T, CliError> {
    value.parse().map_err(|_| {
        CliError::Config(format!("line {n}: key '{key}': invalid number '{value}'"))
    })
}

fn list<T: std::str::FromStr>(key: &str, value: &str, n: usize) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|t| num(key, t.trim(), n))
        .collect()
}

fn parse_mode(value: &str, n: usize) -> Result<Mode, CliError> {
    match value {
        "run" => Ok(Mode::Run),
        "fbst" => Ok(Mode::Fbst),
        "synth" => Ok(Mode::Synth),
        "report" => Ok(Mode::Report),
        _ => Err(CliError::Config(format!(
            "line {n}: mode must be run|fbst|synth|report, got '{value}'"
        ))),
    }
}

fn parse_grid_mode(value: &str, n: usize) -> Result<GridMode, CliError> {
    match value {
        "isotropic" => Ok(GridMode::Isotropic),
        "two_integral" => Ok(GridMode::TwoIntegral),
        _ => Err(CliError::Config(format!(
            "line {n}: grid.mode must be isotropic|two_integral, got '{value}'"
        ))),
    }
}

fn parse_kind(value: &str, n: usize) -> Result<ToyDfKind, CliError> {
    match value {
        "gauss" => Ok(ToyDfKind::Gauss),
        "wd" => Ok(ToyDfKind::Wd),
        "michie" => Ok(ToyDfKind::Michie),
        _ => Err(CliError::Config(format!(
            "line {n}: synth.kind must be gauss|wd|michie, got '{value}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# full example
mode = run
data = obs.txt
output = results

grid.mode = two_integral
grid.n_energy = 12
grid.n_momentum = 5
grid.n_radial = 18
grid.r_max_factor = 1.4
grid.depth_factor = 1.8

likelihood.x3_nodes = 10
likelihood.hermite_nodes = 8
likelihood.v_plane_nodes = 24
likelihood.mass_m0 = 4.06e11
likelihood.mass_delta_m0 = 0.2e11
likelihood.mass_radius = 8.7
likelihood.mass_alpha = 1.0

sampler.s1 = 5.0
sampler.s2 = 9.0
sampler.t0 = 2.0
sampler.cooling = 0.85
sampler.steps_per_temperature = 40
sampler.total_steps = 1200
sampler.seed = 17
sampler.n_chains = 3
sampler.data_fraction = 0.8
sampler.burn_in = 0.25

fbst.n_resamples = 4
fbst.sample_size = 120
fbst.steps_per_run = 300
fbst.seed = 7
fbst.noise_sigma = 5.0

synth.kind = wd
synth.sigma = 420.0
synth.r_a = 2.5
synth.noise_sigma = 10.0
synth.edges = 3.0, 6.0, 9.0
synth.counts = 150, 100, 50
synth.seed = 3

report.mass_radius = 8.7
";

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(FULL).unwrap();
        assert_eq!(cfg.mode, Mode::Run);
        assert_eq!(cfg.data.as_deref(), Some(Path::new("obs.txt")));
        assert_eq!(cfg.output, PathBuf::from("results"));
        assert_eq!(cfg.grid.mode, GridMode::TwoIntegral);
        assert_eq!(cfg.grid.n_momentum, 5);
        assert_eq!(cfg.grid.depth_factor, 1.8);
        assert_eq!(cfg.sampler.s1, 5.0);
        assert_eq!(cfg.sampler.data_fraction, 0.8);
        assert_eq!(cfg.fbst.sample_size, 120);
        assert_eq!(cfg.synth.kind, ToyDfKind::Wd);
        assert_eq!(cfg.synth.edges, vec![3.0, 6.0, 9.0]);
        assert_eq!(cfg.synth.counts, vec![150, 100, 50]);
        assert_eq!(cfg.report_mass_radius, Some(8.7));

        let s = cfg.likelihood.to_settings().unwrap();
        let c = s.mass_constraint().unwrap();
        assert_eq!((c.m0, c.delta_m0, c.radius, c.alpha), (4.06e11, 0.2e11, 8.7, 1.0));
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = RunConfig::parse("mode = synth\n").unwrap();
        assert_eq!(cfg.mode, Mode::Synth);
        assert_eq!(cfg.output, PathBuf::from("out"));
        assert_eq!(cfg.sampler, SamplerSettings::default());
        assert!(cfg.likelihood.to_settings().unwrap().mass_constraint().is_none());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse(""), Err(CliError::Config(m)) if m.contains("mode")));
        let e = RunConfig::parse("mode = run\nsampler.s3 = 1\n").unwrap_err();
        assert!(matches!(e, CliError::Config(m) if m.contains("line 2") && m.contains("sampler.s3")));
        let e = RunConfig::parse("mode = run\nsampler.s1 = fast\n").unwrap_err();
        assert!(matches!(e, CliError::Config(m) if m.contains("invalid number 'fast'")));
        let e = RunConfig::parse("mode = fly\n").unwrap_err();
        assert!(matches!(e, CliError::Config(m) if m.contains("run|fbst|synth|report")));
        let e = RunConfig::parse("mode = run\nnoise\n").unwrap_err();
        assert!(matches!(e, CliError::Config(m) if m.contains("expected 'key = value'")));

        // Partial mass constraint is rejected when settings are built.
        let cfg = RunConfig::parse("mode = run\nlikelihood.mass_m0 = 1e11\n").unwrap();
        assert!(cfg.likelihood.to_settings().is_err());
    }

    #[test]
    fn config_echo_round_trips() {
        let cfg = RunConfig::parse(FULL).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
