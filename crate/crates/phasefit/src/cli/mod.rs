//! Command-line driver: loads a key=value config file, runs one of four
//! modes (`synth`, `run`, `fbst`, `report`), and writes artifacts into the
//! output directory. Every run with the same config and seeds reproduces its
//! artifacts byte for byte.

pub mod artifacts;
pub mod config;
pub mod data;

use crate::fbst::{run_fbst, FbstError};
use crate::model::ModelError;
use crate::potential::{PotentialError, PotentialProfile};
use crate::projection::ProjectionError;
use crate::sampler::{
    gelman_rubin, log_enclosed_mass_scalar, run_chain, run_chains, uncertainty_envelope,
    ChainInputs, SamplerError,
};
use crate::synth::{draw_sample, AnnulusPlan, SynthError, TestPotential, ToyDf};
use config::{Mode, RunConfig};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors surfaced to the shell, sorted into the documented exit codes:
/// 2 for config problems, 3 for data problems, 4 for numerical failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidSettings(_) => CliError::Config(e.to_string()),
            SamplerError::InvalidData(_) => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FbstError> for CliError {
    fn from(e: FbstError) -> Self {
        match e {
            FbstError::InvalidSettings(_) => CliError::Config(e.to_string()),
            FbstError::Sampler(inner) => CliError::from(inner),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Top-level summary written by `run` mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_data: usize,
    pub n_chains: usize,
    pub best_chain: usize,
    pub best_step: usize,
    pub best_log_likelihood: f64,
    pub best_penalty: f64,
    pub best_penalized: f64,
    pub mass_radius: f64,
    pub best_enclosed_mass: f64,
    /// Gelman–Rubin statistic on log enclosed mass; `None` when fewer than
    /// two chains ran or the statistic is not finite (see `r_hat_note`).
    pub r_hat_log_mass: Option<f64>,
    pub r_hat_note: Option<String>,
    pub config: RunConfig,
}

/// Summary written by `fbst` mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceSummary {
    pub x: u64,
    pub y: u64,
    pub pr_t: f64,
    pub ev_standard: f64,
    pub theta_star_chain: usize,
    pub theta_star_step: usize,
    pub theta_star_per_datum: f64,
    pub resample_sizes: Vec<usize>,
    pub main_best_log_likelihood: f64,
    pub config: RunConfig,
}

/// Ground truth written next to synthetic data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSummary {
    pub kind: crate::synth::ToyDfKind,
    pub sigma: f64,
    pub r_a: f64,
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub core_radius: f64,
    pub mass: f64,
    pub mass_radius: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub seed: u64,
    pub n_data: usize,
}

/// Runs the configured mode. Artifacts land in `config.output`.
pub fn execute(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.output.display())))?;
    match config.mode {
        Mode::Synth => synth_mode(config),
        Mode::Run => run_mode(config),
        Mode::Fbst => fbst_mode(config),
        Mode::Report => report_mode(config),
    }
}

fn load_inputs(config: &RunConfig) -> Result<(Vec<crate::model::KinematicDatum>, ChainInputs), CliError> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("this mode requires 'data = <path>'".into()))?;
    let data = data::parse_data_file(path)?;
    let inputs = ChainInputs::from_data(&data, config.grid.mode, config.input_options()?)?;
    Ok((data, inputs))
}

/// Radius at which enclosed mass is reported: explicit `report.mass_radius`,
/// else the constraint radius, else half the radial extent of the grid.
fn report_radius(config: &RunConfig, inputs: &ChainInputs) -> f64 {
    config
        .report_mass_radius
        .or(config.likelihood.mass_radius)
        .unwrap_or_else(|| 0.5 * inputs.radial_grid.edges().last().copied().unwrap_or(1.0))
}

fn run_mode(config: &RunConfig) -> Result<(), CliError> {
    let (data, inputs) = load_inputs(config)?;
    let radius = report_radius(config, &inputs);
    let chains = run_chains(&data, &inputs, &config.sampler)?;

    for (i, chain) in chains.iter().enumerate() {
        let csv = artifacts::trace_csv(chain, radius)?;
        artifacts::write_atomic(&config.output.join(format!("trace_{i}.csv")), &csv)?;
    }

    let burn_in = config.sampler.burn_in;
    let (best_chain_idx, _) = chains
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.best().pll.penalized()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("run_chains returns at least one chain");
    let best_chain = &chains[best_chain_idx];
    let best = best_chain.best();

    let env = uncertainty_envelope(best_chain, burn_in)?;
    artifacts::write_atomic(
        &config.output.join("rho.csv"),
        &artifacts::rho_csv(inputs.radial_grid.edges(), &env),
    )?;
    artifacts::write_atomic(
        &config.output.join("f.csv"),
        &artifacts::f_csv(&inputs.phase_grid, &env),
    )?;

    let (r_hat, r_hat_note) = if chains.len() < 2 {
        (None, Some("single chain: no convergence diagnostic".to_string()))
    } else {
        match gelman_rubin(&chains, burn_in, log_enclosed_mass_scalar(radius)) {
            Ok(r) if r.is_finite() => (Some(r), None),
            Ok(r) => (None, Some(format!("R-hat not finite ({r})"))),
            Err(e) => (None, Some(format!("R-hat unavailable: {e}"))),
        }
    };

    let best_pot = PotentialProfile::from_density(&best.config.rho)?;
    let summary = RunSummary {
        n_data: data.len(),
        n_chains: chains.len(),
        best_chain: best_chain_idx,
        best_step: best.index,
        best_log_likelihood: best.pll.log_likelihood,
        best_penalty: best.pll.penalty,
        best_penalized: best.pll.penalized(),
        mass_radius: radius,
        best_enclosed_mass: best_pot.enclosed_mass(radius),
        r_hat_log_mass: r_hat,
        r_hat_note,
        config: config.clone(),
    };
    artifacts::write_json(&config.output.join("summary.json"), &summary)
}

fn fbst_mode(config: &RunConfig) -> Result<(), CliError> {
    let (data, inputs) = load_inputs(config)?;
    let radius = report_radius(config, &inputs);

    let main = run_chain(&data, &inputs, &config.sampler, config.sampler.seed)?;
    artifacts::write_atomic(
        &config.output.join("trace_main.csv"),
        &artifacts::trace_csv(&main, radius)?,
    )?;

    let outcome = run_fbst(&data, &inputs, &config.sampler, &config.fbst, &main)?;
    for (i, chain) in outcome.chains.iter().enumerate() {
        let csv = artifacts::trace_csv(chain, radius)?;
        artifacts::write_atomic(&config.output.join(format!("fbst_trace_{i}.csv")), &csv)?;
    }

    let summary = EvidenceSummary {
        x: outcome.report.x,
        y: outcome.report.y,
        pr_t: outcome.report.pr_t,
        ev_standard: outcome.report.ev_standard,
        theta_star_chain: outcome.theta_star.chain,
        theta_star_step: outcome.theta_star.step,
        theta_star_per_datum: outcome.theta_star.per_datum_posterior,
        resample_sizes: outcome.resample_sizes.clone(),
        main_best_log_likelihood: main.best().pll.log_likelihood,
        config: config.clone(),
    };
    artifacts::write_json(&config.output.join("evidence.json"), &summary)
}

fn synth_mode(config: &RunConfig) -> Result<(), CliError> {
    let s = &config.synth;
    let pot = TestPotential::with_enclosed_mass(s.mass, s.mass_radius, s.core_radius)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let sigma = s.sigma.unwrap_or(s.sigma_factor * pot.velocity_scale());
    let df = ToyDf::new(s.kind, sigma, s.r_a).map_err(|e| CliError::Config(e.to_string()))?;
    let plan = AnnulusPlan::new(s.edges.clone(), s.counts.clone())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
    let data = draw_sample(&df, &pot, &plan, s.noise_sigma, &mut rng)?;

    artifacts::write_atomic(&config.output.join("data.txt"), &data::render_data(&data))?;
    let truth = TruthSummary {
        kind: s.kind,
        sigma,
        r_a: s.r_a,
        noise_sigma: s.noise_sigma,
        amplitude: pot.amplitude,
        core_radius: pot.core_radius,
        mass: s.mass,
        mass_radius: s.mass_radius,
        edges: s.edges.clone(),
        counts: s.counts.clone(),
        seed: s.seed,
        n_data: data.len(),
    };
    artifacts::write_json(&config.output.join("truth.json"), &truth)
}

fn report_mode(config: &RunConfig) -> Result<(), CliError> {
    let dir = &config.output;
    let mut found = false;

    let summary_path = dir.join("summary.json");
    if summary_path.exists() {
        found = true;
        let v = read_json_value(&summary_path)?;
        println!("== Run summary ({}) ==", summary_path.display());
        print_kv("data count", v.get("n_data"));
        print_kv("chains", v.get("n_chains"));
        println!(
            "  {:<24}: {} / {}",
            "best chain / step",
            v.get("best_chain").map(fmt_value).unwrap_or_default(),
            v.get("best_step").map(fmt_value).unwrap_or_default()
        );
        print_kv("best log-likelihood", v.get("best_log_likelihood"));
        print_kv("penalty", v.get("best_penalty"));
        print_kv("penalized", v.get("best_penalized"));
        print_kv("mass radius [kpc]", v.get("mass_radius"));
        print_kv("enclosed mass [Msun]", v.get("best_enclosed_mass"));
        print_kv("R-hat(log M)", v.get("r_hat_log_mass"));
        if let Some(note) = v.get("r_hat_note").and_then(|n| n.as_str()) {
            println!("  note: {note}");
        }
        println!();
    }

    let evidence_path = dir.join("evidence.json");
    if evidence_path.exists() {
        found = true;
        let v = read_json_value(&evidence_path)?;
        println!("== Isotropy test ({}) ==", evidence_path.display());
        print_kv("tangent set count X", v.get("x"));
        print_kv("retained steps Y", v.get("y"));
        print_kv("pr_t = X/Y", v.get("pr_t"));
        print_kv("ev_standard = 1 - X/Y", v.get("ev_standard"));
        print_kv("theta* per-datum value", v.get("theta_star_per_datum"));
        println!();
    }

    let truth_path = dir.join("truth.json");
    if truth_path.exists() {
        found = true;
        let v = read_json_value(&truth_path)?;
        println!("== Synthetic truth ({}) ==", truth_path.display());
        print_kv("kind", v.get("kind"));
        print_kv("sigma [km/s]", v.get("sigma"));
        print_kv("noise sigma [km/s]", v.get("noise_sigma"));
        print_kv("enclosed mass [Msun]", v.get("mass"));
        print_kv("at radius [kpc]", v.get("mass_radius"));
        print_kv("data count", v.get("n_data"));
        println!();
    }

    let rho_path = dir.join("rho.csv");
    if rho_path.exists() {
        found = true;
        let (header, rows) = artifacts::read_csv(&rho_path)?;
        println!("== Density profile ({}) ==", rho_path.display());
        print_table(&header, &rows);
        println!();
    }

    let f_path = dir.join("f.csv");
    if f_path.exists() {
        found = true;
        let (header, rows) = artifacts::read_csv(&f_path)?;
        println!("== Distribution function ({}) ==", f_path.display());
        print_table(&header, &rows);
        println!();
    }

    if !found {
        return Err(CliError::Data(format!(
            "no artifacts found in {}",
            dir.display()
        )));
    }
    Ok(())
}

fn read_json_value(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: invalid JSON: {e}", path.display())))
}

fn fmt_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x}"),
            Some(x) => format!("{x:.6e}"),
            None => n.to_string(),
        },
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => "-".to_string(),
        other => other.to_string(),
    }
}

fn print_kv(label: &str, value: Option<&serde_json::Value>) {
    if let Some(v) = value {
        println!("  {label:<24}: {}", fmt_value(v));
    }
}

fn print_table(header: &[String], rows: &[Vec<f64>]) {
    let head: Vec<String> = header.iter().map(|h| format!("{h:>14}")).collect();
    println!("  {}", head.join(" "));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>14.6e}")).collect();
        println!("  {}", cells.join(" "));
    }
}

/// Convenience used by `main` and the end-to-end tests: parse a config file
/// and execute it.
pub fn run_config_file(path: &PathBuf) -> Result<(), CliError> {
    let config = RunConfig::from_file(path)?;
    execute(&config)
}
