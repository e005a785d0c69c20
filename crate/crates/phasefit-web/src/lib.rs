//! Browser demo bindings: a small JSON-string API over the core library,
//! wrapped with wasm-bindgen when compiled for `wasm32`. Three operations:
//!
//! 1. [`synthesize`] draws a synthetic line-of-sight sample from a toy
//!    distribution function in the demo potential.
//! 2. [`DemoInference::new`] prepares an annealed fit on such a sample.
//! 3. [`DemoInference::step_batch`] advances the chain a few proposals at a
//!    time and reports the current state, so a page can animate the fit.
//!
//! Everything crosses the boundary as JSON strings; the same functions are
//! unit-tested natively.

use phasefit::model::{Configuration, GridMode, KinematicDatum};
use phasefit::potential::PotentialProfile;
use phasefit::projection::{
    penalized_log_likelihood, window_volumes, LikelihoodSettings, MassConstraint,
    PenalizedLogLikelihood,
};
use phasefit::sampler::{
    mh_step, propose_density_scale, propose_density_shape, propose_df, ChainInputs, InputOptions,
    SamplerSettings,
};
use phasefit::synth::{draw_sample, AnnulusPlan, TestPotential, ToyDf, ToyDfKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Parameters for [`synthesize`]; every field has a default, so `{}` works.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Toy DF family: "gauss" (isotropic), "wd" or "michie" (radially biased).
    pub kind: ToyDfKind,
    /// Total number of observed stars, split over four projected annuli.
    pub n: usize,
    pub seed: u64,
    /// Measurement noise added to each line-of-sight velocity, km/s.
    pub noise_sigma: f64,
    /// DF velocity scale as a fraction of the demo potential's scale.
    pub sigma_factor: f64,
    /// Anisotropy radius for the anisotropic families, kpc.
    pub r_a: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            kind: ToyDfKind::Gauss,
            n: 240,
            seed: 1,
            noise_sigma: 0.0,
            sigma_factor: 0.45,
            r_a: 1.0,
        }
    }
}

/// The synthetic sample plus the ground truth a page may want to overlay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSample {
    /// Observed points as (projected radius kpc, LOS velocity km/s).
    pub data: Vec<[f64; 2]>,
    pub noise_sigma: f64,
    /// DF velocity scale actually used, km/s.
    pub sigma: f64,
    /// True enclosed mass at `mass_radius`, solar masses.
    pub truth_mass: f64,
    pub mass_radius: f64,
    /// True density curve as (r, rho) pairs for overlay plots.
    pub truth_rho: Vec<[f64; 2]>,
    /// Per-annulus LOS velocity dispersion of the sample: (r_mid, sigma_p).
    pub dispersion: Vec<[f64; 2]>,
}

const MASS: f64 = 4.06e11;
const MASS_RADIUS: f64 = 8.7;
const CORE_RADIUS: f64 = 2.0;
const ANNULUS_EDGES: [f64; 4] = [2.0, 5.0, 8.0, 11.0];

/// Draws a synthetic kinematic sample from a toy DF in the demo potential.
pub fn synthesize(params_json: &str) -> Result<String, String> {
    let p: SynthParams = serde_json::from_str(params_json)
        .map_err(|e| format!("invalid synthesize parameters: {e}"))?;
    if p.n < 8 {
        return Err("need at least 8 points".into());
    }
    let pot = TestPotential::with_enclosed_mass(MASS, MASS_RADIUS, CORE_RADIUS)
        .map_err(|e| e.to_string())?;
    let sigma = p.sigma_factor * pot.velocity_scale();
    let df = ToyDf::new(p.kind, sigma, p.r_a).map_err(|e| e.to_string())?;
    // One shell spanning the whole aperture: the sample follows the DF's own
    // projected profile, which is what the fit's likelihood assumes.
    let aperture = *ANNULUS_EDGES.last().unwrap();
    let plan = AnnulusPlan::new(vec![aperture], vec![p.n]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let drawn = draw_sample(&df, &pot, &plan, p.noise_sigma, &mut rng).map_err(|e| e.to_string())?;

    let mut dispersion = Vec::new();
    let mut shell_edges = vec![0.0];
    shell_edges.extend_from_slice(&ANNULUS_EDGES);
    for w in shell_edges.windows(2) {
        let vs: Vec<f64> = drawn
            .iter()
            .filter(|d| d.r_p >= w[0] && d.r_p < w[1])
            .map(|d| d.v3)
            .collect();
        if vs.len() > 1 {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vs.len() - 1) as f64;
            dispersion.push([0.5 * (w[0] + w[1]), var.sqrt()]);
        }
    }

    let truth_rho = (1..=60)
        .map(|k| {
            let r = 12.0 * k as f64 / 60.0;
            [r, pot.density(r)]
        })
        .collect();

    let sample = SyntheticSample {
        data: drawn.iter().map(|d| [d.r_p, d.v3]).collect(),
        noise_sigma: p.noise_sigma,
        sigma,
        truth_mass: pot.enclosed_mass(MASS_RADIUS),
        mass_radius: MASS_RADIUS,
        truth_rho,
        dispersion,
    };
    serde_json::to_string(&sample).map_err(|e| e.to_string())
}

/// Fit parameters for [`DemoInference::new`]; `{}` uses the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitParams {
    pub n_energy: usize,
    pub n_radial: usize,
    pub total_steps: usize,
    pub seed: u64,
    /// When true, the enclosed-mass constraint anchors the fit to the truth
    /// mass carried by the sample.
    pub constraint: bool,
}

impl Default for FitParams {
    fn default() -> Self {
        Self { n_energy: 8, n_radial: 10, total_steps: 1200, seed: 7, constraint: false }
    }
}

/// State report returned by every [`DemoInference::step_batch`] call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub total_steps: usize,
    pub done: bool,
    pub temperature: f64,
    pub log_likelihood: f64,
    pub penalty: f64,
    pub penalized: f64,
    pub best_penalized: f64,
    /// Acceptance fraction over the proposals of this batch.
    pub batch_acceptance: f64,
    /// Current enclosed mass at `mass_radius`, solar masses.
    pub enclosed_mass: f64,
    pub mass_radius: f64,
    /// Current density histogram as (r_lo, r_hi, rho) triples.
    pub rho: Vec<[f64; 3]>,
}

/// An annealed Metropolis-Hastings fit advanced a few proposals at a time.
/// Mirrors the library's chain loop step for step, assembled from the same
/// public proposal, potential, likelihood and acceptance kernels.
pub struct DemoInference {
    data: Vec<KinematicDatum>,
    inputs: ChainInputs,
    settings: SamplerSettings,
    rng: ChaCha8Rng,
    current: Configuration,
    pll: PenalizedLogLikelihood,
    best_penalized: f64,
    step: usize,
    mass_radius: f64,
}

impl DemoInference {
    /// Builds a fit from a [`SyntheticSample`] JSON and a [`FitParams`] JSON.
    pub fn new(sample_json: &str, params_json: &str) -> Result<Self, String> {
        let sample: SyntheticSample =
            serde_json::from_str(sample_json).map_err(|e| format!("invalid sample: {e}"))?;
        let p: FitParams =
            serde_json::from_str(params_json).map_err(|e| format!("invalid fit parameters: {e}"))?;
        let data: Vec<KinematicDatum> = sample
            .data
            .iter()
            .map(|[r_p, v3]| KinematicDatum { r_p: *r_p, v3: *v3, sigma_v3: sample.noise_sigma })
            .collect();

        let constraint = p.constraint.then_some(MassConstraint {
            m0: sample.truth_mass,
            delta_m0: 0.05 * sample.truth_mass,
            radius: sample.mass_radius,
            alpha: 1.0,
        });
        let options = InputOptions {
            n_energy_bins: p.n_energy,
            n_momentum_bins: 1,
            n_radial_bins: p.n_radial,
            r_max_factor: 1.5,
            depth_factor: 2.0,
            likelihood: LikelihoodSettings::new(12, 8, 32, constraint)
                .map_err(|e| e.to_string())?,
        };
        let inputs =
            ChainInputs::from_data(&data, GridMode::Isotropic, options).map_err(|e| e.to_string())?;
        let settings = SamplerSettings {
            total_steps: p.total_steps,
            n_chains: 1,
            seed: p.seed,
            ..SamplerSettings::default()
        };
        settings.validate().map_err(|e| e.to_string())?;

        let pot = PotentialProfile::from_density(&inputs.seed_configuration.rho)
            .map_err(|e| e.to_string())?;
        let vols = window_volumes(&inputs.phase_grid, &pot, inputs.aperture);
        let df0 = inputs.seed_configuration.df.normalized(&vols).map_err(|e| e.to_string())?;
        let mut current = Configuration::new(df0, inputs.seed_configuration.rho.clone());
        let pll = penalized_log_likelihood(&data, &current, &pot, &inputs.likelihood);
        if !pll.log_likelihood.is_finite() {
            return Err("seed configuration has no support on the data".into());
        }
        current.log_likelihood = Some(pll.penalized());

        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(p.seed),
            best_penalized: pll.penalized(),
            mass_radius: sample.mass_radius,
            data,
            inputs,
            settings,
            current,
            pll,
            step: 0,
        })
    }

    /// Advances up to `k` proposals (stopping at the configured total) and
    /// returns the state as a [`StepReport`] JSON string.
    pub fn step_batch(&mut self, k: usize) -> Result<String, String> {
        let s = self.settings.clone();
        let end = self.settings.total_steps.min(self.step + k.max(1));
        let mut batch = 0usize;
        let mut batch_accepted = 0usize;
        let mut temperature =
            s.t0 * s.cooling.powi((self.step / s.steps_per_temperature) as i32);
        while self.step < end {
            temperature = s.t0 * s.cooling.powi((self.step / s.steps_per_temperature) as i32);
            let rho_p = propose_density_scale(
                &propose_density_shape(&self.current.rho, s.s1, &mut self.rng),
                s.s2,
                &mut self.rng,
            );
            let pot_p = PotentialProfile::from_density(&rho_p).map_err(|e| e.to_string())?;
            let vols_p = window_volumes(&self.inputs.phase_grid, &pot_p, self.inputs.aperture);
            let proposal = propose_df(&self.current.df, s.s1, s.s2, &mut self.rng, &vols_p)
                .ok()
                .map(|df_p| {
                    let mut c = Configuration::new(df_p, rho_p);
                    let pll = penalized_log_likelihood(&self.data, &c, &pot_p, &self.inputs.likelihood);
                    c.log_likelihood = Some(pll.penalized());
                    (c, pll)
                });
            if let Some((config_p, pll_p)) = proposal {
                let (next, accepted) = mh_step(&self.current, config_p, temperature, &mut self.rng);
                if accepted {
                    self.current = next;
                    self.pll = pll_p;
                    self.best_penalized = self.best_penalized.max(self.pll.penalized());
                    batch_accepted += 1;
                }
            }
            self.step += 1;
            batch += 1;
        }

        let pot = PotentialProfile::from_density(&self.current.rho).map_err(|e| e.to_string())?;
        let edges = self.inputs.radial_grid.edges();
        let rho = self
            .current
            .rho
            .values()
            .iter()
            .enumerate()
            .map(|(q, &v)| [edges[q], edges[q + 1], v])
            .collect();
        let report = StepReport {
            step: self.step,
            total_steps: self.settings.total_steps,
            done: self.step >= self.settings.total_steps,
            temperature,
            log_likelihood: self.pll.log_likelihood,
            penalty: self.pll.penalty,
            penalized: self.pll.penalized(),
            best_penalized: self.best_penalized,
            batch_acceptance: if batch > 0 { batch_accepted as f64 / batch as f64 } else { 0.0 },
            enclosed_mass: pot.enclosed_mass(self.mass_radius),
            mass_radius: self.mass_radius,
            rho,
        };
        serde_json::to_string(&report).map_err(|e| e.to_string())
    }
}

/// wasm-bindgen surface: the same operations exported to JavaScript.
#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn synthesize(params_json: &str) -> Result<String, JsError> {
        crate::synthesize(params_json).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub struct Inference {
        inner: crate::DemoInference,
    }

    #[wasm_bindgen]
    impl Inference {
        #[wasm_bindgen(constructor)]
        pub fn new(sample_json: &str, params_json: &str) -> Result<Inference, JsError> {
            crate::DemoInference::new(sample_json, params_json)
                .map(|inner| Inference { inner })
                .map_err(|e| JsError::new(&e))
        }

        pub fn step_batch(&mut self, k: usize) -> Result<String, JsError> {
            self.inner.step_batch(k).map_err(|e| JsError::new(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesize_round_trips_and_defaults_work() {
        let json = synthesize("{}").unwrap();
        let sample: SyntheticSample = serde_json::from_str(&json).unwrap();
        assert_eq!(sample.data.len(), 240);
        assert!(sample.sigma > 0.0);
        assert!(sample.truth_mass > 0.0);
        assert_eq!(sample.dispersion.len(), 4);
        for [r_p, v3] in &sample.data {
            assert!(*r_p > 0.0 && *r_p <= 11.0);
            assert!(v3.is_finite());
        }

        // Anisotropic request with explicit knobs parses too.
        let json = synthesize(r#"{"kind":"wd","n":60,"seed":4,"r_a":1.5}"#).unwrap();
        let sample: SyntheticSample = serde_json::from_str(&json).unwrap();
        assert_eq!(sample.data.len(), 60);

        assert!(synthesize("{\"n\": 2}").is_err());
        assert!(synthesize("not json").is_err());
    }

    #[test]
    fn demo_inference_steps_and_improves() {
        let sample = synthesize(r#"{"n":60,"seed":2}"#).unwrap();
        let mut fit =
            DemoInference::new(&sample, r#"{"total_steps":120,"n_energy":5,"n_radial":6}"#)
                .unwrap();
        let first: StepReport = serde_json::from_str(&fit.step_batch(20).unwrap()).unwrap();
        assert_eq!(first.step, 20);
        assert!(!first.done);
        assert!(first.log_likelihood.is_finite());
        assert_eq!(first.rho.len(), 6);

        let mut last = first.clone();
        while !last.done {
            last = serde_json::from_str(&fit.step_batch(50).unwrap()).unwrap();
        }
        assert_eq!(last.step, 120);
        assert!(last.best_penalized >= first.best_penalized);
        assert!(last.temperature < first.temperature);
        assert!(last.enclosed_mass > 0.0);

        // Extra calls after completion stay at the end state.
        let again: StepReport = serde_json::from_str(&fit.step_batch(10).unwrap()).unwrap();
        assert_eq!(again.step, 120);
        assert!(again.done);
    }

    #[test]
    fn demo_inference_is_deterministic() {
        let sample = synthesize(r#"{"n":45,"seed":3}"#).unwrap();
        let params = r#"{"total_steps":60,"n_energy":4,"n_radial":5,"seed":11}"#;
        let mut a = DemoInference::new(&sample, params).unwrap();
        let mut b = DemoInference::new(&sample, params).unwrap();
        // Different batch sizes must not change the trajectory; only the
        // batch-local acceptance fraction may differ between the two.
        let mut ra: StepReport = serde_json::from_str(&a.step_batch(60).unwrap()).unwrap();
        let mut rb = ra.clone();
        for _ in 0..6 {
            rb = serde_json::from_str(&b.step_batch(10).unwrap()).unwrap();
        }
        ra.batch_acceptance = 0.0;
        rb.batch_acceptance = 0.0;
        assert_eq!(
            serde_json::to_string(&ra).unwrap(),
            serde_json::to_string(&rb).unwrap()
        );
    }
}
