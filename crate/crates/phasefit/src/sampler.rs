//! Metropolis-Hastings optimisation with simulated annealing over
//! [`Configuration`] space.
//!
//! Proposals perturb both histograms with the multiplicative jump rule
//!
//! ```text
//! alpha_q' = alpha_{q+1} + (alpha_q - alpha_{q+1}) * exp(R / s1),   R ~ U[-0.5, 0.5)
//! ```
//!
//! computed simultaneously from the current values with a fresh `R` per bin
//! and a zero virtual neighbour beyond the last bin, followed by an
//! outside-in monotone repair sweep (the literal simultaneous formula can
//! break monotonicity when a bin nearly ties its neighbour; the sweep
//! restores it without touching the already-monotone case). The density also
//! receives a global scale move `exp(R / s2)`; the DF is instead
//! renormalised over the observable window after every shape move, which
//! makes a DF scale move a no-op.
//!
//! Acceptance follows `min(1, exp((L' - L) / T))` on the penalized
//! log-likelihood with a geometric cooling schedule, so `T0 = 1` with
//! `cooling = 1 - epsilon` anneals toward hill climbing.

use crate::model::{
    Configuration, DensityHistogram, DfHistogram, GridMode, KinematicDatum, ModelError, PhaseGrid,
    RadialGrid,
};
use crate::potential::{PotentialError, PotentialProfile};
use crate::projection::{
    penalized_log_likelihood, window_volumes, LikelihoodSettings, PenalizedLogLikelihood,
};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler settings: {0}")]
    InvalidSettings(String),
    #[error("invalid input data: {0}")]
    InvalidData(String),
    #[error("seed configuration has zero support on the data; widen the seed density or DF")]
    ZeroSupportSeed,
    #[error("diagnostic needs at least two chains")]
    NeedTwoChains,
    #[error("chains must have equal retained length (got {0} and {1})")]
    UnequalChains(usize, usize),
    #[error("chain too short after burn-in: need at least {needed}, got {got}")]
    ChainTooShort { needed: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Jump scales, annealing schedule and chain bookkeeping knobs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerSettings {
    /// Shape-jump scale: per-bin factor `exp(R / s1)`.
    pub s1: f64,
    /// Scale-jump scale: global density factor `exp(R / s2)`.
    pub s2: f64,
    /// Initial temperature.
    pub t0: f64,
    /// Geometric cooling factor per temperature stage, in (0, 1).
    pub cooling: f64,
    /// Proposals per temperature stage.
    pub steps_per_temperature: usize,
    /// Number of proposals in one chain.
    pub total_steps: usize,
    /// Base RNG seed; chain i of a multi-chain run uses `seed + i`.
    pub seed: u64,
    /// Chains for multi-chain runs and convergence diagnostics.
    pub n_chains: usize,
    /// Fraction of the data used, subsampled once at startup.
    pub data_fraction: f64,
    /// Fraction of initial steps discarded by envelopes and diagnostics.
    pub burn_in: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            s1: 8.0,
            s2: 12.0,
            t0: 1.0,
            cooling: 0.9,
            steps_per_temperature: 50,
            total_steps: 4000,
            seed: 1,
            n_chains: 3,
            data_fraction: 1.0,
            burn_in: 0.3,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: String| Err(SamplerError::InvalidSettings(msg));
        if !(self.s1 > 0.0) || !(self.s2 > 0.0) {
            return bad(format!("s1 and s2 must be > 0 (got {}, {})", self.s1, self.s2));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad(format!("cooling must lie in (0,1) (got {})", self.cooling));
        }
        if !(self.t0 > 0.0) {
            return bad(format!("t0 must be > 0 (got {})", self.t0));
        }
        if self.steps_per_temperature == 0 {
            return bad("steps_per_temperature must be >= 1".into());
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return bad(format!("data_fraction must lie in (0,1] (got {})", self.data_fraction));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < 1.0) {
            return bad(format!("burn_in must lie in [0,1) (got {})", self.burn_in));
        }
        if self.n_chains == 0 {
            return bad("n_chains must be >= 1".into());
        }
        Ok(())
    }
}

/// One recorded state of a chain: the configuration after the step's
/// accept/reject decision, its penalized log-likelihood, and the step's
/// temperature.
#[derive(Debug, Clone)]
pub struct ChainStep {
    pub index: usize,
    pub config: Configuration,
    pub pll: PenalizedLogLikelihood,
    pub accepted: bool,
    pub temperature: f64,
}

/// A completed chain: the seed state followed by one entry per proposal.
#[derive(Debug, Clone)]
pub struct Chain {
    pub steps: Vec<ChainStep>,
}

impl Chain {
    /// Steps retained after discarding the initial burn-in fraction.
    pub fn retained(&self, burn_in: f64) -> &[ChainStep] {
        let start = (self.steps.len() as f64 * burn_in).floor() as usize;
        &self.steps[start.min(self.steps.len())..]
    }

    /// The step with the highest penalized log-likelihood (earliest on ties).
    pub fn best(&self) -> &ChainStep {
        let mut best = &self.steps[0];
        for s in &self.steps[1..] {
            if s.pll.penalized() > best.pll.penalized() {
                best = s;
            }
        }
        best
    }
}

/// Core simultaneous jump update with outside-in monotone repair. `draw`
/// supplies one `R ~ U[-0.5, 0.5)` per bin, consumed in bin order.
fn shape_update_with(old: &[f64], s1: f64, draw: &mut impl FnMut() -> f64) -> Vec<f64> {
    let n = old.len();
    let mut out = vec![0.0; n];
    for q in 0..n {
        let neighbor = if q + 1 < n { old[q + 1] } else { 0.0 };
        let r = draw();
        out[q] = neighbor + (old[q] - neighbor) * (r / s1).exp();
    }
    for q in (0..n.saturating_sub(1)).rev() {
        if out[q] < out[q + 1] {
            out[q] = out[q + 1];
        }
    }
    out
}

fn uniform_r(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>() - 0.5
}

/// Shape move for the radial density: each bin relaxes toward (or away from)
/// its outer neighbour by a random factor; positivity and monotonicity are
/// preserved for every draw.
pub fn propose_density_shape(
    h: &DensityHistogram,
    s1: f64,
    rng: &mut impl Rng,
) -> DensityHistogram {
    let values = shape_update_with(h.values(), s1, &mut || uniform_r(rng));
    DensityHistogram::new(h.grid().clone(), values).expect("shape update preserves structure")
}

/// Scale move: every density bin multiplied by one shared `exp(R / s2)`.
pub fn propose_density_scale(
    h: &DensityHistogram,
    s2: f64,
    rng: &mut impl Rng,
) -> DensityHistogram {
    let factor = (uniform_r(rng) / s2).exp();
    let values = h.values().iter().map(|v| v * factor).collect();
    DensityHistogram::new(h.grid().clone(), values).expect("scale preserves structure")
}

/// Shape move for the DF: the jump update runs along the energy axis
/// independently for each angular-momentum row (fresh `R` per cell, rows in
/// order), then the result is renormalised over the observable window with
/// the supplied cell weights. `s2` is accepted for signature parity with the
/// density moves but unused: renormalisation cancels any global DF scale.
pub fn propose_df(
    h: &DfHistogram,
    s1: f64,
    _s2: f64,
    rng: &mut impl Rng,
    cell_weights: &[f64],
) -> Result<DfHistogram, ModelError> {
    let grid = h.grid();
    let n_e = grid.n_energy_bins();
    let mut values = Vec::with_capacity(h.values().len());
    for row in h.values().chunks_exact(n_e) {
        values.extend(shape_update_with(row, s1, &mut || uniform_r(rng)));
    }
    DfHistogram::new(grid.clone(), values)?.normalized(cell_weights)
}

/// One Metropolis-Hastings decision at temperature `t` on the stored
/// penalized log-likelihoods. Proposals violating the flat priors are
/// rejected outright (no RNG consumed); uphill moves are accepted without a
/// coin flip.
pub fn mh_step(
    current: &Configuration,
    proposal: Configuration,
    t: f64,
    rng: &mut impl Rng,
) -> (Configuration, bool) {
    if !proposal.is_valid() {
        return (current.clone(), false);
    }
    let cur = current
        .log_likelihood
        .expect("current configuration must carry a penalized log-likelihood");
    let prop = proposal
        .log_likelihood
        .expect("proposal must carry a penalized log-likelihood");
    let ratio = ((prop - cur) / t).exp();
    if ratio >= 1.0 || rng.random::<f64>() < ratio {
        (proposal, true)
    } else {
        (current.clone(), false)
    }
}

/// Grid-sizing and likelihood options used when deriving chain inputs from a
/// data set.
#[derive(Debug, Clone)]
pub struct InputOptions {
    pub n_energy_bins: usize,
    /// Angular-momentum rows; forced to 1 in isotropic mode.
    pub n_momentum_bins: usize,
    pub n_radial_bins: usize,
    /// Radial grid extends to this multiple of the largest projected radius.
    pub r_max_factor: f64,
    /// Energy grid floor sits at this multiple of the seed potential's depth,
    /// so the fit can resolve (rather than clamp) wells deeper than the crude
    /// virial seed.
    pub depth_factor: f64,
    pub likelihood: LikelihoodSettings,
}

impl Default for InputOptions {
    fn default() -> Self {
        Self {
            n_energy_bins: 15,
            n_momentum_bins: 4,
            n_radial_bins: 20,
            r_max_factor: 1.5,
            depth_factor: 2.0,
            likelihood: LikelihoodSettings::default(),
        }
    }
}

/// Everything a chain needs besides the data: the discretisation, the
/// likelihood settings, and a valid seed configuration.
#[derive(Debug, Clone)]
pub struct ChainInputs {
    pub phase_grid: PhaseGrid,
    pub radial_grid: RadialGrid,
    pub likelihood: LikelihoodSettings,
    pub seed_configuration: Configuration,
    /// Largest projected radius at which data can appear; the DF is
    /// normalised over this sky window (the radial grid extends further).
    pub aperture: f64,
}

impl ChainInputs {
    /// Derives grids and a broad seed configuration from the data: the radial
    /// grid covers all projected radii with a log spacing, the seed density
    /// is a constant at a crude virial mass estimate, the energy grid spans
    /// the seed potential's depth times a headroom factor, and the seed DF
    /// decays gently with energy.
    pub fn from_data(
        data: &[KinematicDatum],
        mode: GridMode,
        options: InputOptions,
    ) -> Result<Self, SamplerError> {
        if data.is_empty() {
            return Err(SamplerError::InvalidData("empty data set".into()));
        }
        let mut r_peak: f64 = 0.0;
        let mut v2_sum = 0.0;
        for d in data {
            if !(d.r_p > 0.0) || !d.v3.is_finite() || !(d.sigma_v3 >= 0.0) {
                return Err(SamplerError::InvalidData(format!(
                    "datum must have r_p > 0, finite v3 and sigma_v3 >= 0 (got {d:?})"
                )));
            }
            r_peak = r_peak.max(d.r_p);
            v2_sum += d.v3 * d.v3;
        }
        let sigma2 = v2_sum / data.len() as f64;
        if !(sigma2 > 0.0) {
            return Err(SamplerError::InvalidData(
                "data have zero line-of-sight velocity dispersion".into(),
            ));
        }
        if !(options.r_max_factor > 1.0) {
            return Err(SamplerError::InvalidData(
                "r_max_factor must exceed 1".into(),
            ));
        }
        if !(options.depth_factor >= 1.0) {
            return Err(SamplerError::InvalidData(
                "depth_factor must be at least 1".into(),
            ));
        }

        let r_max = options.r_max_factor * r_peak;
        let radial_grid =
            RadialGrid::log_spaced(options.n_radial_bins, 0.05 * r_max, r_max)?;

        // Crude projected virial estimate; the scale move and the optional
        // mass constraint take it from here.
        let mut radii: Vec<f64> = data.iter().map(|d| d.r_p).collect();
        radii.sort_by(|a, b| a.total_cmp(b));
        let r_half = radii[radii.len() / 2];
        let mut m_est = 5.0 * sigma2 * r_half / crate::G;
        let mut rho0 = m_est / (4.0 / 3.0 * std::f64::consts::PI * r_max.powi(3));
        let mut rho =
            DensityHistogram::new(radial_grid.clone(), vec![rho0; radial_grid.n_bins()])?;
        let mut pot = PotentialProfile::from_density(&rho)?;

        // The virial guess can leave the fastest data unbound in its own
        // potential, which would start the chain at zero support. The
        // potential is linear in the density, so a single rescale deepens it
        // enough that every datum is bound with ~30% energy headroom.
        let scale = support_scale(&pot, data);
        if scale > 1.0 {
            m_est *= scale;
            rho0 *= scale;
            rho = DensityHistogram::new(radial_grid.clone(), vec![rho0; radial_grid.n_bins()])?;
            pot = PotentialProfile::from_density(&rho)?;
        }
        // The fit explores potentials deeper than the seed, so the fixed
        // energy grid gets headroom below the seed's own floor; without it,
        // everything below the floor clamps into one unresolved bin.
        let floor = options.depth_factor * pot.phi_min();
        let n_l = match mode {
            GridMode::Isotropic => 1,
            GridMode::TwoIntegral => options.n_momentum_bins,
        };
        let l_max = (crate::G * m_est * r_max).sqrt();
        let phase_grid = PhaseGrid::linear(floor, options.n_energy_bins, l_max, n_l, mode)?;

        let mut f_values = Vec::with_capacity(phase_grid.n_cells());
        for l in 0..phase_grid.n_momentum_bins() {
            for e in 0..phase_grid.n_energy_bins() {
                let b = phase_grid.cell_bounds(e, l);
                let e_mid = 0.5 * (b.e_lo + b.e_hi);
                f_values.push((-(e_mid - floor) / sigma2).exp());
            }
        }
        let df = DfHistogram::new(phase_grid.clone(), f_values)?;

        Ok(Self {
            phase_grid,
            radial_grid,
            likelihood: options.likelihood,
            seed_configuration: Configuration::new(df, rho),
            aperture: r_peak,
        })
    }
}

/// How many data a chain actually uses once the subsample fraction is
/// applied (at least one datum, at most all of them).
pub fn effective_data_count(n: usize, fraction: f64) -> usize {
    if fraction >= 1.0 {
        n
    } else {
        ((n as f64 * fraction).round() as usize).clamp(1, n)
    }
}

/// Runs one annealed chain: propose both histograms, solve the potential,
/// renormalise the DF, evaluate the penalized likelihood, and apply the
/// Metropolis rule at the scheduled temperature. Deterministic given
/// (`chain_seed`, settings): the chain records the seed state at index 0 and
/// one state per proposal.
pub fn run_chain(
    data: &[KinematicDatum],
    inputs: &ChainInputs,
    settings: &SamplerSettings,
    chain_seed: u64,
) -> Result<Chain, SamplerError> {
    settings.validate()?;
    if data.is_empty() {
        return Err(SamplerError::InvalidData("empty data set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);

    let data_owned: Vec<KinematicDatum> = if settings.data_fraction < 1.0 {
        let k = effective_data_count(data.len(), settings.data_fraction);
        let mut idx = rand::seq::index::sample(&mut rng, data.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| data[i]).collect()
    } else {
        data.to_vec()
    };
    let data = &data_owned[..];

    if !inputs.seed_configuration.is_valid() {
        return Err(SamplerError::InvalidData(
            "seed configuration violates the flat priors".into(),
        ));
    }
    let pot = PotentialProfile::from_density(&inputs.seed_configuration.rho)?;
    let vols = window_volumes(&inputs.phase_grid, &pot, inputs.aperture);
    let df0 = inputs.seed_configuration.df.normalized(&vols)?;
    let mut current = Configuration::new(df0, inputs.seed_configuration.rho.clone());
    let mut current_pll = penalized_log_likelihood(data, &current, &pot, &inputs.likelihood);
    if !current_pll.log_likelihood.is_finite() {
        return Err(SamplerError::ZeroSupportSeed);
    }
    current.log_likelihood = Some(current_pll.penalized());

    let mut steps = Vec::with_capacity(settings.total_steps + 1);
    steps.push(ChainStep {
        index: 0,
        config: current.clone(),
        pll: current_pll,
        accepted: true,
        temperature: settings.t0,
    });

    for j in 0..settings.total_steps {
        let t = settings.t0
            * settings
                .cooling
                .powi((j / settings.steps_per_temperature) as i32);

        let rho_p = propose_density_scale(
            &propose_density_shape(&current.rho, settings.s1, &mut rng),
            settings.s2,
            &mut rng,
        );
        let pot_p = PotentialProfile::from_density(&rho_p)?;
        let vols_p = window_volumes(&inputs.phase_grid, &pot_p, inputs.aperture);
        let proposal = propose_df(&current.df, settings.s1, settings.s2, &mut rng, &vols_p)
            .ok()
            .map(|df_p| {
                let mut c = Configuration::new(df_p, rho_p);
                let pll = penalized_log_likelihood(data, &c, &pot_p, &inputs.likelihood);
                c.log_likelihood = Some(pll.penalized());
                (c, pll)
            });

        let accepted = match proposal {
            Some((config_p, pll_p)) => {
                let (next, accepted) = mh_step(&current, config_p, t, &mut rng);
                if accepted {
                    current = next;
                    current_pll = pll_p;
                }
                accepted
            }
            // Degenerate proposal (no observable support): flat prior zero.
            None => false,
        };
        steps.push(ChainStep {
            index: j + 1,
            config: current.clone(),
            pll: current_pll,
            accepted,
            temperature: t,
        });
    }
    Ok(Chain { steps })
}

/// Runs `settings.n_chains` independent chains with dispersed seeds: chain i
/// uses RNG seed `settings.seed + i` and starts from the seed density scaled
/// by `10^(i - (n-1)/2)`, so three chains start a factor of ten apart on
/// either side of the base configuration.
pub fn run_chains(
    data: &[KinematicDatum],
    inputs: &ChainInputs,
    settings: &SamplerSettings,
) -> Result<Vec<Chain>, SamplerError> {
    settings.validate()?;
    let n = settings.n_chains;
    let mut chains = Vec::with_capacity(n);
    for i in 0..n {
        let dispersion = 10f64.powf(i as f64 - 0.5 * (n as f64 - 1.0));
        let mut inp = inputs.clone();
        for v in inp.seed_configuration.rho.values_mut() {
            *v *= dispersion;
        }
        // A downward-dispersed seed can unbind the fastest data; clamp it
        // back to the shallowest density that still supports all of them.
        let pot = PotentialProfile::from_density(&inp.seed_configuration.rho)?;
        let rescue = support_scale(&pot, data);
        if rescue > 1.0 {
            for v in inp.seed_configuration.rho.values_mut() {
                *v *= rescue;
            }
        }
        chains.push(run_chain(
            data,
            &inp,
            settings,
            settings.seed.wrapping_add(i as u64),
        )?);
    }
    Ok(chains)
}

/// Density rescale factor needed so that every datum is bound, with ~30%
/// energy headroom, in the potential of the given (constant-shape) density;
/// 1 when the potential is already deep enough.
fn support_scale(pot: &PotentialProfile, data: &[KinematicDatum]) -> f64 {
    let mut scale: f64 = 1.0;
    for d in data {
        let v_eff = d.v3.abs() + 2.0 * d.sigma_v3;
        scale = scale.max(0.65 * v_eff * v_eff / -pot.phi(d.r_p));
    }
    scale
}

/// Gelman-Rubin potential scale reduction on a scalar summary of the
/// retained steps. Identical chains give sqrt((n-1)/n); chains stuck at
/// different constants give the +infinity sentinel.
pub fn gelman_rubin(
    chains: &[Chain],
    burn_in: f64,
    scalar: impl Fn(&ChainStep) -> f64,
) -> Result<f64, SamplerError> {
    if chains.len() < 2 {
        return Err(SamplerError::NeedTwoChains);
    }
    let series: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.retained(burn_in).iter().map(&scalar).collect())
        .collect();
    let n = series[0].len();
    for s in &series {
        if s.len() != n {
            return Err(SamplerError::UnequalChains(n, s.len()));
        }
    }
    if n < 2 {
        return Err(SamplerError::ChainTooShort { needed: 2, got: n });
    }
    let m = series.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let w = series
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    let b = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() * nf / (m - 1.0);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// Scalar summary for [`gelman_rubin`]: log enclosed mass at a reference
/// radius, the quantity the mass constraint pins.
pub fn log_enclosed_mass_scalar(radius: f64) -> impl Fn(&ChainStep) -> f64 {
    move |step: &ChainStep| match PotentialProfile::from_density(&step.config.rho) {
        Ok(pot) => pot.enclosed_mass(radius).ln(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Per-bin 1-sigma bands for both histograms, centered on the chain's
/// maximum-likelihood configuration.
#[derive(Debug, Clone)]
pub struct UncertaintyEnvelope {
    pub rho_center: Vec<f64>,
    pub rho_sigma: Vec<f64>,
    pub f_center: Vec<f64>,
    pub f_sigma: Vec<f64>,
}

/// Sample standard deviation per bin over the retained states, centered on
/// the best configuration of the whole chain.
pub fn uncertainty_envelope(
    chain: &Chain,
    burn_in: f64,
) -> Result<UncertaintyEnvelope, SamplerError> {
    let retained = chain.retained(burn_in);
    if retained.len() < 10 {
        return Err(SamplerError::ChainTooShort { needed: 10, got: retained.len() });
    }
    let best = chain.best();
    let rho_sigma = per_bin_sigma(retained, |s| s.config.rho.values());
    let f_sigma = per_bin_sigma(retained, |s| s.config.df.values());
    Ok(UncertaintyEnvelope {
        rho_center: best.config.rho.values().to_vec(),
        rho_sigma,
        f_center: best.config.df.values().to_vec(),
        f_sigma,
    })
}

fn per_bin_sigma<'a>(
    steps: &'a [ChainStep],
    select: impl Fn(&'a ChainStep) -> &'a [f64],
) -> Vec<f64> {
    let n = steps.len() as f64;
    let n_bins = select(&steps[0]).len();
    let mut mean = vec![0.0; n_bins];
    for s in steps {
        for (m, v) in mean.iter_mut().zip(select(s)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; n_bins];
    for s in steps {
        for ((v, x), mu) in var.iter_mut().zip(select(s)).zip(&mean) {
            *v += (x - mu) * (x - mu);
        }
    }
    var.iter().map(|v| (v / (n - 1.0)).sqrt()).collect()
}
