//! Nonparametric recovery of the phase-space structure of a relaxed spherical
//! stellar system from sparse line-of-sight velocity data.
//!
//! The model state is a pair of histograms: the phase-space distribution
//! function `f(E[, L])` on an energy/angular-momentum grid and the radial mass
//! density `rho(r)` on a radial grid. Flat priors enforce positivity and
//! monotonicity (`rho` non-increasing in `r`, `f` non-increasing in `E` at
//! fixed `L`, `f = 0` for unbound orbits). Given a candidate pair, the
//! spherical Poisson equation yields the potential, projection integrals yield
//! the probability density of each observed `(r_p, v3)` datum, and a
//! Metropolis-Hastings random walk with simulated annealing explores the
//! posterior, optionally penalised by an enclosed-mass constraint. A
//! nonparametric fully Bayesian significance test (FBST) quantifies whether
//! the data are consistent with an isotropic `f(E)`.
//!
//! Units throughout: kpc, km/s, solar masses.
//!
//! ```
//! use phasefit::model::GridMode;
//! use phasefit::sampler::{run_chain, ChainInputs, SamplerSettings};
//! use phasefit::synth::{AnnulusPlan, TestPotential, ToyDf, ToyDfKind};
//! use rand::SeedableRng;
//!
//! // Draw a small synthetic data set from an isotropic toy DF...
//! let pot = TestPotential::default();
//! let df = ToyDf::new(ToyDfKind::Gauss, 0.45 * pot.velocity_scale(), 1.0).unwrap();
//! let plan = AnnulusPlan::new(vec![3.0, 6.0, 9.0], vec![40, 40, 40]).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let data = phasefit::synth::draw_sample(&df, &pot, &plan, 10.0, &mut rng).unwrap();
//!
//! // ...and run a short annealed chain on it.
//! let inputs = ChainInputs::from_data(&data, GridMode::Isotropic, Default::default()).unwrap();
//! let settings = SamplerSettings { total_steps: 50, ..Default::default() };
//! let chain = run_chain(&data, &inputs, &settings, 7).unwrap();
//! assert_eq!(chain.steps.len(), 51); // seed state + 50 steps
//! ```

pub mod fbst;
pub mod model;
pub mod potential;
pub mod projection;
pub mod quad;
pub mod sampler;
pub mod synth;

pub mod cli;

/// Newton's constant in kpc (km/s)^2 / M_sun.
pub const G: f64 = 4.300917e-6;
