//! Synthetic kinematic data sets drawn from toy distribution functions in a
//! cored (Plummer-type) test potential.
//!
//! Sampling is plain rejection in 6-D phase space: positions uniform over a
//! radial shell's volume, velocities uniform over the local bound sphere
//! `|v| <= sqrt(-2 Phi(r))`, thinned by `f(E, L)` against a per-shell bound.
//! Accepted states are projected to the observables `(r_p, v3)` and optional
//! Gaussian measurement noise is added to `v3`.

use crate::model::KinematicDatum;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic-data specification: {0}")]
    InvalidSpec(String),
    #[error("annulus {annulus} unreachable: no acceptance in {attempts} attempts")]
    UnreachableAnnulus { annulus: usize, attempts: usize },
    #[error("need at least 2 data in the annulus, got {0}")]
    TooFewData(usize),
}

/// The three toy distribution-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyDfKind {
    /// Isotropic: f(E) = (2 pi sigma^2)^{-1/2} exp(-E / sigma^2).
    Gauss,
    /// Anisotropic: the Gauss form times exp(-L^2 / (r_a sigma^2)).
    Wd,
    /// Anisotropic with a bound-state taper:
    /// (2 pi sigma^2)^{-1/2} exp(-L^2/(r_a sigma^2)) (exp(-E/sigma^2) - 1).
    Michie,
}

/// A toy phase-space distribution function; zero on unbound orbits (E >= 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyDf {
    kind: ToyDfKind,
    /// Velocity scale sigma, km/s.
    sigma: f64,
    /// Anisotropy scale r_a (enters as L^2 / (r_a sigma^2)); unused by Gauss.
    r_a: f64,
}

impl ToyDf {
    pub fn new(kind: ToyDfKind, sigma: f64, r_a: f64) -> Result<Self, SynthError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(SynthError::InvalidSpec(format!("sigma must be > 0 (got {sigma})")));
        }
        if kind != ToyDfKind::Gauss && (!(r_a > 0.0) || !r_a.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "r_a must be > 0 for anisotropic kinds (got {r_a})"
            )));
        }
        Ok(Self { kind, sigma, r_a })
    }

    pub fn kind(&self) -> ToyDfKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Evaluates the distribution function at energy `e` and angular
    /// momentum magnitude `l`.
    pub fn eval(&self, e: f64, l: f64) -> f64 {
        if e >= 0.0 {
            return 0.0;
        }
        let s2 = self.sigma * self.sigma;
        let norm = 1.0 / (2.0 * PI * s2).sqrt();
        let aniso = || (-l * l / (self.r_a * s2)).exp();
        match self.kind {
            ToyDfKind::Gauss => norm * (-e / s2).exp(),
            ToyDfKind::Wd => norm * aniso() * (-e / s2).exp(),
            ToyDfKind::Michie => norm * aniso() * ((-e / s2).exp() - 1.0),
        }
    }
}

/// Cored test potential Phi(r) = -A / sqrt(r^2 + r_c^2) and its Plummer
/// density / mass pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPotential {
    /// Amplitude A, kpc (km/s)^2.
    pub amplitude: f64,
    /// Core radius r_c, kpc.
    pub core_radius: f64,
}

impl TestPotential {
    pub fn new(amplitude: f64, core_radius: f64) -> Result<Self, SynthError> {
        if !(amplitude > 0.0) || !(core_radius > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "amplitude and core radius must be > 0 (got {amplitude}, {core_radius})"
            )));
        }
        Ok(Self { amplitude, core_radius })
    }

    /// Chooses the amplitude so the enclosed mass at `radius` equals `mass`.
    pub fn with_enclosed_mass(mass: f64, radius: f64, core_radius: f64) -> Result<Self, SynthError> {
        if !(mass > 0.0) || !(radius > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "mass and radius must be > 0 (got {mass}, {radius})"
            )));
        }
        let amplitude =
            crate::G * mass * (radius * radius + core_radius * core_radius).powf(1.5)
                / radius.powi(3);
        Self::new(amplitude, core_radius)
    }

    pub fn phi(&self, r: f64) -> f64 {
        -self.amplitude / (r * r + self.core_radius * self.core_radius).sqrt()
    }

    /// The density sourcing this potential (Plummer profile).
    pub fn density(&self, r: f64) -> f64 {
        let rc2 = self.core_radius * self.core_radius;
        3.0 * self.amplitude * rc2 / (4.0 * PI * crate::G) * (r * r + rc2).powf(-2.5)
    }

    pub fn enclosed_mass(&self, r: f64) -> f64 {
        let rc2 = self.core_radius * self.core_radius;
        self.amplitude * r.powi(3) / (crate::G * (r * r + rc2).powf(1.5))
    }

    /// Characteristic circular-velocity scale sqrt(A / r_c).
    pub fn velocity_scale(&self) -> f64 {
        (self.amplitude / self.core_radius).sqrt()
    }
}

impl Default for TestPotential {
    /// Scaled so the enclosed mass at 8.7 kpc is 4.06e11 M_sun with a 2 kpc
    /// core.
    fn default() -> Self {
        Self::with_enclosed_mass(4.06e11, 8.7, 2.0).expect("default scale is valid")
    }
}

/// Radial shells `(0, r1], (r1, r2], ...` and how many data to draw in each.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusPlan {
    edges: Vec<f64>,
    counts: Vec<usize>,
}

impl AnnulusPlan {
    pub fn new(edges: Vec<f64>, counts: Vec<usize>) -> Result<Self, SynthError> {
        if edges.is_empty() || edges.len() != counts.len() {
            return Err(SynthError::InvalidSpec(format!(
                "need one count per annulus edge (got {} edges, {} counts)",
                edges.len(),
                counts.len()
            )));
        }
        if !edges.iter().all(|e| e.is_finite() && *e > 0.0)
            || !edges.windows(2).all(|w| w[0] < w[1])
        {
            return Err(SynthError::InvalidSpec(format!(
                "edges must be positive and strictly increasing (got {edges:?})"
            )));
        }
        if counts.iter().any(|n| *n < 2) {
            return Err(SynthError::InvalidSpec("each annulus needs at least 2 draws".into()));
        }
        Ok(Self { edges, counts })
    }

    /// Iterates (inner radius, outer radius, count), innermost first.
    pub fn shells(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges.iter().enumerate().map(|(i, &hi)| {
            let lo = if i == 0 { 0.0 } else { self.edges[i - 1] };
            (lo, hi, self.counts[i])
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Attempts per requested datum before a shell is declared unreachable.
const ATTEMPTS_PER_DATUM: usize = 200_000;

/// One accepted 6-D state (position, velocity) with spatial radius in
/// `(r_lo, r_hi]`, drawn by rejection against `df`.
pub fn draw_state(
    df: &ToyDf,
    pot: &TestPotential,
    r_lo: f64,
    r_hi: f64,
    rng: &mut impl Rng,
) -> Result<([f64; 3], [f64; 3]), SynthError> {
    // f is maximised at the deepest accessible energy (the shell's inner
    // edge, at rest) and vanishing angular momentum, for all three kinds.
    let bound = df.eval(pot.phi(r_lo), 0.0);
    if !(bound > 0.0) {
        return Err(SynthError::UnreachableAnnulus { annulus: 0, attempts: 0 });
    }
    let lo3 = r_lo.powi(3);
    let hi3 = r_hi.powi(3);
    // The proposal velocity ball must have the same radius at every r in the
    // shell (the deepest point's escape speed), or the r-dependent proposal
    // volume would bias the radial distribution; unbound proposals fall out
    // through f = 0.
    let v_cap = (-2.0 * pot.phi(r_lo)).sqrt();
    for _ in 0..ATTEMPTS_PER_DATUM {
        let r = (lo3 + rng.random::<f64>() * (hi3 - lo3)).cbrt();
        let x_dir: [f64; 3] = UnitSphere.sample(rng);
        let speed = v_cap * rng.random::<f64>().cbrt();
        let v_dir: [f64; 3] = UnitSphere.sample(rng);
        let x = [r * x_dir[0], r * x_dir[1], r * x_dir[2]];
        let v = [speed * v_dir[0], speed * v_dir[1], speed * v_dir[2]];
        let e = pot.phi(r) + 0.5 * speed * speed;
        let l = cross_norm(&x, &v);
        if rng.random::<f64>() * bound < df.eval(e, l) {
            return Ok((x, v));
        }
    }
    Err(SynthError::UnreachableAnnulus { annulus: 0, attempts: ATTEMPTS_PER_DATUM })
}

fn cross_norm(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Draws exactly the planned number of states per shell, projects them to
/// `(r_p, v3)`, and adds Gaussian noise of width `noise_sigma` to `v3`
/// (recorded as the datum's uncertainty). Deterministic for a fixed RNG
/// state.
pub fn draw_sample(
    df: &ToyDf,
    pot: &TestPotential,
    plan: &AnnulusPlan,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<KinematicDatum>, SynthError> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(SynthError::InvalidSpec(format!(
            "noise sigma must be finite and >= 0 (got {noise_sigma})"
        )));
    }
    let mut out = Vec::with_capacity(plan.total_count());
    for (annulus, (lo, hi, count)) in plan.shells().enumerate() {
        for _ in 0..count {
            let (x, v) = draw_state(df, pot, lo, hi, rng).map_err(|e| match e {
                SynthError::UnreachableAnnulus { attempts, .. } => {
                    SynthError::UnreachableAnnulus { annulus, attempts }
                }
                other => other,
            })?;
            let noise: f64 = if noise_sigma > 0.0 {
                noise_sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            } else {
                0.0
            };
            out.push(KinematicDatum {
                r_p: (x[0] * x[0] + x[1] * x[1]).sqrt(),
                v3: v[2] + noise,
                sigma_v3: noise_sigma,
            });
        }
    }
    Ok(out)
}

/// Line-of-sight dispersion of the data with `r_lo < r_p <= r_hi`:
/// the population standard deviation and its normal-theory standard error
/// sigma_p / sqrt(2 N).
pub fn projected_dispersion(
    data: &[KinematicDatum],
    r_lo: f64,
    r_hi: f64,
) -> Result<(f64, f64), SynthError> {
    let v: Vec<f64> = data
        .iter()
        .filter(|d| d.r_p > r_lo && d.r_p <= r_hi)
        .map(|d| d.v3)
        .collect();
    if v.len() < 2 {
        return Err(SynthError::TooFewData(v.len()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sigma_p = var.sqrt();
    Ok((sigma_p, sigma_p / (2.0 * n).sqrt()))
}
