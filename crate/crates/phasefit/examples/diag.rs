//! Scratch diagnostic: compares the chain's best configuration against the
//! binned truth configuration on the criterion-5 fixture.

use phasefit::model::{Configuration, DensityHistogram, DfHistogram, GridMode};
use phasefit::potential::PotentialProfile;
use phasefit::projection::{
    penalized_log_likelihood, window_volumes, LikelihoodSettings, MassConstraint,
};
use phasefit::sampler::{run_chains, ChainInputs, InputOptions, SamplerSettings};
use phasefit::synth::{draw_sample, AnnulusPlan, TestPotential, ToyDf, ToyDfKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let m0 = 4.06e11;
    let truth = TestPotential::with_enclosed_mass(m0, 8.7, 2.0).unwrap();
    let sigma = 0.45 * truth.velocity_scale();
    let df_true = ToyDf::new(ToyDfKind::Gauss, sigma, 1.0).unwrap();
    let plan = AnnulusPlan::new(vec![10.0], vec![500]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_250_815);
    let data = draw_sample(&df_true, &truth, &plan, 0.0, &mut rng).unwrap();

    let options = InputOptions {
        n_energy_bins: 18,
        n_momentum_bins: 1,
        n_radial_bins: 12,
        r_max_factor: 1.5,
        depth_factor: 3.0,
        likelihood: LikelihoodSettings::new(
            12,
            8,
            32,
            Some(MassConstraint { m0, delta_m0: 0.2e11, radius: 8.7, alpha: 1.0 }),
        )
        .unwrap(),
    };
    let inputs = ChainInputs::from_data(&data, GridMode::Isotropic, options).unwrap();

    // Truth configuration binned onto the fit grids.
    let grid = inputs.radial_grid.clone();
    let rho_vals: Vec<f64> = grid
        .edges()
        .windows(2)
        .map(|w| {
            let shell = 4.0 / 3.0 * std::f64::consts::PI * (w[1].powi(3) - w[0].powi(3));
            (truth.enclosed_mass(w[1]) - truth.enclosed_mass(w[0])) / shell
        })
        .collect();
    let rho_t = DensityHistogram::new(grid, rho_vals).unwrap();
    let pot_t = PotentialProfile::from_density(&rho_t).unwrap();
    println!(
        "truth binned: M(8.7) = {:.4e} (analytic {:.4e}), phi_min = {:.4e} (analytic {:.4e})",
        pot_t.enclosed_mass(8.7),
        truth.enclosed_mass(8.7),
        pot_t.phi_min(),
        truth.phi(0.0)
    );

    let pgrid = inputs.phase_grid.clone();
    let n_e = pgrid.n_energy_bins();
    let mut f_vals = Vec::with_capacity(n_e);
    for q in 0..n_e {
        let b = pgrid.cell_bounds(q, 0);
        let e_mid = 0.5 * (b.e_lo + b.e_hi);
        f_vals.push(df_true.eval(e_mid, 0.0));
    }
    println!("energy grid: floor {:.4e}, df cell values {:?}", pgrid.energy_floor(), f_vals);
    let vols = window_volumes(&pgrid, &pot_t, inputs.aperture);
    let df_t = DfHistogram::new(pgrid, f_vals).unwrap().normalized(&vols).unwrap();
    let cfg_t = Configuration::new(df_t, rho_t);
    let pll_t = penalized_log_likelihood(&data, &cfg_t, &pot_t, &inputs.likelihood);
    println!(
        "truth config: ln L = {:.3}, penalty = {:.3}, penalized = {:.3}",
        pll_t.log_likelihood,
        pll_t.penalty,
        pll_t.penalized()
    );

    // True normalization of the joint density implied by each configuration:
    // fine trapezoid in r_p times Gauss-Legendre in v3. Exactly 1 when the
    // likelihood's quadrature is consistent with the window normalization.
    let norm_of = |cfg: &Configuration, pot: &PotentialProfile, s: &LikelihoodSettings| {
        let r_hi = inputs.aperture;
        let v_cap = (-2.0 * pot.phi_min()).sqrt();
        let m = 600usize;
        let mut total = 0.0;
        let h = r_hi / m as f64;
        for k in 0..=m {
            let r_p = (r_hi * k as f64 / m as f64).max(1e-9);
            let mut f_v = 0.0;
            for (v3, wv) in phasefit::quad::gauss_legendre_on(48, -v_cap, v_cap) {
                let d = phasefit::model::KinematicDatum { r_p, v3, sigma_v3: 0.0 };
                f_v += wv * phasefit::projection::datum_probability(&d, cfg, pot, s);
            }
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            total += w * h * 2.0 * std::f64::consts::PI * r_p * f_v;
        }
        total
    };
    println!("truth config normalization = {:.5}", norm_of(&cfg_t, &pot_t, &inputs.likelihood));

    // Exact continuous truth: eta(r_p, v3) for f ∝ exp(-E/sigma^2) has an
    // analytic transverse-velocity integral, leaving one smooth LOS quadrature.
    // Normalizing over the same window gives the family-free likelihood bound.
    {
        let s2 = sigma * sigma;
        let r_hi = inputs.radial_grid.edges().last().copied().unwrap();
        let eta_exact = |r_p: f64, v3: f64| -> f64 {
            let mut acc = 0.0;
            let x3_max = (r_hi * r_hi - r_p * r_p).max(0.0).sqrt();
            for (x3, w) in phasefit::quad::gauss_legendre_on(200, 0.0, x3_max) {
                let r = (r_p * r_p + x3 * x3).sqrt();
                let q = truth.phi(r) + 0.5 * v3 * v3;
                if q >= 0.0 {
                    continue;
                }
                // 2 pi sigma^2 e^{-q/s2} (1 - e^{q/s2}) integrates f over v_perp.
                acc += w * 2.0 * std::f64::consts::PI * s2 * ((-q / s2).exp() - 1.0);
            }
            2.0 * acc
        };
        let v_cap = (-2.0 * truth.phi(0.0)).sqrt();
        let m = 600usize;
        let win = inputs.aperture;
        let h = win / m as f64;
        let mut norm = 0.0;
        for k in 0..=m {
            let r_p = (win * k as f64 / m as f64).max(1e-9);
            let mut f_v = 0.0;
            for (v3, wv) in phasefit::quad::gauss_legendre_on(48, -v_cap, v_cap) {
                f_v += wv * eta_exact(r_p, v3);
            }
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            norm += w * h * 2.0 * std::f64::consts::PI * r_p * f_v;
        }
        let mut ll = 0.0;
        for d in &data {
            ll += (eta_exact(d.r_p, d.v3) / norm).ln();
        }
        println!("exact continuous truth: ln L = {ll:.3} (window normalization {norm:.4e})");
    }

    // The chain's answer.
    let settings = SamplerSettings {
        total_steps: 2500,
        n_chains: 3,
        seed: 501,
        ..SamplerSettings::default()
    };
    let chains = run_chains(&data, &inputs, &settings).unwrap();
    for (i, c) in chains.iter().enumerate() {
        let b = c.best();
        let pot = PotentialProfile::from_density(&b.config.rho).unwrap();
        println!(
            "chain {i}: best step {} ln L = {:.3}, penalty = {:.3}, penalized = {:.3}, M(8.7) = {:.4e}, normalization = {:.5}",
            b.index,
            b.pll.log_likelihood,
            b.pll.penalty,
            b.pll.penalized(),
            pot.enclosed_mass(8.7),
            norm_of(&b.config, &pot, &inputs.likelihood)
        );
    }
}
