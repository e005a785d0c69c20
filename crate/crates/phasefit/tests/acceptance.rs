//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N (...): PASS/FAIL` line with its runtime and the measured
//! numbers. Criteria 5 and 9 share one three-chain recovery fit.

use phasefit::model::{
    CellBounds, Configuration, DensityHistogram, DfHistogram, GridMode, PhaseGrid, RadialGrid,
};
use phasefit::potential::PotentialProfile;
use phasefit::projection::{cell_contribution, LikelihoodSettings, MassConstraint};
use phasefit::sampler::{
    gelman_rubin, log_enclosed_mass_scalar, mh_step, propose_density_scale, propose_density_shape,
    propose_df, run_chain, run_chains, uncertainty_envelope, ChainInputs, InputOptions,
    SamplerSettings,
};
use phasefit::fbst;
use phasefit::synth::{draw_sample, AnnulusPlan, TestPotential, ToyDf, ToyDfKind};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

/// Prints the per-criterion verdict line, then enforces it.
fn report(n: usize, name: &str, pass: bool, elapsed: f64, detail: &str) {
    println!(
        "criterion {n} ({name}): {} [{elapsed:.1} s] - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// RNG whose uniform doubles are exactly 0.5, making the jump variable R
/// (uniform on [-0.5, 0.5)) exactly zero.
struct ConstRng;
impl rand::TryRng for ConstRng {
    type Error = std::convert::Infallible;
    fn try_next_u32(&mut self) -> Result<u32, Self::Error> {
        Ok(1 << 31)
    }
    fn try_next_u64(&mut self) -> Result<u64, Self::Error> {
        Ok(1 << 63)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Self::Error> {
        dest.fill(0);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: potential-solver oracle.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_potential_solver_oracle() {
    let t = Instant::now();

    // Uniform sphere: Phi(0) / Phi(R) = 3/2 exactly.
    let grid = RadialGrid::new((0..=5).map(|k| 2.0 * k as f64).collect()).unwrap();
    let rho = DensityHistogram::new(grid, vec![2.0e5; 5]).unwrap();
    let pot = PotentialProfile::from_density(&rho).unwrap();
    let ratio = pot.phi(0.0) / pot.phi(10.0);
    let ratio_err = (ratio - 1.5_f64).abs() / 1.5;

    // Plummer density -> potential round trip on 200 log bins.
    let truth = TestPotential::with_enclosed_mass(4.06e11, 8.7, 2.0).unwrap();
    let grid = RadialGrid::log_spaced(200, 0.05, 100.0).unwrap();
    let values: Vec<f64> = grid
        .edges()
        .windows(2)
        .map(|w| {
            let shell = 4.0 / 3.0 * std::f64::consts::PI * (w[1].powi(3) - w[0].powi(3));
            (truth.enclosed_mass(w[1]) - truth.enclosed_mass(w[0])) / shell
        })
        .collect();
    let rho = DensityHistogram::new(grid.clone(), values).unwrap();
    let pot = PotentialProfile::from_density(&rho).unwrap();
    let mut max_rel: f64 = (pot.phi(0.0) - truth.phi(0.0)).abs() / truth.phi(0.0).abs();
    for &r in &grid.edges()[1..] {
        let rel = (pot.phi(r) - truth.phi(r)).abs() / truth.phi(r).abs();
        max_rel = max_rel.max(rel);
    }

    let elapsed = t.elapsed().as_secs_f64();
    let pass = ratio_err < 1e-10 && max_rel < 0.01 && elapsed < 1.0;
    report(
        1,
        "potential-solver oracle",
        pass,
        elapsed,
        &format!("uniform-sphere ratio rel err {ratio_err:.2e}; Plummer round-trip max rel err {max_rel:.4}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: projection vs brute-force Monte-Carlo integration.
// ---------------------------------------------------------------------------

/// Random decreasing density profile on a random radial grid.
fn random_potential(rng: &mut ChaCha8Rng) -> PotentialProfile {
    let n_bins = rng.random_range(3..7usize);
    let r_max = rng.random_range(8.0..15.0);
    let edges: Vec<f64> = (0..=n_bins).map(|k| r_max * k as f64 / n_bins as f64).collect();
    let mut values = Vec::with_capacity(n_bins);
    let mut v = rng.random_range(1.0e8..6.0e8);
    for _ in 0..n_bins {
        values.push(v);
        v *= rng.random_range(0.2..0.95);
    }
    let grid = RadialGrid::new(edges).unwrap();
    PotentialProfile::from_density(&DensityHistogram::new(grid, values).unwrap()).unwrap()
}

/// Monte-Carlo single-cell eta by direct 3-D integration over (x3, v1, v2).
fn mc_eta(
    cell: &CellBounds,
    r_p: f64,
    v3: f64,
    pot: &PotentialProfile,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let x3_hi = (pot.r_max().powi(2) - r_p * r_p).sqrt();
    let v_bound = (2.0 * (cell.e_hi - pot.phi_min())).sqrt();
    let volume = 2.0 * x3_hi * (2.0 * v_bound) * (2.0 * v_bound);
    let mut hits = 0u64;
    for _ in 0..n {
        let x3 = rng.random::<f64>() * x3_hi;
        let v1 = (rng.random::<f64>() * 2.0 - 1.0) * v_bound;
        let v2 = (rng.random::<f64>() * 2.0 - 1.0) * v_bound;
        let phi = pot.phi((r_p * r_p + x3 * x3).sqrt());
        let e = phi + 0.5 * (v1 * v1 + v2 * v2 + v3 * v3);
        if e >= cell.e_lo && e < cell.e_hi {
            hits += 1;
        }
    }
    volume * hits as f64 / n as f64
}

#[test]
fn criterion_2_projection_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let settings = LikelihoodSettings::default();
    let mut max_rel: f64 = 0.0;
    for trial in 0..20 {
        let pot = random_potential(&mut rng);
        let phi_min = pot.phi_min();
        // Broad energy bands keep the Monte-Carlo hit fraction healthy.
        let lo_frac = rng.random_range(0.55..0.9);
        let width = rng.random_range(0.3..0.45);
        let cell = CellBounds {
            e_lo: lo_frac * phi_min,
            e_hi: (lo_frac - width).max(0.02) * phi_min,
            l_lo: 0.0,
            l_hi: f64::INFINITY,
        };
        let r_p = rng.random_range(0.1..0.6) * pot.r_max();
        let v_cap = (2.0 * (cell.e_hi - pot.phi(r_p))).sqrt();
        let v3 = rng.random_range(0.0..0.7) * v_cap;

        let quadrature =
            cell_contribution(&cell, 1.0, r_p, v3, &pot, GridMode::Isotropic, &settings);
        let mc = mc_eta(&cell, r_p, v3, &pot, 1_000_000, &mut rng);
        assert!(quadrature > 0.0 && mc > 0.0, "trial {trial}: degenerate fixture");
        max_rel = max_rel.max((quadrature - mc).abs() / mc);
    }
    let elapsed = t.elapsed().as_secs_f64();
    let pass = max_rel < 0.01 && elapsed < 120.0;
    report(
        2,
        "projection oracle",
        pass,
        elapsed,
        &format!("20 fixtures x 1e6 points, max rel deviation {max_rel:.4}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: jump-move properties.
// ---------------------------------------------------------------------------

fn assert_monotone_positive(values: &[f64], what: &str) {
    assert!(values.iter().all(|&v| v >= 0.0 && v.is_finite()), "{what}: negative or non-finite");
    assert!(values.windows(2).all(|w| w[0] >= w[1]), "{what}: monotonicity violated");
}

#[test]
fn criterion_3_jump_move_properties() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // 1e4 random shape+scale proposals on random valid density histograms.
    for _ in 0..10_000 {
        let n_bins = rng.random_range(3..26usize);
        let r_max = rng.random_range(5.0..20.0);
        let edges: Vec<f64> = (0..=n_bins).map(|k| r_max * k as f64 / n_bins as f64).collect();
        let mut v = 10f64.powf(rng.random_range(3.0..9.0));
        let mut values = Vec::with_capacity(n_bins);
        for _ in 0..n_bins {
            values.push(v);
            v *= rng.random_range(0.2..1.0);
        }
        let h = DensityHistogram::new(RadialGrid::new(edges).unwrap(), values).unwrap();
        let s1 = rng.random_range(2.0..20.0);
        let s2 = rng.random_range(4.0..30.0);
        let proposed = propose_density_scale(&propose_density_shape(&h, s1, &mut rng), s2, &mut rng);
        assert_monotone_positive(proposed.values(), "density proposal");
    }

    // The same moves on DF histograms (per-momentum-row monotonicity).
    for _ in 0..2_000 {
        let n_e = rng.random_range(3..12usize);
        let n_l = rng.random_range(1..4usize);
        let mode = if n_l == 1 { GridMode::Isotropic } else { GridMode::TwoIntegral };
        let grid = PhaseGrid::linear(-1.0e5, n_e, 1.0e3, n_l, mode).unwrap();
        // Rows decrease along increasing energy: most-bound bin first.
        let mut values = Vec::with_capacity(n_e * n_l);
        for _ in 0..n_l {
            let mut v = 10f64.powf(rng.random_range(-8.0..-2.0));
            for _ in 0..n_e {
                values.push(v);
                v *= rng.random_range(0.2..1.0);
            }
        }
        let df = DfHistogram::new(grid, values).unwrap();
        let weights: Vec<f64> = (0..n_e * n_l).map(|_| rng.random_range(0.1..10.0)).collect();
        let s1 = rng.random_range(2.0..20.0);
        let proposed = propose_df(&df, s1, 12.0, &mut rng, &weights).unwrap();
        for row in proposed.values().chunks_exact(n_e) {
            assert_monotone_positive(row, "df proposal row");
        }
    }

    // R = 0 must be the identity to 1e-14.
    let grid = RadialGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let h = DensityHistogram::new(grid, vec![5.0e5, 3.0e5, 1.0e5]).unwrap();
    let mut max_dev: f64 = 0.0;
    let shaped = propose_density_shape(&h, 8.0, &mut ConstRng);
    let scaled = propose_density_scale(&h, 12.0, &mut ConstRng);
    for (a, b) in shaped.values().iter().chain(scaled.values()).zip(h.values().iter().cycle()) {
        max_dev = max_dev.max((a - b).abs() / b);
    }
    let pgrid = PhaseGrid::linear(-1.0e5, 4, 1.0e3, 1, GridMode::Isotropic).unwrap();
    let weights = vec![2.0, 1.0, 0.5, 0.25];
    let df = DfHistogram::new(pgrid, vec![8.0e-4, 4.0e-4, 2.0e-4, 1.0e-4])
        .unwrap()
        .normalized(&weights)
        .unwrap();
    let df_prop = propose_df(&df, 8.0, 12.0, &mut ConstRng, &weights).unwrap();
    for (a, b) in df_prop.values().iter().zip(df.values()) {
        max_dev = max_dev.max((a - b).abs() / b);
    }

    let elapsed = t.elapsed().as_secs_f64();
    let pass = max_dev <= 1e-14 && elapsed < 5.0;
    report(
        3,
        "jump-move properties",
        pass,
        elapsed,
        &format!(
            "12000 proposals kept positivity+monotonicity; R=0 identity max rel dev {max_dev:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: Metropolis calibration at a known likelihood drop.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_metropolis_calibration() {
    let t = Instant::now();
    let grid = RadialGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
    let rho = DensityHistogram::new(grid, vec![2.0e5, 1.0e5]).unwrap();
    let pgrid = PhaseGrid::linear(-1.0e3, 2, 1.0e2, 1, GridMode::Isotropic).unwrap();
    let df = DfHistogram::new(pgrid, vec![2.0e-4, 1.0e-4]).unwrap();

    let temperature = 0.8;
    let mut current = Configuration::new(df, rho);
    current.log_likelihood = Some(-100.0);
    let mut proposal = current.clone();
    proposal.log_likelihood = Some(-100.0 - temperature * std::f64::consts::LN_2);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let trials = 100_000;
    let mut accepted = 0u64;
    for _ in 0..trials {
        if mh_step(&current, proposal.clone(), temperature, &mut rng).1 {
            accepted += 1;
        }
    }
    let rate = accepted as f64 / trials as f64;

    let elapsed = t.elapsed().as_secs_f64();
    let pass = (rate - 0.5).abs() <= 0.01 && elapsed < 10.0;
    report(
        4,
        "Metropolis calibration",
        pass,
        elapsed,
        &format!("acceptance at dL = -T ln 2: {rate:.4} over 1e5 trials"),
    );
}

// ---------------------------------------------------------------------------
// Criteria 5 and 9 share one three-chain recovery fit on Gaussian-DF data.
// ---------------------------------------------------------------------------

struct RecoveryRun {
    elapsed: f64,
    best_mass: f64,
    covered_bins: usize,
    bins_within: usize,
    r_hat: f64,
}

static RECOVERY: OnceLock<RecoveryRun> = OnceLock::new();

const M0: f64 = 4.06e11;
const DELTA_M0: f64 = 0.2e11;
const R_E: f64 = 8.7;

fn recovery_run() -> &'static RecoveryRun {
    RECOVERY.get_or_init(|| {
        let t = Instant::now();
        let truth = TestPotential::with_enclosed_mass(M0, R_E, 2.0).unwrap();
        let df = ToyDf::new(ToyDfKind::Gauss, 0.45 * truth.velocity_scale(), 1.0).unwrap();
        let plan = AnnulusPlan::new(vec![2.0, 4.0, 6.0, 8.0, 10.0], vec![100; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20_250_815);
        let data = draw_sample(&df, &truth, &plan, 0.0, &mut rng).unwrap();
        assert_eq!(data.len(), 500);

        let options = InputOptions {
            n_energy_bins: 12,
            n_momentum_bins: 1,
            n_radial_bins: 12,
            r_max_factor: 1.5,
            depth_factor: 2.0,
            likelihood: LikelihoodSettings::new(
                12,
                8,
                32,
                Some(MassConstraint { m0: M0, delta_m0: DELTA_M0, radius: R_E, alpha: 1.0 }),
            )
            .unwrap(),
        };
        let inputs = ChainInputs::from_data(&data, GridMode::Isotropic, options).unwrap();
        let settings = SamplerSettings {
            total_steps: 2500,
            n_chains: 3,
            seed: 501,
            ..SamplerSettings::default()
        };
        let chains = run_chains(&data, &inputs, &settings).unwrap();

        let best_chain = chains
            .iter()
            .max_by(|a, b| {
                a.best().pll.penalized().total_cmp(&b.best().pll.penalized())
            })
            .unwrap();
        let best = best_chain.best();
        let best_pot = PotentialProfile::from_density(&best.config.rho).unwrap();
        let best_mass = best_pot.enclosed_mass(R_E);

        // Truth-vs-envelope agreement on radial bins that contain data.
        let env = uncertainty_envelope(best_chain, settings.burn_in).unwrap();
        let grid = &inputs.radial_grid;
        let mut covered = vec![false; grid.n_bins()];
        for d in &data {
            if let Some(q) = grid.bin_containing(d.r_p) {
                covered[q] = true;
            }
        }
        let (mut covered_bins, mut bins_within) = (0, 0);
        for q in 0..grid.n_bins() {
            if !covered[q] {
                continue;
            }
            covered_bins += 1;
            let (lo, hi) = (grid.edges()[q], grid.edges()[q + 1]);
            let shell = 4.0 / 3.0 * std::f64::consts::PI * (hi.powi(3) - lo.powi(3));
            let truth_avg = (truth.enclosed_mass(hi) - truth.enclosed_mass(lo)) / shell;
            if (env.rho_center[q] - truth_avg).abs() <= env.rho_sigma[q] {
                bins_within += 1;
            }
        }

        let r_hat =
            gelman_rubin(&chains, settings.burn_in, log_enclosed_mass_scalar(R_E)).unwrap();

        RecoveryRun {
            elapsed: t.elapsed().as_secs_f64(),
            best_mass,
            covered_bins,
            bins_within,
            r_hat,
        }
    })
}

#[test]
fn criterion_5_synthetic_round_trip() {
    let run = recovery_run();
    let mass_ok = (run.best_mass - M0).abs() <= 2.0 * DELTA_M0;
    let frac = run.bins_within as f64 / run.covered_bins as f64;
    let pass = mass_ok && frac >= 0.8 && run.elapsed < 900.0;
    report(
        5,
        "synthetic round-trip",
        pass,
        run.elapsed,
        &format!(
            "M_c({R_E}) = {:.3e} (target {M0:.2e} +- {:.1e}); truth inside 1-sigma envelope at {}/{} covered bins",
            run.best_mass,
            2.0 * DELTA_M0,
            run.bins_within,
            run.covered_bins
        ),
    );
}

#[test]
fn criterion_9_multi_chain_consistency() {
    let run = recovery_run();
    let pass = run.r_hat < 1.2;
    report(
        9,
        "multi-chain consistency",
        pass,
        run.elapsed,
        &format!("R-hat on log M_c({R_E}) over 3 dispersed chains = {:.4} (shared criterion-5 fit)", run.r_hat),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: anisotropy bias direction with the constraint off.
// ---------------------------------------------------------------------------

/// Synthesizes one data set and fits one chain without a mass constraint;
/// returns the best configuration's enclosed mass at the reference radius.
fn fitted_mass(kind: ToyDfKind, data_seed: u64, chain_seed: u64) -> f64 {
    let truth = TestPotential::with_enclosed_mass(M0, R_E, 2.0).unwrap();
    let df = ToyDf::new(kind, 0.45 * truth.velocity_scale(), 1.0).unwrap();
    let plan = AnnulusPlan::new(vec![2.0, 5.0, 8.0, 11.0], vec![60; 4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let data = draw_sample(&df, &truth, &plan, 0.0, &mut rng).unwrap();

    let options = InputOptions {
        n_energy_bins: 10,
        n_momentum_bins: 1,
        n_radial_bins: 10,
        r_max_factor: 1.5,
        depth_factor: 2.0,
        likelihood: LikelihoodSettings::new(12, 8, 32, None).unwrap(),
    };
    let inputs = ChainInputs::from_data(&data, GridMode::Isotropic, options).unwrap();
    let settings = SamplerSettings {
        total_steps: 1200,
        n_chains: 1,
        seed: chain_seed,
        ..SamplerSettings::default()
    };
    let chain = run_chain(&data, &inputs, &settings, chain_seed).unwrap();
    let pot = PotentialProfile::from_density(&chain.best().config.rho).unwrap();
    pot.enclosed_mass(R_E)
}

#[test]
fn criterion_6_anisotropy_bias_direction() {
    let t = Instant::now();
    let mut wd_excess = 0;
    let mut gauss_excess = 0;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let m_wd = fitted_mass(ToyDfKind::Wd, 601 + s, 7001 + s);
        let m_gauss = fitted_mass(ToyDfKind::Gauss, 601 + s, 7001 + s);
        wd_excess += (m_wd > M0) as usize;
        gauss_excess += (m_gauss > M0) as usize;
        lines.push(format!("seed {s}: WD {:.2}, Gauss {:.2}", m_wd / M0, m_gauss / M0));
    }
    let elapsed = t.elapsed().as_secs_f64();
    // One-sided: every anisotropic run overestimates; the isotropic-data runs
    // do not show that systematic excess.
    let pass = wd_excess == 5 && gauss_excess < 5;
    report(
        6,
        "anisotropy bias direction",
        pass,
        elapsed,
        &format!(
            "M_c({R_E})/truth: {} -> WD excess {wd_excess}/5, Gauss excess {gauss_excess}/5",
            lines.join("; ")
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: FBST evidence ordering between isotropic and anisotropic data.
// ---------------------------------------------------------------------------

/// Runs the full isotropy test on one synthetic data set; returns ev_standard.
fn evidence_for(kind: ToyDfKind, data_seed: u64, run_seed: u64) -> f64 {
    let truth = TestPotential::with_enclosed_mass(M0, R_E, 2.0).unwrap();
    let df = ToyDf::new(kind, 0.45 * truth.velocity_scale(), 1.0).unwrap();
    let plan = AnnulusPlan::new(vec![2.0, 5.0, 8.0, 11.0], vec![60; 4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let data = draw_sample(&df, &truth, &plan, 0.0, &mut rng).unwrap();

    let options = InputOptions {
        n_energy_bins: 10,
        n_momentum_bins: 1,
        n_radial_bins: 10,
        r_max_factor: 1.5,
        depth_factor: 2.0,
        likelihood: LikelihoodSettings::new(12, 8, 32, None).unwrap(),
    };
    let inputs = ChainInputs::from_data(&data, GridMode::Isotropic, options).unwrap();
    let settings = SamplerSettings {
        total_steps: 1200,
        n_chains: 1,
        seed: run_seed,
        ..SamplerSettings::default()
    };
    let main = run_chain(&data, &inputs, &settings, run_seed).unwrap();
    let fbst_settings = fbst::FbstSettings {
        n_resamples: 6,
        sample_size: data.len(),
        steps_per_run: 300,
        seed: run_seed + 50,
        noise_sigma: 0.0,
    };
    let outcome = fbst::run_fbst(&data, &inputs, &settings, &fbst_settings, &main).unwrap();
    outcome.report.ev_standard
}

#[test]
fn criterion_7_fbst_ordering() {
    let t = Instant::now();
    let mut ordered = 0;
    let mut lines = Vec::new();
    for i in 0..3u64 {
        let ev_gauss = evidence_for(ToyDfKind::Gauss, 801 + i, 8101 + i);
        let ev_wd = evidence_for(ToyDfKind::Wd, 801 + i, 8101 + i);
        ordered += (ev_gauss > ev_wd) as usize;
        lines.push(format!("pair {i}: Gauss {ev_gauss:.3} vs WD {ev_wd:.3}"));
    }
    let elapsed = t.elapsed().as_secs_f64();
    let pass = ordered == 3 && elapsed < 1800.0;
    report(
        7,
        "FBST ordering",
        pass,
        elapsed,
        &format!("ev_standard {} -> ordering held in {ordered}/3 pairs", lines.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: bit-identical artifacts across two binary invocations.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_determinism() {
    let t = Instant::now();
    let dir = std::env::temp_dir()
        .join(format!("phasefit_acceptance_determinism_{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    let bin = env!("CARGO_BIN_EXE_phasefit");

    let synth_out = dir.join("synth");
    let fit_out = dir.join("fit");
    let synth_conf = dir.join("synth.conf");
    let run_conf = dir.join("run.conf");
    std::fs::write(
        &synth_conf,
        format!(
            "mode = synth\noutput = {}\nsynth.kind = gauss\nsynth.edges = 3, 6, 9\n\
             synth.counts = 40, 30, 20\nsynth.noise_sigma = 10.0\nsynth.seed = 33\n",
            synth_out.display()
        ),
    )
    .unwrap();
    std::fs::write(
        &run_conf,
        format!(
            "mode = run\ndata = {}\noutput = {}\ngrid.n_energy = 6\ngrid.n_momentum = 1\n\
             grid.n_radial = 8\nsampler.total_steps = 120\nsampler.steps_per_temperature = 25\n\
             sampler.n_chains = 2\nsampler.seed = 5\n",
            synth_out.join("data.txt").display(),
            fit_out.display()
        ),
    )
    .unwrap();

    let invoke = |conf: &std::path::Path| {
        let out = std::process::Command::new(bin).arg(conf).output().unwrap();
        assert!(
            out.status.success(),
            "invocation failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let snapshot = |files: &[std::path::PathBuf]| -> Vec<Vec<u8>> {
        files.iter().map(|p| std::fs::read(p).unwrap()).collect()
    };

    let synth_files = vec![synth_out.join("data.txt"), synth_out.join("truth.json")];
    let fit_files: Vec<_> = ["trace_0.csv", "trace_1.csv", "rho.csv", "f.csv", "summary.json"]
        .iter()
        .map(|n| fit_out.join(n))
        .collect();

    invoke(&synth_conf);
    invoke(&run_conf);
    let first: Vec<Vec<u8>> = snapshot(&synth_files).into_iter().chain(snapshot(&fit_files)).collect();
    invoke(&synth_conf);
    invoke(&run_conf);
    let second: Vec<Vec<u8>> = snapshot(&synth_files).into_iter().chain(snapshot(&fit_files)).collect();

    let identical = first == second;
    let elapsed = t.elapsed().as_secs_f64();
    report(
        8,
        "determinism",
        identical,
        elapsed,
        &format!("{} artifacts byte-identical across two invocations", first.len()),
    );
}
