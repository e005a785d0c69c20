//! Projection of a model configuration into observable space and the
//! resulting likelihood.
//!
//! For a datum at projected radius `r_p` with line-of-sight velocity `v3`,
//! the probability density is a sum over (E, L) cells of
//!
//! ```text
//! f_cell * 2 * integral_0^x3max  Area_cell(x3, v3)  dx3
//! ```
//!
//! where `Area_cell` is the area of the cell's admissible region in the
//! transverse velocity plane at line-of-sight position `x3`, and `x3max`
//! follows from the outer turning radius of the cell's top energy edge.
//! Measurement errors enter as a Gauss-Hermite convolution over `v3`.
//!
//! The DF normalisation convention makes the predicted density integrate to 1
//! over the observable window `{r_p <= aperture} x all v3` — the cylinder of
//! sky positions where data can appear, not the (larger) radial grid that the
//! potential solve needs; [`window_volumes`] supplies the per-cell weights
//! that [`crate::model::DfHistogram::normalized`] needs for that. Normalising
//! over anything wider than the data window would reward configurations that
//! merely pull predicted density inside it.

use crate::model::{CellBounds, Configuration, DfHistogram, GridMode, KinematicDatum, PhaseGrid};
use crate::potential::PotentialProfile;
use crate::quad;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("invalid likelihood settings: {0}")]
    InvalidSettings(String),
}

/// Optional penalty pulling the enclosed mass at a reference radius toward a
/// measured value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassConstraint {
    /// Target enclosed mass, M_sun.
    pub m0: f64,
    /// 1-sigma uncertainty of the target, M_sun.
    pub delta_m0: f64,
    /// Radius at which the mass is constrained, kpc.
    pub radius: f64,
    /// Penalty weight multiplying |M - m0| / (2 delta_m0); 1 by default.
    pub alpha: f64,
}

/// Quadrature resolutions and the optional mass constraint; quadrature node
/// tables are computed once here and reused for every evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodSettings {
    x3_nodes: usize,
    hermite_nodes: usize,
    v_plane_nodes: usize,
    mass_constraint: Option<MassConstraint>,
    /// Gauss-Legendre rule on [-1, 1] for line-of-sight integration.
    x3_rule: Vec<(f64, f64)>,
    /// Gauss-Hermite rule for the measurement-error convolution.
    gh_rule: Vec<(f64, f64)>,
}

impl LikelihoodSettings {
    pub fn new(
        x3_nodes: usize,
        hermite_nodes: usize,
        v_plane_nodes: usize,
        mass_constraint: Option<MassConstraint>,
    ) -> Result<Self, ProjectionError> {
        if x3_nodes < 2 || hermite_nodes < 2 || v_plane_nodes < 2 {
            return Err(ProjectionError::InvalidSettings(format!(
                "node counts must all be >= 2 (got x3={x3_nodes}, hermite={hermite_nodes}, v_plane={v_plane_nodes})"
            )));
        }
        if let Some(c) = &mass_constraint {
            if !(c.delta_m0 > 0.0) || !(c.radius > 0.0) || !(c.m0 > 0.0) || !(c.alpha >= 0.0) {
                return Err(ProjectionError::InvalidSettings(format!(
                    "mass constraint needs m0 > 0, delta_m0 > 0, radius > 0, alpha >= 0 (got {c:?})"
                )));
            }
        }
        Ok(Self {
            x3_nodes,
            hermite_nodes,
            v_plane_nodes,
            mass_constraint,
            x3_rule: quad::gauss_legendre(x3_nodes),
            gh_rule: quad::gauss_hermite(hermite_nodes),
        })
    }

    pub fn x3_nodes(&self) -> usize {
        self.x3_nodes
    }

    pub fn hermite_nodes(&self) -> usize {
        self.hermite_nodes
    }

    pub fn v_plane_nodes(&self) -> usize {
        self.v_plane_nodes
    }

    pub fn mass_constraint(&self) -> Option<&MassConstraint> {
        self.mass_constraint.as_ref()
    }
}

impl Default for LikelihoodSettings {
    fn default() -> Self {
        Self::new(12, 8, 32, None).expect("default settings are valid")
    }
}

/// Closed-form annulus area between the two energy circles in the transverse
/// velocity plane (isotropic case), clipped at zero.
#[inline]
fn annulus_area(e_lo: f64, e_hi: f64, phi: f64, v3: f64) -> f64 {
    let hi = 2.0 * (e_hi - phi) - v3 * v3;
    if hi <= 0.0 {
        return 0.0;
    }
    let lo = (2.0 * (e_lo - phi) - v3 * v3).max(0.0);
    PI * (hi - lo)
}

/// Midpoint polar quadrature of the admissible transverse-velocity area when
/// the cell also bounds |L|; the angular momentum is evaluated at the true
/// 3-D position (r_p, 0, x3).
fn polar_area(cell: &CellBounds, r_p: f64, x3: f64, v3: f64, phi: f64, nodes: usize) -> f64 {
    let u_max = 2.0 * (cell.e_hi - phi) - v3 * v3;
    if u_max <= 0.0 {
        return 0.0;
    }
    let r2 = r_p * r_p + x3 * x3;
    let du = u_max / nodes as f64;
    let da = 2.0 * PI / nodes as f64;
    let mut area = 0.0;
    for j in 0..nodes {
        let u = (j as f64 + 0.5) * du; // u = v_perp^2
        let e = phi + 0.5 * (u + v3 * v3);
        if e < cell.e_lo || e >= cell.e_hi {
            continue;
        }
        let v_perp = u.sqrt();
        let mut hits = 0usize;
        for k in 0..nodes {
            let a = (k as f64 + 0.5) * da;
            let v1 = v_perp * a.cos();
            let v2 = v_perp * a.sin();
            // L^2 = |x|^2 |v|^2 - (x . v)^2 with x = (r_p, 0, x3)
            let xv = r_p * v1 + x3 * v3;
            let l2 = r2 * (v1 * v1 + v2 * v2 + v3 * v3) - xv * xv;
            let l = l2.max(0.0).sqrt();
            if l >= cell.l_lo && l < cell.l_hi {
                hits += 1;
            }
        }
        // dv1 dv2 = (1/2) du d(angle)
        area += hits as f64 * 0.5 * du * da;
    }
    area
}

/// Area of the cell's admissible region in the (v1, v2) plane at the
/// line-of-sight position (r_p, 0, x3). Isotropic mode ignores the cell's
/// angular-momentum bounds (closed form); two-integral mode resolves them by
/// midpoint quadrature.
pub fn velocity_plane_area(
    cell: &CellBounds,
    r_p: f64,
    x3: f64,
    v3: f64,
    pot: &PotentialProfile,
    mode: GridMode,
    settings: &LikelihoodSettings,
) -> f64 {
    let phi = pot.phi((r_p * r_p + x3 * x3).sqrt());
    match mode {
        GridMode::Isotropic => annulus_area(cell.e_lo, cell.e_hi, phi, v3),
        GridMode::TwoIntegral => polar_area(cell, r_p, x3, v3, phi, settings.v_plane_nodes),
    }
}

/// Shared line-of-sight integration kernel, isotropic case. `r_out` is the
/// outer turning radius of the cell's top edge (already checked > r_p);
/// `r_in`, when present, is the turning radius of the bottom edge and marks
/// the kink where the inner energy circle closes, so the integral is split
/// there and each piece is smooth.
fn cell_eta_iso(
    e_lo: f64,
    e_hi: f64,
    f_cell: f64,
    r_p: f64,
    v3: f64,
    r_in: Option<f64>,
    r_out: f64,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> f64 {
    let x3_hi = (r_out * r_out - r_p * r_p).sqrt();
    let x3_mid = r_in
        .filter(|&ri| ri > r_p)
        .map(|ri| (ri * ri - r_p * r_p).sqrt().min(x3_hi));
    let mut segments = [(0.0, x3_hi), (0.0, 0.0)];
    let n_seg = match x3_mid {
        Some(m) if m < x3_hi => {
            segments = [(0.0, m), (m, x3_hi)];
            2
        }
        _ => 1,
    };
    let mut acc = 0.0;
    for &(a, b) in &segments[..n_seg] {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for &(t, w) in &settings.x3_rule {
            let x3 = mid + half * t;
            let phi = pot.phi((r_p * r_p + x3 * x3).sqrt());
            acc += half * w * annulus_area(e_lo, e_hi, phi, v3);
        }
    }
    f_cell * 2.0 * acc
}

/// Shared line-of-sight integration kernel, two-integral case.
fn cell_eta_two(
    cell: &CellBounds,
    f_cell: f64,
    r_p: f64,
    v3: f64,
    r_out: f64,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> f64 {
    let x3_hi = (r_out * r_out - r_p * r_p).sqrt();
    let half = 0.5 * x3_hi;
    let mut acc = 0.0;
    for &(t, w) in &settings.x3_rule {
        let x3 = half + half * t;
        let phi = pot.phi((r_p * r_p + x3 * x3).sqrt());
        acc += half * w * polar_area(cell, r_p, x3, v3, phi, settings.v_plane_nodes);
    }
    f_cell * 2.0 * acc
}

/// Contribution of a single cell to one datum's probability density, at face
/// value `v3` (no error convolution). Callers composing a full probability
/// must extend the most-bound cell's lower edge to the potential floor, as
/// [`datum_probability`] does.
pub fn cell_contribution(
    cell: &CellBounds,
    f_cell: f64,
    r_p: f64,
    v3: f64,
    pot: &PotentialProfile,
    mode: GridMode,
    settings: &LikelihoodSettings,
) -> f64 {
    if f_cell == 0.0 {
        return 0.0;
    }
    match mode {
        GridMode::Isotropic => {
            let Some(r_out) = pot.outer_turning_radius(cell.e_hi, 0.0, v3) else {
                return 0.0;
            };
            if r_out <= r_p {
                return 0.0;
            }
            let r_in = pot.outer_turning_radius(cell.e_lo, 0.0, v3);
            cell_eta_iso(cell.e_lo, cell.e_hi, f_cell, r_p, v3, r_in, r_out, pot, settings)
        }
        GridMode::TwoIntegral => {
            let Some(r_out) = pot.outer_turning_radius(cell.e_hi, cell.l_lo, v3) else {
                return 0.0;
            };
            if r_out <= r_p {
                return 0.0;
            }
            cell_eta_two(cell, f_cell, r_p, v3, r_out, pot, settings)
        }
    }
}

/// Unconvolved probability density at (r_p, v3): the sum of all cell
/// contributions, with turning radii shared across adjacent cells.
fn eta_raw(
    r_p: f64,
    v3: f64,
    df: &DfHistogram,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> f64 {
    let grid = df.grid();
    let floor = grid.energy_floor().min(pot.phi_min());
    match grid.mode() {
        GridMode::Isotropic => {
            let edges = grid.energy_edges();
            let n_e = grid.n_energy_bins();
            let edge_energy = |k: usize| if k == 0 { floor } else { edges[k] };
            let r_edge: Vec<Option<f64>> = (0..=n_e)
                .map(|k| pot.outer_turning_radius(edge_energy(k), 0.0, v3))
                .collect();
            let mut total = 0.0;
            for e in 0..n_e {
                let f_cell = df.value(e, 0);
                if f_cell == 0.0 {
                    continue;
                }
                let Some(r_out) = r_edge[e + 1] else { continue };
                if r_out <= r_p {
                    continue;
                }
                total += cell_eta_iso(
                    edge_energy(e),
                    edges[e + 1],
                    f_cell,
                    r_p,
                    v3,
                    r_edge[e],
                    r_out,
                    pot,
                    settings,
                );
            }
            total
        }
        GridMode::TwoIntegral => {
            let mut total = 0.0;
            for (e, l, mut cell) in grid.cells() {
                let f_cell = df.value(e, l);
                if f_cell == 0.0 {
                    continue;
                }
                if e == 0 {
                    cell.e_lo = floor;
                }
                let Some(r_out) = pot.outer_turning_radius(cell.e_hi, cell.l_lo, v3) else {
                    continue;
                };
                if r_out <= r_p {
                    continue;
                }
                total += cell_eta_two(&cell, f_cell, r_p, v3, r_out, pot, settings);
            }
            total
        }
    }
}

/// Probability density of one datum under the configuration, including the
/// Gaussian measurement-error convolution (skipped exactly when sigma = 0).
pub fn datum_probability(
    datum: &KinematicDatum,
    theta: &Configuration,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> f64 {
    if datum.sigma_v3 == 0.0 {
        return eta_raw(datum.r_p, datum.v3, &theta.df, pot, settings);
    }
    let scale = std::f64::consts::SQRT_2 * datum.sigma_v3;
    let inv_sqrt_pi = 1.0 / PI.sqrt();
    let mut total = 0.0;
    for &(x, w) in &settings.gh_rule {
        total += w * eta_raw(datum.r_p, datum.v3 + scale * x, &theta.df, pot, settings);
    }
    total * inv_sqrt_pi
}

/// Sum of log datum probabilities in data order; -infinity when any datum
/// has zero (or non-finite) probability, signalling zero support.
pub fn log_likelihood(
    data: &[KinematicDatum],
    theta: &Configuration,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> f64 {
    let mut total = 0.0;
    for datum in data {
        let eta = datum_probability(datum, theta, pot, settings);
        if !(eta > 0.0) || !eta.is_finite() {
            return f64::NEG_INFINITY;
        }
        total += eta.ln();
    }
    total
}

/// Linear mass-constraint penalty alpha |M(<radius) - m0| / (2 delta_m0);
/// zero when no constraint is configured.
pub fn mass_penalty(pot: &PotentialProfile, settings: &LikelihoodSettings) -> f64 {
    match settings.mass_constraint() {
        Some(c) => c.alpha * (pot.enclosed_mass(c.radius) - c.m0).abs() / (2.0 * c.delta_m0),
        None => 0.0,
    }
}

/// Log-likelihood and penalty of a configuration, kept separate so traces can
/// report both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedLogLikelihood {
    pub log_likelihood: f64,
    pub penalty: f64,
}

impl PenalizedLogLikelihood {
    pub fn penalized(&self) -> f64 {
        self.log_likelihood - self.penalty
    }
}

pub fn penalized_log_likelihood(
    data: &[KinematicDatum],
    theta: &Configuration,
    pot: &PotentialProfile,
    settings: &LikelihoodSettings,
) -> PenalizedLogLikelihood {
    PenalizedLogLikelihood {
        log_likelihood: log_likelihood(data, theta, pot, settings),
        penalty: mass_penalty(pot, settings),
    }
}

/// Nodes per radial shell for the window-volume integrals.
const WINDOW_NODES: usize = 16;

/// Observable-window volume of every cell: the 6-D phase-space volume of the
/// cell restricted to projected radii inside the aperture, which is exactly
/// the integral of the predicted observable density over
/// `{r_p <= aperture} x all v3`. The velocity part is closed-form and the
/// line-of-sight direction reduces to a geometric sky fraction per sphere,
/// leaving one radial integral per shell.
///
/// `aperture` is the largest projected radius at which data can appear; pass
/// at least the grid's outer edge to normalise over the whole modelled
/// sphere instead.
///
/// These are the weights for [`crate::model::DfHistogram::normalized`]; they
/// depend only on the grid, the potential and the aperture, not on
/// likelihood settings.
pub fn window_volumes(grid: &PhaseGrid, pot: &PotentialProfile, aperture: f64) -> Vec<f64> {
    let rule = quad::gauss_legendre(WINDOW_NODES);
    let floor = grid.energy_floor().min(pot.phi_min());
    let edges = pot.grid().edges();
    let edge_phi = pot.phi_at_edges();
    // Fraction of the radius-r sphere whose projected radius lies inside the
    // aperture (the line of sight is a fixed axis; cos of the polar angle is
    // uniform on a sphere).
    let sky_fraction = |r: f64| -> f64 {
        if r <= aperture {
            1.0
        } else {
            1.0 - (1.0 - (aperture / r).powi(2)).max(0.0).sqrt()
        }
    };
    let mut out = vec![0.0; grid.n_cells()];
    for (e, l, mut cell) in grid.cells() {
        if e == 0 {
            cell.e_lo = floor;
        }
        let mut w = 0.0;
        for q in 0..pot.grid().n_bins() {
            // The potential rises outward: once a shell starts above the
            // cell's top energy nothing further can contribute.
            if edge_phi[q] >= cell.e_hi {
                break;
            }
            // Split the shell at the aperture radius: sky_fraction has a
            // square-root kink there that plain Gauss-Legendre handles badly.
            let mut segments = [(edges[q], edges[q + 1]), (0.0, 0.0)];
            let mut n_seg = 1;
            if edges[q] < aperture && aperture < edges[q + 1] {
                segments = [(edges[q], aperture), (aperture, edges[q + 1])];
                n_seg = 2;
            }
            for &(lo, hi) in &segments[..n_seg] {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                for &(t, wq) in &rule {
                    let r = mid + half * t;
                    let vol = velocity_volume(&cell, pot.phi(r), r, grid.mode());
                    w += half * wq * 4.0 * PI * r * r * sky_fraction(r) * vol;
                }
            }
        }
        out[grid.cell_index(e, l)] = w;
    }
    out
}

/// Velocity-space volume of a cell at radius r (closed form).
fn velocity_volume(cell: &CellBounds, phi: f64, r: f64, mode: GridMode) -> f64 {
    let a_hi = 2.0 * (cell.e_hi - phi);
    if a_hi <= 0.0 {
        return 0.0;
    }
    let a_lo = 2.0 * (cell.e_lo - phi);
    let cone = 4.0 * PI / 3.0;
    match mode {
        GridMode::Isotropic => {
            cone * (a_hi.powf(1.5) - a_lo.max(0.0).powf(1.5))
        }
        GridMode::TwoIntegral => {
            let u1 = (cell.l_lo / r).powi(2);
            let u2 = (cell.l_hi / r).powi(2);
            let p = |x: f64| x.max(0.0).powf(1.5);
            cone * (p(a_hi - u1) - p(a_hi - u2) - p(a_lo - u1) + p(a_lo - u2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DensityHistogram, PhaseGrid, RadialGrid};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn constant_pot(phi0: f64) -> PotentialProfile {
        let grid = RadialGrid::new(vec![0.0, 5.0, 10.0]).unwrap();
        PotentialProfile::constant(grid, phi0)
    }

    /// Galaxy-scale fixture: Phi(0) ~ -2.4e5 (km/s)^2, so escape speeds run
    /// 500-700 km/s and the test velocities below are comfortably bound.
    fn uniform_pot() -> PotentialProfile {
        let grid = RadialGrid::new(vec![0.0, 2.0, 4.0, 7.0, 10.0]).unwrap();
        let h = DensityHistogram::new(grid, vec![3.0e8, 2.0e8, 1.0e8, 4.0e7]).unwrap();
        PotentialProfile::from_density(&h).unwrap()
    }

    fn uniform_rho() -> DensityHistogram {
        let grid = RadialGrid::new(vec![0.0, 2.0, 4.0, 7.0, 10.0]).unwrap();
        DensityHistogram::new(grid, vec![3.0e8, 2.0e8, 1.0e8, 4.0e7]).unwrap()
    }

    fn cell(e_lo: f64, e_hi: f64) -> CellBounds {
        CellBounds { e_lo, e_hi, l_lo: 0.0, l_hi: f64::MAX }
    }

    #[test]
    fn annulus_area_regimes() {
        let s = LikelihoodSettings::default();
        let pot = constant_pot(-1000.0);
        let c = cell(-600.0, -400.0);
        // Fully inside both circles: area = 2 pi (e_hi - e_lo).
        let a = velocity_plane_area(&c, 1.0, 2.0, 10.0, &pot, GridMode::Isotropic, &s);
        assert_relative_eq!(a, 2.0 * PI * 200.0, epsilon = 1e-12);
        // v3 too fast for the cell: zero.
        let a = velocity_plane_area(&c, 1.0, 2.0, 40.0, &pot, GridMode::Isotropic, &s);
        assert_eq!(a, 0.0);
        // Straddling the inner circle: pi (2 (e_hi - phi) - v3^2).
        let a = velocity_plane_area(&c, 1.0, 2.0, 30.0, &pot, GridMode::Isotropic, &s);
        assert_relative_eq!(a, PI * (2.0 * 600.0 - 900.0), epsilon = 1e-12);
    }

    #[test]
    fn polar_area_reduces_to_annulus_without_momentum_bounds() {
        let s = LikelihoodSettings::new(12, 8, 256, None).unwrap();
        let pot = uniform_pot();
        let c = cell(0.7 * pot.phi_min(), 0.2 * pot.phi_min());
        let (r_p, x3, v3) = (1.5, 2.5, 40.0);
        let iso = velocity_plane_area(&c, r_p, x3, v3, &pot, GridMode::Isotropic, &s);
        let two = velocity_plane_area(&c, r_p, x3, v3, &pot, GridMode::TwoIntegral, &s);
        assert!(iso > 0.0);
        assert_relative_eq!(two, iso, max_relative = 0.01);
    }

    #[test]
    fn separable_cell_contribution_on_constant_potential() {
        // Constant potential: the area does not depend on x3, so the
        // line-of-sight integral is exactly 2 * x3max * area, with x3max from
        // the r_max clamp.
        let phi0 = -1.0e5;
        let pot = constant_pot(phi0);
        let s = LikelihoodSettings::default();
        let c = cell(phi0, 0.0);
        let (f_cell, r_p, v3) = (3.5, 3.0, 50.0);
        let got = cell_contribution(&c, f_cell, r_p, v3, &pot, GridMode::Isotropic, &s);
        let x3max = (pot.r_max().powi(2) - r_p * r_p).sqrt();
        let area = PI * (2.0 * (0.0 - phi0) - v3 * v3);
        assert_relative_eq!(got, f_cell * 2.0 * x3max * area, max_relative = 1e-12);
    }

    #[test]
    fn datum_probability_is_sum_of_cell_contributions() {
        let pot = uniform_pot();
        let s = LikelihoodSettings::default();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 5, 100.0, 1, GridMode::Isotropic).unwrap();
        let df = crate::model::DfHistogram::new(grid.clone(), vec![5.0, 4.0, 2.5, 1.0, 0.5]).unwrap();
        let rho = uniform_rho();
        let theta = Configuration::new(df.clone(), rho);
        let datum = KinematicDatum { r_p: 2.2, v3: 120.0, sigma_v3: 0.0 };

        let direct = datum_probability(&datum, &theta, &pot, &s);
        assert!(direct > 0.0);
        let mut manual = 0.0;
        for (e, l, mut c) in grid.cells() {
            if e == 0 {
                c.e_lo = c.e_lo.min(phi_min);
            }
            manual += cell_contribution(&c, df.value(e, l), datum.r_p, datum.v3, &pot, grid.mode(), &s);
        }
        assert_eq!(direct, manual); // bitwise: same kernels, same order
    }

    #[test]
    fn gauss_hermite_convolution_matches_analytic_quadratic() {
        // On a constant potential with the cell spanning the whole bound
        // range, eta(v) = 2 x3max pi (2(e_hi - phi0) - v^2) is quadratic in v,
        // so the Gaussian convolution is analytic:
        // E[eta(v + sigma Z)] = eta(v) - 2 x3max pi sigma^2.
        let phi0 = -2.0e5;
        let pot = constant_pot(phi0);
        let s = LikelihoodSettings::default();
        let grid = PhaseGrid::new(vec![phi0, 0.0], vec![0.0, 1.0e4], GridMode::Isotropic).unwrap();
        let df = crate::model::DfHistogram::new(grid, vec![1.0]).unwrap();
        let rho = DensityHistogram::new(pot.grid().clone(), vec![0.0, 0.0]).unwrap();
        let theta = Configuration::new(df, rho);
        let (r_p, v3, sigma) = (3.0, 50.0, 30.0);
        let x3max = (pot.r_max().powi(2) - r_p * r_p).sqrt();
        let eta0 = 2.0 * x3max * PI * (2.0 * (0.0 - phi0) - v3 * v3 - sigma * sigma);
        let got = datum_probability(
            &KinematicDatum { r_p, v3, sigma_v3: sigma },
            &theta,
            &pot,
            &s,
        );
        assert_relative_eq!(got, eta0, max_relative = 1e-10);

        // sigma = 0 must bypass the convolution: the result cannot depend on
        // the Gauss-Hermite rule, bit for bit.
        let coarse = LikelihoodSettings::new(12, 2, 32, None).unwrap();
        let d0 = KinematicDatum { r_p, v3, sigma_v3: 0.0 };
        let raw = datum_probability(&d0, &theta, &pot, &s);
        assert_eq!(raw, datum_probability(&d0, &theta, &pot, &coarse));
        assert_relative_eq!(
            raw,
            2.0 * x3max * PI * (2.0 * (0.0 - phi0) - v3 * v3),
            max_relative = 1e-13
        );
    }

    #[test]
    fn doubling_x3_nodes_changes_probability_below_half_percent() {
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 6, 100.0, 1, GridMode::Isotropic).unwrap();
        let df = crate::model::DfHistogram::new(grid, vec![6.0, 5.0, 3.0, 2.0, 1.0, 0.4]).unwrap();
        let rho = uniform_rho();
        let theta = Configuration::new(df, rho);
        let s12 = LikelihoodSettings::new(12, 8, 32, None).unwrap();
        let s24 = LikelihoodSettings::new(24, 8, 32, None).unwrap();
        for &(r_p, v3) in &[(0.5, 30.0), (2.0, 150.0), (5.0, 90.0), (8.5, 10.0)] {
            let d = KinematicDatum { r_p, v3, sigma_v3: 12.0 };
            let a = datum_probability(&d, &theta, &pot, &s12);
            let b = datum_probability(&d, &theta, &pot, &s24);
            assert!(a > 0.0);
            assert!((a - b).abs() / b < 5e-3, "x3 quadrature not converged: {a} vs {b}");
        }
    }

    #[test]
    fn zero_support_datum_gives_neg_infinity() {
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        // One deeply bound cell only: a fast datum far out is unreachable.
        let grid =
            PhaseGrid::new(vec![phi_min, 0.9 * phi_min], vec![0.0, 100.0], GridMode::Isotropic)
                .unwrap();
        let df = crate::model::DfHistogram::new(grid, vec![1.0]).unwrap();
        let rho = uniform_rho();
        let theta = Configuration::new(df, rho);
        let s = LikelihoodSettings::default();
        let inside = KinematicDatum { r_p: 0.3, v3: 10.0, sigma_v3: 0.0 };
        let unreachable = KinematicDatum { r_p: 9.5, v3: 600.0, sigma_v3: 0.0 };
        assert!(log_likelihood(&[inside], &theta, &pot, &s).is_finite());
        assert_eq!(
            log_likelihood(&[inside, unreachable], &theta, &pot, &s),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log_likelihood_sums_in_data_order() {
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 4, 100.0, 1, GridMode::Isotropic).unwrap();
        let df = crate::model::DfHistogram::new(grid, vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let rho = uniform_rho();
        let theta = Configuration::new(df, rho);
        let s = LikelihoodSettings::default();
        let data = [
            KinematicDatum { r_p: 0.5, v3: 40.0, sigma_v3: 5.0 },
            KinematicDatum { r_p: 3.0, v3: -120.0, sigma_v3: 5.0 },
            KinematicDatum { r_p: 6.0, v3: 80.0, sigma_v3: 5.0 },
        ];
        let expect = data
            .iter()
            .map(|d| datum_probability(d, &theta, &pot, &s).ln())
            .fold(0.0, |acc, x| acc + x);
        assert_eq!(log_likelihood(&data, &theta, &pot, &s), expect);
    }

    #[test]
    fn mass_penalty_matches_worked_example() {
        let pot = uniform_pot();
        let m_at_5 = pot.enclosed_mass(5.0);
        // Build a constraint offset from the true value by exactly 2 sigma.
        let delta = 0.2e11;
        let c = MassConstraint { m0: m_at_5 - 0.4e11, delta_m0: delta, radius: 5.0, alpha: 1.0 };
        let s = LikelihoodSettings::new(12, 8, 32, Some(c)).unwrap();
        assert_relative_eq!(mass_penalty(&pot, &s), 1.0, epsilon = 1e-12);
        // The weight scales linearly and alpha = 0 switches the pull off.
        let s3 = LikelihoodSettings::new(12, 8, 32, Some(MassConstraint { alpha: 3.0, ..c })).unwrap();
        assert_relative_eq!(mass_penalty(&pot, &s3), 3.0, epsilon = 1e-12);
        // No constraint: penalty exactly zero, penalised == raw.
        let s0 = LikelihoodSettings::default();
        assert_eq!(mass_penalty(&pot, &s0), 0.0);
    }

    #[test]
    fn settings_validation() {
        assert!(LikelihoodSettings::new(1, 8, 32, None).is_err());
        let bad = MassConstraint { m0: 1.0, delta_m0: 0.0, radius: 1.0, alpha: 1.0 };
        assert!(LikelihoodSettings::new(12, 8, 32, Some(bad)).is_err());
        let bad = MassConstraint { m0: 1.0, delta_m0: 1.0, radius: 1.0, alpha: -0.5 };
        assert!(LikelihoodSettings::new(12, 8, 32, Some(bad)).is_err());
    }

    #[test]
    fn normalized_df_integrates_to_one_over_window() {
        // Monte-Carlo check of window_volumes: integrate the predicted
        // density over the observable window and compare to 1.
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 5, 100.0, 1, GridMode::Isotropic).unwrap();
        let df = crate::model::DfHistogram::new(grid.clone(), vec![5.0, 4.0, 2.5, 1.0, 0.5]).unwrap();
        let vols = window_volumes(&grid, &pot, pot.r_max());
        let df = df.normalized(&vols).unwrap();
        let rho = uniform_rho();
        let theta = Configuration::new(df, rho);
        let s = LikelihoodSettings::new(24, 8, 32, None).unwrap();

        // integral over the plane-of-sky disc and v3 of eta(r_p, v3):
        // 2 pi r_p dr_p dv3, by tensor quadrature (eta is smooth enough).
        let r_max = pot.r_max();
        let v_esc = (-2.0 * phi_min).sqrt();
        let mut total = 0.0;
        for (r_p, wr) in quad::gauss_legendre_on(48, 0.0, r_max) {
            for (v3, wv) in quad::gauss_legendre_on(48, -v_esc, v_esc) {
                let eta = datum_probability(
                    &KinematicDatum { r_p, v3, sigma_v3: 0.0 },
                    &theta,
                    &pot,
                    &s,
                );
                total += wr * wv * 2.0 * PI * r_p * eta;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 5e-3);
    }

    #[test]
    fn normalized_df_integrates_to_one_inside_aperture() {
        // Same check as above but with a data window narrower than the grid:
        // the density must integrate to 1 over projected radii inside the
        // aperture even though orbits (and the grid) extend beyond it.
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 5, 100.0, 1, GridMode::Isotropic).unwrap();
        let aperture = 0.6 * pot.r_max();
        let df = crate::model::DfHistogram::new(grid.clone(), vec![5.0, 4.0, 2.5, 1.0, 0.5]).unwrap();
        let vols = window_volumes(&grid, &pot, aperture);
        let df = df.normalized(&vols).unwrap();
        let theta = Configuration::new(df, uniform_rho());
        let s = LikelihoodSettings::new(24, 8, 32, None).unwrap();

        let v_esc = (-2.0 * phi_min).sqrt();
        let mut total = 0.0;
        for (r_p, wr) in quad::gauss_legendre_on(48, 0.0, aperture) {
            for (v3, wv) in quad::gauss_legendre_on(48, -v_esc, v_esc) {
                let eta = datum_probability(
                    &KinematicDatum { r_p, v3, sigma_v3: 0.0 },
                    &theta,
                    &pot,
                    &s,
                );
                total += wr * wv * 2.0 * PI * r_p * eta;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 5e-3);
    }

    #[test]
    fn probability_invariant_under_rescale_then_renormalize() {
        let pot = uniform_pot();
        let phi_min = pot.phi_min();
        let grid = PhaseGrid::linear(phi_min, 5, 100.0, 1, GridMode::Isotropic).unwrap();
        let vols = window_volumes(&grid, &pot, pot.r_max());
        let base = crate::model::DfHistogram::new(grid.clone(), vec![5.0, 4.0, 2.5, 1.0, 0.5])
            .unwrap()
            .normalized(&vols)
            .unwrap();
        let mut scaled = base.clone();
        for v in scaled.values_mut() {
            *v *= 137.0;
        }
        let renorm = scaled.normalized(&vols).unwrap();
        let rho = uniform_rho();
        let s = LikelihoodSettings::default();
        let d = KinematicDatum { r_p: 2.0, v3: 100.0, sigma_v3: 8.0 };
        let a = datum_probability(&d, &Configuration::new(base, rho.clone()), &pot, &s);
        let b = datum_probability(&d, &Configuration::new(renorm, rho), &pot, &s);
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }
}
