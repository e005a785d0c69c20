//! Spherical Poisson solver for histogram densities.
//!
//! For a piecewise-constant density on radial shells, both the enclosed mass
//! and the potential have closed forms per shell:
//!
//! ```text
//! Phi(r) = -G [ M(<r)/r + 4 pi * integral_r^rmax rho(s) s ds ],   Phi(inf) = 0
//! ```
//!
//! so evaluation is a shell lookup plus a handful of arithmetic operations,
//! with no numerical integration error anywhere.

use crate::model::{DensityHistogram, RadialGrid};
use crate::G;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("density bin {bin} is negative ({value}); cannot solve the potential")]
    NegativeDensity { bin: usize, value: f64 },
}

/// Relative tolerance for turning-radius root finding.
const ROOT_REL_TOL: f64 = 1e-10;

/// Subdivisions per shell when bracketing the outer turning radius of an
/// orbit with angular momentum (the effective potential is not monotone).
const BRACKET_STEPS: usize = 16;

/// Potential, enclosed mass and turning radii implied by one density
/// histogram, in the gauge Phi(infinity) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    grid: RadialGrid,
    density: Vec<f64>,
    /// M(< edge_q), one per edge.
    edge_mass: Vec<f64>,
    /// 4 pi * integral_{edge_q}^{rmax} rho s ds, one per edge.
    edge_line: Vec<f64>,
    /// Phi(edge_q), one per edge.
    edge_phi: Vec<f64>,
    /// Test-fixture mode: a spatially constant potential with zero mass.
    constant: Option<f64>,
}

impl PotentialProfile {
    pub fn from_density(h: &DensityHistogram) -> Result<Self, PotentialError> {
        let grid = h.grid().clone();
        let density = h.values().to_vec();
        if let Some((bin, &value)) = density.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(PotentialError::NegativeDensity { bin, value });
        }
        let edges = grid.edges();
        let n = grid.n_bins();

        let mut edge_mass = vec![0.0; n + 1];
        for q in 0..n {
            let shell = 4.0 * std::f64::consts::PI / 3.0
                * density[q]
                * (edges[q + 1].powi(3) - edges[q].powi(3));
            edge_mass[q + 1] = edge_mass[q] + shell;
        }

        // Accumulated inward from the boundary, where it vanishes.
        let mut edge_line = vec![0.0; n + 1];
        for q in (0..n).rev() {
            edge_line[q] = edge_line[q + 1]
                + 2.0 * std::f64::consts::PI * density[q] * (edges[q + 1].powi(2) - edges[q].powi(2));
        }

        let mut edge_phi = vec![0.0; n + 1];
        edge_phi[0] = -G * edge_line[0]; // M(<r)/r -> 0 at the centre
        for q in 1..=n {
            edge_phi[q] = -G * (edge_mass[q] / edges[q] + edge_line[q]);
        }

        Ok(Self { grid, density, edge_mass, edge_line, edge_phi, constant: None })
    }

    /// Test fixture: a profile whose potential is `phi0` everywhere on the
    /// grid and which encloses no mass. Useful for separability checks where
    /// projection integrands must not vary along the line of sight.
    #[doc(hidden)]
    pub fn constant(grid: RadialGrid, phi0: f64) -> Self {
        let n = grid.n_bins();
        Self {
            grid,
            density: vec![0.0; n],
            edge_mass: vec![0.0; n + 1],
            edge_line: vec![0.0; n + 1],
            edge_phi: vec![phi0; n + 1],
            constant: Some(phi0),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn r_max(&self) -> f64 {
        self.grid.r_max()
    }

    pub fn total_mass(&self) -> f64 {
        *self.edge_mass.last().unwrap()
    }

    /// Central (deepest) potential value.
    pub fn phi_min(&self) -> f64 {
        self.edge_phi[0]
    }

    /// Potential at the grid boundary.
    pub fn phi_at_rmax(&self) -> f64 {
        *self.edge_phi.last().unwrap()
    }

    /// Potential at every radial bin edge, innermost first.
    pub fn phi_at_edges(&self) -> &[f64] {
        &self.edge_phi
    }

    /// Shell index for an interior radius (0 <= r < r_max).
    #[inline]
    fn shell_of(&self, r: f64) -> usize {
        self.grid.edges().partition_point(|&e| e <= r) - 1
    }

    /// Gravitational potential at radius `r >= 0`, in (km/s)^2.
    pub fn phi(&self, r: f64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        debug_assert!(r >= 0.0);
        if r == 0.0 {
            return self.edge_phi[0];
        }
        if r >= self.r_max() {
            return -G * self.total_mass() / r;
        }
        let q = self.shell_of(r);
        let edges = self.grid.edges();
        let rho = self.density[q];
        let m_in = self.edge_mass[q]
            + 4.0 * std::f64::consts::PI / 3.0 * rho * (r.powi(3) - edges[q].powi(3));
        // Remaining part of this shell's line integral plus everything outside.
        let line = 2.0 * std::f64::consts::PI * rho * (edges[q + 1].powi(2) - r * r)
            + self.edge_line[q + 1];
        -G * (m_in / r + line)
    }

    /// Mass enclosed within radius `r`, in M_sun.
    pub fn enclosed_mass(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        if r >= self.r_max() {
            return self.total_mass();
        }
        let q = self.shell_of(r);
        self.edge_mass[q]
            + 4.0 * std::f64::consts::PI / 3.0
                * self.density[q]
                * (r.powi(3) - self.grid.edges()[q].powi(3))
    }

    /// Largest radius with Phi(r) <= target (the potential is non-decreasing
    /// for non-negative densities). Clamps to r_max when the whole grid
    /// satisfies the bound; None when no radius does.
    fn invert_phi(&self, target: f64) -> Option<f64> {
        if self.phi_at_rmax() <= target {
            return Some(self.r_max());
        }
        if self.phi_min() > target {
            return None;
        }
        // Find the shell where Phi crosses the target, then bisect inside it.
        let q = self.edge_phi.partition_point(|&p| p <= target) - 1;
        let edges = self.grid.edges();
        let (mut lo, mut hi) = (edges[q], edges[q + 1]);
        while hi - lo > ROOT_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.phi(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Outermost radius accessible to an orbit whose energy-cell top edge is
    /// `e_top`, with angular momentum `l` and line-of-sight velocity `v3`:
    /// the largest root of `e_top = v3^2/2 + l^2/(2 r^2) + Phi(r)`.
    ///
    /// Returns `Some(r_max)` when the orbit is unbound within the grid
    /// (clamp) and `None` when no radius is accessible.
    pub fn outer_turning_radius(&self, e_top: f64, l: f64, v3: f64) -> Option<f64> {
        let c = e_top - 0.5 * v3 * v3;
        if l == 0.0 {
            if let Some(phi0) = self.constant {
                return if phi0 <= c { Some(self.r_max()) } else { None };
            }
            return self.invert_phi(c);
        }
        let g = |r: f64| self.phi(r) + 0.5 * l * l / (r * r);
        if g(self.r_max()) <= c {
            return Some(self.r_max());
        }
        // Scan inward for a bracket; the effective potential diverges at the
        // centre, so the first sign change from outside is the outer root.
        let edges = self.grid.edges();
        let mut r_hi = self.r_max();
        for q in (0..self.grid.n_bins()).rev() {
            let lo_edge = edges[q];
            for k in (0..BRACKET_STEPS).rev() {
                let r_lo = lo_edge
                    + (edges[q + 1] - lo_edge) * k as f64 / BRACKET_STEPS as f64;
                if r_lo == 0.0 {
                    break;
                }
                if g(r_lo) <= c {
                    let (mut lo, mut hi) = (r_lo, r_hi);
                    while hi - lo > ROOT_REL_TOL * hi {
                        let mid = 0.5 * (lo + hi);
                        if g(mid) <= c {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    return Some(0.5 * (lo + hi));
                }
                r_hi = r_lo;
            }
        }
        None
    }
}
