//! Model state: histogram discretisations of the distribution function and
//! the radial mass density, plus the kinematic datum type.
//!
//! Histograms are plain containers; construction only checks structural
//! sanity (finite values, matching lengths). The flat-prior support
//! constraints — positivity and monotonicity — live in [`DensityHistogram::is_valid`]
//! and [`DfHistogram::is_valid`], which the sampler consults when judging
//! proposals. Keeping the predicate separate from construction lets the
//! potential solver handle non-monotone test configurations (e.g. hollow
//! shells) that the prior would reject.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("histogram has {got} values but the grid has {expected} bins")]
    LengthMismatch { expected: usize, got: usize },
    #[error("histogram values must be finite")]
    NonFinite,
    #[error("degenerate distribution function: predicted observable density has zero or non-finite total")]
    DegenerateDf,
    #[error("reference energy {0} lies outside the energy grid")]
    ReferenceOutsideGrid(f64),
    #[error("cell weight vector has {got} entries but the grid has {expected} cells")]
    WeightMismatch { expected: usize, got: usize },
}

/// Whether the distribution function depends on energy alone or on energy
/// and the magnitude of the angular momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Isotropic,
    TwoIntegral,
}

/// Radial bin edges in kpc. The first edge is exactly 0 so that bin 0 always
/// reaches the centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    edges: Vec<f64>,
}

impl RadialGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self, ModelError> {
        if edges.len() < 2 {
            return Err(ModelError::InvalidGrid("need at least one radial bin".into()));
        }
        if edges[0] != 0.0 {
            return Err(ModelError::InvalidGrid("first radial edge must be 0".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(ModelError::InvalidGrid("radial edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidGrid("radial edges must be strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    /// `n_bins` bins: a core bin [0, r_lo) followed by `n_bins - 1`
    /// logarithmically spaced bins reaching `r_hi`.
    pub fn log_spaced(n_bins: usize, r_lo: f64, r_hi: f64) -> Result<Self, ModelError> {
        if n_bins < 2 || !(r_lo > 0.0) || !(r_hi > r_lo) {
            return Err(ModelError::InvalidGrid(format!(
                "log grid needs n_bins >= 2 and 0 < r_lo < r_hi (got {n_bins}, {r_lo}, {r_hi})"
            )));
        }
        let mut edges = Vec::with_capacity(n_bins + 1);
        edges.push(0.0);
        let step = (r_hi / r_lo).ln() / (n_bins - 1) as f64;
        for k in 0..n_bins {
            edges.push(r_lo * (step * k as f64).exp());
        }
        // Guard against rounding in the last edge.
        *edges.last_mut().unwrap() = r_hi;
        Self::new(edges)
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Index of the bin containing radius `r`, or None for `r >= r_max` or
    /// negative `r`.
    pub fn bin_containing(&self, r: f64) -> Option<usize> {
        if !(r >= 0.0) || r >= self.r_max() {
            return None;
        }
        // partition_point returns the first edge > r; bin index is that - 1.
        Some(self.edges.partition_point(|&e| e <= r) - 1)
    }

    /// Midpoint of bin `q` (arithmetic mean of its edges).
    pub fn mid(&self, q: usize) -> f64 {
        0.5 * (self.edges[q] + self.edges[q + 1])
    }
}

/// Energy / angular-momentum bin edges. Energies are negative (bound orbits),
/// in (km/s)^2; angular momenta start at 0, in kpc km/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    energy_edges: Vec<f64>,
    momentum_edges: Vec<f64>,
    mode: GridMode,
}

impl PhaseGrid {
    pub fn new(
        energy_edges: Vec<f64>,
        momentum_edges: Vec<f64>,
        mode: GridMode,
    ) -> Result<Self, ModelError> {
        if energy_edges.len() < 2 {
            return Err(ModelError::InvalidGrid("need at least one energy bin".into()));
        }
        if energy_edges.iter().any(|e| !e.is_finite() || *e > 0.0) {
            return Err(ModelError::InvalidGrid("energy edges must be finite and <= 0".into()));
        }
        if energy_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidGrid("energy edges must be strictly increasing".into()));
        }
        if momentum_edges.len() < 2 || momentum_edges[0] != 0.0 {
            return Err(ModelError::InvalidGrid(
                "momentum edges must start at 0 and define at least one bin".into(),
            ));
        }
        if momentum_edges.iter().any(|e| !e.is_finite()) {
            return Err(ModelError::InvalidGrid("momentum edges must be finite".into()));
        }
        if momentum_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidGrid(
                "momentum edges must be strictly increasing".into(),
            ));
        }
        if mode == GridMode::Isotropic && momentum_edges.len() != 2 {
            return Err(ModelError::InvalidGrid(
                "isotropic mode requires exactly one angular-momentum bin".into(),
            ));
        }
        Ok(Self { energy_edges, momentum_edges, mode })
    }

    /// Default grid: `n_e` linear energy bins from `phi_min` up to 0 and one
    /// (isotropic) or `n_l` linear momentum bins up to `l_max`.
    pub fn linear(
        phi_min: f64,
        n_e: usize,
        l_max: f64,
        n_l: usize,
        mode: GridMode,
    ) -> Result<Self, ModelError> {
        if !(phi_min < 0.0) || n_e < 1 {
            return Err(ModelError::InvalidGrid(format!(
                "linear grid needs phi_min < 0 and n_e >= 1 (got {phi_min}, {n_e})"
            )));
        }
        if !(l_max > 0.0) || n_l < 1 {
            return Err(ModelError::InvalidGrid(format!(
                "linear grid needs l_max > 0 and n_l >= 1 (got {l_max}, {n_l})"
            )));
        }
        let energy_edges: Vec<f64> = (0..=n_e)
            .map(|k| phi_min * (1.0 - k as f64 / n_e as f64))
            .collect();
        let momentum_edges: Vec<f64> =
            (0..=n_l).map(|k| l_max * k as f64 / n_l as f64).collect();
        Self::new(energy_edges, momentum_edges, mode)
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn energy_edges(&self) -> &[f64] {
        &self.energy_edges
    }

    pub fn momentum_edges(&self) -> &[f64] {
        &self.momentum_edges
    }

    pub fn n_energy_bins(&self) -> usize {
        self.energy_edges.len() - 1
    }

    pub fn n_momentum_bins(&self) -> usize {
        self.momentum_edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.n_energy_bins() * self.n_momentum_bins()
    }

    /// Deepest (most bound) energy edge.
    pub fn energy_floor(&self) -> f64 {
        self.energy_edges[0]
    }

    /// Flat cell index; cells are stored row-major by momentum row.
    pub fn cell_index(&self, e_idx: usize, l_idx: usize) -> usize {
        debug_assert!(e_idx < self.n_energy_bins() && l_idx < self.n_momentum_bins());
        l_idx * self.n_energy_bins() + e_idx
    }

    pub fn cell_bounds(&self, e_idx: usize, l_idx: usize) -> CellBounds {
        CellBounds {
            e_lo: self.energy_edges[e_idx],
            e_hi: self.energy_edges[e_idx + 1],
            l_lo: self.momentum_edges[l_idx],
            l_hi: self.momentum_edges[l_idx + 1],
        }
    }

    /// All cells in flat-index order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, CellBounds)> + '_ {
        let n_e = self.n_energy_bins();
        let n_l = self.n_momentum_bins();
        (0..n_l).flat_map(move |l| (0..n_e).map(move |e| (e, l, self.cell_bounds(e, l))))
    }

    fn energy_bin(&self, e: f64) -> Option<usize> {
        if e < self.energy_edges[0] || e >= *self.energy_edges.last().unwrap() {
            return None;
        }
        Some(self.energy_edges.partition_point(|&x| x <= e) - 1)
    }
}

/// Bounds of one (E, L) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub e_lo: f64,
    pub e_hi: f64,
    pub l_lo: f64,
    pub l_hi: f64,
}

/// Radial mass density histogram, M_sun / kpc^3 per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl DensityHistogram {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n_bins() {
            return Err(ModelError::LengthMismatch { expected: grid.n_bins(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Prior support: every bin non-negative and the profile non-increasing
    /// outward.
    pub fn is_valid(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
            && self.values.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Phase-space distribution function histogram on a [`PhaseGrid`], stored
/// row-major by momentum row. Units: stars / (kpc km/s)^3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfHistogram {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl DfHistogram {
    pub fn new(grid: PhaseGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n_cells() {
            return Err(ModelError::LengthMismatch { expected: grid.n_cells(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, e_idx: usize, l_idx: usize) -> f64 {
        self.values[self.grid.cell_index(e_idx, l_idx)]
    }

    /// One contiguous momentum row (all energy bins at fixed L).
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.n_energy_bins())
    }

    /// Prior support: every cell non-negative and, within each momentum row,
    /// non-increasing toward less bound energies. (Unbound orbits, E >= 0,
    /// are outside the grid and carry f = 0 by convention.)
    pub fn is_valid(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
            && self.rows().all(|row| row.windows(2).all(|w| w[0] >= w[1]))
    }

    /// Point evaluation with the clamping conventions used when the current
    /// potential reaches deeper or higher than the fixed grid: E >= 0 (or
    /// above the top edge) yields 0, E below the grid floor clamps to the
    /// most-bound bin, and L beyond the last edge clamps to the last row.
    pub fn eval(&self, e: f64, l: f64) -> f64 {
        let top = *self.grid.energy_edges.last().unwrap();
        if e >= top || e >= 0.0 {
            return 0.0;
        }
        let e_idx = if e < self.grid.energy_edges[0] {
            0
        } else {
            self.grid.energy_bin(e).unwrap_or(0)
        };
        let l_idx = match self.grid.mode {
            GridMode::Isotropic => 0,
            GridMode::TwoIntegral => {
                let edges = &self.grid.momentum_edges;
                if l >= *edges.last().unwrap() {
                    self.grid.n_momentum_bins() - 1
                } else {
                    edges.partition_point(|&x| x <= l).saturating_sub(1)
                }
            }
        };
        self.value(e_idx, l_idx)
    }

    /// Rescale so the predicted observable-space density integrates to 1.
    ///
    /// `cell_weights[c]` must hold the observable-window volume of cell `c`
    /// under the current potential (see
    /// [`crate::projection::window_volumes`]); after normalisation the sum of
    /// per-datum probabilities over the window is a proper density, making
    /// summed log-probabilities comparable across configurations.
    pub fn normalized(&self, cell_weights: &[f64]) -> Result<Self, ModelError> {
        if cell_weights.len() != self.values.len() {
            return Err(ModelError::WeightMismatch {
                expected: self.values.len(),
                got: cell_weights.len(),
            });
        }
        let total: f64 = self.values.iter().zip(cell_weights).map(|(f, w)| f * w).sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(ModelError::DegenerateDf);
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= total;
        }
        Ok(out)
    }

    /// Display normalisation: rescale so the cell containing `e_ref` in the
    /// first momentum row equals 1 (used for plotting, not for likelihoods).
    pub fn normalized_display(&self, e_ref: f64) -> Result<Self, ModelError> {
        let e_idx = self
            .grid
            .energy_bin(e_ref)
            .ok_or(ModelError::ReferenceOutsideGrid(e_ref))?;
        let scale = self.value(e_idx, 0);
        if !(scale > 0.0) {
            return Err(ModelError::DegenerateDf);
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= scale;
        }
        Ok(out)
    }
}

/// One observed tracer: projected radius (kpc), line-of-sight velocity
/// (km/s) and its 1-sigma measurement error (km/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicDatum {
    pub r_p: f64,
    pub v3: f64,
    pub sigma_v3: f64,
}

/// One point in model space: a DF histogram and a density histogram, with the
/// log-likelihood attached once evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub df: DfHistogram,
    pub rho: DensityHistogram,
    pub log_likelihood: Option<f64>,
}

impl Configuration {
    pub fn new(df: DfHistogram, rho: DensityHistogram) -> Self {
        Self { df, rho, log_likelihood: None }
    }

    pub fn is_valid(&self) -> bool {
        self.df.is_valid() && self.rho.is_valid()
    }
}
