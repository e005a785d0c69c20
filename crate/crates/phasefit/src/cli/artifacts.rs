//! Artifact persistence: CSV and JSON text written atomically (a `.partial`
//! file renamed into place), floats at 17 significant digits so every file
//! parses back bit-identically.

use super::CliError;
use crate::model::PhaseGrid;
use crate::potential::PotentialProfile;
use crate::sampler::{Chain, UncertaintyEnvelope};
use std::fmt::Write as _;
use std::path::Path;

/// 17 significant decimal digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `content` to `<path>.partial` and renames it into place, so an
/// interrupted run leaves only `.partial` files behind.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.partial", e.to_string_lossy()),
        None => "partial".to_string(),
    });
    let io = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    std::fs::write(&tmp, content).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Chain trace: one row per stored step with the penalized likelihood split
/// out and the enclosed mass at the reporting radius.
pub fn trace_csv(chain: &Chain, mass_radius: f64) -> Result<String, CliError> {
    let mut s = String::from("step,temperature,log_likelihood,penalty,accepted,enclosed_mass\n");
    for step in &chain.steps {
        let pot = PotentialProfile::from_density(&step.config.rho)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            step.index,
            fmt_f64(step.temperature),
            fmt_f64(step.pll.log_likelihood),
            fmt_f64(step.pll.penalty),
            step.accepted as u8,
            fmt_f64(pot.enclosed_mass(mass_radius)),
        );
    }
    Ok(s)
}

/// Density profile with its 1-sigma band, one row per radial bin.
pub fn rho_csv(edges: &[f64], env: &UncertaintyEnvelope) -> String {
    let mut s = String::from("r_lo,r_hi,rho,sigma\n");
    for (q, w) in edges.windows(2).enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(w[0]),
            fmt_f64(w[1]),
            fmt_f64(env.rho_center[q]),
            fmt_f64(env.rho_sigma[q]),
        );
    }
    s
}

/// DF histogram with its 1-sigma band, one row per (E, L) cell in storage
/// order (energy fastest).
pub fn f_csv(grid: &PhaseGrid, env: &UncertaintyEnvelope) -> String {
    let mut s = String::from("e_lo,e_hi,l_lo,l_hi,f,sigma\n");
    for idx in 0..grid.n_cells() {
        let e = idx % grid.n_energy_bins();
        let l = idx / grid.n_energy_bins();
        let b = grid.cell_bounds(e, l);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(b.e_lo),
            fmt_f64(b.e_hi),
            fmt_f64(b.l_lo),
            fmt_f64(b.l_hi),
            fmt_f64(env.f_center[idx]),
            fmt_f64(env.f_sigma[idx]),
        );
    }
    s
}

/// Reads a CSV written by this module: header names plus all-numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| {
            CliError::Data(format!("{}: row {}: {e}", path.display(), i + 2))
        })?);
    }
    Ok((header, rows))
}
