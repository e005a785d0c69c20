//! The kinematic data text format: three whitespace-separated columns
//! `r_p [kpc]  v3 [km/s]  sigma_v3 [km/s]`, with `#` comments and blank
//! lines ignored.

use super::CliError;
use crate::model::KinematicDatum;
use std::path::Path;

pub fn parse_data_file(path: &Path) -> Result<Vec<KinematicDatum>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read data file {}: {e}", path.display())))?;
    parse_data_str(&text, &path.display().to_string())
}

/// Parses the data format from memory; `origin` labels error messages.
pub fn parse_data_str(text: &str, origin: &str) -> Result<Vec<KinematicDatum>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = i + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(CliError::Data(format!(
                "{origin}: line {n}: expected 3 columns (r_p v3 sigma_v3), got {}",
                cols.len()
            )));
        }
        let col = |idx: usize, name: &str| -> Result<f64, CliError> {
            cols[idx].parse::<f64>().map_err(|_| {
                CliError::Data(format!("{origin}: line {n}: non-numeric {name}"))
            })
        };
        let r_p = col(0, "r_p")?;
        let v3 = col(1, "v3")?;
        let sigma_v3 = col(2, "sigma_v3")?;
        if !r_p.is_finite() || r_p < 0.0 {
            return Err(CliError::Data(format!(
                "{origin}: line {n}: r_p must be finite and >= 0 (got {r_p})"
            )));
        }
        if !v3.is_finite() {
            return Err(CliError::Data(format!("{origin}: line {n}: v3 must be finite")));
        }
        if !sigma_v3.is_finite() || sigma_v3 < 0.0 {
            return Err(CliError::Data(format!(
                "{origin}: line {n}: sigma_v3 must be finite and >= 0 (got {sigma_v3})"
            )));
        }
        out.push(KinematicDatum { r_p, v3, sigma_v3 });
    }
    if out.is_empty() {
        eprintln!("warning: {origin} contains no data rows");
    }
    Ok(out)
}

/// Renders data in the same format at full (17 significant digit) precision.
pub fn render_data(data: &[KinematicDatum]) -> String {
    let mut s = String::from("# r_p[kpc] v3[km/s] sigma_v3[km/s]\n");
    for d in data {
        s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", d.r_p, d.v3, d.sigma_v3));
    }
    s
}
