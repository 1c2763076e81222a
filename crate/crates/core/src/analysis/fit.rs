use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// A step this close to ±π cannot be assigned a branch.
pub const UNWRAP_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSigmas {
    pub phi0: f64,
    pub slope: f64,
}

/// Straight line `phase(n) = φ₀ + n·slope` through unwrapped mode phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleFit {
    pub phi0: f64,
    /// `dφ/dn` in radians per mode index.
    pub slope: f64,
    /// One-sigma standard errors.
    pub sigmas: FitSigmas,
    pub residuals: Vec<f64>,
}

impl AngleFit {
    /// Transform angle implied by the slope, `−dφ/dn`.
    pub fn measured_angle(&self) -> f64 {
        -self.slope
    }
}

/// Sorts by mode index and unwraps sequentially, choosing each step in
/// `(−π, π]`.
pub fn unwrap_phases(diag_phases: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    let mut sorted = diag_phases.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("mode indices must be distinct".into()));
    }
    if sorted.iter().any(|(_, p)| !p.is_finite()) {
        return Err(Error::InvalidParameter("phases must be finite".into()));
    }
    let mut out = Vec::with_capacity(sorted.len());
    let mut prev: Option<(usize, f64)> = None;
    for (n, p) in sorted {
        let value = match prev {
            None => p,
            Some((m, q)) => {
                let step = (p - q).rem_euclid(TAU);
                let step = if step > PI { step - TAU } else { step };
                if PI - step.abs() < UNWRAP_TIE_TOLERANCE {
                    return Err(Error::UnwrapAmbiguity { from: m, to: n });
                }
                q + step
            }
        };
        out.push((n, value));
        prev = Some((n, value));
    }
    Ok(out)
}

/// Least-squares line through the unwrapped phases.
pub fn fit_angle(diag_phases: &[(usize, f64)]) -> Result<AngleFit> {
    if diag_phases.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} modes given, at least 3 are needed",
            diag_phases.len()
        )));
    }
    let pts = unwrap_phases(diag_phases)?;
    let count = pts.len() as f64;
    let xm = pts.iter().map(|&(n, _)| n as f64).sum::<f64>() / count;
    let ym = pts.iter().map(|&(_, p)| p).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|&(n, _)| (n as f64 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(n, p)| (n as f64 - xm) * (p - ym)).sum();
    let slope = sxy / sxx;
    let phi0 = ym - slope * xm;
    let residuals: Vec<f64> = pts.iter().map(|&(n, p)| p - (phi0 + slope * n as f64)).collect();
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (count - 2.0);
    let sigmas = FitSigmas {
        phi0: (s2 * (1.0 / count + xm * xm / sxx)).sqrt(),
        slope: (s2 / sxx).sqrt(),
    };
    Ok(AngleFit { phi0, slope, sigmas, residuals })
}
