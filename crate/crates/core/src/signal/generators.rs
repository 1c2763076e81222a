use std::f64::consts::PI;

use num_complex::Complex64;

use super::{SampledEnvelope, TimeGrid};
use crate::error::{Error, Result};

/// Largest energy fraction allowed in the outer 1% of samples.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

/// Normalized Hermite functions `ψ_0(x) … ψ_{count-1}(x)` at a single point.
///
/// Uses the three-term recurrence on `ψ_n / ψ_0` with periodic rescaling so
/// that large `|x|` neither underflows the Gaussian nor overflows the
/// polynomial part before they are recombined.
pub fn hermite_functions_at(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    // values carried as ratio * exp(log_scale - x²/2) / π^{1/4}
    let base = -x * x / 2.0 - 0.25 * PI.ln();
    let mut log_scale = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let emit = |v: f64, log_scale: f64| {
        if v == 0.0 {
            0.0
        } else {
            let e = base + log_scale + v.abs().ln();
            if e < -745.0 {
                0.0
            } else {
                v.signum() * e.exp()
            }
        }
    };
    out[0] = emit(cur, log_scale);
    for n in 0..count - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 || (m < 1e-150 && m > 0.0) {
            prev /= m;
            cur /= m;
            log_scale += m.ln();
        }
        out[n + 1] = emit(cur, log_scale);
    }
    out
}

/// Energy fraction in the outer 1% of the grid (at least one sample per side).
fn outer_energy_fraction(samples: &[Complex64]) -> f64 {
    let n = samples.len();
    let edge = (n / 200).max(1);
    let total: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = samples[..edge]
        .iter()
        .chain(&samples[n - edge..])
        .map(|z| z.norm_sqr())
        .sum();
    outer / total
}

/// Rejects envelopes with more than [`TRUNCATION_TOLERANCE`] of their energy
/// in the outer 1% of samples.
pub fn check_truncation(e: &SampledEnvelope, what: &str) -> Result<()> {
    let frac = outer_energy_fraction(e.samples());
    if frac > TRUNCATION_TOLERANCE {
        return Err(Error::Truncation(format!(
            "{what}: {frac:.3e} of the energy sits in the outer 1% of a grid spanning [{:.3}, {:.3}]",
            e.grid().t_start,
            e.grid().t_end()
        )));
    }
    Ok(())
}

/// Hermite-Gaussian mode `ψ_n((t − center)/width)/√width`, unit norm.
pub fn hermite_gauss(n: usize, grid: &TimeGrid, center: f64, width: f64) -> Result<SampledEnvelope> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter(format!("mode width {width} must be positive")));
    }
    if !center.is_finite() {
        return Err(Error::InvalidParameter("mode center must be finite".into()));
    }
    let scale = width.sqrt().recip();
    let e = SampledEnvelope::from_fn(*grid, |t| {
        let x = (t - center) / width;
        Complex64::new(scale * hermite_functions_at(x, n + 1)[n], 0.0)
    })?;
    check_truncation(&e, &format!("Hermite-Gaussian mode {n}"))?;
    Ok(e)
}

/// Unit-norm Gaussian `exp(−(t − center)²/(2 width²))` centered at `center`.
pub fn gaussian(grid: &TimeGrid, center: f64, width: f64) -> Result<SampledEnvelope> {
    hermite_gauss(0, grid, center, width)
}

/// Two-pulse cat-like state: Gaussians of width `s` at `±mu`, normalized
/// analytically including the overlap term `exp(−mu²/s²)`.
pub fn cat_state(grid: &TimeGrid, mu: f64, s: f64) -> Result<SampledEnvelope> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse width {s} must be positive")));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidParameter("pulse separation must be finite".into()));
    }
    let norm = (2.0 * PI.sqrt() * s * (1.0 + (-mu * mu / (s * s)).exp())).sqrt();
    let e = SampledEnvelope::from_fn(*grid, |t| {
        let a = (-(t - mu) * (t - mu) / (2.0 * s * s)).exp();
        let b = (-(t + mu) * (t + mu) / (2.0 * s * s)).exp();
        Complex64::new((a + b) / norm, 0.0)
    })?;
    check_truncation(&e, "cat state")?;
    Ok(e)
}
