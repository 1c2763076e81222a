use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FrftPlan, Stage};
use crate::error::{Error, Result};
use crate::signal::{from_spectrum, to_spectrum, SampledEnvelope};

/// Energy fraction ignored when measuring temporal or spectral support for
/// the aliasing guards.
pub const GUARD_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LensKind {
    Temporal,
    Spectral,
}

/// A single quadratic-phase element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub kind: LensKind,
    pub power: f64,
}

impl LensSpec {
    pub fn apply(&self, e: &SampledEnvelope) -> Result<SampledEnvelope> {
        match self.kind {
            LensKind::Temporal => apply_temporal_lens(e, self.power),
            LensKind::Spectral => apply_spectral_lens(e, self.power),
        }
    }
}

fn check_power(power: f64) -> Result<()> {
    if power.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lens power {power} is not finite")))
    }
}

/// Headroom `π/dt − (|d_t|·T + Ω)` left below Nyquist after a temporal lens,
/// where `T` and `Ω` are the temporal and spectral support half-widths.
pub fn temporal_lens_margin(e: &SampledEnvelope, d_t: f64) -> f64 {
    let t_support = e.support_half_width(GUARD_TAIL);
    let w_support = to_spectrum(e).support_half_width(GUARD_TAIL);
    e.grid().nyquist() - (d_t.abs() * t_support + w_support)
}

/// Headroom `half_span − (|d_ω|·Ω + T)` left inside the time window after a
/// spectral lens.
pub fn spectral_lens_margin(e: &SampledEnvelope, d_omega: f64) -> f64 {
    let t_support = e.support_half_width(GUARD_TAIL);
    let w_support = to_spectrum(e).support_half_width(GUARD_TAIL);
    e.grid().inner_half_span() - (d_omega.abs() * w_support + t_support)
}

/// Multiplies by `exp(−i·d_t·t²/2)`.
pub fn apply_temporal_lens(e: &SampledEnvelope, d_t: f64) -> Result<SampledEnvelope> {
    check_power(d_t)?;
    if d_t == 0.0 {
        return Ok(e.clone());
    }
    let margin = temporal_lens_margin(e, d_t);
    if margin < 0.0 {
        return Err(Error::Aliasing(format!(
            "temporal lens d_t = {d_t:.6} pushes the instantaneous frequency {:.3} past Nyquist",
            e.grid().nyquist() - margin
        )));
    }
    Ok(temporal_phase(e, d_t))
}

pub(crate) fn temporal_phase(e: &SampledEnvelope, d_t: f64) -> SampledEnvelope {
    let g = *e.grid();
    let samples = e
        .samples()
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let t = g.t(k);
            z * Complex64::from_polar(1.0, -0.5 * d_t * t * t)
        })
        .collect();
    SampledEnvelope::new(g, samples).expect("grid preserved")
}

/// Multiplies the spectrum by `exp(−i·d_ω·ω²/2)`.
pub fn apply_spectral_lens(e: &SampledEnvelope, d_omega: f64) -> Result<SampledEnvelope> {
    check_power(d_omega)?;
    if d_omega == 0.0 {
        return Ok(e.clone());
    }
    let margin = spectral_lens_margin(e, d_omega);
    if margin < 0.0 {
        return Err(Error::Aliasing(format!(
            "spectral lens d_omega = {d_omega:.6} moves energy to |t| = {:.3}, beyond the time window",
            e.grid().inner_half_span() - margin
        )));
    }
    Ok(spectral_phase(e, d_omega))
}

pub(crate) fn spectral_phase(e: &SampledEnvelope, d_omega: f64) -> SampledEnvelope {
    let mut s = to_spectrum(e);
    let fg = *s.grid();
    for (j, z) in s.samples_mut().iter_mut().enumerate() {
        let w = fg.omega(j);
        *z *= Complex64::from_polar(1.0, -0.5 * d_omega * w * w);
    }
    from_spectrum(&s)
}

pub(crate) fn apply_stage(e: &SampledEnvelope, stage: &Stage) -> Result<SampledEnvelope> {
    let a = apply_temporal_lens(e, stage.d_t)?;
    let b = apply_spectral_lens(&a, stage.d_omega)?;
    apply_temporal_lens(&b, stage.d_t)
}

pub(crate) fn apply_stages(e: &SampledEnvelope, stages: &[Stage]) -> Result<SampledEnvelope> {
    let mut out = e.clone();
    for stage in stages {
        out = apply_stage(&out, stage)?;
    }
    Ok(out)
}

/// Fractional Fourier transform by interleaved quadratic phases.
///
/// The angle is split into stages of at most π/2 (see
/// [`super::decompose_angle`]); use [`FrftPlan::new`] with
/// [`super::SplitPolicy::SingleStage`] to force a single triple.
pub fn frft_lens_sequence(e: &SampledEnvelope, phi: f64) -> Result<SampledEnvelope> {
    apply_stages(e, &FrftPlan::lens_sequence(phi)?.stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gaussian, hermite_gauss, make_grid, TimeGrid};

    fn rms_width(xs: impl Iterator<Item = f64>, samples: &[Complex64]) -> f64 {
        let pts: Vec<(f64, f64)> = xs.zip(samples).map(|(x, z)| (x, z.norm_sqr())).collect();
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mean: f64 = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / total;
        (pts.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / total).sqrt()
    }

    #[test]
    fn zero_power_is_identity() {
        let e = gaussian(&TimeGrid::reference(), 0.3, 1.2).unwrap();
        assert_eq!(apply_temporal_lens(&e, 0.0).unwrap(), e);
        assert_eq!(apply_spectral_lens(&e, 0.0).unwrap(), e);
    }

    #[test]
    fn temporal_lens_is_pure_phase() {
        let e = hermite_gauss(3, &TimeGrid::reference(), 0.0, 1.0).unwrap();
        let out = apply_temporal_lens(&e, 0.73).unwrap();
        for (a, b) in out.samples().iter().zip(e.samples()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn spectral_lens_preserves_norm() {
        let e = hermite_gauss(4, &TimeGrid::reference(), 0.5, 1.0).unwrap();
        let out = apply_spectral_lens(&e, -1.3).unwrap();
        assert!((out.norm_sqr() - e.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn chirped_gaussian_bandwidth_grows_by_root_two() {
        // exp(-t²/2 - i t²/2) has spectral rms width sqrt(1 + d_t²)/sqrt(2).
        let e = gaussian(&TimeGrid::reference(), 0.0, 1.0).unwrap();
        let before = to_spectrum(&e);
        let after = to_spectrum(&apply_temporal_lens(&e, 1.0).unwrap());
        let wb = rms_width(before.grid().points(), before.samples());
        let wa = rms_width(after.grid().points(), after.samples());
        assert!((wa / wb - 2f64.sqrt()).abs() < 1e-9, "{}", wa / wb);
    }

    #[test]
    fn spectral_lens_stretches_gaussian_in_time() {
        let e = gaussian(&TimeGrid::reference(), 0.0, 1.0).unwrap();
        let out = apply_spectral_lens(&e, 1.0).unwrap();
        let g = *e.grid();
        let wb = rms_width(g.points(), e.samples());
        let wa = rms_width(g.points(), out.samples());
        assert!((wa / wb - 2f64.sqrt()).abs() < 1e-9, "{}", wa / wb);
    }

    #[test]
    fn aliasing_guard_trips() {
        let g = make_grid(256, 0.2).unwrap();
        let e = gaussian(&g, 0.0, 3.0).unwrap();
        assert!(matches!(apply_temporal_lens(&e, 5.0), Err(Error::Aliasing(_))));
        assert!(matches!(apply_spectral_lens(&e, 40.0), Err(Error::Aliasing(_))));
    }

    #[test]
    fn zero_angle_is_identity() {
        let e = hermite_gauss(2, &TimeGrid::reference(), 0.0, 1.0).unwrap();
        let out = frft_lens_sequence(&e, 0.0).unwrap();
        for (a, b) in out.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
