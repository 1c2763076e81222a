//! Fractional Fourier transform in the time-frequency plane.
//!
//! Two independent routes are provided:
//!
//! * [`frft_lens_sequence`]: temporal lens → spectral lens → temporal lens,
//!   with powers `d_t = tan(φ/2)` and `d_ω = sin(φ)` per stage. This is the
//!   physical realization and is exact up to an angle-dependent global phase.
//! * [`frft_direct_kernel`]: expansion in a numerically orthonormalized
//!   Hermite-Gaussian basis, each coefficient multiplied by `e^{-inφ}`.
//!
//! Hermite-Gaussian mode `n` picks up `e^{-inφ}` from both routes, and a
//! positive angle rotates the chronocyclic Wigner function from the time axis
//! toward the frequency axis. With the `e^{+iωt}` Fourier convention of
//! [`crate::signal::to_spectrum`] this makes the plain spectrum coincide with
//! `φ = −π/2`; at `φ = +π/2` the output is the spectrum read at `−ω`.

mod kernel;
mod lens;

pub use kernel::{frft_direct_kernel, DirectKernel, HermiteBasis, DEFAULT_N_MAX, RESIDUAL_TOLERANCE};
pub use lens::{
    apply_spectral_lens, apply_temporal_lens, frft_lens_sequence, spectral_lens_margin,
    temporal_lens_margin, LensKind, LensSpec, GUARD_TAIL,
};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SampledEnvelope;

/// `tan(φ/2)` written as `sin φ / (1 + cos φ)`, which is exact at `φ = π/2`.
fn half_angle_tan(phi: f64) -> f64 {
    phi.sin() / (1.0 + phi.cos())
}

/// Lens powers `(d_t, d_ω) = (tan(φ/2), sin φ)` for one stage.
pub fn lens_coefficients(phi: f64) -> Result<(f64, f64)> {
    if !phi.is_finite() || phi.abs() >= PI {
        return Err(Error::AngleOutOfRange { phi });
    }
    Ok((half_angle_tan(phi), phi.sin()))
}

/// Reduces `phi` into `(−π, π]`.
pub fn reduce_angle(phi: f64) -> f64 {
    let mut r = phi.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Splits `phi` into equal stages of at most π/2 each.
///
/// The angle is first reduced into `(−π, π]`; the stage angles sum to the
/// reduced value, so they agree with `phi` modulo 2π.
pub fn decompose_angle(phi: f64) -> Vec<f64> {
    let r = reduce_angle(phi);
    let count = ((r.abs() / FRAC_PI_2) - 1e-12).ceil().max(1.0) as usize;
    vec![r / count as f64; count]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    LensSequence,
    DirectKernel,
}

/// How a lens-sequence plan distributes the angle over stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Equal stages with `|φ_k| ≤ π/2`.
    #[default]
    Auto,
    /// One stage for the whole angle; fails outside `(−π, π)`.
    SingleStage,
}

/// One temporal-spectral-temporal lens triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub d_t: f64,
    pub d_omega: f64,
}

impl Stage {
    pub fn for_angle(phi: f64) -> Result<Self> {
        let (d_t, d_omega) = lens_coefficients(phi)?;
        Ok(Self { d_t, d_omega })
    }

    /// Stage angle recovered from the temporal power, `2·atan(d_t)`.
    pub fn angle(&self) -> f64 {
        2.0 * self.d_t.atan()
    }
}

/// Immutable description of one fractional Fourier transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrftPlan {
    pub phi: f64,
    pub stages: Vec<Stage>,
    pub method: Method,
}

impl FrftPlan {
    pub fn new(phi: f64, method: Method, split: SplitPolicy) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("angle {phi} is not finite")));
        }
        let angles = match split {
            SplitPolicy::Auto => decompose_angle(phi),
            SplitPolicy::SingleStage => {
                let r = reduce_angle(phi);
                if r.abs() >= PI {
                    return Err(Error::AngleOutOfRange { phi });
                }
                vec![r]
            }
        };
        let stages = angles.into_iter().map(Stage::for_angle).collect::<Result<_>>()?;
        Ok(Self { phi, stages, method })
    }

    pub fn lens_sequence(phi: f64) -> Result<Self> {
        Self::new(phi, Method::LensSequence, SplitPolicy::Auto)
    }

    pub fn stage_angles(&self) -> Vec<f64> {
        self.stages.iter().map(Stage::angle).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Applies `plan` with the method it names.
pub fn frft(e: &SampledEnvelope, plan: &FrftPlan) -> Result<SampledEnvelope> {
    match plan.method {
        Method::LensSequence => lens::apply_stages(e, &plan.stages),
        Method::DirectKernel => frft_direct_kernel(e, plan.phi),
    }
}
