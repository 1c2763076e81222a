//! Sampled complex envelopes on uniform dimensionless grids.
//!
//! Time is measured in units of τ (`q = t/τ`) and angular frequency in units
//! of 1/τ (`p = ωτ`). Every envelope lives on a [`TimeGrid`] of power-of-two
//! length; its spectrum lives on the reciprocal [`FrequencyGrid`] produced by
//! [`to_spectrum`].
//!
//! Normalization is applied once, by the generators. Operations report norms
//! and never silently renormalize.

mod fourier;
mod generators;

pub use fourier::{from_spectrum, to_spectrum};
pub use generators::{
    cat_state, check_truncation, hermite_functions_at, hermite_gauss, gaussian,
    TRUNCATION_TOLERANCE,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference sample count: spans ~82 τ-units at [`DEFAULT_DT`].
pub const DEFAULT_N: usize = 4096;
/// Reference time step in τ-units.
pub const DEFAULT_DT: f64 = 0.02;

/// Uniform time grid `t_k = t_start + k·dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

/// Builds the symmetric grid `t_start = -n·dt/2`.
pub fn make_grid(n: usize, dt: f64) -> Result<TimeGrid> {
    TimeGrid::new(-(n as f64) * dt / 2.0, dt, n)
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "sample count {n} must be a power of two and at least 2"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("step {dt} must be positive and finite")));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidGrid("grid start must be finite".into()));
        }
        Ok(Self { t_start, dt, n })
    }

    /// The reference grid (n = 4096, dt = 0.02).
    pub fn reference() -> Self {
        make_grid(DEFAULT_N, DEFAULT_DT).expect("reference grid is valid")
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n - 1)
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.t(k))
    }

    /// Largest |t| such that `[-r, r]` lies inside the grid.
    pub fn inner_half_span(&self) -> f64 {
        self.t_start.abs().min(self.t_end().abs())
    }

    /// Nyquist angular frequency `π/dt`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dt
    }

    /// The reciprocal grid used by [`to_spectrum`].
    pub fn frequency_grid(&self) -> FrequencyGrid {
        let domega = 2.0 * std::f64::consts::PI / (self.n as f64 * self.dt);
        FrequencyGrid {
            omega_start: -(self.n as f64) * domega / 2.0,
            domega,
            n: self.n,
        }
    }

    /// Grids compare equal when their parameters agree to rounding.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        let tol = 1e-12 * self.dt.max(other.dt);
        self.n == other.n
            && (self.dt - other.dt).abs() <= tol
            && (self.t_start - other.t_start).abs() <= tol * self.n as f64
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Frequency grid `ω_j = omega_start + j·domega` in units of 1/τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_start: f64,
    pub domega: f64,
    pub n: usize,
}

impl FrequencyGrid {
    #[inline]
    pub fn omega(&self, j: usize) -> f64 {
        self.omega_start + j as f64 * self.domega
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.omega(j))
    }
}

/// Complex envelope `E(t/τ)` sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnvelope {
    grid: TimeGrid,
    samples: Vec<Complex64>,
}

impl SampledEnvelope {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::InvalidGrid(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.n
            )));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("envelope contains non-finite samples".into()));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    /// Samples `f(t)` at every grid point.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// `Σ|E|²·dt`.
    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { grid: self.grid, samples: self.samples.iter().map(|z| z * factor).collect() }
    }

    /// `E(t) → E(-t)` for grids symmetric about zero.
    ///
    /// On the symmetric grid `t_k = (k - n/2)·dt` the mirror of sample `k` is
    /// `n - k`; sample 0 (at `-n·dt/2`) has no partner and is kept in place.
    pub fn time_reversed(&self) -> Result<Self> {
        let n = self.grid.n;
        if (self.grid.t_start + n as f64 * self.grid.dt / 2.0).abs() > 1e-9 * self.grid.dt {
            return Err(Error::InvalidGrid("time reversal needs a grid symmetric about zero".into()));
        }
        let mut out = self.samples.clone();
        for k in 1..n {
            out[k] = self.samples[n - k];
        }
        Ok(Self { grid: self.grid, samples: out })
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &SampledEnvelope, b: Complex64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self { grid: self.grid, samples })
    }

    /// Half-width of the smallest interval `[-r, r]` that holds all but
    /// `tail` of the energy.
    pub fn support_half_width(&self, tail: f64) -> f64 {
        support_half_width(self.grid.points(), &self.samples, tail)
    }
}

/// Spectrum `Ẽ(ωτ)` on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    grid: FrequencyGrid,
    samples: Vec<Complex64>,
    /// Time grid the inverse transform lands on.
    time_grid: TimeGrid,
}

impl SpectralEnvelope {
    pub fn new(grid: FrequencyGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::InvalidGrid(format!(
                "{} spectral samples for a grid of {}",
                samples.len(),
                grid.n
            )));
        }
        let dt = 2.0 * std::f64::consts::PI / (grid.n as f64 * grid.domega);
        let time_grid = TimeGrid { t_start: -(grid.n as f64) * dt / 2.0, dt, n: grid.n };
        Ok(Self { grid, samples, time_grid })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    /// `Σ|Ẽ|²·dω`.
    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.domega
    }

    pub fn support_half_width(&self, tail: f64) -> f64 {
        support_half_width(self.grid.points(), &self.samples, tail)
    }
}

fn support_half_width(
    coords: impl Iterator<Item = f64>,
    samples: &[Complex64],
    tail: f64,
) -> f64 {
    let mut weighted: Vec<(f64, f64)> =
        coords.zip(samples).map(|(x, z)| (x.abs(), z.norm_sqr())).collect();
    let total: f64 = weighted.iter().map(|w| w.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    weighted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let budget = tail * total;
    let mut outside = 0.0;
    for (r, p) in weighted {
        outside += p;
        if outside > budget {
            return r;
        }
    }
    0.0
}

/// `⟨a, b⟩ = Σ a*·b·dt`.
pub fn overlap(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<Complex64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * a.grid.dt)
}

/// Rotates `candidate` by the global phase that maximizes its overlap with
/// `reference`.
pub fn align_global_phase(
    reference: &SampledEnvelope,
    candidate: &SampledEnvelope,
) -> Result<SampledEnvelope> {
    let ov = overlap(candidate, reference)?;
    let phasor = if ov.norm() > 0.0 { ov / ov.norm() } else { Complex64::new(1.0, 0.0) };
    Ok(candidate.scaled(phasor))
}

/// `‖a − b‖ / ‖a‖` (absolute distance when `a` vanishes).
pub fn relative_l2_distance(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<f64> {
    let diff = a.combine(Complex64::new(1.0, 0.0), b, Complex64::new(-1.0, 0.0))?;
    let scale = a.norm();
    Ok(if scale > 0.0 { diff.norm() / scale } else { diff.norm() })
}

/// Relative L2 distance after removing the best global phase.
pub fn phase_aligned_distance(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<f64> {
    relative_l2_distance(a, &align_global_phase(a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_of_eight_is_symmetric() {
        let g = make_grid(8, 1.0).unwrap();
        assert_eq!(g.t_start, -4.0);
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn reference_grid_span() {
        let g = TimeGrid::reference();
        assert!((g.t_start + 40.96).abs() < 1e-12);
        assert!((g.t_end() - 40.94).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(6, 1.0), Err(Error::InvalidGrid(_))));
        assert!(make_grid(1, 1.0).is_err());
        assert!(make_grid(8, 0.0).is_err());
        assert!(make_grid(8, -0.1).is_err());
    }

    #[test]
    fn overlap_is_conjugate_symmetric() {
        let g = make_grid(64, 0.25).unwrap();
        let a = SampledEnvelope::from_fn(g, |t| Complex64::new((-t * t).exp(), 0.3 * t)).unwrap();
        let b = SampledEnvelope::from_fn(g, |t| Complex64::new(t.cos() * (-t * t / 4.0).exp(), 0.0))
            .unwrap();
        let ab = overlap(&a, &b).unwrap();
        let ba = overlap(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn overlap_rejects_grid_mismatch() {
        let a = SampledEnvelope::zeros(make_grid(64, 0.25).unwrap());
        let b = SampledEnvelope::zeros(make_grid(64, 0.5).unwrap());
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn time_reversal_mirrors_samples() {
        let g = make_grid(8, 1.0).unwrap();
        let e = SampledEnvelope::from_fn(g, |t| Complex64::new(t, 0.0)).unwrap();
        let r = e.time_reversed().unwrap();
        for (k, z) in r.samples().iter().enumerate().skip(1) {
            assert_eq!(z.re, -g.t(k));
        }
    }
}
