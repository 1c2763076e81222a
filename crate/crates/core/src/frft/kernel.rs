use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{hermite_functions_at, SampledEnvelope, TimeGrid};

/// Default number of basis modes for the direct kernel.
pub const DEFAULT_N_MAX: usize = 256;
/// Largest relative residual outside the captured basis.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Hermite-Gaussian modes sampled on a grid and re-orthonormalized with
/// modified Gram-Schmidt under the discrete inner product `Σ a·b·dt`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    grid: TimeGrid,
    center: f64,
    width: f64,
    modes: Vec<Vec<f64>>,
}

impl HermiteBasis {
    pub fn new(grid: TimeGrid, center: f64, width: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("basis needs at least one mode".into()));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!("basis width {width} must be positive")));
        }
        let scale = width.sqrt().recip();
        let columns: Vec<Vec<f64>> = grid
            .points()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&t| {
                let mut v = hermite_functions_at((t - center) / width, count);
                v.iter_mut().for_each(|x| *x *= scale);
                v
            })
            .collect();
        let mut modes: Vec<Vec<f64>> =
            (0..count).map(|n| columns.iter().map(|c| c[n]).collect()).collect();
        let dt = grid.dt;
        for i in 0..count {
            let (done, rest) = modes.split_at_mut(i);
            let v = &mut rest[0];
            for q in done.iter() {
                let proj: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() * dt;
                v.iter_mut().zip(q).for_each(|(x, a)| *x -= proj * a);
            }
            let norm = (v.iter().map(|x| x * x).sum::<f64>() * dt).sqrt();
            if norm < 1e-6 {
                return Err(Error::Truncation(format!(
                    "Hermite-Gaussian mode {i} does not fit the grid [{:.3}, {:.3}]",
                    grid.t_start,
                    grid.t_end()
                )));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(Self { grid, center, width, modes })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn mode(&self, n: usize) -> &[f64] {
        &self.modes[n]
    }

    /// Coefficients `c_n = Σ ψ_n·e·dt`.
    pub fn project(&self, e: &SampledEnvelope) -> Result<Vec<Complex64>> {
        self.grid.ensure_same(e.grid())?;
        let dt = self.grid.dt;
        Ok(self
            .modes
            .par_iter()
            .map(|m| m.iter().zip(e.samples()).map(|(a, z)| z * *a).sum::<Complex64>() * dt)
            .collect())
    }

    pub fn synthesize(&self, coeffs: &[Complex64]) -> SampledEnvelope {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n];
        for (c, m) in coeffs.iter().zip(&self.modes) {
            out.iter_mut().zip(m).for_each(|(o, a)| *o += c * *a);
        }
        SampledEnvelope::new(self.grid, out).expect("basis grid")
    }
}

/// Fractional Fourier transform by spectral decomposition in a Hermite basis.
#[derive(Debug, Clone)]
pub struct DirectKernel {
    basis: HermiteBasis,
    tolerance: f64,
}

impl DirectKernel {
    pub fn new(grid: TimeGrid, n_max: usize) -> Result<Self> {
        Ok(Self { basis: HermiteBasis::new(grid, 0.0, 1.0, n_max)?, tolerance: RESIDUAL_TOLERANCE })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.basis
    }

    /// Projects `e`, checks the out-of-basis residual and returns the
    /// coefficients.
    pub fn coefficients(&self, e: &SampledEnvelope) -> Result<Vec<Complex64>> {
        let coeffs = self.basis.project(e)?;
        let norm = e.norm();
        if norm == 0.0 {
            return Ok(coeffs);
        }
        let captured = self.basis.synthesize(&coeffs);
        let residual = e
            .samples()
            .iter()
            .zip(captured.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * e.grid().dt.sqrt()
            / norm;
        if residual > self.tolerance {
            return Err(Error::BasisResidual { residual, tolerance: self.tolerance });
        }
        Ok(coeffs)
    }

    /// `Σ c_n·e^{−inφ}·ψ_n`.
    pub fn apply(&self, e: &SampledEnvelope, phi: f64) -> Result<SampledEnvelope> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("angle {phi} is not finite")));
        }
        let coeffs = self.coefficients(e)?;
        let rotated: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * Complex64::from_polar(1.0, -(n as f64) * phi))
            .collect();
        Ok(self.basis.synthesize(&rotated))
    }
}

type CacheKey = (usize, u64, u64, usize);

fn cached_kernel(grid: TimeGrid, n_max: usize) -> Result<Arc<DirectKernel>> {
    static CACHE: OnceLock<Mutex<Vec<(CacheKey, Arc<DirectKernel>)>>> = OnceLock::new();
    let key = (grid.n, grid.dt.to_bits(), grid.t_start.to_bits(), n_max);
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    if let Some((_, k)) = cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
        return Ok(Arc::clone(k));
    }
    let kernel = Arc::new(DirectKernel::new(grid, n_max)?);
    let mut guard = cache.lock().unwrap();
    if guard.len() >= 4 {
        guard.remove(0);
    }
    guard.push((key, Arc::clone(&kernel)));
    Ok(kernel)
}

/// Direct-kernel transform with the default basis size ([`DEFAULT_N_MAX`]).
///
/// Bases are cached per grid, so repeated calls on one grid pay the
/// orthonormalization cost once.
pub fn frft_direct_kernel(e: &SampledEnvelope, phi: f64) -> Result<SampledEnvelope> {
    cached_kernel(*e.grid(), DEFAULT_N_MAX)?.apply(e, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gaussian, hermite_gauss, make_grid};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn basis_is_orthonormal() {
        let b = HermiteBasis::new(make_grid(1024, 0.04).unwrap(), 0.0, 1.0, 64).unwrap();
        for i in [0, 7, 31, 63] {
            for j in [0, 7, 31, 63] {
                let ip: f64 = b.mode(i).iter().zip(b.mode(j)).map(|(x, y)| x * y).sum::<f64>() * 0.04;
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_turn_is_identity() {
        let g = TimeGrid::reference();
        let e = hermite_gauss(3, &g, 0.4, 1.1).unwrap();
        let out = frft_direct_kernel(&e, TAU).unwrap();
        for (a, b) in out.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn half_turn_leaves_even_gaussian_alone() {
        let g = TimeGrid::reference();
        let e = gaussian(&g, 0.0, 1.3).unwrap();
        let out = frft_direct_kernel(&e, PI).unwrap();
        for (a, b) in out.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn unrepresentable_input_is_rejected() {
        let g = make_grid(512, 0.05).unwrap();
        let k = DirectKernel::new(g, 8).unwrap();
        let e = gaussian(&g, 3.0, 0.3).unwrap();
        assert!(matches!(k.apply(&e, 0.3), Err(Error::BasisResidual { .. })));
    }
}
