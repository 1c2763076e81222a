use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{SampledEnvelope, SpectralEnvelope};

/// Unitary Fourier transform onto the reciprocal grid.
///
/// `Ẽ(ω) = (2π)^{-1/2} Σ_k E(t_k) e^{+iωt_k} dt`, so `Σ|Ẽ|²dω = Σ|E|²dt`
/// holds exactly on the discrete grids. The `+i` sign is the global Fourier
/// convention of the crate and matches the chronocyclic Wigner kernel.
pub fn to_spectrum(e: &SampledEnvelope) -> SpectralEnvelope {
    let grid = *e.grid();
    let fgrid = grid.frequency_grid();
    let mut buf: Vec<Complex64> = e
        .samples()
        .iter()
        .enumerate()
        .map(|(k, z)| z * Complex64::from_polar(1.0, fgrid.omega_start * grid.t(k)))
        .collect();
    FftPlanner::new().plan_fft(grid.n, FftDirection::Inverse).process(&mut buf);
    let scale = grid.dt / (2.0 * PI).sqrt();
    for (j, z) in buf.iter_mut().enumerate() {
        *z *= Complex64::from_polar(scale, j as f64 * fgrid.domega * grid.t_start);
    }
    SpectralEnvelope { grid: fgrid, samples: buf, time_grid: grid }
}

/// Exact inverse of [`to_spectrum`].
pub fn from_spectrum(s: &SpectralEnvelope) -> SampledEnvelope {
    let fgrid = *s.grid();
    let grid = *s.time_grid();
    let mut buf: Vec<Complex64> = s
        .samples()
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, -(j as f64) * fgrid.domega * grid.t_start))
        .collect();
    FftPlanner::new().plan_fft(grid.n, FftDirection::Forward).process(&mut buf);
    let scale = fgrid.domega / (2.0 * PI).sqrt();
    for (k, z) in buf.iter_mut().enumerate() {
        *z *= Complex64::from_polar(scale, -fgrid.omega_start * grid.t(k));
    }
    SampledEnvelope { grid, samples: buf }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{hermite_gauss, make_grid, TimeGrid};

    /// Dense evaluation of the kernel definition, O(n²).
    fn dense_spectrum(e: &SampledEnvelope) -> Vec<Complex64> {
        let g = e.grid();
        let f = g.frequency_grid();
        (0..g.n)
            .map(|j| {
                let w = f.omega(j);
                e.samples()
                    .iter()
                    .enumerate()
                    .map(|(k, z)| z * Complex64::from_polar(1.0, w * g.t(k)))
                    .sum::<Complex64>()
                    * g.dt
                    / (2.0 * PI).sqrt()
            })
            .collect()
    }

    #[test]
    fn matches_dense_kernel() {
        let g = make_grid(256, 0.1).unwrap();
        let e = SampledEnvelope::from_fn(g, |t| {
            Complex64::new((-(t - 1.0) * (t - 1.0)).exp(), 0.5 * (-t * t / 3.0).exp() * t)
        })
        .unwrap();
        let fast = to_spectrum(&e);
        for (a, b) in fast.samples().iter().zip(dense_spectrum(&e)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_is_self_transform() {
        let g = make_grid(1024, 0.05).unwrap();
        let e = hermite_gauss(0, &g, 0.0, 1.0).unwrap();
        let s = to_spectrum(&e);
        for (j, z) in s.samples().iter().enumerate() {
            let w = s.grid().omega(j);
            let expect = (-w * w / 2.0).exp() / PI.powf(0.25);
            assert!((z - expect).norm() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn first_hermite_gains_factor_i() {
        // Checked against the dense kernel rather than the analytic form.
        let g = make_grid(512, 0.05).unwrap();
        let e = hermite_gauss(1, &g, 0.0, 1.0).unwrap();
        let dense = dense_spectrum(&e);
        let f = g.frequency_grid();
        let on_freq = SampledEnvelope::from_fn(
            TimeGrid { t_start: f.omega_start, dt: f.domega, n: f.n },
            |w| Complex64::new(std::f64::consts::SQRT_2 * w * (-w * w / 2.0).exp() / PI.powf(0.25), 0.0),
        )
        .unwrap();
        for (d, h) in dense.iter().zip(on_freq.samples()) {
            assert!((d - Complex64::i() * h).norm() < 1e-10);
        }
    }

    #[test]
    fn spike_round_trips() {
        let g = make_grid(64, 0.5).unwrap();
        let mut e = SampledEnvelope::zeros(g);
        e.samples_mut()[20] = Complex64::new(2.0, 0.0);
        let s = to_spectrum(&e);
        let mags: Vec<f64> = s.samples().iter().map(|z| z.norm()).collect();
        for m in &mags {
            assert!((m - mags[0]).abs() < 1e-12);
        }
        let back = from_spectrum(&s);
        for (a, b) in back.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let e = SampledEnvelope::zeros(make_grid(32, 0.1).unwrap());
        let back = from_spectrum(&to_spectrum(&e));
        assert!(back.samples().iter().all(|z| z.norm() == 0.0));
    }
}
