use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Histogram of phases over `[−π, π)` with circular summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub circular_mean: f64,
    /// Mean resultant length `R = |⟨e^{iθ}⟩|`.
    pub resultant_length: f64,
    /// `√(−2 ln R)`.
    pub circular_std: f64,
}

pub fn wrap_phase(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r >= PI { r - TAU } else { r }
}

/// Bins `arg(F)` of each entry; zero entries are skipped.
pub fn phase_histogram(values: &[Complex64], bins: usize) -> Result<PhaseHistogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter("at least one bin is required".into()));
    }
    let phases: Vec<f64> = values.iter().filter(|z| z.norm() > 0.0).map(|z| wrap_phase(z.arg())).collect();
    if phases.is_empty() {
        return Err(Error::InvalidParameter("no non-zero entries to histogram".into()));
    }
    let width = TAU / bins as f64;
    let edges = (0..=bins).map(|i| -PI + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    let mut sum = Complex64::new(0.0, 0.0);
    for &p in &phases {
        let i = (((p + PI) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
        sum += Complex64::from_polar(1.0, p);
    }
    let mean = sum / phases.len() as f64;
    let r = mean.norm().min(1.0);
    Ok(PhaseHistogram {
        edges,
        counts,
        circular_mean: mean.arg(),
        resultant_length: r,
        circular_std: (-2.0 * r.ln()).max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_phasors_fill_one_bin() {
        for p in [0.3, PI, -PI, 3.0] {
            let v = vec![Complex64::from_polar(2.0, p); 50];
            let h = phase_histogram(&v, 36).unwrap();
            assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
            assert_eq!(h.counts.iter().sum::<usize>(), 50);
            assert!(h.circular_std < 1e-6);
        }
    }

    #[test]
    fn wrapped_normal_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 0.2).unwrap();
        let v: Vec<_> = (0..20_000).map(|_| Complex64::from_polar(1.0, 1.0 + normal.sample(&mut rng))).collect();
        let h = phase_histogram(&v, 64).unwrap();
        assert!((h.circular_std - 0.2).abs() < 5e-3, "{}", h.circular_std);
        assert!((h.circular_mean - 1.0).abs() < 5e-3);
    }

    #[test]
    fn uniform_phases_match_circular_statistics() {
        // for N uniform phases N·R² is Exp(1) distributed
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let mut total = 0.0;
        for _ in 0..50 {
            let v: Vec<_> = (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU)).collect();
            let h = phase_histogram(&v, 20).unwrap();
            total += n as f64 * h.resultant_length.powi(2);
            assert!(h.counts.iter().all(|&c| (c as f64 - 500.0).abs() < 120.0));
        }
        let mean = total / 50.0;
        assert!((mean - 1.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn bad_input() {
        assert!(phase_histogram(&[], 4).is_err());
        assert!(phase_histogram(&[Complex64::new(1.0, 0.0)], 0).is_err());
    }
}
