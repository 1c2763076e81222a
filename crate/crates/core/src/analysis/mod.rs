//! Hermite-Gaussian decomposition, transition matrices and angle fits.

mod fit;
mod stats;

pub use fit::{fit_angle, unwrap_phases, AngleFit, FitSigmas, UNWRAP_TIE_TOLERANCE};
pub use stats::{phase_histogram, wrap_phase, PhaseHistogram};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{measure, DetectionConfig};
use crate::error::{Error, Result};
use crate::frft::{frft_lens_sequence, FrftPlan};
use crate::memory::{apply_memory_channel, MemoryParams};
use crate::signal::{hermite_gauss, overlap, SampledEnvelope, TimeGrid};

/// Center and width of the projection basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    pub center: f64,
    pub width: f64,
}

impl Default for ModeBasis {
    fn default() -> Self {
        Self { center: 0.0, width: 1.0 }
    }
}

impl ModeBasis {
    pub fn modes(&self, grid: &TimeGrid, count: usize) -> Result<Vec<SampledEnvelope>> {
        (0..count).map(|n| hermite_gauss(n, grid, self.center, self.width)).collect()
    }
}

/// `F_n = ⟨H_n|out⟩` for `n < count`.
pub fn decompose(out: &SampledEnvelope, basis: ModeBasis, count: usize) -> Result<Vec<Complex64>> {
    let modes = basis.modes(out.grid(), count)?;
    project(out, &modes)
}

fn project(out: &SampledEnvelope, modes: &[SampledEnvelope]) -> Result<Vec<Complex64>> {
    modes.iter().map(|h| overlap(h, out)).collect()
}

/// What the input modes are sent through.
#[derive(Debug, Clone, PartialEq)]
pub enum Pipeline {
    /// The three-lens sequence, no loss.
    Ideal,
    /// One memory pass per lens stage.
    MemoryChannel(MemoryParams),
    /// Memory followed by homodyne detection; input mode `m` is acquisition `m`.
    FullWithDetection(MemoryParams, DetectionConfig),
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Ideal => "ideal",
            Pipeline::MemoryChannel(_) => "memory_channel",
            Pipeline::FullWithDetection(..) => "full_with_detection",
        }
    }

    fn memory(&self) -> Option<&MemoryParams> {
        match self {
            Pipeline::Ideal => None,
            Pipeline::MemoryChannel(p) | Pipeline::FullWithDetection(p, _) => Some(p),
        }
    }

    /// Output for one input envelope.
    pub fn run(&self, e: &SampledEnvelope, phi: f64, acquisition: u64) -> Result<SampledEnvelope> {
        match self {
            Pipeline::Ideal => frft_lens_sequence(e, phi),
            Pipeline::MemoryChannel(p) => apply_memory_channel(e, p, &FrftPlan::lens_sequence(phi)?),
            Pipeline::FullWithDetection(p, d) => {
                let stored = apply_memory_channel(e, p, &FrftPlan::lens_sequence(phi)?)?;
                measure(&stored, d, acquisition)
            }
        }
    }
}

/// `coeffs[n][m]`: projection onto mode `n` of the output for input mode `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub coeffs: Vec<Vec<Complex64>>,
    pub n_max: usize,
    pub phi_set: f64,
}

impl OverlapMatrix {
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.coeffs[n][m]
    }

    /// `|F_{n,m}|²`.
    pub fn fidelity(&self, n: usize, m: usize) -> f64 {
        self.coeffs[n][m].norm_sqr()
    }

    pub fn column_power(&self, m: usize) -> f64 {
        (0..self.n_max).map(|n| self.fidelity(n, m)).sum()
    }

    pub fn off_diagonal_power(&self, m: usize) -> f64 {
        (0..self.n_max).filter(|&n| n != m).map(|n| self.fidelity(n, m)).sum()
    }

    /// Largest off-diagonal power relative to its column power.
    pub fn max_leakage(&self) -> f64 {
        (0..self.n_max)
            .map(|m| self.off_diagonal_power(m) / self.column_power(m).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n_max).map(|n| self.coeffs[n][n]).collect()
    }

    /// `(n, arg F_{n,n})` ready for [`fit_angle`].
    pub fn diag_phases(&self) -> Vec<(usize, f64)> {
        self.diagonal().iter().enumerate().map(|(n, z)| (n, z.arg())).collect()
    }
}

/// Sends `H_0..H_{n_max−1}` through `pipeline` at angle `phi` and decomposes
/// each output in the same basis.
pub fn transition_matrix(
    grid: &TimeGrid,
    phi: f64,
    pipeline: &Pipeline,
    n_max: usize,
) -> Result<OverlapMatrix> {
    transition_matrix_from(grid, phi, pipeline, n_max, 0)
}

/// As [`transition_matrix`], with input mode `m` measured as acquisition
/// `first_acquisition + m`.
pub fn transition_matrix_from(
    grid: &TimeGrid,
    phi: f64,
    pipeline: &Pipeline,
    n_max: usize,
    first_acquisition: u64,
) -> Result<OverlapMatrix> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("at least one mode is required".into()));
    }
    if let Some(p) = pipeline.memory() {
        let capacity = p.mode_capacity();
        if n_max > capacity {
            return Err(Error::ModeCapacity { capacity, requested: n_max });
        }
    }
    let modes = ModeBasis::default().modes(grid, n_max)?;
    let columns = modes
        .par_iter()
        .enumerate()
        .map(|(m, h)| project(&pipeline.run(h, phi, first_acquisition + m as u64)?, &modes))
        .collect::<Result<Vec<_>>>()?;
    let coeffs = (0..n_max).map(|n| columns.iter().map(|c| c[n]).collect()).collect();
    Ok(OverlapMatrix { coeffs, n_max, phi_set: phi })
}
