//! Chronocyclic Wigner function of a sampled envelope.
//!
//! `W(t, ω) = (1/2π) ∫ dξ E(t + ξ/2) E*(t − ξ/2) e^{+iωξ}`.
//!
//! On the sample grid the lag takes the values `ξ_m = 2m·dt` for
//! `m ∈ [−n/2, n/2)` (twice the span of the time grid, zero outside it) and
//! the transform over `m` yields the frequency axis `ω_j = j·π/(L·dt)` with
//! `L = n·oversample`. Both marginals are then exact sums:
//! `Σ_j W dω = |E(t)|²` and `Σ_k W dt = |Ẽ(ω)|²` up to aliasing from beyond
//! `|ω| = π/(2dt)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{overlap, SampledEnvelope};

/// Uniform axis `start + i·step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.at(i))
    }

    fn same_as(&self, other: &Axis) -> bool {
        let tol = 1e-9 * self.step.abs().max(other.step.abs());
        self.len == other.len
            && (self.step - other.step).abs() <= tol
            && (self.start - other.start).abs() <= tol * self.len as f64
    }

    fn sub(&self, range: std::ops::Range<usize>) -> Axis {
        Axis { start: self.at(range.start), step: self.step, len: range.len() }
    }

    fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = self.points().position(|x| x >= lo).unwrap_or(self.len);
        let last = (0..self.len).rev().find(|&i| self.at(i) <= hi).map_or(0, |i| i + 1);
        first..last.max(first)
    }
}

/// Real 2-D distribution sampled on `time_axis × freq_axis`, row-major with
/// one row per time sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMap {
    pub time_axis: Axis,
    pub freq_axis: Axis,
    pub values: Vec<f64>,
    /// Largest imaginary part left by the transform, relative to the largest
    /// real value.
    pub imag_residue: f64,
}

/// Region (and frequency oversampling) for [`wigner_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerWindow {
    pub time: Option<(f64, f64)>,
    pub freq: Option<(f64, f64)>,
    pub freq_oversample: usize,
}

impl Default for WignerWindow {
    fn default() -> Self {
        Self { time: None, freq: None, freq_oversample: 1 }
    }
}

impl WignerWindow {
    /// Square window `[−r, r] × [−r, r]`.
    pub fn square(half_extent: f64) -> Self {
        Self {
            time: Some((-half_extent, half_extent)),
            freq: Some((-half_extent, half_extent)),
            freq_oversample: 1,
        }
    }

    pub fn with_oversample(mut self, factor: usize) -> Self {
        self.freq_oversample = factor;
        self
    }
}

/// Full map: every time sample and the whole frequency period.
pub fn wigner(e: &SampledEnvelope) -> WignerMap {
    wigner_window(e, &WignerWindow::default()).expect("default window is valid")
}

/// Map restricted to a window; only the requested rows are transformed.
pub fn wigner_window(e: &SampledEnvelope, window: &WignerWindow) -> Result<WignerMap> {
    if window.freq_oversample == 0 || !window.freq_oversample.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "frequency oversampling {} must be a power of two",
            window.freq_oversample
        )));
    }
    let g = *e.grid();
    let n = g.n;
    let len = n * window.freq_oversample;
    let full_time = Axis { start: g.t_start, step: g.dt, len: n };
    let full_freq = Axis {
        start: -(len as f64 / 2.0) * PI / (len as f64 * g.dt),
        step: PI / (len as f64 * g.dt),
        len,
    };
    let rows = match window.time {
        Some((lo, hi)) => full_time.index_range(lo, hi),
        None => 0..n,
    };
    let cols = match window.freq {
        Some((lo, hi)) => full_freq.index_range(lo, hi),
        None => 0..len,
    };
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidParameter("Wigner window selects no samples".into()));
    }

    let fft = FftPlanner::new().plan_fft(len, FftDirection::Inverse);
    let samples = e.samples();
    let half = (n / 2) as isize;
    let prefactor = g.dt / PI;
    let computed: Vec<(Vec<f64>, f64, f64)> = rows
        .clone()
        .into_par_iter()
        .map(|k| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            let k = k as isize;
            for m in -half..half {
                let (a, b) = (k + m, k - m);
                if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                    buf[m.rem_euclid(len as isize) as usize] =
                        samples[a as usize] * samples[b as usize].conj();
                }
            }
            fft.process(&mut buf);
            let mut row = Vec::with_capacity(cols.len());
            let mut max_re = 0.0f64;
            let mut max_im = 0.0f64;
            for j in cols.clone() {
                // fftshift: axis index j ↔ transform bin j − len/2
                let bin = (j + len / 2) % len;
                let z = buf[bin] * prefactor;
                max_re = max_re.max(z.re.abs());
                max_im = max_im.max(z.im.abs());
                row.push(z.re);
            }
            (row, max_re, max_im)
        })
        .collect();

    let max_re = computed.iter().map(|c| c.1).fold(0.0, f64::max);
    let max_im = computed.iter().map(|c| c.2).fold(0.0, f64::max);
    let values = computed.into_iter().flat_map(|c| c.0).collect();
    Ok(WignerMap {
        time_axis: full_time.sub(rows),
        freq_axis: full_freq.sub(cols),
        values,
        imag_residue: if max_re > 0.0 { max_im / max_re } else { max_im },
    })
}

impl WignerMap {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.freq_axis.len + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.time_axis.step * self.freq_axis.step
    }

    /// `∫W dω` for every time sample.
    pub fn time_marginal(&self) -> Vec<f64> {
        self.values
            .chunks(self.freq_axis.len)
            .map(|row| row.iter().sum::<f64>() * self.freq_axis.step)
            .collect()
    }

    /// `∫W dt` for every frequency sample.
    pub fn freq_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.freq_axis.len];
        for row in self.values.chunks(self.freq_axis.len) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o *= self.time_axis.step);
        out
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// `(∬W² dt dω)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_area()).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the sample nearest to `(t, ω)`, or `None` outside the map.
    pub fn nearest(&self, t: f64, omega: f64) -> Option<f64> {
        let i = ((t - self.time_axis.start) / self.time_axis.step).round();
        let j = ((omega - self.freq_axis.start) / self.freq_axis.step).round();
        if i < 0.0 || j < 0.0 || i as usize >= self.time_axis.len || j as usize >= self.freq_axis.len {
            return None;
        }
        Some(self.get(i as usize, j as usize))
    }

    pub fn same_axes(&self, other: &WignerMap) -> bool {
        self.time_axis.same_as(&other.time_axis) && self.freq_axis.same_as(&other.freq_axis)
    }

    fn ensure_same_axes(&self, other: &WignerMap) -> Result<()> {
        if self.same_axes(other) {
            Ok(())
        } else {
            Err(Error::AxisMismatch(format!(
                "time {:?} / freq {:?} vs time {:?} / freq {:?}",
                self.time_axis, self.freq_axis, other.time_axis, other.freq_axis
            )))
        }
    }

    /// Bilinear interpolation; zero outside the sampled domain.
    pub fn interpolate(&self, t: f64, omega: f64) -> f64 {
        let x = (t - self.time_axis.start) / self.time_axis.step;
        let y = (omega - self.freq_axis.start) / self.freq_axis.step;
        let (nx, ny) = (self.time_axis.len, self.freq_axis.len);
        if !(x >= 0.0 && y >= 0.0) || x > (nx - 1) as f64 || y > (ny - 1) as f64 {
            return 0.0;
        }
        let i = (x.floor() as usize).min(nx.saturating_sub(2));
        let j = (y.floor() as usize).min(ny.saturating_sub(2));
        let fx = x - i as f64;
        let fy = y - j as f64;
        let v00 = self.get(i, j);
        let v01 = self.get(i, (j + 1).min(ny - 1));
        let v10 = self.get((i + 1).min(nx - 1), j);
        let v11 = self.get((i + 1).min(nx - 1), (j + 1).min(ny - 1));
        (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11)
    }

    /// Block-averages down to at most `max_rows × max_cols` for plotting.
    pub fn binned(&self, max_rows: usize, max_cols: usize) -> WignerMap {
        let by = self.time_axis.len.div_ceil(max_rows.max(1));
        let bx = self.freq_axis.len.div_ceil(max_cols.max(1));
        if by == 1 && bx == 1 {
            return self.clone();
        }
        let rows = self.time_axis.len / by;
        let cols = self.freq_axis.len / bx;
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut acc = 0.0;
                for i in r * by..(r + 1) * by {
                    for j in c * bx..(c + 1) * bx {
                        acc += self.get(i, j);
                    }
                }
                values.push(acc / (by * bx) as f64);
            }
        }
        let centre = |a: &Axis, b: usize| Axis {
            start: a.start + a.step * (b as f64 - 1.0) / 2.0,
            step: a.step * b as f64,
            len: 0,
        };
        WignerMap {
            time_axis: Axis { len: rows, ..centre(&self.time_axis, by) },
            freq_axis: Axis { len: cols, ..centre(&self.freq_axis, bx) },
            values,
            imag_residue: self.imag_residue,
        }
    }
}

/// Rigid rotation of the map by `phi` about the origin.
///
/// Positive angles carry the time axis toward the frequency axis:
/// `W'(t, ω) = W(t cos φ + ω sin φ, −t sin φ + ω cos φ)`. The output shares
/// the input axes; samples whose source falls outside the map are zero.
pub fn rotate_map(w: &WignerMap, phi: f64) -> Result<WignerMap> {
    let (ta, fa) = (w.time_axis, w.freq_axis);
    let tol = 1.5 * ta.step.max(fa.step);
    if (ta.start - fa.start).abs() > tol || (ta.end() - fa.end()).abs() > tol {
        return Err(Error::AxisMismatch(format!(
            "rotation needs equal time and frequency extents, got [{:.4}, {:.4}] and [{:.4}, {:.4}]",
            ta.start,
            ta.end(),
            fa.start,
            fa.end()
        )));
    }
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!("angle {phi} is not finite")));
    }
    if crate::frft::reduce_angle(phi) == 0.0 {
        return Ok(w.clone());
    }
    let (s, c) = phi.sin_cos();
    let values = (0..ta.len)
        .into_par_iter()
        .flat_map_iter(|i| {
            let t = ta.at(i);
            (0..fa.len).map(move |j| {
                let om = fa.at(j);
                w.interpolate(t * c + om * s, -t * s + om * c)
            })
        })
        .collect();
    Ok(WignerMap { time_axis: ta, freq_axis: fa, values, imag_residue: w.imag_residue })
}

/// Normalized cross-correlation `∬ab / (∬a² ∬b²)^{1/2}`, clipped to `[0, 1]`.
///
/// For maps of pure states this equals `|⟨a|b⟩|²` by Moyal's identity, so it
/// agrees with [`state_fidelity`] when both maps capture the states fully.
pub fn map_fidelity(a: &WignerMap, b: &WignerMap) -> Result<f64> {
    a.ensure_same_axes(b)?;
    let ab: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let aa: f64 = a.values.iter().map(|x| x * x).sum();
    let bb: f64 = b.values.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        return Ok(0.0);
    }
    Ok((ab / (aa * bb).sqrt()).clamp(0.0, 1.0))
}

/// `‖a − b‖ / ‖a‖` over the shared axes.
pub fn map_distance(a: &WignerMap, b: &WignerMap) -> Result<f64> {
    a.ensure_same_axes(b)?;
    let diff: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    let aa: f64 = a.values.iter().map(|x| x * x).sum();
    Ok(if aa > 0.0 { (diff / aa).sqrt() } else { diff.sqrt() })
}

/// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
pub fn state_fidelity(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<f64> {
    let denom = a.norm_sqr() * b.norm_sqr();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(overlap(a, b)?.norm_sqr() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gaussian, hermite_gauss, make_grid};

    fn small_grid() -> crate::signal::TimeGrid {
        make_grid(256, (PI / 256.0).sqrt()).unwrap()
    }

    #[test]
    fn gaussian_map_closed_form() {
        let g = make_grid(512, 0.05).unwrap();
        let w = wigner(&gaussian(&g, 0.0, 1.0).unwrap());
        for i in (0..w.time_axis.len).step_by(7) {
            for j in (0..w.freq_axis.len).step_by(5) {
                let (t, om) = (w.time_axis.at(i), w.freq_axis.at(j));
                let expect = (-t * t - om * om).exp() / PI;
                assert!((w.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_mode_dips_negative_at_origin() {
        // closed form: W_1(0, 0) = −1/π
        let g = make_grid(512, 0.05).unwrap();
        let w = wigner(&hermite_gauss(1, &g, 0.0, 1.0).unwrap());
        let v = w.nearest(0.0, 0.0).unwrap();
        assert!(v < 0.0);
        assert!((v + 1.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let w = wigner_window(&gaussian(&small_grid(), 0.5, 1.0).unwrap(), &WignerWindow::square(6.0))
            .unwrap();
        assert_eq!(rotate_map(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn quarter_rotation_swaps_axes() {
        let g = small_grid();
        let e = gaussian(&g, 2.0, 0.7).unwrap();
        let w = wigner_window(&e, &WignerWindow::square(8.0)).unwrap();
        let r = rotate_map(&w, PI / 2.0).unwrap();
        // pixel steps coincide (dt² = π/n), so the swap is exact on the grid
        for i in 0..w.time_axis.len {
            for j in 0..w.freq_axis.len {
                let (t, om) = (w.time_axis.at(i), w.freq_axis.at(j));
                if let Some(src) = w.nearest(om, -t) {
                    assert!((r.get(i, j) - src).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn symmetric_gaussian_is_rotation_invariant() {
        let g = make_grid(1024, (PI / 1024.0).sqrt()).unwrap();
        let w = wigner_window(&gaussian(&g, 0.0, 1.0).unwrap(), &WignerWindow::square(8.0)).unwrap();
        for phi in [0.3, 1.1, 2.5] {
            let r = rotate_map(&w, phi).unwrap();
            let max_err = r.values.iter().zip(&w.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(max_err < 1e-3, "{max_err}");
        }
    }

    #[test]
    fn rotation_needs_square_extents() {
        let g = make_grid(256, 0.1).unwrap();
        let w = wigner(&gaussian(&g, 0.0, 1.0).unwrap());
        assert!(matches!(rotate_map(&w, 0.4), Err(Error::AxisMismatch(_))));
    }

    #[test]
    fn fidelity_self_and_disjoint() {
        let g = small_grid();
        let win = WignerWindow::square(12.0);
        let a = wigner_window(&gaussian(&g, -5.0, 0.6).unwrap(), &win).unwrap();
        let b = wigner_window(&gaussian(&g, 5.0, 0.6).unwrap(), &win).unwrap();
        assert!((map_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(map_fidelity(&a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn fidelity_rejects_axis_mismatch() {
        let g = small_grid();
        let e = gaussian(&g, 0.0, 1.0).unwrap();
        let a = wigner_window(&e, &WignerWindow::square(4.0)).unwrap();
        let b = wigner_window(&e, &WignerWindow::square(6.0)).unwrap();
        assert!(matches!(map_fidelity(&a, &b), Err(Error::AxisMismatch(_))));
    }

    #[test]
    fn binning_caps_dimensions_and_keeps_integral() {
        let g = make_grid(1024, 0.03).unwrap();
        let w = wigner(&gaussian(&g, 0.0, 1.0).unwrap());
        let b = w.binned(512, 512);
        assert!(b.time_axis.len <= 512 && b.freq_axis.len <= 512);
        assert!((b.integral() - w.integral()).abs() < 1e-9);
    }
}
