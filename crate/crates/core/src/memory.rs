//! Gradient-echo memory as a channel acting on a stored envelope.
//!
//! One pass through the memory realizes one lens stage: the write-in chirp is
//! a temporal lens, the ac-Stark profile imprinted along the ensemble is a
//! spectral lens (frequency maps to position through `ω = βz + ω₀`), the
//! stored amplitude is scaled by `√η`, and the read-out chirp is a second
//! temporal lens applied in the time-inverted frame of the echo.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frft::{apply_temporal_lens, FrftPlan, Stage};
use crate::signal::SampledEnvelope;

/// How the storage efficiency is composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `η = 1 − exp(−2π·OD/TB′)`.
    #[default]
    FormulaOnly,
    /// The formula times `exp(−2·Γ·T)` with the storage window `T = √TB·τ`.
    FormulaTimesExpDecay,
}

/// Memory operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryParams {
    /// Optical density of the ensemble.
    pub od: f64,
    /// Coherence decay rate in Hz.
    pub gamma: f64,
    /// Time unit τ in seconds.
    pub tau_seconds: f64,
    /// Time-bandwidth area of the signals the memory is configured for.
    pub tb: f64,
    /// Magnetic gradient in rad/s per metre; `None` matches `β·L = B′`.
    pub beta: Option<f64>,
    /// Cloud length in metres.
    pub length: f64,
    /// Unwanted constant spectral focusing power added by the memory.
    pub parasitic_d_omega: f64,
    /// Spectral focusing power subtracted to cancel the parasitic term.
    pub compensation_d_omega: f64,
    pub decay_model: DecayModel,
    /// Fixed efficiency replacing the formula when set.
    pub efficiency_override: Option<f64>,
}

/// Parasitic strength used by the experiment-like presets. Not a measured
/// value; it only has to be large enough to show mode mixing.
pub const PRESET_PARASITIC_D_OMEGA: f64 = 0.15;

impl Default for MemoryParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl MemoryParams {
    /// OD 85, Γ = 9.1 kHz, τ = 4.2 µs, TB = 110, 10 mm cloud, no parasitic
    /// phase, formula-only efficiency.
    pub fn reference() -> Self {
        Self {
            od: 85.0,
            gamma: 9.1e3,
            tau_seconds: 4.2e-6,
            tb: 110.0,
            beta: None,
            length: 10e-3,
            parasitic_d_omega: 0.0,
            compensation_d_omega: 0.0,
            decay_model: DecayModel::FormulaOnly,
            efficiency_override: None,
        }
    }

    /// Lossless, phase-perfect memory.
    pub fn ideal() -> Self {
        Self { efficiency_override: Some(1.0), ..Self::reference() }
    }

    /// Reference operating point with a parasitic spectral phase and its exact
    /// compensation.
    pub fn experiment() -> Self {
        Self {
            parasitic_d_omega: PRESET_PARASITIC_D_OMEGA,
            compensation_d_omega: PRESET_PARASITIC_D_OMEGA,
            ..Self::reference()
        }
    }

    /// As [`Self::experiment`] with the compensation switched off.
    pub fn uncompensated() -> Self {
        Self { compensation_d_omega: 0.0, ..Self::experiment() }
    }

    /// Built-in presets by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "reference" => Some(Self::reference()),
            "ideal" => Some(Self::ideal()),
            "experiment" => Some(Self::experiment()),
            "uncompensated" => Some(Self::uncompensated()),
            _ => None,
        }
    }

    pub const PRESET_NAMES: [&'static str; 4] = ["reference", "ideal", "experiment", "uncompensated"];

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.od > 0.0 && self.od.is_finite()) {
            return bad("optical density must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("decay rate must be non-negative");
        }
        if !(self.tau_seconds > 0.0 && self.tau_seconds.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.tb > 0.0 && self.tb.is_finite()) {
            return bad("time-bandwidth area must be positive");
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad("cloud length must be positive");
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad("magnetic gradient must be positive");
            }
        }
        if let Some(eta) = self.efficiency_override {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad("efficiency override must lie in (0, 1]");
            }
        }
        if !(self.parasitic_d_omega.is_finite() && self.compensation_d_omega.is_finite()) {
            return bad("spectral phase strengths must be finite");
        }
        Ok(())
    }

    /// Storage window `T = √TB·τ` in seconds.
    pub fn window_seconds(&self) -> f64 {
        self.tb.sqrt() * self.tau_seconds
    }

    /// Number of Hermite-Gaussian modes the area holds (TB = 110 for 11).
    pub fn mode_capacity(&self) -> usize {
        (self.tb / 10.0 + 1e-9).floor() as usize
    }

    /// Net spectral power added on top of the programmed lens.
    pub fn residual_d_omega(&self) -> f64 {
        self.parasitic_d_omega - self.compensation_d_omega
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Time-bandwidth area before and after the write-in lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthBudget {
    pub tb: f64,
    pub phi: f64,
    pub tb_prime: f64,
}

/// `TB′ = TB·(1 + |tan(φ/2)|)`.
pub fn bandwidth_after_lens(tb: f64, phi: f64) -> Result<BandwidthBudget> {
    if !(tb > 0.0 && tb.is_finite()) {
        return Err(Error::InvalidParameter(format!("time-bandwidth area {tb} must be positive")));
    }
    let (d_t, _) = crate::frft::lens_coefficients(phi)?;
    Ok(BandwidthBudget { tb, phi, tb_prime: tb * (1.0 + d_t.abs()) })
}

/// Storage efficiency for an expanded area `tb_prime`.
pub fn storage_efficiency(p: &MemoryParams, tb_prime: f64) -> f64 {
    if let Some(eta) = p.efficiency_override {
        return eta;
    }
    let eta = 1.0 - (-2.0 * std::f64::consts::PI * p.od / tb_prime).exp();
    match p.decay_model {
        DecayModel::FormulaOnly => eta,
        DecayModel::FormulaTimesExpDecay => eta * (-2.0 * p.gamma * p.window_seconds()).exp(),
    }
}

/// Per-stage bookkeeping for one pass through the memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub phi: f64,
    pub d_t: f64,
    pub d_omega: f64,
    pub tb_prime: f64,
    pub efficiency: f64,
    /// `B′ = TB′/T` in rad/s.
    pub bandwidth_required: f64,
    /// `β·L` in rad/s.
    pub bandwidth_available: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub stages: Vec<StageReport>,
    pub total_efficiency: f64,
}

impl ChannelReport {
    pub fn budget_ok(&self) -> bool {
        self.stages.iter().all(|s| s.bandwidth_available >= s.bandwidth_required * (1.0 - 1e-12))
    }
}

/// Efficiency and bandwidth budget for every stage of `plan`, without
/// touching a signal.
pub fn channel_report(p: &MemoryParams, plan: &FrftPlan) -> Result<ChannelReport> {
    p.validate()?;
    let mut stages = Vec::with_capacity(plan.stages.len());
    let mut total = 1.0;
    for stage in &plan.stages {
        let phi = stage.angle();
        let budget = bandwidth_after_lens(p.tb, phi)?;
        let required = budget.tb_prime / p.window_seconds();
        let available = p.beta.map_or(required, |b| b * p.length);
        let eta = storage_efficiency(p, budget.tb_prime);
        total *= eta;
        stages.push(StageReport {
            phi,
            d_t: stage.d_t,
            d_omega: stage.d_omega,
            tb_prime: budget.tb_prime,
            efficiency: eta,
            bandwidth_required: required,
            bandwidth_available: available,
        });
    }
    Ok(ChannelReport { stages, total_efficiency: total })
}

/// Which way the time axis runs while a chirp is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFrame {
    Forward,
    Inverted,
}

/// Phase `exp(∓i·rate·t²/2)` left by a linear coupling-detuning ramp of
/// `rate` (units of 1/τ²). In the inverted frame the accumulated phase
/// changes sign.
pub fn detuning_chirp(e: &SampledEnvelope, rate: f64, frame: TimeFrame) -> Result<SampledEnvelope> {
    let d = match frame {
        TimeFrame::Forward => rate,
        TimeFrame::Inverted => -rate,
    };
    apply_temporal_lens(e, d)
}

/// Read-out lens: the echo emerges with its time axis inverted, so the ramp
/// runs at `−d_t` in that frame. Net effect: a temporal lens of power `d_t`.
pub fn readout_lens(e: &SampledEnvelope, d_t: f64) -> Result<SampledEnvelope> {
    let inverted = e.time_reversed()?;
    let chirped = detuning_chirp(&inverted, -d_t, TimeFrame::Inverted)?;
    chirped.time_reversed()
}

fn apply_pass(e: &SampledEnvelope, p: &MemoryParams, stage: &Stage, eta: f64) -> Result<SampledEnvelope> {
    let written = detuning_chirp(e, stage.d_t, TimeFrame::Forward)?;
    let stored = crate::frft::apply_spectral_lens(&written, stage.d_omega + p.residual_d_omega())?;
    let scaled = stored.scaled(num_complex::Complex64::new(eta.sqrt(), 0.0));
    readout_lens(&scaled, stage.d_t)
}

/// Runs `e` through the memory once per plan stage.
///
/// The output energy is the input energy times the product of per-pass
/// efficiencies.
pub fn apply_memory_channel(
    e: &SampledEnvelope,
    p: &MemoryParams,
    plan: &FrftPlan,
) -> Result<SampledEnvelope> {
    let report = channel_report(p, plan)?;
    if let Some(s) = report.stages.iter().find(|s| s.bandwidth_available < s.bandwidth_required * (1.0 - 1e-12)) {
        return Err(Error::Budget { available: s.bandwidth_available, required: s.bandwidth_required });
    }
    let mut out = e.clone();
    for (stage, r) in plan.stages.iter().zip(&report.stages) {
        out = apply_pass(&out, p, stage, r.efficiency)?;
    }
    Ok(out)
}
