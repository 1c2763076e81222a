mod parse;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chronolens::analysis::{decompose, fit_angle, ModeBasis, OverlapMatrix};
use chronolens::config::ConfigFile;
use chronolens::detection::{recover_envelope, simulate_acquisition, DetectionConfig, LoPhaseModel};
use chronolens::frft::{
    apply_spectral_lens, apply_temporal_lens, frft, reduce_angle, spectral_lens_margin, temporal_lens_margin, FrftPlan, Method,
    SplitPolicy,
};
use chronolens::io::{self, Format};
use chronolens::memory::{apply_memory_channel, bandwidth_after_lens, channel_report, MemoryParams};
use chronolens::reproduce::{self, ReproduceConfig, PLOT_MAX};
use chronolens::signal::{cat_state, hermite_gauss, overlap, to_spectrum, SampledEnvelope, TimeGrid};
use chronolens::wigner::{wigner_window, WignerWindow};

use parse::TimeValue;

macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($arg)*)?
    }};
}

/// Fractional Fourier transforms of pulse envelopes, Wigner maps and a
/// simulated quantum-memory processor.
#[derive(Debug, Parser)]
#[command(name = "chronolens", version, about)]
struct Cli {
    /// TOML or JSON file with named memory and detection presets.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a Hermite-Gaussian mode or a two-pulse cat state.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Apply a fractional Fourier transform through a chosen pipeline.
    Frft(FrftArgs),
    /// Compute the chronocyclic Wigner map of an envelope.
    Wigner(WignerArgs),
    /// Simulate homodyne detection of an envelope and recover it.
    Detect(DetectArgs),
    /// Project an envelope onto Hermite-Gaussian modes.
    Decompose(DecomposeArgs),
    /// Fit a line through mode phases and report the transform angle.
    Fit(FitArgs),
    /// Regenerate a figure or table as data files.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Bin,
    Json,
}

impl From<Fmt> for Format {
    fn from(f: Fmt) -> Self {
        match f {
            Fmt::Csv => Format::Csv,
            Fmt::Bin => Format::Bin,
            Fmt::Json => Format::Json,
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Number of samples (power of two).
    #[arg(long, default_value_t = chronolens::signal::DEFAULT_N)]
    points: usize,
    /// Time step in τ-units, or with a unit suffix (e.g. 84ns).
    #[arg(long, default_value = "0.02", value_parser = parse::time)]
    dt: TimeValue,
    /// Time unit τ in seconds, used to convert SI inputs and stored in file headers.
    #[arg(long, default_value_t = 4.2e-6)]
    tau: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<TimeGrid> {
        Ok(chronolens::signal::make_grid(self.points, self.dt.in_tau(self.tau))?)
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file.
    #[arg(short, long)]
    output: PathBuf,
    /// Output format; defaults to the file extension, then bin.
    #[arg(long, value_enum)]
    format: Option<Fmt>,
}

impl OutArgs {
    fn format(&self) -> Format {
        self.format.map(Format::from).or_else(|| Format::from_path(&self.output)).unwrap_or(Format::Bin)
    }
}

#[derive(Debug, Subcommand)]
enum GenerateKind {
    /// Hermite-Gaussian mode of order n.
    Hermite {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0", value_parser = parse::time, allow_hyphen_values = true)]
        center: TimeValue,
        #[arg(long, default_value = "1", value_parser = parse::time)]
        width: TimeValue,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Two Gaussians of width s at ±mu.
    Cat {
        #[arg(long, value_parser = parse::time)]
        mu: TimeValue,
        #[arg(long, value_parser = parse::time)]
        s: TimeValue,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Lens,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineArg {
    Ideal,
    Memory,
    Full,
}

#[derive(Debug, Args)]
struct FrftArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Angle, e.g. 2pi/3, -pi/4, 0.7 or 60deg.
    #[arg(long, value_parser = parse::angle, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, value_enum, default_value = "lens")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "ideal")]
    pipeline: PipelineArg,
    /// Memory preset (built in: reference, ideal, experiment, uncompensated).
    #[arg(long, default_value = "reference")]
    preset: String,
    #[arg(long, default_value = "calibrated")]
    detection_preset: String,
    /// Seed for the detection noise; required by the full pipeline.
    #[arg(long)]
    seed: Option<u64>,
    /// Use one lens stage for the whole angle.
    #[arg(long)]
    single_stage: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct WignerArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Restrict the map to [-R, R] in both time and frequency.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, default_value_t = 1)]
    oversample: usize,
    /// Bin the map down to at most this many rows and columns.
    #[arg(long, default_value_t = PLOT_MAX)]
    max_bins: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long, default_value = "calibrated")]
    detection_preset: String,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Phase offset between signal and reference per acquisition, in radians.
    #[arg(long)]
    phase_sigma: Option<f64>,
    /// `uniform` or `drift:RATE` (radians per shot).
    #[arg(long)]
    lo_model: Option<String>,
    #[arg(long, default_value_t = 0)]
    acquisition: u64,
    /// Also write the raw shots as `<STEM>.json` + `<STEM>.bin`.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 11)]
    modes: usize,
    #[arg(long, default_value = "0", value_parser = parse::time, allow_hyphen_values = true)]
    center: TimeValue,
    #[arg(long, default_value = "1", value_parser = parse::time)]
    width: TimeValue,
    /// Write the coefficients (csv or json) instead of printing them.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with columns n,phase or a transition-matrix JSON.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Fig2,
    Fig3,
    Fig4,
    Table1,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    target: Target,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Fmt,
    #[arg(long, default_value = "experiment")]
    preset: String,
    #[arg(long, default_value = "calibrated")]
    detection_preset: String,
    /// Noisy repetitions per table1 angle.
    #[arg(long, default_value_t = 20)]
    repetitions: usize,
    /// Acquisitions per mode for the phase histogram.
    #[arg(long, default_value_t = 20)]
    acquisitions: usize,
    #[command(flatten)]
    grid: GridArgs,
}

/// Bad arguments detected after parsing.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<chronolens::Error>() {
            return match e {
                _ if e.is_numeric_guard() => 3,
                chronolens::Error::Io(_) | chronolens::Error::Format(_) => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Generate { kind } => generate(kind),
        Command::Frft(a) => cmd_frft(a, &config),
        Command::Wigner(a) => cmd_wigner(a),
        Command::Detect(a) => cmd_detect(a, &config),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Reproduce(a) => cmd_reproduce(a, &config),
    }
}

fn read_envelope(path: &Path) -> Result<(SampledEnvelope, Option<f64>)> {
    let format = Format::from_path(path).unwrap_or(Format::Bin);
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(io::envelope_from_bytes(&bytes, format).with_context(|| format!("parsing {}", path.display()))?)
}

fn write_envelope(out: &OutArgs, e: &SampledEnvelope, tau: Option<f64>) -> Result<()> {
    let bytes = io::envelope_to_bytes(e, tau, out.format())?;
    io::write_atomic(&out.output, &bytes).with_context(|| format!("writing {}", out.output.display()))?;
    Ok(())
}

fn rms_width(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (x, p) in points {
        w += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / w;
    (m2 / w - mean * mean).max(0.0).sqrt()
}

fn describe(e: &SampledEnvelope) -> String {
    let g = e.grid();
    let st = rms_width(g.points().zip(e.samples().iter().map(|z| z.norm_sqr())));
    let s = to_spectrum(e);
    let sw = rms_width(s.grid().points().zip(s.samples().iter().map(|z| z.norm_sqr())));
    format!(
        "norm {:.6}\nrms duration {st:.4} τ, rms bandwidth {sw:.4} /τ, time-bandwidth estimate (rms product) {:.4}",
        e.norm(),
        st * sw
    )
}

fn generate(kind: GenerateKind) -> Result<()> {
    let (e, grid, out) = match kind {
        GenerateKind::Hermite { n, center, width, grid, out } => {
            let g = grid.grid()?;
            let e = hermite_gauss(n, &g, center.in_tau(grid.tau), width.in_tau(grid.tau))?;
            (e, grid, out)
        }
        GenerateKind::Cat { mu, s, grid, out } => {
            let g = grid.grid()?;
            (cat_state(&g, mu.in_tau(grid.tau), s.in_tau(grid.tau))?, grid, out)
        }
    };
    write_envelope(&out, &e, Some(grid.tau))?;
    out!("wrote {}\n{}", out.output.display(), describe(&e));
    Ok(())
}

fn memory_params(config: &ConfigFile, name: &str) -> Result<MemoryParams> {
    config.memory_preset(name).map_err(|e| usage(e.to_string()))
}

fn detection_config(config: &ConfigFile, name: &str, seed: u64) -> Result<DetectionConfig> {
    let mut d = config.detection_preset(name).map_err(|e| usage(e.to_string()))?;
    d.seed = seed;
    Ok(d)
}

fn cmd_frft(a: FrftArgs, config: &ConfigFile) -> Result<()> {
    let (e, tau) = read_envelope(&a.input)?;
    let method = match a.method {
        MethodArg::Lens => Method::LensSequence,
        MethodArg::Kernel => Method::DirectKernel,
    };
    if a.pipeline != PipelineArg::Ideal && matches!(a.method, MethodArg::Kernel) {
        return Err(usage("the memory pipelines realize the lens sequence; use --method lens"));
    }
    let split = if a.single_stage { SplitPolicy::SingleStage } else { SplitPolicy::Auto };
    let plan = FrftPlan::new(a.phi, method, split)?;
    let mut report = serde_json::json!({
        "phi": a.phi,
        "pipeline": format!("{:?}", a.pipeline).to_lowercase(),
        "plan": plan,
    });
    out!("phi = {} ({:.6} rad), {} stage(s)", reproduce::angle_label(a.phi), a.phi, plan.stages.len());

    if matches!(a.method, MethodArg::Lens) {
        let mut cur = e.clone();
        let mut margins = Vec::new();
        for (k, s) in plan.stages.iter().enumerate() {
            let t1 = temporal_lens_margin(&cur, s.d_t);
            cur = apply_temporal_lens(&cur, s.d_t)?;
            let sp = spectral_lens_margin(&cur, s.d_omega);
            cur = apply_spectral_lens(&cur, s.d_omega)?;
            let t2 = temporal_lens_margin(&cur, s.d_t);
            cur = apply_temporal_lens(&cur, s.d_t)?;
            out!(
                "stage {k}: d_t = {:+.6}, d_omega = {:+.6}, guard margins: temporal {t1:.3}/{t2:.3}, spectral {sp:.3}",
                s.d_t, s.d_omega
            );
            margins.push(serde_json::json!({"temporal_in": t1, "spectral": sp, "temporal_out": t2}));
        }
        report["guard_margins"] = margins.into();
    }

    let output = match a.pipeline {
        PipelineArg::Ideal => frft(&e, &plan)?,
        PipelineArg::Memory | PipelineArg::Full => {
            let p = memory_params(config, &a.preset)?;
            let ch = channel_report(&p, &plan)?;
            if let Ok(single) = bandwidth_after_lens(p.tb, reduce_angle(a.phi)) {
                out!("TB' for one lens at this angle: {:.2} (TB = {})", single.tb_prime, p.tb);
                report["tb_prime_single_stage"] = single.tb_prime.into();
            }
            for (k, s) in ch.stages.iter().enumerate() {
                out!(
                    "memory pass {k}: TB' = {:.2}, efficiency {:.4}, bandwidth required {:.4e} rad/s, available {:.4e} rad/s",
                    s.tb_prime, s.efficiency, s.bandwidth_required, s.bandwidth_available
                );
            }
            out!(
                "total efficiency {:.4}, budget {}",
                ch.total_efficiency,
                if ch.budget_ok() { "ok" } else { "VIOLATED" }
            );
            report["memory"] = serde_json::to_value(&ch)?;
            let stored = apply_memory_channel(&e, &p, &plan)?;
            if a.pipeline == PipelineArg::Full {
                let seed = a.seed.ok_or_else(|| usage("the full pipeline is stochastic: pass --seed"))?;
                let d = detection_config(config, &a.detection_preset, seed)?;
                chronolens::detection::measure(&stored, &d, 0)?
            } else {
                stored
            }
        }
    };
    let f = overlap(&e, &output)?;
    out!("overlap with input: |F| = {:.6}, arg F = {:+.6}", f.norm(), f.arg());
    write_envelope(&a.out, &output, tau)?;
    if let Some(path) = &a.report {
        io::write_atomic(path, &serde_json::to_vec_pretty(&report)?)?;
    }
    out!("wrote {}", a.out.output.display());
    Ok(())
}

fn cmd_wigner(a: WignerArgs) -> Result<()> {
    let (e, _) = read_envelope(&a.input)?;
    if a.max_bins == 0 {
        return Err(usage("--max-bins must be positive"));
    }
    let window = match a.window {
        Some(r) if r > 0.0 => WignerWindow::square(r),
        Some(_) => return Err(usage("--window must be positive")),
        None => WignerWindow::default(),
    }
    .with_oversample(a.oversample);
    let map = wigner_window(&e, &window)?.binned(a.max_bins, a.max_bins);
    io::write_atomic(&a.out.output, &io::map_to_bytes(&map, a.out.format())?)?;
    out!(
        "wrote {} ({} x {}), min {:.4e}, max {:.4e}, integral {:.6}",
        a.out.output.display(),
        map.time_axis.len,
        map.freq_axis.len,
        map.min(),
        map.max(),
        map.integral()
    );
    Ok(())
}

fn parse_lo_model(s: &str) -> Result<LoPhaseModel> {
    match s {
        "uniform" => Ok(LoPhaseModel::UniformRandom),
        _ => match s.strip_prefix("drift:").map(str::parse::<f64>) {
            Some(Ok(rate)) => Ok(LoPhaseModel::SlowDrift { rate }),
            _ => Err(usage(format!("--lo-model {s:?}: expected uniform or drift:RATE"))),
        },
    }
}

fn cmd_detect(a: DetectArgs, config: &ConfigFile) -> Result<()> {
    let (e, tau) = read_envelope(&a.input)?;
    let seed = a.seed.ok_or_else(|| usage("detection is stochastic: pass --seed"))?;
    let mut d = detection_config(config, &a.detection_preset, seed)?;
    if let Some(v) = a.shots {
        d.shots = v;
    }
    if let Some(v) = a.noise_sigma {
        d.noise_sigma = v;
    }
    if let Some(v) = a.phase_sigma {
        d.acquisition_phase_sigma = v;
    }
    if let Some(m) = &a.lo_model {
        d.lo_phase_model = parse_lo_model(m)?;
    }
    d.validate().map_err(|e| usage(e.to_string()))?;
    let shots = simulate_acquisition(&e, &d, a.acquisition)?;
    let recovered = recover_envelope(&shots, &d)?;
    if let Some(stem) = &a.bundle {
        let (json, bin) = io::write_shot_bundle(stem, &shots, &d, a.acquisition)?;
        out!("wrote {} and {}", json.display(), bin.display());
    }
    write_envelope(&a.out, &recovered, tau)?;
    let f = overlap(&e, &recovered)? / e.norm_sqr();
    out!(
        "{} shots, noise sigma {}, overlap with input |F| = {:.6}, arg F = {:+.6}",
        d.shots,
        d.noise_sigma,
        f.norm(),
        f.arg()
    );
    out!("wrote {}", a.out.output.display());
    Ok(())
}

fn cmd_decompose(a: DecomposeArgs) -> Result<()> {
    let (e, tau) = read_envelope(&a.input)?;
    let tau = tau.unwrap_or(4.2e-6);
    let basis = ModeBasis { center: a.center.in_tau(tau), width: a.width.in_tau(tau) };
    let f = decompose(&e, basis, a.modes)?;
    let mut csv = String::from("n,re,im,magnitude2,phase\n");
    for (n, z) in f.iter().enumerate() {
        csv.push_str(&format!("{n},{},{},{},{}\n", z.re, z.im, z.norm_sqr(), z.arg()));
    }
    match &a.output {
        Some(path) => {
            let bytes = match Format::from_path(path) {
                Some(Format::Json) => serde_json::to_vec_pretty(&f)?,
                Some(Format::Csv) | None => csv.into_bytes(),
                Some(Format::Bin) => return Err(usage("coefficients are written as csv or json")),
            };
            io::write_atomic(path, &bytes)?;
            out!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn read_phases(path: &Path) -> Result<Vec<(usize, f64)>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if Format::from_path(path) == Some(Format::Json) {
        let m: OverlapMatrix =
            serde_json::from_slice(&bytes).map_err(chronolens::Error::from).context("parsing matrix")?;
        return Ok(m.diag_phases());
    }
    let text = String::from_utf8(bytes).map_err(|e| chronolens::Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('n')) {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(n, p)| Some((n.trim().parse().ok()?, p.trim().parse().ok()?)));
        out.push(parsed.ok_or_else(|| chronolens::Error::Format(format!("line {}: expected n,phase", i + 1)))?);
    }
    Ok(out)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let fit = fit_angle(&read_phases(&a.input)?)?;
    out!(
        "phi0 = {:+.6} ± {:.6}, dphi/dn = {:+.6} ± {:.6}, measured angle = {:.6} rad ({:.4}π)",
        fit.phi0,
        fit.sigmas.phi0,
        fit.slope,
        fit.sigmas.slope,
        fit.measured_angle(),
        fit.measured_angle() / std::f64::consts::PI
    );
    if let Some(path) = &a.output {
        io::write_atomic(path, &serde_json::to_vec_pretty(&fit)?)?;
        out!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs, config: &ConfigFile) -> Result<()> {
    let seed = a.seed.ok_or_else(|| usage("reproduce runs are stochastic: pass --seed"))?;
    let cfg = ReproduceConfig {
        grid: a.grid.grid()?,
        memory: memory_params(config, &a.preset)?,
        detection: detection_config(config, &a.detection_preset, seed)?,
        repetitions: a.repetitions.max(1),
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let format = Format::from(a.format);
    let written = match a.target {
        Target::Fig2 => {
            let r = reproduce::fig2(&cfg)?;
            print!("{}", r.summary());
            r.write(&a.out, format)?
        }
        Target::Fig3 => {
            let r = reproduce::fig3(&cfg)?;
            print!("{}", r.summary());
            r.write(&a.out, format)?
        }
        Target::Fig4 => {
            let r = reproduce::fig4(&cfg, a.acquisitions.max(1))?;
            print!("{}", r.summary());
            r.write(&a.out)?
        }
        Target::Table1 => {
            let r = reproduce::table1(&cfg)?;
            print!("{}", r.render());
            r.write(&a.out)?
        }
    };
    for p in written {
        out!("wrote {}", p.display());
    }
    Ok(())
}
