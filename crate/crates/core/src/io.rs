//! File formats for envelopes, maps, matrices, fits and shot bundles.
//!
//! Binary files start with one JSON header line followed by little-endian
//! `f64` values. CSV files use Rust's shortest round-trip float formatting,
//! so both round trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::OverlapMatrix;
use crate::detection::{DetectionConfig, HomodyneShot, LoPhaseModel};
use crate::error::{Error, Result};
use crate::signal::{SampledEnvelope, TimeGrid};
use crate::wigner::{Axis, WignerMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Bin,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Bin => "bin",
            Format::Json => "json",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "bin" => Some(Format::Bin),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// Header of a binary envelope file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeHeader {
    pub n: usize,
    pub dt: f64,
    pub t_start: f64,
    /// Physical time unit, when known.
    pub tau_seconds: Option<f64>,
}

impl EnvelopeHeader {
    fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_start, self.dt, self.n)
    }
}

#[derive(Serialize, Deserialize)]
struct EnvelopeJson {
    #[serde(flatten)]
    header: EnvelopeHeader,
    re: Vec<f64>,
    im: Vec<f64>,
}

fn split_header(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    Ok((&bytes[..nl], &bytes[nl + 1..]))
}

fn read_f64s(payload: &[u8], count: usize) -> Result<Vec<f64>> {
    if payload.len() != count * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            count * 8
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn push_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn header_line<T: Serialize>(header: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    Ok(out)
}

pub fn envelope_to_bytes(e: &SampledEnvelope, tau_seconds: Option<f64>, format: Format) -> Result<Vec<u8>> {
    let g = e.grid();
    let header = EnvelopeHeader { n: g.n, dt: g.dt, t_start: g.t_start, tau_seconds };
    match format {
        Format::Bin => {
            let mut out = header_line(&header)?;
            push_f64s(&mut out, e.samples().iter().flat_map(|z| [z.re, z.im]));
            Ok(out)
        }
        Format::Csv => {
            let mut s = String::from("t,re,im\n");
            for (t, z) in g.points().zip(e.samples()) {
                writeln!(s, "{t},{},{}", z.re, z.im).expect("write to string");
            }
            Ok(s.into_bytes())
        }
        Format::Json => {
            let doc = EnvelopeJson {
                header,
                re: e.samples().iter().map(|z| z.re).collect(),
                im: e.samples().iter().map(|z| z.im).collect(),
            };
            Ok(serde_json::to_vec_pretty(&doc)?)
        }
    }
}

/// Parses an envelope; the returned `tau_seconds` is `None` for CSV.
pub fn envelope_from_bytes(bytes: &[u8], format: Format) -> Result<(SampledEnvelope, Option<f64>)> {
    match format {
        Format::Bin => {
            let (head, payload) = split_header(bytes)?;
            let header: EnvelopeHeader = serde_json::from_slice(head)?;
            let values = read_f64s(payload, 2 * header.n)?;
            let samples = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Ok((SampledEnvelope::new(header.grid()?, samples)?, header.tau_seconds))
        }
        Format::Json => {
            let doc: EnvelopeJson = serde_json::from_slice(bytes)?;
            if doc.re.len() != doc.header.n || doc.im.len() != doc.header.n {
                return Err(Error::Format("sample arrays do not match n".into()));
            }
            let samples = doc.re.iter().zip(&doc.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            Ok((SampledEnvelope::new(doc.header.grid()?, samples)?, doc.header.tau_seconds))
        }
        Format::Csv => {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
            let mut ts = Vec::new();
            let mut samples = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || (i == 0 && line.starts_with('t')) {
                    continue;
                }
                let cols: Vec<f64> = line
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
                if cols.len() != 3 {
                    return Err(Error::Format(format!("line {}: expected t,re,im", i + 1)));
                }
                ts.push(cols[0]);
                samples.push(Complex64::new(cols[1], cols[2]));
            }
            if ts.len() < 2 {
                return Err(Error::Format("need at least two samples".into()));
            }
            let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
            if ts.iter().enumerate().any(|(k, t)| (t - (ts[0] + k as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0)) {
                return Err(Error::Format("time column is not uniformly spaced".into()));
            }
            let grid = TimeGrid::new(ts[0], dt, ts.len())?;
            Ok((SampledEnvelope::new(grid, samples)?, None))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MapHeader {
    time_axis: Axis,
    freq_axis: Axis,
    imag_residue: f64,
}

pub fn map_to_bytes(map: &WignerMap, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Bin => {
            let mut out = header_line(&MapHeader {
                time_axis: map.time_axis,
                freq_axis: map.freq_axis,
                imag_residue: map.imag_residue,
            })?;
            push_f64s(&mut out, map.values.iter().copied());
            Ok(out)
        }
        Format::Csv => {
            let mut s = String::from("t,omega,w\n");
            for (i, t) in map.time_axis.points().enumerate() {
                for (j, w) in map.freq_axis.points().enumerate() {
                    writeln!(s, "{t},{w},{}", map.get(i, j)).expect("write to string");
                }
            }
            Ok(s.into_bytes())
        }
        Format::Json => Ok(serde_json::to_vec(map)?),
    }
}

pub fn map_from_bytes(bytes: &[u8], format: Format) -> Result<WignerMap> {
    match format {
        Format::Bin => {
            let (head, payload) = split_header(bytes)?;
            let h: MapHeader = serde_json::from_slice(head)?;
            let values = read_f64s(payload, h.time_axis.len * h.freq_axis.len)?;
            Ok(WignerMap { time_axis: h.time_axis, freq_axis: h.freq_axis, values, imag_residue: h.imag_residue })
        }
        Format::Json => Ok(serde_json::from_slice(bytes)?),
        Format::Csv => Err(Error::Format("maps are read back from bin or json".into())),
    }
}

pub fn matrix_to_bytes(m: &OverlapMatrix, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut s = String::from("n,m,re,im,magnitude2,phase\n");
            for n in 0..m.n_max {
                for k in 0..m.n_max {
                    let z = m.get(n, k);
                    writeln!(s, "{n},{k},{},{},{},{}", z.re, z.im, z.norm_sqr(), z.arg()).expect("write to string");
                }
            }
            Ok(s.into_bytes())
        }
        Format::Json => Ok(serde_json::to_vec_pretty(m)?),
        Format::Bin => Err(Error::Format("matrices are written as csv or json".into())),
    }
}

/// JSON manifest written next to a shot bundle payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotManifest {
    pub shots: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub lo_phase_model: LoPhaseModel,
    pub acquisition: u64,
    pub lo_phases: Vec<f64>,
    pub payload: String,
}

/// Payload: an envelope-style header, then per shot `n` pairs
/// `(trace, reference_segment)`.
pub fn shots_to_payload(shots: &[HomodyneShot], tau_seconds: Option<f64>) -> Result<Vec<u8>> {
    let first = shots.first().ok_or_else(|| Error::InvalidParameter("no shots to write".into()))?;
    let g = first.grid;
    let mut out = header_line(&EnvelopeHeader { n: g.n, dt: g.dt, t_start: g.t_start, tau_seconds })?;
    for s in shots {
        push_f64s(&mut out, s.trace.iter().zip(&s.reference_segment).flat_map(|(a, b)| [*a, *b]));
    }
    Ok(out)
}

pub fn shots_from_payload(bytes: &[u8], lo_phases: &[f64]) -> Result<Vec<HomodyneShot>> {
    let (head, payload) = split_header(bytes)?;
    let header: EnvelopeHeader = serde_json::from_slice(head)?;
    let grid = header.grid()?;
    let values = read_f64s(payload, 2 * header.n * lo_phases.len())?;
    Ok(values
        .chunks_exact(2 * header.n)
        .zip(lo_phases)
        .map(|(block, &phase)| HomodyneShot {
            grid,
            trace: block.iter().step_by(2).copied().collect(),
            lo_phase_true: phase,
            reference_segment: block.iter().skip(1).step_by(2).copied().collect(),
        })
        .collect())
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn write_shot_bundle(
    stem: &Path,
    shots: &[HomodyneShot],
    cfg: &DetectionConfig,
    acquisition: u64,
) -> Result<(PathBuf, PathBuf)> {
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let manifest = ShotManifest {
        shots: shots.len(),
        seed: cfg.seed,
        noise_sigma: cfg.noise_sigma,
        lo_phase_model: cfg.lo_phase_model,
        acquisition,
        lo_phases: shots.iter().map(|s| s.lo_phase_true).collect(),
        payload: bin.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    write_atomic(&bin, &shots_to_payload(shots, None)?)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok((json, bin))
}

pub fn read_shot_bundle(manifest_path: &Path) -> Result<(ShotManifest, Vec<HomodyneShot>)> {
    let manifest: ShotManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let shots = shots_from_payload(&fs::read(dir.join(&manifest.payload))?, &manifest.lo_phases)?;
    if shots.len() != manifest.shots {
        return Err(Error::Format("manifest shot count does not match payload".into()));
    }
    Ok((manifest, shots))
}

/// Writes to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{transition_matrix, Pipeline};
    use crate::detection::simulate_acquisition;
    use crate::signal::{cat_state, make_grid};
    use crate::wigner::wigner;

    fn sample() -> SampledEnvelope {
        let g = make_grid(256, 0.07).unwrap();
        cat_state(&g, 1.3, 0.6).unwrap().scaled(Complex64::from_polar(1.0, 0.4))
    }

    #[test]
    fn envelope_round_trips_in_every_format() {
        let e = sample();
        for f in [Format::Bin, Format::Csv, Format::Json] {
            let bytes = envelope_to_bytes(&e, Some(4.2e-6), f).unwrap();
            let (back, tau) = envelope_from_bytes(&bytes, f).unwrap();
            assert_eq!(back.samples(), e.samples(), "{f:?}");
            assert!((back.grid().dt - e.grid().dt).abs() < 1e-15);
            assert_eq!(tau.is_some(), f != Format::Csv);
        }
    }

    #[test]
    fn binary_layout() {
        let e = sample();
        let bytes = envelope_to_bytes(&e, None, Format::Bin).unwrap();
        let (head, payload) = split_header(&bytes).unwrap();
        let v: serde_json::Value = serde_json::from_slice(head).unwrap();
        assert_eq!(v["n"], 256);
        assert_eq!(payload.len(), 256 * 16);
        assert_eq!(f64::from_le_bytes(payload[..8].try_into().unwrap()), e.samples()[0].re);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(envelope_from_bytes(b"no header", Format::Bin).is_err());
        assert!(envelope_from_bytes(b"{\"n\":4,\"dt\":0.1,\"t_start\":0}\n\x00", Format::Bin).is_err());
        assert!(envelope_from_bytes(b"t,re,im\n0,1,0\n0.1,1\n", Format::Csv).is_err());
        assert!(envelope_from_bytes(b"t,re,im\n0,1,0\n0.1,1,0\n0.5,0,0\n0.6,0,0\n", Format::Csv).is_err());
    }

    #[test]
    fn map_round_trip() {
        let m = wigner(&sample());
        for f in [Format::Bin, Format::Json] {
            assert_eq!(map_from_bytes(&map_to_bytes(&m, f).unwrap(), f).unwrap(), m);
        }
        let csv = String::from_utf8(map_to_bytes(&m, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 1 + 256 * 256);
    }

    #[test]
    fn matrix_csv_columns() {
        let g = make_grid(512, 0.05).unwrap();
        let m = transition_matrix(&g, 0.5, &Pipeline::Ideal, 3).unwrap();
        let csv = String::from_utf8(matrix_to_bytes(&m, Format::Csv).unwrap()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,m,re,im,magnitude2,phase");
        assert_eq!(lines.count(), 9);
        let back: OverlapMatrix = serde_json::from_slice(&matrix_to_bytes(&m, Format::Json).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn shot_bundle_round_trip_and_atomic_write() {
        let dir = std::env::temp_dir().join(format!("chronolens-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cfg = DetectionConfig::shot_noise_only(3, 5, 0.05);
        let shots = simulate_acquisition(&sample(), &cfg, 2).unwrap();
        let (json, _) = write_shot_bundle(&dir.join("run"), &shots, &cfg, 2).unwrap();
        let (manifest, back) = read_shot_bundle(&json).unwrap();
        assert_eq!(manifest.shots, 5);
        assert_eq!(manifest.seed, 3);
        assert_eq!(back, shots);
        let leftovers = fs::read_dir(&dir).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp-")
        });
        assert_eq!(leftovers.count(), 0);
        fs::remove_dir_all(&dir).unwrap();
    }
}
