//! Acceptance criteria. Each test prints one PASS/FAIL line.

use std::f64::consts::PI;
use std::time::Instant;

use chronolens::analysis::{fit_angle, transition_matrix, Pipeline};
use chronolens::frft::{frft_direct_kernel, frft_lens_sequence};
use chronolens::memory::{bandwidth_after_lens, storage_efficiency, DecayModel, MemoryParams};
use chronolens::reproduce::{
    efficiency_report, fig4, loglog_slope, shot_convergence, table1, ReproduceConfig, MAP_HALF_EXTENT,
};
use chronolens::signal::{
    cat_state, hermite_gauss, make_grid, overlap, phase_aligned_distance, to_spectrum, SampledEnvelope, TimeGrid,
};
use chronolens::wigner::{map_distance, rotate_map, wigner, wigner_window, WignerWindow};
use num_complex::Complex64;

const ANGLES: [f64; 5] = [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0];

fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn report(id: &str, name: &str, ok: bool, detail: String) {
    emit(&format!("{} [{id}] {name}: {detail}", if ok { "PASS" } else { "FAIL" }));
    assert!(ok, "[{id}] {name}: {detail}");
}

fn two_pulse_cat(g: &TimeGrid) -> SampledEnvelope {
    cat_state(g, 7.0 / 4.2, 2.4 / 4.2).unwrap()
}

#[test]
fn c1_eigenphase_law() {
    let start = Instant::now();
    let g = TimeGrid::reference();
    let mut worst_mag = f64::INFINITY;
    let mut worst_slope = 0.0f64;
    for &phi in &ANGLES {
        let m = transition_matrix(&g, phi, &Pipeline::Ideal, 11).unwrap();
        for z in m.diagonal() {
            worst_mag = worst_mag.min(z.norm());
        }
        let fit = fit_angle(&m.diag_phases()).unwrap();
        worst_slope = worst_slope.max((fit.measured_angle() - phi).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "1",
        "eigenphase law",
        worst_mag >= 0.999 && worst_slope <= 1e-4 && secs <= 60.0,
        format!("min |F_nn| = {worst_mag:.9}, max slope error = {worst_slope:.2e} rad, {secs:.2} s"),
    );
}

#[test]
fn c2_oracle_equivalence() {
    let g = TimeGrid::reference();
    let mut inputs: Vec<SampledEnvelope> = (0..=10).map(|n| hermite_gauss(n, &g, 0.0, 1.0).unwrap()).collect();
    inputs.push(two_pulse_cat(&g));
    let mut worst = 0.0f64;
    for e in &inputs {
        for &phi in &ANGLES {
            let d = phase_aligned_distance(&frft_direct_kernel(e, phi).unwrap(), &frft_lens_sequence(e, phi).unwrap())
                .unwrap();
            worst = worst.max(d);
        }
    }
    report("2", "lens sequence vs direct kernel", worst <= 1e-6, format!("max L2 = {worst:.3e}"));
}

#[test]
fn c3_rotation_covariance() {
    let g = TimeGrid::reference();
    let cat = two_pulse_cat(&g);
    let win = WignerWindow::square(MAP_HALF_EXTENT);
    let base = wigner_window(&cat, &win).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for phi in [0.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let direct = wigner_window(&frft_lens_sequence(&cat, phi).unwrap(), &win).unwrap();
        let d = map_distance(&direct, &rotate_map(&base, phi).unwrap()).unwrap();
        parts.push(format!("{d:.2e}"));
        worst = worst.max(d);
    }
    report("3", "Wigner rotation covariance", worst <= 2e-3, format!("L2 per angle [{}]", parts.join(", ")));
}

#[test]
fn c4_table1() {
    let cfg = ReproduceConfig::new(7);
    let start = Instant::now();
    let t = table1(&cfg).unwrap();
    println!("{}", t.render());
    let ideal_err = t.rows.iter().map(|r| (r.ideal_measured() - r.set).abs()).fold(0.0, f64::max);
    report("4a", "ideal pipeline recovers set angles", ideal_err <= 1e-6, format!("max |measured - set| = {ideal_err:.2e}"));
    let worst_frac = t.rows.iter().map(|r| r.within_bound()).fold(1.0, f64::min);
    report(
        "4b",
        "noisy pipeline within 0.033π",
        worst_frac >= 0.95,
        format!(
            "min fraction within bound = {:.0}% over {} repetitions per angle ({:.1} s)",
            100.0 * worst_frac,
            t.repetitions,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c5_bandwidth_and_efficiency() {
    let tb = bandwidth_after_lens(110.0, PI / 2.0).unwrap().tb_prime;
    report("5a", "TB'(110, π/2)", tb == 220.0, format!("{tb}"));
    let p = MemoryParams::reference();
    let eta = storage_efficiency(&p, 110.0);
    let expect = 1.0 - (-2.0 * PI * 85.0 / 110.0f64).exp();
    report("5b", "η(OD=85, TB'=110)", (eta - expect).abs() <= 1e-12, format!("{eta:.15}"));
    let composed = MemoryParams { decay_model: DecayModel::FormulaTimesExpDecay, ..p.clone() };
    emit(&format!(
        "INFO [5c] composed-decay efficiency at TB'=110: {:.4} (target 0.33)",
        storage_efficiency(&composed, 110.0)
    ));
    print!("{}", efficiency_report(&p).unwrap().render());
}

#[test]
fn c6_detection() {
    let g = TimeGrid::reference();
    let e = hermite_gauss(5, &g, 0.0, 1.0).unwrap();
    let pts = shot_convergence(&e, 11, 0.05, &[10, 40, 160, 640], 4).unwrap();
    let slope = loglog_slope(&pts);
    let detail: Vec<String> = pts.iter().map(|(n, err)| format!("{n}:{err:.3e}")).collect();
    report(
        "6a",
        "recovery error vs shots",
        (slope + 0.5).abs() <= 0.05,
        format!("slope {slope:.4} [{}]", detail.join(" ")),
    );
    let f4 = fig4(&ReproduceConfig::new(7), 20).unwrap();
    let s = f4.scatter();
    report("6b", "calibrated phase scatter", (0.1..=0.3).contains(&s), format!("{s:.4} rad"));
}

#[test]
fn c7_property_suite() {
    let g = TimeGrid::reference();
    let cat = two_pulse_cat(&g);
    let mut unit = 0.0f64;
    let mut inverse = 0.0f64;
    let mut additive = 0.0f64;
    for &phi in &ANGLES {
        let out = frft_lens_sequence(&cat, phi).unwrap();
        unit = unit.max((out.norm_sqr() / cat.norm_sqr() - 1.0).abs());
        inverse = inverse.max(phase_aligned_distance(&cat, &frft_lens_sequence(&out, -phi).unwrap()).unwrap());
        for &b in &[PI / 6.0, -PI / 4.0] {
            let twice = frft_lens_sequence(&out, b).unwrap();
            additive = additive.max(phase_aligned_distance(&frft_lens_sequence(&cat, phi + b).unwrap(), &twice).unwrap());
        }
    }
    report("7a", "unitarity", unit <= 1e-9, format!("{unit:.2e}"));
    report("7b", "additivity", additive <= 1e-6, format!("{additive:.2e}"));
    report("7c", "inverse transform", inverse <= 1e-9, format!("{inverse:.2e}"));

    let small = make_grid(1024, 0.03).unwrap();
    let e = frft_lens_sequence(&cat_state(&small, 1.5, 0.6).unwrap(), 0.5).unwrap();
    let w = wigner(&e);
    let tm = w.time_marginal();
    let marg = tm.iter().zip(e.samples()).map(|(m, z)| (m - z.norm_sqr()).abs()).fold(0.0, f64::max);
    let spec = to_spectrum(&e);
    let fm = w.freq_marginal();
    let fmarg = spec
        .samples()
        .iter()
        .enumerate()
        .filter_map(|(j, z)| {
            let col = ((spec.grid().omega(j) - w.freq_axis.start) / w.freq_axis.step).round() as usize;
            (col < fm.len()).then(|| (fm[col] - z.norm_sqr()).abs())
        })
        .fold(0.0, f64::max);
    report("7d", "Wigner marginals", marg.max(fmarg) <= 1e-6, format!("time {marg:.2e}, frequency {fmarg:.2e}"));
    report("7e", "Wigner realness", w.imag_residue <= 1e-10, format!("{:.2e}", w.imag_residue));

    let modes: Vec<_> = (0..=10).map(|n| hermite_gauss(n, &g, 0.0, 1.0).unwrap()).collect();
    let mut ortho = 0.0f64;
    for (i, a) in modes.iter().enumerate() {
        for (j, b) in modes.iter().enumerate() {
            let expect = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            ortho = ortho.max((overlap(a, b).unwrap() - expect).norm());
        }
    }
    report("7f", "Hermite orthonormality", ortho <= 1e-8, format!("{ortho:.2e}"));
}
