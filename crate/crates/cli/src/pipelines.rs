use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use psipi::imaging::{
    add_shot_noise, coincidence_map, herzog_map, make_phase_object, CoincidenceMap, CorrelationModel, ModeGrid,
    PhaseField, PhaseObjectKind, PortPair,
};
use psipi::interferometer::{
    coincidence_rate, frame_noise_experiment, two_mode_psipi_rate, visibility, DetectorOp, FrameNoiseConfig,
    MIN_SCAN_POINTS,
};
use psipi::io::{read_grid, read_map, sidecar_path, write_grid, write_map};
use psipi::recover::{reconstruct as retrieve, report_for, RetrievalMethod, RANK2_TOLERANCE};
use psipi::spdc::{apply_path_identity, build_two_source_state, BuildOptions, PathIdentityMap, SourceSpec};

use crate::config::{CorrelationKind, ObjectKindSpec, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

fn fmt_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s.push('\n');
    s
}

pub fn two_mode(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let p = &cfg.phases;
    let g = Complex64::new(cfg.gain, 0.0);
    let opts = BuildOptions::with_statistics(cfg.statistics.into());
    let full = build_two_source_state(&SourceSpec::two_mode(1, g)?, &SourceSpec::two_mode(2, g)?, opts)?;
    let (h, gd) = (DetectorOp::h(p.phi_s), DetectorOp::g(p.phi_s_prime));
    let mut csv = String::from("delta_gamma,rate_closed_form,rate_fock\n");
    let mut fock_rates = Vec::with_capacity(p.scan_points);
    let mut worst: f64 = 0.0;
    for j in 0..p.scan_points {
        let gamma_i = p.gamma_i + TAU * j as f64 / p.scan_points as f64;
        let state = apply_path_identity(&full, &PathIdentityMap::two_mode(gamma_i, p.gamma_i_prime))?;
        let fock = coincidence_rate(&state, &h, &gd)?.normalized();
        let closed = two_mode_psipi_rate(p.phi_s, p.phi_s_prime, gamma_i, p.gamma_i_prime);
        worst = worst.max((fock - closed).abs());
        fock_rates.push(fock);
        csv.push_str(&fmt_row(&[gamma_i - p.gamma_i_prime, closed, fock]));
    }
    out.write_text("two_mode.csv", &csv)?;
    let lo = fock_rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fock_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "two-mode: {} points, rate in [{lo:.6}, {hi:.6}], visibility {:.6}, max |fock - closed form| {worst:.2e}",
        p.scan_points,
        visibility(&fock_rates)
    );
    Ok(())
}

fn object(cfg: &RunConfig) -> Result<PhaseField<f64>, CliError> {
    let grid = match cfg.grid_shape() {
        (nx, None) => ModeGrid::one_d(nx)?,
        (nx, Some(ny)) => ModeGrid::two_d(nx, ny)?,
    };
    let kind = match cfg.object.kind {
        ObjectKindSpec::Quadratic1d => PhaseObjectKind::Quadratic1d,
        ObjectKindSpec::Cubic2d => PhaseObjectKind::Cubic2d,
        ObjectKindSpec::LinearRamp => PhaseObjectKind::LinearRamp,
        ObjectKindSpec::File => PhaseObjectKind::FromFile(cfg.object.path.clone().unwrap_or_default()),
    };
    Ok(make_phase_object(&kind, cfg.object.scale, &grid)?)
}

fn correlation(cfg: &RunConfig) -> CorrelationModel<f64> {
    match cfg.correlation.model {
        CorrelationKind::Delta => CorrelationModel::Delta,
        CorrelationKind::Gaussian => CorrelationModel::Gaussian { sigma: cfg.correlation.sigma },
    }
}

fn write_imaging(cfg: &RunConfig, out: &mut OutputDir, obj: &PhaseField<f64>, map: CoincidenceMap<f64>) -> Result<(), CliError> {
    let map = match cfg.noise.total_counts {
        Some(n) => add_shot_noise(&map, n, cfg.seed)?,
        None => map,
    };
    write_grid(out.file("object.grid"), obj)?;
    let csv = out.file("map.csv");
    out.file("map.json");
    write_map(&csv, &map)?;
    let (lo, hi) = map.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    println!(
        "{}: {} pixels, {} correlation, ports {:?}, map in [{lo:.6}, {hi:.6}]{}",
        cfg.experiment.map(|e| e.to_string()).unwrap_or_default(),
        obj.len(),
        map.meta.correlation,
        map.meta.ports,
        cfg.noise.total_counts.map(|n| format!(", {n} counts")).unwrap_or_default()
    );
    Ok(())
}

pub fn multimode(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let obj = object(cfg)?;
    let map = coincidence_map(&obj, &correlation(cfg), cfg.ports)?;
    write_imaging(cfg, out, &obj, map)
}

pub fn herzog(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    if cfg.ports != PortPair::BB {
        return Err(CliError::config("the single-crystal map is only defined for ports \"bb\""));
    }
    let obj = object(cfg)?;
    let map = herzog_map(&obj, &correlation(cfg))?;
    write_imaging(cfg, out, &obj, map)
}

pub fn noise_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let amplitudes = cfg.noise.amplitude_list();
    let scan_points = cfg.phases.scan_points.max(MIN_SCAN_POINTS);
    let outcomes = amplitudes
        .par_iter()
        .map(|a| {
            let mut fc = FrameNoiseConfig::new(*a, cfg.noise.frames, cfg.seed);
            fc.law = cfg.noise.law;
            fc.scan_points = scan_points;
            fc.subtract_background = cfg.noise.subtract_background;
            frame_noise_experiment(&fc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = String::from("amplitude,visibility_psipi,visibility_standard\n");
    let mut fringes = String::from("amplitude,phase,rate_psipi,rate_standard\n");
    for (a, o) in amplitudes.iter().zip(&outcomes) {
        summary.push_str(&fmt_row(&[*a, o.visibility_psipi, o.visibility_standard]));
        for (j, (x, y)) in o.psipi_fringe.iter().zip(&o.standard_fringe).enumerate() {
            fringes.push_str(&fmt_row(&[*a, TAU * j as f64 / scan_points as f64, *x, *y]));
        }
        println!("A = {a:.4}: V_psipi = {:.4}, V_standard = {:.4}", o.visibility_psipi, o.visibility_standard);
    }
    out.write_text("noise_sweep.csv", &summary)?;
    out.write_text("noise_fringes.csv", &fringes)?;
    Ok(())
}

#[derive(Serialize)]
struct RetrievalSummary {
    map: PathBuf,
    truth: Option<PathBuf>,
    pixels: usize,
    herzog: bool,
    method: RetrievalMethod,
    iterations: usize,
    rank_ratio: Option<f64>,
    rank_warning: bool,
    min_quality: f64,
}

pub fn reconstruct(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map_path = cfg.reconstruct.map.clone().ok_or_else(|| CliError::config("no map given"))?;
    if !sidecar_path(&map_path).exists() {
        return Err(CliError::config(format!("map metadata {} not found", sidecar_path(&map_path).display())));
    }
    let map = read_map::<f64>(&map_path)?;
    let truth_path = cfg.reconstruct.truth.clone().or_else(|| {
        let sibling = map_path.parent().unwrap_or(std::path::Path::new(".")).join("object.grid");
        sibling.exists().then_some(sibling)
    });
    if let Some(r) = cfg.reconstruct.reference {
        if r >= map.n_pixels() {
            return Err(CliError::config(format!("reference pixel {r} outside a {}-pixel grid", map.n_pixels())));
        }
    }
    let rec = retrieve(&map, cfg.reconstruct.reference)?;
    write_grid(out.file("wrapped.grid"), &rec.wrapped.field)?;
    write_grid(out.file("reconstruction.grid"), &rec.unwrapped)?;
    let rank_ratio = rec.wrapped.rank_ratio;
    let summary = RetrievalSummary {
        map: map_path.clone(),
        truth: truth_path.clone(),
        pixels: map.n_pixels(),
        herzog: map.meta.herzog,
        method: rec.wrapped.method,
        iterations: rec.wrapped.iterations,
        rank_ratio,
        rank_warning: rank_ratio.is_some_and(|r| r > RANK2_TOLERANCE),
        min_quality: rec.wrapped.quality.iter().copied().fold(f64::INFINITY, f64::min),
    };
    psipi::io::write_json(out.file("retrieval.json"), &summary)?;
    match truth_path {
        Some(t) => {
            let truth = read_grid::<f64>(&t)?;
            let report = report_for(&rec, &truth)?;
            psipi::io::write_json(out.file("report.json"), &report)?;
            println!(
                "reconstruct: {} pixels, rms error {:.3e} rad after alignment (offset {:.4}, sign flipped: {})",
                report.pixels_processed, report.rms_error, report.offset_applied, report.sign_flipped
            );
        }
        None => println!("reconstruct: {} pixels, no ground truth to compare against", map.n_pixels()),
    }
    Ok(())
}
