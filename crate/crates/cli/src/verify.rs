//! Oracle suite: every closed form against a brute-force evaluation.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use psipi::fock::{Statistics, TaggedState};
use psipi::imaging::{
    coincidence_map, factorized_sums, make_phase_object, perfect_correlation_map, CorrelationModel, ModeGrid,
    PhaseObjectKind, PortPair,
};
use psipi::interferometer::{
    coincidence_rate, coincidence_rate_mc, density_matrix_rate, emission_branches, standard_two_photon_rate,
    standard_two_photon_state, two_mode_psipi_rate, DetectorOp,
};
use psipi::oracles::{coincidence_map_direct, fock_multimode_rate};
use psipi::recover::{reconstruct, report_for};
use psipi::rng::stream_rng;
use psipi::spdc::{apply_path_identity, build_two_source_state, BuildOptions, PathIdentityMap, SourceSpec};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, deviation: f64, tolerance: f64) -> Check {
    Check { name, deviation, tolerance, pass: deviation < tolerance }
}

fn full_state(stat: Statistics, gain: f64) -> Result<TaggedState<f64>, CliError> {
    let g = Complex64::new(gain, 0.0);
    Ok(build_two_source_state(&SourceSpec::two_mode(1, g)?, &SourceSpec::two_mode(2, g)?, BuildOptions::with_statistics(stat))?)
}

fn hg_rate(state: &TaggedState<f64>, a: f64, b: f64) -> Result<f64, CliError> {
    Ok(coincidence_rate(state, &DetectorOp::h(a), &DetectorOp::g(b))?.normalized())
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let seed = cfg.seed;
    let mut checks = Vec::new();

    for (stream, stat, name) in [
        (100, Statistics::Boson, "two-mode rate, boson Fock vs closed form"),
        (101, Statistics::Fermion, "two-mode rate, fermion Fock vs closed form"),
    ] {
        let mut rng = stream_rng(seed, stream);
        let full = full_state(stat, cfg.gain)?;
        let mut worst: f64 = 0.0;
        for _ in 0..64 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-PI..PI)).collect();
            let state = apply_path_identity(&full, &PathIdentityMap::two_mode(v[2], v[3]))?;
            worst = worst.max((hg_rate(&state, v[0], v[1])? - two_mode_psipi_rate(v[0], v[1], v[2], v[3])).abs());
        }
        checks.push(check(name, worst, 1e-12));
    }

    let full = full_state(Statistics::Boson, cfg.gain)?;
    let scan = (0..64).map(|j| hg_rate(&full, 0.3, 0.3 + TAU * j as f64 / 64.0)).collect::<Result<Vec<_>, _>>()?;
    let spread = scan.iter().copied().fold(f64::MIN, f64::max) - scan.iter().copied().fold(f64::MAX, f64::min);
    checks.push(check("no path identity, fringe spread", spread, 1e-12));

    let mut rng = stream_rng(seed, 102);
    let standard = standard_two_photon_state::<f64>(Statistics::Boson)?;
    let mut worst: f64 = 0.0;
    for _ in 0..64 {
        let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        worst = worst.max((hg_rate(&standard, a, b)? - standard_two_photon_rate(a, b)).abs());
    }
    checks.push(check("standard interferometer, Fock vs closed form", worst, 1e-12));

    let mut rng = stream_rng(seed, 103);
    let (mut dm_worst, mut mc_worst): (f64, f64) = (0.0, 0.0);
    for i in 0..20u64 {
        let stat = if i % 2 == 0 { Statistics::Boson } else { Statistics::Fermion };
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-PI..PI)).collect();
        let state = apply_path_identity(&full_state(stat, cfg.gain)?, &PathIdentityMap::two_mode(v[2], v[3]))?;
        let a = if rng.random::<bool>() { DetectorOp::h(v[0]) } else { DetectorOp::h_prime(v[0]) };
        let b = if rng.random::<bool>() { DetectorOp::g(v[1]) } else { DetectorOp::g_prime(v[1]) };
        let tagged = coincidence_rate(&state, &a, &b)?;
        let mixed = density_matrix_rate(&emission_branches(&state), &a, &b)?;
        dm_worst = dm_worst.max((tagged.normalized() - mixed.normalized()).abs());
        if i < 4 {
            let mc = coincidence_rate_mc(&state, &a, &b, 20_000, seed.wrapping_add(i))?;
            mc_worst = mc_worst.max((mc.rate - tagged.rate).abs() / mc.stderr);
        }
    }
    checks.push(check("density matrix vs tagged averaging", dm_worst, 1e-12));
    checks.push(check("pump-phase Monte Carlo vs tagged (stderr)", mc_worst, 4.0));

    let grid4 = ModeGrid::one_d(4)?;
    let ramp = make_phase_object::<f64>(&PhaseObjectKind::LinearRamp, Some(0.7), &grid4)?;
    let table = CorrelationModel::Gaussian { sigma: 1.0 }.table(&grid4)?;
    let mut worst: f64 = 0.0;
    for ports in [PortPair::BB, PortPair::BBPrime] {
        for (s, t) in [(0, 1), (1, 3), (2, 2)] {
            let (raw, _) = factorized_sums(&table, &ramp.values, s, t).raw(ports);
            let fock = fock_multimode_rate(&table, &ramp.values, s, t, ports, Statistics::Boson)?;
            worst = worst.max((fock - raw).abs() / raw.abs().max(1.0));
        }
    }
    checks.push(check("multimode Fock vs pair sums", worst, 1e-12));

    let grid12 = ModeGrid::one_d(12)?;
    let obj12 = make_phase_object::<f64>(&PhaseObjectKind::Quadratic1d, None, &grid12)?;
    let gauss = CorrelationModel::Gaussian { sigma: 1.5 };
    let mut worst: f64 = 0.0;
    for ports in [PortPair::BB, PortPair::BPrimeBPrime, PortPair::BBPrime] {
        let fast = coincidence_map(&obj12, &gauss, ports)?;
        let direct = coincidence_map_direct(&obj12, &gauss, ports)?;
        worst = worst.max(max_abs(fast.values(), direct.values()));
    }
    checks.push(check("gaussian map vs direct sum", worst, 1e-10));

    let obj64 = make_phase_object::<f64>(&PhaseObjectKind::Quadratic1d, None, &ModeGrid::one_d(64)?)?;
    let delta = coincidence_map(&obj64, &CorrelationModel::Delta, PortPair::BB)?;
    let closed = perfect_correlation_map(&obj64);
    checks.push(check("delta map vs closed form", max_abs(delta.values(), closed.values()), 1e-12));

    let rec = reconstruct(&closed, None)?;
    checks.push(check("reconstruction rms, quadratic 1D", report_for(&rec, &obj64)?.rms_error, 1e-6));

    Ok(checks)
}

pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>10}  {:>10}  result\n", "check", "deviation", "tolerance");
    for c in checks {
        s.push_str(&format!(
            "{:<width$}  {:>10.2e}  {:>10.0e}  {}\n",
            c.name,
            c.deviation,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    s
}
