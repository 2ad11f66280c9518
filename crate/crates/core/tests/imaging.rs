use std::f64::consts::PI;

use psipi::imaging::{
    add_shot_noise, coincidence_map, factorized_sums, herzog_map, make_phase_object, perfect_correlation_map,
    CorrelationModel, ModeGrid, PhaseField, PhaseObjectKind, PortPair,
};
use psipi::io::{read_map, write_grid, write_map};
use psipi::oracles::fock_multimode_rate;
use psipi::Statistics;

fn quadratic(n: usize) -> PhaseField<f64> {
    make_phase_object(&PhaseObjectKind::Quadratic1d, None, &ModeGrid::one_d(n).unwrap()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn default_objects_span_six_pi() {
    for (kind, grid) in [
        (PhaseObjectKind::Quadratic1d, ModeGrid::one_d(64).unwrap()),
        (PhaseObjectKind::Cubic2d, ModeGrid::two_d(32, 32).unwrap()),
    ] {
        let obj = make_phase_object::<f64>(&kind, None, &grid).unwrap();
        let hi = obj.values.iter().copied().fold(f64::MIN, f64::max);
        let lo = obj.values.iter().copied().fold(f64::MAX, f64::min);
        assert!((hi - lo - 6.0 * PI).abs() < 1e-12);
    }
    assert!(make_phase_object::<f64>(&PhaseObjectKind::Cubic2d, None, &ModeGrid::one_d(8).unwrap()).is_err());
}

#[test]
fn same_and_split_ports_are_complementary() {
    let obj = quadratic(24);
    let bb = perfect_correlation_map(&obj);
    let split = coincidence_map(&obj, &CorrelationModel::Delta, PortPair::BBPrime).unwrap();
    for p in 0..24 {
        for q in 0..24 {
            if p != q {
                assert!((bb.get(p, q) + split.get(p, q) - 2.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn primed_ports_match_unprimed() {
    let obj = quadratic(12);
    let corr = CorrelationModel::Gaussian { sigma: 1.2 };
    let a = coincidence_map(&obj, &corr, PortPair::BB).unwrap();
    let b = coincidence_map(&obj, &corr, PortPair::BPrimeBPrime).unwrap();
    assert!(max_diff(a.values(), b.values()) < 1e-12);
}

#[test]
fn maps_ignore_a_global_phase_offset() {
    let obj = quadratic(16);
    for corr in [CorrelationModel::Delta, CorrelationModel::Gaussian { sigma: 0.9 }] {
        for ports in [PortPair::BB, PortPair::BBPrime] {
            let a = coincidence_map(&obj, &corr, ports).unwrap();
            let b = coincidence_map(&obj.offset(2.3), &corr, ports).unwrap();
            assert!(max_diff(a.values(), b.values()) < 1e-12);
        }
    }
}

#[test]
fn narrow_gaussian_approaches_delta() {
    let obj = quadratic(16);
    let delta = perfect_correlation_map(&obj);
    let mut last = f64::INFINITY;
    for sigma in [0.8, 0.5, 0.3, 0.2] {
        let m = coincidence_map(&obj, &CorrelationModel::Gaussian { sigma }, PortPair::BB).unwrap();
        let off: f64 = (0..16)
            .flat_map(|p| (0..16).filter(move |q| *q != p).map(move |q| (p, q)))
            .map(|(p, q)| (m.get(p, q) - delta.get(p, q)).abs())
            .fold(0.0, f64::max);
        assert!(off < last, "sigma {sigma}: {off} !< {last}");
        last = off;
    }
    assert!(last < 1e-6);
}

#[test]
fn fock_engine_agrees_with_factorized_sums() {
    let grid = ModeGrid::one_d(4).unwrap();
    let obj = make_phase_object::<f64>(&PhaseObjectKind::LinearRamp, Some(0.9), &grid).unwrap();
    let table = CorrelationModel::Gaussian { sigma: 1.0 }.table(&grid).unwrap();
    for ports in [PortPair::BB, PortPair::BPrimeBPrime, PortPair::BBPrime] {
        for (s, t) in [(0, 1), (0, 3), (2, 2)] {
            let sums = factorized_sums(&table, &obj.values, s, t);
            let (raw, _) = sums.raw(ports);
            let fock = fock_multimode_rate(&table, &obj.values, s, t, ports, Statistics::Boson).unwrap();
            assert!((fock - raw).abs() < 1e-12 * raw.max(1.0), "{ports:?} ({s},{t}): {fock} vs {raw}");
        }
    }
}

#[test]
fn herzog_map_is_the_map_of_the_doubled_object() {
    let obj = quadratic(20);
    let h = herzog_map(&obj, &CorrelationModel::Delta).unwrap();
    let d = perfect_correlation_map(&obj.scaled(2.0));
    assert!(max_diff(h.values(), d.values()) < 1e-12);
    assert!(h.meta.herzog);
}

#[test]
fn shot_noise_converges_at_high_counts() {
    let obj = quadratic(16);
    let clean = perfect_correlation_map(&obj);
    let noisy = add_shot_noise(&clean, 1_000_000_000, 4).unwrap();
    let n = 16 * 16;
    let rms = (clean.values().iter().zip(noisy.values()).map(|(a, b)| ((a - b) / a).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!(rms < 1e-3, "{rms}");
    assert_eq!(noisy.meta.total_counts, Some(1_000_000_000));
    for p in 0..16 {
        for q in 0..16 {
            assert_eq!(noisy.get(p, q), noisy.get(q, p));
        }
    }
}

#[test]
fn shot_noise_is_seeded() {
    let clean = perfect_correlation_map(&quadratic(8));
    let a = add_shot_noise(&clean, 10_000, 11).unwrap();
    let b = add_shot_noise(&clean, 10_000, 11).unwrap();
    let c = add_shot_noise(&clean, 10_000, 12).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
    assert!(add_shot_noise(&clean, 0, 1).is_err());
}

#[test]
fn large_grids_need_delta_correlation() {
    let obj = quadratic(80);
    assert!(coincidence_map(&obj, &CorrelationModel::Gaussian { sigma: 1.0 }, PortPair::BB).is_err());
    assert!(coincidence_map(&obj, &CorrelationModel::Delta, PortPair::BB).is_ok());
}

#[test]
fn object_and_map_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let obj = make_phase_object::<f64>(&PhaseObjectKind::Cubic2d, None, &ModeGrid::two_d(6, 5).unwrap()).unwrap();
    let path = dir.path().join("object.grid");
    write_grid(&path, &obj).unwrap();
    let back = make_phase_object::<f64>(&PhaseObjectKind::FromFile(path), None, &ModeGrid::one_d(2).unwrap()).unwrap();
    assert_eq!(back, obj);

    let map = coincidence_map(&obj, &CorrelationModel::Delta, PortPair::BBPrime).unwrap();
    let csv = dir.path().join("map.csv");
    write_map(&csv, &map).unwrap();
    let again = read_map::<f64>(&csv).unwrap();
    assert_eq!(again, map);
}

#[test]
fn single_precision_follows_double() {
    let obj64 = quadratic(32);
    let obj32 = PhaseField::new(obj64.grid, obj64.values.iter().map(|v| *v as f32).collect()).unwrap();
    let a = perfect_correlation_map(&obj64);
    let b = perfect_correlation_map(&obj32);
    let d = a.values().iter().zip(b.values()).map(|(x, y)| (x - *y as f64).abs()).fold(0.0, f64::max);
    assert!(d < 1e-5);
}
