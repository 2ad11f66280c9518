use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psipi::fock::{averaged_pairing, ModeId, OccupationKet, Statistics, TaggedState};
use psipi::interferometer::{
    coincidence_rate, coincidence_rate_mc, density_matrix_rate, emission_branches, frame_noise_experiment,
    psipi_state, two_mode_psipi_rate, DetectorOp, FrameNoiseConfig, RunningStats,
};
use psipi::spdc::{
    apply_path_identity, build_two_source_state, c4_from_c2, filter_detectable, paths::*, two_mode_contributing_state,
    BuildOptions, PathIdentityMap, SourceSpec,
};

fn full_state(stat: Statistics, g: f64) -> TaggedState<f64> {
    let g = Complex64::new(g, 0.0);
    let s1 = SourceSpec::two_mode(1, g).unwrap();
    let s2 = SourceSpec::two_mode(2, g).unwrap();
    build_two_source_state(&s1, &s2, BuildOptions::with_statistics(stat)).unwrap()
}

fn hg() -> (DetectorOp<f64>, DetectorOp<f64>) {
    (DetectorOp::h(0.0), DetectorOp::g(0.0))
}

#[test]
fn filtering_does_not_change_the_rate() {
    let pi = PathIdentityMap::two_mode(0.4, -1.3);
    let full = apply_path_identity(&full_state(Statistics::Boson, 0.1), &pi).unwrap();
    let (h, g) = (DetectorOp::h(0.9), DetectorOp::g(0.2));
    let filtered = filter_detectable(&full, &h.mode_pairs(&g));
    let a = coincidence_rate(&full, &h, &g).unwrap().rate;
    let b = coincidence_rate(&filtered, &h, &g).unwrap().rate;
    assert!((a - b).abs() < 1e-12 * a);
}

#[test]
fn doubly_occupied_terms_never_fire_hg() {
    let full = full_state(Statistics::Boson, 0.1);
    let doubles = full.retain(|k, _| k.iter().any(|(_, n)| n == 2));
    assert_eq!(doubles.len(), 4);
    let (h, g) = hg();
    assert!(coincidence_rate(&doubles, &h, &g).unwrap().rate.abs() < 1e-30);
}

#[test]
fn four_photon_coefficients_follow_c4() {
    let g = 0.1;
    let full = full_state(Statistics::Boson, g);
    let c2 = full.amplitude(&OccupationKet::from_modes([S_U, I_U]), 0);
    assert!((c2.re - g).abs() < 1e-15);
    let distinct = full.amplitude(&OccupationKet::from_modes([S_U, I_U, S_V, I_V]), 0);
    assert!((distinct - (c4_from_c2(c2, c2) * 2.0)).norm() < 1e-14);
    let same = full.amplitude(&OccupationKet::from_counts([(S_U, 2), (I_U, 2)]), 0);
    // two bosonic √2 factors
    assert!((same - c4_from_c2(c2, c2) * 2.0).norm() < 1e-14);
}

#[test]
fn pump_exponent_counts_source_two_emissions() {
    let full = full_state(Statistics::Boson, 0.1);
    let pi = apply_path_identity(&full, &PathIdentityMap::two_mode(0.3, 0.8)).unwrap();
    for state in [&full, &pi] {
        for (ket, amp) in state.terms() {
            let from_two = if state.is_path_identified() {
                ket.count(&S_C) + ket.count(&S_D)
            } else {
                ket.count(&I_C) + ket.count(&I_D)
            };
            assert_eq!(amp.pump_exponent as u32, from_two, "{ket}");
        }
    }
}

#[test]
fn path_identity_only_rephases_non_colliding_terms() {
    let full = full_state(Statistics::Boson, 0.1);
    let pi = apply_path_identity(&full, &PathIdentityMap::two_mode(1.1, -0.4)).unwrap();
    let mut checked = 0;
    for (ket, amp) in full.terms() {
        let collides = (ket.count(&I_U) > 0 && ket.count(&I_C) > 0) || (ket.count(&I_V) > 0 && ket.count(&I_D) > 0);
        if collides {
            continue;
        }
        let mapped = OccupationKet::from_counts(ket.iter().map(|(m, n)| {
            let to = if *m == I_C { I_U } else if *m == I_D { I_V } else { *m };
            (to, n)
        }));
        let after = pi.amplitude(&mapped, amp.pump_exponent);
        assert!((after.norm() - amp.value.norm()).abs() < 1e-15, "{ket}");
        checked += 1;
    }
    assert_eq!(checked, 13);
}

#[test]
fn swap_symmetry_of_sources() {
    let psi = apply_path_identity(&full_state(Statistics::Boson, 0.1), &PathIdentityMap::two_mode(0.0, 0.0)).unwrap();
    let swap = |m: &ModeId| match *m {
        x if x == S_U => S_C,
        x if x == S_C => S_U,
        x if x == S_V => S_D,
        x if x == S_D => S_V,
        x => x,
    };
    for (ket, amp) in psi.terms() {
        let mapped = OccupationKet::from_counts(ket.iter().map(|(m, n)| (swap(m), n)));
        let other = psi.amplitude(&mapped, ket.total() as i32 / 2 - amp.pump_exponent);
        assert!((other - amp.value).norm() < 1e-15, "{ket}");
    }
}

#[test]
fn averaged_pairing_matches_pump_phase_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let modes = [S_U, S_V, S_C, I_U];
    let mut random_state = || {
        let mut s = TaggedState::zero(Statistics::Boson);
        for m in 0..3 {
            for _ in 0..2 {
                let k = OccupationKet::from_modes([modes[rng.random_range(0..4)], modes[rng.random_range(0..4)]]);
                let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let prev = s.amplitude(&k, m);
                let _ = s.add_term(k, m, prev + a);
            }
        }
        s
    };
    let (a, b) = (random_state(), random_state());
    let exact = averaged_pairing(&a, &b).unwrap();
    let (mut re, mut im) = (RunningStats::default(), RunningStats::default());
    for _ in 0..100_000 {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let v = averaged_pairing(&a.at_pump_phase(theta), &b.at_pump_phase(theta)).unwrap();
        re.push(v.re);
        im.push(v.im);
    }
    assert!((re.mean() - exact.re).abs() < 3.0 * re.stderr().max(1e-15));
    assert!((im.mean() - exact.im).abs() < 3.0 * im.stderr().max(1e-15));
}

#[test]
fn monte_carlo_reproduces_one_and_a_half() {
    let psi = psipi_state::<f64>(Statistics::Boson, 0.0, 0.0).unwrap();
    let (h, g) = hg();
    let r = coincidence_rate_mc(&psi, &h, &g, 100_000, 3).unwrap();
    assert!((r.normalized() - 1.5).abs() < 3.0 * r.normalized_stderr());
    assert!(r.stderr > 0.0);
}

#[test]
fn output_pair_sum_is_phase_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut totals = Vec::new();
    for _ in 0..20 {
        let (a, b, c, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let psi = psipi_state(Statistics::Boson, 6.0 * c, 6.0 * d).unwrap();
        let (p, q) = (6.0 * a, 6.0 * b);
        let mut sum = 0.0;
        for x in [DetectorOp::h(p), DetectorOp::h_prime(p)] {
            for y in [DetectorOp::g(q), DetectorOp::g_prime(q)] {
                sum += coincidence_rate(&psi, &x, &y).unwrap().rate;
            }
        }
        totals.push(sum);
    }
    for t in &totals {
        assert!((t - totals[0]).abs() < 1e-12);
    }
}

#[test]
fn complementary_port_has_opposite_fringe() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for stat in [Statistics::Boson, Statistics::Fermion] {
        for _ in 0..16 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-PI..PI)).collect();
            let psi = psipi_state(stat, v[2], v[3]).unwrap();
            let r = coincidence_rate(&psi, &DetectorOp::h_prime(v[0]), &DetectorOp::g(v[1])).unwrap();
            let expect = 1.0 - 0.5 * (v[1] - v[0] + v[2] - v[3]).cos();
            assert!((r.normalized() - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn contributing_state_agrees_with_full_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..8 {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-PI..PI)).collect();
        let g = 0.1;
        let full = apply_path_identity(&full_state(Statistics::Boson, g), &PathIdentityMap::two_mode(v[2], v[3])).unwrap();
        let small = psipi_state(Statistics::Boson, v[2], v[3]).unwrap();
        let (h, gg) = (DetectorOp::h(v[0]), DetectorOp::g(v[1]));
        let a = coincidence_rate(&full, &h, &gg).unwrap();
        let b = coincidence_rate(&small, &h, &gg).unwrap();
        assert!((a.rate / g.powi(4) - b.rate).abs() < 1e-12);
        assert!((a.normalized() - two_mode_psipi_rate(v[0], v[1], v[2], v[3])).abs() < 1e-12);
    }
}

#[test]
fn density_matrix_on_the_reference_configuration() {
    let psi = psipi_state::<f64>(Statistics::Boson, 0.0, 0.0).unwrap();
    let (h, g) = hg();
    let mixed = density_matrix_rate(&emission_branches(&psi), &h, &g).unwrap();
    let tagged = coincidence_rate(&psi, &h, &g).unwrap();
    assert!((mixed.rate - tagged.rate).abs() < 1e-12);
    assert!((mixed.normalized() - 1.5).abs() < 1e-12);
}

#[test]
fn no_interference_without_path_identity_for_fermions() {
    let psi = two_mode_contributing_state::<f64>(Statistics::Fermion).unwrap();
    let r0 = coincidence_rate(&psi, &DetectorOp::h(0.0), &DetectorOp::g(0.0)).unwrap().rate;
    for k in 1..16 {
        let r = coincidence_rate(&psi, &DetectorOp::h(0.3 * k as f64), &DetectorOp::g(-0.7 * k as f64)).unwrap().rate;
        assert!((r - r0).abs() < 1e-12);
    }
}

#[test]
fn frame_noise_examples() {
    let out = frame_noise_experiment(&FrameNoiseConfig::new(0.0f64, 10, 1)).unwrap();
    assert!((out.visibility_psipi - 0.5).abs() < 1e-12);
    assert!((out.visibility_standard - 1.0).abs() < 1e-12);
    let mut cfg = FrameNoiseConfig::new(PI, 10_000, 2);
    cfg.subtract_background = true;
    let out = frame_noise_experiment(&cfg).unwrap();
    assert!((out.visibility_psipi - 1.0).abs() < 0.01);
    assert!(out.visibility_standard < 0.05);
    let mut gauss = FrameNoiseConfig::new(3.0f64, 10_000, 3);
    gauss.law = psipi::interferometer::NoiseLaw::Gaussian;
    let out = frame_noise_experiment(&gauss).unwrap();
    assert!((out.visibility_psipi - 0.5).abs() < 1e-12);
    assert!(out.visibility_standard < 0.05);
}
