use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use psipi::fock::{averaged_pairing, ModeId, OccupationKet, Statistics, TaggedState};
use psipi::imaging::{CorrelationModel, ModeGrid, PhaseField, PortPair};
use psipi::interferometer::{coincidence_rate, psipi_state, two_mode_psipi_rate, DetectorOp};
use psipi::oracles::{direct_pair_value, DenseFockSpace};
use psipi::recover::unwrap_2d;

fn register() -> Vec<ModeId> {
    (0..4).map(|k| ModeId::signal_k(1, k)).chain((0..4).map(|k| ModeId::idler_k(2, k))).collect()
}

type Term = (Vec<usize>, i32, f64, f64);

fn terms(max_photons: usize, n_modes: usize) -> impl Strategy<Value = Vec<Term>> {
    prop::collection::vec(
        (prop::collection::vec(0..n_modes, 0..=max_photons), -2i32..=2, -1.0..1.0f64, -1.0..1.0f64),
        1..6,
    )
}

fn build(stat: Statistics, modes: &[ModeId], terms: &[Term], with_exponents: bool) -> TaggedState<f64> {
    let mut s = TaggedState::zero(stat);
    for (idx, m, re, im) in terms {
        let mut ket = OccupationKet::vacuum();
        let mut counts = vec![0u32; modes.len()];
        for i in idx {
            counts[*i] += 1;
        }
        if stat == Statistics::Fermion && counts.iter().any(|c| *c > 1) {
            continue;
        }
        if counts.iter().any(|c| *c > 0) {
            ket = OccupationKet::from_counts(modes.iter().copied().zip(counts).filter(|(_, n)| *n > 0));
        }
        let m = if with_exponents { *m } else { 0 };
        let prev = s.amplitude(&ket, m);
        s.add_term(ket, m, prev + Complex64::new(*re, *im)).unwrap();
    }
    s
}

fn close(a: &TaggedState<f64>, b: &TaggedState<f64>) -> bool {
    let diff = a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap();
    diff.norm() < 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ladder_commutation_relations(t in terms(3, 8)) {
        let modes = register();
        for stat in [Statistics::Boson, Statistics::Fermion] {
            let psi = build(stat, &modes, &t, true);
            let sign = if stat == Statistics::Fermion { -1.0 } else { 1.0 };
            for (i, a) in modes.iter().enumerate() {
                for b in &modes[i + 1..] {
                    let ab = psi.create(*b).create(*a);
                    let ba = psi.create(*a).create(*b);
                    prop_assert!(close(&ab, &ba.scale(Complex64::new(sign, 0.0))));
                    let ab = psi.annihilate(*b).create(*a);
                    let ba = psi.create(*a).annihilate(*b);
                    prop_assert!(close(&ab, &ba.scale(Complex64::new(sign, 0.0))));
                }
            }
        }
    }

    #[test]
    fn pairing_is_conjugate_symmetric(t1 in terms(3, 8), t2 in terms(3, 8)) {
        let modes = register();
        for stat in [Statistics::Boson, Statistics::Fermion] {
            let (a, b) = (build(stat, &modes, &t1, true), build(stat, &modes, &t2, true));
            let ab = averaged_pairing(&a, &b).unwrap();
            let ba = averaged_pairing(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
            prop_assert!(averaged_pairing(&a, &a).unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_exponents_never_pair(t in terms(3, 8), dm in 1i32..=2) {
        let a = build(Statistics::Boson, &register(), &t, false);
        let b = a.shifted(dm).unwrap();
        prop_assert_eq!(averaged_pairing(&a, &b).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fermion_ladders_match_dense_matrices(t in terms(4, 8)) {
        let modes = register();
        let space = DenseFockSpace::new(modes.clone(), Statistics::Fermion, 2).unwrap();
        let psi = build(Statistics::Fermion, &modes, &t, false);
        let v = space.vector(&psi).unwrap();
        let scale = v.norm().max(1.0);
        for mode in &modes {
            let down = space.vector(&psi.annihilate(*mode)).unwrap();
            prop_assert!((space.annihilation(mode).unwrap() * &v - down).norm() < 1e-12 * scale);
            let up = space.vector(&psi.create(*mode)).unwrap();
            prop_assert!((space.creation(mode).unwrap() * &v - up).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn boson_ladders_match_dense_matrices(t in terms(3, 4)) {
        let modes: Vec<ModeId> = register().into_iter().take(4).collect();
        let space = DenseFockSpace::new(modes.clone(), Statistics::Boson, 5).unwrap();
        let psi = build(Statistics::Boson, &modes, &t, false);
        let v = space.vector(&psi).unwrap();
        let scale = v.norm().max(1.0);
        for mode in &modes {
            let down = space.vector(&psi.annihilate(*mode)).unwrap();
            prop_assert!((space.annihilation(mode).unwrap() * &v - down).norm() < 1e-12 * scale);
            let up = space.vector(&psi.create(*mode)).unwrap();
            prop_assert!((space.creation(mode).unwrap() * &v - up).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn signal_phases_enter_as_a_difference(
        phi in -PI..PI, phi2 in -PI..PI, g in -PI..PI, g2 in -PI..PI, delta in -10.0..10.0f64,
    ) {
        for stat in [Statistics::Boson, Statistics::Fermion] {
            let psi = psipi_state(stat, g, g2).unwrap();
            let r = |a: f64, b: f64| coincidence_rate(&psi, &DetectorOp::h(a), &DetectorOp::g(b)).unwrap().normalized();
            let base = r(phi, phi2);
            prop_assert!((base - two_mode_psipi_rate(phi, phi2, g, g2)).abs() < 1e-12);
            prop_assert!((r(phi + delta, phi2 + delta) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_values_are_symmetric(
        alpha in prop::collection::vec(-PI..PI, 6),
        sigma in 0.3..3.0f64,
        s in 0usize..6, t in 0usize..6,
    ) {
        let table = CorrelationModel::Gaussian { sigma }.table(&ModeGrid::one_d(6).unwrap()).unwrap();
        for ports in [PortPair::BB, PortPair::BBPrime] {
            let a = direct_pair_value(&table, &alpha, s, t, ports);
            let b = direct_pair_value(&table, &alpha, t, s, ports);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unwrap_inverts_wrap_for_smooth_fields(
        steps in prop::collection::vec(-3.0..3.0f64, 2..40),
        start in -20.0..20.0f64,
    ) {
        let mut values = vec![start];
        for d in &steps {
            values.push(values.last().unwrap() + d);
        }
        let truth = PhaseField::new(ModeGrid::one_d(values.len()).unwrap(), values).unwrap();
        let un = unwrap_2d(&truth.wrapped());
        let k = ((un.values[0] - truth.values[0]) / (2.0 * PI)).round();
        for (a, b) in un.values.iter().zip(&truth.values) {
            prop_assert!((a - b - 2.0 * PI * k).abs() < 1e-9);
        }
    }
}
