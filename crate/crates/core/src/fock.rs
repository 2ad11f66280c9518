//! Sparse multimode Fock-space algebra with exact pump-phase bookkeeping.
//!
//! A [`TaggedState`] is a superposition of occupation-number kets in which
//! every amplitude carries an integer exponent `m` standing for the factor
//! `e^{imΘ}` of the stochastic pump-phase difference `Θ`. Because `Θ` is
//! uniformly distributed, `⟨e^{i(m-m')Θ}⟩ = δ_{mm'}`, so ensemble averages of
//! bilinear quantities reduce to pairing terms of equal exponent. No sampling
//! is involved; [`TaggedState::at_pump_phase`] exists for Monte Carlo
//! cross-checks.
//!
//! Kets are stored in canonical mode order. For fermions the ket
//! `|m1 m2 … mk⟩` with `m1 < m2 < … < mk` stands for
//! `a†(m1) a†(m2) … a†(mk)|vac⟩`, which fixes every sign.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{phasor, Real};

/// Amplitudes below this modulus are dropped after every linear operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Largest pump exponent magnitude reachable within four-photon truncation.
pub const MAX_PUMP_EXPONENT: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    Signal,
    Idler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Named path such as `u`, `v'` or `c`.
    Path(&'static str),
    /// Transverse-momentum index (flattened pixel index in imaging runs).
    Momentum(i64),
}

/// Identity of a single field mode.
///
/// Ordering is by species, then emitting source, then label; this is the
/// canonical order used for fermionic signs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub species: Species,
    pub source: u8,
    pub label: Label,
}

impl ModeId {
    pub const fn signal(source: u8, path: &'static str) -> Self {
        Self { species: Species::Signal, source, label: Label::Path(path) }
    }

    pub const fn idler(source: u8, path: &'static str) -> Self {
        Self { species: Species::Idler, source, label: Label::Path(path) }
    }

    pub const fn signal_k(source: u8, k: i64) -> Self {
        Self { species: Species::Signal, source, label: Label::Momentum(k) }
    }

    pub const fn idler_k(source: u8, k: i64) -> Self {
        Self { species: Species::Idler, source, label: Label::Momentum(k) }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.species {
            Species::Signal => 'S',
            Species::Idler => 'I',
        };
        match self.label {
            Label::Path(p) => write!(f, "{s}{}({p})", self.source),
            Label::Momentum(k) => write!(f, "{s}{}(k={k})", self.source),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    fn name(self) -> &'static str {
        match self {
            Statistics::Boson => "boson",
            Statistics::Fermion => "fermion",
        }
    }
}

/// Occupation-number configuration; zero counts are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationKet {
    occupations: Vec<(ModeId, u32)>,
}

impl OccupationKet {
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// Build from arbitrary `(mode, count)` entries; duplicates are summed.
    pub fn from_counts<I: IntoIterator<Item = (ModeId, u32)>>(counts: I) -> Self {
        let mut map: BTreeMap<ModeId, u32> = BTreeMap::new();
        for (m, n) in counts {
            *map.entry(m).or_default() += n;
        }
        Self { occupations: map.into_iter().filter(|&(_, n)| n > 0).collect() }
    }

    /// Ket with one particle in each listed mode (repeats add up).
    pub fn from_modes<I: IntoIterator<Item = ModeId>>(modes: I) -> Self {
        Self::from_counts(modes.into_iter().map(|m| (m, 1)))
    }

    pub fn count(&self, mode: &ModeId) -> u32 {
        match self.occupations.binary_search_by(|(m, _)| m.cmp(mode)) {
            Ok(i) => self.occupations[i].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.occupations.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeId, u32)> {
        self.occupations.iter().map(|(m, n)| (m, *n))
    }

    pub fn modes(&self) -> impl Iterator<Item = &ModeId> {
        self.occupations.iter().map(|(m, _)| m)
    }

    /// Particles in modes strictly before `mode` in canonical order.
    fn preceding(&self, mode: &ModeId) -> u32 {
        self.occupations.iter().take_while(|(m, _)| m < mode).map(|&(_, n)| n).sum()
    }

    fn with_count(&self, mode: ModeId, n: u32) -> Self {
        let mut occ = self.occupations.clone();
        match occ.binary_search_by(|(m, _)| m.cmp(&mode)) {
            Ok(i) if n == 0 => {
                occ.remove(i);
            }
            Ok(i) => occ[i].1 = n,
            Err(_) if n == 0 => {}
            Err(i) => occ.insert(i, (mode, n)),
        }
        Self { occupations: occ }
    }
}

impl fmt::Display for OccupationKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occupations.is_empty() {
            return write!(f, "|vac⟩");
        }
        write!(f, "|")?;
        for (i, (m, n)) in self.occupations.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if *n > 1 {
                write!(f, "{n}")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "⟩")
    }
}

/// Complex amplitude together with its pump-phase exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaggedAmplitude<T> {
    pub value: Complex<T>,
    pub pump_exponent: i32,
}

/// Superposition of kets whose amplitudes carry pump-phase exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedState<T> {
    terms: BTreeMap<(OccupationKet, i32), Complex<T>>,
    statistics: Statistics,
    path_identified: bool,
}

impl<T: Real> TaggedState<T> {
    pub fn zero(statistics: Statistics) -> Self {
        Self { terms: BTreeMap::new(), statistics, path_identified: false }
    }

    pub fn vacuum(statistics: Statistics) -> Self {
        let mut s = Self::zero(statistics);
        s.terms.insert((OccupationKet::vacuum(), 0), Complex::one());
        s
    }

    /// Single ket with unit amplitude and the given pump exponent.
    pub fn basis(statistics: Statistics, ket: OccupationKet, pump_exponent: i32) -> Result<Self> {
        let mut s = Self::zero(statistics);
        s.add_term(ket, pump_exponent, Complex::one())?;
        Ok(s)
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// True once [`crate::spdc::apply_path_identity`] has rewritten the state.
    pub fn is_path_identified(&self) -> bool {
        self.path_identified
    }

    pub(crate) fn mark_path_identified(&mut self) {
        self.path_identified = true;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationKet, TaggedAmplitude<T>)> {
        self.terms
            .iter()
            .map(|((k, m), v)| (k, TaggedAmplitude { value: *v, pump_exponent: *m }))
    }

    /// Amplitude of a ket at a given exponent (zero if absent).
    pub fn amplitude(&self, ket: &OccupationKet, pump_exponent: i32) -> Complex<T> {
        // BTreeMap lookup needs an owned key.
        self.terms.get(&(ket.clone(), pump_exponent)).copied().unwrap_or_else(Complex::zero)
    }

    /// Accumulate `amp` onto `(ket, pump_exponent)`.
    pub fn add_term(&mut self, ket: OccupationKet, pump_exponent: i32, amp: Complex<T>) -> Result<()> {
        if pump_exponent.abs() > MAX_PUMP_EXPONENT {
            return Err(Error::PumpExponentOutOfRange(pump_exponent));
        }
        if self.statistics == Statistics::Fermion {
            if let Some((m, n)) = ket.iter().find(|&(_, n)| n > 1) {
                return Err(Error::PauliViolation(m.to_string(), n));
            }
        }
        if !(amp.re.is_finite() && amp.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite amplitude for {ket}")));
        }
        self.accumulate(ket, pump_exponent, amp);
        self.prune();
        Ok(())
    }

    fn accumulate(&mut self, ket: OccupationKet, m: i32, amp: Complex<T>) {
        *self.terms.entry((ket, m)).or_insert_with(Complex::zero) += amp;
    }

    fn prune(&mut self) {
        let eps = T::lit(PRUNE_THRESHOLD);
        self.terms.retain(|_, v| v.norm() >= eps);
    }

    fn empty_like(&self) -> Self {
        Self { terms: BTreeMap::new(), statistics: self.statistics, path_identified: self.path_identified }
    }

    /// Apply `a†(mode)`.
    pub fn create(&self, mode: ModeId) -> Self {
        let mut out = self.empty_like();
        for ((ket, m), amp) in &self.terms {
            let n = ket.count(&mode);
            let factor = match self.statistics {
                Statistics::Boson => T::from_u32(n + 1).unwrap().sqrt(),
                Statistics::Fermion => {
                    if n >= 1 {
                        continue;
                    }
                    fermion_sign(ket.preceding(&mode))
                }
            };
            out.accumulate(ket.with_count(mode, n + 1), *m, *amp * factor);
        }
        out.prune();
        out
    }

    /// Apply `a(mode)`.
    pub fn annihilate(&self, mode: ModeId) -> Self {
        let mut out = self.empty_like();
        for ((ket, m), amp) in &self.terms {
            let n = ket.count(&mode);
            if n == 0 {
                continue;
            }
            let factor = match self.statistics {
                Statistics::Boson => T::from_u32(n).unwrap().sqrt(),
                Statistics::Fermion => fermion_sign(ket.preceding(&mode)),
            };
            out.accumulate(ket.with_count(mode, n - 1), *m, *amp * factor);
        }
        out.prune();
        out
    }

    /// Apply `Σ coeff · a(mode)`.
    pub fn annihilate_combination(&self, composition: &[(ModeId, Complex<T>)]) -> Self {
        let mut out = self.empty_like();
        for (mode, c) in composition {
            let part = self.annihilate(*mode);
            for (key, amp) in part.terms {
                *out.terms.entry(key).or_insert_with(Complex::zero) += amp * *c;
            }
        }
        out.prune();
        out
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = *v * factor;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_statistics(self, other)?;
        let mut out = self.clone();
        out.path_identified |= other.path_identified;
        for (key, amp) in &other.terms {
            *out.terms.entry(key.clone()).or_insert_with(Complex::zero) += *amp;
        }
        out.prune();
        Ok(out)
    }

    /// Pump-phase-averaged norm `sqrt(⟨ψ|ψ⟩)`.
    pub fn norm(&self) -> T {
        self.terms.values().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    /// Multiply every amplitude by `e^{iθ}` per unit of exponent and drop
    /// the tags; the result is one realisation of the pump phase.
    pub fn at_pump_phase(&self, theta: T) -> Self {
        let mut out = self.empty_like();
        for ((ket, m), amp) in &self.terms {
            let p = phasor(theta * T::from_i32(*m).unwrap());
            out.accumulate(ket.clone(), 0, *amp * p);
        }
        out.prune();
        out
    }

    /// Add `dm` to every pump exponent.
    pub fn shifted(&self, dm: i32) -> Result<Self> {
        let mut out = self.empty_like();
        for ((ket, m), amp) in &self.terms {
            let e = m + dm;
            if e.abs() > MAX_PUMP_EXPONENT {
                return Err(Error::PumpExponentOutOfRange(e));
            }
            out.accumulate(ket.clone(), e, *amp);
        }
        Ok(out)
    }

    /// Keep only terms satisfying `keep`.
    pub fn retain<F: FnMut(&OccupationKet, i32) -> bool>(&self, mut keep: F) -> Self {
        let mut out = self.clone();
        out.terms.retain(|(k, m), _| keep(k, *m));
        out
    }

    /// Drop every term with more than `max_photons` particles.
    pub fn truncate(&self, max_photons: u32) -> Self {
        self.retain(|k, _| k.total() <= max_photons)
    }

    /// Terms with a given pump exponent, re-tagged with exponent 0.
    pub fn exponent_class(&self, pump_exponent: i32) -> Self {
        let mut out = self.empty_like();
        for ((ket, m), amp) in &self.terms {
            if *m == pump_exponent {
                out.accumulate(ket.clone(), 0, *amp);
            }
        }
        out
    }

    /// Distinct pump exponents present, ascending.
    pub fn exponents(&self) -> Vec<i32> {
        let mut e: Vec<i32> = self.terms.keys().map(|(_, m)| *m).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Every mode that is occupied in at least one term.
    pub fn support_modes(&self) -> Vec<ModeId> {
        let mut modes: Vec<ModeId> = self.terms.keys().flat_map(|(k, _)| k.modes().copied()).collect();
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    /// Rebuild from raw `(ket, exponent, amplitude)` triples.
    pub(crate) fn from_raw(
        statistics: Statistics,
        path_identified: bool,
        raw: impl IntoIterator<Item = (OccupationKet, i32, Complex<T>)>,
    ) -> Self {
        let mut out = Self { terms: BTreeMap::new(), statistics, path_identified };
        for (k, m, a) in raw {
            out.accumulate(k, m, a);
        }
        out.prune();
        out
    }
}

impl<T: Real> fmt::Display for TaggedState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, ((k, m), v)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)", v.re, v.im)?;
            if *m != 0 {
                write!(f, "·e^{{{m}iΘ}}")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

#[inline]
fn fermion_sign<T: Real>(preceding: u32) -> T {
    if preceding % 2 == 0 {
        T::one()
    } else {
        -T::one()
    }
}

fn check_statistics<T: Real>(a: &TaggedState<T>, b: &TaggedState<T>) -> Result<()> {
    if a.statistics != b.statistics {
        return Err(Error::StatisticsMismatch(a.statistics.name(), b.statistics.name()));
    }
    Ok(())
}

/// Pump-phase-averaged inner product `⟨bra|ket⟩`.
///
/// Only terms with equal pump exponents pair, which is exactly the uniform
/// average of `e^{i(m-m')Θ}`.
pub fn averaged_pairing<T: Real>(bra: &TaggedState<T>, ket: &TaggedState<T>) -> Result<Complex<T>> {
    check_statistics(bra, ket)?;
    let (small, large, conj_small) =
        if bra.terms.len() <= ket.terms.len() { (bra, ket, true) } else { (ket, bra, false) };
    let mut acc = Complex::zero();
    for (key, a) in &small.terms {
        if let Some(b) = large.terms.get(key) {
            acc += if conj_small { a.conj() * b } else { b.conj() * a };
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const SU: ModeId = ModeId::signal(1, "u");
    const SV: ModeId = ModeId::signal(1, "v");

    fn vac(stat: Statistics) -> TaggedState<f64> {
        TaggedState::vacuum(stat)
    }

    #[test]
    fn creation_on_vacuum() {
        let s = vac(Statistics::Boson).create(SU);
        assert_eq!(s.len(), 1);
        assert_eq!(s.amplitude(&OccupationKet::from_modes([SU]), 0), Complex64::one());
    }

    #[test]
    fn bosonic_sqrt_factor() {
        let s = vac(Statistics::Boson).create(SU).create(SU);
        let two = OccupationKet::from_counts([(SU, 2)]);
        assert!((s.amplitude(&two, 0).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pauli_exclusion() {
        let s = vac(Statistics::Fermion).create(SU).create(SU);
        assert!(s.is_zero());
    }

    #[test]
    fn annihilation_basics() {
        let one = vac(Statistics::Boson).create(SU);
        let back = one.annihilate(SU);
        assert_eq!(back, vac(Statistics::Boson));
        assert!(vac(Statistics::Boson).annihilate(SU).is_zero());
    }

    #[test]
    fn pairing_selection_rule() {
        let ket = OccupationKet::from_modes([SU]);
        let a = TaggedState::<f64>::basis(Statistics::Boson, ket.clone(), 1).unwrap();
        let b = TaggedState::<f64>::basis(Statistics::Boson, ket, 0).unwrap();
        assert_eq!(averaged_pairing(&a, &a).unwrap(), Complex64::one());
        assert_eq!(averaged_pairing(&b, &a).unwrap(), Complex64::zero());
    }

    #[test]
    fn pairing_statistics_mismatch() {
        let a = vac(Statistics::Boson);
        let b = vac(Statistics::Fermion);
        assert!(matches!(averaged_pairing(&a, &b), Err(Error::StatisticsMismatch(..))));
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn norm_rules() {
        assert_eq!(vac(Statistics::Boson).norm(), 1.0);
        let psi = vac(Statistics::Boson).create(SU).create(SV).create(SU);
        let a = Complex64::new(0.3, -1.2);
        assert!((psi.scale(a).norm() - a.norm() * psi.norm()).abs() < 1e-14);
        let x = vac(Statistics::Boson).create(SU).scale(Complex64::new(3.0, 0.0));
        let y = vac(Statistics::Boson).create(SV).scale(Complex64::new(0.0, 4.0));
        assert!((x.add(&y).unwrap().norm() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn fermion_anticommutation_sign() {
        let ab = vac(Statistics::Fermion).create(SV).create(SU);
        let ba = vac(Statistics::Fermion).create(SU).create(SV);
        let sum = ab.add(&ba).unwrap();
        assert!(sum.is_zero());
    }

    #[test]
    fn add_term_validation() {
        let mut s = TaggedState::<f64>::zero(Statistics::Fermion);
        let bad = OccupationKet::from_counts([(SU, 2)]);
        assert!(matches!(s.add_term(bad, 0, Complex64::one()), Err(Error::PauliViolation(..))));
        let ok = OccupationKet::from_modes([SU]);
        assert!(matches!(s.add_term(ok, 5, Complex64::one()), Err(Error::PumpExponentOutOfRange(5))));
    }

    #[test]
    fn pruning_removes_cancelled_terms() {
        let s = vac(Statistics::Boson).create(SU);
        let t = s.scale(Complex64::new(-1.0, 0.0));
        assert!(s.add(&t).unwrap().is_zero());
    }

    #[test]
    fn canonical_order_is_species_source_label() {
        assert!(ModeId::signal(2, "a") < ModeId::idler(1, "a"));
        assert!(ModeId::signal(1, "z") < ModeId::signal(2, "a"));
        assert!(ModeId::signal(1, "c") < ModeId::signal(1, "d"));
        assert!(ModeId::signal_k(1, -3) < ModeId::signal_k(1, 2));
    }
}
