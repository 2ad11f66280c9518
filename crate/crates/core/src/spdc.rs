//! Two independent down-conversion sources expanded to four-photon order,
//! and the path-identity rewrite that merges their idler modes.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex;
use num_traits::One;

use crate::error::{Error, Result};
use crate::fock::{ModeId, OccupationKet, Species, Statistics, TaggedState};
use crate::scalar::{phasor, sinc, Real};

/// Pair-emission amplitude used when none is specified.
pub const DEFAULT_GAIN: f64 = 0.1;

/// Highest photon number kept by the perturbative expansion.
pub const MAX_PHOTONS: u32 = 4;

/// Phase-matching inputs of the sinc-product joint amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMatchingParams<T> {
    /// Absorbs susceptibility, pump amplitude, field normalisations and `Dτ/iħ`.
    pub prefactor: Complex<T>,
    /// `ω_S + ω_I − ω_P` in rad/s.
    pub delta_omega: T,
    /// Interaction time in s.
    pub tau: T,
    /// `k_S + k_I − k_P` in rad/m.
    pub delta_k: [T; 3],
    /// Crystal side lengths in m.
    pub lengths: [T; 3],
    /// Crystal centre in m.
    pub center: [T; 3],
}

impl<T: Real> PhaseMatchingParams<T> {
    pub fn new(
        prefactor: Complex<T>,
        delta_omega: T,
        tau: T,
        delta_k: [T; 3],
        lengths: [T; 3],
        center: [T; 3],
    ) -> Result<Self> {
        if !(tau > T::zero()) {
            return Err(Error::InvalidArgument("interaction time must be positive".into()));
        }
        if lengths.iter().any(|l| !(*l > T::zero())) {
            return Err(Error::InvalidArgument("crystal lengths must be positive".into()));
        }
        Ok(Self { prefactor, delta_omega, tau, delta_k, lengths, center })
    }

    /// Same crystal and timing with a different phase mismatch.
    pub fn with_mismatch(&self, delta_omega: T, delta_k: [T; 3]) -> Self {
        Self { delta_omega, delta_k, ..self.clone() }
    }
}

/// Two-photon joint amplitude of a box crystal in the plane-wave pump limit.
pub fn c2_sinc_model<T: Real>(p: &PhaseMatchingParams<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let time_phase = phasor(p.delta_omega * p.tau * half);
    let dk_r0 = p.delta_k[0] * p.center[0] + p.delta_k[1] * p.center[1] + p.delta_k[2] * p.center[2];
    let space_phase = phasor(-dk_r0);
    let mut envelope = sinc(p.delta_omega * p.tau * half);
    for m in 0..3 {
        envelope = envelope * sinc(p.delta_k[m] * p.lengths[m] * half);
    }
    p.prefactor * time_phase * space_phase * envelope
}

/// Four-photon coefficient of a double emission from one source.
#[inline]
pub fn c4_from_c2<T: Real>(c2_a: Complex<T>, c2_b: Complex<T>) -> Complex<T> {
    c2_a * c2_b * T::lit(0.5)
}

/// One signal/idler mode pair a source can emit into.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMode<T> {
    pub signal: ModeId,
    pub idler: ModeId,
    /// Relative pair amplitude; the two-photon coefficient is `gain · weight`.
    pub weight: Complex<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec<T> {
    pub source_id: u8,
    pub gain: Complex<T>,
    /// Exponent of `e^{iΘ}` attached to each pair this source emits.
    pub pump_exponent_per_pair: i32,
    pub mode_pairs: Vec<PairMode<T>>,
}

/// Path labels of the two-mode geometry: source 1 emits into `(u,u')` or
/// `(v,v')`, source 2 into `(c,c')` or `(d,d')`.
pub mod paths {
    use crate::fock::ModeId;

    pub const S_U: ModeId = ModeId::signal(1, "u");
    pub const S_V: ModeId = ModeId::signal(1, "v");
    pub const I_U: ModeId = ModeId::idler(1, "u'");
    pub const I_V: ModeId = ModeId::idler(1, "v'");
    pub const S_C: ModeId = ModeId::signal(2, "c");
    pub const S_D: ModeId = ModeId::signal(2, "d");
    pub const I_C: ModeId = ModeId::idler(2, "c'");
    pub const I_D: ModeId = ModeId::idler(2, "d'");
}

impl<T: Real> SourceSpec<T> {
    /// Source of the two-mode geometry with unit pair weights.
    pub fn two_mode(source_id: u8, gain: Complex<T>) -> Result<Self> {
        use paths::*;
        let (pairs, exponent) = match source_id {
            1 => ([(S_U, I_U), (S_V, I_V)], 0),
            2 => ([(S_C, I_C), (S_D, I_D)], 1),
            other => return Err(Error::InvalidSource(format!("source id {other} is not 1 or 2"))),
        };
        let mode_pairs = pairs
            .into_iter()
            .map(|(signal, idler)| PairMode { signal, idler, weight: Complex::one() })
            .collect();
        let spec = Self { source_id, gain, pump_exponent_per_pair: exponent, mode_pairs };
        spec.validate()?;
        Ok(spec)
    }

    /// Momentum-mode source whose pair weights are the joint amplitude table
    /// `table[s * n_idler + i] = C²(k_s, k_i)`. Zero entries are skipped.
    pub fn multimode(source_id: u8, gain: Complex<T>, table: &[Complex<T>], n_signal: usize) -> Result<Self> {
        if n_signal == 0 || table.len() % n_signal != 0 {
            return Err(Error::ShapeMismatch(format!(
                "joint amplitude table of length {} is not a multiple of {n_signal} signal modes",
                table.len()
            )));
        }
        let n_idler = table.len() / n_signal;
        let mut mode_pairs = Vec::new();
        for s in 0..n_signal {
            for i in 0..n_idler {
                let w = table[s * n_idler + i];
                if w.norm() > T::zero() {
                    mode_pairs.push(PairMode {
                        signal: ModeId::signal_k(source_id, s as i64),
                        idler: ModeId::idler_k(source_id, i as i64),
                        weight: w,
                    });
                }
            }
        }
        let exponent = if source_id == 1 { 0 } else { 1 };
        let spec = Self { source_id, gain, pump_exponent_per_pair: exponent, mode_pairs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_pairs.is_empty() {
            return Err(Error::InvalidSource(format!("source {} has no mode pairs", self.source_id)));
        }
        for p in &self.mode_pairs {
            if p.signal.species != Species::Signal || p.idler.species != Species::Idler {
                return Err(Error::InvalidSource(format!("pair ({}, {}) has wrong species", p.signal, p.idler)));
            }
            if !(p.weight.re.is_finite() && p.weight.im.is_finite()) {
                return Err(Error::InvalidSource(format!("pair ({}, {}) has non-finite weight", p.signal, p.idler)));
            }
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::InvalidSource("gain is not finite".into()));
        }
        Ok(())
    }

    /// Two-photon coefficient `C²` of each pair.
    pub fn c2(&self, pair: &PairMode<T>) -> Complex<T> {
        self.gain * pair.weight
    }

    /// `Σ_p C²_p a†_S(p) a†_I(p) |ψ⟩`, truncated to four photons.
    fn emit_pair(&self, state: &TaggedState<T>) -> Result<TaggedState<T>> {
        let mut out = TaggedState::zero(state.statistics());
        for p in &self.mode_pairs {
            let emitted = state.create(p.idler).create(p.signal).scale(self.c2(p)).truncate(MAX_PHOTONS);
            out = out.add(&emitted)?;
        }
        out.shifted(self.pump_exponent_per_pair)
    }

    /// `U|ψ⟩ = (1 + E + E²/2)|ψ⟩` with `E` the pair-emission operator.
    fn evolve(&self, state: &TaggedState<T>) -> Result<TaggedState<T>> {
        let once = self.emit_pair(state)?;
        let twice = self.emit_pair(&once)?.scale(Complex::new(T::lit(0.5), T::zero()));
        state.add(&once)?.add(&twice).map(|s| s.truncate(MAX_PHOTONS))
    }
}

/// Construction options for [`build_two_source_state`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub statistics: Statistics,
    /// Permit `|g1| ≠ |g2|`; pumps of equal intensity are the default.
    pub allow_unequal_gains: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { statistics: Statistics::Boson, allow_unequal_gains: false }
    }
}

impl BuildOptions {
    pub fn with_statistics(statistics: Statistics) -> Self {
        Self { statistics, ..Self::default() }
    }
}

/// Joint state `U₂U₁|vac⟩` through total photon number four, including the
/// vacuum and two-photon terms.
pub fn build_two_source_state<T: Real>(
    src1: &SourceSpec<T>,
    src2: &SourceSpec<T>,
    opts: BuildOptions,
) -> Result<TaggedState<T>> {
    src1.validate()?;
    src2.validate()?;
    if src1.pump_exponent_per_pair == src2.pump_exponent_per_pair {
        return Err(Error::DependentSources(src1.pump_exponent_per_pair));
    }
    let g1 = src1.gain.norm();
    let g2 = src2.gain.norm();
    if !opts.allow_unequal_gains && (g1 - g2).abs() > T::lit(1e-12) * (g1 + g2).max(T::one()) {
        return Err(Error::UnequalGains(g1.as_f64(), g2.as_f64()));
    }
    let signals1: BTreeSet<ModeId> = src1.mode_pairs.iter().map(|p| p.signal).collect();
    if let Some(p) = src2.mode_pairs.iter().find(|p| signals1.contains(&p.signal)) {
        return Err(Error::OverlappingSignalModes(p.signal.to_string()));
    }
    let vac = TaggedState::vacuum(opts.statistics);
    let after1 = src1.evolve(&vac)?;
    src2.evolve(&after1)
}

/// Keep the terms that can register a coincidence on at least one of the
/// given signal-mode pairs.
pub fn filter_detectable<T: Real>(state: &TaggedState<T>, detected_pairs: &[(ModeId, ModeId)]) -> TaggedState<T> {
    state.retain(|ket, _| {
        detected_pairs.iter().any(|(a, b)| {
            if a == b {
                ket.count(a) >= 2
            } else {
                ket.count(a) >= 1 && ket.count(b) >= 1
            }
        })
    })
}

/// Idler modes of one source made identical with those of another.
///
/// Each entry maps a source idler mode to its partner and the phase `γ`
/// accumulated in between, so that `|I_from⟩ = e^{-iγ}|I_to⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathIdentityMap<T> {
    from_source: u8,
    map: BTreeMap<ModeId, (ModeId, T)>,
}

impl<T: Real> PathIdentityMap<T> {
    pub fn new(from_source: u8, entries: impl IntoIterator<Item = (ModeId, ModeId, T)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut targets = BTreeSet::new();
        for (from, to, gamma) in entries {
            if from.species != Species::Idler || to.species != Species::Idler {
                return Err(Error::InvalidArgument(format!("path identity maps idler modes only ({from} -> {to})")));
            }
            if from.source != from_source {
                return Err(Error::InvalidArgument(format!("{from} is not emitted by source {from_source}")));
            }
            if !targets.insert(to) || map.insert(from, (to, gamma)).is_some() {
                return Err(Error::NonInjectivePathIdentity(to.to_string()));
            }
        }
        Ok(Self { from_source, map })
    }

    /// `c' → u'` with phase `γ_I` and `d' → v'` with `γ_I'`.
    pub fn two_mode(gamma_i: T, gamma_i_prime: T) -> Self {
        use paths::*;
        Self::new(2, [(I_C, I_U, gamma_i), (I_D, I_V, gamma_i_prime)]).expect("static two-mode map is valid")
    }

    /// Momentum-mode map `I₂(k) → I₁(k)` with phase `γ(k)`.
    pub fn multimode(gammas: &[T]) -> Self {
        Self::new(
            2,
            gammas.iter().enumerate().map(|(k, g)| (ModeId::idler_k(2, k as i64), ModeId::idler_k(1, k as i64), *g)),
        )
        .expect("momentum map is injective")
    }

    pub fn get(&self, mode: &ModeId) -> Option<(ModeId, T)> {
        self.map.get(mode).copied()
    }
}

/// Rewrite every source idler mode to its partner, picking up `e^{-iγ}` per
/// particle. Works at operator level, so bosonic bunching factors and
/// fermionic reordering signs come out of the ladder algebra.
pub fn apply_path_identity<T: Real>(state: &TaggedState<T>, pi: &PathIdentityMap<T>) -> Result<TaggedState<T>> {
    if state.is_path_identified() {
        return Err(Error::PathIdentityAlreadyApplied);
    }
    let stat = state.statistics();
    let mut raw: Vec<(OccupationKet, i32, Complex<T>)> = Vec::new();
    for (ket, tagged) in state.terms() {
        // Operator word in canonical order, leftmost first.
        let mut word: Vec<ModeId> = Vec::with_capacity(ket.total() as usize);
        let mut factor = tagged.value;
        for (mode, n) in ket.iter() {
            let mapped = if mode.species == Species::Idler && mode.source == pi.from_source {
                let (to, gamma) = pi.get(mode).ok_or_else(|| Error::UnmappedIdlerMode(mode.to_string()))?;
                for _ in 0..n {
                    factor = factor * phasor(-gamma);
                }
                to
            } else {
                *mode
            };
            // |n⟩ = (a†)^n / √(n!) |vac⟩
            for j in 1..=n {
                factor = factor / T::from_u32(j).unwrap().sqrt();
                word.push(mapped);
            }
        }
        let mut built = TaggedState::<T>::vacuum(stat);
        for mode in word.iter().rev() {
            built = built.create(*mode);
        }
        for (k, a) in built.terms() {
            raw.push((k.clone(), tagged.pump_exponent, a.value * factor));
        }
    }
    let mut out = TaggedState::from_raw(stat, true, raw);
    out.mark_path_identified();
    Ok(out)
}

/// Contributing state of the two-mode geometry before path identity:
/// the filtered four-photon part of `U₂U₁|vac⟩` divided by `g²`.
pub fn two_mode_contributing_state<T: Real>(statistics: Statistics) -> Result<TaggedState<T>> {
    use paths::*;
    let g = Complex::new(T::lit(DEFAULT_GAIN), T::zero());
    let s1 = SourceSpec::two_mode(1, g)?;
    let s2 = SourceSpec::two_mode(2, g)?;
    let full = build_two_source_state(&s1, &s2, BuildOptions::with_statistics(statistics))?;
    let pairs = [(S_U, S_V), (S_U, S_D), (S_C, S_V), (S_C, S_D)];
    Ok(filter_detectable(&full, &pairs).scale(Complex::new(T::one() / (g.re * g.re), T::zero())))
}
