//! Beamsplitter detection, coincidence rates and the two-mode closed forms.
//!
//! Rates are computed three ways: exact tag contraction on a
//! [`TaggedState`], Monte Carlo over the pump phase, and a mixed-state trace
//! over independent emission branches. All three must agree.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{averaged_pairing, ModeId, OccupationKet, Statistics, TaggedState};
use crate::rng::{stream_rng, streams};
use crate::scalar::{phasor, Real};
use crate::spdc::{apply_path_identity, paths, two_mode_contributing_state, PathIdentityMap};

/// Share of the normalised PSIPI rate contributed by individual (single
/// source) double emissions; it carries no interference.
pub const INDIVIDUAL_EMISSION_BACKGROUND: f64 = 0.5;

/// Minimum number of points in a fringe scan.
pub const MIN_SCAN_POINTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    H,
    HPrime,
    G,
    GPrime,
    B,
    BPrime,
}

/// Field at a beamsplitter output, `a(port) = Σ c_m a(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorOp<T> {
    pub port: Port,
    composition: Vec<(ModeId, Complex<T>)>,
}

impl<T: Real> DetectorOp<T> {
    pub fn new(port: Port, composition: Vec<(ModeId, Complex<T>)>) -> Result<Self> {
        if composition.len() != 2 || composition[0].0 == composition[1].0 {
            return Err(Error::InvalidDetector(format!("{port:?} must combine exactly two distinct modes")));
        }
        let target = T::FRAC_1_SQRT_2();
        for (m, c) in &composition {
            if (c.norm() - target).abs() > T::lit(1e-12) {
                return Err(Error::InvalidDetector(format!("coefficient of {m} has modulus {} not 1/sqrt(2)", c.norm())));
            }
        }
        Ok(Self { port, composition })
    }

    /// `(a₁ + i e^{iφ} a₂)/√2`.
    fn transmitted(port: Port, first: ModeId, second: ModeId, phi: T) -> Self {
        let s = T::FRAC_1_SQRT_2();
        let i = Complex::new(T::zero(), T::one());
        Self::new(port, vec![(first, Complex::new(s, T::zero())), (second, i * phasor(phi) * s)])
            .expect("beamsplitter coefficients are valid")
    }

    /// `(i a₁ + e^{iφ} a₂)/√2`.
    fn reflected(port: Port, first: ModeId, second: ModeId, phi: T) -> Self {
        let s = T::FRAC_1_SQRT_2();
        Self::new(port, vec![(first, Complex::new(T::zero(), s)), (second, phasor(phi) * s)])
            .expect("beamsplitter coefficients are valid")
    }

    pub fn h(phi_s: T) -> Self {
        Self::transmitted(Port::H, paths::S_U, paths::S_C, phi_s)
    }

    pub fn g(phi_s_prime: T) -> Self {
        Self::transmitted(Port::G, paths::S_V, paths::S_D, phi_s_prime)
    }

    pub fn h_prime(phi_s: T) -> Self {
        Self::reflected(Port::HPrime, paths::S_U, paths::S_C, phi_s)
    }

    pub fn g_prime(phi_s_prime: T) -> Self {
        Self::reflected(Port::GPrime, paths::S_V, paths::S_D, phi_s_prime)
    }

    /// Output `b` at the camera pixel of signal momentum `k`.
    pub fn b(k: i64, phi_s: T) -> Self {
        Self::transmitted(Port::B, ModeId::signal_k(1, k), ModeId::signal_k(2, k), phi_s)
    }

    /// Output `b'` at the camera pixel of signal momentum `k`.
    pub fn b_prime(k: i64, phi_s: T) -> Self {
        Self::reflected(Port::BPrime, ModeId::signal_k(1, k), ModeId::signal_k(2, k), phi_s)
    }

    pub fn composition(&self) -> &[(ModeId, Complex<T>)] {
        &self.composition
    }

    pub fn apply(&self, state: &TaggedState<T>) -> TaggedState<T> {
        state.annihilate_combination(&self.composition)
    }

    /// All `(mode of self, mode of other)` pairs, for detection filtering.
    pub fn mode_pairs(&self, other: &Self) -> Vec<(ModeId, ModeId)> {
        let mut out = Vec::with_capacity(4);
        for (a, _) in &self.composition {
            for (b, _) in &other.composition {
                out.push((*a, *b));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMethod {
    Analytic,
    MonteCarlo,
    DensityMatrix,
}

/// Coincidence probability in the state's own (relative) units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateResult<T> {
    pub rate: T,
    /// Rate with the detection phases averaged out; always exact.
    pub background: T,
    pub stderr: T,
    pub method: RateMethod,
}

impl<T: Real> RateResult<T> {
    /// Rate in units of the incoherent background.
    pub fn normalized(&self) -> T {
        self.rate / self.background
    }

    pub fn normalized_stderr(&self) -> T {
        self.stderr / self.background
    }
}

fn check_modes<T: Real>(support: &[ModeId], ops: [&DetectorOp<T>; 2]) -> Result<()> {
    if support.is_empty() {
        return Ok(());
    }
    for op in ops {
        if !op.composition.iter().any(|(m, _)| support.binary_search(m).is_ok()) {
            return Err(Error::ModeMismatch(format!("{:?}", op.port)));
        }
    }
    Ok(())
}

fn pair_rate<T: Real>(state: &TaggedState<T>, a: &[(ModeId, Complex<T>)], b: &[(ModeId, Complex<T>)]) -> T {
    let after = state.annihilate_combination(b).annihilate_combination(a);
    averaged_pairing(&after, &after).map(|c| c.re).unwrap_or_else(|_| T::zero())
}

/// Detection-phase-averaged rate: cross terms between the two inputs of
/// each beamsplitter vanish, leaving `Σ |c_x c_y|² ‖a_x a_y ψ‖²`.
pub fn background_rate<T: Real>(state: &TaggedState<T>, op_a: &DetectorOp<T>, op_b: &DetectorOp<T>) -> T {
    let mut acc = T::zero();
    for (x, cx) in &op_a.composition {
        for (y, cy) in &op_b.composition {
            let w = cx.norm_sqr() * cy.norm_sqr();
            let one = Complex::one();
            acc += w * pair_rate(state, &[(*x, one)], &[(*y, one)]);
        }
    }
    acc
}

/// `⟨ψ| a†(A) a†(B) a(B) a(A) |ψ⟩` with the pump phase averaged exactly.
pub fn coincidence_rate<T: Real>(
    state: &TaggedState<T>,
    op_a: &DetectorOp<T>,
    op_b: &DetectorOp<T>,
) -> Result<RateResult<T>> {
    check_modes(&state.support_modes(), [op_a, op_b])?;
    let rate = pair_rate(state, &op_a.composition, &op_b.composition);
    Ok(RateResult {
        rate,
        background: background_rate(state, op_a, op_b),
        stderr: T::zero(),
        method: RateMethod::Analytic,
    })
}

/// Running mean and variance (Welford); exact when every sample is equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Monte Carlo estimate: draw `Θ ~ U[0, 2π)`, evaluate the un-averaged
/// fourth-order moment, and average.
pub fn coincidence_rate_mc<T: Real>(
    state: &TaggedState<T>,
    op_a: &DetectorOp<T>,
    op_b: &DetectorOp<T>,
    n_samples: usize,
    seed: u64,
) -> Result<RateResult<T>> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 Monte Carlo samples, got {n_samples}")));
    }
    check_modes(&state.support_modes(), [op_a, op_b])?;
    let after = op_a.apply(&op_b.apply(state));
    let mut grouped: BTreeMap<&OccupationKet, Vec<(f64, Complex<f64>)>> = BTreeMap::new();
    for (ket, t) in after.terms() {
        let amp = Complex::new(t.value.re.as_f64(), t.value.im.as_f64());
        grouped.entry(ket).or_default().push((t.pump_exponent as f64, amp));
    }
    let mut rng = stream_rng(seed, streams::PUMP_PHASE);
    let mut stats = RunningStats::default();
    for _ in 0..n_samples {
        let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let mut total = 0.0;
        for parts in grouped.values() {
            let mut s = Complex::<f64>::zero();
            for (m, a) in parts {
                s += a * Complex::from_polar(1.0, m * theta);
            }
            total += s.norm_sqr();
        }
        stats.push(total);
    }
    Ok(RateResult {
        rate: T::lit(stats.mean()),
        background: background_rate(state, op_a, op_b),
        stderr: T::lit(stats.stderr()),
        method: RateMethod::MonteCarlo,
    })
}

/// One independently emitted pure state with its emission probability.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionBranch<T> {
    pub weight: T,
    pub state: TaggedState<T>,
}

/// Split a tagged state into its mutually incoherent emission classes
/// (one per pump exponent), tags stripped, unit weight each.
pub fn emission_branches<T: Real>(state: &TaggedState<T>) -> Vec<EmissionBranch<T>> {
    state
        .exponents()
        .into_iter()
        .map(|m| EmissionBranch { weight: T::one(), state: state.exponent_class(m) })
        .collect()
}

struct DenseDensity<T> {
    basis: Vec<OccupationKet>,
    rho: Vec<Complex<T>>,
    statistics: Statistics,
}

impl<T: Real> DenseDensity<T> {
    fn build(branches: &[EmissionBranch<T>]) -> Result<Self> {
        let statistics = branches
            .first()
            .map(|b| b.state.statistics())
            .ok_or_else(|| Error::InvalidArgument("no emission branches".into()))?;
        let mut basis: Vec<OccupationKet> = Vec::new();
        for b in branches {
            if b.state.statistics() != statistics {
                return Err(Error::StatisticsMismatch("boson", "fermion"));
            }
            if !(b.weight >= T::zero()) {
                return Err(Error::InvalidArgument("branch weights must be non-negative".into()));
            }
            if b.state.exponents().iter().any(|&m| m != 0) {
                return Err(Error::InvalidArgument("branch states must carry no pump tags".into()));
            }
            basis.extend(b.state.terms().map(|(k, _)| k.clone()));
        }
        basis.sort();
        basis.dedup();
        let n = basis.len();
        let mut rho = vec![Complex::zero(); n * n];
        for b in branches {
            let amps: Vec<Complex<T>> = basis.iter().map(|k| b.state.amplitude(k, 0)).collect();
            for r in 0..n {
                if amps[r].is_zero() {
                    continue;
                }
                for c in 0..n {
                    rho[r * n + c] += amps[r] * amps[c].conj() * b.weight;
                }
            }
        }
        Ok(Self { basis, rho, statistics })
    }

    /// `tr(ρ A† B† B A)` for annihilation combinations `A`, `B`.
    fn trace(&self, a: &[(ModeId, Complex<T>)], b: &[(ModeId, Complex<T>)]) -> T {
        let n = self.basis.len();
        let images: Vec<TaggedState<T>> = self
            .basis
            .iter()
            .map(|k| {
                let st = TaggedState::basis(self.statistics, k.clone(), 0).expect("basis ket is valid");
                st.annihilate_combination(b).annihilate_combination(a)
            })
            .collect();
        let mut acc = Complex::zero();
        for r in 0..n {
            for c in 0..n {
                let rho_cr = self.rho[c * n + r];
                if rho_cr.is_zero() {
                    continue;
                }
                let o_rc = averaged_pairing(&images[r], &images[c]).expect("same statistics");
                acc += rho_cr * o_rc;
            }
        }
        acc.re
    }
}

/// Mixed-state rate `tr{ρ a†(A) a†(B) a(B) a(A)}` with
/// `ρ = Σ w_i |ψ_i⟩⟨ψ_i|`.
pub fn density_matrix_rate<T: Real>(
    branches: &[EmissionBranch<T>],
    op_a: &DetectorOp<T>,
    op_b: &DetectorOp<T>,
) -> Result<RateResult<T>> {
    let dense = DenseDensity::build(branches)?;
    let mut support: Vec<ModeId> = dense.basis.iter().flat_map(|k| k.modes().copied()).collect();
    support.sort_unstable();
    support.dedup();
    check_modes(&support, [op_a, op_b])?;
    let rate = dense.trace(&op_a.composition, &op_b.composition);
    let mut background = T::zero();
    for (x, cx) in &op_a.composition {
        for (y, cy) in &op_b.composition {
            let one = Complex::one();
            background += cx.norm_sqr() * cy.norm_sqr() * dense.trace(&[(*x, one)], &[(*y, one)]);
        }
    }
    Ok(RateResult { rate, background, stderr: T::zero(), method: RateMethod::DensityMatrix })
}

/// Normalised PSIPI coincidence rate `1 + ½cos(φ_S' − φ_S + γ_I − γ_I')`.
pub fn two_mode_psipi_rate<T: Real>(phi_s: T, phi_s_prime: T, gamma_i: T, gamma_i_prime: T) -> T {
    T::one() + T::lit(0.5) * (phi_s_prime - phi_s + gamma_i - gamma_i_prime).cos()
}

/// Normalised rate of the standard two-photon interferometer, `1 − cos(φ_S + φ_S')`.
pub fn standard_two_photon_rate<T: Real>(phi_s: T, phi_s_prime: T) -> T {
    T::one() - (phi_s + phi_s_prime).cos()
}

/// Coherent two-photon state `(|S_u S_v⟩ + |S_c S_d⟩)/√2`.
pub fn standard_two_photon_state<T: Real>(statistics: Statistics) -> Result<TaggedState<T>> {
    let s = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
    let a = TaggedState::basis(statistics, OccupationKet::from_modes([paths::S_U, paths::S_V]), 0)?;
    let b = TaggedState::basis(statistics, OccupationKet::from_modes([paths::S_C, paths::S_D]), 0)?;
    Ok(a.add(&b)?.scale(s))
}

/// Contributing two-mode state after path identity with idler phases
/// `γ_I`, `γ_I'`.
pub fn psipi_state<T: Real>(statistics: Statistics, gamma_i: T, gamma_i_prime: T) -> Result<TaggedState<T>> {
    let psi = two_mode_contributing_state(statistics)?;
    apply_path_identity(&psi, &PathIdentityMap::two_mode(gamma_i, gamma_i_prime))
}

/// Fringe visibility `(max − min)/(max + min)`.
pub fn visibility<T: Real>(samples: &[T]) -> T {
    let max = samples.iter().copied().fold(T::neg_infinity(), T::max);
    let min = samples.iter().copied().fold(T::infinity(), T::min);
    (max - min) / (max + min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLaw {
    /// Common offset uniform on `[−A, A]`.
    Uniform,
    /// Common offset normal with standard deviation `A`.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameNoiseConfig<T> {
    pub amplitude: T,
    pub n_frames: usize,
    pub seed: u64,
    pub law: NoiseLaw,
    pub scan_points: usize,
    /// Remove the individual-emission background from the PSIPI fringe.
    pub subtract_background: bool,
}

impl<T: Real> FrameNoiseConfig<T> {
    pub fn new(amplitude: T, n_frames: usize, seed: u64) -> Self {
        Self {
            amplitude,
            n_frames,
            seed,
            law: NoiseLaw::Uniform,
            scan_points: 64,
            subtract_background: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameNoiseOutcome<T> {
    pub visibility_psipi: T,
    pub visibility_standard: T,
    /// Frame-averaged PSIPI rate against `γ_I − γ_I'`.
    pub psipi_fringe: Vec<T>,
    /// Frame-averaged comparator rate against the reference phase.
    pub standard_fringe: Vec<T>,
}

/// Accumulate fringes over frames whose propagation phase drifts by a
/// common random offset `δ` applied to both signal arms.
pub fn frame_noise_experiment<T: Real>(cfg: &FrameNoiseConfig<T>) -> Result<FrameNoiseOutcome<T>> {
    if cfg.n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be at least 1".into()));
    }
    if cfg.scan_points < MIN_SCAN_POINTS {
        return Err(Error::InvalidArgument(format!("fringe scan needs at least {MIN_SCAN_POINTS} points")));
    }
    if !(cfg.amplitude >= T::zero()) {
        return Err(Error::InvalidArgument("noise amplitude must be non-negative".into()));
    }
    let amp = cfg.amplitude.as_f64();
    let mut rng = stream_rng(cfg.seed, streams::FRAME_NOISE);
    let gauss = Normal::new(0.0, amp.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let scan: Vec<T> =
        (0..cfg.scan_points).map(|j| T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(cfg.scan_points)).collect();
    let mut psipi = vec![T::zero(); cfg.scan_points];
    let mut standard = vec![T::zero(); cfg.scan_points];
    for _ in 0..cfg.n_frames {
        let delta = match cfg.law {
            _ if amp == 0.0 => 0.0,
            NoiseLaw::Uniform => rng.random_range(-amp..=amp),
            NoiseLaw::Gaussian => gauss.sample(&mut rng),
        };
        let d = T::lit(delta);
        for (j, theta) in scan.iter().enumerate() {
            psipi[j] += two_mode_psipi_rate(d, d, *theta, T::zero());
            standard[j] += standard_two_photon_rate(d + *theta, d);
        }
    }
    let n = T::from_usize_lossy(cfg.n_frames);
    let bg = if cfg.subtract_background { T::lit(INDIVIDUAL_EMISSION_BACKGROUND) } else { T::zero() };
    for v in psipi.iter_mut() {
        *v = *v / n - bg;
    }
    for v in standard.iter_mut() {
        *v = *v / n;
    }
    Ok(FrameNoiseOutcome {
        visibility_psipi: visibility(&psipi),
        visibility_standard: visibility(&standard),
        psipi_fringe: psipi,
        standard_fringe: standard,
    })
}
