//! Independent reference computations used to cross-check the fast paths:
//! direct quadruple sums for multimode maps, first-principles Fock
//! simulation of small imaging grids, quadrature for the phase-matching
//! integral and dense-matrix ladder operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fock::{ModeId, OccupationKet, Statistics, TaggedState};
use crate::imaging::{CoincidenceMap, CorrelationModel, MapMetadata, PhaseObject, PortPair};
use crate::interferometer::DetectorOp;
use crate::scalar::{phasor, Real};
use crate::spdc::{
    apply_path_identity, build_two_source_state, c4_from_c2, BuildOptions, PathIdentityMap, PhaseMatchingParams,
    SourceSpec,
};

/// Normalised `(s, t)` map entry from the explicit double sum over idler
/// momenta of the symmetrised four-photon amplitudes.
pub fn direct_pair_value<T: Real>(table: &[Complex<T>], alpha: &[T], s: usize, t: usize, ports: PortPair) -> T {
    let n = alpha.len();
    let c = |sig: usize, idl: usize| table[sig * n + idl];
    let (mut single, mut pair, mut fringe) = (T::zero(), T::zero(), T::zero());
    let sign = T::lit(f64::from(ports.fringe_sign()));
    for i1 in 0..n {
        for i2 in 0..n {
            let a = c4_from_c2(c(s, i1), c(t, i2));
            let b = c4_from_c2(c(t, i1), c(s, i2));
            let plus = (a + b).norm_sqr();
            let joint = if ports == PortPair::BBPrime { (a - b).norm_sqr() } else { plus };
            single += plus;
            pair += joint;
            fringe += joint * (alpha[i1] - alpha[i2]).cos();
        }
    }
    let two = T::lit(2.0);
    let background = two * single + two * pair;
    if background > T::zero() {
        (background + two * sign * fringe) / background
    } else {
        T::one()
    }
}

/// Whole map by direct summation; `O(N⁴)`, small grids only.
pub fn coincidence_map_direct<T: Real>(
    object: &PhaseObject<T>,
    corr: &CorrelationModel<T>,
    ports: PortPair,
) -> Result<CoincidenceMap<T>> {
    let table = corr.table(&object.grid)?;
    let n = object.grid.n_pixels();
    let mut values = vec![T::zero(); n * n];
    for s in 0..n {
        for t in 0..n {
            values[s * n + t] = direct_pair_value(&table, &object.values, s, t, ports);
        }
    }
    CoincidenceMap::new(values, MapMetadata::new(object.grid, ports, corr.name()))
}

/// Raw `(b or b', b or b')` coincidence probability at pixels `(s, t)`
/// from the full two-source Fock state with unit gain, momentum-mode path
/// identity with phases `alpha`, and flat signal phase.
pub fn fock_multimode_rate<T: Real>(
    table: &[Complex<T>],
    alpha: &[T],
    s: usize,
    t: usize,
    ports: PortPair,
    statistics: Statistics,
) -> Result<T> {
    let n = alpha.len();
    let gain = Complex::one();
    let src1 = SourceSpec::multimode(1, gain, table, n)?;
    let src2 = SourceSpec::multimode(2, gain, table, n)?;
    let state = build_two_source_state(&src1, &src2, BuildOptions::with_statistics(statistics))?;
    let state = apply_path_identity(&state, &PathIdentityMap::multimode(alpha))?;
    let zero = T::zero();
    let (a, b) = match ports {
        PortPair::BB => (DetectorOp::b(s as i64, zero), DetectorOp::b(t as i64, zero)),
        PortPair::BPrimeBPrime => (DetectorOp::b_prime(s as i64, zero), DetectorOp::b_prime(t as i64, zero)),
        PortPair::BBPrime => (DetectorOp::b(s as i64, zero), DetectorOp::b_prime(t as i64, zero)),
    };
    Ok(crate::interferometer::coincidence_rate(&state, &a, &b)?.rate)
}

fn simpson_exp<T: Real>(k: T, lo: T, hi: T, intervals: usize) -> Complex<T> {
    let m = intervals + intervals % 2;
    let h = (hi - lo) / T::from_usize_lossy(m);
    let mut acc = Complex::zero();
    for j in 0..=m {
        let w = if j == 0 || j == m {
            T::one()
        } else if j % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        acc += phasor(k * (lo + h * T::from_usize_lossy(j))) * w;
    }
    acc * (h / T::lit(3.0))
}

/// Time-and-volume average of the phase mismatch by composite Simpson
/// quadrature, `(1/τV) ∫dt ∫_box d³r e^{iΔω t} e^{−iΔk·r}`, times the
/// prefactor. The integrand separates, so each axis is integrated alone.
pub fn c2_quadrature<T: Real>(p: &PhaseMatchingParams<T>, intervals: usize) -> Complex<T> {
    let half = T::lit(0.5);
    let mut acc = simpson_exp(p.delta_omega, T::zero(), p.tau, intervals) / p.tau;
    for m in 0..3 {
        let (c, l) = (p.center[m], p.lengths[m]);
        acc = acc * simpson_exp(-p.delta_k[m], c - l * half, c + l * half, intervals) / l;
    }
    p.prefactor * acc
}

/// Finite Fock space over an ordered list of modes with explicit ladder
/// matrices: Jordan-Wigner strings for fermions, truncated Kronecker
/// products for bosons.
pub struct DenseFockSpace {
    modes: Vec<ModeId>,
    statistics: Statistics,
    cutoff: u32,
}

impl DenseFockSpace {
    pub fn new(mut modes: Vec<ModeId>, statistics: Statistics, cutoff: u32) -> Result<Self> {
        modes.sort();
        modes.dedup();
        let cutoff = if statistics == Statistics::Fermion { 2 } else { cutoff };
        if modes.is_empty() || cutoff < 2 || (cutoff as f64).powi(modes.len() as i32) > 4096.0 {
            return Err(Error::InvalidArgument("dense Fock space must have 1..=4096 states".into()));
        }
        Ok(Self { modes, statistics, cutoff })
    }

    pub fn dim(&self) -> usize {
        (self.cutoff as usize).pow(self.modes.len() as u32)
    }

    fn occupations(&self, index: usize) -> Vec<u32> {
        let c = self.cutoff as usize;
        (0..self.modes.len()).map(|m| ((index / c.pow(m as u32)) % c) as u32).collect()
    }

    fn index_of(&self, occ: &[u32]) -> usize {
        let c = self.cutoff as usize;
        occ.iter().enumerate().map(|(m, n)| *n as usize * c.pow(m as u32)).sum()
    }

    pub fn annihilation(&self, mode: &ModeId) -> Result<DMatrix<Complex<f64>>> {
        let m = self.modes.binary_search(mode).map_err(|_| Error::ModeMismatch(mode.to_string()))?;
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        for col in 0..d {
            let mut occ = self.occupations(col);
            let n = occ[m];
            if n == 0 {
                continue;
            }
            let amp = match self.statistics {
                Statistics::Boson => (n as f64).sqrt(),
                Statistics::Fermion => {
                    let before: u32 = occ[..m].iter().sum();
                    if before % 2 == 0 { 1.0 } else { -1.0 }
                }
            };
            occ[m] -= 1;
            a[(self.index_of(&occ), col)] = Complex::new(amp, 0.0);
        }
        Ok(a)
    }

    pub fn creation(&self, mode: &ModeId) -> Result<DMatrix<Complex<f64>>> {
        Ok(self.annihilation(mode)?.adjoint())
    }

    /// Dense vector of the untagged (exponent-0) part of `state`; kets that
    /// do not fit the space are an error.
    pub fn vector(&self, state: &TaggedState<f64>) -> Result<DVector<Complex<f64>>> {
        let mut v = DVector::zeros(self.dim());
        for (ket, amp) in state.terms() {
            if amp.pump_exponent != 0 {
                continue;
            }
            v[self.ket_index(ket)?] += amp.value;
        }
        Ok(v)
    }

    fn ket_index(&self, ket: &OccupationKet) -> Result<usize> {
        let mut occ = vec![0u32; self.modes.len()];
        for (mode, n) in ket.iter() {
            let m = self.modes.binary_search(mode).map_err(|_| Error::ModeMismatch(mode.to_string()))?;
            if n >= self.cutoff {
                return Err(Error::InvalidArgument(format!("occupation {n} exceeds the cutoff")));
            }
            occ[m] = n;
        }
        Ok(self.index_of(&occ))
    }

    pub fn basis_state(&self, index: usize) -> Result<TaggedState<f64>> {
        let occ = self.occupations(index);
        let ket = OccupationKet::from_counts(self.modes.iter().copied().zip(occ));
        TaggedState::basis(self.statistics, ket, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{ModeGrid, PhaseField};
    use crate::spdc::c2_sinc_model;

    #[test]
    fn quadrature_matches_sinc_model() {
        let p = PhaseMatchingParams::new(
            Complex::new(0.7, -0.2),
            3.0e12,
            1.3e-12,
            [2.0e4, -1.1e4, 5.0e3],
            [1.0e-4, 2.0e-4, 3.0e-4],
            [1.0e-5, 0.0, -2.0e-5],
        )
        .unwrap();
        let a = c2_sinc_model(&p);
        let b = c2_quadrature(&p, 4000);
        assert!((a - b).norm() < 1e-9 * a.norm());
    }

    #[test]
    fn direct_sum_delta_limit() {
        let g = ModeGrid::one_d(3).unwrap();
        let table = CorrelationModel::<f64>::Delta.table(&g).unwrap();
        let alpha = [0.0f64, 1.0, 2.5];
        assert!((direct_pair_value(&table, &alpha, 0, 1, PortPair::BB) - (1.0 + 0.5 * 1.0f64.cos())).abs() < 1e-15);
        assert!((direct_pair_value(&table, &alpha, 0, 2, PortPair::BBPrime) - (1.0 - 0.5 * 2.5f64.cos())).abs() < 1e-15);
        assert!((direct_pair_value(&table, &alpha, 1, 1, PortPair::BB) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn fock_engine_matches_pair_sums() {
        let g = ModeGrid::one_d(3).unwrap();
        let table = CorrelationModel::Gaussian { sigma: 0.9 }.table(&g).unwrap();
        let alpha = [0.3f64, -1.2, 2.0];
        let obj = PhaseField::new(g, alpha.to_vec()).unwrap();
        for ports in [PortPair::BB, PortPair::BPrimeBPrime, PortPair::BBPrime] {
            for (s, t) in [(0, 1), (0, 2), (1, 1)] {
                let fock = fock_multimode_rate(&table, &alpha, s, t, ports, Statistics::Boson).unwrap();
                let sums = crate::imaging::factorized_sums(&table, &obj.values, s, t);
                let (raw, _) = sums.raw(ports);
                assert!((fock - raw).abs() < 1e-12 * raw, "{ports:?} ({s},{t}): fock {fock} vs {raw}");
            }
        }
    }

    #[test]
    fn dense_ladder_agrees_with_sparse() {
        let modes: Vec<ModeId> = (0..3).map(|k| ModeId::signal_k(1, k)).collect();
        for stat in [Statistics::Boson, Statistics::Fermion] {
            let space = DenseFockSpace::new(modes.clone(), stat, 3).unwrap();
            for (mi, mode) in modes.iter().enumerate() {
                let a = space.annihilation(mode).unwrap();
                let ad = space.creation(mode).unwrap();
                for idx in 0..space.dim() {
                    let st = space.basis_state(idx).unwrap();
                    let v = space.vector(&st).unwrap();
                    let down = space.vector(&st.annihilate(*mode)).unwrap();
                    assert!((&a * &v - down).norm() < 1e-12, "{stat:?} mode {mi}");
                    let up = st.create(*mode);
                    if up.terms().all(|(k, _)| k.iter().all(|(_, n)| n < 3)) {
                        let upv = space.vector(&up).unwrap();
                        assert!((&ad * &v - upv).norm() < 1e-12);
                    }
                }
            }
        }
    }
}
