//! Phase retrieval from coincidence maps, unwrapping and gauge alignment.
//!
//! A noiseless map holds `cos[α(r) − α(r')]`, so the cosine matrix is
//! `c cᵀ + s sᵀ` with `c = cos α`, `s = sin α`. Its two leading
//! eigenvectors span `{c, s}` and give α up to a global rotation and
//! reflection, which is fixed by `α(r₀) = 0` and a sign convention.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{CoincidenceMap, ModeGrid, PhaseField};
use crate::rng::stream_rng;
use crate::scalar::{wrap_phase, Real};

/// Third-to-first eigenvalue ratio above which the map is reported as not
/// cleanly rank 2.
pub const RANK2_TOLERANCE: f64 = 1e-6;

/// Largest `|sin δ|` between two references that counts as degenerate.
pub const REFERENCE_DEGENERACY: f64 = 1e-3;

/// Off-diagonal spread below which a map carries no object information.
pub const CONSTANT_MAP_SPREAD: f64 = 1e-12;

const BLOCK: usize = 4;
const MAX_ITERATIONS: usize = 500;
const DENSE_LIMIT: usize = 64;
const START_SEED: u64 = 0x5eed_0f_1a_7e;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMethod {
    Rank2,
    Quadrature,
}

/// Retrieved phase in `(−π, π]` with per-pixel confidence.
#[derive(Clone, Debug, PartialEq)]
pub struct WrappedField<T> {
    pub field: PhaseField<T>,
    pub quality: Vec<T>,
    /// `λ₃/λ₁` of the cosine matrix (rank-2 method only).
    pub rank_ratio: Option<T>,
    pub iterations: usize,
    pub method: RetrievalMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub rms_error: f64,
    pub offset_applied: f64,
    pub sign_flipped: bool,
    pub pixels_processed: usize,
    pub iterations: usize,
    pub rank_ratio: Option<f64>,
    pub method: RetrievalMethod,
}

fn fringe_sign<T: Real>(map: &CoincidenceMap<T>) -> f64 {
    f64::from(map.meta.ports.fringe_sign())
}

fn check_observable<T: Real>(map: &CoincidenceMap<T>) -> Result<()> {
    let n = map.n_pixels();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in 0..n {
        for q in 0..n {
            if p != q {
                let v = map.get(p, q).as_f64();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if hi - lo < CONSTANT_MAP_SPREAD {
        return Err(Error::Unobservable("coincidence map is constant off the diagonal".into()));
    }
    Ok(())
}

/// Symmetrised `cos[α(r) − α(r')]` estimate with unit diagonal.
fn cosine_matrix<T: Real>(map: &CoincidenceMap<T>) -> DMatrix<f64> {
    let n = map.n_pixels();
    let s = fringe_sign(map);
    DMatrix::from_fn(n, n, |p, q| {
        if p == q {
            1.0
        } else {
            s * (map.get(p, q).as_f64() + map.get(q, p).as_f64() - 2.0)
        }
    })
}

struct Eigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    iterations: usize,
}

fn sorted_eigen(t: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Leading `BLOCK` eigenpairs of a symmetric matrix, descending.
fn leading_eigenpairs(m: &DMatrix<f64>) -> Eigen {
    let n = m.nrows();
    if n <= DENSE_LIMIT {
        let (values, vectors) = sorted_eigen(m.clone());
        return Eigen { values, vectors, iterations: 1 };
    }
    let mut rng = stream_rng(START_SEED, 0);
    let mut x = DMatrix::from_fn(n, BLOCK, |_, _| rng.random::<f64>() - 0.5);
    let mut values = vec![0.0; BLOCK];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let y = m * &x;
        let q = y.qr().q();
        let t = q.transpose() * m * &q;
        let (vals, rot) = sorted_eigen((&t + t.transpose()) * 0.5);
        x = &q * rot;
        values = vals;
        let scale = values[0].abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for j in 0..2 {
            let v: DVector<f64> = x.column(j).into_owned();
            let r = m * &v - &v * values[j];
            worst = worst.max(r.norm() / scale);
        }
        if worst <= 1e-13 * (n as f64).sqrt() {
            break;
        }
    }
    Eigen { values, vectors: x, iterations }
}

/// `wrap(α − α(r₀))`, then negate if the first non-zero step along x is
/// negative.
fn fix_gauge(values: &mut [f64], grid: &ModeGrid, r0: usize) -> bool {
    let base = values[r0];
    for v in values.iter_mut() {
        *v = wrap_phase(*v - base);
    }
    let mut flip = false;
    for p in 0..values.len() {
        let (ix, _) = grid.coords(p);
        if ix + 1 >= grid.nx {
            continue;
        }
        let d = wrap_phase(values[p + 1] - values[p]);
        if d.abs() > 1e-9 {
            flip = d < 0.0;
            break;
        }
    }
    if flip {
        for v in values.iter_mut() {
            *v = wrap_phase(-*v);
        }
    }
    flip
}

fn check_reference(grid: &ModeGrid, r: usize) -> Result<()> {
    if r >= grid.n_pixels() {
        return Err(Error::InvalidArgument(format!("reference pixel {r} outside a {}-pixel grid", grid.n_pixels())));
    }
    Ok(())
}

fn to_field<T: Real>(grid: ModeGrid, values: &[f64]) -> Result<PhaseField<T>> {
    PhaseField::new(grid, values.iter().map(|v| T::lit(*v)).collect())
}

/// Rank-2 eigenfactorisation of the cosine matrix. `reference` defaults to
/// the grid centre.
pub fn rank2_phase_factorization<T: Real>(map: &CoincidenceMap<T>, reference: Option<usize>) -> Result<WrappedField<T>> {
    let grid = *map.grid();
    let r0 = reference.unwrap_or_else(|| grid.center_pixel());
    check_reference(&grid, r0)?;
    check_observable(map)?;
    let m = cosine_matrix(map);
    let n = m.nrows();
    let eig = leading_eigenpairs(&m);
    let l1 = eig.values[0];
    let w1 = eig.values[0].max(0.0).sqrt();
    let w2 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0).sqrt();
    let mut alpha: Vec<f64> =
        (0..n).map(|i| (w2 * eig.vectors[(i, 1)]).atan2(w1 * eig.vectors[(i, 0)])).collect();
    fix_gauge(&mut alpha, &grid, r0);

    let rank_ratio = eig.values.get(2).map(|l3| l3.abs() / l1);
    if let Some(r) = rank_ratio {
        if r > RANK2_TOLERANCE {
            log::warn!("cosine matrix is not cleanly rank 2: lambda3/lambda1 = {r:.3e}");
        }
    }
    let quality: Vec<T> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    let d = m[(i, j)] - (alpha[i] - alpha[j]).cos();
                    acc += d * d;
                }
            }
            T::lit(1.0 / (acc / (n - 1) as f64).sqrt().max(1e-15))
        })
        .collect();
    Ok(WrappedField {
        field: to_field(grid, &alpha)?,
        quality,
        rank_ratio: rank_ratio.map(T::lit),
        iterations: eig.iterations,
        method: RetrievalMethod::Rank2,
    })
}

/// Pixel-wise inversion against two references `r0`, `r1` whose phase
/// difference is the positive arccos of their map entry.
pub fn quadrature_two_reference<T: Real>(map: &CoincidenceMap<T>, r0: usize, r1: usize) -> Result<WrappedField<T>> {
    let grid = *map.grid();
    check_reference(&grid, r0)?;
    check_reference(&grid, r1)?;
    let s = fringe_sign(map);
    let delta_to = |i: usize, r: usize| {
        if i == r {
            return 0.0;
        }
        (s * 2.0 * (map.get(i, r).as_f64() - 1.0)).clamp(-1.0, 1.0).acos()
    };
    let delta = delta_to(r1, r0);
    if r0 == r1 || delta.sin().abs() < REFERENCE_DEGENERACY {
        return Err(Error::DegenerateReference(r0, r1));
    }
    let n = grid.n_pixels();
    let mut alpha = vec![0.0; n];
    let mut quality = vec![T::zero(); n];
    for i in 0..n {
        let d0 = delta_to(i, r0);
        let d1 = delta_to(i, r1);
        let err = |sign: f64| (wrap_phase(sign * d0 - delta).abs() - d1).abs();
        let (ep, em) = (err(1.0), err(-1.0));
        alpha[i] = if ep <= em { d0 } else { -d0 };
        quality[i] = T::lit((ep - em).abs());
    }
    Ok(WrappedField {
        field: to_field(grid, &alpha)?,
        quality,
        rank_ratio: None,
        iterations: 1,
        method: RetrievalMethod::Quadrature,
    })
}

/// Wrapped second-difference magnitude per pixel, using whichever of the
/// horizontal, vertical and diagonal neighbour pairs exist.
fn second_differences(w: &[f64], grid: &ModeGrid) -> Vec<f64> {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let at = |x: isize, y: isize| -> Option<f64> {
        (x >= 0 && y >= 0 && x < nx && y < ny).then(|| w[(y * nx + x) as usize])
    };
    let mut out = vec![0.0; w.len()];
    for y in 0..ny {
        for x in 0..nx {
            let c = at(x, y).unwrap();
            let mut acc = 0.0;
            for (dx, dy) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                if let (Some(a), Some(b)) = (at(x - dx, y - dy), at(x + dx, y + dy)) {
                    let d = wrap_phase(a - c) - wrap_phase(c - b);
                    acc += d * d;
                }
            }
            out[(y * nx + x) as usize] = acc.sqrt();
        }
    }
    out
}

/// Reliability-sorted unwrapping: edges between neighbours are merged in
/// order of decreasing summed reliability, each merge shifting the
/// smaller group by a multiple of 2π.
pub fn unwrap_2d<T: Real>(wrapped: &PhaseField<T>) -> PhaseField<T> {
    let grid = wrapped.grid;
    let w: Vec<f64> = wrapped.values.iter().map(|v| v.as_f64()).collect();
    let n = w.len();
    let reliability: Vec<f64> = second_differences(&w, &grid).iter().map(|d| 1.0 / (d + 1e-12)).collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * n);
    for p in 0..n {
        if grid.coords(p).0 + 1 < grid.nx {
            edges.push((p, p + 1));
        }
    }
    for p in 0..n {
        if p + grid.nx < n {
            edges.push((p, p + grid.nx));
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let key = |e: usize| reliability[edges[e].0] + reliability[edges[e].1];
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));

    let mut group: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|p| vec![p]).collect();
    let mut k = vec![0i64; n];
    for e in order {
        let (a, b) = edges[e];
        let (ga, gb) = (group[a], group[b]);
        if ga == gb {
            continue;
        }
        let va = w[a] + TAU * k[a] as f64;
        let vb = w[b] + TAU * k[b] as f64;
        let shift = ((va - vb) / TAU).round() as i64;
        let (keep, absorb, delta) =
            if members[gb].len() <= members[ga].len() { (ga, gb, shift) } else { (gb, ga, -shift) };
        let moved = std::mem::take(&mut members[absorb]);
        for &p in &moved {
            k[p] += delta;
            group[p] = keep;
        }
        members[keep].extend(moved);
    }
    let values = (0..n).map(|p| T::lit(w[p] + TAU * k[p] as f64)).collect();
    PhaseField { grid, values }
}

/// Best gauge `σ·rec + c` against `truth` over `σ ∈ {±1}` and real `c`.
pub fn align_and_rms<T: Real>(reconstructed: &PhaseField<T>, truth: &PhaseField<T>) -> Result<ReconstructionReport> {
    let (gr, gt) = (reconstructed.grid, truth.grid);
    if (gr.dimension, gr.nx, gr.ny) != (gt.dimension, gt.nx, gt.ny) {
        return Err(Error::ShapeMismatch(format!(
            "reconstruction is {}x{}, truth is {}x{}",
            gr.nx, gr.ny, gt.nx, gt.ny
        )));
    }
    let n = truth.len() as f64;
    let fit = |sigma: f64| {
        let c = reconstructed.values.iter().zip(&truth.values).map(|(r, t)| t.as_f64() - sigma * r.as_f64()).sum::<f64>() / n;
        let ms = reconstructed
            .values
            .iter()
            .zip(&truth.values)
            .map(|(r, t)| {
                let d = sigma * r.as_f64() + c - t.as_f64();
                d * d
            })
            .sum::<f64>()
            / n;
        (ms.sqrt(), c)
    };
    let (rms_p, c_p) = fit(1.0);
    let (rms_m, c_m) = fit(-1.0);
    let flipped = rms_m < rms_p;
    let (rms, c) = if flipped { (rms_m, c_m) } else { (rms_p, c_p) };
    Ok(ReconstructionReport {
        rms_error: rms,
        offset_applied: c,
        sign_flipped: flipped,
        pixels_processed: truth.len(),
        iterations: 0,
        rank_ratio: None,
        method: RetrievalMethod::Rank2,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction<T> {
    pub wrapped: WrappedField<T>,
    pub unwrapped: PhaseField<T>,
}

/// Rank-2 retrieval followed by unwrapping. Single-crystal maps carry
/// `2α`, which is halved after unwrapping.
pub fn reconstruct<T: Real>(map: &CoincidenceMap<T>, reference: Option<usize>) -> Result<Reconstruction<T>> {
    let wrapped = rank2_phase_factorization(map, reference)?;
    let mut unwrapped = unwrap_2d(&wrapped.field);
    if map.meta.herzog {
        unwrapped = unwrapped.scaled(T::lit(0.5));
    }
    Ok(Reconstruction { wrapped, unwrapped })
}

/// Fill iteration and rank details from a retrieval into an alignment report.
pub fn report_for<T: Real>(rec: &Reconstruction<T>, truth: &PhaseField<T>) -> Result<ReconstructionReport> {
    let mut report = align_and_rms(&rec.unwrapped, truth)?;
    report.iterations = rec.wrapped.iterations;
    report.rank_ratio = rec.wrapped.rank_ratio.map(|r| r.as_f64());
    report.method = rec.wrapped.method;
    Ok(report)
}

/// Largest `|wrap(a − b)|` over two fields.
pub fn max_wrapped_deviation<T: Real>(a: &PhaseField<T>, b: &PhaseField<T>) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| wrap_phase(x.as_f64() - y.as_f64()).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::imaging::{perfect_correlation_map, MapMetadata, PortPair};

    fn field(values: Vec<f64>) -> PhaseField<f64> {
        PhaseField::new(ModeGrid::one_d(values.len()).unwrap(), values).unwrap()
    }

    #[test]
    fn three_pixel_example() {
        let truth = field(vec![0.0, PI / 2.0, PI]);
        let map = perfect_correlation_map(&truth);
        let m = cosine_matrix(&map);
        let expect = [[1.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        let w = rank2_phase_factorization(&map, Some(0)).unwrap();
        assert!(max_wrapped_deviation(&w.field, &truth) < 1e-12);
    }

    #[test]
    fn flat_object_is_unobservable() {
        let map = perfect_correlation_map(&field(vec![0.4; 8]));
        assert!(matches!(rank2_phase_factorization(&map, None), Err(Error::Unobservable(_))));
    }

    #[test]
    fn quadrature_hand_case() {
        let truth = field(vec![0.0, PI / 2.0, PI / 4.0]);
        let map = perfect_correlation_map(&truth);
        let w = quadrature_two_reference(&map, 0, 1).unwrap();
        assert!((w.field.values[2] - PI / 4.0).abs() < 1e-12);
        assert_eq!(w.field.values[0], 0.0);
        let flat = perfect_correlation_map(&field(vec![0.0, 0.0, 1.0]));
        assert!(matches!(quadrature_two_reference(&flat, 0, 1), Err(Error::DegenerateReference(0, 1))));
    }

    #[test]
    fn split_port_map_inverts_with_opposite_sign() {
        let truth = field(vec![0.0, 0.4, 1.1, 2.0, 2.2]);
        let vals: Vec<f64> = (0..25).map(|k| 1.0 - 0.5 * (truth.values[k / 5] - truth.values[k % 5]).cos()).collect();
        let map = CoincidenceMap::new(vals, MapMetadata::new(truth.grid, PortPair::BBPrime, "delta")).unwrap();
        let w = rank2_phase_factorization(&map, Some(0)).unwrap();
        assert!(max_wrapped_deviation(&w.field, &truth) < 1e-12);
    }

    #[test]
    fn unwrap_ramp_and_small_field() {
        let ramp = field((0..64).map(|i| 0.5 * i as f64).collect());
        let un = unwrap_2d(&ramp.wrapped());
        let k = ((un.values[0] - ramp.values[0]) / TAU).round();
        for (u, t) in un.values.iter().zip(&ramp.values) {
            assert!((u - t - TAU * k).abs() < 1e-12);
        }
        let small = field(vec![0.1, 0.5, -0.3, 1.2, 0.9]);
        assert_eq!(unwrap_2d(&small), small);
    }

    #[test]
    fn alignment_examples() {
        let truth = field(vec![0.0, 1.0, 3.0, -2.0]);
        let shifted = truth.offset(1.7);
        let r = align_and_rms(&shifted, &truth).unwrap();
        assert!(r.rms_error < 1e-15 && (r.offset_applied + 1.7).abs() < 1e-15 && !r.sign_flipped);
        let neg = truth.scaled(-1.0);
        let r = align_and_rms(&neg, &truth).unwrap();
        assert!(r.rms_error < 1e-15 && r.sign_flipped);
        assert!(align_and_rms(&field(vec![0.0; 3]), &truth).is_err());
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let n = 80;
        let truth = field((0..n).map(|i| 0.002 * (i * i) as f64).collect());
        let map = perfect_correlation_map(&truth);
        let m = cosine_matrix(&map);
        let it = leading_eigenpairs(&m);
        let (dense, _) = sorted_eigen(m.clone());
        for j in 0..2 {
            assert!((it.values[j] - dense[j]).abs() < 1e-9 * dense[0]);
        }
        let w = rank2_phase_factorization(&map, Some(0)).unwrap();
        let gauge = truth.offset(-truth.values[0]);
        assert!(max_wrapped_deviation(&w.field, &gauge) < 1e-9);
    }
}
