//! Multimode imaging: phase objects on a pixel grid, correlation tables,
//! coincidence maps over camera pixel pairs, and shot noise.
//!
//! Pixel `p` of a 2D grid is `iy * nx + ix`. Signal momentum `k_S = p` is
//! imaged onto pixel `p` and idler momentum `k_I = p` illuminates object
//! pixel `p` (unit magnification).

use std::path::PathBuf;

use num_complex::Complex;
use num_traits::Zero;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scalar::{phasor, Real};
use crate::spdc::{c2_sinc_model, PhaseMatchingParams};

/// Largest pixel count for which non-delta correlation tables are allowed.
pub const MAX_CORRELATED_PIXELS: usize = 64;

pub const SIGNAL_WAVELENGTH_NM: f64 = 810.0;
pub const IDLER_WAVELENGTH_NM: f64 = 1550.0;

/// Phase span produced by the default object scale.
pub const DEFAULT_PHASE_SPAN: f64 = 6.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeGrid {
    pub dimension: u8,
    pub nx: usize,
    /// 1 for one-dimensional grids.
    pub ny: usize,
    /// Metres per pixel in the object plane.
    pub pixel_pitch: f64,
    pub magnification: f64,
}

impl ModeGrid {
    pub const DEFAULT_PITCH: f64 = 10e-6;

    pub fn one_d(n: usize) -> Result<Self> {
        let g = Self { dimension: 1, nx: n, ny: 1, pixel_pitch: Self::DEFAULT_PITCH, magnification: 1.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn two_d(nx: usize, ny: usize) -> Result<Self> {
        let g = Self { dimension: 2, nx, ny, pixel_pitch: Self::DEFAULT_PITCH, magnification: 1.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.dimension {
            1 => self.nx >= 2 && self.ny == 1,
            2 => self.nx >= 2 && self.ny >= 2,
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "grid must be 1D (n >= 2) or 2D (nx, ny >= 2), got dim {} {}x{}",
                self.dimension, self.nx, self.ny
            )));
        }
        if !(self.pixel_pitch > 0.0 && self.magnification > 0.0) {
            return Err(Error::InvalidArgument("pixel pitch and magnification must be positive".into()));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    /// Centred coordinates in pixel units, `i − (n−1)/2`.
    pub fn centered<T: Real>(&self, p: usize) -> (T, T) {
        let (ix, iy) = self.coords(p);
        let half = |n: usize| T::from_usize_lossy(n - 1) / T::lit(2.0);
        let y = if self.dimension == 1 { T::zero() } else { T::from_usize_lossy(iy) - half(self.ny) };
        (T::from_usize_lossy(ix) - half(self.nx), y)
    }

    /// Index of the pixel at (or just past) the grid centre.
    pub fn center_pixel(&self) -> usize {
        let iy = if self.dimension == 1 { 0 } else { self.ny / 2 };
        self.index(self.nx / 2, iy)
    }

    /// Object-plane position in metres (camera plane divided by `M`).
    pub fn position(&self, p: usize) -> (f64, f64) {
        let (x, y) = self.centered::<f64>(p);
        (x * self.pixel_pitch, y * self.pixel_pitch)
    }
}

/// Real phase grid in radians, row-major over `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField<T> {
    pub grid: ModeGrid,
    pub values: Vec<T>,
}

impl<T: Real> PhaseField<T> {
    pub fn new(grid: ModeGrid, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n_pixels() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("phase values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn offset(&self, c: T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| *v + c).collect() }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| *v * s).collect() }
    }

    pub fn wrapped(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| crate::scalar::wrap_phase(*v)).collect() }
    }
}

pub type PhaseObject<T> = PhaseField<T>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseObjectKind {
    /// `α = s·x²` on a 1D grid.
    Quadratic1d,
    /// `α = s·(x³ + y³)` on a 2D grid.
    Cubic2d,
    /// `α = s·x`, either dimension.
    LinearRamp,
    FromFile(PathBuf),
}

impl PhaseObjectKind {
    fn shape<T: Real>(&self, x: T, y: T) -> T {
        match self {
            Self::Quadratic1d => x * x,
            Self::Cubic2d => x * x * x + y * y * y,
            Self::LinearRamp => x,
            Self::FromFile(_) => T::zero(),
        }
    }
}

/// Scale that makes the object span `DEFAULT_PHASE_SPAN`.
pub fn default_scale<T: Real>(kind: &PhaseObjectKind, grid: &ModeGrid) -> T {
    let vals: Vec<T> = (0..grid.n_pixels())
        .map(|p| {
            let (x, y) = grid.centered::<T>(p);
            kind.shape(x, y)
        })
        .collect();
    let max = vals.iter().copied().fold(T::neg_infinity(), T::max);
    let min = vals.iter().copied().fold(T::infinity(), T::min);
    T::lit(DEFAULT_PHASE_SPAN) / (max - min)
}

/// Build a phase object; `scale = None` picks [`default_scale`]. For
/// `FromFile` the scale multiplies the stored field and the grid is taken
/// from the file.
pub fn make_phase_object<T: Real>(kind: &PhaseObjectKind, scale: Option<T>, grid: &ModeGrid) -> Result<PhaseObject<T>> {
    match kind {
        PhaseObjectKind::FromFile(path) => {
            let field = crate::io::read_grid::<T>(path)?;
            Ok(field.scaled(scale.unwrap_or_else(T::one)))
        }
        _ => {
            grid.validate()?;
            let need = match kind {
                PhaseObjectKind::Quadratic1d => Some(1),
                PhaseObjectKind::Cubic2d => Some(2),
                _ => None,
            };
            if let Some(d) = need {
                if grid.dimension != d {
                    return Err(Error::InvalidArgument(format!("{kind:?} needs a {d}D grid")));
                }
            }
            let s = scale.unwrap_or_else(|| default_scale(kind, grid));
            let values = (0..grid.n_pixels())
                .map(|p| {
                    let (x, y) = grid.centered::<T>(p);
                    s * kind.shape(x, y)
                })
                .collect();
            PhaseField::new(*grid, values)
        }
    }
}

/// Signal-idler joint amplitude `C(k_S, k_I)` over the pixel grid.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelationModel<T> {
    /// Perfect momentum correlation, `k_I = k_S`.
    Delta,
    /// `exp(−|r_S − r_I|²/2σ²)`, σ in pixels.
    Gaussian { sigma: T },
    /// Phase-matching sinc with transverse mismatch `(Δx·dk, Δy·dk, 0)`.
    SincProduct { params: PhaseMatchingParams<T>, dk: T },
    /// Explicit row-major `P×P` table indexed `[k_S * P + k_I]`.
    Table(Vec<Complex<T>>),
}

impl<T: Real> CorrelationModel<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::Gaussian { .. } => "gaussian",
            Self::SincProduct { .. } => "sinc_product",
            Self::Table(_) => "table",
        }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Self::Delta)
    }

    pub fn table(&self, grid: &ModeGrid) -> Result<Vec<Complex<T>>> {
        let n = grid.n_pixels();
        let delta = |p: usize, q: usize| {
            let (ax, ay) = grid.centered::<T>(p);
            let (bx, by) = grid.centered::<T>(q);
            (ax - bx, ay - by)
        };
        let table: Vec<Complex<T>> = match self {
            Self::Delta => (0..n * n).map(|k| if k / n == k % n { Complex::new(T::one(), T::zero()) } else { Complex::zero() }).collect(),
            Self::Gaussian { sigma } => {
                if !(*sigma > T::zero()) {
                    return Err(Error::InvalidArgument("gaussian width must be positive".into()));
                }
                (0..n * n)
                    .map(|k| {
                        let (dx, dy) = delta(k / n, k % n);
                        let v = (-(dx * dx + dy * dy) / (T::lit(2.0) * *sigma * *sigma)).exp();
                        Complex::new(v, T::zero())
                    })
                    .collect()
            }
            Self::SincProduct { params, dk } => (0..n * n)
                .map(|k| {
                    let (dx, dy) = delta(k / n, k % n);
                    let p = params.with_mismatch(params.delta_omega, [dx * *dk, dy * *dk, T::zero()]);
                    c2_sinc_model(&p)
                })
                .collect(),
            Self::Table(t) => {
                if t.len() != n * n {
                    return Err(Error::ShapeMismatch(format!("correlation table has {} entries, grid needs {}", t.len(), n * n)));
                }
                t.clone()
            }
        };
        if table.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("correlation table must be finite".into()));
        }
        if table.iter().all(|c| c.is_zero()) {
            return Err(Error::ZeroCorrelation);
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortPair {
    #[serde(rename = "bb")]
    BB,
    #[serde(rename = "b'b'")]
    BPrimeBPrime,
    #[serde(rename = "bb'")]
    BBPrime,
}

impl PortPair {
    /// `+1` for same-port detection (fringe `1 + ½cos`), `−1` for split.
    pub fn fringe_sign(&self) -> i8 {
        match self {
            Self::BB | Self::BPrimeBPrime => 1,
            Self::BBPrime => -1,
        }
    }
}

impl std::str::FromStr for PortPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bb" => Ok(Self::BB),
            "b'b'" | "bpbp" => Ok(Self::BPrimeBPrime),
            "bb'" | "bbp" => Ok(Self::BBPrime),
            _ => Err(Error::InvalidArgument(format!("unknown port pair `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapMetadata {
    pub grid: ModeGrid,
    pub ports: PortPair,
    /// Always `"background"`: every pair is divided by its phase-averaged rate.
    pub normalization: String,
    pub wavelength_signal_nm: f64,
    pub wavelength_idler_nm: f64,
    pub correlation: String,
    /// Fringe argument is `2Δα` (single-crystal geometry).
    pub herzog: bool,
    pub seed: Option<u64>,
    pub total_counts: Option<u64>,
}

impl MapMetadata {
    pub fn new(grid: ModeGrid, ports: PortPair, correlation: &str) -> Self {
        Self {
            grid,
            ports,
            normalization: "background".into(),
            wavelength_signal_nm: SIGNAL_WAVELENGTH_NM,
            wavelength_idler_nm: IDLER_WAVELENGTH_NM,
            correlation: correlation.into(),
            herzog: false,
            seed: None,
            total_counts: None,
        }
    }
}

/// Normalised coincidence rates over all ordered pixel pairs, `P×P`.
/// Diagonal entries are computed but carry no object information.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMap<T> {
    values: Vec<T>,
    pub meta: MapMetadata,
}

impl<T: Real> CoincidenceMap<T> {
    pub fn new(values: Vec<T>, meta: MapMetadata) -> Result<Self> {
        meta.grid.validate()?;
        let n = meta.grid.n_pixels();
        if values.len() != n * n {
            return Err(Error::ShapeMismatch(format!("map has {} values, grid needs {}", values.len(), n * n)));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidArgument("map values must be finite and non-negative".into()));
        }
        Ok(Self { values, meta })
    }

    pub fn n_pixels(&self) -> usize {
        self.meta.grid.n_pixels()
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.meta.grid
    }

    pub fn get(&self, p: usize, q: usize) -> T {
        self.values[p * self.n_pixels() + q]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_diagonal(p: usize, q: usize) -> bool {
        p == q
    }

    /// Slice `(x, y, x', y')` of a 2D map with `y = y' = row`: the
    /// `xx'`-plane cross-section.
    pub fn xx_cross_section(&self, row: usize) -> Vec<T> {
        let g = self.meta.grid;
        let mut out = Vec::with_capacity(g.nx * g.nx);
        for x in 0..g.nx {
            for xp in 0..g.nx {
                out.push(self.get(g.index(x, row), g.index(xp, row)));
            }
        }
        out
    }

    /// Slice with the second photon fixed at pixel `q`: the `xy`-plane
    /// cross-section.
    pub fn xy_cross_section(&self, q: usize) -> Vec<T> {
        (0..self.n_pixels()).map(|p| self.get(p, q)).collect()
    }
}

/// Sums over idler momenta entering the pair rate. All rates below are
/// relative; the `(b,b)` map is `1 + R/2Q` and `(b,b')` is `1 − R̃/(Q+Q̃)`.
#[derive(Clone, Copy, Debug)]
pub struct PairSums<T> {
    /// `Σ|A₁B₂ + A₂B₁|²`.
    pub q: T,
    /// `Σ|A₁B₂ − A₂B₁|²`.
    pub q_tilde: T,
    /// `Σ|A₁B₂ + A₂B₁|² cos(α₁ − α₂)`.
    pub r: T,
    /// `Σ|A₁B₂ − A₂B₁|² cos(α₁ − α₂)`.
    pub r_tilde: T,
}

impl<T: Real> PairSums<T> {
    /// Exact perfect-correlation sums: `A = δ(·, s)`, `B = δ(·, t)`.
    pub fn delta(same_pixel: bool, cos: T) -> Self {
        let two = T::lit(2.0);
        if same_pixel {
            Self { q: two * two, q_tilde: T::zero(), r: two * two, r_tilde: T::zero() }
        } else {
            Self { q: two, q_tilde: two, r: two * cos, r_tilde: two * cos }
        }
    }

    /// Returns `(rate, background)`, both in units where the phase-averaged
    /// individual-emission part of the `(b,b)` rate is `Q/2`.
    pub fn raw(&self, ports: PortPair) -> (T, T) {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        match ports {
            PortPair::BB | PortPair::BPrimeBPrime => (self.q / two + self.r / four, self.q / two),
            PortPair::BBPrime => {
                let bg = (self.q + self.q_tilde) / four;
                (bg - self.r_tilde / four, bg)
            }
        }
    }

    pub fn normalized(&self, ports: PortPair) -> T {
        let (rate, bg) = self.raw(ports);
        if bg > T::zero() {
            rate / bg
        } else {
            T::one()
        }
    }
}

struct FactorizedTable<T> {
    n: usize,
    table: Vec<Complex<T>>,
    phase: Vec<Complex<T>>,
    weight: Vec<T>,
    weighted_phase: Vec<Complex<T>>,
}

impl<T: Real> FactorizedTable<T> {
    fn new(table: Vec<Complex<T>>, alpha: &[T]) -> Self {
        let n = alpha.len();
        let phase: Vec<Complex<T>> = alpha.iter().map(|a| phasor(*a)).collect();
        let mut weight = vec![T::zero(); n];
        let mut weighted_phase = vec![Complex::zero(); n];
        for s in 0..n {
            for i in 0..n {
                let w = table[s * n + i].norm_sqr();
                weight[s] += w;
                weighted_phase[s] += phase[i] * w;
            }
        }
        Self { n, table, phase, weight, weighted_phase }
    }

    fn sums(&self, s: usize, t: usize) -> PairSums<T> {
        let n = self.n;
        let (a, b) = (&self.table[s * n..(s + 1) * n], &self.table[t * n..(t + 1) * n]);
        let mut x = Complex::<T>::zero();
        let mut v = Complex::<T>::zero();
        let mut v2 = Complex::<T>::zero();
        for i in 0..n {
            let ab = a[i] * b[i].conj();
            x += ab;
            v += ab * self.phase[i];
            v2 += ab.conj() * self.phase[i];
        }
        let two = T::lit(2.0);
        let ss = self.weight[s] * self.weight[t];
        let cross = two * (self.weighted_phase[s] * self.weighted_phase[t].conj()).re;
        let vv = v.norm_sqr() + v2.norm_sqr();
        PairSums {
            q: two * (ss + x.norm_sqr()),
            q_tilde: two * (ss - x.norm_sqr()),
            r: cross + vv,
            r_tilde: cross - vv,
        }
    }
}

/// Factorised sums for one pixel pair of an explicit table.
pub fn factorized_sums<T: Real>(table: &[Complex<T>], alpha: &[T], s: usize, t: usize) -> PairSums<T> {
    FactorizedTable::new(table.to_vec(), alpha).sums(s, t)
}

/// Fill a symmetric `n×n` map from a function of `p ≤ q`.
fn symmetric_fill<T: Real, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize, usize) -> T + Sync,
{
    let rows: Vec<Vec<T>> = (0..n).into_par_iter().map(|p| (p..n).map(|q| f(p, q)).collect()).collect();
    let mut out = vec![T::zero(); n * n];
    for (p, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            let q = p + j;
            out[p * n + q] = v;
            out[q * n + p] = v;
        }
    }
    out
}

fn map_for_phases<T: Real>(
    object: &PhaseObject<T>,
    alpha: &[T],
    corr: &CorrelationModel<T>,
    ports: PortPair,
) -> Result<Vec<T>> {
    let grid = object.grid;
    let n = grid.n_pixels();
    if let CorrelationModel::Delta = corr {
        return Ok(symmetric_fill(n, |p, q| PairSums::delta(p == q, (alpha[p] - alpha[q]).cos()).normalized(ports)));
    }
    if n > MAX_CORRELATED_PIXELS {
        return Err(Error::Unsupported(format!(
            "{} correlation needs at most {MAX_CORRELATED_PIXELS} pixels, grid has {n}",
            corr.name()
        )));
    }
    let fac = FactorizedTable::new(corr.table(&grid)?, alpha);
    Ok(symmetric_fill(n, |p, q| fac.sums(p, q).normalized(ports)))
}

/// Background-normalised coincidence map at the given output ports.
pub fn coincidence_map<T: Real>(
    object: &PhaseObject<T>,
    corr: &CorrelationModel<T>,
    ports: PortPair,
) -> Result<CoincidenceMap<T>> {
    let values = map_for_phases(object, &object.values, corr, ports)?;
    CoincidenceMap::new(values, MapMetadata::new(object.grid, ports, corr.name()))
}

/// Perfect-correlation closed form `1 + ½cos[α(r) − α(r')]`.
pub fn perfect_correlation_map<T: Real>(object: &PhaseObject<T>) -> CoincidenceMap<T> {
    let a = &object.values;
    let half = T::lit(0.5);
    let values = symmetric_fill(a.len(), |p, q| T::one() + half * (a[p] - a[q]).cos());
    CoincidenceMap::new(values, MapMetadata::new(object.grid, PortPair::BB, "delta"))
        .expect("closed form is finite and positive")
}

/// Single-crystal variant: the object phase enters twice.
pub fn herzog_map<T: Real>(object: &PhaseObject<T>, corr: &CorrelationModel<T>) -> Result<CoincidenceMap<T>> {
    let doubled: Vec<T> = object.values.iter().map(|a| *a * T::lit(2.0)).collect();
    let values = map_for_phases(object, &doubled, corr, PortPair::BB)?;
    let mut meta = MapMetadata::new(object.grid, PortPair::BB, corr.name());
    meta.herzog = true;
    CoincidenceMap::new(values, meta)
}

/// Poisson realisation with `total_counts` expected counts spread over the
/// unordered pixel pairs, returned in the map's rate units.
pub fn add_shot_noise<T: Real>(map: &CoincidenceMap<T>, total_counts: u64, seed: u64) -> Result<CoincidenceMap<T>> {
    if total_counts == 0 {
        return Err(Error::InvalidArgument("total_counts must be positive".into()));
    }
    let n = map.n_pixels();
    let mut sum = 0.0;
    for p in 0..n {
        for q in p..n {
            sum += map.get(p, q).as_f64();
        }
    }
    if !(sum > 0.0) {
        return Err(Error::InvalidArgument("map has no counts to resample".into()));
    }
    let scale = total_counts as f64 / sum;
    let mut rng = stream_rng(seed, streams::SHOT_NOISE);
    let mut values = vec![T::zero(); n * n];
    for p in 0..n {
        for q in p..n {
            let mean = map.get(p, q).as_f64() * scale;
            let counts = if mean > 0.0 {
                Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng)
            } else {
                0.0
            };
            let v = T::lit(counts / scale);
            values[p * n + q] = v;
            values[q * n + p] = v;
        }
    }
    let mut meta = map.meta.clone();
    meta.seed = Some(seed);
    meta.total_counts = Some(total_counts);
    CoincidenceMap::new(values, meta)
}
