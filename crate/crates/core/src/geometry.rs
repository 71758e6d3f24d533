//! Homogeneous Poisson point processes in `D` dimensions.
//!
//! Covers the closed-form law of the distance to the k-th nearest neighbour,
//! seeded sampling of point clouds in axis-aligned boxes, exact nearest-neighbour
//! queries (brute force or a uniform grid, which agree bit for bit) and a
//! candidate-sampling estimate of the largest empty ball.
//!
//! The metric is Euclidean throughout.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::rng::{self, LabRng};
use crate::stats::{self, MeanEstimate};

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = 8;

/// Clouds with at least this many points are searched through a [`GridIndex`].
pub const GRID_THRESHOLD: usize = 10_000;

/// Tail mass of the nearest-neighbour law allowed beyond the sampling margin.
const MARGIN_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid dimension {0}: expected 1..={MAX_DIMENSION}")]
    InvalidDimension(usize),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid density {0}: must be finite and non-negative")]
    InvalidDensity(f64),
    #[error("invalid nearest-neighbour law: {0}")]
    InvalidLaw(String),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {index} lies outside the region")]
    PointOutsideRegion { index: usize },
    #[error("need at least {needed} points, cloud has {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Axis-aligned box in `D` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || d > MAX_DIMENSION {
            return Err(GeometryError::InvalidDimension(d));
        }
        if upper.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                got: upper.len(),
            });
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(GeometryError::InvalidRegion(format!(
                    "axis {axis} has bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::cube(d, 0.0, 1.0)
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn shortest_side(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    /// Distance from an interior point to the nearest face; negative outside.
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| (x - l).min(u - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l + margin).collect(),
            self.upper.iter().map(|u| u - margin).collect(),
        )
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, l), u) in out.iter_mut().zip(&self.lower).zip(&self.upper) {
            *o = l + (u - l) * rng.random::<f64>();
        }
    }
}

/// A finite set of points inside a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    region: Region,
    coords: Vec<f64>,
    density: f64,
}

impl PointCloud {
    pub fn new(region: Region, points: &[Vec<f64>]) -> Result<Self> {
        let d = region.dimension();
        let mut coords = Vec::with_capacity(points.len() * d);
        for (index, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(GeometryError::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            if !region.contains(p) {
                return Err(GeometryError::PointOutsideRegion { index });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self::from_flat(region, coords))
    }

    fn from_flat(region: Region, coords: Vec<f64>) -> Self {
        let n = coords.len() / region.dimension();
        let density = n as f64 / region.volume();
        Self {
            region,
            coords,
            density,
        }
    }

    pub fn empty(region: Region) -> Self {
        Self::from_flat(region, Vec::new())
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn dimension(&self) -> usize {
        self.region.dimension()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Realized density `|points| / volume`.
    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dimension();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dimension())
    }

    /// A copy of this cloud with extra points added.
    pub fn with_points(&self, extra: &[Vec<f64>]) -> Result<Self> {
        let more = PointCloud::new(self.region.clone(), extra)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&more.coords);
        Ok(Self::from_flat(self.region.clone(), coords))
    }
}

/// Parameters of the k-th nearest-neighbour distance law of a Poisson process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnLaw {
    density: f64,
    dimension: usize,
    order: usize,
}

impl NnLaw {
    pub fn new(density: f64, dimension: usize, order: usize) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(GeometryError::InvalidLaw(format!(
                "density must be positive, got {density}"
            )));
        }
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(GeometryError::InvalidDimension(dimension));
        }
        if order == 0 {
            return Err(GeometryError::InvalidLaw("order k must be at least 1".into()));
        }
        Ok(Self {
            density,
            dimension,
            order,
        })
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `rho * C_d`, the expected count per unit `r^d`.
    fn intensity(&self) -> f64 {
        self.density * ball_volume_unchecked(self.dimension)
    }

    /// Same law at density `rho * factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.density * factor, self.dimension, self.order)
    }
}

/// `C_d = 2 pi / d * C_{d-2}`, starting from `C_0 = 1` and `C_1 = 2`; the
/// recurrence keeps full precision where a Lanczos `Gamma(d/2 + 1)` does not.
fn ball_volume_unchecked(d: usize) -> f64 {
    let mut c = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut m = 2 + d % 2;
    while m <= d {
        c *= 2.0 * PI / m as f64;
        m += 2;
    }
    c
}

/// Volume `C_d = pi^(d/2) / Gamma(d/2 + 1)` of the unit `d`-ball.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(GeometryError::InvalidDimension(d));
    }
    Ok(ball_volume_unchecked(d))
}

/// `E[R_k] = Gamma(k + 1/d) / (k-1)! * (rho C_d)^(-1/d)`.
pub fn expected_nn_distance(law: &NnLaw) -> f64 {
    let d = law.dimension as f64;
    let k = law.order as f64;
    let ratio = if law.order <= 20 {
        gamma(k + 1.0 / d) / gamma(k)
    } else {
        (ln_gamma(k + 1.0 / d) - ln_gamma(k)).exp()
    };
    ratio * law.intensity().powf(-1.0 / d)
}

/// Density `f_k(r) = d (rho C_d)^k r^(dk-1) exp(-rho C_d r^d) / (k-1)!`.
pub fn nn_distance_pdf(law: &NnLaw, r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(GeometryError::NegativeDistance(r));
    }
    let d = law.dimension as f64;
    let k = law.order as f64;
    let lambda = law.intensity();
    if r == 0.0 {
        // r^(dk-1) is 1 only when d = k = 1
        return Ok(if law.dimension * law.order == 1 { lambda } else { 0.0 });
    }
    if r.is_infinite() {
        return Ok(0.0);
    }
    let log_f = d.ln() + k * lambda.ln() + (d * k - 1.0) * r.ln() - lambda * r.powf(d) - ln_gamma(k);
    Ok(log_f.exp())
}

/// Distribution function `F_k(r) = 1 - exp(-x) sum_{j<k} x^j / j!` with `x = rho C_d r^d`.
pub fn nn_distance_cdf(law: &NnLaw, r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(GeometryError::NegativeDistance(r));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let x = law.intensity() * r.powf(law.dimension as f64);
    Ok(poisson_at_least(law.order, x))
}

/// `P(N >= k)` for `N ~ Poisson(x)`.
fn poisson_at_least(k: usize, x: f64) -> f64 {
    if x.is_infinite() {
        return 1.0;
    }
    if x < k as f64 {
        // upper series: exp(-x) sum_{j>=k} x^j / j!, avoids 1 - (1 - tiny)
        let mut term = (k as f64 * x.ln() - x - ln_gamma(k as f64 + 1.0)).exp();
        let mut acc = stats::NeumaierSum::new();
        let mut j = k as f64;
        while term > 0.0 {
            acc.add(term);
            j += 1.0;
            term *= x / j;
            if term < acc.value() * 1e-18 {
                break;
            }
        }
        acc.value().min(1.0)
    } else {
        let mut term = (-x).exp();
        let mut acc = stats::NeumaierSum::new();
        for j in 0..k {
            if j > 0 {
                term *= x / j as f64;
            }
            acc.add(term);
        }
        (1.0 - acc.value()).clamp(0.0, 1.0)
    }
}

/// Smallest radius with `1 - F_k(r) <= tail`, by bisection.
pub fn nn_distance_quantile_tail(law: &NnLaw, tail: f64) -> f64 {
    let target = 1.0 - tail;
    let mut hi = expected_nn_distance(law);
    while nn_distance_cdf(law, hi).unwrap_or(1.0) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nn_distance_cdf(law, mid).unwrap_or(1.0) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Samples a homogeneous Poisson process of intensity `density` in `region`.
pub fn sample_poisson_points(region: &Region, density: f64, seed: u64) -> Result<PointCloud> {
    let mut rng = rng::seeded(seed);
    sample_poisson_with(region, density, &mut rng)
}

pub(crate) fn sample_poisson_with(
    region: &Region,
    density: f64,
    rng: &mut LabRng,
) -> Result<PointCloud> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(GeometryError::InvalidDensity(density));
    }
    let mean = density * region.volume();
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|_| GeometryError::InvalidDensity(density))?
            .sample(rng) as usize
    } else {
        0
    };
    let d = region.dimension();
    let mut coords = vec![0.0; n * d];
    for chunk in coords.chunks_exact_mut(d) {
        region.sample_point(rng, chunk);
    }
    Ok(PointCloud::from_flat(region.clone(), coords))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the `k` smallest squared distances seen so far, sorted ascending.
struct KBest {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn push(&mut self, d2: f64, idx: usize) {
        if self.items.len() == self.k {
            if d2 >= self.items[self.k - 1].0 {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(x, _)| x <= d2);
        self.items.insert(pos, (d2, idx));
    }

    fn kth(&self) -> Option<(f64, usize)> {
        if self.items.len() == self.k {
            self.items.last().copied()
        } else {
            None
        }
    }
}

/// Uniform-grid bucket index over a point cloud.
#[derive(Debug, Clone)]
pub struct GridIndex {
    lower: Vec<f64>,
    cell_width: Vec<f64>,
    cells_per_axis: Vec<usize>,
    /// CSR layout: points of cell `c` are `order[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    order: Vec<usize>,
}

impl GridIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let region = cloud.region();
        let d = region.dimension();
        let n = cloud.len().max(1);
        // about two points per cell
        let target_width = (2.0 * region.volume() / n as f64).powf(1.0 / d as f64);
        let cells_per_axis: Vec<usize> = region
            .lower()
            .iter()
            .zip(region.upper())
            .map(|(l, u)| (((u - l) / target_width).floor() as usize).clamp(1, 1 << 16))
            .collect();
        let cell_width: Vec<f64> = region
            .lower()
            .iter()
            .zip(region.upper())
            .zip(&cells_per_axis)
            .map(|((l, u), m)| (u - l) / *m as f64)
            .collect();
        let total: usize = cells_per_axis.iter().product();
        let mut index = Self {
            lower: region.lower().to_vec(),
            cell_width,
            cells_per_axis,
            start: vec![0; total + 1],
            order: Vec::with_capacity(cloud.len()),
        };
        let cell_of: Vec<usize> = cloud.points().map(|p| index.flat_cell(&index.cell_coords(p))).collect();
        for &c in &cell_of {
            index.start[c + 1] += 1;
        }
        for c in 0..total {
            index.start[c + 1] += index.start[c];
        }
        let mut fill = index.start.clone();
        index.order = vec![0; cloud.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            index.order[fill[c]] = i;
            fill[c] += 1;
        }
        index
    }

    fn cell_coords(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .zip(&self.lower)
            .zip(&self.cell_width)
            .zip(&self.cells_per_axis)
            .map(|(((x, l), w), m)| {
                let c = ((x - l) / w).floor();
                if c < 0.0 {
                    0
                } else {
                    (c as usize).min(m - 1)
                }
            })
            .collect()
    }

    fn flat_cell(&self, coords: &[usize]) -> usize {
        let mut flat = 0;
        for (c, m) in coords.iter().zip(&self.cells_per_axis).rev() {
            flat = flat * m + c;
        }
        flat
    }

    /// Distance from `p` to the outside of the cell block `center ± r`, or
    /// `None` when that block already covers the whole grid.
    fn ring_clearance(&self, p: &[f64], center: &[usize], r: usize) -> Option<f64> {
        let mut best = f64::INFINITY;
        let mut covered = true;
        for a in 0..p.len() {
            if center[a] > r {
                covered = false;
                let face = self.lower[a] + (center[a] - r) as f64 * self.cell_width[a];
                best = best.min(p[a] - face);
            }
            if center[a] + r + 1 < self.cells_per_axis[a] {
                covered = false;
                let face = self.lower[a] + (center[a] + r + 1) as f64 * self.cell_width[a];
                best = best.min(face - p[a]);
            }
        }
        if covered {
            None
        } else {
            Some(best.max(0.0))
        }
    }

    /// Visits every cell at Chebyshev ring distance exactly `r` from `center`.
    fn for_each_ring_cell(&self, center: &[usize], r: usize, mut f: impl FnMut(usize)) {
        let d = center.len();
        let lo: Vec<usize> = center.iter().map(|c| c.saturating_sub(r)).collect();
        let hi: Vec<usize> = center
            .iter()
            .zip(&self.cells_per_axis)
            .map(|(c, m)| (c + r).min(m - 1))
            .collect();
        let mut cur = lo.clone();
        loop {
            let on_ring = cur
                .iter()
                .zip(center)
                .any(|(c, m)| c.abs_diff(*m) == r);
            if on_ring {
                f(self.flat_cell(&cur));
            }
            let mut a = 0;
            loop {
                if a == d {
                    return;
                }
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }

    fn kth_squared(&self, cloud: &PointCloud, probe: &[f64], k: usize) -> Option<(f64, usize)> {
        let center = self.cell_coords(probe);
        let mut best = KBest::new(k);
        let mut r = 0;
        loop {
            self.for_each_ring_cell(&center, r, |cell| {
                for &i in &self.order[self.start[cell]..self.start[cell + 1]] {
                    best.push(squared_distance(probe, cloud.point(i)), i);
                }
            });
            match self.ring_clearance(probe, &center, r) {
                None => return best.kth(),
                Some(clear) => {
                    if let Some((d2, i)) = best.kth() {
                        if d2 <= clear * clear {
                            return Some((d2, i));
                        }
                    }
                }
            }
            r += 1;
        }
    }
}

/// Exact k-nearest-neighbour search over a cloud.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    cloud: &'a PointCloud,
    grid: Option<GridIndex>,
}

impl<'a> NeighborIndex<'a> {
    /// Brute force below [`GRID_THRESHOLD`] points, grid above.
    pub fn new(cloud: &'a PointCloud) -> Self {
        if cloud.len() >= GRID_THRESHOLD {
            Self::grid(cloud)
        } else {
            Self::brute_force(cloud)
        }
    }

    pub fn brute_force(cloud: &'a PointCloud) -> Self {
        Self { cloud, grid: None }
    }

    pub fn grid(cloud: &'a PointCloud) -> Self {
        Self {
            cloud,
            grid: Some(GridIndex::build(cloud)),
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    /// Index and distance of the k-th nearest point to `probe`.
    pub fn kth_nearest(&self, probe: &[f64], k: usize) -> Result<(usize, f64)> {
        if k == 0 {
            return Err(GeometryError::ZeroCount("k"));
        }
        if probe.len() != self.cloud.dimension() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.cloud.dimension(),
                got: probe.len(),
            });
        }
        if self.cloud.len() < k {
            return Err(GeometryError::InsufficientPoints {
                needed: k,
                available: self.cloud.len(),
            });
        }
        let found = match &self.grid {
            Some(grid) if self.cloud.region().contains(probe) => grid.kth_squared(self.cloud, probe, k),
            _ => {
                let mut best = KBest::new(k);
                for (i, p) in self.cloud.points().enumerate() {
                    best.push(squared_distance(probe, p), i);
                }
                best.kth()
            }
        };
        let (d2, i) = found.expect("cloud has at least k points");
        Ok((i, d2.sqrt()))
    }

    pub fn kth_distance(&self, probe: &[f64], k: usize) -> Result<f64> {
        self.kth_nearest(probe, k).map(|(_, d)| d)
    }
}

/// Exact distance from `probe` to its k-th nearest point of `cloud`.
pub fn empirical_nn_distance(cloud: &PointCloud, probe: &[f64], k: usize) -> Result<f64> {
    NeighborIndex::new(cloud).kth_distance(probe, k)
}

/// Sampling box used by [`nn_monte_carlo`]: a probe core of side `E[R_k]`
/// surrounded by a margin of at least `5 E[R_k]`, widened until the law puts
/// less than `1e-12` of its mass beyond the margin.
pub fn monte_carlo_margin(law: &NnLaw) -> f64 {
    let mean = expected_nn_distance(law);
    (5.0 * mean).max(nn_distance_quantile_tail(law, MARGIN_TAIL))
}

/// Monte Carlo estimate of `E[R_k]`: one independent Poisson cloud per probe.
pub fn nn_monte_carlo(law: &NnLaw, probes: usize, seed: u64) -> Result<MeanEstimate> {
    if probes < 2 {
        return Err(GeometryError::InsufficientData("need at least 2 probes".into()));
    }
    let d = law.dimension();
    let core_half = 0.5 * expected_nn_distance(law);
    let half = core_half + monte_carlo_margin(law);
    let region = Region::cube(d, -half, half)?;
    let core = Region::cube(d, -core_half, core_half)?;
    let samples: Vec<f64> = (0..probes as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, trial);
            let cloud = sample_poisson_with(&region, law.density(), &mut rng)?;
            let mut probe = vec![0.0; d];
            core.sample_point(&mut rng, &mut probe);
            NeighborIndex::brute_force(&cloud).kth_distance(&probe, law.order())
        })
        .collect::<Result<_>>()?;
    MeanEstimate::from_samples(&samples).ok_or_else(|| GeometryError::InsufficientData("no samples".into()))
}

fn check_ladder(densities: &[f64]) -> Result<()> {
    let mut sorted: Vec<f64> = densities.to_vec();
    if sorted.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(GeometryError::InsufficientData("densities must be positive".into()));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(GeometryError::InsufficientData(format!(
            "need at least 3 distinct densities, got {}",
            sorted.len()
        )));
    }
    if sorted[sorted.len() - 1] / sorted[0] < 100.0 * (1.0 - 1e-12) {
        return Err(GeometryError::InsufficientData(
            "densities must span at least two decades".into(),
        ));
    }
    Ok(())
}

/// Outcome of a log-log regression over a density ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub densities: Vec<f64>,
    pub estimates: Vec<MeanEstimate>,
    pub slope: f64,
}

/// Slope of `ln E[R_1]` against `ln rho`; the law predicts `-1/d`.
pub fn density_scaling_fit(d: usize, densities: &[f64], trials: usize, seed: u64) -> Result<ScalingFit> {
    check_ladder(densities)?;
    let estimates = densities
        .iter()
        .enumerate()
        .map(|(i, &rho)| nn_monte_carlo(&NnLaw::new(rho, d, 1)?, trials, rng::derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let slope = stats::log_log_slope(densities, &means)
        .ok_or_else(|| GeometryError::InsufficientData("degenerate regression".into()))?;
    Ok(ScalingFit {
        densities: densities.to_vec(),
        estimates,
        slope,
    })
}

/// Lower bound on the radius of the largest point-free ball inside `search_region`.
///
/// Candidate centres are the region centre plus `n_candidates - 1` uniform
/// draws; each scores its distance to the nearest cloud point, clipped to the
/// distance to the region boundary.
pub fn max_void_radius(
    cloud: &PointCloud,
    search_region: &Region,
    n_candidates: usize,
    seed: u64,
) -> Result<f64> {
    if n_candidates == 0 {
        return Err(GeometryError::ZeroCount("n_candidates"));
    }
    if search_region.dimension() != cloud.dimension() {
        return Err(GeometryError::DimensionMismatch {
            expected: cloud.dimension(),
            got: search_region.dimension(),
        });
    }
    if !(search_region.volume() > 0.0) {
        return Err(GeometryError::InvalidRegion("search region is empty".into()));
    }
    let d = cloud.dimension();
    let mut rng = rng::seeded(seed);
    let mut centers = search_region.center();
    centers.resize(n_candidates * d, 0.0);
    for chunk in centers.chunks_exact_mut(d).skip(1) {
        search_region.sample_point(&mut rng, chunk);
    }
    let index = NeighborIndex::new(cloud);
    let best = centers
        .par_chunks_exact(d)
        .map(|c| {
            let wall = search_region.distance_to_boundary(c);
            if cloud.is_empty() {
                return wall;
            }
            let nearest = index.kth_distance(c, 1).unwrap_or(f64::INFINITY);
            nearest.min(wall)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Mean largest-void radius over independent clouds in the unit cube, per density.
///
/// The number of candidates scales with the expected point count so that the
/// relative resolution of the estimate is the same at every density.
pub fn void_scaling_fit(
    d: usize,
    densities: &[f64],
    trials: usize,
    candidates_per_point: f64,
    seed: u64,
) -> Result<ScalingFit> {
    check_ladder(densities)?;
    if trials < 2 {
        return Err(GeometryError::InsufficientData("need at least 2 trials".into()));
    }
    let region = Region::unit_cube(d)?;
    let estimates = densities
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let level_seed = rng::derive_seed(seed, i as u64);
            let n_candidates = ((candidates_per_point * rho * region.volume()).ceil() as usize).max(1000);
            let radii = (0..trials as u64)
                .map(|t| {
                    let cloud_seed = rng::derive_seed(level_seed, 2 * t);
                    let cloud = sample_poisson_points(&region, rho, cloud_seed)?;
                    max_void_radius(&cloud, &region, n_candidates, rng::derive_seed(level_seed, 2 * t + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            MeanEstimate::from_samples(&radii).ok_or_else(|| GeometryError::InsufficientData("no samples".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let slope = stats::log_log_slope(densities, &means)
        .ok_or_else(|| GeometryError::InsufficientData("degenerate regression".into()))?;
    Ok(ScalingFit {
        densities: densities.to_vec(),
        estimates,
        slope,
    })
}
