//! Reasoning as noisy descent on a loss landscape.
//!
//! A chain of `L` reasoning steps is simulated two ways: as `L` discrete
//! updates `s <- s - (grad C(s) + alpha) / L` with gradient noise of variance
//! `F(s)`, and as an Euler-Maruyama integration of
//! `ds/dt = -grad C(s) + eta(t)` over `t in [0, 1]` with `dt = 1 / L` and
//! noise intensity `g F(s)`. Matching the per-step noise variance of the two
//! gives `g = 1 / L`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, LabRng};
use crate::stats::{self, MeanEstimate};

/// Ensembles smaller than this are flagged as under-powered.
pub const MIN_ENSEMBLE: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("reasoning length must be at least 1")]
    InvalidLength,
    #[error("non-finite loss or gradient at step {step}")]
    Divergence { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid noise: {0}")]
    InvalidNoise(String),
    #[error("invalid landscape: {0}")]
    InvalidLandscape(String),
    #[error("gradient disagrees with finite differences at {point:?}: analytic {analytic}, numeric {numeric}")]
    GradientMismatch {
        point: Vec<f64>,
        analytic: f64,
        numeric: f64,
    },
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// `g = 1 / L`.
pub fn noise_scale(length: usize) -> Result<f64> {
    if length == 0 {
        return Err(DynamicsError::InvalidLength);
    }
    Ok(1.0 / length as f64)
}

/// Two quadratic wells joined by a soft minimum: a narrow well
/// `a_sharp |s - m_sharp|^2` and a wide one `c_flat + a_flat |s - m_flat|^2`.
///
/// `C(s) = tau ln 2 - tau ln(exp(-x / tau) + exp(-y / tau))`, which is never
/// negative because the soft minimum undercuts `min(x, y)` by at most `tau ln 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub sharp_center: Vec<f64>,
    pub sharp_curvature: f64,
    pub flat_center: Vec<f64>,
    pub flat_curvature: f64,
    pub flat_offset: f64,
    pub temperature: f64,
}

impl DoubleWell {
    pub const REFERENCE_VERSION: &'static str = "double-well-v1";

    /// Pinned one-dimensional configuration used by the basin experiment.
    pub fn reference() -> Self {
        Self {
            sharp_center: vec![-1.0],
            sharp_curvature: 20.0,
            flat_center: vec![1.0],
            flat_curvature: 2.0,
            flat_offset: 0.1,
            temperature: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.sharp_center.len();
        if d == 0 || self.flat_center.len() != d {
            return Err(DynamicsError::InvalidLandscape("well centres must share a positive dimension".into()));
        }
        if !(self.sharp_curvature > self.flat_curvature) || !(self.flat_curvature > 0.0) {
            return Err(DynamicsError::InvalidLandscape(
                "need sharp curvature > flat curvature > 0".into(),
            ));
        }
        if !(self.temperature > 0.0) || !(self.flat_offset >= 0.0) {
            return Err(DynamicsError::InvalidLandscape(
                "temperature must be positive and the flat offset non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Both minima moved by `offset` along every axis.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.sharp_center.iter_mut().for_each(|c| *c += offset);
        out.flat_center.iter_mut().for_each(|c| *c += offset);
        out
    }

    fn energies(&self, s: &[f64]) -> (f64, f64) {
        let x = self.sharp_curvature * sq_dist(s, &self.sharp_center);
        let y = self.flat_offset + self.flat_curvature * sq_dist(s, &self.flat_center);
        (x, y)
    }

    /// Which well dominates the soft minimum at `s`.
    pub fn basin(&self, s: &[f64]) -> Basin {
        let (x, y) = self.energies(s);
        if x <= y {
            Basin::Sharp
        } else {
            Basin::Flat
        }
    }

    fn loss(&self, s: &[f64]) -> f64 {
        let (x, y) = self.energies(s);
        let t = self.temperature;
        let m = x.min(y);
        t * std::f64::consts::LN_2 + m - t * ((-(x - m) / t).exp() + (-(y - m) / t).exp()).ln()
    }

    fn gradient(&self, s: &[f64], out: &mut [f64]) {
        let (x, y) = self.energies(s);
        let t = self.temperature;
        let m = x.min(y);
        let (ex, ey) = ((-(x - m) / t).exp(), (-(y - m) / t).exp());
        let (wx, wy) = (ex / (ex + ey), ey / (ex + ey));
        for (i, o) in out.iter_mut().enumerate() {
            *o = wx * 2.0 * self.sharp_curvature * (s[i] - self.sharp_center[i])
                + wy * 2.0 * self.flat_curvature * (s[i] - self.flat_center[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basin {
    Sharp,
    Flat,
}

type LossFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum LandscapeFamily {
    /// `C(s) = curvature / 2 * |s - center|^2`.
    QuadraticBowl { center: Vec<f64>, curvature: f64 },
    DoubleWell(DoubleWell),
    Custom { dimension: usize, loss: LossFn, gradient: GradFn },
}

impl fmt::Debug for LandscapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::QuadraticBowl { center, curvature } => f
                .debug_struct("QuadraticBowl")
                .field("center", center)
                .field("curvature", curvature)
                .finish(),
            Self::DoubleWell(w) => f.debug_tuple("DoubleWell").field(w).finish(),
            Self::Custom { dimension, .. } => f.debug_struct("Custom").field("dimension", dimension).finish(),
        }
    }
}

/// A differentiable, non-negative loss over `D`-dimensional states.
#[derive(Debug, Clone)]
pub struct LossLandscape {
    family: LandscapeFamily,
}

impl LossLandscape {
    pub fn quadratic_bowl(center: Vec<f64>, curvature: f64) -> Result<Self> {
        if center.is_empty() || !(curvature > 0.0) {
            return Err(DynamicsError::InvalidLandscape(
                "bowl needs a non-empty centre and positive curvature".into(),
            ));
        }
        Ok(Self {
            family: LandscapeFamily::QuadraticBowl { center, curvature },
        })
    }

    /// `C(s) = |s|^2 / 2` in `d` dimensions.
    pub fn unit_bowl(d: usize) -> Result<Self> {
        Self::quadratic_bowl(vec![0.0; d], 1.0)
    }

    pub fn double_well(params: DoubleWell) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            family: LandscapeFamily::DoubleWell(params),
        })
    }

    /// A user-supplied landscape. The gradient is checked against central
    /// differences at `probes` points drawn from `[-probe_radius, probe_radius]^d`.
    pub fn custom(
        dimension: usize,
        loss: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        probes: usize,
        probe_radius: f64,
        seed: u64,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(DynamicsError::InvalidLandscape("dimension must be positive".into()));
        }
        let landscape = Self {
            family: LandscapeFamily::Custom {
                dimension,
                loss: Arc::new(loss),
                gradient: Arc::new(gradient),
            },
        };
        landscape.check_gradient(probes, probe_radius, seed)?;
        Ok(landscape)
    }

    pub fn family(&self) -> &LandscapeFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        match &self.family {
            LandscapeFamily::QuadraticBowl { center, .. } => center.len(),
            LandscapeFamily::DoubleWell(w) => w.sharp_center.len(),
            LandscapeFamily::Custom { dimension, .. } => *dimension,
        }
    }

    pub fn loss(&self, s: &[f64]) -> f64 {
        match &self.family {
            LandscapeFamily::QuadraticBowl { center, curvature } => 0.5 * curvature * sq_dist(s, center),
            LandscapeFamily::DoubleWell(w) => w.loss(s),
            LandscapeFamily::Custom { loss, .. } => loss(s),
        }
    }

    pub fn gradient_into(&self, s: &[f64], out: &mut [f64]) {
        match &self.family {
            LandscapeFamily::QuadraticBowl { center, curvature } => {
                for ((o, x), c) in out.iter_mut().zip(s).zip(center) {
                    *o = curvature * (x - c);
                }
            }
            LandscapeFamily::DoubleWell(w) => w.gradient(s, out),
            LandscapeFamily::Custom { gradient, .. } => gradient(s, out),
        }
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s.len()];
        self.gradient_into(s, &mut out);
        out
    }

    /// Compares the analytic gradient with central differences; relative
    /// error above `1e-5` (absolute below unit magnitude) is a mismatch.
    pub fn check_gradient(&self, probes: usize, radius: f64, seed: u64) -> Result<()> {
        let d = self.dimension();
        let mut rng = rng::seeded(seed);
        let mut s = vec![0.0; d];
        for _ in 0..probes {
            for x in s.iter_mut() {
                *x = radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            let analytic = self.gradient(&s);
            for i in 0..d {
                let h = 1e-6 * s[i].abs().max(1.0);
                let mut up = s.clone();
                let mut down = s.clone();
                up[i] += h;
                down[i] -= h;
                let numeric = (self.loss(&up) - self.loss(&down)) / (2.0 * h);
                if (numeric - analytic[i]).abs() > 1e-5 * analytic[i].abs().max(1.0) {
                    return Err(DynamicsError::GradientMismatch {
                        point: s.clone(),
                        analytic: analytic[i],
                        numeric,
                    });
                }
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Variance field `F(s)` of the loss-gradient estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseField {
    /// `F(s) = value`; zero gives noiseless dynamics.
    Constant { value: f64 },
    /// `F(s) = base (1 + |grad C(s)|^2)`.
    GradientScaled { base: f64 },
}

impl NoiseField {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    fn validate(&self) -> Result<()> {
        let v = match self {
            Self::Constant { value } => *value,
            Self::GradientScaled { base } => *base,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(DynamicsError::InvalidNoise(format!("variance level must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    /// `F(s)` given the gradient at `s`.
    pub fn at_gradient(&self, grad: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::GradientScaled { base } => base * (1.0 + grad.iter().map(|g| g * g).sum::<f64>()),
        }
    }

    pub fn at(&self, landscape: &LossLandscape, s: &[f64]) -> f64 {
        self.at_gradient(&landscape.gradient(s))
    }
}

/// Noise scale `g` together with the variance field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub scale: f64,
    pub field: NoiseField,
}

impl NoiseSpec {
    pub fn new(scale: f64, field: NoiseField) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(DynamicsError::InvalidNoise(format!("noise scale must be >= 0, got {scale}")));
        }
        field.validate()?;
        Ok(Self { scale, field })
    }

    /// Noise spec for discrete descent, where `g` plays no role.
    pub fn discrete(field: NoiseField) -> Result<Self> {
        Self::new(0.0, field)
    }
}

/// States and losses of an `L`-step run; `states.len() == L + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

impl Trajectory {
    pub fn step_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has an initial state")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory has an initial loss")
    }
}

#[derive(Debug, Clone, Copy)]
enum Scheme {
    /// `s <- s - (grad + alpha) / L`, `Var(alpha) = F(s)`.
    Discrete,
    /// `s <- s - grad dt + sqrt(g F(s) dt) z`, `dt = 1 / L`.
    EulerMaruyama { g: f64 },
}

/// One update of `s` in place; returns `Err(())` on a non-finite gradient.
fn advance(
    landscape: &LossLandscape,
    field: &NoiseField,
    scheme: Scheme,
    length: usize,
    s: &mut [f64],
    grad: &mut [f64],
    rng: &mut LabRng,
) -> std::result::Result<(), ()> {
    landscape.gradient_into(s, grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(());
    }
    let variance = field.at_gradient(grad);
    let dt = 1.0 / length as f64;
    match scheme {
        Scheme::Discrete => {
            let sd = variance.sqrt();
            for (x, g) in s.iter_mut().zip(grad.iter()) {
                let alpha = if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                *x -= (g + alpha) * dt;
            }
        }
        Scheme::EulerMaruyama { g: scale } => {
            let sd = (scale * variance * dt).sqrt();
            for (x, g) in s.iter_mut().zip(grad.iter()) {
                let kick = if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                *x += -g * dt + kick;
            }
        }
    }
    Ok(())
}

fn check_start(landscape: &LossLandscape, s0: &[f64], length: usize) -> Result<()> {
    if length == 0 {
        return Err(DynamicsError::InvalidLength);
    }
    if s0.len() != landscape.dimension() {
        return Err(DynamicsError::DimensionMismatch {
            expected: landscape.dimension(),
            got: s0.len(),
        });
    }
    Ok(())
}

fn simulate(
    landscape: &LossLandscape,
    s0: &[f64],
    length: usize,
    field: &NoiseField,
    scheme: Scheme,
    rng: &mut LabRng,
    mut record: impl FnMut(&[f64], f64),
) -> Result<Vec<f64>> {
    check_start(landscape, s0, length)?;
    field.validate()?;
    let mut s = s0.to_vec();
    let mut grad = vec![0.0; s.len()];
    let loss = landscape.loss(&s);
    if !loss.is_finite() {
        return Err(DynamicsError::Divergence { step: 0 });
    }
    record(&s, loss);
    for step in 1..=length {
        advance(landscape, field, scheme, length, &mut s, &mut grad, rng)
            .map_err(|_| DynamicsError::Divergence { step: step - 1 })?;
        let loss = landscape.loss(&s);
        if !loss.is_finite() || s.iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::Divergence { step });
        }
        record(&s, loss);
    }
    Ok(s)
}

fn run_recorded(
    landscape: &LossLandscape,
    s0: &[f64],
    length: usize,
    field: &NoiseField,
    scheme: Scheme,
    seed: u64,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(length + 1);
    let mut losses = Vec::with_capacity(length + 1);
    let mut rng = rng::seeded(seed);
    simulate(landscape, s0, length, field, scheme, &mut rng, |s, c| {
        states.push(s.to_vec());
        losses.push(c);
    })?;
    Ok(Trajectory { states, losses })
}

/// `L` noisy gradient steps of size `1 / L` from `s0`.
pub fn discrete_descent(
    landscape: &LossLandscape,
    s0: &[f64],
    length: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Trajectory> {
    run_recorded(landscape, s0, length, &noise.field, Scheme::Discrete, seed)
}

/// Euler-Maruyama over `t in [0, 1]` with `dt = 1 / L` and noise scale `g`.
pub fn sde_integrate(
    landscape: &LossLandscape,
    s0: &[f64],
    g: f64,
    length: usize,
    field: &NoiseField,
    seed: u64,
) -> Result<Trajectory> {
    NoiseSpec::new(g, *field)?;
    run_recorded(landscape, s0, length, field, Scheme::EulerMaruyama { g }, seed)
}

/// Per-step noise variance of the SDE, `g F(s) / L`.
pub fn sde_step_noise_variance(noise: &NoiseSpec, landscape: &LossLandscape, length: usize, s: &[f64]) -> Result<f64> {
    if length == 0 {
        return Err(DynamicsError::InvalidLength);
    }
    Ok(noise.scale * noise.field.at(landscape, s) / length as f64)
}

/// Per-step noise variance of the discrete update, `F(s) / L^2`.
pub fn discrete_step_noise_variance(field: &NoiseField, landscape: &LossLandscape, length: usize, s: &[f64]) -> Result<f64> {
    if length == 0 {
        return Err(DynamicsError::InvalidLength);
    }
    let l = length as f64;
    Ok(field.at(landscape, s) / (l * l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Discrete,
    Sde,
}

/// Monte Carlo variance of the first coordinate of one step's noise at `s`:
/// each sample takes a single step from `s` and removes the deterministic drift.
pub fn empirical_step_noise_variance(
    kind: StepKind,
    landscape: &LossLandscape,
    s: &[f64],
    length: usize,
    noise: &NoiseSpec,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_start(landscape, s, length)?;
    if samples < 2 {
        return Err(DynamicsError::ZeroCount("samples"));
    }
    let scheme = match kind {
        StepKind::Discrete => Scheme::Discrete,
        StepKind::Sde => Scheme::EulerMaruyama { g: noise.scale },
    };
    let drift = landscape.gradient(s)[0] / length as f64;
    let kicks: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            let mut x = s.to_vec();
            let mut grad = vec![0.0; x.len()];
            advance(landscape, &noise.field, scheme, length, &mut x, &mut grad, &mut rng)
                .map_err(|_| DynamicsError::Divergence { step: 0 })?;
            Ok(x[0] - s[0] + drift)
        })
        .collect::<Result<_>>()?;
    Ok(stats::sample_variance(&kicks).expect("at least two samples"))
}

/// Final state of one discrete-descent run, without storing the path.
pub fn descend_final(
    landscape: &LossLandscape,
    s0: &[f64],
    length: usize,
    field: &NoiseField,
    rng: &mut LabRng,
) -> Result<Vec<f64>> {
    simulate(landscape, s0, length, field, Scheme::Discrete, rng, |_, _| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinRow {
    pub length: usize,
    pub flat_fraction: f64,
    pub sharp_fraction: f64,
    pub perturbed_loss: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub rows: Vec<BasinRow>,
    pub ensembles: usize,
    pub warning: Option<String>,
}

impl BasinReport {
    /// Length with the lowest mean perturbed loss (smallest on ties).
    pub fn best_length(&self) -> Option<usize> {
        self.rows
            .iter()
            .min_by(|a, b| a.perturbed_loss.mean.total_cmp(&b.perturbed_loss.mean))
            .map(|r| r.length)
    }

    /// Whether the perturbed-loss minimum sits strictly inside the length grid.
    pub fn has_interior_minimum(&self) -> bool {
        let means: Vec<f64> = self.rows.iter().map(|r| r.perturbed_loss.mean).collect();
        let Some(best) = means.iter().copied().reduce(f64::min) else {
            return false;
        };
        let first = means[0];
        let last = means[means.len() - 1];
        means.len() >= 3 && best < first && best < last
    }
}

/// Runs discrete-descent ensembles on a double well for each `L`, classifies
/// the terminal basin and scores the terminal state on the well shifted by
/// `perturbation` (a stand-in for unseen data).
pub fn basin_selection_experiment(
    wells: &DoubleWell,
    s0: &[f64],
    lengths: &[usize],
    ensembles: usize,
    field: &NoiseField,
    perturbation: f64,
    seed: u64,
) -> Result<BasinReport> {
    if ensembles < 2 {
        return Err(DynamicsError::ZeroCount("ensembles"));
    }
    if lengths.is_empty() {
        return Err(DynamicsError::ZeroCount("lengths"));
    }
    let landscape = LossLandscape::double_well(wells.clone())?;
    let perturbed = LossLandscape::double_well(wells.shifted(perturbation))?;
    let mut rows = Vec::with_capacity(lengths.len());
    for (li, &length) in lengths.iter().enumerate() {
        let level_seed = rng::derive_seed(seed, li as u64);
        let finals: Vec<Vec<f64>> = (0..ensembles as u64)
            .into_par_iter()
            .map(|e| descend_final(&landscape, s0, length, field, &mut rng::stream(level_seed, e)))
            .collect::<Result<_>>()?;
        let flat = finals.iter().filter(|s| wells.basin(s) == Basin::Flat).count();
        let losses: Vec<f64> = finals.iter().map(|s| perturbed.loss(s)).collect();
        rows.push(BasinRow {
            length,
            flat_fraction: flat as f64 / ensembles as f64,
            sharp_fraction: (ensembles - flat) as f64 / ensembles as f64,
            perturbed_loss: MeanEstimate::from_samples(&losses).expect("ensembles >= 2"),
        });
    }
    let warning = (ensembles < MIN_ENSEMBLE).then(|| {
        format!("ensemble size {ensembles} is below {MIN_ENSEMBLE}; basin fractions are low-powered")
    });
    Ok(BasinReport {
        rows,
        ensembles,
        warning,
    })
}
