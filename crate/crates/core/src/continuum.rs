//! State density under expressive redundancy, and the error made when an
//! ideal continuous step is replaced by the best available discrete state.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, GeometryError, PointCloud, Region};
use crate::rng;
use crate::stats::{self, MeanEstimate};

/// Largest fraction of empty-annulus trials tolerated by [`error_scaling_experiment`].
pub const MAX_EMPTY_ANNULUS_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContinuumError {
    #[error("growth constant must exceed 1, got {0}")]
    InvalidRedundancy(f64),
    #[error("token count must be at least 1, got {0}")]
    InvalidLength(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),
    #[error("invalid step budget [{r_min}, {r_max}]")]
    InvalidBudget { r_min: f64, r_max: f64 },
    #[error("ideal step length {norm} outside the budget [{r_min}, {r_max}]")]
    StepOutsideBudget { norm: f64, r_min: f64, r_max: f64 },
    #[error("no reachable state in the annulus around the current state")]
    NoReachableState,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("realization count overflows u128 at k = {0}")]
    Overflow(usize),
    #[error("density {density}: {empty} of {trials} trials had an empty annulus (limit {limit})")]
    TooManyEmptyAnnuli {
        density: f64,
        empty: usize,
        trials: usize,
        limit: f64,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, ContinuumError>;

/// Exponential-redundancy model of the reasoning state count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedundancyModel {
    alphabet_size: usize,
    growth: f64,
    semantic_volume: f64,
    base_density: f64,
}

impl RedundancyModel {
    pub fn new(alphabet_size: usize, growth: f64, semantic_volume: f64, base_density: f64) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(ContinuumError::InvalidModel(format!(
                "alphabet size must be at least 2, got {alphabet_size}"
            )));
        }
        if !(growth > 1.0) || !growth.is_finite() {
            return Err(ContinuumError::InvalidRedundancy(growth));
        }
        if !(semantic_volume > 0.0) || !semantic_volume.is_finite() {
            return Err(ContinuumError::InvalidModel(format!(
                "semantic volume must be positive, got {semantic_volume}"
            )));
        }
        if !(base_density > 0.0) || !base_density.is_finite() {
            return Err(ContinuumError::InvalidModel(format!(
                "base density must be positive, got {base_density}"
            )));
        }
        Ok(Self {
            alphabet_size,
            growth,
            semantic_volume,
            base_density,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn semantic_volume(&self) -> f64 {
        self.semantic_volume
    }

    pub fn base_density(&self) -> f64 {
        self.base_density
    }
}

/// Lower bound `c^k` on the size of a step's semantic equivalence set.
pub fn equivalence_lower_bound(c: f64, k: usize) -> Result<f64> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(ContinuumError::InvalidRedundancy(c));
    }
    if k == 0 {
        return Err(ContinuumError::InvalidLength(k));
    }
    Ok(c.powi(k as i32))
}

/// `rho(K) = rho0 (c^(K+1) - 1) / ((c - 1) V)`: all realizations of up to `K`
/// tokens spread over the semantic volume.
pub fn state_density(model: &RedundancyModel, tokens: usize) -> f64 {
    let c = model.growth;
    let partial = if tokens < 256 {
        // Horner form of 1 + c + ... + c^K
        (0..tokens).fold(1.0, |acc, _| acc * c + 1.0)
    } else {
        (c.powf(tokens as f64 + 1.0) - 1.0) / (c - 1.0)
    };
    model.base_density * partial / model.semantic_volume
}

/// A toy grammar: each semantic atom has a group of synonymous tokens, and
/// inert filler tokens may be inserted anywhere without changing the meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyGrammar {
    synonyms: Vec<Vec<String>>,
    #[serde(default)]
    fillers: Vec<String>,
    template: Vec<usize>,
}

impl ToyGrammar {
    /// `template` lists atom indices into `synonyms`, in order.
    pub fn new(synonyms: Vec<Vec<String>>, fillers: Vec<String>, template: Vec<usize>) -> Result<Self> {
        let grammar = Self {
            synonyms,
            fillers,
            template,
        };
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn validate(&self) -> Result<()> {
        if self.synonyms.is_empty() {
            return Err(ContinuumError::InvalidGrammar("no synonym groups".into()));
        }
        if let Some(i) = self.synonyms.iter().position(Vec::is_empty) {
            return Err(ContinuumError::InvalidGrammar(format!("synonym group {i} is empty")));
        }
        let words: BTreeSet<&str> = self.synonyms.iter().flatten().map(String::as_str).collect();
        if let Some(f) = self.fillers.iter().find(|f| words.contains(f.as_str())) {
            return Err(ContinuumError::InvalidGrammar(format!(
                "filler token {f:?} also realizes a semantic atom"
            )));
        }
        if self.template.is_empty() {
            return Err(ContinuumError::InvalidGrammar("empty step template".into()));
        }
        if let Some(&a) = self.template.iter().find(|&&a| a >= self.synonyms.len()) {
            return Err(ContinuumError::InvalidGrammar(format!("template refers to unknown atom {a}")));
        }
        Ok(())
    }

    pub fn template_len(&self) -> usize {
        self.template.len()
    }

    fn filler_set(&self) -> BTreeSet<&str> {
        self.fillers.iter().map(String::as_str).collect()
    }

    /// Distinct filler tokens.
    pub fn filler_count(&self) -> usize {
        self.filler_set().len()
    }

    /// Distinct synonyms of atom `a`.
    fn group_size(&self, a: usize) -> usize {
        self.synonyms[a].iter().collect::<BTreeSet<_>>().len()
    }

    /// Every distinct token the grammar knows.
    pub fn vocabulary(&self) -> Vec<String> {
        let all: BTreeSet<&String> = self.synonyms.iter().flatten().chain(&self.fillers).collect();
        all.into_iter().cloned().collect()
    }

    /// Whether `tokens` decodes to the step template: after removing fillers,
    /// the `j`-th remaining token must realize the `j`-th template atom.
    pub fn realizes_template<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        let fillers = self.filler_set();
        let content: Vec<&str> = tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| !fillers.contains(t))
            .collect();
        content.len() == self.template.len()
            && content
                .iter()
                .zip(&self.template)
                .all(|(t, &a)| self.synonyms[a].iter().any(|s| s == t))
    }

    /// Number of length-`k` token sequences that decode to the template.
    ///
    /// Since fillers never realize an atom, each sequence decodes one way; the
    /// count is accumulated position by position over how many template atoms
    /// have been placed so far.
    pub fn count_realizations(&self, k: usize) -> Result<u128> {
        let t = self.template.len();
        if k < t {
            return Ok(0);
        }
        let fillers = self.filler_count() as u128;
        let sizes: Vec<u128> = self.template.iter().map(|&a| self.group_size(a) as u128).collect();
        // placed[j]: sequences of the current length that realize the first j atoms
        let mut placed = vec![0u128; t + 1];
        placed[0] = 1;
        for _ in 0..k {
            for j in (0..=t).rev() {
                let stay = placed[j].checked_mul(fillers).ok_or(ContinuumError::Overflow(k))?;
                let advance = if j > 0 {
                    placed[j - 1].checked_mul(sizes[j - 1]).ok_or(ContinuumError::Overflow(k))?
                } else {
                    0
                };
                placed[j] = stay.checked_add(advance).ok_or(ContinuumError::Overflow(k))?;
            }
        }
        Ok(placed[t])
    }

    /// Realization lengths with at most `max_fillers` inserted fillers.
    pub fn realization_lengths(&self, max_fillers: usize) -> std::ops::RangeInclusive<usize> {
        let t = self.template.len();
        if self.fillers.is_empty() {
            t..=t
        } else {
            t..=t + max_fillers
        }
    }
}

impl Default for ToyGrammar {
    /// Two atoms with two and three synonyms plus one filler.
    fn default() -> Self {
        Self::new(
            vec![
                vec!["add".into(), "plus".into()],
                vec!["three".into(), "3".into(), "iii".into()],
            ],
            vec!["um".into()],
            vec![0, 1],
        )
        .expect("default grammar is valid")
    }
}

/// Admissible step lengths `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    r_min: f64,
    r_max: f64,
}

impl StepBudget {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(ContinuumError::InvalidBudget { r_min, r_max });
        }
        Ok(Self { r_min, r_max })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.r_min + self.r_max)
    }

    pub fn admits(&self, length: f64) -> bool {
        length >= self.r_min && length <= self.r_max
    }
}

/// Angular error in radians and magnitude error of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumErrorSample {
    pub angular: f64,
    pub magnitude: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle between two vectors as `atan2(|a ∧ b|, a · b)`.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let mut wedge = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w = a[i] * b[j] - a[j] * b[i];
            wedge += w * w;
        }
    }
    wedge.sqrt().atan2(dot)
}

/// Compares the ideal step `v_ideal` from `s` with the step to the cloud point
/// in the reachable annulus that lies closest to `s + v_ideal`.
pub fn continuum_error_trial(
    cloud: &PointCloud,
    s: &[f64],
    v_ideal: &[f64],
    budget: &StepBudget,
) -> Result<ContinuumErrorSample> {
    let d = cloud.dimension();
    for v in [s, v_ideal] {
        if v.len() != d {
            return Err(ContinuumError::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let ideal_len = norm(v_ideal);
    if !budget.admits(ideal_len) {
        return Err(ContinuumError::StepOutsideBudget {
            norm: ideal_len,
            r_min: budget.r_min,
            r_max: budget.r_max,
        });
    }
    let target: Vec<f64> = s.iter().zip(v_ideal).map(|(a, b)| a + b).collect();
    let (rmin2, rmax2) = (budget.r_min * budget.r_min, budget.r_max * budget.r_max);
    let mut best: Option<(f64, &[f64])> = None;
    for p in cloud.points() {
        let r2: f64 = p.iter().zip(s).map(|(x, y)| (x - y) * (x - y)).sum();
        if r2 < rmin2 || r2 > rmax2 {
            continue;
        }
        let t2: f64 = p.iter().zip(&target).map(|(x, y)| (x - y) * (x - y)).sum();
        if best.is_none_or(|(b, _)| t2 < b) {
            best = Some((t2, p));
        }
    }
    let (_, p) = best.ok_or(ContinuumError::NoReachableState)?;
    let v_real: Vec<f64> = p.iter().zip(s).map(|(x, y)| x - y).collect();
    Ok(ContinuumErrorSample {
        angular: angle_between(v_ideal, &v_real),
        magnitude: (norm(&v_real) - ideal_len).abs(),
    })
}

/// Per-density summary of [`error_scaling_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLevel {
    pub density: f64,
    pub angular: MeanEstimate,
    pub magnitude: MeanEstimate,
    pub empty_annuli: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScaling {
    pub levels: Vec<ErrorLevel>,
    pub slope_angular: f64,
    pub slope_magnitude: f64,
}

/// Mean continuum errors along a density ladder and their log-log slopes.
///
/// Each trial places `s` at the origin, samples a Poisson cloud in the box
/// `[-r_max, r_max]^D` and draws `v_ideal` uniformly on the sphere of radius
/// `(r_min + r_max) / 2`.
pub fn error_scaling_experiment(
    dimension: usize,
    densities: &[f64],
    trials: usize,
    budget: &StepBudget,
    seed: u64,
) -> Result<ErrorScaling> {
    if densities.len() < 3 {
        return Err(ContinuumError::InsufficientData(format!(
            "need at least 3 densities, got {}",
            densities.len()
        )));
    }
    let lo = densities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = densities.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(ContinuumError::InsufficientData(
            "densities must be positive and span at least two decades".into(),
        ));
    }
    if trials < 2 {
        return Err(ContinuumError::InsufficientData("need at least 2 trials".into()));
    }
    let region = Region::cube(dimension, -budget.r_max, budget.r_max)?;
    let origin = vec![0.0; dimension];
    let radius = budget.midpoint();
    let mut levels = Vec::with_capacity(densities.len());
    for (li, &rho) in densities.iter().enumerate() {
        let level_seed = rng::derive_seed(seed, li as u64);
        let outcomes: Vec<Result<Option<ContinuumErrorSample>>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::stream(level_seed, t);
                let cloud = geometry::sample_poisson_with(&region, rho, &mut r)?;
                let mut v: Vec<f64> = (0..dimension).map(|_| r.sample(StandardNormal)).collect();
                let n = norm(&v);
                v.iter_mut().for_each(|x| *x *= radius / n);
                match continuum_error_trial(&cloud, &origin, &v, budget) {
                    Ok(sample) => Ok(Some(sample)),
                    Err(ContinuumError::NoReachableState) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut samples = Vec::with_capacity(trials);
        for o in outcomes {
            if let Some(s) = o? {
                samples.push(s);
            }
        }
        let empty = trials - samples.len();
        if empty as f64 > MAX_EMPTY_ANNULUS_RATE * trials as f64 {
            return Err(ContinuumError::TooManyEmptyAnnuli {
                density: rho,
                empty,
                trials,
                limit: MAX_EMPTY_ANNULUS_RATE,
            });
        }
        let ang: Vec<f64> = samples.iter().map(|s| s.angular).collect();
        let mag: Vec<f64> = samples.iter().map(|s| s.magnitude).collect();
        let too_few = || ContinuumError::InsufficientData(format!("density {rho}: fewer than 2 usable trials"));
        levels.push(ErrorLevel {
            density: rho,
            angular: MeanEstimate::from_samples(&ang).ok_or_else(too_few)?,
            magnitude: MeanEstimate::from_samples(&mag).ok_or_else(too_few)?,
            empty_annuli: empty,
            trials,
        });
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.density).collect();
    let slope = |ys: Vec<f64>| {
        stats::log_log_slope(&xs, &ys).ok_or_else(|| ContinuumError::InsufficientData("degenerate regression".into()))
    };
    let slope_angular = slope(levels.iter().map(|l| l.angular.mean).collect())?;
    let slope_magnitude = slope(levels.iter().map(|l| l.magnitude.mean).collect())?;
    Ok(ErrorScaling {
        levels,
        slope_angular,
        slope_magnitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grammar(sizes: &[usize], fillers: usize) -> ToyGrammar {
        let synonyms = sizes
            .iter()
            .enumerate()
            .map(|(a, &n)| (0..n).map(|i| format!("a{a}w{i}")).collect())
            .collect();
        let fillers = (0..fillers).map(|i| format!("f{i}")).collect();
        ToyGrammar::new(synonyms, fillers, (0..sizes.len()).collect()).unwrap()
    }

    /// Enumerates every length-k sequence over the vocabulary and decodes it.
    fn brute_force_count(g: &ToyGrammar, k: usize) -> u128 {
        let vocab = g.vocabulary();
        let mut idx = vec![0usize; k];
        let mut count = 0;
        loop {
            let seq: Vec<&str> = idx.iter().map(|&i| vocab[i].as_str()).collect();
            if g.realizes_template(&seq) {
                count += 1;
            }
            let mut a = 0;
            loop {
                if a == k {
                    return count;
                }
                idx[a] += 1;
                if idx[a] < vocab.len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    #[test]
    fn equivalence_bound_examples() {
        assert_eq!(equivalence_lower_bound(2.0, 1).unwrap(), 2.0);
        assert_eq!(equivalence_lower_bound(2.0, 10).unwrap(), 1024.0);
        assert_eq!(equivalence_lower_bound(1.5, 4).unwrap(), 5.0625);
        assert_eq!(equivalence_lower_bound(2.0, 0), Err(ContinuumError::InvalidLength(0)));
        assert_eq!(equivalence_lower_bound(1.0, 3), Err(ContinuumError::InvalidRedundancy(1.0)));
    }

    #[test]
    fn realization_counts() {
        let plain = grammar(&[2, 3], 0);
        assert_eq!(plain.count_realizations(2).unwrap(), 6);
        assert_eq!(plain.count_realizations(3).unwrap(), 0);
        assert_eq!(plain.count_realizations(1).unwrap(), 0);
        let padded = grammar(&[2, 3], 1);
        assert_eq!(padded.count_realizations(3).unwrap(), 18);
        assert_eq!(brute_force_count(&padded, 3), 18);
        for k in 2..=6 {
            let ratio = padded.count_realizations(k + 1).unwrap() as f64 / padded.count_realizations(k).unwrap() as f64;
            assert!(ratio > 1.0, "k={k}");
        }
    }

    #[test]
    fn realization_counts_match_enumeration() {
        for (sizes, fillers) in [(vec![2, 3], 1), (vec![1, 2, 2], 2), (vec![3], 2), (vec![2, 2], 0)] {
            let g = grammar(&sizes, fillers);
            for k in 0..=5 {
                assert_eq!(g.count_realizations(k).unwrap(), brute_force_count(&g, k), "{sizes:?} f={fillers} k={k}");
            }
        }
    }

    #[test]
    fn realization_overflow_is_reported() {
        let g = grammar(&[3], 1000);
        assert_eq!(g.count_realizations(40), Err(ContinuumError::Overflow(40)));
    }

    #[test]
    fn grammar_validation() {
        assert!(ToyGrammar::new(vec![vec![]], vec![], vec![0]).is_err());
        assert!(ToyGrammar::new(vec![vec!["a".into()]], vec!["a".into()], vec![0]).is_err());
        assert!(ToyGrammar::new(vec![vec!["a".into()]], vec![], vec![1]).is_err());
        assert!(ToyGrammar::new(vec![vec!["a".into()]], vec![], vec![]).is_err());
        ToyGrammar::default();
    }

    proptest! {
        #[test]
        fn counts_multiply_over_atoms(sizes in prop::collection::vec(1usize..6, 1..5)) {
            let g = grammar(&sizes, 0);
            let product: u128 = sizes.iter().map(|&s| s as u128).product();
            prop_assert_eq!(g.count_realizations(sizes.len()).unwrap(), product);
        }

        #[test]
        fn density_monotone(c in 1.01f64..4.0, k in 0usize..40, dc in 0.01f64..1.0) {
            let m = RedundancyModel::new(32, c, 2.0, 0.5).unwrap();
            let m2 = RedundancyModel::new(32, c + dc, 2.0, 0.5).unwrap();
            prop_assert!(state_density(&m, k + 1) > state_density(&m, k));
            // a single-term sum does not depend on c
            if k == 0 {
                prop_assert_eq!(state_density(&m2, 0), state_density(&m, 0));
            } else {
                prop_assert!(state_density(&m2, k) > state_density(&m, k));
            }
            // rho(K) V = rho0 sum_{j<=K} c^j
            let cumulative: f64 = (0..=k).map(|j| 0.5 * c.powi(j as i32)).sum();
            prop_assert!((state_density(&m, k) * 2.0 / cumulative - 1.0).abs() < 1e-12);
        }

        #[test]
        fn error_sample_invariants(
            pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..30),
            theta in 0.0f64..std::f64::consts::TAU,
            len in 0.5f64..2.0,
        ) {
            let region = Region::cube(2, -2.0, 2.0).unwrap();
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
            let cloud = PointCloud::new(region, &pts).unwrap();
            let budget = StepBudget::new(0.5, 2.0).unwrap();
            let v = [len * theta.cos(), len * theta.sin()];
            match continuum_error_trial(&cloud, &[0.0, 0.0], &v, &budget) {
                Ok(e) => {
                    prop_assert!(e.angular >= 0.0 && e.angular <= std::f64::consts::PI);
                    prop_assert!(e.magnitude >= 0.0);
                    // reverse triangle inequality: |‖a‖ - ‖b‖| <= ‖a - b‖
                    let best = pts.iter()
                        .filter(|p| budget.admits(norm(p)))
                        .map(|p| ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min);
                    prop_assert!(e.magnitude <= best + 1e-12);
                }
                Err(ContinuumError::NoReachableState) => {
                    prop_assert!(pts.iter().all(|p| !budget.admits(norm(p))));
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }

    #[test]
    fn state_density_examples() {
        let m = RedundancyModel::new(2, 2.0, 1.0, 1.0).unwrap();
        assert!((state_density(&m, 0) - 1.0).abs() < 1e-15);
        assert!((state_density(&m, 3) - 15.0).abs() < 1e-13);
        let ratio = state_density(&m, 61) / state_density(&m, 60);
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!(RedundancyModel::new(1, 2.0, 1.0, 1.0).is_err());
        assert!(RedundancyModel::new(2, 0.9, 1.0, 1.0).is_err());
    }

    #[test]
    fn error_trial_examples() {
        let region = Region::cube(2, -3.0, 3.0).unwrap();
        let budget = StepBudget::new(0.5, 2.0).unwrap();
        let exact = PointCloud::new(region.clone(), &[vec![1.0, 0.0], vec![-1.0, 1.0]]).unwrap();
        let e = continuum_error_trial(&exact, &[0.0, 0.0], &[1.0, 0.0], &budget).unwrap();
        assert_eq!((e.angular, e.magnitude), (0.0, 0.0));

        let two = PointCloud::new(region.clone(), &[vec![1.0, 0.1], vec![0.9, -0.2]]).unwrap();
        let e = continuum_error_trial(&two, &[0.0, 0.0], &[1.0, 0.0], &budget).unwrap();
        assert!((e.angular - 0.1f64.atan()).abs() < 1e-15);
        assert!((e.angular - 0.09967).abs() < 1e-5);
        assert!((e.magnitude - (1.01f64.sqrt() - 1.0)).abs() < 1e-15);

        let far = PointCloud::new(region.clone(), &[vec![1.2, 0.0]]).unwrap();
        let e = continuum_error_trial(&far, &[0.0, 0.0], &[1.0, 0.0], &budget).unwrap();
        assert_eq!(e.angular, 0.0);
        assert!((e.magnitude - 0.2).abs() < 1e-15);

        let inner = PointCloud::new(region, &[vec![0.1, 0.0], vec![2.5, 0.0]]).unwrap();
        assert_eq!(
            continuum_error_trial(&inner, &[0.0, 0.0], &[1.0, 0.0], &budget),
            Err(ContinuumError::NoReachableState)
        );
        assert!(matches!(
            continuum_error_trial(&far, &[0.0, 0.0], &[3.0, 0.0], &budget),
            Err(ContinuumError::StepOutsideBudget { .. })
        ));
    }

    #[test]
    fn angle_is_stable_near_zero_and_pi() {
        assert_eq!(angle_between(&[1.0, 0.0], &[2.0, 0.0]), 0.0);
        assert!((angle_between(&[1.0, 0.0], &[-1.0, 1e-12]) - std::f64::consts::PI).abs() < 1e-11);
        assert!((angle_between(&[1.0, 0.0, 0.0], &[1.0, 1e-9, 0.0]) - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn sparse_ladder_aborts() {
        let budget = StepBudget::new(0.5, 1.5).unwrap();
        let err = error_scaling_experiment(2, &[0.01, 0.1, 1.0], 200, &budget, 1).unwrap_err();
        assert!(matches!(err, ContinuumError::TooManyEmptyAnnuli { .. }), "{err}");
    }
}
