//! Risk formulas for chain-of-thought policies.
//!
//! The generalization gap is bounded above through the information a policy
//! can absorb from its training traces, and the empirical risk is bounded below
//! by the rate of traces that stop before the required depth. Adding the two
//! sides gives a surrogate `U(L)` whose minimiser is the preferred length.
//! Logarithms are natural throughout.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::dynamics;
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum BoundsError {
    #[error("alphabet size must be at least 2, got {0}")]
    InvalidAlphabet(usize),
    #[error("confidence must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("failure count {n_fail} exceeds corpus size {n}")]
    InvalidCount { n_fail: usize, n: usize },
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::InvalidArgument {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

fn alphabet_ok(alphabet: usize) -> Result<()> {
    if alphabet < 2 {
        Err(BoundsError::InvalidAlphabet(alphabet))
    } else {
        Ok(())
    }
}

/// One recorded reasoning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTTrace {
    pub query_id: u64,
    pub length: usize,
    pub tokens_per_step: Vec<usize>,
    pub success: bool,
    pub terminal_loss: f64,
}

impl CoTTrace {
    pub fn validate(&self, c_max: f64) -> Result<()> {
        let bad = |m: String| Err(BoundsError::InvalidTrace(format!("query {}: {m}", self.query_id)));
        if self.length == 0 {
            return bad("length must be positive".into());
        }
        if self.tokens_per_step.len() != self.length {
            return bad(format!(
                "{} token counts for {} steps",
                self.tokens_per_step.len(),
                self.length
            ));
        }
        if self.tokens_per_step.contains(&0) {
            return bad("every step needs at least one token".into());
        }
        if !(0.0..=c_max).contains(&self.terminal_loss) {
            return bad(format!("terminal loss {} outside [0, {c_max}]", self.terminal_loss));
        }
        if self.success && self.terminal_loss != 0.0 {
            return bad("successful trace with non-zero loss".into());
        }
        Ok(())
    }

    pub fn total_tokens(&self) -> usize {
        self.tokens_per_step.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCorpus {
    traces: Vec<CoTTrace>,
    c_max: f64,
    alphabet: usize,
}

impl TraceCorpus {
    pub fn new(traces: Vec<CoTTrace>, c_max: f64, alphabet: usize) -> Result<Self> {
        positive("c_max", c_max)?;
        alphabet_ok(alphabet)?;
        if traces.is_empty() {
            return Err(BoundsError::EmptyCorpus);
        }
        for t in &traces {
            t.validate(c_max)?;
        }
        Ok(Self {
            traces,
            c_max,
            alphabet,
        })
    }

    pub fn traces(&self) -> &[CoTTrace] {
        &self.traces
    }

    pub fn n(&self) -> usize {
        self.traces.len()
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Mean number of steps, the `E[L]` of the information bound.
    pub fn mean_length(&self) -> f64 {
        stats::compensated_sum(self.traces.iter().map(|t| t.length as f64)) / self.n() as f64
    }

    /// Mean tokens per step over all steps, the `E[|xi|]` of the information bound.
    pub fn mean_step_tokens(&self) -> f64 {
        let steps: usize = self.traces.iter().map(|t| t.length).sum();
        stats::compensated_sum(self.traces.iter().map(|t| t.total_tokens() as f64)) / steps as f64
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.traces {
            serde_json::to_writer(&mut out, t).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads one trace per non-blank line; errors carry 1-based line numbers.
    pub fn read_jsonl<R: BufRead>(input: R, c_max: f64, alphabet: usize) -> Result<Self> {
        let mut traces = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let trace: CoTTrace = serde_json::from_str(&line).map_err(|e| BoundsError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            trace.validate(c_max).map_err(|e| BoundsError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            traces.push(trace);
        }
        Self::new(traces, c_max, alphabet)
    }
}

/// Required depth `L*` of a task and the loss floor `C_fail` of traces that stop short.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub required_depth: usize,
    pub c_fail: f64,
}

impl TaskSpec {
    pub fn new(required_depth: usize, c_fail: f64, c_max: f64) -> Result<Self> {
        if required_depth == 0 {
            return Err(BoundsError::InvalidArgument {
                name: "required_depth",
                reason: "must be at least 1".into(),
            });
        }
        if !(c_fail > 0.0 && c_fail <= c_max) {
            return Err(BoundsError::InvalidArgument {
                name: "c_fail",
                reason: format!("must lie in (0, {c_max}], got {c_fail}"),
            });
        }
        Ok(Self {
            required_depth,
            c_fail,
        })
    }
}

/// Mean terminal loss.
pub fn empirical_risk(corpus: &TraceCorpus) -> f64 {
    stats::compensated_sum(corpus.traces.iter().map(|t| t.terminal_loss)) / corpus.n() as f64
}

/// `E_L * E_xi * ln |A|`.
pub fn mutual_info_cap(e_l: f64, e_xi: f64, alphabet: usize) -> Result<f64> {
    positive("e_l", e_l)?;
    positive("e_xi", e_xi)?;
    alphabet_ok(alphabet)?;
    Ok(e_l * e_xi * (alphabet as f64).ln())
}

/// `sqrt(C_max^2 * E_L * E_xi * ln |A| / (2n))`.
pub fn info_gen_bound(c_max: f64, e_l: f64, e_xi: f64, alphabet: usize, n: usize) -> Result<f64> {
    positive("c_max", c_max)?;
    if n == 0 {
        return Err(BoundsError::InvalidArgument {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    let cap = mutual_info_cap(e_l, e_xi, alphabet)?;
    Ok((c_max * c_max * cap / (2.0 * n as f64)).sqrt())
}

/// `sqrt((KL + ln(2n / delta)) / (2n))`.
pub fn pac_bayes_bound(kl: f64, n: usize, delta: f64) -> Result<f64> {
    if !(kl >= 0.0) || !kl.is_finite() {
        return Err(BoundsError::InvalidArgument {
            name: "kl",
            reason: format!("must be finite and >= 0, got {kl}"),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::InvalidConfidence(delta));
    }
    if n == 0 {
        return Err(BoundsError::InvalidArgument {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    let n = n as f64;
    Ok(((kl + (2.0 * n / delta).ln()) / (2.0 * n)).sqrt())
}

/// `(n_fail / n) * C_fail`.
pub fn empirical_risk_lower_bound(n_fail: usize, n: usize, c_fail: f64) -> Result<f64> {
    if n == 0 || n_fail > n {
        return Err(BoundsError::InvalidCount { n_fail, n });
    }
    positive("c_fail", c_fail)?;
    Ok(n_fail as f64 / n as f64 * c_fail)
}

/// Fraction of traces shorter than the required depth.
pub fn failure_rate(corpus: &TraceCorpus, task: &TaskSpec) -> f64 {
    let short = corpus.traces.iter().filter(|t| t.length < task.required_depth).count();
    short as f64 / corpus.n() as f64
}

/// Distribution of a policy's length given its target mean `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthModel {
    /// Length is exactly `L`.
    Deterministic,
    /// Length is `1 + Poisson(L - 1)`.
    ShiftedPoisson,
}

impl LengthModel {
    /// `P(length < required_depth)` for target mean `mean_length >= 1`.
    pub fn prob_shorter(&self, required_depth: usize, mean_length: usize) -> f64 {
        match self {
            Self::Deterministic => {
                if mean_length < required_depth {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ShiftedPoisson => {
                if required_depth <= 1 {
                    return 0.0;
                }
                let lambda = mean_length.saturating_sub(1) as f64;
                if lambda == 0.0 {
                    return 1.0;
                }
                // P(Poisson(lambda) <= L* - 2) = Q(L* - 1, lambda)
                gamma_ur((required_depth - 1) as f64, lambda)
            }
        }
    }
}

/// Inputs of the overfitting side of `U(L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverfitParams {
    pub c_max: f64,
    pub e_xi: f64,
    pub alphabet: usize,
    pub n: usize,
    /// Capacity multiplier `kappa >= 1`; zero switches the term off.
    pub capacity: f64,
}

impl OverfitParams {
    fn validate(&self) -> Result<()> {
        positive("c_max", self.c_max)?;
        positive("e_xi", self.e_xi)?;
        alphabet_ok(self.alphabet)?;
        if self.n == 0 {
            return Err(BoundsError::InvalidArgument {
                name: "n",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.capacity >= 0.0) || !self.capacity.is_finite() {
            return Err(BoundsError::InvalidArgument {
                name: "capacity",
                reason: format!("must be finite and >= 0, got {}", self.capacity),
            });
        }
        Ok(())
    }

    fn at(&self, length: usize) -> f64 {
        if self.capacity == 0.0 {
            return 0.0;
        }
        let bound = info_gen_bound(self.c_max, length as f64, self.e_xi, self.alphabet, self.n)
            .expect("parameters validated");
        self.capacity * bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub grid: Vec<usize>,
    pub underfit: Vec<f64>,
    pub overfit: Vec<f64>,
    pub total: Vec<f64>,
    pub l_opt: usize,
}

impl TradeoffCurve {
    pub const CSV_HEADER: &'static str = "L,underfit,overfit,total";

    pub fn min_total(&self) -> f64 {
        self.total.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether the minimiser sits strictly between the grid ends.
    pub fn has_interior_argmin(&self) -> bool {
        let first = *self.grid.first().expect("non-empty grid");
        let last = *self.grid.last().expect("non-empty grid");
        first < self.l_opt && self.l_opt < last
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for i in 0..self.grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.grid[i], self.underfit[i], self.overfit[i], self.total[i]
            )?;
        }
        Ok(())
    }
}

/// `U(L) = P(length < L* | L) C_fail + kappa * info_gen_bound(E_L = L)` over `grid`.
pub fn total_error_curve(
    task: &TaskSpec,
    model: LengthModel,
    params: &OverfitParams,
    grid: &[usize],
) -> Result<TradeoffCurve> {
    params.validate()?;
    if grid.is_empty() || grid.contains(&0) {
        return Err(BoundsError::InvalidArgument {
            name: "grid",
            reason: "must be non-empty with positive lengths".into(),
        });
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let underfit: Vec<f64> = grid
        .iter()
        .map(|&l| model.prob_shorter(task.required_depth, l) * task.c_fail)
        .collect();
    let overfit: Vec<f64> = grid.iter().map(|&l| params.at(l)).collect();
    let total: Vec<f64> = underfit.iter().zip(&overfit).map(|(u, o)| u + o).collect();
    let mut best = 0;
    for i in 1..total.len() {
        if total[i] < total[best] {
            best = i;
        }
    }
    Ok(TradeoffCurve {
        l_opt: grid[best],
        grid,
        underfit,
        overfit,
        total,
    })
}

/// Everything needed to evaluate `U(L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    pub task: TaskSpec,
    pub model: LengthModel,
    pub overfit: OverfitParams,
    pub grid: Vec<usize>,
}

impl TradeoffConfig {
    /// `L* = 8`, `C_fail = C_max = 1`, `E_xi = 4`, `|A| = 32`, `n = 10^4`, `L in 1..=32`.
    pub fn reference() -> Self {
        Self {
            task: TaskSpec {
                required_depth: 8,
                c_fail: 1.0,
            },
            model: LengthModel::Deterministic,
            overfit: OverfitParams {
                c_max: 1.0,
                e_xi: 4.0,
                alphabet: 32,
                n: 10_000,
                capacity: 1.0,
            },
            grid: (1..=32).collect(),
        }
    }

    pub fn curve(&self) -> Result<TradeoffCurve> {
        TaskSpec::new(self.task.required_depth, self.task.c_fail, self.overfit.c_max)?;
        total_error_curve(&self.task, self.model, &self.overfit, &self.grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Nondecreasing,
    Nonincreasing,
}

impl Trend {
    fn holds(&self, ys: &[f64]) -> bool {
        match self {
            Self::Nondecreasing => stats::is_nondecreasing(ys),
            Self::Nonincreasing => stats::is_nonincreasing(ys),
        }
    }
}

/// Preferred length as one parameter moves; `lengths` follow `values` in
/// ascending order and `holds` checks `expected` along that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
    pub lengths: Vec<usize>,
    pub expected: Trend,
    pub holds: bool,
}

impl Sweep {
    fn new(parameter: &str, mut points: Vec<(f64, usize)>, expected: Trend) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, lengths): (Vec<f64>, Vec<usize>) = points.into_iter().unzip();
        let ys: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        Self {
            parameter: parameter.into(),
            holds: expected.holds(&ys),
            values,
            lengths,
            expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub required_depths: Vec<usize>,
    pub capacities: Vec<f64>,
    pub failure_costs: Vec<f64>,
    pub noise_scales: Vec<f64>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            required_depths: vec![2, 4, 8, 16],
            capacities: vec![1.0, 2.0, 4.0],
            failure_costs: vec![0.25, 0.5, 1.0],
            noise_scales: vec![0.5, 0.1, 0.02],
        }
    }
}

/// Length on `grid` whose noise scale `1 / L` is closest to `g` (smaller on ties).
pub fn length_for_noise_scale(g: f64, grid: &[usize]) -> Result<usize> {
    positive("noise_scale", g)?;
    let mut best: Option<(f64, usize)> = None;
    for &l in grid {
        let gap = (dynamics::noise_scale(l)? - g).abs();
        if best.is_none_or(|(b, bl)| gap < b || (gap == b && l < bl)) {
            best = Some((gap, l));
        }
    }
    best.map(|(_, l)| l).ok_or(BoundsError::InvalidArgument {
        name: "grid",
        reason: "must be non-empty".into(),
    })
}

/// `L_opt` under each single-parameter sweep around `base`.
pub fn remark_sweeps(base: &TradeoffConfig, plan: &SweepPlan) -> Result<Vec<Sweep>> {
    let l_opt = |cfg: TradeoffConfig| cfg.curve().map(|c| c.l_opt);
    let depth: Vec<(f64, usize)> = plan
        .required_depths
        .par_iter()
        .map(|&d| {
            let mut cfg = base.clone();
            cfg.task.required_depth = d;
            Ok((d as f64, l_opt(cfg)?))
        })
        .collect::<Result<_>>()?;
    let capacity: Vec<(f64, usize)> = plan
        .capacities
        .par_iter()
        .map(|&k| {
            if k < 1.0 {
                return Err(BoundsError::InvalidArgument {
                    name: "capacities",
                    reason: format!("capacity multipliers must be >= 1, got {k}"),
                });
            }
            let mut cfg = base.clone();
            cfg.overfit.capacity = k;
            Ok((k, l_opt(cfg)?))
        })
        .collect::<Result<_>>()?;
    let cost: Vec<(f64, usize)> = plan
        .failure_costs
        .par_iter()
        .map(|&c| {
            let mut cfg = base.clone();
            cfg.task.c_fail = c;
            Ok((c, l_opt(cfg)?))
        })
        .collect::<Result<_>>()?;
    let noise: Vec<(f64, usize)> = plan
        .noise_scales
        .iter()
        .map(|&g| Ok((g, length_for_noise_scale(g, &base.grid)?)))
        .collect::<Result<_>>()?;
    Ok(vec![
        Sweep::new("required_depth", depth, Trend::Nondecreasing),
        Sweep::new("capacity", capacity, Trend::Nonincreasing),
        Sweep::new("c_fail", cost, Trend::Nondecreasing),
        Sweep::new("noise_scale", noise, Trend::Nonincreasing),
    ])
}
