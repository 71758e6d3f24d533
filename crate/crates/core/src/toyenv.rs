//! A synthetic reasoning task small enough to enumerate.
//!
//! A query of depth `L*` is solved by `L* - 1` reasoning steps, each picking
//! the one correct token out of `width`, followed by an answer step. Any other
//! completion is a dead end. A tabular softmax policy is trained on the task
//! with score-function gradients and a rule-based success reward.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, CoTTrace, TaskSpec, TraceCorpus};
use crate::continuum::ToyGrammar;
use crate::rng::{self, LabRng};
use crate::stats;

pub type Token = u32;

/// Loss of states from which no minimum is reachable.
pub const C_DEAD: f64 = 2.0;

/// Largest state space the exhaustive enumerator will build.
pub const MAX_ENUMERATED_STATES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToyError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("minimum is not reachable from this state")]
    NotReachable,
    #[error("state is terminal")]
    TerminalState,
    #[error("state space has more than {MAX_ENUMERATED_STATES} states")]
    TooManyStates,
    #[error("non-finite policy score after episode {episode}")]
    TrainingDivergence { episode: usize },
    #[error("depths must be strictly increasing and positive")]
    InvalidDepths,
}

pub type Result<T> = std::result::Result<T, ToyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub answer: Token,
    pub depth: usize,
    pub width: usize,
}

impl Query {
    pub fn new(id: u64, depth: usize, width: usize) -> Result<Self> {
        if depth == 0 || width == 0 {
            return Err(ToyError::InvalidTask(format!(
                "depth and width must be positive, got {depth} and {width}"
            )));
        }
        Ok(Self {
            id,
            answer: (rng::mix64(id) % 1000) as Token,
            depth,
            width,
        })
    }

    /// The correct reasoning token at `level`.
    pub fn correct_token(&self, level: usize) -> Token {
        (rng::derive_seed(self.id, level as u64) % self.width as u64) as Token
    }

    pub fn correct_path(&self) -> Vec<Token> {
        (0..self.depth - 1).map(|i| self.correct_token(i)).collect()
    }

    /// The answer emitted after `reasoning`: the golden answer only on the correct path.
    pub fn answer_after(&self, reasoning: &[Token]) -> Token {
        if reasoning.len() == self.depth - 1 && reasoning.iter().enumerate().all(|(i, &t)| t == self.correct_token(i)) {
            self.answer
        } else {
            self.answer.wrapping_add(1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Reason(Token),
    Answer(Token),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Continue(Token),
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReasoningState {
    pub query: Query,
    pub steps: Vec<Step>,
    pub terminal: bool,
}

impl ReasoningState {
    pub fn fresh(query: Query) -> Self {
        Self {
            query,
            steps: Vec::new(),
            terminal: false,
        }
    }

    pub fn reasoning(&self) -> Vec<Token> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Reason(t) => Some(*t),
                Step::Answer(_) => None,
            })
            .collect()
    }

    pub fn answered(&self) -> bool {
        matches!(self.steps.last(), Some(Step::Answer(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Minimum {
    pub query_id: u64,
    pub steps: Vec<Step>,
    pub answer: Token,
}

/// Every minimum of `query`; this task family has exactly one.
pub fn minimums(query: &Query) -> Vec<Minimum> {
    let mut steps: Vec<Step> = query.correct_path().into_iter().map(Step::Reason).collect();
    steps.push(Step::Answer(query.answer));
    vec![Minimum {
        query_id: query.id,
        steps,
        answer: query.answer,
    }]
}

/// Minimums whose step list extends the state's steps. A terminal state can
/// no longer be extended, so only a minimum equal to it remains.
pub fn reachable_minimums(state: &ReasoningState) -> Vec<Minimum> {
    minimums(&state.query)
        .into_iter()
        .filter(|m| {
            if state.terminal {
                m.steps == state.steps
            } else {
                m.steps.starts_with(&state.steps)
            }
        })
        .collect()
}

/// `|xi| - |xi_o|` for a reachable minimum.
pub fn reachable_distance(state: &ReasoningState, minimum: &Minimum) -> Result<usize> {
    if reachable_minimums(state).contains(minimum) {
        Ok(minimum.steps.len() - state.steps.len())
    } else {
        Err(ToyError::NotReachable)
    }
}

/// Closest reachable minimum and its distance.
pub fn nearest_minimum(state: &ReasoningState) -> Option<(Minimum, usize)> {
    reachable_minimums(state)
        .into_iter()
        .map(|m| {
            let d = m.steps.len() - state.steps.len();
            (m, d)
        })
        .min_by_key(|(_, d)| *d)
}

pub fn is_minimum(state: &ReasoningState) -> bool {
    nearest_minimum(state).is_some_and(|(_, d)| d == 0)
}

/// `dist / L*` when a minimum is reachable, [`C_DEAD`] otherwise.
pub fn reasoning_loss(state: &ReasoningState) -> f64 {
    match nearest_minimum(state) {
        Some((_, d)) => d as f64 / state.query.depth as f64,
        None => C_DEAD,
    }
}

/// A query together with the step budget `L_max` and the grammar that
/// realizes each step as tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEnv {
    pub query: Query,
    pub budget: usize,
    pub grammar: ToyGrammar,
    pub max_fillers: usize,
}

impl TaskEnv {
    pub fn new(query: Query, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(ToyError::InvalidTask("step budget must be at least 1".into()));
        }
        Ok(Self {
            query,
            budget,
            grammar: ToyGrammar::default(),
            max_fillers: 2,
        })
    }

    /// `C_fail = C_max =` [`C_DEAD`].
    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            required_depth: self.query.depth,
            c_fail: C_DEAD,
        }
    }

    pub fn actions(&self) -> Vec<Action> {
        (0..self.query.width as Token)
            .map(Action::Continue)
            .chain(std::iter::once(Action::Answer))
            .collect()
    }

    pub fn apply(&self, state: &ReasoningState, action: Action) -> Result<ReasoningState> {
        if state.terminal {
            return Err(ToyError::TerminalState);
        }
        let mut next = state.clone();
        match action {
            Action::Continue(t) => {
                if t as usize >= self.query.width {
                    return Err(ToyError::InvalidTask(format!("token {t} outside width {}", self.query.width)));
                }
                next.steps.push(Step::Reason(t));
            }
            Action::Answer => {
                let answer = self.query.answer_after(&state.reasoning());
                next.steps.push(Step::Answer(answer));
                next.terminal = true;
            }
        }
        if next.steps.len() >= self.budget {
            next.terminal = true;
        }
        Ok(next)
    }

    /// Every state reachable from the fresh state within the budget.
    pub fn enumerate_states(&self) -> Result<Vec<ReasoningState>> {
        let mut out = vec![ReasoningState::fresh(self.query)];
        let mut frontier = out.clone();
        while let Some(state) = frontier.pop() {
            if state.terminal {
                continue;
            }
            for a in self.actions() {
                let next = self.apply(&state, a)?;
                out.push(next.clone());
                if out.len() > MAX_ENUMERATED_STATES {
                    return Err(ToyError::TooManyStates);
                }
                frontier.push(next);
            }
        }
        Ok(out)
    }
}

/// Tabular softmax policy over `{continue with token j, answer}`, keyed by
/// the reasoning tokens emitted so far. Unseen prefixes score zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    width: usize,
    temperature: f64,
    scores: HashMap<Vec<Token>, Vec<f64>>,
}

impl Policy {
    pub fn uniform(width: usize, temperature: f64) -> Result<Self> {
        if width == 0 || !(temperature > 0.0) || !temperature.is_finite() {
            return Err(ToyError::InvalidConfig(format!(
                "need width >= 1 and a positive temperature, got {width} and {temperature}"
            )));
        }
        Ok(Self {
            width,
            temperature,
            scores: HashMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Scores for `prefix`; the last entry belongs to the answer action.
    pub fn set_scores(&mut self, prefix: Vec<Token>, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.width + 1 {
            return Err(ToyError::InvalidConfig(format!(
                "expected {} scores, got {}",
                self.width + 1,
                scores.len()
            )));
        }
        self.scores.insert(prefix, scores);
        Ok(())
    }

    pub fn probabilities(&self, prefix: &[Token]) -> Vec<f64> {
        let n = self.width + 1;
        let Some(scores) = self.scores.get(prefix) else {
            return vec![1.0 / n as f64; n];
        };
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| ((s - top) / self.temperature).exp()).collect();
        let z = stats::compensated_sum(w.iter().copied());
        w.into_iter().map(|x| x / z).collect()
    }

    fn action_at(&self, index: usize) -> Action {
        if index == self.width {
            Action::Answer
        } else {
            Action::Continue(index as Token)
        }
    }

    fn entry(&mut self, prefix: &[Token]) -> &mut Vec<f64> {
        let n = self.width + 1;
        self.scores.entry(prefix.to_vec()).or_insert_with(|| vec![0.0; n])
    }

    fn is_finite(&self) -> bool {
        self.scores.values().flatten().all(|s| s.is_finite())
    }
}

fn sample_index(probs: &[f64], rng: &mut LabRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[derive(Debug, Clone)]
struct Episode {
    decisions: Vec<(Vec<Token>, usize)>,
    trace: CoTTrace,
}

fn run_episode(policy: &Policy, env: &TaskEnv, rng: &mut LabRng) -> Episode {
    let lengths = env.grammar.realization_lengths(env.max_fillers);
    let mut state = ReasoningState::fresh(env.query);
    let mut decisions = Vec::new();
    let mut tokens_per_step = Vec::new();
    while !state.terminal {
        let prefix = state.reasoning();
        let idx = sample_index(&policy.probabilities(&prefix), rng);
        state = env.apply(&state, policy.action_at(idx)).expect("policy acts on a live state");
        decisions.push((prefix, idx));
        tokens_per_step.push(rng.random_range(lengths.clone()));
    }
    let success = is_minimum(&state);
    Episode {
        decisions,
        trace: CoTTrace {
            query_id: env.query.id,
            length: state.steps.len(),
            tokens_per_step,
            success,
            terminal_loss: reasoning_loss(&state),
        },
    }
}

/// Samples one trace until an answer is emitted or the budget runs out.
pub fn rollout(policy: &Policy, env: &TaskEnv, seed: u64) -> CoTTrace {
    run_episode(policy, env, &mut rng::seeded(seed)).trace
}

/// `n` independent rollouts as a corpus with `C_max =` [`C_DEAD`].
pub fn generate_corpus(policy: &Policy, env: &TaskEnv, n: usize, seed: u64) -> bounds::Result<TraceCorpus> {
    let traces: Vec<CoTTrace> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_episode(policy, env, &mut rng::stream(seed, i)).trace)
        .collect();
    TraceCorpus::new(traces, C_DEAD, env.grammar.vocabulary().len().max(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Score-function gradient with the raw reward.
    Plain,
    /// Reward minus the running mean of earlier rewards.
    MeanBaseline,
    /// Groups of rollouts; rewards standardised within each group.
    GroupRelative { group_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// Weight of the entropy bonus; larger values keep the policy noisier.
    pub entropy_weight: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(ToyError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.entropy_weight >= 0.0) || !self.entropy_weight.is_finite() {
            return Err(ToyError::InvalidConfig(format!(
                "entropy weight must be >= 0, got {}",
                self.entropy_weight
            )));
        }
        if self.episodes == 0 {
            return Err(ToyError::InvalidConfig("episodes must be at least 1".into()));
        }
        if let Algorithm::GroupRelative { group_size } = self.algorithm {
            if group_size < 2 {
                return Err(ToyError::InvalidConfig(format!("group size must be >= 2, got {group_size}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: Policy,
    /// Sampled length of every training episode, in order.
    pub lengths: Vec<f64>,
    /// Expected rollout length under the final policy.
    pub converged_length: f64,
}

/// Mean over the final tenth of a length series.
pub fn tail_mean(series: &[f64]) -> f64 {
    let tail = (series.len() / 10).max(1).min(series.len());
    stats::compensated_sum(series[series.len() - tail..].iter().copied()) / tail as f64
}

/// Exact expected rollout length of `policy` on `env`. Branches whose
/// probability falls below `1e-15` are dropped, so trees too large to
/// enumerate stay tractable.
pub fn expected_length(policy: &Policy, env: &TaskEnv) -> f64 {
    fn walk(policy: &Policy, env: &TaskEnv, state: &ReasoningState, mass: f64, acc: &mut stats::NeumaierSum) {
        if state.terminal {
            acc.add(mass * state.steps.len() as f64);
            return;
        }
        let probs = policy.probabilities(&state.reasoning());
        for (i, p) in probs.into_iter().enumerate() {
            let m = mass * p;
            if m < 1e-15 {
                continue;
            }
            let next = env.apply(state, policy.action_at(i)).expect("live state");
            walk(policy, env, &next, m, acc);
        }
    }
    let mut acc = stats::NeumaierSum::new();
    walk(policy, env, &ReasoningState::fresh(env.query), 1.0, &mut acc);
    acc.value()
}

fn reinforce(policy: &mut Policy, episode: &Episode, advantage: f64, config: &TrainConfig) {
    let t = policy.temperature;
    let lr = config.learning_rate;
    let beta = config.entropy_weight;
    for (prefix, chosen) in &episode.decisions {
        let p = policy.probabilities(prefix);
        let entropy = -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        let scores = policy.entry(prefix);
        for (j, s) in scores.iter_mut().enumerate() {
            let indicator = if j == *chosen { 1.0 } else { 0.0 };
            let score_grad = advantage * (indicator - p[j]) / t;
            let entropy_grad = if p[j] > 0.0 { -p[j] * (p[j].ln() + entropy) / t } else { 0.0 };
            *s += lr * (score_grad + beta * entropy_grad);
        }
    }
}

fn reward(trace: &CoTTrace) -> f64 {
    if trace.success {
        1.0
    } else {
        0.0
    }
}

/// Trains `policy` on `env` for `config.episodes` rollouts.
pub fn train(mut policy: Policy, env: &TaskEnv, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if policy.width != env.query.width {
        return Err(ToyError::InvalidConfig(format!(
            "policy width {} does not match task width {}",
            policy.width, env.query.width
        )));
    }
    let mut lengths = Vec::with_capacity(config.episodes);
    match config.algorithm {
        Algorithm::Plain | Algorithm::MeanBaseline => {
            let mut reward_sum = stats::NeumaierSum::new();
            for e in 0..config.episodes {
                let episode = run_episode(&policy, env, &mut rng::stream(config.seed, e as u64));
                let r = reward(&episode.trace);
                let advantage = match config.algorithm {
                    Algorithm::MeanBaseline if e > 0 => r - reward_sum.value() / e as f64,
                    Algorithm::MeanBaseline => 0.0,
                    _ => r,
                };
                reward_sum.add(r);
                reinforce(&mut policy, &episode, advantage, config);
                if !policy.is_finite() {
                    return Err(ToyError::TrainingDivergence { episode: e });
                }
                lengths.push(episode.trace.length as f64);
            }
        }
        Algorithm::GroupRelative { group_size } => {
            let mut start = 0;
            while start < config.episodes {
                let end = (start + group_size).min(config.episodes);
                let group: Vec<Episode> = (start..end)
                    .into_par_iter()
                    .map(|e| run_episode(&policy, env, &mut rng::stream(config.seed, e as u64)))
                    .collect();
                let rewards: Vec<f64> = group.iter().map(|g| reward(&g.trace)).collect();
                let mean = stats::compensated_sum(rewards.iter().copied()) / rewards.len() as f64;
                let sd = stats::sample_variance(&rewards).unwrap_or(0.0).sqrt();
                for (episode, r) in group.iter().zip(&rewards) {
                    let advantage = if sd > 0.0 { (r - mean) / sd } else { 0.0 };
                    reinforce(&mut policy, episode, advantage, config);
                    lengths.push(episode.trace.length as f64);
                }
                if !policy.is_finite() {
                    return Err(ToyError::TrainingDivergence { episode: end - 1 });
                }
                start = end;
            }
        }
    }
    let converged_length = expected_length(&policy, env);
    Ok(TrainOutcome {
        policy,
        lengths,
        converged_length,
    })
}

/// Task and policy shape shared by every run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub width: usize,
    /// Steps allowed beyond the required depth.
    pub budget_slack: usize,
    pub temperature: f64,
    pub train: TrainConfig,
}

impl SweepSetup {
    pub fn env(&self, depth: usize) -> Result<TaskEnv> {
        let query = Query::new(rng::derive_seed(self.train.seed, depth as u64), depth, self.width)?;
        TaskEnv::new(query, depth + self.budget_slack)
    }

    /// Trains a fresh policy on a task of the given depth.
    pub fn run(&self, depth: usize) -> Result<TrainOutcome> {
        let env = self.env(depth)?;
        train(Policy::uniform(self.width, self.temperature)?, &env, &self.train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub depth: usize,
    pub converged_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    pub rows: Vec<DifficultyRow>,
    pub spearman: Option<f64>,
}

/// Converged length per required depth, with its rank correlation to depth.
pub fn difficulty_sweep(depths: &[usize], setup: &SweepSetup) -> Result<DifficultyReport> {
    if depths.is_empty() || depths[0] == 0 || !stats::is_strictly_increasing(depths) {
        return Err(ToyError::InvalidDepths);
    }
    let rows: Vec<DifficultyRow> = depths
        .par_iter()
        .map(|&depth| {
            Ok(DifficultyRow {
                depth,
                converged_length: setup.run(depth)?.converged_length,
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.converged_length).collect();
    Ok(DifficultyReport {
        spearman: stats::spearman(&xs, &ys),
        rows,
    })
}
