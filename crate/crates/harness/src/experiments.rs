//! One runner per experiment kind.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs::File;
use std::io::BufReader;

use cotlab_core::bounds::{self, TaskSpec, TraceCorpus, TradeoffCurve};
use cotlab_core::continuum::{self, StepBudget};
use cotlab_core::dynamics::{self, LossLandscape, NoiseField, NoiseSpec, StepKind};
use cotlab_core::geometry::{self, NnLaw};
use cotlab_core::rng;
use cotlab_core::stats;
use cotlab_core::toyenv::{self, Algorithm, SweepSetup, TrainConfig, TrainOutcome};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::*;
use crate::report::Assertion;
use crate::RunError;

/// Everything a runner produces before it is written to disk.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub csv: String,
    /// Additional files, named relative to the output directory.
    pub extra_files: Vec<(String, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
    pub values: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn new(header: &str) -> Self {
        Self {
            csv: format!("{header}\n"),
            ..Self::default()
        }
    }

    fn row(&mut self, fields: &[&dyn Display]) {
        let line: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        writeln!(self.csv, "{}", line.join(",")).expect("writing to a String");
    }

    fn assert(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    fn value(&mut self, key: impl Into<String>, v: Value) {
        self.values.insert(key.into(), v);
    }
}

fn fail(e: impl Display) -> RunError {
    RunError::Experiment(e.to_string())
}

pub fn execute(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let header = config.kind.csv_header();
    let seed = config.seed;
    let mut out = Outcome::new(header);
    match &config.params {
        Params::NnValidate(p) => nn_validate(p, seed, &mut out)?,
        Params::VoidScaling(p) => void_scaling(p, seed, &mut out)?,
        Params::ContinuumScaling(p) => continuum_scaling(p, seed, &mut out)?,
        Params::SdeVariance(p) => sde_variance(p, seed, &mut out)?,
        Params::Basin(p) => basin(p, seed, &mut out)?,
        Params::BoundsEval(p) => bounds_eval(p, seed, &mut out)?,
        Params::Tradeoff(p) => tradeoff(p, &mut out)?,
        Params::RemarkSweeps(p) => remark_sweeps(p, &mut out)?,
        Params::ToyRl(p) => toy_rl(p, seed, &mut out)?,
        Params::DifficultySweep(p) => difficulty_sweep(p, seed, &mut out)?,
    }
    Ok(out)
}

fn spans_two_decades(densities: &[f64]) -> bool {
    let lo = densities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = densities.iter().copied().fold(0.0, f64::max);
    let mut distinct = densities.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct.len() >= 3 && hi / lo >= 100.0 * (1.0 - 1e-12)
}

fn nn_validate(p: &NnValidateParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    let ladder = spans_two_decades(&p.densities);
    let mut cell = 0u64;
    for &d in &p.dimensions {
        for &k in &p.orders {
            let mut means = Vec::with_capacity(p.densities.len());
            for &rho in &p.densities {
                let law = NnLaw::new(rho, d, k).map_err(fail)?;
                let est = geometry::nn_monte_carlo(&law, p.trials, rng::derive_seed(seed, cell)).map_err(fail)?;
                cell += 1;
                let expected = geometry::expected_nn_distance(&law);
                let z = (est.mean - expected) / est.std_err;
                out.row(&[&d, &k, &rho, &p.trials, &est.mean, &est.std_err, &expected, &z]);
                out.assert(
                    Assertion::within(format!("mean-d{d}-k{k}-rho{rho}"), est.mean, expected, p.z * est.std_err)
                        .with_detail(format!("z = {z:.3}")),
                );
                means.push(est.mean);
            }
            if ladder {
                let slope = stats::log_log_slope(&p.densities, &means).ok_or_else(|| fail("degenerate regression"))?;
                out.value(format!("slope-d{d}-k{k}"), json!(slope));
                out.assert(Assertion::within(
                    format!("slope-d{d}-k{k}"),
                    slope,
                    -1.0 / d as f64,
                    p.slope_tolerance,
                ));
            }
        }
    }
    if !ladder {
        out.warnings
            .push("density slope not checked: needs 3 distinct densities spanning two decades".into());
    }
    Ok(())
}

fn void_scaling(p: &VoidScalingParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    for &d in &p.dimensions {
        let fit = geometry::void_scaling_fit(d, &p.densities, p.trials, p.candidates_per_point, rng::derive_seed(seed, d as u64))
            .map_err(fail)?;
        for (rho, est) in fit.densities.iter().zip(&fit.estimates) {
            out.row(&[&d, rho, &p.trials, &est.mean, &est.std_err]);
        }
        out.value(format!("slope-d{d}"), json!(fit.slope));
        out.assert(Assertion::within(format!("slope-d{d}"), fit.slope, -1.0 / d as f64, p.slope_tolerance));
    }
    Ok(())
}

fn continuum_scaling(p: &ContinuumScalingParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    let budget = StepBudget::new(p.r_min, p.r_max).map_err(fail)?;
    for &d in &p.dimensions {
        let es = continuum::error_scaling_experiment(d, &p.densities, p.trials, &budget, rng::derive_seed(seed, d as u64))
            .map_err(fail)?;
        for l in &es.levels {
            out.row(&[
                &d,
                &l.density,
                &l.trials,
                &l.angular.mean,
                &l.angular.std_err,
                &l.magnitude.mean,
                &l.magnitude.std_err,
                &l.empty_annuli,
            ]);
        }
        let mut order: Vec<&continuum::ErrorLevel> = es.levels.iter().collect();
        order.sort_by(|a, b| a.density.total_cmp(&b.density));
        let angular: Vec<f64> = order.iter().map(|l| l.angular.mean).collect();
        let magnitude: Vec<f64> = order.iter().map(|l| l.magnitude.mean).collect();
        out.assert(Assertion::check(
            format!("angular-decreasing-d{d}"),
            stats::is_strictly_decreasing(&angular),
            angular[angular.len() - 1],
            "mean angular error strictly decreases with density",
        ));
        out.assert(Assertion::check(
            format!("magnitude-decreasing-d{d}"),
            stats::is_strictly_decreasing(&magnitude),
            magnitude[magnitude.len() - 1],
            "mean magnitude error strictly decreases with density",
        ));
        let target = -1.0 / d as f64;
        out.value(format!("slope-angular-d{d}"), json!(es.slope_angular));
        out.value(format!("slope-magnitude-d{d}"), json!(es.slope_magnitude));
        out.assert(Assertion::within(format!("slope-angular-d{d}"), es.slope_angular, target, p.slope_tolerance));
        out.assert(Assertion::within(format!("slope-magnitude-d{d}"), es.slope_magnitude, target, p.slope_tolerance));
    }
    Ok(())
}

/// Largest relative gap between `F / L^2` and `g F / L` at `g = 1 / L` over random pairs.
pub fn noise_identity_gap(pairs: usize, seed: u64) -> Result<f64, RunError> {
    let bowl = LossLandscape::unit_bowl(1).map_err(fail)?;
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let f = rng.random_range(1e-3..1e3);
        let length = rng.random_range(1..=100_000usize);
        let field = NoiseField::constant(f);
        let g = dynamics::noise_scale(length).map_err(fail)?;
        let sde = dynamics::sde_step_noise_variance(&NoiseSpec::new(g, field).map_err(fail)?, &bowl, length, &[0.0])
            .map_err(fail)?;
        let discrete = dynamics::discrete_step_noise_variance(&field, &bowl, length, &[0.0]).map_err(fail)?;
        worst = worst.max((sde - discrete).abs() / discrete);
    }
    Ok(worst)
}

/// Relative agreement allowed for the noise identity in floating point.
pub const IDENTITY_ULPS: f64 = 4.0 * f64::EPSILON;

fn sde_variance(p: &SdeVarianceParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    let gap = noise_identity_gap(p.identity_pairs, rng::derive_seed(seed, 0))?;
    out.value("identity-max-relative-gap", json!(gap));
    out.assert(
        Assertion::within("noise-identity", gap, 0.0, IDENTITY_ULPS)
            .with_detail(format!("{} random (F, L) pairs", p.identity_pairs)),
    );

    let bowl = LossLandscape::unit_bowl(1).map_err(fail)?;
    let field = NoiseField::constant(p.variance);
    let s = [0.5];
    for (i, &length) in p.lengths.iter().enumerate() {
        let level = rng::derive_seed(seed, 1 + i as u64);
        let analytic = dynamics::discrete_step_noise_variance(&field, &bowl, length, &s).map_err(fail)?;
        let discrete_spec = NoiseSpec::discrete(field).map_err(fail)?;
        let sde_spec = NoiseSpec::new(dynamics::noise_scale(length).map_err(fail)?, field).map_err(fail)?;
        let discrete = dynamics::empirical_step_noise_variance(
            StepKind::Discrete,
            &bowl,
            &s,
            length,
            &discrete_spec,
            p.samples,
            rng::derive_seed(level, 0),
        )
        .map_err(fail)?;
        let sde = dynamics::empirical_step_noise_variance(
            StepKind::Sde,
            &bowl,
            &s,
            length,
            &sde_spec,
            p.samples,
            rng::derive_seed(level, 1),
        )
        .map_err(fail)?;
        out.row(&[&length, &p.variance, &analytic, &discrete, &sde]);
        out.assert(Assertion::within(format!("discrete-vs-analytic-L{length}"), discrete / analytic, 1.0, p.tolerance));
        out.assert(Assertion::within(format!("sde-vs-analytic-L{length}"), sde / analytic, 1.0, p.tolerance));
        out.assert(Assertion::within(format!("discrete-vs-sde-L{length}"), discrete / sde, 1.0, p.tolerance));
    }

    let (sde_end, discrete_end, closed_form) = gradient_flow_endpoints(p.flow_length)?;
    let flow_target = (-1.0f64).exp();
    out.value("flow-sde-endpoint", json!(sde_end));
    out.value("flow-discrete-endpoint", json!(discrete_end));
    out.assert(Assertion::within(
        format!("sde-noiseless-flow-L{}", p.flow_length),
        sde_end,
        flow_target,
        p.flow_tolerance,
    ));
    out.assert(Assertion::within(
        format!("discrete-noiseless-L{}", p.flow_length),
        discrete_end,
        closed_form,
        FLOW_RELATIVE * closed_form,
    ));
    Ok(())
}

/// Relative slack for the discrete noiseless closed form, a few roundings per step.
pub const FLOW_RELATIVE: f64 = 1e-12;

/// Endpoints on the unit bowl from `s0 = 1`: noiseless SDE, noiseless
/// discrete descent, and `(1 - 1/L)^L`.
pub fn gradient_flow_endpoints(length: usize) -> Result<(f64, f64, f64), RunError> {
    let bowl = LossLandscape::unit_bowl(1).map_err(fail)?;
    let quiet = NoiseField::constant(0.0);
    let sde = dynamics::sde_integrate(&bowl, &[1.0], 0.0, length, &quiet, 0).map_err(fail)?;
    let discrete =
        dynamics::discrete_descent(&bowl, &[1.0], length, &NoiseSpec::discrete(quiet).map_err(fail)?, 0).map_err(fail)?;
    let l = length as f64;
    let closed = (1.0 - 1.0 / l).powi(length as i32);
    Ok((sde.final_state()[0], discrete.final_state()[0], closed))
}

fn basin(p: &BasinParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    let report = dynamics::basin_selection_experiment(&p.wells, &p.start, &p.lengths, p.ensembles, &p.noise, p.perturbation, seed)
        .map_err(fail)?;
    for r in &report.rows {
        out.row(&[&r.length, &r.flat_fraction, &r.sharp_fraction, &r.perturbed_loss.mean, &r.perturbed_loss.std_err]);
    }
    if let Some(w) = &report.warning {
        out.warnings.push(w.clone());
    }
    let best = report.best_length().unwrap_or(0);
    out.value("best_length", json!(best));
    out.value("reference_version", json!(dynamics::DoubleWell::REFERENCE_VERSION));
    out.assert(Assertion::check(
        "interior-minimum",
        report.has_interior_minimum(),
        best as f64,
        "perturbed loss is lowest strictly inside the length grid",
    ));
    Ok(())
}

fn evaluate(case: &BoundCase) -> bounds::Result<f64> {
    match case.bound {
        BoundKind::MutualInfoCap => bounds::mutual_info_cap(case.e_l, case.e_xi, case.alphabet),
        BoundKind::Info => bounds::info_gen_bound(case.c_max, case.e_l, case.e_xi, case.alphabet, case.n),
        BoundKind::PacBayes => bounds::pac_bayes_bound(case.kl, case.n, case.delta),
        BoundKind::Lower => bounds::empirical_risk_lower_bound(case.n_fail, case.n, case.c_fail),
    }
}

/// Random draws of every monotonicity property of the bound calculators.
/// Returns the number of violated checks and the number made.
pub fn monotonicity_violations(draws: usize, seed: u64) -> bounds::Result<(usize, usize)> {
    let mut rng = rng::seeded(seed);
    let (mut bad, mut total) = (0usize, 0usize);
    let mut check = |ok: bool| {
        total += 1;
        bad += usize::from(!ok);
    };
    for _ in 0..draws {
        let c = rng.random_range(0.01..10.0);
        let el = rng.random_range(0.1..100.0);
        let ex = rng.random_range(0.1..100.0);
        let a = rng.random_range(2..1000usize);
        let n = rng.random_range(1..100_000usize);
        let kl = rng.random_range(0.0..50.0);
        let delta = rng.random_range(0.001..0.999);
        let bump = rng.random_range(1.01..3.0);

        let cap = bounds::mutual_info_cap(el, ex, a)?;
        check(cap >= 0.0);
        check(bounds::mutual_info_cap(el * bump, ex, a)? > cap);
        check(bounds::mutual_info_cap(el, ex * bump, a)? > cap);
        check(bounds::mutual_info_cap(el, ex, a + 1)? > cap);

        let info = bounds::info_gen_bound(c, el, ex, a, n)?;
        check(info >= 0.0);
        check(bounds::info_gen_bound(c * bump, el, ex, a, n)? > info);
        check(bounds::info_gen_bound(c, el * bump, ex, a, n)? > info);
        check(bounds::info_gen_bound(c, el, ex * bump, a, n)? > info);
        check(bounds::info_gen_bound(c, el, ex, a + 1, n)? > info);
        check(bounds::info_gen_bound(c, el, ex, a, n + 1)? < info);

        let pb = bounds::pac_bayes_bound(kl, n, delta)?;
        check(pb >= 0.0);
        check(bounds::pac_bayes_bound(kl + bump, n, delta)? > pb);
        check(bounds::pac_bayes_bound(kl, n + 1, delta)? < pb);
        check(bounds::pac_bayes_bound(kl, n, (delta * bump).min(0.9995))? <= pb);

        let n_fail = rng.random_range(0..=n);
        let lb = bounds::empirical_risk_lower_bound(n_fail, n, c)?;
        check((0.0..=c).contains(&lb));
        check(bounds::empirical_risk_lower_bound(n_fail, n, c * bump)? >= lb);
        if n_fail < n {
            check(bounds::empirical_risk_lower_bound(n_fail + 1, n, c)? > lb);
        }
    }
    Ok((bad, total))
}

/// Checks a corpus against the lower bound: every failed trace carries loss
/// at least `c_fail`, hence the empirical risk is at least the bound.
pub fn corpus_lower_bound(corpus: &TraceCorpus, task: &TaskSpec) -> bounds::Result<(f64, f64, usize)> {
    let short = corpus.traces().iter().filter(|t| t.length < task.required_depth);
    let low_loss = short.filter(|t| t.terminal_loss < task.c_fail).count();
    let n_fail = (bounds::failure_rate(corpus, task) * corpus.n() as f64).round() as usize;
    let lb = bounds::empirical_risk_lower_bound(n_fail, corpus.n(), task.c_fail)?;
    Ok((bounds::empirical_risk(corpus), lb, low_loss))
}

fn bounds_eval(p: &BoundsEvalParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    for case in &p.cases {
        let value = evaluate(case).map_err(fail)?;
        let expected = case.expected.map(|e| e.to_string()).unwrap_or_default();
        out.row(&[&case.name, &case.bound.name(), &value, &expected]);
        out.value(format!("case-{}", case.name), json!(value));
        if let Some(e) = case.expected {
            out.assert(Assertion::within(format!("case-{}", case.name), value, e, p.tolerance));
        }
    }
    if p.monotonicity_draws > 0 {
        let (bad, total) = monotonicity_violations(p.monotonicity_draws, rng::derive_seed(seed, 0)).map_err(fail)?;
        out.value("monotonicity-checks", json!(total));
        out.assert(Assertion::within("monotonicity", bad as f64, 0.0, 0.0).with_detail(format!(
            "{bad} of {total} checks violated over {} draws",
            p.monotonicity_draws
        )));
    }
    if let Some(c) = &p.corpus {
        let file = File::open(&c.path).map_err(|e| fail(format!("{}: {e}", c.path.display())))?;
        let corpus = TraceCorpus::read_jsonl(BufReader::new(file), c.c_max, c.alphabet).map_err(fail)?;
        let task = TaskSpec::new(c.required_depth, c.c_fail, c.c_max).map_err(fail)?;
        let (risk, lb, low_loss) = corpus_lower_bound(&corpus, &task).map_err(fail)?;
        let info = bounds::info_gen_bound(c.c_max, corpus.mean_length(), corpus.mean_step_tokens(), c.alphabet, corpus.n())
            .map_err(fail)?;
        out.row(&[&"corpus", &"empirical-risk", &risk, &""]);
        out.row(&[&"corpus", &"lower", &lb, &""]);
        out.row(&[&"corpus", &"info", &info, &""]);
        out.assert(Assertion::check(
            "corpus-failed-loss",
            low_loss == 0,
            low_loss as f64,
            "failed traces with loss below c_fail",
        ));
        out.assert(Assertion::check("corpus-lower-bound", risk >= lb - 1e-12, risk - lb, "empirical risk minus lower bound"));
    }
    Ok(())
}

fn write_curve(curve: &TradeoffCurve, out: &mut Outcome) {
    for i in 0..curve.grid.len() {
        out.row(&[&curve.grid[i], &curve.underfit[i], &curve.overfit[i], &curve.total[i]]);
    }
}

fn tradeoff(p: &TradeoffParams, out: &mut Outcome) -> Result<(), RunError> {
    let curve = p.config.curve().map_err(fail)?;
    write_curve(&curve, out);
    out.value("l_opt", json!(curve.l_opt));
    out.value("min_total", json!(curve.min_total()));
    out.assert(Assertion::check(
        "interior-argmin",
        curve.has_interior_argmin(),
        curve.l_opt as f64,
        "total error is minimized strictly inside the grid",
    ));
    if let Some(expected) = p.expected_l_opt {
        out.assert(Assertion::within("l-opt", curve.l_opt as f64, expected as f64, 0.0));
    }
    Ok(())
}

fn remark_sweeps(p: &RemarkSweepsParams, out: &mut Outcome) -> Result<(), RunError> {
    let sweeps = bounds::remark_sweeps(&p.base, &p.plan).map_err(fail)?;
    for s in &sweeps {
        for (v, l) in s.values.iter().zip(&s.lengths) {
            out.row(&[&s.parameter, v, l]);
        }
        out.value(format!("sweep-{}", s.parameter), json!(s.lengths));
        out.assert(Assertion::check(
            format!("sweep-{}", s.parameter),
            s.holds,
            s.lengths.last().copied().unwrap_or(0) as f64,
            format!("{:?} lengths {:?} over {:?}", s.expected, s.lengths, s.values),
        ));
    }
    Ok(())
}

fn setup(task: &ToyTask, algorithm: Algorithm, entropy_weight: f64, seed: u64) -> SweepSetup {
    SweepSetup {
        width: task.width,
        budget_slack: task.budget_slack,
        temperature: task.temperature,
        train: TrainConfig {
            algorithm,
            learning_rate: task.learning_rate,
            entropy_weight,
            episodes: task.episodes,
            seed,
        },
    }
}

fn algorithm_name(a: &Algorithm) -> &'static str {
    match a {
        Algorithm::Plain => "plain",
        Algorithm::MeanBaseline => "mean-baseline",
        Algorithm::GroupRelative { .. } => "group-relative",
    }
}

/// Largest `|a - b| / min(a, b)` over all pairs.
pub fn max_pairwise_gap(xs: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            worst = worst.max((a - b).abs() / a.min(*b));
        }
    }
    worst
}

fn toy_rl(p: &ToyRlParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    // Every run shares one task and one sampling stream.
    let train_seed = rng::derive_seed(seed, 0);
    let mut runs: Vec<(String, SweepSetup)> = p
        .algorithms
        .iter()
        .map(|a| (format!("algorithm-{}", algorithm_name(a)), setup(&p.task, *a, p.algorithm_entropy_weight, train_seed)))
        .collect();
    let n_algorithms = runs.len();
    runs.extend(
        p.entropy_weights
            .iter()
            .map(|&b| (format!("entropy-{b}"), setup(&p.task, p.entropy_algorithm, b, train_seed))),
    );
    let outcomes: Vec<TrainOutcome> = runs
        .par_iter()
        .map(|(_, s)| s.run(p.task.depth))
        .collect::<Result<_, _>>()
        .map_err(fail)?;

    let mut series = String::from("run,episode,length\n");
    for ((name, s), o) in runs.iter().zip(&outcomes) {
        let train = &s.train;
        out.row(&[
            name,
            &algorithm_name(&train.algorithm),
            &train.entropy_weight,
            &o.converged_length,
            &toyenv::tail_mean(&o.lengths),
        ]);
        for (e, l) in o.lengths.iter().enumerate() {
            writeln!(series, "{name},{e},{l}").expect("writing to a String");
        }
    }
    out.extra_files.push(("toy-rl-series.csv".into(), series.into_bytes()));

    let variant_lengths: Vec<f64> = outcomes[..n_algorithms].iter().map(|o| o.converged_length).collect();
    if variant_lengths.len() >= 2 {
        let gap = max_pairwise_gap(&variant_lengths);
        out.value("variant-max-gap", json!(gap));
        out.assert(Assertion::within("algorithm-variants-agree", gap, 0.0, p.variant_tolerance));
    }
    let mut entropy: Vec<(f64, f64)> = p
        .entropy_weights
        .iter()
        .zip(&outcomes[n_algorithms..])
        .map(|(&b, o)| (b, o.converged_length))
        .collect();
    entropy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lengths: Vec<f64> = entropy.iter().map(|e| e.1).collect();
    if lengths.len() >= 2 {
        let rise = lengths.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        out.value("entropy-lengths", json!(lengths));
        out.assert(Assertion::check(
            "entropy-nonincreasing",
            stats::is_nonincreasing(&lengths),
            rise,
            "largest rise in converged length between consecutive entropy weights",
        ));
    }

    if p.corpus_size > 0 {
        let s = &runs[0].1;
        let env = s.env(p.task.depth).map_err(fail)?;
        let corpus = toyenv::generate_corpus(&outcomes[0].policy, &env, p.corpus_size, rng::derive_seed(seed, 1))
            .map_err(fail)?;
        let mut jsonl = Vec::new();
        corpus.write_jsonl(&mut jsonl).map_err(fail)?;
        out.extra_files.push(("traces.jsonl".into(), jsonl));
        let (risk, lb, low_loss) = corpus_lower_bound(&corpus, &env.task_spec()).map_err(fail)?;
        out.value("corpus-empirical-risk", json!(risk));
        out.value("corpus-lower-bound", json!(lb));
        out.assert(Assertion::check(
            "corpus-failed-loss",
            low_loss == 0,
            low_loss as f64,
            "failed traces with loss below c_fail",
        ));
        out.assert(Assertion::check("corpus-lower-bound", risk >= lb - 1e-12, risk - lb, "empirical risk minus lower bound"));
    }
    Ok(())
}

fn difficulty_sweep(p: &DifficultySweepParams, seed: u64, out: &mut Outcome) -> Result<(), RunError> {
    let s = setup(&p.task, p.algorithm, p.entropy_weight, rng::derive_seed(seed, 0));
    let outcomes: Vec<TrainOutcome> = p
        .depths
        .par_iter()
        .map(|&d| s.run(d))
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    for (d, o) in p.depths.iter().zip(&outcomes) {
        out.row(&[d, &o.converged_length, &toyenv::tail_mean(&o.lengths)]);
    }
    let xs: Vec<f64> = p.depths.iter().map(|&d| d as f64).collect();
    let ys: Vec<f64> = outcomes.iter().map(|o| o.converged_length).collect();
    out.value("converged_lengths", json!(ys));
    out.assert(Assertion::check(
        "lengths-increasing",
        stats::is_strictly_increasing(&ys),
        ys.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
        "smallest increase in converged length between consecutive depths",
    ));
    if ys.len() >= 2 {
        let rho = stats::spearman(&xs, &ys).unwrap_or(f64::NAN);
        out.value("spearman", json!(rho));
        out.assert(Assertion {
            name: "spearman".into(),
            passed: rho >= p.min_spearman,
            measured: rho,
            target: Some(p.min_spearman),
            tolerance: None,
            detail: Some("rank correlation of depth and converged length, minimum".into()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_gap() {
        assert_eq!(max_pairwise_gap(&[2.0, 2.0]), 0.0);
        assert!((max_pairwise_gap(&[2.0, 2.2, 2.1]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn noise_identity_is_tight() {
        assert!(noise_identity_gap(1000, 3).unwrap() <= IDENTITY_ULPS);
    }

    #[test]
    fn noiseless_endpoints() {
        let (sde, discrete, closed) = gradient_flow_endpoints(1000).unwrap();
        assert!((sde - (-1.0f64).exp()).abs() < 1e-3);
        assert!((discrete - closed).abs() <= FLOW_RELATIVE * closed);
    }

    #[test]
    fn monotonicity_draws_hold() {
        let (bad, total) = monotonicity_violations(200, 5).unwrap();
        assert_eq!(bad, 0);
        assert!(total >= 200 * 16);
    }

    #[test]
    fn two_decade_ladders() {
        assert!(spans_two_decades(&[1.0, 10.0, 100.0]));
        assert!(!spans_two_decades(&[1.0, 10.0, 99.0]));
        assert!(!spans_two_decades(&[1.0, 100.0, 100.0]));
    }
}
