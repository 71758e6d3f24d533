//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cotlab_core::bounds::{self, TaskSpec};
use cotlab_core::dynamics::{self, LossLandscape, NoiseField, NoiseSpec};
use cotlab_core::toyenv::{self, Action, Policy, Query, ReasoningState, Step, TaskEnv, C_DEAD};
use cotlab_harness::{run, validate_config, Summary};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Self { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    fn f(&self, row: &[String], name: &str) -> f64 {
        row[self.col(name)].parse().unwrap_or_else(|_| panic!("{name} is not numeric"))
    }

    fn s<'a>(&self, row: &'a [String], name: &str) -> &'a str {
        &row[self.col(name)]
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs a shipped config into `out` and returns its summary and main CSV.
fn run_reference(name: &str, out: &Path) -> Result<(Summary, Table), String> {
    let text = std::fs::read_to_string(configs_dir().join(format!("{name}.toml"))).map_err(|e| e.to_string())?;
    let config = validate_config(&text).map_err(|e| format!("{e:?}"))?;
    let dir = out.join(name);
    let report = run(&config, &dir).map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(dir.join(format!("{}.csv", config.kind.name()))).map_err(|e| e.to_string())?;
    Ok((report.summary, Table::parse(&csv)))
}

fn summary_passes(s: &Summary) -> Result<(), String> {
    let failed: Vec<String> = s.failures().map(|a| format!("{} = {}", a.name, a.measured)).collect();
    ensure!(failed.is_empty(), "failed assertions: {}", failed.join("; "));
    Ok(())
}

/// Least-squares slope of `ln y` on `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `E[R_k] = Gamma(k + 1/d) / (Gamma(k) (rho V_d)^(1/d))` from tabulated gamma values.
fn nn_oracle(d: usize, k: usize, rho: f64) -> f64 {
    let (volume, gamma_1) = match d {
        1 => (2.0, 1.0),
        2 => (PI, PI.sqrt() / 2.0),
        3 => (4.0 * PI / 3.0, 0.892_979_511_569_249_2),
        _ => unreachable!(),
    };
    let inv_d = 1.0 / d as f64;
    // Gamma(k + 1/d) / Gamma(k) for k = 1, 2
    let ratio = match k {
        1 => gamma_1,
        2 => (1.0 + inv_d) * gamma_1,
        _ => unreachable!(),
    };
    ratio / (rho * volume).powf(inv_d)
}

fn nn_law(out: &Path) -> Check {
    let (summary, t) = run_reference("nn-validate", out)?;
    summary_passes(&summary)?;
    ensure!(t.rows.len() == 12, "expected 12 cells, got {}", t.rows.len());
    let mut worst_z: f64 = 0.0;
    for r in &t.rows {
        let (d, k, rho) = (t.f(r, "dimension") as usize, t.f(r, "order") as usize, t.f(r, "density"));
        ensure!(t.f(r, "trials") >= 1e5, "too few probes");
        let oracle = nn_oracle(d, k, rho);
        ensure!((t.f(r, "expected") - oracle).abs() < 1e-12, "closed form off at d={d} k={k}");
        let z = (t.f(r, "mean") - oracle) / t.f(r, "std_err");
        ensure!(z.abs() <= 3.0, "d={d} k={k} rho={rho}: z = {z}");
        worst_z = worst_z.max(z.abs());
        match (d, k, rho) {
            (1 | 2, 1, 1.0) => ensure!((oracle - 0.5).abs() < 1e-12, "reference 0.5 at d={d}"),
            (2, 2, 1.0) => ensure!((oracle - 0.75).abs() < 1e-12, "reference 0.75"),
            _ => {}
        }
    }
    Ok(format!("12 cells, max |z| = {worst_z:.2}"))
}

fn density_scaling(out: &Path) -> Check {
    let (summary, t) = run_reference("density-scaling", out)?;
    summary_passes(&summary)?;
    let mut notes = Vec::new();
    for d in 1..=3usize {
        let rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| t.f(r, "dimension") as usize == d).collect();
        let x: Vec<f64> = rows.iter().map(|r| t.f(r, "density")).collect();
        let y: Vec<f64> = rows.iter().map(|r| t.f(r, "mean")).collect();
        let slope = loglog_slope(&x, &y);
        let target = -1.0 / d as f64;
        ensure!((slope - target).abs() <= 0.05, "D={d}: slope {slope} vs {target}");
        notes.push(format!("D={d} slope {slope:.4}"));
    }
    Ok(notes.join(", "))
}

fn void_scaling(out: &Path) -> Check {
    let (summary, t) = run_reference("void-scaling", out)?;
    summary_passes(&summary)?;
    let mut notes = Vec::new();
    for d in [2usize, 3] {
        let rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| t.f(r, "dimension") as usize == d).collect();
        let x: Vec<f64> = rows.iter().map(|r| t.f(r, "density")).collect();
        ensure!(x.iter().cloned().fold(0.0, f64::max) / x.iter().cloned().fold(f64::INFINITY, f64::min) >= 100.0, "ladder too short");
        let y: Vec<f64> = rows.iter().map(|r| t.f(r, "mean_radius")).collect();
        let slope = loglog_slope(&x, &y);
        let target = -1.0 / d as f64;
        ensure!((slope - target).abs() <= 0.15, "D={d}: slope {slope} vs {target}");
        notes.push(format!("D={d} slope {slope:.4}"));
    }
    Ok(notes.join(", "))
}

fn continuum_errors(out: &Path) -> Check {
    let (summary, t) = run_reference("continuum-scaling", out)?;
    summary_passes(&summary)?;
    let mut notes = Vec::new();
    for d in [2usize, 3] {
        let mut rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| t.f(r, "dimension") as usize == d).collect();
        rows.sort_by(|a, b| t.f(a, "density").total_cmp(&t.f(b, "density")));
        let x: Vec<f64> = rows.iter().map(|r| t.f(r, "density")).collect();
        for col in ["angular_mean", "magnitude_mean"] {
            let y: Vec<f64> = rows.iter().map(|r| t.f(r, col)).collect();
            ensure!(y.windows(2).all(|w| w[1] < w[0]), "D={d}: {col} not strictly decreasing: {y:?}");
            let slope = loglog_slope(&x, &y);
            let target = -1.0 / d as f64;
            ensure!((slope - target).abs() <= 0.15, "D={d}: {col} slope {slope} vs {target}");
            notes.push(format!("D={d} {} {slope:.3}", &col[..3]));
        }
    }
    Ok(notes.join(", "))
}

fn noise_identity(out: &Path) -> Check {
    let (summary, t) = run_reference("sde-variance", out)?;
    summary_passes(&summary)?;
    let identity = summary.assertions.iter().find(|a| a.name == "noise-identity").ok_or("no identity assertion")?;
    ensure!(identity.passed, "identity gap {}", identity.measured);
    // independent pairs on a fixed lattice
    let bowl = LossLandscape::unit_bowl(1).map_err(|e| e.to_string())?;
    let mut pairs = 0;
    for i in 0..10u32 {
        for j in 0..10u32 {
            let f = 0.37 * f64::from(i + 1).powi(2);
            let length = 1 + 997 * j as usize + 13 * i as usize;
            let field = NoiseField::constant(f);
            let g = 1.0 / length as f64;
            let sde = dynamics::sde_step_noise_variance(&NoiseSpec::new(g, field).unwrap(), &bowl, length, &[0.0]).unwrap();
            let discrete = dynamics::discrete_step_noise_variance(&field, &bowl, length, &[0.0]).unwrap();
            let hand = f / (length as f64 * length as f64);
            ensure!((sde - hand).abs() <= 4.0 * f64::EPSILON * hand, "g F / L off at F={f} L={length}");
            ensure!((discrete - hand).abs() <= 4.0 * f64::EPSILON * hand, "F / L^2 off at F={f} L={length}");
            pairs += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for r in &t.rows {
        ensure!(t.f(r, "noise_variance") > 0.0, "zero variance row");
        let (a, dv, sv) = (t.f(r, "analytic"), t.f(r, "discrete_empirical"), t.f(r, "sde_empirical"));
        let l = t.f(r, "length");
        ensure!((a - t.f(r, "noise_variance") / (l * l)).abs() <= 1e-15 * a, "analytic column off");
        let gap = (dv / sv - 1.0).abs();
        ensure!(gap <= 0.05, "L={l}: discrete {dv} vs sde {sv}");
        worst = worst.max(gap);
    }
    Ok(format!("{pairs} lattice pairs plus run identity gap {:.1e}, max MC gap {:.2}%", identity.measured, 100.0 * worst))
}

fn gradient_flow(_: &Path) -> Check {
    let bowl = LossLandscape::unit_bowl(1).map_err(|e| e.to_string())?;
    let quiet = NoiseField::constant(0.0);
    let length = 1000;
    let s0 = 1.0;
    let sde = dynamics::sde_integrate(&bowl, &[s0], 0.0, length, &quiet, 1).map_err(|e| e.to_string())?;
    let end = sde.final_state()[0];
    let target = (-1.0f64).exp() * s0;
    ensure!((end - target).abs() <= 1e-3, "SDE endpoint {end} vs {target}");
    let discrete = dynamics::discrete_descent(&bowl, &[s0], length, &NoiseSpec::discrete(quiet).unwrap(), 1)
        .map_err(|e| e.to_string())?;
    let closed = (1.0 - 1.0 / length as f64).powi(length as i32) * s0;
    let got = discrete.final_state()[0];
    ensure!((got - closed).abs() <= 1e-12 * closed, "discrete {got} vs (1 - 1/L)^L = {closed}");
    Ok(format!("SDE error {:.1e}, discrete gap {:.1e}", (end - target).abs(), (got - closed).abs()))
}

fn bound_calculators(out: &Path) -> Check {
    let hand = [
        ("info", bounds::info_gen_bound(1.0, 10.0, 20.0, 32, 1000), (200.0 * 32f64.ln() / 2000.0).sqrt(), 0.5887),
        ("pac-bayes kl=1", bounds::pac_bayes_bound(1.0, 100, 0.05), ((1.0 + 4000f64.ln()) / 200.0).sqrt(), 0.2156),
        ("pac-bayes kl=0", bounds::pac_bayes_bound(0.0, 50, 0.1), (1000f64.ln() / 100.0).sqrt(), 0.2628),
        ("lower", bounds::empirical_risk_lower_bound(25, 100, 0.8), 25.0 / 100.0 * 0.8, 0.2),
    ];
    for (name, got, exact, printed) in hand {
        let got = got.map_err(|e| e.to_string())?;
        ensure!((got - exact).abs() <= 1e-10, "{name}: {got} vs {exact}");
        ensure!((exact - printed).abs() < 5e-5, "{name}: hand value {exact} does not round to {printed}");
    }
    let (summary, t) = run_reference("bounds-eval", out)?;
    summary_passes(&summary)?;
    for r in &t.rows {
        let (v, e): (f64, f64) = (t.f(r, "value"), t.f(r, "expected"));
        ensure!((v - e).abs() <= 1e-10, "case {}: {v} vs {e}", t.s(r, "case"));
    }
    let mono = summary.assertions.iter().find(|a| a.name == "monotonicity").ok_or("no monotonicity assertion")?;
    let checks = summary.values["monotonicity-checks"].as_u64().unwrap_or(0);
    ensure!(checks >= 1000, "only {checks} monotonicity checks");
    ensure!(mono.passed, "{}", mono.detail.clone().unwrap_or_default());
    Ok(format!("4 references within 1e-10, {checks} monotonicity checks over 1000 draws"))
}

fn tradeoff(out: &Path) -> Check {
    let (summary, t) = run_reference("tradeoff", out)?;
    summary_passes(&summary)?;
    let grid: Vec<f64> = t.rows.iter().map(|r| t.f(r, "L")).collect();
    let total: Vec<f64> = t.rows.iter().map(|r| t.f(r, "total")).collect();
    for r in &t.rows {
        ensure!((t.f(r, "underfit") + t.f(r, "overfit") - t.f(r, "total")).abs() < 1e-12, "total is not the sum");
    }
    let best = (0..total.len()).min_by(|&a, &b| total[a].total_cmp(&total[b])).ok_or("empty curve")?;
    ensure!(best > 0 && best + 1 < total.len(), "argmin at the grid edge");
    ensure!(grid[best] == 8.0, "L_opt = {}", grid[best]);

    let (summary, t) = run_reference("remark-sweeps", out)?;
    summary_passes(&summary)?;
    let series = |param: &str| -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = t
            .rows
            .iter()
            .filter(|r| t.s(r, "parameter") == param)
            .map(|r| (t.f(r, "value"), t.f(r, "length")))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let depth = series("required_depth");
    ensure!(depth.iter().map(|p| p.0).eq([2.0, 4.0, 8.0, 16.0]), "depth sweep values {depth:?}");
    ensure!(depth.windows(2).all(|w| w[1].1 >= w[0].1), "L_opt decreases with L*: {depth:?}");
    let capacity = series("capacity");
    ensure!(capacity.iter().map(|p| p.0).eq([1.0, 2.0, 4.0]), "capacity sweep values {capacity:?}");
    ensure!(capacity.windows(2).all(|w| w[1].1 <= w[0].1), "L_opt grows with capacity: {capacity:?}");
    let show = |s: &[(f64, f64)]| s.iter().map(|p| p.1.to_string()).collect::<Vec<_>>().join("/");
    Ok(format!("L_opt = 8, depth sweep {}, capacity sweep {}", show(&depth), show(&capacity)))
}

/// Golden minimums found by scanning every enumerated state.
fn brute_minimums(states: &[ReasoningState]) -> Vec<&ReasoningState> {
    states
        .iter()
        .filter(|s| s.terminal && s.steps.last() == Some(&Step::Answer(s.query.answer)))
        .collect()
}

/// Steps from `state` to the nearest golden minimum by breadth-first search.
fn bfs_distance(env: &TaskEnv, state: &ReasoningState, minima: &HashSet<Vec<Step>>) -> Option<usize> {
    let mut queue = VecDeque::from([(state.clone(), 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s.terminal {
            if minima.contains(&s.steps) {
                return Some(d);
            }
            continue;
        }
        let mut actions: Vec<Action> = (0..s.query.width as u32).map(Action::Continue).collect();
        actions.push(Action::Answer);
        for a in actions {
            if let Ok(next) = env.apply(&s, a) {
                queue.push_back((next, d + 1));
            }
        }
    }
    None
}

fn definitions(_: &Path) -> Check {
    let tasks = [(1, 1, 3), (2, 2, 4), (3, 2, 5), (3, 3, 5), (4, 2, 6), (5, 3, 6)];
    let mut states_checked = 0;
    let mut traces_checked = 0;
    for (i, &(depth, width, budget)) in tasks.iter().enumerate() {
        let query = Query::new(1000 + i as u64, depth, width).map_err(|e| e.to_string())?;
        let env = TaskEnv::new(query, budget).map_err(|e| e.to_string())?;
        let states = env.enumerate_states().map_err(|e| e.to_string())?;
        ensure!(states.len() <= 10_000, "task {i} not enumerable");
        let minima = brute_minimums(&states);
        ensure!(minima.len() == 1, "task {i}: {} minimums", minima.len());
        let minimum_steps: HashSet<Vec<Step>> = minima.iter().map(|m| m.steps.clone()).collect();
        let listed: HashSet<Vec<Step>> = toyenv::minimums(&query).into_iter().map(|m| m.steps).collect();
        ensure!(listed == minimum_steps, "task {i}: minimum set differs from brute force");

        let mut by_distance: Vec<(Option<usize>, f64)> = Vec::with_capacity(states.len());
        for s in &states {
            let reachable: HashSet<Vec<Step>> = toyenv::reachable_minimums(s).into_iter().map(|m| m.steps).collect();
            let prefix: HashSet<Vec<Step>> = minimum_steps
                .iter()
                .filter(|m| if s.terminal { **m == s.steps } else { m.starts_with(&s.steps) })
                .cloned()
                .collect();
            ensure!(reachable == prefix, "task {i}: reachable set wrong at {:?}", s.steps);
            let bfs = bfs_distance(&env, s, &minimum_steps);
            let nearest = toyenv::nearest_minimum(s).map(|(_, d)| d);
            ensure!(bfs == nearest, "task {i}: distance {nearest:?} vs brute force {bfs:?} at {:?}", s.steps);
            let loss = toyenv::reasoning_loss(s);
            if minimum_steps.contains(&s.steps) && s.terminal {
                ensure!(loss == 0.0 && toyenv::is_minimum(s), "task {i}: C(m) = {loss}");
            }
            by_distance.push((bfs, loss));
        }
        let key = |d: Option<usize>| d.unwrap_or(usize::MAX);
        for a in &by_distance {
            for b in &by_distance {
                ensure!((key(a.0) < key(b.0)) == (a.1 < b.1), "task {i}: loss order breaks distance order");
            }
        }
        states_checked += states.len();

        let task = env.task_spec();
        let policy = Policy::uniform(width, 1.0).map_err(|e| e.to_string())?;
        for corpus_seed in 0..3u64 {
            let corpus = toyenv::generate_corpus(&policy, &env, 500, 10 * i as u64 + corpus_seed).map_err(|e| e.to_string())?;
            for tr in corpus.traces().iter().filter(|t| t.length < task.required_depth) {
                ensure!(!tr.success && tr.terminal_loss >= task.c_fail, "failed trace with loss {}", tr.terminal_loss);
            }
            let n_fail = corpus.traces().iter().filter(|t| t.length < task.required_depth).count();
            let lb = bounds::empirical_risk_lower_bound(n_fail, corpus.n(), task.c_fail).map_err(|e| e.to_string())?;
            let risk = corpus.traces().iter().map(|t| t.terminal_loss).sum::<f64>() / corpus.n() as f64;
            ensure!(risk >= lb, "task {i}: risk {risk} below bound {lb}");
            traces_checked += corpus.n();
        }
    }
    ensure!(TaskSpec::new(1, C_DEAD, C_DEAD).is_ok(), "dead-end cost rejected");
    Ok(format!("{states_checked} states exhaustively, {traces_checked} traces"))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let below = xs.iter().filter(|y| *y < x).count() as f64;
            let tied = xs.iter().filter(|y| *y == x).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation of average ranks.
fn rank_correlation(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn toy_rl(out: &Path) -> Check {
    let (summary, t) = run_reference("difficulty-sweep", out)?;
    summary_passes(&summary)?;
    let depths: Vec<f64> = t.rows.iter().map(|r| t.f(r, "depth")).collect();
    ensure!(depths == [2.0, 4.0, 8.0], "depths {depths:?}");
    let lengths: Vec<f64> = t.rows.iter().map(|r| t.f(r, "converged_length")).collect();
    ensure!(lengths.windows(2).all(|w| w[1] > w[0]), "lengths not increasing: {lengths:?}");
    let spearman = rank_correlation(&depths, &lengths);
    ensure!(spearman >= 0.9, "spearman {spearman}");

    let (summary, t) = run_reference("toy-rl", out)?;
    summary_passes(&summary)?;
    let mut variants = BTreeMap::new();
    let mut entropy = Vec::new();
    for r in &t.rows {
        let run = t.s(r, "run");
        if run.starts_with("algorithm-") {
            variants.insert(t.s(r, "algorithm").to_string(), t.f(r, "converged_length"));
        } else {
            entropy.push((t.f(r, "entropy_weight"), t.f(r, "converged_length")));
        }
    }
    ensure!(variants.len() == 3, "variants {variants:?}");
    let v: Vec<f64> = variants.values().copied().collect();
    for a in &v {
        for b in &v {
            ensure!((a - b).abs() <= 0.15 * a.min(*b), "variants differ: {variants:?}");
        }
    }
    entropy.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure!(entropy.len() >= 3, "entropy sweep too short");
    ensure!(entropy.windows(2).all(|w| w[1].1 <= w[0].1), "entropy sweep rises: {entropy:?}");
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    Ok(format!(
        "difficulty {}, variants {}, entropy {}",
        fmt(&lengths),
        fmt(&v),
        fmt(&entropy.iter().map(|e| e.1).collect::<Vec<_>>())
    ))
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    check: fn(&Path) -> Check,
}

const fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "nearest-neighbour law", limit: minutes(2), check: nn_law },
        Criterion { id: 2, title: "density scaling", limit: minutes(2), check: density_scaling },
        Criterion { id: 3, title: "void scaling", limit: minutes(3), check: void_scaling },
        Criterion { id: 4, title: "continuum errors", limit: minutes(5), check: continuum_errors },
        Criterion { id: 5, title: "noise-scale identity", limit: minutes(1), check: noise_identity },
        Criterion { id: 6, title: "gradient-flow consistency", limit: None, check: gradient_flow },
        Criterion { id: 7, title: "bound calculators", limit: None, check: bound_calculators },
        Criterion { id: 8, title: "trade-off", limit: minutes(1), check: tradeoff },
        Criterion { id: 9, title: "definitions consistency", limit: None, check: definitions },
        Criterion { id: 10, title: "toy RL trends", limit: minutes(15), check: toy_rl },
    ];
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(|| (c.check)(tmp.path())))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failures += 1;
                ("FAIL", e.clone())
            }
        };
        println!("criterion {:>2} {tag} [{}] {detail} ({:.1}s)", c.id, c.title, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
