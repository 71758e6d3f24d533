//! Experiment configuration files and their schemas.
//!
//! A config is a TOML document:
//!
//! ```toml
//! kind = "tradeoff"
//! seed = 7
//! output_dir = "out/tradeoff"   # optional
//!
//! [params]
//! required_depth = 8
//! ```
//!
//! Every parameter has a default, so `[params]` may be partial or absent.
//! Validation never stops at the first problem: all violations come back
//! together, each naming its field path.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use cotlab_core::bounds::LengthModel;
use cotlab_core::dynamics::{DoubleWell, NoiseField};
use cotlab_core::toyenv::Algorithm;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    NnValidate,
    VoidScaling,
    ContinuumScaling,
    SdeVariance,
    Basin,
    BoundsEval,
    Tradeoff,
    RemarkSweeps,
    ToyRl,
    DifficultySweep,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::NnValidate,
        Kind::VoidScaling,
        Kind::ContinuumScaling,
        Kind::SdeVariance,
        Kind::Basin,
        Kind::BoundsEval,
        Kind::Tradeoff,
        Kind::RemarkSweeps,
        Kind::ToyRl,
        Kind::DifficultySweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::NnValidate => "nn-validate",
            Kind::VoidScaling => "void-scaling",
            Kind::ContinuumScaling => "continuum-scaling",
            Kind::SdeVariance => "sde-variance",
            Kind::Basin => "basin",
            Kind::BoundsEval => "bounds-eval",
            Kind::Tradeoff => "tradeoff",
            Kind::RemarkSweeps => "remark-sweeps",
            Kind::ToyRl => "toy-rl",
            Kind::DifficultySweep => "difficulty-sweep",
        }
    }

    pub fn parse(name: &str) -> Option<Kind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Parameter that `--trials` overrides, if the kind has one.
    pub fn trials_key(self) -> Option<&'static str> {
        match self {
            Kind::NnValidate | Kind::VoidScaling | Kind::ContinuumScaling => Some("trials"),
            Kind::SdeVariance => Some("samples"),
            Kind::Basin => Some("ensembles"),
            Kind::BoundsEval => Some("monotonicity_draws"),
            Kind::ToyRl | Kind::DifficultySweep => Some("episodes"),
            Kind::Tradeoff | Kind::RemarkSweeps => None,
        }
    }

    /// Fixed header of the kind's main CSV file.
    pub fn csv_header(self) -> &'static str {
        match self {
            Kind::NnValidate => "dimension,order,density,trials,mean,std_err,expected,z_score",
            Kind::VoidScaling => "dimension,density,trials,mean_radius,std_err",
            Kind::ContinuumScaling => {
                "dimension,density,trials,angular_mean,angular_std_err,magnitude_mean,magnitude_std_err,empty_annuli"
            }
            Kind::SdeVariance => "length,noise_variance,analytic,discrete_empirical,sde_empirical",
            Kind::Basin => "length,flat_fraction,sharp_fraction,perturbed_loss_mean,perturbed_loss_std_err",
            Kind::BoundsEval => "case,bound,value,expected",
            Kind::Tradeoff => "L,underfit,overfit,total",
            Kind::RemarkSweeps => "parameter,value,length",
            Kind::ToyRl => "run,algorithm,entropy_weight,converged_length,tail_mean_length",
            Kind::DifficultySweep => "depth,converged_length,tail_mean_length",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnValidateParams {
    pub dimensions: Vec<usize>,
    pub orders: Vec<usize>,
    pub densities: Vec<f64>,
    pub trials: usize,
    pub z: f64,
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoidScalingParams {
    pub dimensions: Vec<usize>,
    pub densities: Vec<f64>,
    pub trials: usize,
    pub candidates_per_point: f64,
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumScalingParams {
    pub dimensions: Vec<usize>,
    pub densities: Vec<f64>,
    pub trials: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeVarianceParams {
    pub lengths: Vec<usize>,
    pub variance: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub identity_pairs: usize,
    pub flow_length: usize,
    pub flow_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinParams {
    pub wells: DoubleWell,
    pub start: Vec<f64>,
    pub lengths: Vec<usize>,
    pub ensembles: usize,
    pub noise: NoiseField,
    pub perturbation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    MutualInfoCap,
    Info,
    PacBayes,
    Lower,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::MutualInfoCap => "mutual-info-cap",
            BoundKind::Info => "info",
            BoundKind::PacBayes => "pac-bayes",
            BoundKind::Lower => "lower",
        }
    }
}

/// One bound evaluation; only the arguments of `bound` are read.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCase {
    pub name: String,
    pub bound: BoundKind,
    pub c_max: f64,
    pub e_l: f64,
    pub e_xi: f64,
    pub alphabet: usize,
    pub n: usize,
    pub kl: f64,
    pub delta: f64,
    pub n_fail: usize,
    pub c_fail: f64,
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusCheck {
    pub path: PathBuf,
    pub c_max: f64,
    pub alphabet: usize,
    pub required_depth: usize,
    pub c_fail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsEvalParams {
    pub cases: Vec<BoundCase>,
    pub tolerance: f64,
    pub monotonicity_draws: usize,
    pub corpus: Option<CorpusCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffParams {
    pub config: cotlab_core::bounds::TradeoffConfig,
    pub expected_l_opt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemarkSweepsParams {
    pub base: cotlab_core::bounds::TradeoffConfig,
    pub plan: cotlab_core::bounds::SweepPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    pub depth: usize,
    pub width: usize,
    pub budget_slack: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub group_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRlParams {
    pub task: ToyTask,
    pub algorithms: Vec<Algorithm>,
    pub algorithm_entropy_weight: f64,
    pub entropy_weights: Vec<f64>,
    pub entropy_algorithm: Algorithm,
    pub variant_tolerance: f64,
    pub corpus_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultySweepParams {
    pub task: ToyTask,
    pub depths: Vec<usize>,
    pub algorithm: Algorithm,
    pub entropy_weight: f64,
    pub min_spearman: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    NnValidate(NnValidateParams),
    VoidScaling(VoidScalingParams),
    ContinuumScaling(ContinuumScalingParams),
    SdeVariance(SdeVarianceParams),
    Basin(BasinParams),
    BoundsEval(BoundsEvalParams),
    Tradeoff(TradeoffParams),
    RemarkSweeps(RemarkSweepsParams),
    ToyRl(ToyRlParams),
    DifficultySweep(DifficultySweepParams),
}

/// A fully validated configuration together with the table it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub params: Params,
    raw: Table,
}

impl ExperimentConfig {
    /// The effective configuration as parsed, including applied overrides.
    pub fn raw(&self) -> &Table {
        &self.raw
    }
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

/// Parses and validates `text`, reporting every violation.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    validate_with(text, &Overrides::default()).map(|(c, _)| c)
}

/// As [`validate_config`], after applying `overrides`. Also returns notes
/// about overrides that had no effect.
pub fn validate_with(text: &str, overrides: &Overrides) -> Result<(ExperimentConfig, Vec<String>), Vec<ConfigError>> {
    let mut raw: Table = toml::from_str(text).map_err(|e| {
        vec![ConfigError {
            path: "<document>".into(),
            message: e.message().to_string(),
        }]
    })?;
    let mut notes = Vec::new();
    if let Some(seed) = overrides.seed {
        raw.insert("seed".into(), seed_value(seed));
    }
    let kind_hint = raw.get("kind").and_then(Value::as_str).and_then(Kind::parse);
    if let (Some(trials), Some(kind)) = (overrides.trials, kind_hint) {
        match kind.trials_key() {
            Some(key) => {
                let params = raw
                    .entry("params")
                    .or_insert_with(|| Value::Table(Table::new()));
                if let Value::Table(t) = params {
                    t.insert(key.into(), Value::Integer(trials.min(i64::MAX as u64) as i64));
                }
            }
            None => notes.push(format!("--trials ignored: {kind} has no trial count")),
        }
    }
    let config = from_table(raw)?;
    Ok((config, notes))
}

fn seed_value(seed: u64) -> Value {
    match i64::try_from(seed) {
        Ok(s) => Value::Integer(s),
        Err(_) => Value::String(seed.to_string()),
    }
}

fn from_table(raw: Table) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut err = |path: &str, message: String| {
        errors.push(ConfigError {
            path: path.into(),
            message,
        })
    };
    for key in raw.keys() {
        if !["kind", "seed", "output_dir", "params"].contains(&key.as_str()) {
            err(key, "unknown field".into());
        }
    }
    let kind = match raw.get("kind") {
        None => {
            err("kind", "missing required field".into());
            None
        }
        Some(Value::String(s)) => match Kind::parse(s) {
            Some(k) => Some(k),
            None => {
                let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
                err("kind", format!("unknown experiment kind {s:?}; expected one of {}", names.join(", ")));
                None
            }
        },
        Some(other) => {
            err("kind", format!("expected a string, found {}", other.type_str()));
            None
        }
    };
    let seed = match raw.get("seed") {
        None => {
            err("seed", "missing required field".into());
            None
        }
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(Value::String(s)) => match s.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                err("seed", format!("expected an unsigned 64-bit integer, found {s:?}"));
                None
            }
        },
        Some(other) => {
            err("seed", format!("expected an unsigned 64-bit integer, found {other}"));
            None
        }
    };
    let output_dir = match raw.get("output_dir") {
        None => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(other) => {
            err("output_dir", format!("expected a non-empty path string, found {other}"));
            None
        }
    };
    let empty = Table::new();
    let params_table = match raw.get("params") {
        None => &empty,
        Some(Value::Table(t)) => t,
        Some(other) => {
            err("params", format!("expected a table, found {}", other.type_str()));
            &empty
        }
    };
    let params = kind.map(|k| {
        let mut r = Reader::new(params_table, "params".into(), &mut errors);
        let p = read_params(k, &mut r);
        r.finish();
        p
    });
    match (kind, seed, params) {
        (Some(kind), Some(seed), Some(params)) if errors.is_empty() => Ok(ExperimentConfig {
            kind,
            seed,
            output_dir,
            params,
            raw,
        }),
        _ => Err(errors),
    }
}

#[derive(Debug, Clone, Copy)]
enum Check {
    Any,
    Positive,
    NonNegative,
    Open01,
    AtLeast(f64),
}

impl Check {
    fn accepts(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Check::Any => true,
                Check::Positive => v > 0.0,
                Check::NonNegative => v >= 0.0,
                Check::Open01 => v > 0.0 && v < 1.0,
                Check::AtLeast(lo) => v >= lo,
            }
    }

    fn describe(self) -> String {
        match self {
            Check::Any => "must be finite".into(),
            Check::Positive => "must be > 0".into(),
            Check::NonNegative => "must be >= 0".into(),
            Check::Open01 => "must lie in (0, 1)".into(),
            Check::AtLeast(lo) => format!("must be >= {lo}"),
        }
    }
}

/// Typed access to one table that records violations instead of failing.
struct Reader<'a> {
    table: &'a Table,
    prefix: String,
    errors: &'a mut Vec<ConfigError>,
    seen: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table, prefix: String, errors: &'a mut Vec<ConfigError>) -> Self {
        Self {
            table,
            prefix,
            errors,
            seen: BTreeSet::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.prefix)
    }

    fn error(&mut self, path: String, message: String) {
        self.errors.push(ConfigError { path, message });
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.into());
        self.table.get(key)
    }

    fn as_f64(&mut self, path: String, v: &Value, check: Check) -> Option<f64> {
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            other => {
                self.error(path, format!("expected a number, found {}", other.type_str()));
                return None;
            }
        };
        if check.accepts(x) {
            Some(x)
        } else {
            self.error(path, format!("{} (got {x})", check.describe()));
            None
        }
    }

    fn as_usize(&mut self, path: String, v: &Value, min: usize, max: Option<usize>) -> Option<usize> {
        let Value::Integer(i) = v else {
            self.error(path, format!("expected an integer, found {}", v.type_str()));
            return None;
        };
        let ok = *i >= min as i64 && max.is_none_or(|m| *i <= m as i64);
        if ok {
            Some(*i as usize)
        } else {
            let range = match max {
                Some(m) => format!("must lie in [{min}, {m}]"),
                None => format!("must be >= {min}"),
            };
            self.error(path, format!("{range} (got {i})"));
            None
        }
    }

    fn float(&mut self, key: &str, default: f64, check: Check) -> f64 {
        match self.get(key) {
            None => default,
            Some(v) => self.as_f64(self.path(key), v, check).unwrap_or(default),
        }
    }

    fn opt_float(&mut self, key: &str, check: Check) -> Option<f64> {
        let v = self.get(key)?;
        self.as_f64(self.path(key), v, check)
    }

    fn int(&mut self, key: &str, default: usize, min: usize, max: Option<usize>) -> usize {
        match self.get(key) {
            None => default,
            Some(v) => self.as_usize(self.path(key), v, min, max).unwrap_or(default),
        }
    }

    fn opt_int(&mut self, key: &str, min: usize) -> Option<usize> {
        let v = self.get(key)?;
        self.as_usize(self.path(key), v, min, None)
    }

    /// A list, or a single value promoted to a one-element list.
    fn items(&mut self, key: &str) -> Option<Vec<(String, &'a Value)>> {
        let path = self.path(key);
        match self.get(key)? {
            Value::Array(a) if a.is_empty() => {
                self.error(path, "must not be empty".into());
                None
            }
            Value::Array(a) => Some(a.iter().enumerate().map(|(i, v)| (format!("{path}[{i}]"), v)).collect()),
            v => Some(vec![(path, v)]),
        }
    }

    fn float_list(&mut self, key: &str, default: &[f64], check: Check) -> Vec<f64> {
        let Some(items) = self.items(key) else {
            return default.to_vec();
        };
        let parsed: Vec<Option<f64>> = items.into_iter().map(|(p, v)| self.as_f64(p, v, check)).collect();
        parsed.into_iter().collect::<Option<Vec<_>>>().unwrap_or_else(|| default.to_vec())
    }

    fn int_list(&mut self, key: &str, default: &[usize], min: usize, max: Option<usize>) -> Vec<usize> {
        let Some(items) = self.items(key) else {
            return default.to_vec();
        };
        let parsed: Vec<Option<usize>> = items.into_iter().map(|(p, v)| self.as_usize(p, v, min, max)).collect();
        parsed.into_iter().collect::<Option<Vec<_>>>().unwrap_or_else(|| default.to_vec())
    }

    fn as_choice<'o>(&mut self, path: String, v: &Value, options: &[&'o str]) -> Option<&'o str> {
        let Value::String(s) = v else {
            self.error(path, format!("expected a string, found {}", v.type_str()));
            return None;
        };
        match options.iter().find(|o| **o == s) {
            Some(o) => Some(o),
            None => {
                self.error(path, format!("unknown value {s:?}; expected one of {}", options.join(", ")));
                None
            }
        }
    }

    fn choice<'o>(&mut self, key: &str, default: &'o str, options: &[&'o str]) -> &'o str {
        match self.get(key) {
            None => default,
            Some(v) => self.as_choice(self.path(key), v, options).unwrap_or(default),
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.error(self.path(key), format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn subtable(&mut self, key: &str) -> Option<&'a Table> {
        match self.get(key)? {
            Value::Table(t) => Some(t),
            other => {
                self.error(self.path(key), format!("expected a table, found {}", other.type_str()));
                None
            }
        }
    }

    fn table_array(&mut self, key: &str) -> Option<Vec<&'a Table>> {
        let path = self.path(key);
        match self.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::new();
                for (i, v) in items.iter().enumerate() {
                    match v {
                        Value::Table(t) => out.push(t),
                        other => self.error(format!("{path}[{i}]"), format!("expected a table, found {}", other.type_str())),
                    }
                }
                Some(out)
            }
            other => {
                self.error(path, format!("expected an array of tables, found {}", other.type_str()));
                None
            }
        }
    }

    fn require(&mut self, ok: bool, key: &str, message: &str) {
        if !ok {
            let path = self.path(key);
            self.error(path, message.into());
        }
    }

    fn finish(self) {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.seen.contains(*k))
            .map(|k| format!("{}.{k}", self.prefix))
            .collect();
        for path in unknown {
            self.errors.push(ConfigError {
                path,
                message: "unknown field".into(),
            });
        }
    }
}

const ALGORITHMS: [&str; 3] = ["plain", "mean-baseline", "group-relative"];

fn algorithm(name: &str, group_size: usize) -> Algorithm {
    match name {
        "plain" => Algorithm::Plain,
        "mean-baseline" => Algorithm::MeanBaseline,
        _ => Algorithm::GroupRelative { group_size },
    }
}

fn read_params(kind: Kind, r: &mut Reader) -> Params {
    match kind {
        Kind::NnValidate => Params::NnValidate(NnValidateParams {
            dimensions: r.int_list("dimensions", &[1, 2, 3], 1, Some(cotlab_core::geometry::MAX_DIMENSION)),
            orders: r.int_list("orders", &[1, 2], 1, None),
            densities: r.float_list("densities", &[1.0, 10.0], Check::Positive),
            trials: r.int("trials", 100_000, 2, None),
            z: r.float("z", 3.0, Check::Positive),
            slope_tolerance: r.float("slope_tolerance", 0.05, Check::Positive),
        }),
        Kind::VoidScaling => {
            let p = VoidScalingParams {
                dimensions: r.int_list("dimensions", &[2, 3], 1, Some(cotlab_core::geometry::MAX_DIMENSION)),
                densities: r.float_list("densities", &[100.0, 1000.0, 10000.0], Check::Positive),
                trials: r.int("trials", 8, 2, None),
                candidates_per_point: r.float("candidates_per_point", 10.0, Check::Positive),
                slope_tolerance: r.float("slope_tolerance", 0.15, Check::Positive),
            };
            check_ladder(r, "densities", &p.densities);
            Params::VoidScaling(p)
        }
        Kind::ContinuumScaling => {
            let p = ContinuumScalingParams {
                dimensions: r.int_list("dimensions", &[2, 3], 1, Some(cotlab_core::geometry::MAX_DIMENSION)),
                densities: r.float_list("densities", &[10.0, 100.0, 1000.0], Check::Positive),
                trials: r.int("trials", 10_000, 2, None),
                r_min: r.float("r_min", 0.5, Check::Positive),
                r_max: r.float("r_max", 1.5, Check::Positive),
                slope_tolerance: r.float("slope_tolerance", 0.15, Check::Positive),
            };
            check_ladder(r, "densities", &p.densities);
            r.require(p.r_min < p.r_max, "r_max", "must exceed r_min");
            Params::ContinuumScaling(p)
        }
        Kind::SdeVariance => Params::SdeVariance(SdeVarianceParams {
            lengths: r.int_list("lengths", &[4, 20, 100], 1, None),
            variance: r.float("variance", 2.0, Check::Positive),
            samples: r.int("samples", 100_000, 2, None),
            tolerance: r.float("tolerance", 0.05, Check::Positive),
            identity_pairs: r.int("identity_pairs", 100, 1, None),
            flow_length: r.int("flow_length", 1000, 1, None),
            flow_tolerance: r.float("flow_tolerance", 1e-3, Check::Positive),
        }),
        Kind::Basin => Params::Basin(read_basin(r)),
        Kind::BoundsEval => Params::BoundsEval(read_bounds_eval(r)),
        Kind::Tradeoff => Params::Tradeoff(TradeoffParams {
            config: read_tradeoff(r),
            expected_l_opt: r.opt_int("expected_l_opt", 1),
        }),
        Kind::RemarkSweeps => {
            let base = read_tradeoff(r);
            let d = cotlab_core::bounds::SweepPlan::default();
            let plan = cotlab_core::bounds::SweepPlan {
                required_depths: r.int_list("required_depths", &d.required_depths, 1, None),
                capacities: r.float_list("capacities", &d.capacities, Check::AtLeast(1.0)),
                failure_costs: r.float_list("failure_costs", &d.failure_costs, Check::Positive),
                noise_scales: r.float_list("noise_scales", &d.noise_scales, Check::Positive),
            };
            let c_max = base.overfit.c_max;
            r.require(
                plan.failure_costs.iter().all(|&c| c <= c_max),
                "failure_costs",
                "every failure cost must be <= c_max",
            );
            Params::RemarkSweeps(RemarkSweepsParams { base, plan })
        }
        Kind::ToyRl => {
            let task = read_toy_task(r, 3);
            let names: Vec<String> = match r.items("algorithms") {
                None => ALGORITHMS.iter().map(|s| s.to_string()).collect(),
                Some(items) => items
                    .into_iter()
                    .filter_map(|(p, v)| r.as_choice(p, v, &ALGORITHMS).map(String::from))
                    .collect(),
            };
            let entropy_algorithm = r.choice("entropy_algorithm", "plain", &ALGORITHMS);
            let p = ToyRlParams {
                algorithms: names.iter().map(|n| algorithm(n, task.group_size)).collect(),
                algorithm_entropy_weight: r.float("algorithm_entropy_weight", 0.0, Check::NonNegative),
                entropy_weights: r.float_list("entropy_weights", &[0.0, 0.05, 0.2], Check::NonNegative),
                entropy_algorithm: algorithm(entropy_algorithm, task.group_size),
                variant_tolerance: r.float("variant_tolerance", 0.15, Check::Positive),
                corpus_size: r.int("corpus_size", 1000, 0, None),
                task,
            };
            Params::ToyRl(p)
        }
        Kind::DifficultySweep => {
            let task = read_toy_task(r, 0);
            let depths = r.int_list("depths", &[2, 4, 8], 1, None);
            r.require(
                depths.windows(2).all(|w| w[0] < w[1]),
                "depths",
                "must be strictly increasing",
            );
            let name = r.choice("algorithm", "plain", &ALGORITHMS);
            Params::DifficultySweep(DifficultySweepParams {
                algorithm: algorithm(name, task.group_size),
                entropy_weight: r.float("entropy_weight", 0.0, Check::NonNegative),
                min_spearman: r.float("min_spearman", 0.9, Check::Any),
                depths,
                task,
            })
        }
    }
}

fn check_ladder(r: &mut Reader, key: &str, densities: &[f64]) {
    let lo = densities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = densities.iter().copied().fold(0.0, f64::max);
    let distinct: BTreeSet<u64> = densities.iter().map(|d| d.to_bits()).collect();
    r.require(
        distinct.len() >= 3 && hi / lo >= 100.0 * (1.0 - 1e-12),
        key,
        "need at least 3 distinct densities spanning two decades",
    );
}

/// `depth = 0` means the kind has no single depth and the field is not read.
fn read_toy_task(r: &mut Reader, default_depth: usize) -> ToyTask {
    let depth = if default_depth > 0 { r.int("depth", default_depth, 1, None) } else { 0 };
    ToyTask {
        depth,
        width: r.int("width", 1, 1, None),
        budget_slack: r.int("budget_slack", 4, 0, None),
        temperature: r.float("temperature", 1.0, Check::Positive),
        learning_rate: r.float("learning_rate", 0.5, Check::Positive),
        episodes: r.int("episodes", 5000, 1, None),
        group_size: r.int("group_size", 8, 2, None),
    }
}

fn read_tradeoff(r: &mut Reader) -> cotlab_core::bounds::TradeoffConfig {
    use cotlab_core::bounds::{OverfitParams, TaskSpec, TradeoffConfig};
    let d = TradeoffConfig::reference();
    let c_max = r.float("c_max", d.overfit.c_max, Check::Positive);
    let c_fail = r.float("c_fail", d.task.c_fail, Check::Positive);
    r.require(c_fail <= c_max, "c_fail", "must be <= c_max");
    let model = match r.choice("length_model", "deterministic", &["deterministic", "shifted-poisson"]) {
        "shifted-poisson" => LengthModel::ShiftedPoisson,
        _ => LengthModel::Deterministic,
    };
    let task = TaskSpec {
        required_depth: r.int("required_depth", d.task.required_depth, 1, None),
        c_fail,
    };
    let overfit = OverfitParams {
        c_max,
        e_xi: r.float("e_xi", d.overfit.e_xi, Check::Positive),
        alphabet: r.int("alphabet", d.overfit.alphabet, 2, None),
        n: r.int("n", d.overfit.n, 1, None),
        capacity: r.float("capacity", d.overfit.capacity, Check::NonNegative),
    };
    let grid_min = r.int("grid_min", 1, 1, None);
    let grid_max = r.int("grid_max", 32, 1, Some(1_000_000));
    r.require(grid_min <= grid_max, "grid_max", "must be >= grid_min");
    TradeoffConfig {
        task,
        model,
        overfit,
        grid: (grid_min..=grid_max.max(grid_min)).collect(),
    }
}

fn read_basin(r: &mut Reader) -> BasinParams {
    let reference = DoubleWell::reference();
    let wells = match r.subtable("wells") {
        None => reference,
        Some(t) => {
            let prefix = r.path("wells");
            let mut w = Reader::new(t, prefix, r.errors);
            let wells = DoubleWell {
                sharp_center: w.float_list("sharp_center", &reference.sharp_center, Check::Any),
                sharp_curvature: w.float("sharp_curvature", reference.sharp_curvature, Check::Positive),
                flat_center: w.float_list("flat_center", &reference.flat_center, Check::Any),
                flat_curvature: w.float("flat_curvature", reference.flat_curvature, Check::Positive),
                flat_offset: w.float("flat_offset", reference.flat_offset, Check::NonNegative),
                temperature: w.float("temperature", reference.temperature, Check::Positive),
            };
            w.require(
                wells.sharp_center.len() == wells.flat_center.len(),
                "flat_center",
                "must have the same dimension as sharp_center",
            );
            w.require(
                wells.sharp_curvature > wells.flat_curvature,
                "sharp_curvature",
                "must exceed flat_curvature",
            );
            w.finish();
            wells
        }
    };
    let start = r.float_list("start", &[-0.8], Check::Any);
    r.require(start.len() == wells.sharp_center.len(), "start", "must match the landscape dimension");
    let noise = match r.choice("noise_field", "constant", &["constant", "gradient-scaled"]) {
        "gradient-scaled" => NoiseField::GradientScaled {
            base: r.float("noise_level", 4.0, Check::NonNegative),
        },
        _ => NoiseField::Constant {
            value: r.float("noise_level", 4.0, Check::NonNegative),
        },
    };
    BasinParams {
        wells,
        start,
        lengths: r.int_list("lengths", &[1, 2, 4, 8, 16, 32, 64, 128, 256], 1, None),
        ensembles: r.int("ensembles", 2000, 2, None),
        noise,
        perturbation: r.float("perturbation", 0.3, Check::Any),
    }
}

fn read_bounds_eval(r: &mut Reader) -> BoundsEvalParams {
    let mut cases = Vec::new();
    if let Some(tables) = r.table_array("cases") {
        let base = r.path("cases");
        for (i, t) in tables.into_iter().enumerate() {
            let mut c = Reader::new(t, format!("{base}[{i}]"), r.errors);
            let bound = match c.choice("bound", "info", &["mutual-info-cap", "info", "pac-bayes", "lower"]) {
                "mutual-info-cap" => BoundKind::MutualInfoCap,
                "pac-bayes" => BoundKind::PacBayes,
                "lower" => BoundKind::Lower,
                _ => BoundKind::Info,
            };
            let case = BoundCase {
                name: c.string("name").unwrap_or_else(|| format!("case-{i}")),
                bound,
                c_max: c.float("c_max", 1.0, Check::Positive),
                e_l: c.float("e_l", 1.0, Check::Positive),
                e_xi: c.float("e_xi", 1.0, Check::Positive),
                alphabet: c.int("alphabet", 2, 2, None),
                n: c.int("n", 1, 1, None),
                kl: c.float("kl", 0.0, Check::NonNegative),
                delta: c.float("delta", 0.05, Check::Open01),
                n_fail: c.int("n_fail", 0, 0, None),
                c_fail: c.float("c_fail", 1.0, Check::Positive),
                expected: c.opt_float("expected", Check::Any),
            };
            c.require(
                case.bound != BoundKind::Lower || case.n_fail <= case.n,
                "n_fail",
                "must not exceed n",
            );
            c.finish();
            cases.push(case);
        }
    }
    let corpus = r.subtable("corpus").map(|t| {
        let prefix = r.path("corpus");
        let mut c = Reader::new(t, prefix, r.errors);
        let path = c.string("path");
        c.require(path.is_some(), "path", "missing required field");
        let check = CorpusCheck {
            path: PathBuf::from(path.unwrap_or_default()),
            c_max: c.float("c_max", cotlab_core::toyenv::C_DEAD, Check::Positive),
            alphabet: c.int("alphabet", 2, 2, None),
            required_depth: c.int("required_depth", 1, 1, None),
            c_fail: c.float("c_fail", cotlab_core::toyenv::C_DEAD, Check::Positive),
        };
        c.require(check.c_fail <= check.c_max, "c_fail", "must be <= c_max");
        c.finish();
        check
    });
    BoundsEvalParams {
        cases,
        tolerance: r.float("tolerance", 1e-10, Check::Positive),
        monotonicity_draws: r.int("monotonicity_draws", 1000, 0, None),
        corpus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_is_one_error() {
        let errs = validate_config("kind = \"tradeoff\"").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].path, "seed");
    }

    #[test]
    fn every_violation_is_reported() {
        let text = r#"
            kind = "nn-validate"
            seed = -3
            colour = "blue"
            [params]
            densities = [1.0, -2.0]
            orders = 0
            trials = "many"
            extra = 1
        "#;
        let errs = validate_config(text).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        for p in ["colour", "seed", "params.densities[1]", "params.orders", "params.trials", "params.extra"] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
        let density = errs.iter().find(|e| e.path == "params.densities[1]").unwrap();
        assert!(density.message.contains("> 0"), "{density}");
    }

    #[test]
    fn unknown_kind_and_bad_toml() {
        let errs = validate_config("kind = \"warp\"\nseed = 1").unwrap_err();
        assert_eq!(errs[0].path, "kind");
        assert!(validate_config("kind = ").is_err());
    }

    #[test]
    fn defaults_fill_missing_params() {
        let c = validate_config("kind = \"tradeoff\"\nseed = 7").unwrap();
        assert_eq!(c.kind, Kind::Tradeoff);
        assert_eq!(c.seed, 7);
        let Params::Tradeoff(p) = c.params else { panic!() };
        assert_eq!(p.config, cotlab_core::bounds::TradeoffConfig::reference());
    }

    #[test]
    fn overrides_apply_before_validation() {
        let text = "kind = \"void-scaling\"\nseed = 1\n[params]\ntrials = 4";
        let o = Overrides {
            seed: Some(u64::MAX),
            trials: Some(3),
        };
        let (c, notes) = validate_with(text, &o).unwrap();
        assert_eq!(c.seed, u64::MAX);
        let Params::VoidScaling(p) = c.params else { panic!() };
        assert_eq!(p.trials, 3);
        assert!(notes.is_empty());
        let bad = Overrides {
            seed: None,
            trials: Some(1),
        };
        let errs = validate_with(text, &bad).unwrap_err();
        assert_eq!(errs[0].path, "params.trials");
        let (_, notes) = validate_with("kind = \"tradeoff\"\nseed = 1", &o).unwrap();
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn nested_tables_report_nested_paths() {
        let text = r#"
            kind = "bounds-eval"
            seed = 1
            [[params.cases]]
            bound = "pac-bayes"
            delta = 1.5
            [[params.cases]]
            bound = "lower"
            n = 3
            n_fail = 4
            [params.corpus]
            c_max = 1.0
        "#;
        let errs = validate_config(text).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        assert!(paths.contains(&"params.cases[0].delta"), "{paths:?}");
        assert!(paths.contains(&"params.cases[1].n_fail"), "{paths:?}");
        assert!(paths.contains(&"params.corpus.path"), "{paths:?}");
        assert!(paths.contains(&"params.corpus.c_fail"), "{paths:?}");
    }

    #[test]
    fn scalar_promotes_to_list() {
        let c = validate_config("kind = \"nn-validate\"\nseed = 1\n[params]\ndimensions = 2\ndensities = 1\norders = 1").unwrap();
        let Params::NnValidate(p) = c.params else { panic!() };
        assert_eq!(p.dimensions, vec![2]);
        assert_eq!(p.densities, vec![1.0]);
    }
}
