//! Declarative sweep experiments: TOML configs, parallel execution over sweep
//! points, CSV emission, analysis-versus-simulation comparison and SVG plots.
//!
//! A config names a strategy, a `[params]` scenario record, a `[sweep]` axis
//! over one of those parameters and optional `[[series]]` override tables.
//! Each (series, sweep value) point is evaluated by the analysis engine, the
//! Monte Carlo engine or both; rows are assembled in sweep order so output is
//! independent of worker scheduling.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content_model::{zipf_popularity, FileLibrary};
use crate::error::{Error, Result};
use crate::estimate::{Flag, ProbEstimate, Source};
use crate::monte_carlo::{
    derive_seed, simulate_d2d, simulate_delivery, simulate_pad, simulate_push, Execution, TrialPlan,
};
use crate::noma_engine::{snr_linear, OmaConvention, PowerAllocation};
use crate::numerics::{chebyshev_nodes, QuadratureRule, DEFAULT_ORDER};
use crate::pad_analysis::{
    d2d_miss_probability, pad_hit_probability, pad_oma_benchmark, pad_user_outage, pad_user_outage_oma, D2dScenario,
    OmaVariant, PadScenario, QuadratureOrders,
};
use crate::point_fields::{GeometryConfig, Point};
use crate::ptd_analysis::{
    delivery_outage_far, delivery_outage_near, delivery_outage_oma, push_hit_probability, AccessMode, DeliveryScenario,
    DeliveryUser, PushScenario,
};

/// Bundled figure configs, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fig5a", include_str!("../configs/fig5a.toml")),
    ("fig5b", include_str!("../configs/fig5b.toml")),
    ("fig6", include_str!("../configs/fig6.toml")),
    ("fig7a", include_str!("../configs/fig7a.toml")),
    ("fig7b", include_str!("../configs/fig7b.toml")),
    ("fig8case1", include_str!("../configs/fig8case1.toml")),
    ("fig8case2", include_str!("../configs/fig8case2.toml")),
    ("fig9", include_str!("../configs/fig9.toml")),
    ("fig10a", include_str!("../configs/fig10a.toml")),
    ("fig10b", include_str!("../configs/fig10b.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    PushThenDeliverPushing,
    PushThenDeliverDelivery,
    PushAndDeliver,
    D2d,
}

impl Strategy {
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Strategy::PushThenDeliverPushing => &["hit_noma", "hit_oma"],
            Strategy::PushThenDeliverDelivery => {
                &["outage_near_noma", "outage_far_noma", "outage_near_oma", "outage_far_oma"]
            }
            Strategy::PushAndDeliver => {
                &["hit_noma", "hit_oma", "hit_oma_naive", "user_outage_noma", "user_outage_oma"]
            }
            Strategy::D2d => &["miss_noma", "miss_oma"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analysis,
    #[serde(alias = "monte_carlo")]
    Mc,
    #[default]
    Both,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Analysis => "analysis",
            Engine::Mc => "mc",
            Engine::Both => "both",
        }
    }

    fn analysis(self) -> bool {
        self != Engine::Mc
    }

    fn mc(self) -> bool {
        self != Engine::Analysis
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analysis" => Ok(Engine::Analysis),
            "mc" | "monte_carlo" => Ok(Engine::Mc),
            "both" => Ok(Engine::Both),
            other => Err(Error::Config(format!("unknown engine `{other}` (analysis, mc, both)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    #[serde(flatten)]
    pub overrides: toml::Table,
}

/// A point passes when `|mc - analysis| <= se_multiplier * SE + allowance`,
/// with the binomial SE taken at the analytical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    #[serde(default = "default_se_multiplier")]
    pub se_multiplier: f64,
    #[serde(default = "default_allowance")]
    pub allowance: f64,
}

fn default_se_multiplier() -> f64 {
    3.0
}

fn default_allowance() -> f64 {
    0.005
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { se_multiplier: default_se_multiplier(), allowance: default_allowance() }
    }
}

impl Tolerance {
    pub fn allowed(&self, analysis: f64, trials: u64) -> f64 {
        let se = (analysis * (1.0 - analysis) / trials as f64).max(0.0).sqrt();
        self.se_multiplier * se + self.allowance
    }
}

fn default_trials() -> u64 {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub strategy: Strategy,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Metrics to emit; empty means every metric of the strategy.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub tolerance: Tolerance,
    pub sweep: Sweep,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub series: Vec<Series>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// A bundled config name or a path to a config file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match bundled(name_or_path) {
            Some(text) => Self::parse(text),
            None => Self::parse(&std::fs::read_to_string(name_or_path)?),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn metrics(&self) -> Vec<&str> {
        if self.metrics.is_empty() {
            self.strategy.metrics().to_vec()
        } else {
            self.metrics.iter().map(String::as_str).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let v = &self.sweep.values;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        for m in &self.metrics {
            if !self.strategy.metrics().contains(&m.as_str()) {
                return Err(Error::Config(format!("metric `{m}` is not produced by this strategy")));
            }
        }
        let t = self.tolerance;
        if !(t.se_multiplier >= 0.0 && t.allowance >= 0.0) {
            return Err(Error::Config("tolerance terms must be nonnegative".into()));
        }
        // every series must resolve to a valid scenario at every sweep value
        for s in 0..self.series_count() {
            if v.is_empty() {
                self.scenario(s, None)?;
            }
            for &x in v {
                self.scenario(s, Some(x))?;
            }
        }
        Ok(())
    }

    fn series_count(&self) -> usize {
        self.series.len().max(1)
    }

    fn series_label(&self, s: usize) -> &str {
        self.series.get(s).map(|x| x.label.as_str()).unwrap_or("")
    }

    fn point_table(&self, s: usize, x: Option<f64>) -> toml::Table {
        let mut t = self.params.clone();
        if let Some(series) = self.series.get(s) {
            for (k, v) in &series.overrides {
                t.insert(k.clone(), v.clone());
            }
        }
        if let Some(x) = x {
            let value =
                if x.fract() == 0.0 && x.abs() < 9e15 { toml::Value::Integer(x as i64) } else { toml::Value::Float(x) };
            t.insert(self.sweep.parameter.clone(), value);
        }
        t
    }

    fn scenario(&self, s: usize, x: Option<f64>) -> Result<PointScenario> {
        let table = self.point_table(s, x);
        if x.is_none() && !table.contains_key(&self.sweep.parameter) && !self.sweep.values.is_empty() {
            return Err(Error::Config(format!("unknown sweep parameter `{}`", self.sweep.parameter)));
        }
        let value = toml::Value::Table(table);
        let bad = |e: toml::de::Error| Error::Config(format!("series `{}`: {}", self.series_label(s), e.message()));
        let sc = match self.strategy {
            Strategy::PushThenDeliverPushing => {
                PointScenario::Push(value.try_into::<PushParams>().map_err(bad)?.build()?)
            }
            Strategy::PushThenDeliverDelivery => {
                PointScenario::Delivery(value.try_into::<DeliveryParams>().map_err(bad)?.build()?)
            }
            Strategy::PushAndDeliver => PointScenario::Pad(value.try_into::<PadParams>().map_err(bad)?.build()?),
            Strategy::D2d => PointScenario::D2d(value.try_into::<D2dParams>().map_err(bad)?.build()?),
        };
        Ok(sc)
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_oma() -> OmaConvention {
    OmaConvention::TimeSliced
}

fn geometry(
    lambda_c: Option<f64>,
    rc: f64,
    rs: f64,
    alpha: f64,
    delta: Option<f64>,
    window: f64,
) -> Result<GeometryConfig> {
    let base = GeometryConfig::default();
    let g = GeometryConfig {
        lambda_c: lambda_c.unwrap_or_else(|| GeometryConfig::figure_density(rc)),
        rc,
        rs,
        alpha,
        delta: delta.unwrap_or(base.delta),
        sim_radius: window,
        ..base
    };
    g.validate()?;
    Ok(g)
}

fn normalized(mut coeffs: Vec<f64>, normalize: bool) -> Vec<f64> {
    if normalize {
        let total: f64 = coeffs.iter().sum();
        if total > 0.0 {
            coeffs.iter_mut().for_each(|c| *c /= total);
        }
    }
    coeffs
}

/// Content pushing. `lambda_c` defaults to `0.01/(π rc²)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PushParams {
    power_dbm: f64,
    noise_dbm: f64,
    alpha: f64,
    rc: f64,
    lambda_c: Option<f64>,
    gamma: f64,
    files: usize,
    t: u32,
    m: u32,
    rates: Vec<f64>,
    betas: Vec<f64>,
    #[serde(default = "default_order")]
    quadrature_order: usize,
}

impl PushParams {
    fn build(self) -> Result<PushSetup> {
        let sc = PushScenario {
            m: self.m,
            t: self.t,
            library: FileLibrary::new(self.files, self.gamma, self.rates)?,
            betas: self.betas,
            rho: snr_linear(self.power_dbm, self.noise_dbm),
            geometry: geometry(self.lambda_c, self.rc, self.rc / 2.0, self.alpha, None, 5000.0)?,
        };
        sc.validate()?;
        Ok(PushSetup { sc, rule: chebyshev_nodes(self.quadrature_order)? })
    }
}

/// Two-user delivery. `alloc` holds `{α_1², α_2²}` (far user first).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeliveryParams {
    power_dbm: f64,
    noise_dbm: f64,
    alpha: f64,
    rc: f64,
    rs: f64,
    lambda_c: Option<f64>,
    rates: [f64; 2],
    alloc: Vec<f64>,
    window: f64,
    #[serde(default = "default_oma")]
    oma_convention: OmaConvention,
    #[serde(default = "default_order")]
    quadrature_order: usize,
}

impl DeliveryParams {
    fn build(self) -> Result<DeliverySetup> {
        let sc = DeliveryScenario {
            alloc: PowerAllocation::fixed(self.alloc)?,
            rates: self.rates,
            geometry: geometry(self.lambda_c, self.rc, self.rs, self.alpha, None, self.window)?,
            rho: snr_linear(self.power_dbm, self.noise_dbm),
            oma: self.oma_convention,
        };
        sc.validate()?;
        Ok(DeliverySetup { sc, rule: chebyshev_nodes(self.quadrature_order)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PopularityOrder {
    /// Stage `i` carries the `i`-th most popular file.
    Direct,
    /// Stage `i` carries the `i`-th least popular of the pushed files.
    Reversed,
}

/// Push-and-deliver. `alloc` and `rates` start with the directly served `f_0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PadParams {
    power_dbm: f64,
    noise_dbm: f64,
    alpha: f64,
    rc: f64,
    lambda_c: Option<f64>,
    delta: f64,
    gamma: f64,
    files: usize,
    popularity_order: PopularityOrder,
    m: u32,
    rates: Vec<f64>,
    alloc: Vec<f64>,
    #[serde(default)]
    normalize_alloc: bool,
    #[serde(default = "default_oma")]
    oma_convention: OmaConvention,
    #[serde(default = "default_order")]
    quadrature_order: usize,
    #[serde(default = "default_order")]
    inner_quadrature_order: usize,
}

impl PadParams {
    fn build(self) -> Result<PadSetup> {
        let sc = PadScenario {
            alloc: PowerAllocation::fixed(normalized(self.alloc, self.normalize_alloc))?,
            rates: self.rates,
            geometry: geometry(self.lambda_c, self.rc, self.rc / 2.0, self.alpha, Some(self.delta), 5000.0)?,
            rho: snr_linear(self.power_dbm, self.noise_dbm),
            oma: self.oma_convention,
        };
        sc.validate()?;
        let ms = sc.m_s();
        if self.files < ms {
            return Err(Error::Config(format!("library of {} files cannot fill {ms} stages", self.files)));
        }
        let mut popularity = zipf_popularity(self.files, self.gamma)?[..ms].to_vec();
        if self.popularity_order == PopularityOrder::Reversed {
            popularity.reverse();
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        Ok(PadSetup {
            sc,
            m: self.m,
            popularity,
            outer: chebyshev_nodes(self.quadrature_order)?,
            inner: chebyshev_nodes(self.inner_quadrature_order)?,
        })
    }
}

/// D2D cache search for pushed file `file` around `y0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct D2dParams {
    power_dbm: f64,
    noise_dbm: f64,
    alpha: f64,
    lambda_u: f64,
    y0: [f64; 2],
    d: f64,
    rates: Vec<f64>,
    alloc: Vec<f64>,
    #[serde(default = "default_file")]
    file: usize,
    window: Option<f64>,
    #[serde(default = "default_oma")]
    oma_convention: OmaConvention,
    #[serde(default = "default_order")]
    quadrature_order: usize,
}

fn default_file() -> usize {
    1
}

impl D2dParams {
    fn build(self) -> Result<D2dSetup> {
        let sc = D2dScenario {
            alloc: PowerAllocation::fixed(self.alloc)?,
            rates: self.rates,
            lambda_u: self.lambda_u,
            y0: Point::new(self.y0[0], self.y0[1]),
            d: self.d,
            rho: snr_linear(self.power_dbm, self.noise_dbm),
            alpha: self.alpha,
            oma: self.oma_convention,
        };
        sc.validate()?;
        if self.file == 0 || self.file > sc.m_s() {
            return Err(Error::Config(format!("file must lie in 1..={}", sc.m_s())));
        }
        let window = self.window.unwrap_or(sc.r0() + sc.d);
        Ok(D2dSetup { sc, file: self.file, window, rule: chebyshev_nodes(self.quadrature_order)? })
    }
}

#[derive(Debug, Clone)]
struct PushSetup {
    sc: PushScenario,
    rule: QuadratureRule,
}

#[derive(Debug, Clone)]
struct DeliverySetup {
    sc: DeliveryScenario,
    rule: QuadratureRule,
}

#[derive(Debug, Clone)]
struct PadSetup {
    sc: PadScenario,
    m: u32,
    popularity: Vec<f64>,
    outer: QuadratureRule,
    inner: QuadratureRule,
}

#[derive(Debug, Clone)]
struct D2dSetup {
    sc: D2dScenario,
    file: usize,
    window: f64,
    rule: QuadratureRule,
}

#[derive(Debug, Clone)]
enum PointScenario {
    Push(PushSetup),
    Delivery(DeliverySetup),
    Pad(PadSetup),
    D2d(D2dSetup),
}

/// Assumption failures become flagged rows rather than aborting the sweep.
fn flagged(r: Result<ProbEstimate>) -> Result<ProbEstimate> {
    match r {
        Err(Error::AssumptionViolated(what)) => Ok(ProbEstimate::exact(f64::NAN, Source::ClosedForm)
            .with_flag(Flag::AssumptionViolated(what.replace(char::is_whitespace, "_")))),
        other => other,
    }
}

impl PointScenario {
    fn analysis(&self, metric: &str) -> Result<ProbEstimate> {
        let r = match self {
            PointScenario::Push(p) => match metric {
                "hit_noma" => push_hit_probability(p.sc.m, &p.sc, AccessMode::Noma, &p.rule),
                _ => push_hit_probability(p.sc.m, &p.sc, AccessMode::Oma, &p.rule),
            },
            PointScenario::Delivery(p) => match metric {
                "outage_near_noma" => delivery_outage_near(&p.sc, &p.rule),
                "outage_far_noma" => delivery_outage_far(&p.sc, &p.rule),
                "outage_near_oma" => delivery_outage_oma(&p.sc, DeliveryUser::Near, &p.rule),
                _ => delivery_outage_oma(&p.sc, DeliveryUser::Far, &p.rule),
            },
            PointScenario::Pad(p) => {
                let rules = QuadratureOrders { outer: &p.outer, inner: &p.inner };
                match metric {
                    "hit_noma" => pad_hit_probability(p.m, &p.sc, &p.popularity),
                    "hit_oma" => pad_oma_benchmark(OmaVariant::TimeSliced, &p.sc, &p.popularity, p.m),
                    "hit_oma_naive" => pad_oma_benchmark(OmaVariant::Naive, &p.sc, &p.popularity, p.m),
                    "user_outage_noma" => pad_user_outage(&p.sc, p.m, rules),
                    _ => pad_user_outage_oma(&p.sc, p.m, rules),
                }
            }
            PointScenario::D2d(p) => d2d_miss_probability(p.file, &p.sc, metric == "miss_oma", &p.rule),
        };
        flagged(r)
    }

    /// Runs one simulation and returns estimates for `metrics`, in order.
    fn simulate(&self, plan: &TrialPlan, metrics: &[&str]) -> Result<Vec<ProbEstimate>> {
        let (rep, keys): (_, Vec<String>) = match self {
            PointScenario::Push(p) => (simulate_push(plan, &p.sc)?, metrics.iter().map(|m| m.to_string()).collect()),
            PointScenario::Delivery(p) => {
                (simulate_delivery(plan, &p.sc)?, metrics.iter().map(|m| m.to_string()).collect())
            }
            PointScenario::Pad(p) => {
                let m = p.m;
                let keys = metrics
                    .iter()
                    .map(|metric| match *metric {
                        "hit_noma" => format!("hit_noma_m{m}"),
                        "hit_oma" => format!("hit_oma_time_sliced_m{m}"),
                        "hit_oma_naive" => format!("hit_oma_naive_m{m}"),
                        "user_outage_noma" => format!("user_outage_m{m}"),
                        _ => format!("user_outage_oma_m{m}"),
                    })
                    .collect();
                (simulate_pad(plan, &p.sc, &[m], &p.popularity)?, keys)
            }
            PointScenario::D2d(p) => {
                let i = p.file;
                let keys = metrics
                    .iter()
                    .map(
                        |metric| {
                            if *metric == "miss_oma" {
                                format!("miss_oma_f{i}")
                            } else {
                                format!("miss_noma_f{i}")
                            }
                        },
                    )
                    .collect();
                (simulate_d2d(plan, &p.sc, p.window)?, keys)
            }
        };
        Ok(keys.iter().map(|k| rep.estimates[k].clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowEngine {
    Analysis,
    Mc,
}

impl RowEngine {
    pub fn as_str(self) -> &'static str {
        match self {
            RowEngine::Analysis => "analysis",
            RowEngine::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub series: String,
    pub x: f64,
    pub metric: String,
    pub engine: RowEngine,
    pub estimate: ProbEstimate,
}

/// Overrides applied on top of a config before running.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub engine: Option<Engine>,
    pub execution: Execution,
}

impl RunOptions {
    pub fn resolve(&self, spec: &ExperimentSpec) -> Result<ExperimentSpec> {
        let mut s = spec.clone();
        if let Some(t) = self.trials {
            s.trials = t;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(e) = self.engine {
            s.engine = e;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Root seed of one sweep point.
pub fn point_seed(root: u64, series: usize, point: usize) -> u64 {
    derive_seed(derive_seed(root, series as u64), point as u64)
}

/// Evaluates every (series, sweep value) point of an already resolved spec.
pub fn run(spec: &ExperimentSpec, execution: Execution) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let metrics = spec.metrics();
    let points: Vec<(usize, usize, f64)> = (0..spec.series_count())
        .flat_map(|s| spec.sweep.values.iter().enumerate().map(move |(k, &x)| (s, k, x)))
        .collect();
    let eval = |&(s, k, x): &(usize, usize, f64)| -> Result<Vec<ResultRow>> {
        let sc = spec.scenario(s, Some(x))?;
        let label = spec.series_label(s).to_string();
        let row = |metric: &str, engine, estimate| ResultRow {
            series: label.clone(),
            x,
            metric: metric.to_string(),
            engine,
            estimate,
        };
        let mut rows = Vec::new();
        if spec.engine.analysis() {
            for m in &metrics {
                rows.push(row(m, RowEngine::Analysis, sc.analysis(m)?));
            }
        }
        if spec.engine.mc() {
            let plan = TrialPlan { execution, ..TrialPlan::new(spec.trials, point_seed(spec.seed, s, k)) };
            for (m, e) in metrics.iter().zip(sc.simulate(&plan, &metrics)?) {
                rows.push(row(m, RowEngine::Mc, e));
            }
        }
        log::debug!("{}: series {s} point {x} done", spec.name);
        Ok(rows)
    };
    let per_point: Vec<Result<Vec<ResultRow>>> = match execution {
        Execution::Serial => points.iter().map(eval).collect(),
        Execution::Parallel => points.par_iter().map(eval).collect(),
    };
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Writes the CSV table preceded by a `#` comment block holding the resolved config.
pub fn write_csv<W: Write>(spec: &ExperimentSpec, rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "# nomacache experiment `{}`", spec.name)?;
    writeln!(out, "# resolved config:")?;
    for line in spec.to_toml()?.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "series",
        spec.sweep.parameter.as_str(),
        "metric",
        "engine",
        "value",
        "ci_halfwidth",
        "trials",
        "source",
        "flags",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            r.series.clone(),
            fmt_f64(r.x),
            r.metric.clone(),
            r.engine.as_str().to_string(),
            fmt_f64(e.value),
            e.ci_halfwidth.map(fmt_f64).unwrap_or_default(),
            e.trials.map(|t| t.to_string()).unwrap_or_default(),
            e.source.as_str().to_string(),
            e.flags_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(spec: &ExperimentSpec, rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(spec, rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// One data row read back from a result CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub series: String,
    pub x: f64,
    pub metric: String,
    pub engine: String,
    pub value: f64,
    pub ci_halfwidth: Option<f64>,
    pub flags: String,
}

/// Parses a result CSV; returns the sweep parameter name and the rows.
pub fn read_csv(text: &str) -> Result<(String, Vec<CsvRow>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Error::Parse(e.to_string());
    let header = rdr.headers().map_err(parse_err)?.clone();
    if header.len() != 9 || &header[0] != "series" {
        return Err(Error::Parse("not a nomacache result table".into()));
    }
    let num = |s: &str| -> Result<f64> {
        if s == "nan" {
            return Ok(f64::NAN);
        }
        s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        rows.push(CsvRow {
            series: rec[0].to_string(),
            x: num(&rec[1])?,
            metric: rec[2].to_string(),
            engine: rec[3].to_string(),
            value: num(&rec[4])?,
            ci_halfwidth: if rec[5].is_empty() { None } else { Some(num(&rec[5])?) },
            flags: rec[8].to_string(),
        });
    }
    Ok((header[1].to_string(), rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub series: String,
    pub x: f64,
    pub metric: String,
    pub analysis: f64,
    pub simulation: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscrepancyReport {
    pub checked: usize,
    /// Points skipped because the analysis flagged them infeasible.
    pub excluded: usize,
    pub violations: Vec<Violation>,
}

impl DiscrepancyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} points checked, {} excluded as infeasible, {} violations\n",
            self.checked,
            self.excluded,
            self.violations.len()
        );
        for v in &self.violations {
            let _ = writeln!(
                s,
                "  [{}] x={} {}: analysis {:.6} vs mc {:.6} (|diff| {:.6} > {:.6})",
                v.series,
                v.x,
                v.metric,
                v.analysis,
                v.simulation,
                (v.analysis - v.simulation).abs(),
                v.allowed
            );
        }
        s
    }
}

/// Pairs analysis and simulation rows of the same point and metric.
pub fn compare_rows(rows: &[ResultRow], tol: Tolerance) -> DiscrepancyReport {
    let mut rep = DiscrepancyReport::default();
    for a in rows.iter().filter(|r| r.engine == RowEngine::Analysis) {
        let Some(m) = rows
            .iter()
            .find(|r| r.engine == RowEngine::Mc && r.series == a.series && r.x == a.x && r.metric == a.metric)
        else {
            continue;
        };
        if a.estimate.is_flagged_infeasible() || !a.estimate.value.is_finite() {
            rep.excluded += 1;
            continue;
        }
        rep.checked += 1;
        let trials = m.estimate.trials.unwrap_or(1);
        let allowed = tol.allowed(a.estimate.value, trials);
        if (a.estimate.value - m.estimate.value).abs() > allowed {
            rep.violations.push(Violation {
                series: a.series.clone(),
                x: a.x,
                metric: a.metric.clone(),
                analysis: a.estimate.value,
                simulation: m.estimate.value,
                allowed,
            });
        }
    }
    rep
}

/// Runs both engines and checks every point against the config's tolerance.
pub fn compare(spec: &ExperimentSpec, execution: Execution) -> Result<(Vec<ResultRow>, DiscrepancyReport)> {
    if spec.engine != Engine::Both {
        return Err(Error::Config("compare needs engine = both".into()));
    }
    let rows = run(spec, execution)?;
    let rep = compare_rows(&rows, spec.tolerance);
    Ok((rows, rep))
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// Static SVG line chart of a result CSV: one polyline per
/// (series, metric, engine); simulation points are drawn as markers.
/// Outage and miss metrics use a log y axis.
pub fn plot_svg(text: &str, title: &str) -> Result<String> {
    let (param, rows) = read_csv(text)?;
    let rows: Vec<&CsvRow> = rows.iter().filter(|r| r.value.is_finite()).collect();
    let log_y = !rows.is_empty() && rows.iter().all(|r| !r.metric.starts_with("hit"));
    let ty = |v: f64| if log_y { v.max(1e-6).log10() } else { v };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        x0 = x0.min(r.x);
        x1 = x1.max(r.x);
        y0 = y0.min(ty(r.value));
        y1 = y1.max(ty(r.value));
    }
    if rows.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    } else {
        y0 = 0.0;
        y1 = if y1 > 0.0 { y1.max(1e-3) * 1.05 } else { 1.0 };
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let (w, h, ml, mr, mt, mb) = (720.0, 480.0, 70.0, 220.0, 40.0, 50.0);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (ty(y) - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14">{}</text>"#, ml, xml_escape(title));
    let (bl, br, bt, bb) = (ml, w - mr, mt, h - mb);
    let _ =
        writeln!(s, r#"<rect x="{bl}" y="{bt}" width="{}" height="{}" fill="none" stroke="black"/>"#, br - bl, bb - bt);
    for k in 0..=5 {
        let x = x0 + (x1 - x0) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(x), bb + 16.0, trim(x));
    }
    if log_y {
        for e in (y0 as i64)..=(y1 as i64) {
            let y = h - mb - (e as f64 - y0) / (y1 - y0) * (h - mt - mb);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#, ml - 6.0, y + 4.0);
        }
    } else {
        for k in 0..=5 {
            let v = y0 + (y1 - y0) * k as f64 / 5.0;
            let _ =
                writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#, ml - 6.0, py(v) + 4.0, v);
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (bl + br) / 2.0,
        h - 12.0,
        xml_escape(&param)
    );

    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in &rows {
        let k = (r.series.clone(), r.metric.clone(), r.engine.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (i, (series, metric, engine)) in keys.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.series == series && &r.metric == metric && &r.engine == engine)
            .map(|r| (px(r.x), py(r.value)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if engine == "mc" {
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="none" stroke="{color}"/>"#);
            }
        } else {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = mt + 14.0 * (i as f64 + 1.0);
        let label =
            if series.is_empty() { format!("{metric} ({engine})") } else { format!("{series} {metric} ({engine})") };
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            br + 10.0,
            br + 28.0,
            br + 32.0,
            ly + 4.0,
            xml_escape(&label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
