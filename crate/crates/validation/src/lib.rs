//! Figure scenarios and reporting helpers for the acceptance checks.

use nomacache::content_model::FileLibrary;
use nomacache::experiment_runner::{run, Engine, ExperimentSpec, ResultRow, RowEngine};
use nomacache::monte_carlo::Execution;
use nomacache::noma_engine::{snr_linear, OmaConvention, PowerAllocation};
use nomacache::pad_analysis::{D2dScenario, PadScenario};
use nomacache::point_fields::{GeometryConfig, Point};
use nomacache::ptd_analysis::{DeliveryScenario, PushScenario};
use nomacache::ProbEstimate;

/// Noise floor of the pushing and delivery figures.
pub const NOISE_PTD_DBM: f64 = -100.0;
/// Noise floor assumed for the push-and-deliver and D2D figures.
pub const NOISE_PAD_DBM: f64 = -71.0;

pub fn fig5(power_dbm: f64, rc: f64, gamma: f64) -> PushScenario {
    PushScenario {
        m: 1,
        t: 5,
        library: FileLibrary::equal_rate(10, gamma, 1.0, 3).expect("valid library"),
        betas: vec![0.75, 0.25],
        rho: snr_linear(power_dbm, NOISE_PTD_DBM),
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(rc),
            rc,
            rs: rc / 2.0,
            ..GeometryConfig::default()
        },
    }
}

pub fn fig7(power_dbm: f64, alpha: f64) -> DeliveryScenario {
    DeliveryScenario {
        alloc: PowerAllocation::fixed(vec![0.75, 0.25]).expect("valid allocation"),
        rates: [1.0, 6.0],
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(100.0),
            rc: 100.0,
            rs: 60.0,
            alpha,
            sim_radius: 5000.0,
            ..GeometryConfig::default()
        },
        rho: snr_linear(power_dbm, NOISE_PTD_DBM),
        oma: OmaConvention::TimeSliced,
    }
}

/// Captioned coefficients {4/8, 3/8, 2/8, 1/8} scaled to unit sum.
pub fn fig8(power_dbm: f64) -> PadScenario {
    PadScenario {
        alloc: PowerAllocation::fixed(vec![0.4, 0.3, 0.2, 0.1]).expect("valid allocation"),
        rates: vec![0.125, 0.75, 0.875, 2.75],
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(50.0),
            rc: 50.0,
            rs: 25.0,
            delta: 1.1,
            alpha: 3.0,
            ..GeometryConfig::default()
        },
        rho: snr_linear(power_dbm, NOISE_PAD_DBM),
        oma: OmaConvention::TimeSliced,
    }
}

pub fn fig10(power_dbm: f64, d: f64, lambda_u: f64) -> D2dScenario {
    D2dScenario {
        alloc: PowerAllocation::fixed(vec![0.75, 0.25]).expect("valid allocation"),
        rates: vec![0.5, 4.0],
        lambda_u,
        y0: Point::new(500.0, 500.0),
        d,
        rho: snr_linear(power_dbm, NOISE_PAD_DBM),
        alpha: 3.0,
        oma: OmaConvention::TimeSliced,
    }
}

/// Runs one sweep value of a bundled config with both engines.
pub fn figure_point(name: &str, x: f64, trials: u64) -> nomacache::Result<Vec<ResultRow>> {
    let mut spec = ExperimentSpec::load(name)?;
    spec.engine = Engine::Both;
    spec.trials = trials;
    spec.sweep.values = vec![x];
    run(&spec, Execution::Parallel)
}

pub fn pick<'a>(rows: &'a [ResultRow], series: &str, metric: &str, engine: RowEngine) -> &'a ProbEstimate {
    rows.iter()
        .find(|r| r.series == series && r.metric == metric && r.engine == engine)
        .map(|r| &r.estimate)
        .unwrap_or_else(|| panic!("no row {series}/{metric}/{engine:?}"))
}

/// `|mc - analytic| <= 3 SE + 0.005`, SE at the analytical value.
pub fn oracle_allowance(analytic: f64, trials: u64) -> f64 {
    3.0 * (analytic * (1.0 - analytic) / trials as f64).max(0.0).sqrt() + 0.005
}

pub fn agrees(mc: &ProbEstimate, analytic: f64) -> bool {
    let n = mc.trials.expect("simulated estimate");
    (mc.value - analytic).abs() <= oracle_allowance(analytic, n)
}

pub fn within_abs(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

pub fn within_rel(v: f64, target: f64, rel: f64) -> bool {
    (v / target - 1.0).abs() <= rel
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Collects one PASS/FAIL line per check.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    pub fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), pass, detail));
    }

    pub fn failures(&self) -> Vec<&str> {
        self.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect()
    }

    pub fn total(&self) -> usize {
        self.lines.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_grid_is_small() {
        let mut s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&mut s, |x| x) <= 0.5 / 1000.0 + 1e-12);
        let mut shifted: Vec<f64> = s.iter().map(|x| x * 0.5).collect();
        assert!(ks_statistic(&mut shifted, |x| x) > 0.4);
    }

    #[test]
    fn fixtures_validate() {
        fig5(40.0, 50.0, 0.5).validate().unwrap();
        fig7(20.0, 3.0).validate().unwrap();
        fig8(40.0).validate().unwrap();
        fig10(40.0, 150.0, 5e-5).validate().unwrap();
    }
}
