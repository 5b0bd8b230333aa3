#![allow(dead_code)]

use nomacache::content_model::FileLibrary;
use nomacache::noma_engine::{snr_linear, OmaConvention, PowerAllocation};
use nomacache::pad_analysis::{D2dScenario, PadScenario};
use nomacache::point_fields::{GeometryConfig, Point};
use nomacache::ptd_analysis::{DeliveryScenario, PushScenario};
use nomacache::ProbEstimate;

pub fn push(power_dbm: f64, rc: f64, gamma: f64, m: u32) -> PushScenario {
    PushScenario {
        m,
        t: 5,
        library: FileLibrary::equal_rate(10, gamma, 1.0, 3).unwrap(),
        betas: vec![0.75, 0.25],
        rho: snr_linear(power_dbm, -100.0),
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(rc),
            rc,
            rs: rc / 2.0,
            ..GeometryConfig::default()
        },
    }
}

pub fn delivery(power_dbm: f64, alpha: f64) -> DeliveryScenario {
    DeliveryScenario {
        alloc: PowerAllocation::fixed(vec![0.75, 0.25]).unwrap(),
        rates: [1.0, 6.0],
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(100.0),
            rc: 100.0,
            rs: 60.0,
            alpha,
            sim_radius: 5000.0,
            ..GeometryConfig::default()
        },
        rho: snr_linear(power_dbm, -100.0),
        oma: OmaConvention::TimeSliced,
    }
}

pub fn pad(power_dbm: f64) -> PadScenario {
    PadScenario {
        alloc: PowerAllocation::fixed(vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
        rates: vec![0.125, 0.75, 0.875, 2.75],
        geometry: GeometryConfig {
            lambda_c: GeometryConfig::figure_density(50.0),
            rc: 50.0,
            rs: 25.0,
            delta: 1.1,
            alpha: 3.0,
            ..GeometryConfig::default()
        },
        rho: snr_linear(power_dbm, -71.0),
        oma: OmaConvention::TimeSliced,
    }
}

pub fn d2d(power_dbm: f64, d: f64) -> D2dScenario {
    D2dScenario {
        alloc: PowerAllocation::fixed(vec![0.75, 0.25]).unwrap(),
        rates: vec![0.5, 4.0],
        lambda_u: 5e-5,
        y0: Point::new(500.0, 500.0),
        d,
        rho: snr_linear(power_dbm, -71.0),
        alpha: 3.0,
        oma: OmaConvention::TimeSliced,
    }
}

/// `|mc - analytic| <= 3 SE + 0.005`, SE taken at the analytic value.
pub fn agrees(mc: &ProbEstimate, analytic: f64) -> bool {
    let n = mc.trials.expect("simulated estimate") as f64;
    let se = (analytic * (1.0 - analytic) / n).sqrt();
    (mc.value - analytic).abs() <= 3.0 * se + 0.005
}
