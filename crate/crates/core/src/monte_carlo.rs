//! Simulation oracle: samples deployments, fading and interference and counts
//! decoding events for every probability the analysis modules evaluate.
//!
//! Trial `k` draws from its own generator seeded by [`trial_seed`]`(root, k)`
//! and every estimate is built from integer counters, so results do not depend
//! on how trials are spread over threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::ProbEstimate;
use crate::noma_engine::{decodes, derive_cr_allocation, sic_success_depth, sinr_noma_downlink};
use crate::pad_analysis::{D2dScenario, PadScenario};
use crate::point_fields::{
    exp1, interference_tail_mean, poisson_count, sample_ordered_distances, uniform_in_disc, uniform_in_ring,
    window_bias_bound, Point,
};
use crate::ptd_analysis::{DeliveryScenario, DeliveryUser, PushScenario};

/// Largest tolerated Laplace-exponent error from the interferer window.
pub const DEFAULT_WINDOW_BIAS_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub trials: u64,
    pub root_seed: u64,
    /// Index of the first trial; trials `first_trial..first_trial + trials` run.
    pub first_trial: u64,
    pub execution: Execution,
    pub window_bias_limit: f64,
    /// Emit one trace-level log line per trial.
    pub event_log: bool,
}

impl TrialPlan {
    pub fn new(trials: u64, root_seed: u64) -> Self {
        TrialPlan {
            trials,
            root_seed,
            first_trial: 0,
            execution: Execution::Parallel,
            window_bias_limit: DEFAULT_WINDOW_BIAS_LIMIT,
            event_log: false,
        }
    }

    pub fn serial(mut self) -> Self {
        self.execution = Execution::Serial;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Push(PushScenario),
    Delivery(DeliveryScenario),
    Pad {
        scenario: PadScenario,
        m_values: Vec<u32>,
        popularity: Vec<f64>,
    },
    D2d {
        scenario: D2dScenario,
        /// Radius of the simulated user window around the BS.
        window: f64,
    },
}

/// Named estimates plus diagnostics (window size, tail correction, counts of
/// per-draw property violations, short-link frequency).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationReport {
    pub estimates: BTreeMap<String, ProbEstimate>,
    pub metadata: BTreeMap<String, f64>,
}

impl SimulationReport {
    pub fn get(&self, name: &str) -> Option<&ProbEstimate> {
        self.estimates.get(name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.estimates.get(name).map(|e| e.value).unwrap_or_else(|| panic!("no estimate named {name}"))
    }

    pub fn meta(&self, name: &str) -> f64 {
        self.metadata.get(name).copied().unwrap_or(f64::NAN)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: two rounds of SplitMix64 over the root seed and the index.
pub fn trial_seed(root_seed: u64, index: u64) -> u64 {
    splitmix64(root_seed ^ splitmix64(index))
}

pub fn trial_rng(root_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(root_seed, index))
}

/// Derives an independent root seed for a labelled sub-experiment.
pub fn derive_seed(root_seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(root_seed).wrapping_add(label))
}

/// Runs `trial` once per index with its own generator and sums the counters.
fn run_counts<F>(plan: &TrialPlan, counters: usize, trial: F) -> Vec<u64>
where
    F: Fn(u64, &mut ChaCha8Rng, &mut [u64]) + Sync,
{
    let body = |mut acc: Vec<u64>, k: u64| {
        let mut rng = trial_rng(plan.root_seed, k);
        trial(k, &mut rng, &mut acc);
        acc
    };
    let range = plan.first_trial..plan.first_trial + plan.trials;
    match plan.execution {
        Execution::Serial => range.fold(vec![0; counters], body),
        Execution::Parallel => range.into_par_iter().fold(|| vec![0; counters], body).reduce(
            || vec![0; counters],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        ),
    }
}

pub fn simulate(plan: &TrialPlan, scenario: &Scenario) -> Result<SimulationReport> {
    match scenario {
        Scenario::Push(sc) => simulate_push(plan, sc),
        Scenario::Delivery(sc) => simulate_delivery(plan, sc),
        Scenario::Pad { scenario, m_values, popularity } => simulate_pad(plan, scenario, m_values, popularity),
        Scenario::D2d { scenario, window } => simulate_d2d(plan, scenario, *window),
    }
}

fn outage_estimate(failures: u64, trials: u64) -> ProbEstimate {
    ProbEstimate::from_counts(failures, trials)
}

/// Content pushing under per-draw CR allocation. Estimates, for every
/// `n ≤ t` and pushed file `i`:
/// `outage_n{n}_f{i}` (NOMA), `oma_outage_n{n}_f1`, `hit_noma_m{n}`, `hit_oma_m{n}`;
/// plus `hit_noma`/`hit_oma` at the scenario's `m`. Metadata counts draws where
/// the NOMA and OMA `f_1` indicators differ (`indicator_mismatch_n{n}`) and
/// where the per-draw NOMA hit falls below OMA (`dominance_violations_n{n}`).
pub fn simulate_push(plan: &TrialPlan, sc: &PushScenario) -> Result<SimulationReport> {
    plan.validate()?;
    sc.validate()?;
    let t = sc.t as usize;
    let ms = sc.m_s();
    let eps = sc.library.eps().to_vec();
    let pop = sc.library.pushed_popularity(ms);
    let lambda = sc.geometry.lambda_c;
    let alpha = sc.geometry.alpha;
    let inv_rho = 1.0 / sc.rho;
    // per n: ms NOMA failures, OMA failure, mismatch, dominance violation
    let stride = ms + 3;
    let counts = run_counts(plan, t * stride, |k, rng, acc| {
        let r = sample_ordered_distances(lambda, t, 0.0, rng).expect("validated scenario");
        let z_t = r[t - 1].powf(-alpha);
        let alloc = derive_cr_allocation(&sc.betas, sc.rho, z_t, eps[0]).expect("validated betas");
        let coeffs = alloc.coeffs();
        for (n, &rn) in r.iter().enumerate().take(t) {
            let z = rn.powf(-alpha);
            let depth = sic_success_depth(z, coeffs, &eps, 0.0, inv_rho);
            let oma_ok = decodes(sinr_noma_downlink(z, 0, &[1.0], 0.0, inv_rho), eps[0]);
            let base = n * stride;
            for i in 0..ms {
                if depth <= i {
                    acc[base + i] += 1;
                }
            }
            if !oma_ok {
                acc[base + ms] += 1;
            }
            if (depth >= 1) != oma_ok {
                acc[base + ms + 1] += 1;
            }
            let noma_hit: f64 = (0..depth).map(|i| pop[i]).sum();
            let oma_hit = if oma_ok { pop[0] } else { 0.0 };
            if noma_hit < oma_hit {
                acc[base + ms + 2] += 1;
            }
            if plan.event_log {
                log::trace!("push trial {k} n={} r={:.3} depth={depth} oma={oma_ok}", n + 1, r[n]);
            }
        }
    });
    let trials = plan.trials;
    let mut rep = SimulationReport::default();
    for n in 0..t {
        let base = n * stride;
        let mut hit_noma = 0.0;
        for i in 0..ms {
            let fail = counts[base + i];
            rep.estimates.insert(format!("outage_n{}_f{}", n + 1, i + 1), outage_estimate(fail, trials));
            hit_noma += pop[i] * (trials - fail) as f64 / trials as f64;
        }
        let oma_fail = counts[base + ms];
        rep.estimates.insert(format!("oma_outage_n{}_f1", n + 1), outage_estimate(oma_fail, trials));
        let hit_oma = pop[0] * (trials - oma_fail) as f64 / trials as f64;
        rep.estimates.insert(format!("hit_noma_m{}", n + 1), ProbEstimate::monte_carlo(hit_noma, trials));
        rep.estimates.insert(format!("hit_oma_m{}", n + 1), ProbEstimate::monte_carlo(hit_oma, trials));
        rep.metadata.insert(format!("indicator_mismatch_n{}", n + 1), counts[base + ms + 1] as f64);
        rep.metadata.insert(format!("dominance_violations_n{}", n + 1), counts[base + ms + 2] as f64);
    }
    let m = sc.m;
    for key in ["hit_noma", "hit_oma"] {
        let e = rep.estimates[&format!("{key}_m{m}")].clone();
        rep.estimates.insert(key.to_string(), e);
    }
    Ok(rep)
}

/// Interference at `at` from unit-power Rayleigh transmitters at `sources`,
/// plus the mean of the field beyond the window.
fn interference<R: rand::Rng + ?Sized>(at: Point, sources: &[Point], alpha: f64, tail: f64, rng: &mut R) -> f64 {
    sources.iter().map(|x| exp1(rng) * at.dist(*x).powf(-alpha)).sum::<f64>() + tail
}

/// Samples the interference seen at the origin from an HPPP of density
/// `lambda` in a disc of radius `window`, with the out-of-window mean added.
pub fn sample_interference<R: rand::Rng + ?Sized>(lambda: f64, alpha: f64, window: f64, rng: &mut R) -> f64 {
    let n = poisson_count(lambda * PI * window * window, rng);
    let pts: Vec<Point> = (0..n).map(|_| uniform_in_disc(window, rng)).collect();
    interference(Point::ORIGIN, &pts, alpha, interference_tail_mean(lambda, alpha, window), rng)
}

/// Two-user delivery in the interferer field. Estimates `outage_near_noma`,
/// `outage_far_noma`, `outage_near_oma`, `outage_far_oma`.
pub fn simulate_delivery(plan: &TrialPlan, sc: &DeliveryScenario) -> Result<SimulationReport> {
    plan.validate()?;
    sc.validate()?;
    let g = &sc.geometry;
    let w = g.sim_radius;
    let bound = window_bias_bound(g.lambda_c, g.alpha, w, sc.max_decoding_exponent());
    if bound > plan.window_bias_limit {
        return Err(Error::WindowBias { bound, limit: plan.window_bias_limit });
    }
    let tail = g.interference_tail_mean();
    let mean_count = g.lambda_c * PI * w * w;
    let coeffs = sc.alloc.coeffs().to_vec();
    let eps = sc.eps().to_vec();
    let inv_rho = 1.0 / sc.rho;
    let e_far = sc.oma_threshold(DeliveryUser::Far);
    let e_near = sc.oma_threshold(DeliveryUser::Near);
    let counts = run_counts(plan, 5, |k, rng, acc| {
        let n = poisson_count(mean_count, rng);
        let pts: Vec<Point> = (0..n).map(|_| uniform_in_disc(w, rng)).collect();
        let far = uniform_in_ring(g.rs, g.rc, rng);
        let near = uniform_in_disc(g.rs, rng);
        let z_far = exp1(rng) * far.norm().powf(-g.alpha);
        let z_near = exp1(rng) * near.norm().powf(-g.alpha);
        let i_far = interference(far, &pts, g.alpha, tail, rng);
        let i_near = interference(near, &pts, g.alpha, tail, rng);
        let far_ok = sic_success_depth(z_far, &coeffs, &eps, i_far, inv_rho) >= 1;
        let near_ok = sic_success_depth(z_near, &coeffs, &eps, i_near, inv_rho) >= 2;
        let far_oma = decodes(sinr_noma_downlink(z_far, 0, &[1.0], i_far, inv_rho), e_far);
        let near_oma = decodes(sinr_noma_downlink(z_near, 0, &[1.0], i_near, inv_rho), e_near);
        acc[0] += u64::from(!near_ok);
        acc[1] += u64::from(!far_ok);
        acc[2] += u64::from(!near_oma);
        acc[3] += u64::from(!far_oma);
        acc[4] += u64::from(near.norm() < 1.0) + u64::from(far.norm() < 1.0);
        if plan.event_log {
            log::trace!("delivery trial {k} interferers={n} near_ok={near_ok} far_ok={far_ok}");
        }
    });
    let mut rep = SimulationReport::default();
    for (name, c) in ["outage_near_noma", "outage_far_noma", "outage_near_oma", "outage_far_oma"].iter().zip(&counts) {
        rep.estimates.insert(name.to_string(), outage_estimate(*c, plan.trials));
    }
    rep.metadata.insert("window_radius".into(), w);
    rep.metadata.insert("tail_interference_mean".into(), tail);
    rep.metadata.insert("window_bias_bound".into(), bound);
    rep.metadata.insert("short_link_fraction".into(), counts[4] as f64 / (2 * plan.trials) as f64);
    Ok(rep)
}

/// Push-and-deliver with exclusion-zone server sampling. For each requested
/// `m`: `user_outage_m{m}`, `user_outage_oma_m{m}`, `cs_outage_m{m}_f{i}`,
/// `cs_outage_oma_m{m}_f{i}`, `hit_noma_m{m}`, `hit_oma_time_sliced_m{m}`,
/// `hit_oma_naive_m{m}`.
pub fn simulate_pad(
    plan: &TrialPlan,
    sc: &PadScenario,
    m_values: &[u32],
    popularity: &[f64],
) -> Result<SimulationReport> {
    plan.validate()?;
    sc.validate()?;
    let ms = sc.m_s();
    if popularity.len() != ms {
        return Err(Error::param("popularity", "need one weight per pushed file"));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(Error::param("m_values", "need at least one ordering index, all >= 1"));
    }
    let g = &sc.geometry;
    let excl = g.exclusion_radius();
    let m_max = *m_values.iter().max().unwrap() as usize;
    let coeffs = sc.alloc.coeffs().to_vec();
    let eps = sc.eps();
    let oma_eps: Vec<f64> = (0..=ms).map(|l| sc.oma_threshold(l)).collect();
    let inv_rho = 1.0 / sc.rho;
    // per m: user NOMA, user OMA, ms CS NOMA, ms CS OMA; one short-link counter
    let stride = 2 + 2 * ms;
    let nm = m_values.len();
    let counts = run_counts(plan, nm * stride + 1, |k, rng, acc| {
        let r = sample_ordered_distances(g.lambda_c, m_max, excl, rng).expect("validated scenario");
        for (slot, &m) in m_values.iter().enumerate() {
            let rm = r[m as usize - 1];
            let user = Point::new(rm, 0.0).offset(uniform_in_disc(g.rc, rng));
            let u = user.norm();
            let z_user = exp1(rng) * u.powf(-g.alpha);
            let base = slot * stride;
            if sic_success_depth(z_user, &coeffs, &eps, 0.0, inv_rho) < 1 {
                acc[base] += 1;
            }
            if !decodes(sinr_noma_downlink(z_user, 0, &[1.0], 0.0, inv_rho), oma_eps[0]) {
                acc[base + 1] += 1;
            }
            let z_cs = rm.powf(-g.alpha);
            let depth = sic_success_depth(z_cs, &coeffs, &eps, 0.0, inv_rho);
            let oma_snr = sinr_noma_downlink(z_cs, 0, &[1.0], 0.0, inv_rho);
            for i in 1..=ms {
                if depth < i + 1 {
                    acc[base + 1 + i] += 1;
                }
                if !decodes(oma_snr, oma_eps[i]) {
                    acc[base + 1 + ms + i] += 1;
                }
            }
            if u < 1.0 {
                acc[nm * stride] += 1;
            }
            if plan.event_log {
                log::trace!("pad trial {k} m={m} r_m={rm:.3} user={u:.3} depth={depth}");
            }
        }
    });
    let trials = plan.trials;
    let frac = |c: u64| (trials - c) as f64 / trials as f64;
    let mut rep = SimulationReport::default();
    for (slot, &m) in m_values.iter().enumerate() {
        let base = slot * stride;
        rep.estimates.insert(format!("user_outage_m{m}"), outage_estimate(counts[base], trials));
        rep.estimates.insert(format!("user_outage_oma_m{m}"), outage_estimate(counts[base + 1], trials));
        let (mut hit, mut hit_oma) = (0.0, 0.0);
        for i in 1..=ms {
            let c = counts[base + 1 + i];
            let co = counts[base + 1 + ms + i];
            rep.estimates.insert(format!("cs_outage_m{m}_f{i}"), outage_estimate(c, trials));
            rep.estimates.insert(format!("cs_outage_oma_m{m}_f{i}"), outage_estimate(co, trials));
            hit += popularity[i - 1] * frac(c);
            hit_oma += popularity[i - 1] * frac(co);
        }
        rep.estimates.insert(format!("hit_noma_m{m}"), ProbEstimate::monte_carlo(hit, trials));
        rep.estimates.insert(format!("hit_oma_time_sliced_m{m}"), ProbEstimate::monte_carlo(hit_oma, trials));
        rep.estimates.insert(format!("hit_oma_naive_m{m}"), ProbEstimate::monte_carlo(0.0, trials));
    }
    rep.metadata.insert("short_link_fraction".into(), counts[nm * stride] as f64 / (nm as u64 * trials) as f64);
    Ok(rep)
}

/// D2D cache search around `y0` (the requester itself is not a candidate).
/// Estimates `miss_noma_f{i}` and `miss_oma_f{i}` for every pushed file.
pub fn simulate_d2d(plan: &TrialPlan, sc: &D2dScenario, window: f64) -> Result<SimulationReport> {
    plan.validate()?;
    sc.validate()?;
    let need = sc.r0() + sc.d;
    if window < need {
        return Err(Error::param(
            "window",
            format!("user window {window} m must cover the search disc out to {need} m"),
        ));
    }
    let ms = sc.m_s();
    let coeffs = sc.alloc.coeffs().to_vec();
    let eps: Vec<f64> = sc.rates.iter().map(|r| r.exp2() - 1.0).collect();
    let oma_eps: Vec<f64> = (0..=ms).map(|l| sc.oma.threshold(sc.rates[l], ms + 1)).collect();
    let inv_rho = 1.0 / sc.rho;
    let mean_count = sc.lambda_u * PI * window * window;
    let counts = run_counts(plan, 2 * ms, |k, rng, acc| {
        let n = poisson_count(mean_count, rng);
        let mut found = vec![false; 2 * ms];
        for _ in 0..n {
            let p = uniform_in_disc(window, rng);
            let h = exp1(rng);
            if p.dist(sc.y0) > sc.d {
                continue;
            }
            let z = h * p.norm().powf(-sc.alpha);
            let depth = sic_success_depth(z, &coeffs, &eps, 0.0, inv_rho);
            let snr = sinr_noma_downlink(z, 0, &[1.0], 0.0, inv_rho);
            for i in 1..=ms {
                found[i - 1] |= depth > i;
                found[ms + i - 1] |= decodes(snr, oma_eps[i]);
            }
        }
        for (c, f) in acc.iter_mut().zip(&found) {
            *c += u64::from(!f);
        }
        if plan.event_log {
            log::trace!("d2d trial {k} users={n} found={found:?}");
        }
    });
    let mut rep = SimulationReport::default();
    for i in 1..=ms {
        rep.estimates.insert(format!("miss_noma_f{i}"), outage_estimate(counts[i - 1], plan.trials));
        rep.estimates.insert(format!("miss_oma_f{i}"), outage_estimate(counts[ms + i - 1], plan.trials));
    }
    rep.metadata.insert("window_radius".into(), window);
    Ok(rep)
}
