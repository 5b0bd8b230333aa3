//! Closed forms for push-then-deliver: pushing outage and hit probabilities
//! under CR-inspired allocation, and two-user delivery outage in the
//! inter-cluster interference field.

use std::f64::consts::PI;

use crate::content_model::FileLibrary;
use crate::error::{Error, Result};
use crate::estimate::{Flag, ProbEstimate, Source};
use crate::noma_engine::{check_betas, residual_split, OmaConvention, PowerAllocation};
use crate::numerics::{beta_fn, ln_factorial, poisson_cdf_below, QuadratureRule};
use crate::point_fields::GeometryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Noma,
    Oma,
}

/// Content pushing towards `CS_t` while `CS_m` (closer) overhears.
#[derive(Debug, Clone, PartialEq)]
pub struct PushScenario {
    pub m: u32,
    pub t: u32,
    /// Library whose `rates` hold `R_1..R_{M_s}`.
    pub library: FileLibrary,
    /// Residual split `β_2..β_{M_s}`.
    pub betas: Vec<f64>,
    pub rho: f64,
    pub geometry: GeometryConfig,
}

impl PushScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.m == 0 || self.m > self.t {
            return Err(Error::param("m", "need 1 <= m <= t"));
        }
        if self.m_s() == 0 {
            return Err(Error::param("m_s", "at least one file must be pushed"));
        }
        if self.betas.len() + 1 != self.m_s() {
            return Err(Error::param("betas", "need one beta per pushed file after the first"));
        }
        check_betas(&self.betas)?;
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        Ok(())
    }

    pub fn m_s(&self) -> usize {
        self.library.rates().len()
    }

    /// `ε_i` for 1-based file index `i`.
    pub fn eps(&self, i: usize) -> f64 {
        self.library.eps()[i - 1]
    }

    /// `φ_i` for `i ≥ 2`.
    pub fn phi(&self, i: usize) -> Result<f64> {
        let (_, phi) = residual_split(&self.betas, &self.library.eps()[1..])?;
        phi.get(i.wrapping_sub(2))
            .copied()
            .ok_or_else(|| Error::param("i", format!("file index {i} outside 2..={}", self.m_s())))
    }

    fn lambda_pi(&self) -> f64 {
        self.geometry.lambda_c * PI
    }
}

/// `P(fewer than n servers within distance d)` with `d2 = d²`.
fn fewer_than(lambda_pi: f64, d2: f64, n: u32) -> f64 {
    poisson_cdf_below(lambda_pi * d2, n)
}

/// Outage of `CS_n` for `f_1`; identical under NOMA and OMA.
pub fn outage_f1_at_cs(n: u32, sc: &PushScenario) -> Result<ProbEstimate> {
    sc.validate()?;
    if n == 0 || n > sc.t {
        return Err(Error::param("n", "need 1 <= n <= t"));
    }
    let alpha = sc.geometry.alpha;
    let d2 = (sc.rho / sc.eps(1)).powf(2.0 / alpha);
    ProbEstimate::from_raw(fewer_than(sc.lambda_pi(), d2, n), Source::ClosedForm)
}

/// Outage of the QoS target `CS_t` for `f_i`, `i ≥ 2`.
pub fn outage_fi_at_target(i: usize, sc: &PushScenario) -> Result<ProbEstimate> {
    sc.validate()?;
    let phi = sc.phi(i)?;
    if phi <= 0.0 {
        return Ok(ProbEstimate::exact(1.0, Source::ClosedForm).with_flag(Flag::Infeasible { stage: i }));
    }
    let e1 = sc.eps(1);
    let inv = e1 / sc.rho + (1.0 + e1) / (sc.rho * phi);
    let d2 = inv.powf(-2.0 / sc.geometry.alpha);
    ProbEstimate::from_raw(fewer_than(sc.lambda_pi(), d2, sc.t), Source::ClosedForm)
}

/// Outage of `CS_m`, `m < t`, for `f_i`, `i ≥ 2`: `P_{t,1} + Q1` with Q1 the
/// binomially expanded joint-distance integral evaluated by the rule.
pub fn outage_fi_at_cs_m(m: u32, i: usize, sc: &PushScenario, rule: &QuadratureRule) -> Result<ProbEstimate> {
    sc.validate()?;
    if m == 0 || m >= sc.t {
        return Err(Error::param("m", "need 1 <= m < t"));
    }
    if sc.eps(sc.m_s()) < sc.eps(1) {
        return Err(Error::AssumptionViolated(format!(
            "closed form needs eps_Ms >= eps_1, got {} < {}",
            sc.eps(sc.m_s()),
            sc.eps(1)
        )));
    }
    let phi = sc.phi(i)?;
    if phi <= 0.0 {
        return Ok(ProbEstimate::exact(1.0, Source::Quadrature).with_flag(Flag::Infeasible { stage: i }));
    }
    let t = sc.t;
    let alpha = sc.geometry.alpha;
    let rho = sc.rho;
    let e1 = sc.eps(1);
    let lp = sc.lambda_pi();
    let p_t1 = outage_f1_at_cs(t, sc)?.value;

    let tau1 = (rho * phi / (1.0 + e1 + e1 * phi)).powf(1.0 / alpha);
    let tau2 = (e1 / rho).powf(-1.0 / alpha);
    if tau1 > tau2 {
        return Err(Error::param("phi", format!("quadrature interval [{tau1}, {tau2}] is reversed")));
    }
    let g = |y: f64| (phi * (rho - e1 * y.powf(alpha)) / (1.0 + e1)).max(0.0).powf(1.0 / alpha);
    let gap = t - m - 1;
    let mut q1 = 0.0;
    for p in 0..=gap {
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let binom = (ln_factorial(gap) - ln_factorial(p) - ln_factorial(gap - p)).exp();
        let k = (2 * m + 2 * p) as i32;
        let pow_y = (2 * gap) as i32 - 2 * p as i32 + 1;
        let f = |y: f64| (-lp * y * y).exp() * y.powi(pow_y) * (y.powi(k) - g(y).powi(k)) / k as f64;
        q1 += sign * binom * rule.integrate(f, tau1, tau2)?;
    }
    let scale = (4f64.ln() + t as f64 * lp.ln() - ln_factorial(gap) - ln_factorial(m - 1)).exp();
    ProbEstimate::from_raw(p_t1 + scale * q1, Source::Quadrature)
}

/// `P_{m,i}` for any `1 ≤ m ≤ t`, `1 ≤ i ≤ M_s`.
pub fn push_outage(m: u32, i: usize, sc: &PushScenario, rule: &QuadratureRule) -> Result<ProbEstimate> {
    if i == 0 || i > sc.m_s() {
        return Err(Error::param("i", format!("file index {i} outside 1..={}", sc.m_s())));
    }
    if i == 1 {
        outage_f1_at_cs(m, sc)
    } else if m == sc.t {
        outage_fi_at_target(i, sc)
    } else {
        outage_fi_at_cs_m(m, i, sc, rule)
    }
}

/// Hit probability of a user served by `CS_m`.
pub fn push_hit_probability(
    m: u32,
    sc: &PushScenario,
    mode: AccessMode,
    rule: &QuadratureRule,
) -> Result<ProbEstimate> {
    let files = match mode {
        AccessMode::Noma => sc.m_s(),
        AccessMode::Oma => 1,
    };
    let pop = sc.library.pushed_popularity(files);
    let mut value = 0.0;
    let mut flags = Vec::new();
    let mut source = Source::ClosedForm;
    for i in 1..=files {
        let out = push_outage(m, i, sc, rule)?;
        value += pop[i - 1] * (1.0 - out.value);
        if out.source == Source::Quadrature {
            source = Source::Quadrature;
        }
        flags.extend(out.flags);
    }
    let mut e = ProbEstimate::from_raw(value, source)?;
    e.flags.extend(flags);
    Ok(e)
}

/// Laplace transform of the inter-cluster interference at a typical point:
/// `q(s) = exp(-2πλ s^{2/α} B(2/α, (α-2)/α)/α)`.
pub fn interference_laplace(s: f64, lambda_c: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::param("alpha", "the interference integral needs alpha > 2"));
    }
    if !(s >= 0.0) {
        return Err(Error::param("s", "must be nonnegative"));
    }
    let b = beta_fn(2.0 / alpha, (alpha - 2.0) / alpha)?;
    Ok((-2.0 * PI * lambda_c * s.powf(2.0 / alpha) * b / alpha).exp())
}

/// Quadrature weights `w̄_n = π/(2N)√(1-w_n²)(w_n+1)` and distances
/// `r(w_n+1)/2` for averaging over a uniform point in a disc of radius `r`.
fn disc_nodes(r: f64, rule: &QuadratureRule) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = rule.order() as f64;
    rule.nodes().iter().map(move |&w| {
        let wbar = PI / (2.0 * n) * (1.0 - w * w).sqrt() * (w + 1.0);
        (wbar, 0.5 * r * (w + 1.0))
    })
}

/// `F_r(z) ≈ Σ_n w̄_n (1 - e^{-c_{n,r} z})`: CDF of `|h|²/u^α` for `u` uniform in a disc of radius `r`.
pub fn composite_gain_cdf(z: f64, r: f64, alpha: f64, rule: &QuadratureRule) -> f64 {
    disc_nodes(r, rule).map(|(wbar, u)| wbar * (1.0 - (-u.powf(alpha) * z).exp())).sum()
}

/// `Σ_n w̄_n e^{-c k_noise} q(c k_int)` with `c = u_n^α`: success probability of a user
/// uniform in a disc when success needs `|h|² ≥ u^α k_int (I + k_noise/k_int)`.
fn disc_success(r: f64, k_noise: f64, k_int: f64, geo: &GeometryConfig, rule: &QuadratureRule) -> Result<f64> {
    let mut s = 0.0;
    for (wbar, u) in disc_nodes(r, rule) {
        let c = u.powf(geo.alpha);
        s += wbar * (-c * k_noise).exp() * interference_laplace(c * k_int, geo.lambda_c, geo.alpha)?;
    }
    Ok(s)
}

/// Ring version of [`disc_success`] through the difference of two discs.
fn ring_success(
    r_in: f64,
    r_out: f64,
    k_noise: f64,
    k_int: f64,
    geo: &GeometryConfig,
    rule: &QuadratureRule,
) -> Result<f64> {
    let a_out = r_out * r_out;
    let a_in = r_in * r_in;
    let outer = disc_success(r_out, k_noise, k_int, geo, rule)?;
    let inner = if r_in > 0.0 { disc_success(r_in, k_noise, k_int, geo, rule)? } else { 0.0 };
    Ok((a_out * outer - a_in * inner) / (a_out - a_in))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryUser {
    Near,
    Far,
}

/// Two-user delivery from a content server with fixed allocation
/// `{α_1², α_2²}` (far user's message first).
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryScenario {
    pub alloc: PowerAllocation,
    /// `[R_1, R_2]`: far and near user target rates.
    pub rates: [f64; 2],
    pub geometry: GeometryConfig,
    /// Content-server transmit SNR.
    pub rho: f64,
    /// Rate accounting of the single-user baseline, which shares the slot in two.
    pub oma: OmaConvention,
}

impl DeliveryScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.alloc.len() != 2 {
            return Err(Error::param("alloc", "delivery uses exactly two coefficients"));
        }
        if self.rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::param("rates", "must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        Ok(())
    }

    pub fn eps(&self) -> [f64; 2] {
        [self.rates[0].exp2() - 1.0, self.rates[1].exp2() - 1.0]
    }

    /// `α_1² - ε_1 α_2²`, the far message's SIC margin.
    pub fn far_margin(&self) -> f64 {
        let a = self.alloc.coeffs();
        a[0] - self.eps()[0] * a[1]
    }

    /// `τ̃ = min{(α_1² - ε_1α_2²)/ε_1, α_2²/ε_2}`; not positive when infeasible.
    pub fn tau_tilde(&self) -> f64 {
        let e = self.eps();
        (self.far_margin() / e[0]).min(self.alloc.coeffs()[1] / e[1])
    }

    /// Threshold faced by the single-user baseline.
    pub fn oma_threshold(&self, user: DeliveryUser) -> f64 {
        let rate = match user {
            DeliveryUser::Far => self.rates[0],
            DeliveryUser::Near => self.rates[1],
        };
        self.oma.threshold(rate, 2)
    }

    /// Largest `u^α · threshold` exponent any scheme evaluates; bounds the
    /// interference-window bias in simulation.
    pub fn max_decoding_exponent(&self) -> f64 {
        let g = &self.geometry;
        let mut s = self.oma_threshold(DeliveryUser::Near) * g.rs.powf(g.alpha);
        s = s.max(self.oma_threshold(DeliveryUser::Far) * g.rc.powf(g.alpha));
        let tt = self.tau_tilde();
        if tt > 0.0 {
            s = s.max(g.rs.powf(g.alpha) / tt);
        }
        let fm = self.far_margin();
        if fm > 0.0 {
            s = s.max(g.rc.powf(g.alpha) * self.eps()[0] / fm);
        }
        s
    }
}

fn infeasible_delivery(stage: usize) -> ProbEstimate {
    ProbEstimate::exact(1.0, Source::Quadrature).with_flag(Flag::Infeasible { stage })
}

/// Near user (inside `R_s`) decoding both messages by SIC.
pub fn delivery_outage_near(sc: &DeliveryScenario, rule: &QuadratureRule) -> Result<ProbEstimate> {
    sc.validate()?;
    if sc.far_margin() <= 0.0 {
        return Ok(infeasible_delivery(1));
    }
    let tt = sc.tau_tilde();
    if tt <= 0.0 {
        return Ok(infeasible_delivery(2));
    }
    let s = disc_success(sc.geometry.rs, 1.0 / (sc.rho * tt), 1.0 / tt, &sc.geometry, rule)?;
    ProbEstimate::from_raw(1.0 - s, Source::Quadrature)
}

/// Far user (ring `[R_s, R_c]`) decoding its own message.
pub fn delivery_outage_far(sc: &DeliveryScenario, rule: &QuadratureRule) -> Result<ProbEstimate> {
    sc.validate()?;
    let fm = sc.far_margin();
    if fm <= 0.0 {
        return Ok(infeasible_delivery(1));
    }
    let k = sc.eps()[0] / fm;
    let g = &sc.geometry;
    let s = ring_success(g.rs, g.rc, k / sc.rho, k, g, rule)?;
    ProbEstimate::from_raw(1.0 - s, Source::Quadrature)
}

/// Single-user baseline: the scheduled user receives its message alone.
pub fn delivery_outage_oma(sc: &DeliveryScenario, user: DeliveryUser, rule: &QuadratureRule) -> Result<ProbEstimate> {
    sc.validate()?;
    let e = sc.oma_threshold(user);
    let g = &sc.geometry;
    let s = match user {
        DeliveryUser::Near => disc_success(g.rs, e / sc.rho, e, g, rule)?,
        DeliveryUser::Far => ring_success(g.rs, g.rc, e / sc.rho, e, g, rule)?,
    };
    ProbEstimate::from_raw(1.0 - s, Source::Quadrature)
}
