//! Closed forms for push-and-deliver: the directly served user, content-server
//! SIC outage and hit probability, the orthogonal benchmarks, and D2D cache
//! search over the thinned user field.

use std::f64::consts::PI;

use crate::content_model::rate_threshold;
use crate::error::{Error, Result};
use crate::estimate::{Flag, ProbEstimate, Source};
use crate::noma_engine::{sic_quantities, OmaConvention, PowerAllocation, SicQuantities};
use crate::numerics::{lower_incomplete_gamma, poisson_cdf_below, QuadratureRule};
use crate::point_fields::{
    conditional_pdf_user_bs_distance, marginal_pdf_rm, marginal_tail_cut, GeometryConfig, Point,
};

/// Tail mass of the serving-server distance dropped by the outer integral.
pub const OUTER_TAIL_MASS: f64 = 1e-6;

/// BS superposing the directly served file `f_0` with `M_s` pushed files.
#[derive(Debug, Clone, PartialEq)]
pub struct PadScenario {
    /// Coefficients for `f_0, f_1, …, f_{M_s}` in SIC order.
    pub alloc: PowerAllocation,
    /// `R_0, …, R_{M_s}`.
    pub rates: Vec<f64>,
    pub geometry: GeometryConfig,
    pub rho: f64,
    pub oma: OmaConvention,
}

impl PadScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.rates.len() != self.alloc.len() {
            return Err(Error::param("rates", "need one rate per coefficient"));
        }
        if self.rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::param("rates", "must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        Ok(())
    }

    pub fn m_s(&self) -> usize {
        self.alloc.len() - 1
    }

    pub fn eps(&self) -> Vec<f64> {
        self.rates.iter().map(|&r| rate_threshold(r)).collect()
    }

    pub fn sic(&self) -> Result<SicQuantities> {
        sic_quantities(&self.alloc, &self.eps(), None)
    }

    /// Threshold of position `l` when sent alone in one of `M_s + 1` sub-slots.
    pub fn oma_threshold(&self, l: usize) -> f64 {
        self.oma.threshold(self.rates[l], self.m_s() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOrders<'a> {
    pub outer: &'a QuadratureRule,
    pub inner: &'a QuadratureRule,
}

/// `1 - E[e^{-k r^α}]` for the BS-user distance `r` of a user uniform in the
/// cluster of the `m`-th nearest server outside the exclusion disc.
fn direct_outage(sc: &PadScenario, m: u32, k: f64, rules: QuadratureOrders<'_>) -> Result<ProbEstimate> {
    let g = &sc.geometry;
    let excl = g.exclusion_radius();
    let cut = marginal_tail_cut(m, g.lambda_c, excl, OUTER_TAIL_MASS);
    let rc = g.rc;
    let alpha = g.alpha;
    // z ≥ δR_c > R_c, so the conditional pdf is always defined; a NaN here
    // surfaces as a quadrature error naming the node
    let outer = |z: f64| {
        let inner = rules.inner.integrate(
            |r| conditional_pdf_user_bs_distance(r, z, rc).map(|p| (-k * r.powf(alpha)).exp() * p).unwrap_or(f64::NAN),
            z - rc,
            z + rc,
        );
        inner.map_or(f64::NAN, |v| v * marginal_pdf_rm(z, m, g.lambda_c, excl))
    };
    let success = rules.outer.integrate(outer, excl, cut);
    ProbEstimate::from_raw(1.0 - success?, Source::Quadrature)
}

/// Outage of the user served directly by the BS, decoding `f_0` first.
pub fn pad_user_outage(sc: &PadScenario, m: u32, rules: QuadratureOrders<'_>) -> Result<ProbEstimate> {
    sc.validate()?;
    check_m(m)?;
    let q = sc.sic()?;
    let zeta0 = q.margins[0];
    if zeta0 <= 0.0 {
        return Ok(ProbEstimate::exact(1.0, Source::Quadrature).with_flag(Flag::Infeasible { stage: 0 }));
    }
    direct_outage(sc, m, sc.eps()[0] / (sc.rho * zeta0), rules)
}

/// Outage of the same user when `f_0` gets its own sub-slot at full power.
pub fn pad_user_outage_oma(sc: &PadScenario, m: u32, rules: QuadratureOrders<'_>) -> Result<ProbEstimate> {
    sc.validate()?;
    check_m(m)?;
    direct_outage(sc, m, sc.oma_threshold(0) / sc.rho, rules)
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m", "ordering index starts at 1"));
    }
    Ok(())
}

/// `P(fewer than m servers between the exclusion disc and distance d)`.
fn annulus_outage(sc: &PadScenario, m: u32, d: f64, file: usize, source: Source) -> Result<ProbEstimate> {
    let g = &sc.geometry;
    let e = g.exclusion_radius();
    let bracket = g.lambda_c * (PI * d * d - PI * e * e);
    if bracket < 0.0 {
        // decoding radius inside the exclusion disc: no server can decode
        return Ok(ProbEstimate::exact(1.0, source).with_flag(Flag::NegativeBracket { file }));
    }
    ProbEstimate::from_raw(poisson_cdf_below(bracket, m), source)
}

/// Outage of `CS_m` for pushed file `i` (1-based), which requires decoding
/// `f_0, …, f_i` in order.
pub fn pad_cs_outage(i: usize, m: u32, sc: &PadScenario) -> Result<ProbEstimate> {
    sc.validate()?;
    check_m(m)?;
    if i == 0 || i > sc.m_s() {
        return Err(Error::param("i", format!("pushed file index {i} outside 1..={}", sc.m_s())));
    }
    let q = sc.sic()?;
    let ratio = q.min_margin_ratio(i);
    if ratio <= 0.0 {
        let stage = q.infeasible_margins.iter().copied().find(|&l| l <= i).unwrap_or(i);
        return Ok(ProbEstimate::exact(1.0, Source::ClosedForm).with_flag(Flag::Infeasible { stage }));
    }
    // 1/τ̄_i is the largest distance at which the chain still decodes
    let d = (sc.rho * ratio).powf(1.0 / sc.geometry.alpha);
    annulus_outage(sc, m, d, i, Source::ClosedForm)
}

fn weighted_hit(outages: Vec<ProbEstimate>, popularity: &[f64]) -> Result<ProbEstimate> {
    if popularity.len() != outages.len() {
        return Err(Error::param("popularity", "need one weight per pushed file"));
    }
    let mut value = 0.0;
    let mut flags = Vec::new();
    for (o, p) in outages.into_iter().zip(popularity) {
        value += p * (1.0 - o.value);
        flags.extend(o.flags);
    }
    let mut e = ProbEstimate::from_raw(value, Source::ClosedForm)?;
    e.flags = flags;
    Ok(e)
}

/// `Σ_i P(f_i)(1 - P_m^i)`; `popularity[i-1]` weighs the file sent at position `i`.
pub fn pad_hit_probability(m: u32, sc: &PadScenario, popularity: &[f64]) -> Result<ProbEstimate> {
    let outages = (1..=sc.m_s()).map(|i| pad_cs_outage(i, m, sc)).collect::<Result<Vec<_>>>()?;
    weighted_hit(outages, popularity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmaVariant {
    /// Serve the user only; nothing is pushed.
    Naive,
    /// Split the slot into `M_s + 1` sub-slots, one file each at full power.
    TimeSliced,
}

/// Hit probability of the orthogonal benchmarks at `CS_m`.
pub fn pad_oma_benchmark(variant: OmaVariant, sc: &PadScenario, popularity: &[f64], m: u32) -> Result<ProbEstimate> {
    sc.validate()?;
    check_m(m)?;
    match variant {
        OmaVariant::Naive => Ok(ProbEstimate::exact(0.0, Source::ClosedForm)),
        OmaVariant::TimeSliced => {
            let outages = (1..=sc.m_s())
                .map(|i| {
                    let d = (sc.rho / sc.oma_threshold(i)).powf(1.0 / sc.geometry.alpha);
                    annulus_outage(sc, m, d, i, Source::ClosedForm)
                })
                .collect::<Result<Vec<_>>>()?;
            weighted_hit(outages, popularity)
        }
    }
}

/// A user newly served by the BS at `y0` looks for a neighbour within `d`
/// that overheard and cached a pushed file.
#[derive(Debug, Clone, PartialEq)]
pub struct D2dScenario {
    /// Coefficients for `f_0, f_1, …, f_{M_s}`.
    pub alloc: PowerAllocation,
    pub rates: Vec<f64>,
    pub lambda_u: f64,
    pub y0: Point,
    pub d: f64,
    pub rho: f64,
    pub alpha: f64,
    pub oma: OmaConvention,
}

impl D2dScenario {
    pub fn validate(&self) -> Result<()> {
        if self.rates.len() != self.alloc.len() {
            return Err(Error::param("rates", "need one rate per coefficient"));
        }
        if self.rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::param("rates", "must be positive"));
        }
        if !(self.lambda_u > 0.0) {
            return Err(Error::param("lambda_u", "must be positive"));
        }
        if !(self.d > 0.0) {
            return Err(Error::param("d", "search radius must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(self.alpha > 2.0) {
            return Err(Error::param("alpha", "must exceed 2"));
        }
        Ok(())
    }

    pub fn m_s(&self) -> usize {
        self.alloc.len() - 1
    }

    pub fn r0(&self) -> f64 {
        self.y0.norm()
    }

    pub fn sic(&self) -> Result<SicQuantities> {
        let eps: Vec<f64> = self.rates.iter().map(|&r| rate_threshold(r)).collect();
        sic_quantities(&self.alloc, &eps, None)
    }

    /// Decay `k` of the decode probability `e^{-k r^α}` for file `i`:
    /// `τ̄_i^α` under NOMA, `ε'_i/ρ` for the time-sliced baseline; infinite if
    /// the SIC chain is infeasible.
    pub fn decay(&self, i: usize, oma: bool) -> Result<f64> {
        if i == 0 || i > self.m_s() {
            return Err(Error::param("i", format!("pushed file index {i} outside 1..={}", self.m_s())));
        }
        if oma {
            return Ok(self.oma.threshold(self.rates[i], self.m_s() + 1) / self.rho);
        }
        let ratio = self.sic()?.min_margin_ratio(i);
        Ok(if ratio > 0.0 { 1.0 / (self.rho * ratio) } else { f64::INFINITY })
    }
}

/// `P^i(r) = e^{-τ̄_i^α r^α}`, the chance that a user at distance `r` from the BS decodes `f_i`.
pub fn d2d_decode_probability(r: f64, i: usize, sc: &D2dScenario) -> Result<f64> {
    sc.validate()?;
    let k = sc.decay(i, false)?;
    if k.is_infinite() {
        return Ok(0.0);
    }
    Ok((-k * r.powf(sc.alpha)).exp())
}

/// Intensity measure of the field thinned by `e^{-k r^α}` over the disc of
/// radius `d` centred `r0` from the BS.
pub fn intensity_measure(k: f64, alpha: f64, lambda_u: f64, r0: f64, d: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(d >= 0.0) || !(r0 >= 0.0) {
        return Err(Error::param("d", "distances must be nonnegative"));
    }
    if d == 0.0 || k.is_infinite() {
        return Ok(0.0);
    }
    let radial = |outer: f64| -> Result<f64> {
        if k == 0.0 {
            return Ok(PI * lambda_u * outer * outer);
        }
        Ok(2.0 * PI * lambda_u / (alpha * k.powf(2.0 / alpha))
            * lower_incomplete_gamma(2.0 / alpha, k * outer.powf(alpha))?)
    };
    if r0 == 0.0 {
        return radial(d);
    }
    let kernel = |r: f64| {
        let arg = ((r * r + r0 * r0 - d * d) / (2.0 * r0 * r)).clamp(-1.0, 1.0);
        (-k * r.powf(alpha)).exp() * r * arg.acos()
    };
    if d <= r0 {
        Ok(2.0 * lambda_u * rule.integrate(kernel, r0 - d, r0 + d)?)
    } else {
        Ok(radial(d - r0)? + 2.0 * lambda_u * rule.integrate(kernel, d - r0, d + r0)?)
    }
}

pub fn d2d_intensity_measure(i: usize, sc: &D2dScenario, oma: bool, rule: &QuadratureRule) -> Result<f64> {
    sc.validate()?;
    intensity_measure(sc.decay(i, oma)?, sc.alpha, sc.lambda_u, sc.r0(), sc.d, rule)
}

/// `1 - e^{-Λ_i}`: some neighbour within `d` holds `f_i`.
pub fn d2d_hit_probability(i: usize, sc: &D2dScenario, oma: bool, rule: &QuadratureRule) -> Result<ProbEstimate> {
    let lam = d2d_intensity_measure(i, sc, oma, rule)?;
    ProbEstimate::from_raw(1.0 - (-lam).exp(), Source::Quadrature)
}

pub fn d2d_miss_probability(i: usize, sc: &D2dScenario, oma: bool, rule: &QuadratureRule) -> Result<ProbEstimate> {
    Ok(d2d_hit_probability(i, sc, oma, rule)?.complement())
}
