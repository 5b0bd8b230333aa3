//! Chebyshev-Gauss quadrature, gamma-family special functions and the
//! probability clamping policy shared by every analysis module.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default number of abscissae for every quadrature in the crate.
pub const DEFAULT_ORDER: usize = 20;

/// Raw probabilities inside this margin around `[0, 1]` are clamped silently.
pub const CLAMP_SILENT: f64 = 1e-6;
/// Raw probabilities beyond the silent margin but inside this one are clamped
/// with a warning; anything further out is an error.
pub const CLAMP_LIMIT: f64 = 1e-2;

/// Chebyshev-Gauss rule of the first kind on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes `w_l = cos((2l-1)π/(2N))`, strictly decreasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `π/N` of the rule against the weight function `1/√(1-w²)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` by mapping the nodes onto the interval and
    /// multiplying by `√(1-w²)` to cancel the Chebyshev weight.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        integrate_cg(f, a, b, self)
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        chebyshev_nodes(DEFAULT_ORDER).expect("default order is positive")
    }
}

pub fn chebyshev_nodes(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::param("N", "quadrature order must be at least 1"));
    }
    let nodes = (1..=n).map(|l| ((2 * l - 1) as f64 * PI / (2 * n) as f64).cos()).collect();
    let weights = vec![PI / n as f64; n];
    Ok(QuadratureRule { nodes, weights })
}

pub fn integrate_cg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut sum = 0.0;
    for (&w, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let x = half * w + mid;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { node: x });
        }
        sum += wt * fx * (1.0 - w * w).sqrt();
    }
    Ok(half * sum)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `|Γ(x)|` (Lanczos approximation with reflection).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn gamma_fn(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    ln_gamma(x).exp()
}

pub fn ln_factorial(k: u32) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

pub fn beta_fn(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0) || !(q > 0.0) {
        return Err(Error::param("beta", format!("arguments must be positive, got ({p}, {q})")));
    }
    Ok((ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp())
}

/// Lower incomplete gamma function `γ(s, x) = ∫₀ˣ t^{s-1} e^{-t} dt`.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !(x >= 0.0) {
        return Err(Error::param("incomplete gamma", format!("domain is s > 0, x >= 0; got ({s}, {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lg = ln_gamma(s);
    if x < s + 1.0 {
        Ok((gamma_series(s, x, lg) + lg).exp())
    } else {
        let upper = gamma_cont_frac(s, x, lg);
        Ok(lg.exp() * (1.0 - upper))
    }
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !(x >= 0.0) {
        return Err(Error::param("incomplete gamma", format!("domain is s > 0, x >= 0; got ({s}, {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lg = ln_gamma(s);
    if x < s + 1.0 {
        Ok(gamma_series(s, x, lg).exp())
    } else {
        Ok(1.0 - gamma_cont_frac(s, x, lg))
    }
}

// log of the regularized lower series P(s, x)
fn gamma_series(s: f64, x: f64, lg: f64) -> f64 {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum.ln() - x + s * x.ln() - lg
}

// regularized upper Q(s, x) by the modified Lentz continued fraction
fn gamma_cont_frac(s: f64, x: f64, lg: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + s * x.ln() - lg).exp() * h
}

/// `P(N < n)` for `N ~ Poisson(mean)`, i.e. `e^{-μ} Σ_{k<n} μ^k/k!`.
pub fn poisson_cdf_below(mean: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if mean <= 0.0 {
        return 1.0;
    }
    // P(N < n) = Q(n, μ), the regularized upper gamma
    let q = 1.0 - regularized_lower_gamma(n as f64, mean).unwrap_or(1.0);
    q.clamp(0.0, 1.0)
}

/// Outcome of applying the clamping policy to a raw probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    /// Raw value when it left the silent margin.
    pub excursion: Option<f64>,
}

pub fn clamp_probability(raw: f64) -> Result<Clamped> {
    if !raw.is_finite() {
        return Err(Error::ProbabilityOutOfRange { raw });
    }
    let value = raw.clamp(0.0, 1.0);
    let dist = (raw - value).abs();
    if dist <= CLAMP_SILENT {
        return Ok(Clamped { value, excursion: None });
    }
    if dist <= CLAMP_LIMIT {
        log::warn!("probability {raw:.3e} clamped to {value}");
        return Ok(Clamped { value, excursion: Some(raw) });
    }
    Err(Error::ProbabilityOutOfRange { raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn nodes_small_orders() {
        let r1 = chebyshev_nodes(1).unwrap();
        assert!(r1.nodes()[0].abs() < 1e-15);
        let r2 = chebyshev_nodes(2).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert!((r2.nodes()[0] - h).abs() < 1e-15);
        assert!((r2.nodes()[1] + h).abs() < 1e-15);
        assert!(chebyshev_nodes(0).is_err());
    }

    #[test]
    fn nodes_decreasing_and_symmetric() {
        let r = chebyshev_nodes(20).unwrap();
        assert_eq!(r.nodes().len(), r.weights().len());
        for w in r.nodes().windows(2) {
            assert!(w[0] > w[1]);
        }
        for l in 0..20 {
            assert!((r.nodes()[l] + r.nodes()[19 - l]).abs() < 1e-14);
        }
    }

    #[test]
    fn integrate_constant_and_odd() {
        let r = QuadratureRule::default();
        let v = integrate_cg(|_| 1.0, -1.0, 1.0, &r).unwrap();
        assert!((v - 2.0).abs() < 1e-2);
        assert_eq!(integrate_cg(|x| x, 3.0, 3.0, &r).unwrap(), 0.0);
        for n in [1, 2, 7, 20, 33] {
            let r = chebyshev_nodes(n).unwrap();
            assert!(integrate_cg(|x| x, -1.0, 1.0, &r).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_rejects_bad_input() {
        let r = QuadratureRule::default();
        assert!(matches!(integrate_cg(|x| x, 1.0, 0.0, &r), Err(Error::InvalidInterval { .. })));
        match integrate_cg(|x| if x.abs() < 1e-9 { f64::NAN } else { x }, -1.0, 1.0, &chebyshev_nodes(1).unwrap()) {
            Err(Error::NonFinite { node }) => assert!(node.abs() < 1e-9),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn beta_reference_values() {
        assert!((beta_fn(1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_fn(0.5, 0.5).unwrap() / PI - 1.0).abs() < 1e-10);
        let b = beta_fn(2.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!((b / (2.0 * PI / 3f64.sqrt()) - 1.0).abs() < 1e-10);
        // Γ(1/3) to 20 digits
        let g13 = 2.678_938_534_707_747_6;
        assert!((gamma_fn(1.0 / 3.0) / g13 - 1.0).abs() < 1e-12);
        assert!(beta_fn(0.0, 1.0).is_err());
        assert!(beta_fn(1.0, -2.0).is_err());
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        for x in [0.1, 1.0, 3.0, 12.0] {
            let v = lower_incomplete_gamma(1.0, x).unwrap();
            assert!((v - (1.0 - (-x).exp())).abs() < 1e-14);
        }
        assert_eq!(lower_incomplete_gamma(0.7, 0.0).unwrap(), 0.0);
        // substitute t = u^3 to remove the endpoint singularity of t^{-1/3}
        let s = 2.0 / 3.0;
        let oracle = simpson(|u: f64| 3.0 * u * (-u.powi(3)).exp(), 0.0, 1.0, 20_000);
        let v = lower_incomplete_gamma(s, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-8 * oracle, "{v} vs {oracle}");
        assert!(lower_incomplete_gamma(0.0, 1.0).is_err());
        assert!(lower_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_limits() {
        for s in [0.3, 2.0 / 3.0, 1.5, 4.0, 9.0] {
            let full = lower_incomplete_gamma(s, 50.0 * s).unwrap();
            assert!((full / gamma_fn(s) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn poisson_tail_matches_sum() {
        for &(mu, n) in &[(0.3, 1u32), (2.5, 3), (7.0, 5), (40.0, 12)] {
            let direct: f64 = (0..n).map(|k| (-mu + k as f64 * f64::ln(mu) - ln_factorial(k)).exp()).sum();
            assert!((poisson_cdf_below(mu, n) - direct).abs() < 1e-12);
        }
        assert_eq!(poisson_cdf_below(0.0, 3), 1.0);
        assert_eq!(poisson_cdf_below(5.0, 0), 0.0);
    }

    #[test]
    fn clamping_policy() {
        assert_eq!(clamp_probability(0.4).unwrap().value, 0.4);
        let c = clamp_probability(1.0 + 5e-7).unwrap();
        assert_eq!((c.value, c.excursion), (1.0, None));
        let c = clamp_probability(-1e-3).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.excursion, Some(-1e-3));
        assert!(clamp_probability(1.2).is_err());
        assert!(clamp_probability(f64::NAN).is_err());
    }
}
