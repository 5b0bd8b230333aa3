//! Probability values tagged with how they were obtained.

use std::fmt;

use crate::error::Result;
use crate::numerics::clamp_probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ClosedForm => "closed_form",
            Source::Quadrature => "quadrature",
            Source::MonteCarlo => "monte_carlo",
        }
    }
}

/// Degeneracy and feasibility notes attached to an estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    /// A SIC margin (ξ, ζ or ξ̄) at this stage is not positive; outage is certain.
    Infeasible { stage: usize },
    /// The raw quadrature value left the silent clamping margin.
    Clamped { raw: f64 },
    /// The decoding radius lies inside the exclusion disc; no server can decode.
    NegativeBracket { file: usize },
    /// The closed form rests on an assumption the scenario does not satisfy.
    AssumptionViolated(String),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Infeasible { stage } => write!(f, "infeasible_stage_{stage}"),
            Flag::Clamped { raw } => write!(f, "clamped_{raw:.3e}"),
            Flag::NegativeBracket { file } => write!(f, "negative_bracket_f{file}"),
            Flag::AssumptionViolated(what) => write!(f, "assumption_{what}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbEstimate {
    pub value: f64,
    pub source: Source,
    pub trials: Option<u64>,
    pub ci_halfwidth: Option<f64>,
    pub flags: Vec<Flag>,
}

impl ProbEstimate {
    pub fn exact(value: f64, source: Source) -> Self {
        ProbEstimate { value, source, trials: None, ci_halfwidth: None, flags: Vec::new() }
    }

    /// Applies the clamping policy to a raw analytical value.
    pub fn from_raw(raw: f64, source: Source) -> Result<Self> {
        let c = clamp_probability(raw)?;
        let mut e = Self::exact(c.value, source);
        if let Some(raw) = c.excursion {
            e.flags.push(Flag::Clamped { raw });
        }
        Ok(e)
    }

    /// Monte Carlo estimate from an integer success count.
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let value = successes as f64 / trials as f64;
        Self::monte_carlo(value, trials)
    }

    /// Monte Carlo estimate of a mean of `[0, 1]`-valued draws; the normal
    /// approximation half-width `1.96√(v(1-v)/n)` bounds its spread.
    pub fn monte_carlo(value: f64, trials: u64) -> Self {
        ProbEstimate {
            value,
            source: Source::MonteCarlo,
            trials: Some(trials),
            ci_halfwidth: Some(ci_halfwidth(value, trials)),
            flags: Vec::new(),
        }
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flags.push(flag);
        self
    }

    pub fn complement(&self) -> Self {
        let mut e = self.clone();
        e.value = 1.0 - self.value;
        e
    }

    pub fn is_flagged_infeasible(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::Infeasible { .. } | Flag::AssumptionViolated(_)))
    }

    pub fn flags_string(&self) -> String {
        self.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(";")
    }
}

pub fn ci_halfwidth(value: f64, trials: u64) -> f64 {
    1.96 * (value * (1.0 - value) / trials as f64).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_give_binomial_ci() {
        let e = ProbEstimate::from_counts(250, 1000);
        assert_eq!(e.value, 0.25);
        let hw = e.ci_halfwidth.unwrap();
        assert!((hw - 1.96 * (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.trials, Some(1000));
    }

    #[test]
    fn raw_values_flag_large_excursions() {
        assert!(ProbEstimate::from_raw(0.5, Source::Quadrature).unwrap().flags.is_empty());
        let e = ProbEstimate::from_raw(1.002, Source::Quadrature).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.flags.len(), 1);
        assert!(ProbEstimate::from_raw(-0.5, Source::Quadrature).is_err());
    }
}
