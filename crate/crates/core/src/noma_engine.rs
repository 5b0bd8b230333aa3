//! Power allocation policies, SIC margin quantities and per-link decoding
//! predicates shared by the analysis and simulation code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default thermal noise power.
pub const DEFAULT_NOISE_DBM: f64 = -100.0;

const SUM_TOL: f64 = 1e-12;

/// Linear transmit SNR `ρ = 10^{(P - σ²)/10}` from dBm values.
pub fn snr_linear(power_dbm: f64, noise_dbm: f64) -> f64 {
    10f64.powf((power_dbm - noise_dbm) / 10.0)
}

/// Rate accounting for orthogonal baselines that split one slot between
/// several messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmaConvention {
    /// Each message keeps its own threshold `2^R - 1` in its sub-slot.
    SameThreshold,
    /// Each message must carry the same information in `1/slots` of the time:
    /// threshold `2^{slots·R} - 1`.
    #[default]
    TimeSliced,
}

impl OmaConvention {
    pub fn threshold(self, rate: f64, slots: usize) -> f64 {
        match self {
            OmaConvention::SameThreshold => rate.exp2() - 1.0,
            OmaConvention::TimeSliced => (slots as f64 * rate).exp2() - 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OmaConvention::SameThreshold => "same_threshold",
            OmaConvention::TimeSliced => "time_sliced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationMode {
    CrInspired,
    Fixed,
}

/// Squared power coefficients `α_i²` in SIC decoding order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    coeffs: Vec<f64>,
    mode: AllocationMode,
}

impl PowerAllocation {
    pub fn new(coeffs: Vec<f64>, mode: AllocationMode) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::param("alloc", "needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::param("alloc", "coefficients must be nonnegative"));
        }
        let total: f64 = coeffs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::param("alloc", format!("coefficients sum to {total}, not 1")));
        }
        Ok(PowerAllocation { coeffs, mode })
    }

    pub fn fixed(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, AllocationMode::Fixed)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mode(&self) -> AllocationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// `α_1² = min{1, ε_1(ρz_t + 1)/(ρ(1+ε_1)z_t)}`.
pub fn cr_alpha1(rho: f64, z_t: f64, eps1: f64) -> f64 {
    (eps1 * (rho * z_t + 1.0) / (rho * (1.0 + eps1) * z_t)).min(1.0)
}

/// `P_r = max{0, (ρz_t - ε_1)/(ρ(1+ε_1)z_t)}`.
pub fn cr_residual_power(rho: f64, z_t: f64, eps1: f64) -> f64 {
    ((rho * z_t - eps1) / (rho * (1.0 + eps1) * z_t)).max(0.0)
}

/// Allocation `{α_1², β_2 P_r, …, β_{M_s} P_r}` for the QoS target gain `z_t`.
pub fn derive_cr_allocation(betas: &[f64], rho: f64, z_t: f64, eps1: f64) -> Result<PowerAllocation> {
    check_betas(betas)?;
    let a1 = cr_alpha1(rho, z_t, eps1);
    let pr = cr_residual_power(rho, z_t, eps1);
    let mut coeffs = Vec::with_capacity(betas.len() + 1);
    coeffs.push(a1);
    coeffs.extend(betas.iter().map(|b| b * pr));
    // the two parts are complementary up to rounding
    let total: f64 = coeffs.iter().sum();
    for c in &mut coeffs {
        *c /= total;
    }
    PowerAllocation::new(coeffs, AllocationMode::CrInspired)
}

pub(crate) fn check_betas(betas: &[f64]) -> Result<()> {
    if betas.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::param("betas", "must be nonnegative"));
    }
    if !betas.is_empty() && (betas.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
        return Err(Error::param("betas", "must sum to 1"));
    }
    Ok(())
}

/// SIC margins of an allocation.
///
/// `margins[l] = α_l² - ε_l Σ_{j>l} α_j²` is ξ for a pushing allocation and ζ
/// when the allocation starts with the directly served file `f_0`. The
/// residual split gives `xibar[k] = β_k - ε_k Σ_{j>k} β_j` and its running
/// minimum ratio `phi`, both indexed from the second pushed file.
#[derive(Debug, Clone, PartialEq)]
pub struct SicQuantities {
    pub margins: Vec<f64>,
    pub xibar: Vec<f64>,
    pub phi: Vec<f64>,
    eps: Vec<f64>,
    /// Coefficient positions whose margin is not positive.
    pub infeasible_margins: Vec<usize>,
    /// Beta positions whose ξ̄ is not positive.
    pub infeasible_xibar: Vec<usize>,
}

fn tail_margins(weights: &[f64], eps: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    let mut tail = 0.0;
    for l in (0..weights.len()).rev() {
        out[l] = weights[l] - eps[l] * tail;
        tail += weights[l];
    }
    out
}

/// `ξ̄_k = β_k - ε_k Σ_{j>k} β_j` and `φ_k = min_{j≤k} ξ̄_j/ε_j` for a residual
/// power split and the thresholds of the same files.
pub fn residual_split(betas: &[f64], eps: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_betas(betas)?;
    if betas.len() != eps.len() {
        return Err(Error::param("betas", "need one threshold per beta"));
    }
    let xibar = tail_margins(betas, eps);
    let mut phi = Vec::with_capacity(betas.len());
    let mut running = f64::INFINITY;
    for k in 0..betas.len() {
        running = running.min(xibar[k] / eps[k]);
        phi.push(running);
    }
    Ok((xibar, phi))
}

/// `eps` is aligned with the allocation; `betas` (if any) with positions 1.. of it.
pub fn sic_quantities(alloc: &PowerAllocation, eps: &[f64], betas: Option<&[f64]>) -> Result<SicQuantities> {
    if eps.len() != alloc.len() {
        return Err(Error::param("eps", format!("{} thresholds for {} coefficients", eps.len(), alloc.len())));
    }
    let margins = tail_margins(alloc.coeffs(), eps);
    let infeasible_margins = (0..margins.len()).filter(|&l| margins[l] <= 0.0).collect();
    let (xibar, phi, infeasible_xibar) = match betas {
        Some(b) => {
            if b.len() + 1 != alloc.len() {
                return Err(Error::param("betas", "need one beta per file after the first"));
            }
            let (xibar, phi) = residual_split(b, &eps[1..])?;
            let bad = (0..xibar.len()).filter(|&k| xibar[k] <= 0.0).collect();
            (xibar, phi, bad)
        }
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    Ok(SicQuantities { margins, xibar, phi, eps: eps.to_vec(), infeasible_margins, infeasible_xibar })
}

impl SicQuantities {
    /// `φ_i` for pushed file `i ≥ 2` (1-based file index).
    pub fn phi_of_file(&self, i: usize) -> Option<f64> {
        i.checked_sub(2).and_then(|k| self.phi.get(k).copied())
    }

    /// Whether every margin up to and including position `l` is positive.
    pub fn feasible_through(&self, l: usize) -> bool {
        self.margins[..=l].iter().all(|&m| m > 0.0)
    }

    /// `min_{l ≤ i} ζ_l/ε_l`; zero when a margin up to `i` is not positive.
    pub fn min_margin_ratio(&self, i: usize) -> f64 {
        let mut best = f64::INFINITY;
        for l in 0..=i {
            if self.margins[l] <= 0.0 {
                return 0.0;
            }
            best = best.min(self.margins[l] / self.eps[l]);
        }
        best
    }

    /// `τ̄_i = (min_{l≤i} ρζ_l/ε_l)^{-1/α}` for each position; infinite when infeasible.
    pub fn taubar(&self, rho: f64, alpha: f64) -> Vec<f64> {
        (0..self.margins.len())
            .map(|i| {
                let m = self.min_margin_ratio(i);
                if m > 0.0 {
                    (rho * m).powf(-1.0 / alpha)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// SINR of stage `decode_index` when every earlier stage has been cancelled:
/// `α_i² g / (g Σ_{j>i} α_j² + I + 1/ρ)`.
pub fn sinr_noma_downlink(own_gain: f64, decode_index: usize, coeffs: &[f64], interference: f64, inv_rho: f64) -> f64 {
    let tail: f64 = coeffs[decode_index + 1..].iter().sum();
    let signal = coeffs[decode_index] * own_gain;
    let denom = own_gain * tail + interference + inv_rho;
    if denom == 0.0 {
        return if signal > 0.0 { f64::INFINITY } else { 0.0 };
    }
    signal / denom
}

/// Relative slack on the decoding test so that a link tuned to sit exactly on
/// its threshold (the CR allocation at `z_t`) is not lost to rounding.
pub const DECODE_REL_TOL: f64 = 1e-12;

/// `SINR ≥ ε`, success at equality up to [`DECODE_REL_TOL`].
pub fn decodes(sinr: f64, eps: f64) -> bool {
    sinr >= eps * (1.0 - DECODE_REL_TOL)
}

/// Number of SIC stages decoded in order before the first failure.
pub fn sic_success_depth(gain: f64, coeffs: &[f64], eps: &[f64], interference: f64, inv_rho: f64) -> usize {
    (0..coeffs.len())
        .take_while(|&l| decodes(sinr_noma_downlink(gain, l, coeffs, interference, inv_rho), eps[l]))
        .count()
}

/// True iff every stage `0..=through_index` decodes (`SINR ≥ ε`).
pub fn sic_decode_success(
    gain: f64,
    coeffs: &[f64],
    eps: &[f64],
    through_index: usize,
    interference: f64,
    inv_rho: f64,
) -> bool {
    (0..=through_index).all(|l| decodes(sinr_noma_downlink(gain, l, coeffs, interference, inv_rho), eps[l]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cr_examples() {
        assert_eq!(cr_alpha1(10.0, 0.05, 1.0), 1.0);
        assert!((cr_alpha1(10.0, 1.0, 1.0) - 0.55).abs() < 1e-15);
        assert!((cr_alpha1(1e15, 1.0, 3.0) - 0.75).abs() < 1e-12);
        assert_eq!(cr_residual_power(2.0, 0.5, 1.0), 0.0);
        assert!((cr_residual_power(10.0, 1.0, 1.0) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn cr_allocation_shapes() {
        let a = derive_cr_allocation(&[0.75, 0.25], 10.0, 1.0, 1.0).unwrap();
        assert!((a.coeffs()[0] - 0.55).abs() < 1e-12);
        assert!((a.coeffs()[1] - 0.3375).abs() < 1e-12);
        let d = derive_cr_allocation(&[0.75, 0.25], 1.0, 0.5, 1.0).unwrap();
        assert_eq!(d.coeffs(), &[1.0, 0.0, 0.0]);
        assert!(derive_cr_allocation(&[0.5, 0.25], 10.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn margins_examples() {
        let a = PowerAllocation::fixed(vec![0.75, 0.25]).unwrap();
        let q = sic_quantities(&a, &[1.0, 63.0], None).unwrap();
        assert_eq!(q.margins[0], 0.5);
        assert_eq!(q.margins[1], 0.25);
        let single = PowerAllocation::fixed(vec![1.0]).unwrap();
        assert_eq!(sic_quantities(&single, &[3.0], None).unwrap().margins, vec![1.0]);
        let pad = PowerAllocation::fixed(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let eps: Vec<f64> = [0.125, 0.75, 0.875, 2.75].iter().map(|r: &f64| r.exp2() - 1.0).collect();
        let q = sic_quantities(&pad, &eps, None).unwrap();
        assert!(q.margins.iter().all(|&z| z > 0.0));
        assert!(q.infeasible_margins.is_empty());
    }

    #[test]
    fn xibar_and_phi() {
        let a = PowerAllocation::fixed(vec![0.5, 0.375, 0.125]).unwrap();
        let q = sic_quantities(&a, &[1.0, 1.0, 1.0], Some(&[0.75, 0.25])).unwrap();
        assert_eq!(q.xibar, vec![0.5, 0.25]);
        assert_eq!(q.phi, vec![0.5, 0.25]);
        assert_eq!(q.phi_of_file(3), Some(0.25));
        assert_eq!(q.phi_of_file(1), None);
        let q = sic_quantities(&a, &[1.0, 4.0, 1.0], Some(&[0.75, 0.25])).unwrap();
        assert_eq!(q.infeasible_xibar, vec![0]);
    }

    #[test]
    fn taubar_is_nondecreasing() {
        let pad = PowerAllocation::fixed(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let eps: Vec<f64> = [0.125, 0.75, 0.875, 2.75].iter().map(|r: &f64| r.exp2() - 1.0).collect();
        let t = sic_quantities(&pad, &eps, None).unwrap().taubar(1e11, 3.0);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sinr_examples() {
        let c = [0.75, 0.25];
        assert!((sinr_noma_downlink(1.0, 0, &c, 0.0, 0.25) - 1.5).abs() < 1e-15);
        assert!((sinr_noma_downlink(2.0, 1, &c, 0.0, 0.1) - 0.25 * 2.0 / 0.1).abs() < 1e-12);
        let oma = sinr_noma_downlink(3.0, 0, &[1.0, 0.0], 0.0, 0.5);
        assert!((oma - 6.0).abs() < 1e-15);
    }

    #[test]
    fn decode_boundary_and_chain() {
        let c = [0.75, 0.25];
        // stage-one SINR exactly 1.5
        assert!(sic_decode_success(1.0, &c, &[1.5, 100.0], 0, 0.0, 0.25));
        assert!(!sic_decode_success(0.0, &c, &[1.0, 1.0], 0, 0.0, 0.25));
        assert!(!sic_decode_success(1.0, &c, &[1.5, 100.0], 1, 0.0, 0.25));
        assert_eq!(sic_success_depth(1.0, &c, &[1.5, 100.0], 0.0, 0.25), 1);
        assert_eq!(sic_success_depth(1.0, &c, &[1.0, 0.5], 0.0, 0.25), 2);
    }

    #[test]
    fn dbm_conversion() {
        assert!((snr_linear(40.0, -100.0) - 1e14).abs() < 1.0);
    }
}
