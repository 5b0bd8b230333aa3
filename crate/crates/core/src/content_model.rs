//! File library, Zipf popularity and cache-hit aggregation.

use crate::error::{Error, Result};

pub fn zipf_popularity(files: usize, gamma: f64) -> Result<Vec<f64>> {
    if files == 0 {
        return Err(Error::param("files", "library must hold at least one file"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "Zipf shape must be nonnegative"));
    }
    let raw: Vec<f64> = (1..=files).map(|l| (l as f64).powf(-gamma)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// `ε = 2^R - 1`, the SINR threshold for target rate `R` (bits per channel use).
pub fn rate_threshold(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileLibrary {
    gamma: f64,
    popularity: Vec<f64>,
    rates: Vec<f64>,
    eps: Vec<f64>,
}

impl FileLibrary {
    /// `rates` lists the target rates of the files that are transmitted; it may be
    /// shorter than the library.
    pub fn new(files: usize, gamma: f64, rates: Vec<f64>) -> Result<Self> {
        let popularity = zipf_popularity(files, gamma)?;
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::param("rates", "target rates must be positive"));
        }
        let eps = rates.iter().map(|&r| rate_threshold(r)).collect();
        Ok(FileLibrary { gamma, popularity, rates, eps })
    }

    /// Library where every transmitted file shares one target rate.
    pub fn equal_rate(files: usize, gamma: f64, rate: f64, count: usize) -> Result<Self> {
        Self::new(files, gamma, vec![rate; count])
    }

    pub fn files(&self) -> usize {
        self.popularity.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// Popularity of the `m_s` most popular files, zero-padded past the library.
    pub fn pushed_popularity(&self, m_s: usize) -> Vec<f64> {
        (0..m_s).map(|i| self.popularity.get(i).copied().unwrap_or(0.0)).collect()
    }
}

/// `Σ_i P(f_i)(1 - P_{m,i})` over the pushed files.
pub fn hit_probability(popularity: &[f64], decode_failure: &[f64]) -> Result<f64> {
    if popularity.len() != decode_failure.len() {
        return Err(Error::param(
            "decode_failure",
            format!("{} failures for {} files", decode_failure.len(), popularity.len()),
        ));
    }
    if decode_failure.iter().chain(popularity).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::param("decode_failure", "entries must be probabilities"));
    }
    Ok(popularity.iter().zip(decode_failure).map(|(p, f)| p * (1.0 - f)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_examples() {
        assert_eq!(zipf_popularity(4, 0.0).unwrap(), vec![0.25; 4]);
        let p = zipf_popularity(2, 1.0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = zipf_popularity(10, 0.5).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[0] >= w[1]));
        assert!(zipf_popularity(0, 1.0).is_err());
    }

    #[test]
    fn hit_examples() {
        let pop = vec![1.0 / 3.0; 3];
        assert_eq!(hit_probability(&pop, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((hit_probability(&pop, &[0.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!((hit_probability(&pop, &[0.0, 0.5, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(hit_probability(&pop, &[0.0; 2]).is_err());
    }

    #[test]
    fn library_thresholds() {
        let lib = FileLibrary::new(10, 0.5, vec![1.0, 6.0, 0.5]).unwrap();
        assert_eq!(lib.eps()[0], 1.0);
        assert_eq!(lib.eps()[1], 63.0);
        assert!((lib.eps()[2] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(lib.pushed_popularity(12).len(), 12);
        assert_eq!(lib.pushed_popularity(12)[11], 0.0);
    }
}
