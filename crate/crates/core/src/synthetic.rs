//! Synthetic corpora with known factorization structure.
//!
//! Loadings are Dirichlet columns, scores are gamma draws whose marginals
//! make each factor's per-document count negative binomial, and cells are
//! Poisson given the rate matrix. Counts are generated factor-by-factor
//! (a document's factor total is Poisson(theta_ki), split across terms by
//! the factor's loading column), which is equivalent to independent cell
//! Poissons and much faster than materializing the dense rate matrix.

use crate::dist::{sample_dirichlet, sample_gamma, sample_multinomial, sample_poisson};
use crate::error::{Error, Result};
use crate::model::{CountMatrix, FactorState};
use crate::rng::RngStream;
use ndarray::Array2;

/// Draw a count matrix from given rates: cell (p, i) is Poisson with rate
/// sum_k phi_pk theta_ki. Loadings need not be normalized.
pub fn counts_from_rates(
    phi: &Array2<f64>,
    theta: &Array2<f64>,
    rng: &mut RngStream,
) -> Result<CountMatrix> {
    let (p_dim, k) = phi.dim();
    let (k2, n) = theta.dim();
    if k != k2 {
        return Err(Error::domain("phi and theta disagree on the factor count"));
    }
    let mut triplets: Vec<(u32, u32, u64)> = Vec::new();
    let mut col = vec![0.0f64; p_dim];
    for kk in 0..k {
        let mass: f64 = phi.column(kk).sum();
        if mass <= 0.0 {
            continue;
        }
        for (pp, v) in phi.column(kk).iter().enumerate() {
            col[pp] = v / mass;
        }
        for i in 0..n {
            let total = sample_poisson(rng, theta[[kk, i]] * mass)?;
            if total == 0 {
                continue;
            }
            let split = sample_multinomial(rng, total, &col)?;
            for (pp, &x) in split.iter().enumerate() {
                if x > 0 {
                    triplets.push((pp as u32, i as u32, x));
                }
            }
        }
    }
    CountMatrix::from_triplets(p_dim, n, triplets)
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticPfa {
    pub n_terms: usize,
    pub n_docs: usize,
    pub k_true: usize,
    /// Symmetric Dirichlet concentration for each loading column.
    pub topic_conc: f64,
    /// Shared factor mark; per-factor counts are NB(r, p) marginally.
    pub r: f64,
    /// Shared factor weight.
    pub p: f64,
}

impl SyntheticPfa {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0 || self.n_docs == 0 || self.k_true == 0 {
            return Err(Error::config("synthetic corpus needs positive dimensions"));
        }
        if !(self.topic_conc > 0.0 && self.topic_conc.is_finite()) {
            return Err(Error::config("topic concentration must be positive"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::config("synthetic r must be positive"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config("synthetic p must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Draw (counts, generating state).
    pub fn generate(&self, rng: &mut RngStream) -> Result<(CountMatrix, FactorState)> {
        self.validate()?;
        let (p_dim, n, k) = (self.n_terms, self.n_docs, self.k_true);
        let alphas = vec![self.topic_conc; p_dim];
        let mut phi = Array2::zeros((p_dim, k));
        let mut phi_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        for kk in 0..k {
            let col = sample_dirichlet(rng, &alphas)?;
            for (pp, &v) in col.iter().enumerate() {
                phi[[pp, kk]] = v;
            }
            phi_cols.push(col);
        }

        let scale = self.p / (1.0 - self.p);
        let mut theta = Array2::zeros((k, n));
        let mut triplets: Vec<(u32, u32, u64)> = Vec::new();
        for i in 0..n {
            for kk in 0..k {
                let th = sample_gamma(rng, self.r, scale)?;
                theta[[kk, i]] = th;
                let factor_total = sample_poisson(rng, th)?;
                if factor_total == 0 {
                    continue;
                }
                let split = sample_multinomial(rng, factor_total, &phi_cols[kk])?;
                for (pp, &x) in split.iter().enumerate() {
                    if x > 0 {
                        triplets.push((pp as u32, i as u32, x));
                    }
                }
            }
        }

        let counts = CountMatrix::from_triplets(p_dim, n, triplets)?;
        let truth = FactorState {
            phi,
            theta,
            p: vec![self.p; k],
            r: vec![self.r; k],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        Ok((counts, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticPfa {
        SyntheticPfa {
            n_terms: 40,
            n_docs: 60,
            k_true: 3,
            topic_conc: 0.2,
            r: 2.0,
            p: 0.5,
        }
    }

    #[test]
    fn dimensions_and_reproducibility() {
        let mut r1 = RngStream::new(11).substream("synthetic");
        let mut r2 = RngStream::new(11).substream("synthetic");
        let (c1, s1) = spec().generate(&mut r1).unwrap();
        let (c2, s2) = spec().generate(&mut r2).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
        assert_eq!(c1.n_terms(), 40);
        assert_eq!(c1.n_docs(), 60);
        assert_eq!(s1.n_factors(), 3);
        assert!(c1.total() > 0);
    }

    #[test]
    fn document_totals_match_nb_mean() {
        // Each factor contributes mean r p / (1 - p) = 2 per document, so a
        // document's expected total is 6; average over 60 docs, loose band.
        let mut r = RngStream::new(7).substream("synthetic-mean");
        let (c, _) = spec().generate(&mut r).unwrap();
        let mean = c.total() as f64 / c.n_docs() as f64;
        assert!((mean - 6.0).abs() < 1.5, "mean doc total {mean}");
    }

    #[test]
    fn invalid_params_rejected() {
        let mut s = spec();
        s.p = 1.0;
        assert!(s.validate().is_err());
        s.p = 0.5;
        s.k_true = 0;
        assert!(s.validate().is_err());
    }
}
