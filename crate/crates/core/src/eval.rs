//! Held-out evaluation: word-level train/test splits, posterior-averaged
//! perplexity, and per-factor summaries.
//!
//! The split is at the word level: each document's tokens are partitioned
//! uniformly at random, with the training share fixed to round(ratio *
//! total) per document. Walking the document's cells with sequential
//! hypergeometric draws realizes that partition exactly without ever
//! expanding tokens.
//!
//! Perplexity uses the per-document predictive distribution
//!
//!   prob(p, i) = sum_s (phi theta)_pi / sum_s sum_p' (phi theta)_p'i ,
//!
//! i.e. sample sums in both numerator and denominator (the sample count
//! cancels; no 1/S factor), normalized within each document. The reported
//! number is exp of the negative average test log probability, so a
//! structure-free model over P terms scores exactly P.

use crate::error::{Error, Result};
use crate::model::{CountMatrix, FactorState};
use crate::rng::RngStream;
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: CountMatrix,
    pub test: CountMatrix,
    pub ratio: f64,
    pub replicate: u64,
}

/// Partition each document's tokens into train/test with the training
/// count fixed to round(ratio * doc total).
pub fn split_counts(
    counts: &CountMatrix,
    ratio: f64,
    replicate: u64,
    rng: &mut RngStream,
) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut train: Vec<(u32, u32, u64)> = Vec::with_capacity(counts.entries().len());
    let mut test: Vec<(u32, u32, u64)> = Vec::with_capacity(counts.entries().len());
    for doc in 0..counts.n_docs() {
        let entries = counts.doc_entries(doc);
        let total = counts.doc_totals()[doc];
        if total == 0 {
            continue;
        }
        let mut want = (ratio * total as f64).round() as u64;
        let mut remaining = total;
        for e in entries {
            // Tokens of this cell drawn into the training share, given how
            // many draws and tokens remain: hypergeometric.
            let take = if want == 0 {
                0
            } else if want == remaining {
                e.count
            } else {
                crate::dist::sample_hypergeometric(rng, remaining, e.count, want)?
            };
            if take > 0 {
                train.push((e.term, e.doc, take));
            }
            if take < e.count {
                test.push((e.term, e.doc, e.count - take));
            }
            want -= take;
            remaining -= e.count;
        }
        debug_assert_eq!(want, 0);
    }
    Ok(SplitPair {
        train: CountMatrix::from_triplets(counts.n_terms(), counts.n_docs(), train)?,
        test: CountMatrix::from_triplets(counts.n_terms(), counts.n_docs(), test)?,
        ratio,
        replicate,
    })
}

/// Streaming accumulator for the perplexity sums, so chains never need to
/// retain their samples.
#[derive(Debug, Clone)]
pub struct PerplexityAccum {
    n_samples: usize,
    /// Per test entry: summed model rate.
    entry_rates: Vec<f64>,
    /// Per document: summed total model rate.
    doc_rates: Vec<f64>,
}

impl PerplexityAccum {
    pub fn new(test: &CountMatrix) -> Self {
        PerplexityAccum {
            n_samples: 0,
            entry_rates: vec![0.0; test.entries().len()],
            doc_rates: vec![0.0; test.n_docs()],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Fold one posterior sample (or point estimate) into the sums.
    pub fn add_sample(
        &mut self,
        test: &CountMatrix,
        phi: &Array2<f64>,
        theta: &Array2<f64>,
    ) -> Result<()> {
        if phi.nrows() != test.n_terms() || theta.ncols() != test.n_docs() {
            return Err(Error::domain(
                "sample dimensions do not match the test matrix",
            ));
        }
        if test.entries().len() != self.entry_rates.len() {
            return Err(Error::domain("test matrix changed between samples"));
        }
        for (slot, e) in self.entry_rates.iter_mut().zip(test.entries()) {
            *slot += phi.row(e.term as usize).dot(&theta.column(e.doc as usize));
        }
        // Document totals: sum_k colsum(phi)_k theta_ki.
        let k = phi.ncols();
        let colsum: Vec<f64> = (0..k).map(|kk| phi.column(kk).sum()).collect();
        for (i, slot) in self.doc_rates.iter_mut().enumerate() {
            let mut v = 0.0;
            for (kk, &cs) in colsum.iter().enumerate() {
                v += cs * theta[[kk, i]];
            }
            *slot += v;
        }
        self.n_samples += 1;
        Ok(())
    }

    /// Held-out perplexity over the accumulated samples.
    pub fn perplexity(&self, test: &CountMatrix) -> Result<f64> {
        if self.n_samples == 0 {
            return Err(Error::domain("perplexity needs at least one sample"));
        }
        let y_total = test.total();
        if y_total == 0 {
            return Err(Error::data("test split holds no counts"));
        }
        let mut sum = 0.0;
        for (rate, e) in self.entry_rates.iter().zip(test.entries()) {
            let denom = self.doc_rates[e.doc as usize];
            if !(*rate > 0.0 && denom > 0.0) {
                log::warn!(
                    "test cell (term {}, doc {}) has zero predictive mass",
                    e.term,
                    e.doc
                );
                return Ok(f64::INFINITY);
            }
            sum += e.count as f64 * (rate / denom).ln();
        }
        Ok((-sum / y_total as f64).exp())
    }
}

/// Perplexity of retained samples against a test matrix.
pub fn perplexity(samples: &[FactorState], test: &CountMatrix) -> Result<f64> {
    let mut acc = PerplexityAccum::new(test);
    for s in samples {
        acc.add_sample(test, &s.phi, &s.theta)?;
    }
    acc.perplexity(test)
}

#[derive(Debug, Clone)]
pub struct FactorSummary {
    pub factor: usize,
    pub active: bool,
    /// Counts allocated to the factor at the final sweep.
    pub allocated: u64,
    /// Factor weight p_k.
    pub weight: f64,
    /// Factor mark r_k.
    pub mark: f64,
    /// Implied per-document count mean r p / (1 - p).
    pub mean_count: f64,
    /// Implied variance-to-mean ratio 1 / (1 - p).
    pub vmr: f64,
    /// Heaviest-loading terms, descending.
    pub top_terms: Vec<(u32, f64)>,
}

/// Summarize factors, heaviest first. `factor_totals` is the final sweep's
/// per-factor allocation (a factor is active when it allocated anything).
pub fn factor_report(
    state: &FactorState,
    factor_totals: &[u64],
    top_m: usize,
) -> Result<Vec<FactorSummary>> {
    let k = state.n_factors();
    if factor_totals.len() != k {
        return Err(Error::domain("factor totals do not match the state"));
    }
    let mut out = Vec::with_capacity(k);
    for (kk, &allocated) in factor_totals.iter().enumerate() {
        let (p, r) = (state.p[kk], state.r[kk]);
        let mut terms: Vec<(u32, f64)> = state
            .phi
            .column(kk)
            .iter()
            .enumerate()
            .map(|(t, &v)| (t as u32, v))
            .collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        terms.truncate(top_m);
        out.push(FactorSummary {
            factor: kk,
            active: allocated > 0,
            allocated,
            weight: p,
            mark: r,
            mean_count: r * p / (1.0 - p),
            vmr: 1.0 / (1.0 - p),
            top_terms: terms,
        });
    }
    out.sort_by(|a, b| b.allocated.cmp(&a.allocated).then(a.factor.cmp(&b.factor)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn rng(label: &str) -> RngStream {
        RngStream::new(0xEA1).substream(label)
    }

    #[test]
    fn split_train_share_is_exact() {
        let counts =
            CountMatrix::from_triplets(3, 2, vec![(0, 0, 4), (1, 0, 3), (2, 0, 3), (0, 1, 7)])
                .unwrap();
        let mut r = rng("share");
        for rep in 0..50 {
            let pair = split_counts(&counts, 0.8, rep, &mut r).unwrap();
            assert_eq!(pair.train.doc_totals()[0], 8, "doc 0 holds 10 tokens");
            assert_eq!(pair.test.doc_totals()[0], 2);
            // round(0.8 * 7) = 6
            assert_eq!(pair.train.doc_totals()[1], 6);
            assert_eq!(pair.test.doc_totals()[1], 1);
        }
    }

    #[test]
    fn split_marginal_is_hypergeometric() {
        // Doc of 100 tokens over two terms (60, 40), ratio 1/2: the train
        // count of term 0 is Hypergeometric(100, 60, 50), mean 30.
        let counts = CountMatrix::from_triplets(2, 1, vec![(0, 0, 60), (1, 0, 40)]).unwrap();
        let mut r = rng("marginal");
        let reps = 2000;
        let mut sum = 0.0;
        for rep in 0..reps {
            let pair = split_counts(&counts, 0.5, rep, &mut r).unwrap();
            let t0 = pair
                .train
                .entries()
                .iter()
                .find(|e| e.term == 0)
                .map(|e| e.count)
                .unwrap_or(0);
            sum += t0 as f64;
        }
        let mean = sum / reps as f64;
        // var = 50 * 0.6 * 0.4 * (50/99) = 6.06; 3 sigma of the mean.
        let band = 3.0 * (6.06f64 / reps as f64).sqrt();
        assert!((mean - 30.0).abs() < band, "mean {mean}");
    }

    proptest! {
        #[test]
        fn split_conserves_every_cell(
            seed in any::<u64>(),
            ratio in 0.05f64..0.95,
            raw in proptest::collection::vec((0u32..5, 0u32..4, 1u64..30), 1..20),
        ) {
            let counts = CountMatrix::from_triplets(5, 4, raw).unwrap();
            let mut r = RngStream::new(seed).substream("conserve");
            let pair = split_counts(&counts, ratio, 0, &mut r).unwrap();
            let mut merged: HashMap<(u32, u32), u64> = HashMap::new();
            for e in pair.train.entries().iter().chain(pair.test.entries()) {
                *merged.entry((e.term, e.doc)).or_insert(0) += e.count;
            }
            prop_assert_eq!(merged.len(), counts.entries().len());
            for e in counts.entries() {
                prop_assert_eq!(merged[&(e.term, e.doc)], e.count);
            }
            // Per-document training share is the rounded target.
            for doc in 0..counts.n_docs() {
                let total = counts.doc_totals()[doc];
                if total > 0 {
                    let want = (ratio * total as f64).round() as u64;
                    prop_assert_eq!(pair.train.doc_totals()[doc], want);
                }
            }
        }
    }

    #[test]
    fn uniform_predictor_scores_vocabulary_size() {
        // phi = 1/P everywhere: every term's predictive probability is 1/P
        // regardless of theta, so perplexity is exactly P.
        let test = CountMatrix::from_triplets(
            4,
            3,
            vec![(0, 0, 2), (3, 0, 1), (1, 1, 5), (2, 2, 3), (0, 2, 4)],
        )
        .unwrap();
        let mk = |seed: u64| {
            let mut r = RngStream::new(seed);
            let mut theta = Array2::zeros((2, 3));
            for v in theta.iter_mut() {
                *v = 0.2 + r.open_unit();
            }
            FactorState {
                phi: Array2::from_elem((4, 2), 0.25),
                theta,
                p: vec![0.5; 2],
                r: vec![1.0; 2],
                z: None,
                pi: None,
                scores: None,
                g: None,
            }
        };
        let samples = vec![mk(1), mk(2), mk(3)];
        assert_relative_eq!(
            perplexity(&samples, &test).unwrap(),
            4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn two_term_hand_value() {
        // One document, two terms with predictive probabilities 0.9/0.1 and
        // one held-out token each: exp(-(ln 0.9 + ln 0.1)/2) = 10/3.
        let test = CountMatrix::from_triplets(2, 1, vec![(0, 0, 1), (1, 0, 1)]).unwrap();
        let state = FactorState {
            phi: array![[0.9], [0.1]],
            theta: array![[5.0]],
            p: vec![0.5],
            r: vec![1.0],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        let got = perplexity(&[state], &test).unwrap();
        assert!((got - 10.0 / 3.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn duplicate_samples_leave_perplexity_unchanged() {
        let test = CountMatrix::from_triplets(3, 2, vec![(0, 0, 2), (2, 1, 3)]).unwrap();
        let mut r = rng("dup");
        let mut theta = Array2::zeros((2, 2));
        for v in theta.iter_mut() {
            *v = 0.1 + r.open_unit();
        }
        let mut phi = Array2::zeros((3, 2));
        for v in phi.iter_mut() {
            *v = 0.1 + r.open_unit();
        }
        let state = FactorState {
            phi,
            theta,
            p: vec![0.5; 2],
            r: vec![1.0; 2],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        let single = perplexity(std::slice::from_ref(&state), &test).unwrap();
        let triple = perplexity(&[state.clone(), state.clone(), state], &test).unwrap();
        assert_relative_eq!(single, triple, max_relative = 1e-12);
    }

    #[test]
    fn factor_permutation_invariance() {
        let test = CountMatrix::from_triplets(3, 2, vec![(0, 0, 2), (1, 1, 1), (2, 1, 2)]).unwrap();
        let state = FactorState {
            phi: array![[0.7, 0.1], [0.2, 0.3], [0.1, 0.6]],
            theta: array![[2.0, 0.5], [1.0, 3.0]],
            p: vec![0.5; 2],
            r: vec![1.0; 2],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        let swapped = FactorState {
            phi: array![[0.1, 0.7], [0.3, 0.2], [0.6, 0.1]],
            theta: array![[1.0, 3.0], [2.0, 0.5]],
            ..state.clone()
        };
        let a = perplexity(std::slice::from_ref(&state), &test).unwrap();
        let b = perplexity(std::slice::from_ref(&swapped), &test).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn zero_mass_test_cell_gives_infinite_perplexity() {
        let test = CountMatrix::from_triplets(2, 1, vec![(1, 0, 1)]).unwrap();
        let state = FactorState {
            phi: array![[1.0], [0.0]],
            theta: array![[2.0]],
            p: vec![0.5],
            r: vec![1.0],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        assert_eq!(perplexity(&[state], &test).unwrap(), f64::INFINITY);
    }

    #[test]
    fn report_ranks_and_summarizes() {
        let state = FactorState {
            phi: array![[0.5, 0.05], [0.3, 0.15], [0.2, 0.8]],
            theta: array![[1.0], [1.0]],
            p: vec![0.8, 0.5],
            r: vec![2.0, 1.0],
            z: None,
            pi: None,
            scores: None,
            g: None,
        };
        let report = factor_report(&state, &[3, 10], 2).unwrap();
        assert_eq!(report[0].factor, 1);
        assert_eq!(report[0].allocated, 10);
        assert_eq!(report[0].top_terms, vec![(2, 0.8), (1, 0.15)]);
        assert_eq!(report[1].factor, 0);
        assert_relative_eq!(report[1].mean_count, 2.0 * 0.8 / 0.2, max_relative = 1e-12);
        assert_relative_eq!(report[1].vmr, 5.0, max_relative = 1e-12);
        assert!(report.iter().all(|f| f.active));
        let idle = factor_report(&state, &[0, 1], 1).unwrap();
        assert!(!idle[1].active);
    }
}
