//! Sparse count matrices, factor state, and the latent count allocation
//! shared by all samplers.
//!
//! Observed data are term-by-document counts stored sparsely in
//! (document, term) order. Inference augments each positive cell with a
//! split of its count across factors; cell weights are phi_pk theta_ki, so
//! the split is multinomial and every per-factor statistic the samplers
//! need (term-factor, factor-document, factor totals) is an aggregate of
//! the same allocation. The allocation is rebuilt from scratch each sweep,
//! which keeps it impossible for the aggregates to drift from the cells.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dist::multinomial_into;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::ln_gamma_raw;

/// One positive cell of the count matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub term: u32,
    pub doc: u32,
    pub count: u64,
}

/// Term-by-document counts, sparse, sorted by (doc, term).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n_terms: usize,
    n_docs: usize,
    entries: Vec<Entry>,
    /// entries[doc_offsets[i]..doc_offsets[i+1]] belong to document i.
    doc_offsets: Vec<usize>,
    doc_totals: Vec<u64>,
    total: u64,
}

impl CountMatrix {
    /// Build from (term, doc, count) triplets. Duplicates are aggregated,
    /// zero counts dropped, out-of-range indices rejected.
    pub fn from_triplets<I>(n_terms: usize, n_docs: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32, u64)>,
    {
        if n_terms == 0 || n_docs == 0 {
            return Err(Error::data(
                "count matrix needs at least one term and one document",
            ));
        }
        let mut entries: Vec<Entry> = Vec::new();
        for (term, doc, count) in triplets {
            if term as usize >= n_terms {
                return Err(Error::data(format!(
                    "term index {term} out of range (vocabulary size {n_terms})"
                )));
            }
            if doc as usize >= n_docs {
                return Err(Error::data(format!(
                    "document index {doc} out of range ({n_docs} documents)"
                )));
            }
            if count == 0 {
                continue;
            }
            entries.push(Entry { term, doc, count });
        }
        entries.sort_unstable_by_key(|e| (e.doc, e.term));
        entries.dedup_by(|b, a| {
            if a.doc == b.doc && a.term == b.term {
                a.count += b.count;
                true
            } else {
                false
            }
        });

        let mut doc_offsets = vec![0usize; n_docs + 1];
        let mut doc_totals = vec![0u64; n_docs];
        for e in &entries {
            doc_offsets[e.doc as usize + 1] += 1;
            doc_totals[e.doc as usize] += e.count;
        }
        for i in 0..n_docs {
            doc_offsets[i + 1] += doc_offsets[i];
        }
        let total = doc_totals.iter().sum();
        Ok(CountMatrix {
            n_terms,
            n_docs,
            entries,
            doc_offsets,
            doc_totals,
            total,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn doc_entries(&self, doc: usize) -> &[Entry] {
        &self.entries[self.doc_offsets[doc]..self.doc_offsets[doc + 1]]
    }

    pub fn doc_totals(&self) -> &[u64] {
        &self.doc_totals
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of documents each term appears in.
    pub fn term_doc_freq(&self) -> Vec<u32> {
        let mut df = vec![0u32; self.n_terms];
        for e in &self.entries {
            df[e.term as usize] += 1;
        }
        df
    }
}

/// Full latent state of a factorization: loadings, scores, and the
/// per-factor weight/mark pairs, plus the optional sparse-variant extras.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    /// P x K loadings; columns sum to one.
    pub phi: Array2<f64>,
    /// K x N factor scores.
    pub theta: Array2<f64>,
    /// Per-factor weight in (0, 1).
    pub p: Vec<f64>,
    /// Per-factor mark (dispersion).
    pub r: Vec<f64>,
    /// Binary usage indicators, K x N, for the sparse variant.
    pub z: Option<Array2<u8>>,
    /// Per-factor usage probabilities for the sparse variant.
    pub pi: Option<Vec<f64>>,
    /// Underlying scores s with theta = z .* s, for the sparse variant.
    pub scores: Option<Array2<f64>>,
    /// Per-factor score rate caps for the gamma variant.
    pub g: Option<Vec<f64>>,
}

impl FactorState {
    pub fn n_terms(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_docs(&self) -> usize {
        self.theta.ncols()
    }

    /// Poisson rate of cell (term p, document i): sum_k phi_pk theta_ki.
    pub fn rate_at(&self, term: usize, doc: usize) -> f64 {
        self.phi.row(term).dot(&self.theta.column(doc))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_factors();
        if self.theta.nrows() != k {
            return Err(Error::domain(format!(
                "loadings have {k} factors but scores have {}",
                self.theta.nrows()
            )));
        }
        if self.p.len() != k || self.r.len() != k {
            return Err(Error::domain(
                "p and r must have one entry per factor".to_string(),
            ));
        }
        if let Some(z) = &self.z {
            if z.dim() != self.theta.dim() {
                return Err(Error::domain(
                    "z must match the score dimensions".to_string(),
                ));
            }
        }
        if self.phi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::numeric("loadings must be finite and nonnegative"));
        }
        if self.theta.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::numeric("scores must be finite and nonnegative"));
        }
        if self.p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::numeric("factor weights must lie in (0, 1)"));
        }
        if self.r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::numeric("factor marks must be positive and finite"));
        }
        Ok(())
    }

    pub fn snapshot(
        &self,
        variant: &str,
        iteration: u64,
        hyper: BTreeMap<String, f64>,
    ) -> Snapshot {
        Snapshot {
            variant: variant.to_string(),
            iteration,
            n_terms: self.n_terms(),
            n_docs: self.n_docs(),
            n_factors: self.n_factors(),
            phi: self.phi.iter().copied().collect(),
            theta: self.theta.iter().copied().collect(),
            p: self.p.clone(),
            r: self.r.clone(),
            z: self.z.as_ref().map(|z| z.iter().copied().collect()),
            pi: self.pi.clone(),
            scores: self.scores.as_ref().map(|s| s.iter().copied().collect()),
            g: self.g.clone(),
            hyper,
            seed: None,
            factor_totals: None,
        }
    }
}

/// Serializable snapshot of a [`FactorState`]; matrices are flattened
/// row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub variant: String,
    pub iteration: u64,
    pub n_terms: usize,
    pub n_docs: usize,
    pub n_factors: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g: Option<Vec<f64>>,
    pub hyper: BTreeMap<String, f64>,
    /// Master seed of the run that produced this state.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Final per-factor allocated token totals, when the fit tracked them.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub factor_totals: Option<Vec<u64>>,
}

impl Snapshot {
    pub fn to_state(&self) -> Result<FactorState> {
        let (p_dim, k, n) = (self.n_terms, self.n_factors, self.n_docs);
        let shape_err = |what: &str| Error::data(format!("snapshot {what} has the wrong length"));
        let phi =
            Array2::from_shape_vec((p_dim, k), self.phi.clone()).map_err(|_| shape_err("phi"))?;
        let theta =
            Array2::from_shape_vec((k, n), self.theta.clone()).map_err(|_| shape_err("theta"))?;
        let z = match &self.z {
            Some(v) => Some(Array2::from_shape_vec((k, n), v.clone()).map_err(|_| shape_err("z"))?),
            None => None,
        };
        let scores = match &self.scores {
            Some(v) => {
                Some(Array2::from_shape_vec((k, n), v.clone()).map_err(|_| shape_err("scores"))?)
            }
            None => None,
        };
        let state = FactorState {
            phi,
            theta,
            p: self.p.clone(),
            r: self.r.clone(),
            z,
            pi: self.pi.clone(),
            scores,
            g: self.g.clone(),
        };
        state.validate()?;
        Ok(state)
    }
}

/// Multinomial split of every positive cell across factors, with the
/// aggregates the samplers consume.
#[derive(Debug, Clone)]
pub struct LatentAllocation {
    k: usize,
    /// Parallel to the count matrix entries: sparse (factor, count) pairs.
    cells: Vec<Vec<(u16, u64)>>,
    /// Term-factor totals, P x K.
    pub x_pk: Array2<u64>,
    /// Factor-document totals, K x N.
    pub x_ik: Array2<u64>,
    /// Per-factor totals.
    pub x_k: Vec<u64>,
}

impl LatentAllocation {
    pub fn new(counts: &CountMatrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("need at least one factor".to_string()));
        }
        if k > u16::MAX as usize {
            return Err(Error::config(format!(
                "factor count {k} exceeds the allocation limit of {}",
                u16::MAX
            )));
        }
        Ok(LatentAllocation {
            k,
            cells: vec![Vec::new(); counts.entries().len()],
            x_pk: Array2::zeros((counts.n_terms(), k)),
            x_ik: Array2::zeros((k, counts.n_docs())),
            x_k: vec![0; k],
        })
    }

    pub fn n_factors(&self) -> usize {
        self.k
    }

    /// Factors with at least one allocated count.
    pub fn n_active(&self) -> usize {
        self.x_k.iter().filter(|&&x| x > 0).count()
    }

    /// Redraw every cell's split from its multinomial conditional with
    /// weights phi_pk theta_ki, then rebuild all aggregates.
    pub fn resample(
        &mut self,
        counts: &CountMatrix,
        phi: &Array2<f64>,
        theta: &Array2<f64>,
        rng: &mut RngStream,
    ) -> Result<()> {
        let k = self.k;
        self.x_pk.fill(0);
        self.x_ik.fill(0);
        self.x_k.iter_mut().for_each(|x| *x = 0);

        let mut weights = vec![0.0f64; k];
        let mut split = vec![0u64; k];
        let mut theta_col = vec![0.0f64; k];

        for doc in 0..counts.n_docs() {
            let entries = counts.doc_entries(doc);
            if entries.is_empty() {
                continue;
            }
            for (kk, v) in theta.column(doc).iter().enumerate() {
                theta_col[kk] = *v;
            }
            let base = counts.doc_offsets[doc];
            for (j, e) in entries.iter().enumerate() {
                let term = e.term as usize;
                let phi_row = phi.row(term);
                let phi_row = phi_row.as_slice().expect("loadings are row-major");
                let mut any = false;
                for kk in 0..k {
                    let w = phi_row[kk] * theta_col[kk];
                    weights[kk] = w;
                    any |= w > 0.0;
                }
                if !any {
                    return Err(Error::DegenerateCell { term, doc });
                }
                multinomial_into(rng, e.count, &weights, &mut split)?;
                let cell = &mut self.cells[base + j];
                cell.clear();
                for (kk, &x) in split.iter().enumerate() {
                    if x == 0 {
                        continue;
                    }
                    cell.push((kk as u16, x));
                    self.x_pk[[term, kk]] += x;
                    self.x_ik[[kk, doc]] += x;
                    self.x_k[kk] += x;
                }
            }
        }
        Ok(())
    }

    /// Verify the cells sum to the observed counts and the aggregates sum
    /// to the cells. Cheap enough to run inside tests on every sweep.
    pub fn audit(&self, counts: &CountMatrix) -> Result<()> {
        let mut x_pk = Array2::<u64>::zeros(self.x_pk.dim());
        let mut x_ik = Array2::<u64>::zeros(self.x_ik.dim());
        let mut x_k = vec![0u64; self.k];
        for (cell, e) in self.cells.iter().zip(counts.entries()) {
            let mut cell_total = 0u64;
            for &(kk, x) in cell {
                let kk = kk as usize;
                x_pk[[e.term as usize, kk]] += x;
                x_ik[[kk, e.doc as usize]] += x;
                x_k[kk] += x;
                cell_total += x;
            }
            if cell_total != e.count {
                return Err(Error::numeric(format!(
                    "allocation of cell (term {}, doc {}) sums to {cell_total}, count is {}",
                    e.term, e.doc, e.count
                )));
            }
        }
        if x_pk != self.x_pk || x_ik != self.x_ik || x_k != self.x_k {
            return Err(Error::numeric("allocation aggregates drifted from cells"));
        }
        Ok(())
    }
}

/// Allocate every count once (initialization helper).
pub fn allocate_counts(
    counts: &CountMatrix,
    phi: &Array2<f64>,
    theta: &Array2<f64>,
    rng: &mut RngStream,
) -> Result<LatentAllocation> {
    let mut alloc = LatentAllocation::new(counts, phi.ncols())?;
    alloc.resample(counts, phi, theta, rng)?;
    Ok(alloc)
}

/// Log likelihood of the counts under independent Poisson cells with rates
/// (phi theta)_pi; the normalizer uses column/row sums rather than the full
/// P x N rate matrix. A zero-rate positive cell yields -inf.
pub fn poisson_loglik(counts: &CountMatrix, phi: &Array2<f64>, theta: &Array2<f64>) -> f64 {
    let mut ll = 0.0;
    for e in counts.entries() {
        let rate = phi.row(e.term as usize).dot(&theta.column(e.doc as usize));
        if rate <= 0.0 {
            log::warn!(
                "zero rate at positive cell (term {}, doc {}); log likelihood is -inf",
                e.term,
                e.doc
            );
            return f64::NEG_INFINITY;
        }
        ll += e.count as f64 * rate.ln() - ln_gamma_raw(e.count as f64 + 1.0);
    }
    // sum_pk phi_pk sum_i theta_ki = sum_k colsum(phi)_k rowsum(theta)_k
    for k in 0..phi.ncols() {
        ll -= phi.column(k).sum() * theta.row(k).sum();
    }
    ll
}
