//! Conjugate Gibbs sweeps for the non-sparse variants.
//!
//! Shared structure per sweep: reallocate counts, then draw loadings
//! column-wise from their Dirichlet conditionals, then the variant's score
//! and weight/mark updates. Every conditional here is exact; only the full
//! model's mark update delegates to the Metropolis kernel, and even that
//! collapses to an exact gamma draw for factors with no allocated counts.

// The conditional updates walk several parallel arrays by index; iterator
// chains would obscure which axis each loop covers.
#![allow(clippy::needless_range_loop)]

use super::mh::{newton_mh_step, MarkConditional, MhController};
use super::HyperParams;
use crate::dist::{sample_beta, sample_dirichlet, sample_gamma};
use crate::error::Result;
use crate::model::{CountMatrix, FactorState, LatentAllocation};
use crate::rng::RngStream;

/// Loading columns: phi_k ~ Dir(a_phi + x_.k).
pub(super) fn update_phi(
    state: &mut FactorState,
    alloc: &LatentAllocation,
    a_phi: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let p_dim = state.n_terms();
    let mut alphas = vec![0.0; p_dim];
    for k in 0..state.n_factors() {
        for p in 0..p_dim {
            alphas[p] = a_phi + alloc.x_pk[[p, k]] as f64;
        }
        let col = sample_dirichlet(rng, &alphas)?;
        for (p, v) in col.into_iter().enumerate() {
            state.phi[[p, k]] = v;
        }
    }
    Ok(())
}

/// Factor weights: p_k ~ Beta(c eps + x_..k, c (1 - eps) + N r_k).
fn update_p(
    state: &mut FactorState,
    alloc: &LatentAllocation,
    hyper: &HyperParams,
    n_docs: usize,
    rng: &mut RngStream,
) -> Result<()> {
    let (wa, wb) = (hyper.c * hyper.eps, hyper.c * (1.0 - hyper.eps));
    for k in 0..state.n_factors() {
        state.p[k] = sample_beta(
            rng,
            wa + alloc.x_k[k] as f64,
            wb + n_docs as f64 * state.r[k],
        )?;
    }
    Ok(())
}

/// Scores: theta_ki ~ Gamma(r_k + x_.ik, scale p_k).
fn update_theta(
    state: &mut FactorState,
    alloc: &LatentAllocation,
    rng: &mut RngStream,
) -> Result<()> {
    for k in 0..state.n_factors() {
        let (r, p) = (state.r[k], state.p[k]);
        for i in 0..state.n_docs() {
            state.theta[[k, i]] = sample_gamma(rng, r + alloc.x_ik[[k, i]] as f64, p)?;
        }
    }
    Ok(())
}

/// Exact mark draw for a factor with no allocated counts:
/// Gamma(a0, rate b0 - n ln(1 - p)).
pub(super) fn sample_r_exact(
    rng: &mut RngStream,
    a0: f64,
    b0: f64,
    n: f64,
    ln1mp: f64,
) -> Result<f64> {
    sample_gamma(rng, a0, 1.0 / (b0 - n * ln1mp))
}

/// Marks: exact gamma when the factor is empty, Metropolis otherwise.
/// `counts_buf` is scratch reused across factors.
pub(super) fn update_r(
    state: &mut FactorState,
    nonzero_counts_of: impl Fn(usize, &mut Vec<u64>) -> f64,
    hyper: &HyperParams,
    ctrl: &mut MhController,
    rng: &mut RngStream,
    counts_buf: &mut Vec<u64>,
) -> Result<()> {
    let (a0, b0) = (hyper.c0 * hyper.r0, hyper.c0);
    for k in 0..state.n_factors() {
        counts_buf.clear();
        let n = nonzero_counts_of(k, counts_buf);
        let ln1mp = (-state.p[k]).ln_1p();
        if counts_buf.is_empty() {
            state.r[k] = sample_r_exact(rng, a0, b0, n, ln1mp)?;
            continue;
        }
        let cond = MarkConditional {
            a0,
            b0,
            n,
            ln1mp,
            counts: counts_buf,
        };
        let out = newton_mh_step(rng, &cond, state.r[k], ctrl.stepsize[k])?;
        ctrl.note(k, &out);
        state.r[k] = out.r;
    }
    Ok(())
}

/// Full model: weights and marks both learned.
pub fn sweep_bgg(
    counts: &CountMatrix,
    state: &mut FactorState,
    alloc: &mut LatentAllocation,
    hyper: &HyperParams,
    ctrl: &mut MhController,
    rng: &mut RngStream,
) -> Result<()> {
    alloc.resample(counts, &state.phi, &state.theta, rng)?;
    update_phi(state, alloc, hyper.a_phi, rng)?;
    update_p(state, alloc, hyper, counts.n_docs(), rng)?;
    let n_docs = counts.n_docs();
    let mut buf = Vec::with_capacity(n_docs);
    update_r(
        state,
        |k, out| {
            for i in 0..n_docs {
                let x = alloc.x_ik[[k, i]];
                if x > 0 {
                    out.push(x);
                }
            }
            n_docs as f64
        },
        hyper,
        ctrl,
        rng,
        &mut buf,
    )?;
    update_theta(state, alloc, rng)
}

/// Weights learned, marks fixed.
pub fn sweep_bg(
    counts: &CountMatrix,
    state: &mut FactorState,
    alloc: &mut LatentAllocation,
    hyper: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    alloc.resample(counts, &state.phi, &state.theta, rng)?;
    update_phi(state, alloc, hyper.a_phi, rng)?;
    update_p(state, alloc, hyper, counts.n_docs(), rng)?;
    update_theta(state, alloc, rng)
}

/// Dirichlet scores per document.
pub fn sweep_dir(
    counts: &CountMatrix,
    state: &mut FactorState,
    alloc: &mut LatentAllocation,
    hyper: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    alloc.resample(counts, &state.phi, &state.theta, rng)?;
    update_phi(state, alloc, hyper.a_phi, rng)?;
    let k_n = state.n_factors();
    let mut alphas = vec![0.0; k_n];
    for i in 0..state.n_docs() {
        for k in 0..k_n {
            alphas[k] = hyper.a_theta + alloc.x_ik[[k, i]] as f64;
        }
        let col = sample_dirichlet(rng, &alphas)?;
        for (k, v) in col.into_iter().enumerate() {
            state.theta[[k, i]] = v;
        }
    }
    Ok(())
}

/// Gamma scores with a vague prior mean g_k.
pub fn sweep_gap(
    counts: &CountMatrix,
    state: &mut FactorState,
    alloc: &mut LatentAllocation,
    hyper: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    alloc.resample(counts, &state.phi, &state.theta, rng)?;
    update_phi(state, alloc, hyper.a_phi, rng)?;
    let n = state.n_docs();
    let g = state.g.clone().expect("gap state carries g");
    for k in 0..state.n_factors() {
        // Prior Gamma(a_theta, rate a_theta / g_k) + Poisson exposure 1.
        let scale = 1.0 / (1.0 + hyper.a_theta / g[k]);
        for i in 0..n {
            state.theta[[k, i]] =
                sample_gamma(rng, hyper.a_theta + alloc.x_ik[[k, i]] as f64, scale)?;
        }
    }
    if hyper.estimate_g {
        let means: Vec<f64> = (0..state.n_factors())
            .map(|k| state.theta.row(k).sum() / n as f64)
            .collect();
        let g = state.g.as_mut().expect("gap state carries g");
        for (k, mean) in means.into_iter().enumerate() {
            g[k] = mean.max(f64::MIN_POSITIVE);
        }
    }
    Ok(())
}
