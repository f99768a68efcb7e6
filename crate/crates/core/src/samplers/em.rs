//! Penalized EM for the gamma-score model with unnormalized loadings.
//!
//! Loadings carry Gamma(a_phi, rate b_phi) priors and scores
//! Gamma(a_theta, rate a_theta / g_k); the E-step splits each count across
//! factors in expectation and the M-step maximizes in closed form:
//!
//!   phi_pk   <- [ (a_phi - 1) + phi_pk sum_i x_pi theta_ki / lambda_pi ]
//!               / (b_phi + sum_i theta_ki)
//!   theta_ki <- [ (a_theta - 1) + theta_ki sum_p x_pi phi_pk / lambda_pi ]
//!               / (a_theta / g_k + sum_p phi_pk)
//!
//! written in the cancelled form that stays defined as a -> 1. Scores are
//! updated against the freshly updated loadings (a new E-step in between),
//! so each half-iteration is a coordinate EM step and the penalized
//! likelihood never decreases. At a_phi = a_theta = 1, b_phi = 0 and
//! g = infinity both updates reduce exactly to the classic multiplicative
//! rules for the generalized KL divergence.
//!
//! Shape parameters below 1 put the prior mode at zero and break the
//! M-step's closed form, so EM validation requires a_phi, a_theta >= 1.

// The update kernels walk several parallel arrays by index; iterator
// chains would obscure which axis each loop covers.
#![allow(clippy::needless_range_loop)]

use super::{ChainConfig, Variant};
use crate::dist::sample_gamma;
use crate::error::{Error, Result};
use crate::model::{CountMatrix, FactorState};
use crate::rng::RngStream;
use crate::special::ln_gamma_raw;
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct EmResult {
    pub state: FactorState,
    /// Penalized log likelihood after each iteration.
    pub objective: Vec<f64>,
    pub converged: bool,
    pub n_iterations: usize,
}

/// Fit with a random positive initialization.
pub fn run_em(counts: &CountMatrix, cfg: &ChainConfig, rng: &mut RngStream) -> Result<EmResult> {
    cfg.validate()?;
    if cfg.variant != Variant::GapEm {
        return Err(Error::config("run_em fits the gap-em variant only"));
    }
    let (p_dim, n, k) = (counts.n_terms(), counts.n_docs(), cfg.k);
    let mut phi = Array2::zeros((p_dim, k));
    for v in phi.iter_mut() {
        *v = 0.1 + sample_gamma(rng, 1.0, 1.0)?;
    }
    let mut theta = Array2::zeros((k, n));
    for v in theta.iter_mut() {
        *v = 0.1 + sample_gamma(rng, 1.0, 1.0)?;
    }
    run_em_from(counts, cfg, phi, theta)
}

/// Fit from explicit starting matrices (shared-initialization comparisons).
pub fn run_em_from(
    counts: &CountMatrix,
    cfg: &ChainConfig,
    mut phi: Array2<f64>,
    mut theta: Array2<f64>,
) -> Result<EmResult> {
    cfg.validate()?;
    if cfg.variant != Variant::GapEm {
        return Err(Error::config("run_em fits the gap-em variant only"));
    }
    let (p_dim, n, k) = (counts.n_terms(), counts.n_docs(), cfg.k);
    if phi.dim() != (p_dim, k) || theta.dim() != (k, n) {
        return Err(Error::config("EM initialization has the wrong dimensions"));
    }
    if phi
        .iter()
        .chain(theta.iter())
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::config("EM initialization must be strictly positive"));
    }
    let h = &cfg.hyper;
    let mut g = vec![h.g_init; k];

    let mut acc = Array2::<f64>::zeros((p_dim, k));
    let mut acc_t = Array2::<f64>::zeros((k, n));
    let mut objective: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iters = 0usize;

    for _ in 0..cfg.n_iterations {
        iters += 1;

        // Loadings against current scores.
        accumulate_phi_ratios(counts, &phi, &theta, &mut acc)?;
        for kk in 0..k {
            let den = h.b_phi + theta.row(kk).sum();
            if den <= 0.0 || den.is_nan() {
                return Err(Error::DegenerateUpdate(format!(
                    "factor {kk} has zero score mass and no loading prior rate"
                )));
            }
            for p in 0..p_dim {
                phi[[p, kk]] = ((h.a_phi - 1.0) + phi[[p, kk]] * acc[[p, kk]]) / den;
            }
        }

        // Scores against the new loadings.
        accumulate_theta_ratios(counts, &phi, &theta, &mut acc_t)?;
        for kk in 0..k {
            let den = h.a_theta / g[kk] + phi.column(kk).sum();
            if den <= 0.0 || den.is_nan() {
                return Err(Error::DegenerateUpdate(format!(
                    "factor {kk} has zero loading mass and a flat score prior"
                )));
            }
            for i in 0..n {
                theta[[kk, i]] = ((h.a_theta - 1.0) + theta[[kk, i]] * acc_t[[kk, i]]) / den;
            }
        }

        if h.estimate_g {
            for kk in 0..k {
                g[kk] = (theta.row(kk).sum() / n as f64).max(f64::MIN_POSITIVE);
            }
        }

        let obj = penalized_loglik(counts, &phi, &theta, h, &g);
        if let Some(&prev) = objective.last() {
            if (obj - prev).abs() <= cfg.em_tol * (1.0 + obj.abs()) {
                objective.push(obj);
                converged = true;
                break;
            }
        }
        objective.push(obj);
    }

    let state = FactorState {
        phi,
        theta,
        p: vec![0.5; k],
        r: vec![1.0; k],
        z: None,
        pi: None,
        scores: None,
        g: Some(g),
    };
    Ok(EmResult {
        state,
        objective,
        converged,
        n_iterations: iters,
    })
}

/// E-step core: x/lambda for one positive cell, or the degenerate-rate
/// error the M-step cannot recover from.
fn cell_ratio(
    e: &crate::model::Entry,
    phi_row: &[f64],
    theta: &Array2<f64>,
    i: usize,
) -> Result<f64> {
    let mut lambda = 0.0;
    for (kk, &w) in phi_row.iter().enumerate() {
        lambda += w * theta[[kk, i]];
    }
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(Error::DegenerateUpdate(format!(
            "cell (term {}, doc {i}) has count {} but zero model rate",
            e.term, e.count
        )));
    }
    Ok(e.count as f64 / lambda)
}

/// Accumulate sum_i (x_pi / lambda_pi) theta_ki into `acc[p, k]`.
fn accumulate_phi_ratios(
    counts: &CountMatrix,
    phi: &Array2<f64>,
    theta: &Array2<f64>,
    acc: &mut Array2<f64>,
) -> Result<()> {
    acc.fill(0.0);
    let k = phi.ncols();
    for e in counts.entries() {
        let (p, i) = (e.term as usize, e.doc as usize);
        let phi_row = phi.row(p);
        let phi_row = phi_row.as_slice().expect("loadings are row-major");
        let ratio = cell_ratio(e, phi_row, theta, i)?;
        for kk in 0..k {
            acc[[p, kk]] += ratio * theta[[kk, i]];
        }
    }
    Ok(())
}

/// Accumulate sum_p (x_pi / lambda_pi) phi_pk into `acc[k, i]`.
fn accumulate_theta_ratios(
    counts: &CountMatrix,
    phi: &Array2<f64>,
    theta: &Array2<f64>,
    acc: &mut Array2<f64>,
) -> Result<()> {
    acc.fill(0.0);
    let k = phi.ncols();
    for e in counts.entries() {
        let (p, i) = (e.term as usize, e.doc as usize);
        let phi_row = phi.row(p);
        let phi_row = phi_row.as_slice().expect("loadings are row-major");
        let ratio = cell_ratio(e, phi_row, theta, i)?;
        for kk in 0..k {
            acc[[kk, i]] += ratio * phi_row[kk];
        }
    }
    Ok(())
}

/// Poisson log likelihood plus the gamma log priors (additive constants in
/// the priors dropped; the a = 1 log terms are skipped so zero entries stay
/// well defined in the flat case).
fn penalized_loglik(
    counts: &CountMatrix,
    phi: &Array2<f64>,
    theta: &Array2<f64>,
    h: &super::HyperParams,
    g: &[f64],
) -> f64 {
    let mut ll = 0.0;
    let k = phi.ncols();
    for e in counts.entries() {
        let (p, i) = (e.term as usize, e.doc as usize);
        let lambda = phi.row(p).dot(&theta.column(i));
        if lambda <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += e.count as f64 * lambda.ln() - ln_gamma_raw(e.count as f64 + 1.0);
    }
    for kk in 0..k {
        ll -= phi.column(kk).sum() * theta.row(kk).sum();
    }
    if h.a_phi != 1.0 {
        ll += (h.a_phi - 1.0) * phi.iter().map(|v| v.ln()).sum::<f64>();
    }
    ll -= h.b_phi * phi.sum();
    if h.a_theta != 1.0 {
        ll += (h.a_theta - 1.0) * theta.iter().map(|v| v.ln()).sum::<f64>();
    }
    for kk in 0..k {
        let rate = h.a_theta / g[kk];
        if rate > 0.0 {
            ll -= rate * theta.row(kk).sum();
        }
    }
    ll
}
