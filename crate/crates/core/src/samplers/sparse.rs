//! The sparse variant: binary factor usage with beta-process probabilities.
//!
//! Scores decompose as theta_ki = z_ki * s_ki. A document that received any
//! allocation from a factor must be using it (z = 1); otherwise z is drawn
//! from the odds pi_k (1-p)^r_k : (1 - pi_k), the posterior odds of "using
//! the factor but drawing zero" against "not using it". Active scores get
//! the usual gamma conditional; inactive ones are refreshed from the prior,
//! which keeps the chain irreducible across usage patterns. The factor
//! weight p stays fixed; sparsity is carried by pi instead.

use super::gibbs::update_phi;
use super::mh::{newton_mh_step, MarkConditional, MhController};
use super::HyperParams;
use crate::dist::{sample_beta, sample_gamma};
use crate::error::Result;
use crate::model::{CountMatrix, FactorState, LatentAllocation};
use crate::rng::RngStream;
use crate::samplers::gibbs::sample_r_exact;
use rand::Rng;

/// P(z = 1 | x = 0) for usage probability pi, mark r, weight p:
/// pi (1-p)^r / (pi (1-p)^r + 1 - pi), formed in logs.
pub(crate) fn z_posterior_prob(pi: f64, r: f64, p: f64) -> f64 {
    let lw1 = pi.ln() + r * (-p).ln_1p();
    let lw0 = (1.0 - pi).ln();
    let m = lw1.max(lw0);
    let w1 = (lw1 - m).exp();
    w1 / (w1 + (lw0 - m).exp())
}

pub fn sweep_sgg(
    counts: &CountMatrix,
    state: &mut FactorState,
    alloc: &mut LatentAllocation,
    hyper: &HyperParams,
    ctrl: &mut MhController,
    rng: &mut RngStream,
) -> Result<()> {
    alloc.resample(counts, &state.phi, &state.theta, rng)?;
    update_phi(state, alloc, hyper.a_phi, rng)?;

    let (k_n, n) = (state.n_factors(), state.n_docs());
    let p = hyper.p_fixed;
    let ln1mp = (-p).ln_1p();
    let (wa, wb) = (hyper.c * hyper.eps, hyper.c * (1.0 - hyper.eps));
    let (a0, b0) = (hyper.c0 * hyper.r0, hyper.c0);

    let mut active_counts: Vec<u64> = Vec::with_capacity(n);
    for k in 0..k_n {
        let r_k = state.r[k];
        let pi_k = state.pi.as_ref().expect("sparse state carries pi")[k];

        // Usage indicators; forced on wherever the allocation is positive.
        let mut z_sum = 0u64;
        {
            let z = state.z.as_mut().expect("sparse state carries z");
            let q = z_posterior_prob(pi_k, r_k, p);
            for i in 0..n {
                let zi = if alloc.x_ik[[k, i]] > 0 {
                    1
                } else {
                    (rng.random::<f64>() < q) as u8
                };
                z[[k, i]] = zi;
                z_sum += zi as u64;
            }
        }

        // Usage probability.
        let pi_new = sample_beta(rng, wa + z_sum as f64, wb + (n as u64 - z_sum) as f64)?;
        state.pi.as_mut().expect("sparse state carries pi")[k] = pi_new;

        // Scores: gamma conditional where active, prior where not.
        {
            let z = state.z.as_ref().expect("sparse state carries z");
            let s = state.scores.as_mut().expect("sparse state carries scores");
            let prior_scale = p / (1.0 - p);
            for i in 0..n {
                let si = if z[[k, i]] == 1 {
                    sample_gamma(rng, r_k + alloc.x_ik[[k, i]] as f64, p)?
                } else {
                    sample_gamma(rng, r_k, prior_scale)?
                };
                s[[k, i]] = si;
                state.theta[[k, i]] = if z[[k, i]] == 1 { si } else { 0.0 };
            }
        }

        // Mark, conditioned on the active documents only.
        active_counts.clear();
        for i in 0..n {
            if state.z.as_ref().unwrap()[[k, i]] == 1 {
                let x = alloc.x_ik[[k, i]];
                if x > 0 {
                    active_counts.push(x);
                }
            }
        }
        if active_counts.is_empty() {
            state.r[k] = sample_r_exact(rng, a0, b0, z_sum as f64, ln1mp)?;
        } else {
            let cond = MarkConditional {
                a0,
                b0,
                n: z_sum as f64,
                ln1mp,
                counts: &active_counts,
            };
            let out = newton_mh_step(rng, &cond, state.r[k], ctrl.stepsize[k])?;
            ctrl.note(k, &out);
            state.r[k] = out.r;
        }
        state.p[k] = p;
    }
    Ok(())
}
