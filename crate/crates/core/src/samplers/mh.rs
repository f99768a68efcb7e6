//! Newton-guided Metropolis updates for the factor marks.
//!
//! Given the allocation, a mark's log conditional is
//!
//!   g(r) = (a0 - 1) ln r - b0 r + n r ln(1 - p)
//!          + sum_i [ lnGamma(r + x_i) - lnGamma(r) ],
//!
//! where the sum runs over the factor's per-document totals. Documents with
//! x_i = 0 contribute nothing to the sum, so callers pass only the nonzero
//! totals along with the full document count n.
//!
//! The proposal takes one Newton step from the current point and centers a
//! normal there with standard deviation `stepsize * sqrt(center)`. Two
//! fallbacks keep the kernel defined everywhere, and both are deterministic
//! functions of the point the kernel starts from, so the acceptance ratio
//! can always pair forward and reverse densities of the kernels actually
//! used:
//! * unusable curvature (g'' >= 0, e.g. a0 = 1 with no counts, or not
//!   finite) proposes an independence draw from the Gamma(a0, b0) prior;
//! * a Newton center at or below zero recenters on the current point.

use crate::dist::{sample_gamma, sample_normal};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{digamma_raw, ln_gamma_raw, trigamma_raw};

/// The mark's log conditional, in the sufficient form the samplers hold.
#[derive(Debug, Clone, Copy)]
pub struct MarkConditional<'a> {
    /// Prior shape a0 (= c0 r0).
    pub a0: f64,
    /// Prior rate b0 (= c0).
    pub b0: f64,
    /// Number of documents the factor is exposed to.
    pub n: f64,
    /// ln(1 - p) for the factor's weight.
    pub ln1mp: f64,
    /// Nonzero per-document factor totals.
    pub counts: &'a [u64],
}

impl MarkConditional<'_> {
    /// g(r) up to an additive constant.
    pub fn log_density(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        let mut v = (self.a0 - 1.0) * r.ln() - self.b0 * r + self.n * r * self.ln1mp;
        if !self.counts.is_empty() {
            let base = ln_gamma_raw(r);
            for &x in self.counts {
                v += ln_gamma_raw(r + x as f64) - base;
            }
        }
        v
    }

    pub fn grad(&self, r: f64) -> f64 {
        let mut v = (self.a0 - 1.0) / r - self.b0 + self.n * self.ln1mp;
        if !self.counts.is_empty() {
            let base = digamma_raw(r);
            for &x in self.counts {
                v += digamma_raw(r + x as f64) - base;
            }
        }
        v
    }

    pub fn curvature(&self, r: f64) -> f64 {
        let mut v = -(self.a0 - 1.0) / (r * r);
        if !self.counts.is_empty() {
            let base = trigamma_raw(r);
            for &x in self.counts {
                v += trigamma_raw(r + x as f64) - base;
            }
        }
        v
    }

    /// The zero-count conditional is an exact gamma; its scale.
    pub fn exact_zero_count_scale(&self) -> f64 {
        1.0 / (self.b0 - self.n * self.ln1mp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    Newton { center: f64, sd: f64 },
    Prior,
}

fn kernel_at(cond: &MarkConditional, r: f64, stepsize: f64) -> Kernel {
    let curv = cond.curvature(r);
    if !curv.is_finite() || curv >= 0.0 {
        return Kernel::Prior;
    }
    let mut center = r - cond.grad(r) / curv;
    if !center.is_finite() || center <= 0.0 {
        center = r;
    }
    Kernel::Newton {
        center,
        sd: stepsize * center.sqrt(),
    }
}

fn log_q(kernel: &Kernel, cond: &MarkConditional, x: f64) -> f64 {
    match *kernel {
        Kernel::Newton { center, sd } => {
            let z = (x - center) / sd;
            -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        }
        Kernel::Prior => {
            cond.a0 * cond.b0.ln() - ln_gamma_raw(cond.a0) + (cond.a0 - 1.0) * x.ln() - cond.b0 * x
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub r: f64,
    pub accepted: bool,
    /// The forward proposal used the prior fallback kernel.
    pub fallback: bool,
}

/// One Metropolis-Hastings transition of the mark.
pub fn newton_mh_step(
    rng: &mut RngStream,
    cond: &MarkConditional,
    r: f64,
    stepsize: f64,
) -> Result<MhOutcome> {
    debug_assert!(r > 0.0 && stepsize > 0.0);
    let forward = kernel_at(cond, r, stepsize);
    let fallback = forward == Kernel::Prior;
    let proposal = match forward {
        Kernel::Newton { center, sd } => sample_normal(rng, center, sd)?,
        Kernel::Prior => sample_gamma(rng, cond.a0, 1.0 / cond.b0)?,
    };
    if !(proposal > 0.0 && proposal.is_finite()) {
        return Ok(MhOutcome {
            r,
            accepted: false,
            fallback,
        });
    }
    let reverse = kernel_at(cond, proposal, stepsize);
    let log_alpha = cond.log_density(proposal) - cond.log_density(r) + log_q(&reverse, cond, r)
        - log_q(&forward, cond, proposal);
    let accepted = log_alpha >= 0.0 || rng.open_unit().ln() < log_alpha;
    Ok(MhOutcome {
        r: if accepted { proposal } else { r },
        accepted,
        fallback,
    })
}

/// Per-factor step sizes with window-based acceptance adaptation.
///
/// During burn-in the chain calls [`MhController::adapt`] every window;
/// each factor whose window acceptance rate left the target band has its
/// step size scaled by 1.2 (too many accepts: take bigger steps) or 0.8.
/// After [`MhController::freeze`] the step sizes never change again, so the
/// post-burn-in kernel is time-homogeneous.
#[derive(Debug, Clone)]
pub struct MhController {
    pub stepsize: Vec<f64>,
    lo: f64,
    hi: f64,
    adapting: bool,
    win_accept: Vec<u64>,
    win_propose: Vec<u64>,
    post_accept: Vec<u64>,
    post_propose: Vec<u64>,
    fallbacks: u64,
    sweep_accept: u64,
    sweep_propose: u64,
}

impl MhController {
    pub fn new(k: usize, stepsize: f64, lo: f64, hi: f64, _window: usize) -> Result<Self> {
        if !(stepsize > 0.0 && stepsize.is_finite()) {
            return Err(Error::config("stepsize must be positive"));
        }
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::config(
                "acceptance band must satisfy 0 < lo < hi < 1",
            ));
        }
        Ok(MhController {
            stepsize: vec![stepsize; k],
            lo,
            hi,
            adapting: true,
            win_accept: vec![0; k],
            win_propose: vec![0; k],
            post_accept: vec![0; k],
            post_propose: vec![0; k],
            fallbacks: 0,
            sweep_accept: 0,
            sweep_propose: 0,
        })
    }

    pub fn begin_sweep(&mut self) {
        self.sweep_accept = 0;
        self.sweep_propose = 0;
    }

    pub fn note(&mut self, k: usize, outcome: &MhOutcome) {
        self.sweep_propose += 1;
        self.sweep_accept += outcome.accepted as u64;
        if outcome.fallback {
            self.fallbacks += 1;
        }
        if self.adapting {
            self.win_propose[k] += 1;
            self.win_accept[k] += outcome.accepted as u64;
        } else {
            self.post_propose[k] += 1;
            self.post_accept[k] += outcome.accepted as u64;
        }
    }

    pub fn sweep_accept_rate(&self) -> f64 {
        if self.sweep_propose == 0 {
            f64::NAN
        } else {
            self.sweep_accept as f64 / self.sweep_propose as f64
        }
    }

    /// End of an adaptation window: nudge each factor's step size toward
    /// the target band and reset the window counters.
    pub fn adapt(&mut self) {
        if !self.adapting {
            return;
        }
        for k in 0..self.stepsize.len() {
            if self.win_propose[k] == 0 {
                continue;
            }
            let rate = self.win_accept[k] as f64 / self.win_propose[k] as f64;
            if rate > self.hi {
                self.stepsize[k] *= 1.2;
            } else if rate < self.lo {
                self.stepsize[k] *= 0.8;
            }
            self.win_accept[k] = 0;
            self.win_propose[k] = 0;
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    pub fn diagnostics(&self) -> super::MhDiagnostics {
        let rates = self
            .post_accept
            .iter()
            .zip(&self.post_propose)
            .map(|(&a, &p)| {
                if p == 0 {
                    f64::NAN
                } else {
                    a as f64 / p as f64
                }
            })
            .collect();
        super::MhDiagnostics {
            post_burn_accept: rates,
            final_stepsize: self.stepsize.clone(),
            fallback_proposals: self.fallbacks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rng(label: &str) -> RngStream {
        RngStream::new(0x31337).substream(label)
    }

    #[test]
    fn gradient_and_curvature_match_finite_differences() {
        let counts = [3u64, 1, 7];
        let cond = MarkConditional {
            a0: 2.0,
            b0: 1.5,
            n: 5.0,
            ln1mp: (0.6f64).ln(),
            counts: &counts,
        };
        let h = 1e-6;
        for &r in &[0.3, 1.0, 4.2] {
            let fd_grad = (cond.log_density(r + h) - cond.log_density(r - h)) / (2.0 * h);
            assert_relative_eq!(cond.grad(r), fd_grad, max_relative = 1e-5);
            let fd_curv = (cond.grad(r + h) - cond.grad(r - h)) / (2.0 * h);
            assert_relative_eq!(cond.curvature(r), fd_curv, max_relative = 1e-4);
        }
    }

    #[test]
    fn zero_counts_reduce_to_gamma() {
        // With no counts the conditional is Gamma(a0, b0 - n ln(1-p)).
        let cond = MarkConditional {
            a0: 3.0,
            b0: 2.0,
            n: 4.0,
            ln1mp: -0.25,
            counts: &[],
        };
        let scale = cond.exact_zero_count_scale();
        assert_relative_eq!(scale, 1.0 / 3.0, max_relative = 1e-12);
        // Newton converges to the gamma mode (a0 - 1) * scale.
        let mut r = 0.5;
        for _ in 0..50 {
            match kernel_at(&cond, r, 0.1) {
                Kernel::Newton { center, .. } => r = center,
                Kernel::Prior => panic!("curvature is strictly negative here"),
            }
        }
        assert_relative_eq!(r, 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn flat_curvature_falls_back_to_prior_kernel() {
        // a0 = 1 and no counts: g'' = 0 exactly.
        let cond = MarkConditional {
            a0: 1.0,
            b0: 1.0,
            n: 2.0,
            ln1mp: -0.5,
            counts: &[],
        };
        assert_eq!(cond.curvature(1.0), 0.0);
        assert_eq!(kernel_at(&cond, 1.0, 0.1), Kernel::Prior);
        let mut r = rng("fallback");
        let out = newton_mh_step(&mut r, &cond, 1.0, 0.1).unwrap();
        assert!(out.fallback);
    }

    #[test]
    fn overshooting_newton_recenters_on_current_point() {
        // Large r with a0 > 1: the Newton step from the 1/r^2 curvature
        // overshoots far negative, so the center falls back to r itself.
        let cond = MarkConditional {
            a0: 1.5,
            b0: 1.0,
            n: 0.0,
            ln1mp: 0.0,
            counts: &[],
        };
        let r = 50.0;
        match kernel_at(&cond, r, 0.2) {
            Kernel::Newton { center, .. } => assert_eq!(center, r),
            Kernel::Prior => panic!("curvature is negative for a0 > 1"),
        }
    }

    #[test]
    fn chain_reproduces_gamma_target_moments() {
        // Target Gamma(3, rate 2) through the MH kernel only.
        let cond = MarkConditional {
            a0: 3.0,
            b0: 2.0,
            n: 0.0,
            ln1mp: 0.0,
            counts: &[],
        };
        let mut r = rng("gamma-target");
        let mut x = 1.0;
        let mut accepted = 0u64;
        let burn = 1000;
        let n = 40_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for t in 0..(burn + n) {
            let out = newton_mh_step(&mut r, &cond, x, 0.8).unwrap();
            x = out.r;
            if t >= burn {
                accepted += out.accepted as u64;
                sum += x;
                sum2 += x * x;
            }
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((mean - 1.5).abs() < 0.05, "mean {mean}");
        assert!((var - 0.75).abs() < 0.08, "var {var}");
        let rate = accepted as f64 / n as f64;
        assert!(rate > 0.05 && rate < 0.999, "acceptance {rate}");
    }

    #[test]
    fn controller_adapts_and_freezes() {
        let mut ctrl = MhController::new(2, 0.1, 0.3, 0.45, 10).unwrap();
        let hit = MhOutcome {
            r: 1.0,
            accepted: true,
            fallback: false,
        };
        let miss = MhOutcome {
            r: 1.0,
            accepted: false,
            fallback: true,
        };
        for _ in 0..10 {
            ctrl.note(0, &hit);
            ctrl.note(1, &miss);
        }
        ctrl.adapt();
        assert_relative_eq!(ctrl.stepsize[0], 0.12);
        assert_relative_eq!(ctrl.stepsize[1], 0.08);
        assert_eq!(ctrl.fallbacks, 10);
        ctrl.freeze();
        for _ in 0..10 {
            ctrl.note(0, &hit);
        }
        ctrl.adapt();
        assert_relative_eq!(ctrl.stepsize[0], 0.12);
        let d = ctrl.diagnostics();
        assert_relative_eq!(d.post_burn_accept[0], 1.0);
        assert!(d.post_burn_accept[1].is_nan());
    }

    #[test]
    fn sweep_rate_counts_reset() {
        let mut ctrl = MhController::new(1, 0.1, 0.3, 0.45, 10).unwrap();
        assert!(ctrl.sweep_accept_rate().is_nan());
        ctrl.note(
            0,
            &MhOutcome {
                r: 1.0,
                accepted: true,
                fallback: false,
            },
        );
        ctrl.note(
            0,
            &MhOutcome {
                r: 1.0,
                accepted: false,
                fallback: false,
            },
        );
        assert_relative_eq!(ctrl.sweep_accept_rate(), 0.5);
        ctrl.begin_sweep();
        assert!(ctrl.sweep_accept_rate().is_nan());
    }
}
