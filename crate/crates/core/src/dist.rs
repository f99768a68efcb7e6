//! Validated sampling primitives on top of `rand_distr`.
//!
//! These wrappers exist for three reasons: every draw goes through an
//! [`RngStream`] so runs are replayable; arguments are validated and return
//! structured errors instead of panicking; and the handful of numeric guards
//! the samplers rely on live in one place:
//!
//! * gamma draws are floored at `f64::MIN_POSITIVE` (tiny shapes underflow),
//! * beta draws are clamped to `[1e-16, 1 - 1e-16]`,
//! * the negative-binomial odds `p / (1 - p)` are capped at 1e15.
//!
//! The negative binomial is drawn by composition: a gamma-distributed rate
//! fed into a Poisson, which is also exactly how the factor models use it.

use rand_distr::{Binomial, Distribution, Gamma, Hypergeometric, Normal, Poisson};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::ln_gamma_raw;

pub const BETA_FLOOR: f64 = 1e-16;
pub const BETA_CEIL: f64 = 1.0 - 1e-16;
/// Cap on p / (1 - p) when composing gamma-Poisson draws.
pub const ODDS_CAP: f64 = 1e15;
/// Largest Poisson rate we hand to the backend sampler.
const POISSON_RATE_CAP: f64 = 1e18;

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

/// Gamma draw with the (shape, scale) convention; mean = shape * scale.
/// Shapes below one are handled by the backend's boost; results are floored
/// at the smallest positive double so downstream ratios stay defined.
pub fn sample_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> Result<f64> {
    require(shape.is_finite() && shape > 0.0, || {
        format!("gamma shape must be positive, got {shape}")
    })?;
    require(scale.is_finite() && scale > 0.0, || {
        format!("gamma scale must be positive, got {scale}")
    })?;
    let g = Gamma::new(shape, scale).map_err(|e| Error::numeric(format!("gamma setup: {e}")))?;
    Ok(g.sample(rng).max(f64::MIN_POSITIVE))
}

/// Beta draw as a ratio of two gamma draws, clamped to the open unit
/// interval at 1e-16 from either end.
pub fn sample_beta(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    let x = sample_gamma(rng, a, 1.0)?;
    let y = sample_gamma(rng, b, 1.0)?;
    Ok((x / (x + y)).clamp(BETA_FLOOR, BETA_CEIL))
}

/// Dirichlet draw by gamma normalization. `alphas` must all be positive.
pub fn sample_dirichlet(rng: &mut RngStream, alphas: &[f64]) -> Result<Vec<f64>> {
    require(!alphas.is_empty(), || {
        "dirichlet needs at least one component".into()
    })?;
    let mut out = Vec::with_capacity(alphas.len());
    let mut total = 0.0;
    for &a in alphas {
        let g = sample_gamma(rng, a, 1.0)?;
        total += g;
        out.push(g);
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::numeric(format!(
            "dirichlet normalizer degenerate: {total}"
        )));
    }
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Multinomial draw by sequential conditional binomials: O(len) work per
/// call instead of one categorical draw per trial. `weights` need not be
/// normalized; they must be finite, non-negative, with a positive sum.
pub fn sample_multinomial(rng: &mut RngStream, n: u64, weights: &[f64]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; weights.len()];
    multinomial_into(rng, n, weights, &mut out)?;
    Ok(out)
}

pub(crate) fn multinomial_into(
    rng: &mut RngStream,
    n: u64,
    weights: &[f64],
    out: &mut [u64],
) -> Result<()> {
    debug_assert_eq!(weights.len(), out.len());
    require(!weights.is_empty(), || {
        "multinomial needs at least one cell".into()
    })?;
    let mut remaining_weight = 0.0;
    for &w in weights {
        require(w.is_finite() && w >= 0.0, || {
            format!("multinomial weights must be finite and non-negative, got {w}")
        })?;
        remaining_weight += w;
    }
    require(remaining_weight > 0.0 || n == 0, || {
        "multinomial weights sum to zero with trials remaining".into()
    })?;

    out.fill(0);
    let mut remaining = n;
    let last = weights.len() - 1;
    for (k, &w) in weights[..last].iter().enumerate() {
        if remaining == 0 {
            return Ok(());
        }
        if remaining_weight <= 0.0 {
            // Floating-point drain; dump the rest into the current cell.
            out[k] = remaining;
            return Ok(());
        }
        let q = (w / remaining_weight).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::numeric(format!("binomial setup: {e}")))?
            .sample(rng);
        out[k] = draw;
        remaining -= draw;
        remaining_weight -= w;
    }
    out[last] = remaining;
    Ok(())
}

/// Poisson draw; rate zero gives zero. Valid well past rates of 1e9.
pub fn sample_poisson(rng: &mut RngStream, rate: f64) -> Result<u64> {
    require(rate.is_finite() && rate >= 0.0, || {
        format!("poisson rate must be finite and non-negative, got {rate}")
    })?;
    if rate == 0.0 {
        return Ok(0);
    }
    let rate = if rate > POISSON_RATE_CAP {
        log::warn!("poisson rate {rate} capped at {POISSON_RATE_CAP}");
        POISSON_RATE_CAP
    } else {
        rate
    };
    let d = Poisson::new(rate).map_err(|e| Error::numeric(format!("poisson setup: {e}")))?;
    Ok(d.sample(rng).round() as u64)
}

/// Negative binomial draw by gamma-Poisson composition: a rate from
/// Gamma(r, p/(1-p)) fed into a Poisson. Mean r p/(1-p), VMR 1/(1-p).
pub fn sample_negative_binomial(rng: &mut RngStream, r: f64, p: f64) -> Result<u64> {
    require(r.is_finite() && r > 0.0, || {
        format!("negative binomial r must be positive, got {r}")
    })?;
    require(p > 0.0 && p < 1.0, || {
        format!("negative binomial p must lie in (0,1), got {p}")
    })?;
    let odds = (p / (1.0 - p)).min(ODDS_CAP);
    let rate = sample_gamma(rng, r, odds)?;
    sample_poisson(rng, rate.min(POISSON_RATE_CAP))
}

pub fn sample_binomial(rng: &mut RngStream, n: u64, p: f64) -> Result<u64> {
    require((0.0..=1.0).contains(&p), || {
        format!("binomial p must lie in [0,1], got {p}")
    })?;
    let d = Binomial::new(n, p).map_err(|e| Error::numeric(format!("binomial setup: {e}")))?;
    Ok(d.sample(rng))
}

pub fn sample_normal(rng: &mut RngStream, mean: f64, sd: f64) -> Result<f64> {
    require(sd.is_finite() && sd > 0.0, || {
        format!("normal sd must be positive, got {sd}")
    })?;
    let d = Normal::new(mean, sd).map_err(|e| Error::numeric(format!("normal setup: {e}")))?;
    Ok(d.sample(rng))
}

/// Number of marked items among `draws` taken without replacement from a
/// population of `total` containing `marked` marked items.
pub fn sample_hypergeometric(
    rng: &mut RngStream,
    total: u64,
    marked: u64,
    draws: u64,
) -> Result<u64> {
    require(marked <= total && draws <= total, || {
        format!(
            "hypergeometric needs marked <= total and draws <= total, got {marked}/{draws}/{total}"
        )
    })?;
    let d = Hypergeometric::new(total, marked, draws)
        .map_err(|e| Error::numeric(format!("hypergeometric setup: {e}")))?;
    Ok(d.sample(rng))
}

/// log pmf of the negative binomial at k, parameterized as above.
pub fn nb_log_pmf(k: u64, r: f64, p: f64) -> Result<f64> {
    require(r.is_finite() && r > 0.0, || {
        format!("nb_log_pmf r must be positive, got {r}")
    })?;
    require(p > 0.0 && p < 1.0, || {
        format!("nb_log_pmf p must lie in (0,1), got {p}")
    })?;
    let kf = k as f64;
    Ok(
        ln_gamma_raw(kf + r) - ln_gamma_raw(r) - ln_gamma_raw(kf + 1.0)
            + r * (-p).ln_1p()
            + kf * p.ln(),
    )
}
