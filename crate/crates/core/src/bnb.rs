//! The beta-negative-binomial random measure: finite approximation, atom
//! draws, conjugate updates, and a buffet-style customer simulator.
//!
//! A draw from the process is a countable set of atoms, each carrying a
//! weight p in (0, 1) and a mark r > 0; customer counts at an atom are
//! negative binomial NB(r, p). The improper beta-process Levy density
//! c p^-1 (1-p)^(c-1) has infinite mass, so we work with the two-parameter
//! tilting
//!
//!   c p^(c eps - 1) (1 - p)^(c (1 - eps) - 1),   0 < eps < 1/2,
//!
//! whose total mass c gamma alpha B(c eps, c (1 - eps)) is finite and which
//! recovers the improper density pointwise as eps -> 0. Atom weights under
//! the approximation are Beta(c eps, c (1 - eps)); marks come from a base
//! measure with total mass `gamma_mass`, either Gamma(shape, scale) or a
//! point mass.
//!
//! `new_dish_rate` gives the expected number of previously untouched atoms
//! the (n+1)-th customer activates under the limiting process; with a unit
//! point-mass mark it collapses to alpha c / (c + n), and in general it is
//! evaluated by tanh-sinh quadrature after removing the p -> 0 cancellation
//! with expm1/log1p.

use rand::Rng;

use crate::dist::{sample_beta, sample_gamma, sample_negative_binomial, sample_poisson};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_positive_axis, integrate_unit};
use crate::rng::RngStream;
use crate::special::{beta_function, ln_gamma_raw};

/// Base measure for atom marks. Total mass lives in [`BnbHyper::gamma_mass`];
/// this describes the normalized shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkMeasure {
    Gamma { shape: f64, scale: f64 },
    Point { r: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct BnbHyper {
    /// Beta-process concentration c > 0.
    pub c: f64,
    /// Outer mass multiplier (the buffet's alpha).
    pub alpha: f64,
    /// Total mass of the mark base measure.
    pub gamma_mass: f64,
    /// Approximation parameter, 0 < eps < 1/2.
    pub eps: f64,
    pub mark: MarkMeasure,
}

impl BnbHyper {
    /// c = alpha = gamma = 1 with a Gamma(1, 1) mark.
    pub fn standard(eps: f64) -> Self {
        BnbHyper {
            c: 1.0,
            alpha: 1.0,
            gamma_mass: 1.0,
            eps,
            mark: MarkMeasure::Gamma {
                shape: 1.0,
                scale: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        pos("c", self.c)?;
        pos("alpha", self.alpha)?;
        pos("gamma_mass", self.gamma_mass)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::domain(format!(
                "eps must lie in (0, 1/2), got {}",
                self.eps
            )));
        }
        match self.mark {
            MarkMeasure::Gamma { shape, scale } => {
                pos("mark shape", shape)?;
                pos("mark scale", scale)
            }
            MarkMeasure::Point { r } => pos("mark location", r),
        }
    }

    /// Beta parameters of an atom weight under the approximation.
    pub fn weight_beta_params(&self) -> (f64, f64) {
        (self.c * self.eps, self.c * (1.0 - self.eps))
    }
}

/// Atoms of one process draw: parallel weight and mark vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbAtoms {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
}

impl BnbAtoms {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Total mass of the approximate Levy measure:
/// c gamma alpha B(c eps, c (1 - eps)).
pub fn eps_levy_mass(h: &BnbHyper) -> Result<f64> {
    h.validate()?;
    let (a, b) = h.weight_beta_params();
    Ok(h.c * h.gamma_mass * h.alpha * beta_function(a, b)?)
}

/// Weight-marginal density of the approximate Levy measure at p (mark and
/// mass factors excluded; integrates to `eps_levy_mass / (gamma alpha)`).
pub fn eps_levy_density(h: &BnbHyper, p: f64) -> Result<f64> {
    h.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "density argument must lie in (0,1), got {p}"
        )));
    }
    let (a, b) = h.weight_beta_params();
    Ok(h.c * ((a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p()).exp())
}

/// Smallest truncation level that carries the approximation's full mass in
/// expectation (deterministic alternative to drawing the atom count).
pub fn truncation_level(h: &BnbHyper) -> Result<usize> {
    Ok(eps_levy_mass(h)?.ceil() as usize)
}

/// Draw the finite approximation: a Poisson number of atoms with
/// Beta(c eps, c (1 - eps)) weights and base-measure marks.
pub fn draw_eps_bp(h: &BnbHyper, rng: &mut RngStream) -> Result<BnbAtoms> {
    let mass = eps_levy_mass(h)?;
    let k = sample_poisson(rng, mass)? as usize;
    let (a, b) = h.weight_beta_params();
    let mut p = Vec::with_capacity(k);
    let mut r = Vec::with_capacity(k);
    for _ in 0..k {
        p.push(sample_beta(rng, a, b)?);
        r.push(match h.mark {
            MarkMeasure::Gamma { shape, scale } => sample_gamma(rng, shape, scale)?,
            MarkMeasure::Point { r } => r,
        });
    }
    Ok(BnbAtoms { p, r })
}

/// One customer's counts across the atoms: kappa_k ~ NB(r_k, p_k).
pub fn draw_nbp(atoms: &BnbAtoms, rng: &mut RngStream) -> Result<Vec<u64>> {
    atoms
        .p
        .iter()
        .zip(&atoms.r)
        .map(|(&p, &r)| sample_negative_binomial(rng, r, p))
        .collect()
}

/// Beta parameters of the weight posterior after n customers produced a
/// total count of m_nk at an atom with mark r_k: Beta(m_nk, c + n r_k).
/// The first parameter is zero when the atom was never used; the posterior
/// is then degenerate at 0, matching the process's thinning behavior.
pub fn posterior_p_params(m_nk: u64, n: u64, r_k: f64, c: f64) -> Result<(f64, f64)> {
    if !(c.is_finite() && c > 0.0) || !(r_k.is_finite() && r_k > 0.0) {
        return Err(Error::domain(format!(
            "posterior_p_params needs positive c and r_k, got c={c}, r_k={r_k}"
        )));
    }
    Ok((m_nk as f64, c + n as f64 * r_k))
}

/// Integrand core of the new-dish rate for a fixed mark r:
/// int_0^1 c (1 - (1-p)^r) p^-1 (1-p)^(c + n r - 1) dp.
fn weight_integral(c: f64, n: u64, r: f64, abs_tol: f64) -> Result<f64> {
    let tail_exp = c + n as f64 * r - 1.0;
    integrate_unit(
        |p, pc| {
            // ln(1-p) from whichever side is exact.
            let l = if p <= 0.5 { (-p).ln_1p() } else { pc.ln() };
            let touched = -(r * l).exp_m1(); // 1 - (1-p)^r, exact near p = 0
            if touched == 0.0 {
                return 0.0;
            }
            // Assemble in log space; cap to dodge overflow at the far
            // endpoint when c + n r < 1 (the capped region's true
            // contribution is below any tolerance we use).
            let ln_f = c.ln() + touched.ln() - p.ln() + tail_exp * l;
            ln_f.min(700.0).exp()
        },
        abs_tol,
    )
}

/// Expected number of new dishes for customer n + 1 under the limiting
/// process, n being the number of customers already seen. With a unit
/// point mark this is alpha gamma c / (c + n) in closed form; otherwise the
/// mark measure is integrated numerically to about 1e-8 absolute.
pub fn new_dish_rate(h: &BnbHyper, n: u64) -> Result<f64> {
    h.validate()?;
    let outer = h.alpha * h.gamma_mass;
    match h.mark {
        MarkMeasure::Point { r } if (r - 1.0).abs() <= 1e-12 => Ok(outer * h.c / (h.c + n as f64)),
        MarkMeasure::Point { r } => Ok(outer * weight_integral(h.c, n, r, 1e-10)?),
        MarkMeasure::Gamma { shape, scale } => {
            let ln_norm = ln_gamma_raw(shape) + shape * scale.ln();
            let mut inner_err: Option<Error> = None;
            let value = integrate_positive_axis(
                |r| {
                    if inner_err.is_some() {
                        return 0.0;
                    }
                    let ln_pdf = (shape - 1.0) * r.ln() - r / scale - ln_norm;
                    if ln_pdf < -740.0 {
                        return 0.0;
                    }
                    match weight_integral(h.c, n, r, 1e-11) {
                        Ok(v) => v * ln_pdf.exp(),
                        Err(e) => {
                            inner_err = Some(e);
                            0.0
                        }
                    }
                },
                1e-9,
            )?;
            if let Some(e) = inner_err {
                return Err(e);
            }
            Ok(outer * value)
        }
    }
}

/// One multi-scoop buffet simulation.
#[derive(Debug, Clone)]
pub struct MsibpDraw {
    pub atoms: BnbAtoms,
    /// Per customer: sparse (atom index, count) pairs for positive counts.
    pub counts: Vec<Vec<(usize, u64)>>,
    /// Per customer: number of atoms first touched by that customer.
    pub new_dishes: Vec<u64>,
}

/// Simulate `n_customers` successive customers against a single draw of the
/// finite approximation. Each customer's count at each atom is NB(r, p);
/// a dish is "new" for the first customer whose count there is positive.
pub fn simulate_msibp(h: &BnbHyper, n_customers: usize, rng: &mut RngStream) -> Result<MsibpDraw> {
    let atoms = draw_eps_bp(h, rng)?;
    let k = atoms.len();
    let mut touched = vec![false; k];
    let mut counts = Vec::with_capacity(n_customers);
    let mut new_dishes = Vec::with_capacity(n_customers);

    // P(kappa >= 1) per atom, and the log survival pieces, precomputed once.
    let hit_prob: Vec<f64> = atoms
        .p
        .iter()
        .zip(&atoms.r)
        .map(|(&p, &r)| -(r * (-p).ln_1p()).exp_m1())
        .collect();

    for _ in 0..n_customers {
        let mut row = Vec::new();
        let mut new_here = 0u64;
        for idx in 0..k {
            let q = hit_prob[idx];
            if q <= 0.0 {
                continue;
            }
            // Decide zero/positive first; almost every atom has vanishing
            // weight, so this keeps the sweep linear in the atom count.
            if rng.random::<f64>() >= q {
                continue;
            }
            let kappa = draw_nb_positive(rng, atoms.r[idx], atoms.p[idx], q)?;
            if !touched[idx] {
                touched[idx] = true;
                new_here += 1;
            }
            row.push((idx, kappa));
        }
        counts.push(row);
        new_dishes.push(new_here);
    }
    Ok(MsibpDraw {
        atoms,
        counts,
        new_dishes,
    })
}

/// NB(r, p) conditioned on being >= 1. For a decent hit probability,
/// rejection from the unconditional law is cheap; deep in the tail (tiny p)
/// a pmf walk from k = 1 terminates almost immediately.
fn draw_nb_positive(rng: &mut RngStream, r: f64, p: f64, hit_prob: f64) -> Result<u64> {
    debug_assert!(hit_prob > 0.0);
    if hit_prob > 0.05 {
        loop {
            let k = sample_negative_binomial(rng, r, p)?;
            if k > 0 {
                return Ok(k);
            }
        }
    }
    let surv = (r * (-p).ln_1p()).exp(); // (1-p)^r
    let mut f = r * p * surv; // pmf at 1
    let u = rng.random::<f64>() * hit_prob;
    let mut k = 1u64;
    let mut cum = f;
    while cum < u {
        f *= p * (r + k as f64) / (k + 1) as f64;
        k += 1;
        cum += f;
        if k > 10_000_000 {
            return Err(Error::numeric("truncated NB walk failed to terminate"));
        }
    }
    Ok(k)
}
