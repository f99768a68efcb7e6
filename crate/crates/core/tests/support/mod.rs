//! Shared statistical helpers for the acceptance suite: all oracles here are
//! implemented from scratch so the tests do not lean on the library code
//! they are checking.

/// n log-spaced points between 10^lo and 10^hi inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean for independent draws.
pub fn iid_se(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the mean for an autocorrelated series, by batch means
/// with roughly sqrt(n) batches.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 16, "batch means needs a longer series");
    let n_batches = (n as f64).sqrt().floor() as usize;
    let len = n / n_batches;
    let batch_means: Vec<f64> = (0..n_batches)
        .map(|b| mean(&xs[b * len..(b + 1) * len]))
        .collect();
    (variance(&batch_means) / n_batches as f64).sqrt()
}

/// One-sample Kolmogorov-Smirnov statistic against a distribution function.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("samples must be comparable"));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov p-value (Kolmogorov distribution tail with
/// the Stephens small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0f64;
    for j in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(j - 1) * (-2.0 * (j as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// ln Gamma by the Lanczos expansion (g = 7, n = 9), independent of the
/// library's implementation.
pub fn ln_gamma_oracle(x: f64) -> f64 {
    #[allow(clippy::excessive_precision)] // published table values, kept verbatim
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the expansion on its accurate side.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma_oracle(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// continued fraction otherwise.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let ln_pre = a * x.ln() - x - ln_gamma_oracle(a);
    if x < a + 1.0 {
        // Series: P(a,x) = x^a e^-x / Gamma(a) * sum_n x^n / (a)_{n+1}
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * ln_pre.exp()
    } else {
        // Lentz continued fraction for Q(a,x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - ln_pre.exp() * h
    }
}

/// Gamma(shape, scale) distribution function.
pub fn gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        reg_lower_gamma(shape, x / scale)
    }
}
