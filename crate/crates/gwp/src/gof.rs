//! Goodness-of-fit helpers: Pearson chi-square test against a binned
//! reference pmf, backed by the regularized incomplete gamma function.

use crate::accum;
use crate::special::ln_gamma;
use crate::{Error, Result};

/// Relative stopping tolerance shared by the series and continued fraction.
const GAMMA_EPS: f64 = 1e-15;
/// Rescaling threshold for the Lentz-style continued fraction recurrences.
const GAMMA_BIG: f64 = 4503599627370496.0;
const GAMMA_BIG_INV: f64 = 2.220446049250313e-16;
/// exp() underflows to zero below this; short-circuits the prefactor.
const LN_UNDERFLOW: f64 = -709.782712893384;

/// Lower regularized incomplete gamma `P(a, x)` for `a > 0`, `x >= 0`.
///
/// Power series in the region `x <= 1 || x <= a`, Legendre continued
/// fraction elsewhere; both stop at relative change `1e-15`.
pub(crate) fn gamma_lr(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && a.is_finite(), "gamma_lr shape {a}");
    debug_assert!(x >= 0.0 && x.is_finite(), "gamma_lr argument {x}");
    if x == 0.0 {
        return 0.0;
    }
    let ax = a * x.ln() - x - ln_gamma(a);
    if ax < LN_UNDERFLOW {
        return if a < x { 1.0 } else { 0.0 };
    }
    if x <= 1.0 || x <= a {
        let mut r = a;
        let mut c = 1.0;
        let mut sum = 1.0;
        loop {
            r += 1.0;
            c *= x / r;
            sum += c;
            if c / sum <= GAMMA_EPS {
                break;
            }
        }
        return ax.exp() * sum / a;
    }
    1.0 - ax.exp() * upper_continued_fraction(a, x)
}

/// Upper regularized incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub(crate) fn gamma_ur(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && a.is_finite(), "gamma_ur shape {a}");
    debug_assert!(x >= 0.0 && x.is_finite(), "gamma_ur argument {x}");
    if x == 0.0 {
        return 1.0;
    }
    if x < 1.0 || x <= a {
        return 1.0 - gamma_lr(a, x);
    }
    let ax = a * x.ln() - x - ln_gamma(a);
    if ax < LN_UNDERFLOW {
        return if a < x { 0.0 } else { 1.0 };
    }
    ax.exp() * upper_continued_fraction(a, x)
}

/// Continued fraction for `Q(a, x) * Gamma(a) / (x^a e^-x)`, valid for
/// `x > 1 && x > a`.
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut y = 1.0 - a;
    let mut z = x + y + 1.0;
    let mut c = 0.0;
    let mut pkm2 = 1.0;
    let mut qkm2 = x;
    let mut pkm1 = x + 1.0;
    let mut qkm1 = z * x;
    let mut ans = pkm1 / qkm1;
    loop {
        y += 1.0;
        z += 2.0;
        c += 1.0;
        let yc = y * c;
        let pk = pkm1 * z - pkm2 * yc;
        let qk = qkm1 * z - qkm2 * yc;
        pkm2 = pkm1;
        pkm1 = pk;
        qkm2 = qkm1;
        qkm1 = qk;
        if pk.abs() > GAMMA_BIG {
            pkm2 *= GAMMA_BIG_INV;
            pkm1 *= GAMMA_BIG_INV;
            qkm2 *= GAMMA_BIG_INV;
            qkm1 *= GAMMA_BIG_INV;
        }
        if qk != 0.0 {
            let r = pk / qk;
            let t = ((ans - r) / r).abs();
            ans = r;
            if t <= GAMMA_EPS {
                return ans;
            }
        }
    }
}

/// Result of a Pearson chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOutcome {
    /// Pearson statistic `sum (O - E)^2 / E`.
    pub statistic: f64,
    /// Degrees of freedom, `bins - 1`.
    pub dof: usize,
    /// Upper tail probability of the chi-square law at the statistic.
    pub p_value: f64,
}

/// Pearson chi-square test of binned observations against bin probabilities.
///
/// `probs` must be strictly positive and sum to 1 within 1e-8; expected
/// counts below 5 in any bin make the asymptotic p-value unreliable, so the
/// caller is expected to pool bins first (rejected here to fail loudly).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareOutcome> {
    if observed.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            what: "observed bins vs probabilities",
            expected: probs.len(),
            got: observed.len(),
        });
    }
    if probs.len() < 2 {
        return Err(Error::domain(
            "chi-square test",
            format!("need at least 2 bins, got {}", probs.len()),
        ));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::domain(
                "chi-square test",
                format!("bin {i} probability {p} not in (0, inf)"),
            ));
        }
    }
    let mass = accum::sum(probs);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::domain(
            "chi-square test",
            format!("bin probabilities sum to {mass}, expected 1"),
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientSample { need: 1, got: 0 });
    }
    let nf = n as f64;
    let mut stat = accum::CompensatedSum::new();
    for (i, (&o, &p)) in observed.iter().zip(probs).enumerate() {
        let expected = nf * p;
        if expected < 5.0 {
            return Err(Error::domain(
                "chi-square test",
                format!("expected count {expected:.3} in bin {i} below 5; pool bins"),
            ));
        }
        let d = o as f64 - expected;
        stat.add(d * d / expected);
    }
    let statistic = stat.value();
    let dof = probs.len() - 1;
    let p_value = gamma_ur(dof as f64 / 2.0, statistic / 2.0);
    Ok(ChiSquareOutcome {
        statistic,
        dof,
        p_value,
    })
}
