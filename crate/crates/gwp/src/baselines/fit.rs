//! Moment-based fitting of the three-parameter count law from a replicate
//! sample at one fixed cell volume.
//!
//! The sample mean and the descending factorial moments of orders 2 and 3
//! determine `(a, k*volume, rho)` through a linear solve for `rho` followed
//! by a quadratic for the symmetric pair. The pair is only identifiable up
//! to order (the law is symmetric in `a` and the shape), so the result is
//! canonicalized to `a_hat <= k_hat` whenever the volume scaling permits.

use serde::Serialize;

use crate::{Error, Result};

const MIN_SAMPLE: usize = 1000;

/// Outcome of a moment fit. Estimates are present only when `converged`;
/// `matched_moments` always reports the sample mean and the descending
/// factorial moments of orders 2 and 3 that the solve targeted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub a_hat: Option<f64>,
    pub k_hat: Option<f64>,
    pub rho_hat: Option<f64>,
    pub matched_moments: [f64; 3],
    /// Whether `a_hat <= k_hat` holds; a volume above 1 can make both
    /// orderings of the symmetric pair non-canonical.
    pub canonical: bool,
    pub converged: bool,
    pub note: Option<String>,
}

impl FitResult {
    fn failed(moments: [f64; 3], note: &str) -> Self {
        FitResult {
            a_hat: None,
            k_hat: None,
            rho_hat: None,
            matched_moments: moments,
            canonical: false,
            converged: false,
            note: Some(note.to_string()),
        }
    }
}

/// Exact sufficient statistics: sums of `x`, `x(x-1)`, `x(x-1)(x-2)` in
/// 128-bit integers, so the fit is a function of the multiset of counts
/// only and permuting the sample cannot change any output bit.
fn factorial_sums(counts: &[u64]) -> Result<(u128, u128, u128)> {
    let mut s1: u128 = 0;
    let mut s2: u128 = 0;
    let mut s3: u128 = 0;
    for &x in counts {
        let x = x as u128;
        s1 = s1
            .checked_add(x)
            .ok_or_else(|| Error::domain("fit_moments", "sum of counts overflows u128"))?;
        if x >= 2 {
            let pair = x * (x - 1);
            s2 = s2
                .checked_add(pair)
                .ok_or_else(|| Error::domain("fit_moments", "second factorial sum overflows"))?;
            if x >= 3 {
                let triple = pair
                    .checked_mul(x - 2)
                    .ok_or_else(|| Error::domain("fit_moments", "third factorial term overflows"))?;
                s3 = s3.checked_add(triple).ok_or_else(|| {
                    Error::domain("fit_moments", "third factorial sum overflows")
                })?;
            }
        }
    }
    Ok((s1, s2, s3))
}

enum Solve {
    Converged { rho: f64, pair: (f64, f64) },
    Failed(&'static str),
}

/// Solves the moment system given the three sample factorial moments.
///
/// With `u = m2/m1` and `w = m3/m2` the model implies
/// `rho (w - 2u + m1) = 3w - 4u + m1 + 2`, then the symmetric pair solves
/// `t^2 - S t + P` with `P = m1 (rho - 1)` and `S = u (rho - 2) - P - 1`.
fn solve_moment_system(m1: f64, m2: f64, m3: f64) -> Solve {
    let u = m2 / m1;
    let w = m3 / m2;
    let den = w - 2.0 * u + m1;
    let rho = (3.0 * w - 4.0 * u + m1 + 2.0) / den;
    if !rho.is_finite() {
        return Solve::Failed("moment system is singular (consistent with Poisson-like data)");
    }
    if rho <= 3.0 {
        return Solve::Failed("implied rho <= 3, where the third moment does not exist");
    }
    let p = m1 * (rho - 1.0);
    let s = u * (rho - 2.0) - p - 1.0;
    let disc = s * s - 4.0 * p;
    if disc < 0.0 {
        return Solve::Failed("moment system has no real solution for the shape pair");
    }
    let root = disc.sqrt();
    let pair = ((s - root) / 2.0, (s + root) / 2.0);
    if !(pair.0 > 0.0 && pair.1.is_finite()) {
        return Solve::Failed("moment system implies a nonpositive shape");
    }
    Solve::Converged { rho, pair }
}

/// Fits `(a, k, rho)` to replicate counts observed on cells of the given
/// volume by matching mean and descending factorial moments of orders 2
/// and 3. Failure to solve is reported in-band through `converged`, not as
/// an error; only malformed input errors out.
pub fn fit_moments(counts: &[u64], volume: f64) -> Result<FitResult> {
    if counts.len() < MIN_SAMPLE {
        return Err(Error::InsufficientSample {
            need: MIN_SAMPLE,
            got: counts.len(),
        });
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid(
            "volume",
            format!("must be positive and finite, got {volume}"),
        ));
    }
    let (s1, s2, s3) = factorial_sums(counts)?;
    let n = counts.len() as f64;
    let m1 = s1 as f64 / n;
    let m2 = s2 as f64 / n;
    let m3 = s3 as f64 / n;
    let moments = [m1, m2, m3];
    if s1 == 0 {
        return Ok(FitResult::failed(moments, "all counts are zero"));
    }
    if s2 == 0 {
        return Ok(FitResult::failed(
            moments,
            "no count exceeds 1; second factorial moment vanishes",
        ));
    }
    match solve_moment_system(m1, m2, m3) {
        Solve::Failed(note) => Ok(FitResult::failed(moments, note)),
        Solve::Converged { rho, pair } => {
            let (lo, hi) = pair;
            let (a_hat, k_hat) = (lo, hi / volume);
            let canonical = a_hat <= k_hat;
            Ok(FitResult {
                a_hat: Some(a_hat),
                k_hat: Some(k_hat),
                rho_hat: Some(rho),
                matched_moments: moments,
                canonical,
                converged: true,
                note: if canonical {
                    None
                } else {
                    Some(
                        "volume scaling leaves no ordering with a_hat <= k_hat; \
                         reporting a_hat as the smaller of the symmetric pair"
                            .to_string(),
                    )
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::GwdParams;
    use crate::stream::replicate_rng;

    #[test]
    fn solver_inverts_exact_moments() {
        // (a, kappa, rho) = (2, 3, 5): m1 = 6/4, m2 = 2*3*3*4/(4*3),
        // m3 = 2*3*4*3*4*5/(4*3*2).
        let Solve::Converged { rho, pair } = solve_moment_system(1.5, 6.0, 60.0) else {
            panic!("exact moments must solve");
        };
        assert!((rho - 5.0).abs() < 1e-12);
        assert!((pair.0 - 2.0).abs() < 1e-12);
        assert!((pair.1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solver_rejects_poisson_moments() {
        // Poisson factorial moments are lambda^r: the rho solve divides by
        // an exact zero.
        assert!(matches!(
            solve_moment_system(2.0, 4.0, 8.0),
            Solve::Failed(_)
        ));
    }

    #[test]
    fn recovers_simulated_parameters() {
        // The solve amplifies moment noise heavily (the third factorial
        // moment estimator is itself heavy-tailed), so recovery tests run
        // at 10^6 draws under a frozen stream. rho = 8 keeps the estimator
        // variance finite; the rho = 5 case runs in the acceptance suite.
        let law = GwdParams::new(2.0, 3.0, 8.0).unwrap();
        let mut rng = replicate_rng(31, 0);
        let counts = law.sample_n(1_000_000, &mut rng);
        let fit = fit_moments(&counts, 1.0).unwrap();
        assert!(fit.converged, "note: {:?}", fit.note);
        assert!(fit.canonical);
        let (a, k, r) = (
            fit.a_hat.unwrap(),
            fit.k_hat.unwrap(),
            fit.rho_hat.unwrap(),
        );
        assert!((a - 2.0).abs() / 2.0 < 0.10, "a_hat {a}");
        assert!((k - 3.0).abs() / 3.0 < 0.10, "k_hat {k}");
        assert!((r - 8.0).abs() / 8.0 < 0.05, "rho_hat {r}");
    }

    #[test]
    fn volume_rescales_shape_only() {
        let law = GwdParams::new(2.0, 3.0, 8.0).unwrap();
        let mut rng = replicate_rng(31, 1);
        let counts = law.sample_n(200_000, &mut rng);
        let unit = fit_moments(&counts, 1.0).unwrap();
        assert!(unit.converged, "note: {:?}", unit.note);
        let quartered = fit_moments(&counts, 4.0).unwrap();
        assert!(quartered.converged);
        assert_eq!(unit.a_hat, quartered.a_hat);
        assert_eq!(unit.rho_hat, quartered.rho_hat);
        assert!((quartered.k_hat.unwrap() - unit.k_hat.unwrap() / 4.0).abs() < 1e-12);
        // kappa_hat ~ 3 at volume 4 gives k_hat well below a_hat even with
        // estimator wobble: no canonical ordering exists.
        assert!(!quartered.canonical);
        assert!(quartered.note.is_some());
    }

    #[test]
    fn fit_is_permutation_invariant_to_the_bit() {
        let law = GwdParams::new(1.0, 2.0, 4.5).unwrap();
        let mut rng = replicate_rng(32, 0);
        let counts = law.sample_n(5_000, &mut rng);
        let mut rotated = counts.clone();
        rotated.rotate_left(1234);
        rotated.reverse();
        let a = fit_moments(&counts, 1.0).unwrap();
        let b = fit_moments(&rotated, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.a_hat.map(f64::to_bits),
            b.a_hat.map(f64::to_bits)
        );
        assert_eq!(
            a.rho_hat.map(f64::to_bits),
            b.rho_hat.map(f64::to_bits)
        );
    }

    #[test]
    fn poisson_data_is_flagged_not_asserted() {
        let mut rng = replicate_rng(33, 0);
        let counts: Vec<u64> = (0..100_000)
            .map(|_| crate::dist::poisson_count(2.0, &mut rng))
            .collect();
        let fit = fit_moments(&counts, 1.0).unwrap();
        if fit.converged {
            let (a, k, r) = (
                fit.a_hat.unwrap(),
                fit.k_hat.unwrap(),
                fit.rho_hat.unwrap(),
            );
            assert!(r > 50.0, "Poisson data implied small rho {r}");
            let mean = a * k / (r - 1.0);
            assert!((mean - 2.0).abs() < 0.2, "implied mean {mean}");
        } else {
            assert!(fit.note.is_some());
        }
    }

    #[test]
    fn degenerate_and_malformed_samples() {
        assert!(matches!(
            fit_moments(&[1, 2, 3], 1.0),
            Err(Error::InsufficientSample { need: 1000, got: 3 })
        ));
        let zeros = vec![0u64; 2000];
        let fit = fit_moments(&zeros, 1.0).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.matched_moments, [0.0, 0.0, 0.0]);
        let binary: Vec<u64> = (0..2000).map(|i| i % 2).collect();
        let fit = fit_moments(&binary, 1.0).unwrap();
        assert!(!fit.converged);
        assert!(fit.note.unwrap().contains("second factorial moment"));
        assert!(fit_moments(&zeros, 0.0).is_err());
        assert!(fit_moments(&zeros, f64::NAN).is_err());
    }
}
