//! Convergence experiments: the count law approaches a negative binomial as
//! the cell shape grows with `rho = c k`, and that negative binomial in turn
//! approaches Poisson as `c` grows with `a = lambda c`. Distances are
//! computed by streaming both pmfs term by term, so no full tables are
//! materialized even when the heavy-tailed side needs tens of millions of
//! terms.

use serde::Serialize;

use crate::accum::CompensatedSum;
use crate::dist::GwdParams;
use crate::{Error, Result};

/// Stop once the unassigned mass on both sides is below this; the reported
/// distance is then exact to within half of it.
const TAIL_TOL: f64 = 1e-7;

/// Hard cap on streamed terms. Tails decay like `n^-rho`, so small `rho`
/// can genuinely exhaust this; the error says so rather than spinning.
const MAX_STREAM_TERMS: usize = 200_000_000;

/// One row of a convergence table: the swept parameter and the total
/// variation distance to the limit law at that value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPoint {
    pub param: f64,
    pub tv: f64,
}

struct NbTerms {
    r: f64,
    q: f64,
    n: f64,
    term: f64,
}

impl NbTerms {
    fn new(r: f64, p: f64) -> Self {
        NbTerms {
            r,
            q: 1.0 - p,
            n: 0.0,
            term: (r * p.ln()).exp(),
        }
    }
}

impl Iterator for NbTerms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.term;
        self.term *= (self.r + self.n) * self.q / (self.n + 1.0);
        self.n += 1.0;
        Some(out)
    }
}

struct PoissonTerms {
    mean: f64,
    n: f64,
    term: f64,
}

impl PoissonTerms {
    fn new(mean: f64) -> Self {
        PoissonTerms {
            mean,
            n: 0.0,
            term: (-mean).exp(),
        }
    }
}

impl Iterator for PoissonTerms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.term;
        self.term *= self.mean / (self.n + 1.0);
        self.n += 1.0;
        Some(out)
    }
}

/// Total variation distance between two laws on the nonnegative integers
/// given as term streams. Runs until both residual tails are below
/// `TAIL_TOL` combined; the skipped region contributes at most
/// `|tail_a - tail_b| / 2`, which is added in.
fn streaming_tv(
    what: &'static str,
    mut a: impl Iterator<Item = f64>,
    mut b: impl Iterator<Item = f64>,
) -> Result<f64> {
    let mut diff = CompensatedSum::new();
    let mut mass_a = CompensatedSum::new();
    let mut mass_b = CompensatedSum::new();
    for _ in 0..MAX_STREAM_TERMS {
        let pa = a.next().unwrap_or(0.0);
        let pb = b.next().unwrap_or(0.0);
        diff.add((pa - pb).abs());
        mass_a.add(pa);
        mass_b.add(pb);
        let tail_a = (1.0 - mass_a.value()).max(0.0);
        let tail_b = (1.0 - mass_b.value()).max(0.0);
        if tail_a + tail_b < TAIL_TOL {
            return Ok(0.5 * (diff.value() + (tail_a - tail_b).abs()));
        }
    }
    Err(Error::NonConvergence {
        what,
        reason: format!(
            "residual tail mass above {TAIL_TOL} after {MAX_STREAM_TERMS} terms \
             (tail decay is n^-rho; very small rho is out of reach)"
        ),
    })
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

fn require_increasing(name: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(name, "need at least one sweep value"));
    }
    for pair in values.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid(
                name,
                format!("must be strictly increasing, got {} after {}", pair[1], pair[0]),
            ));
        }
    }
    Ok(())
}

/// Distance from the count law with shape `k * volume` and `rho = c k` to
/// its large-`k` limit, the negative binomial with size `a` and success
/// probability `c / (c + volume)`, for each `k` in the sweep.
///
/// The swept table is nonincreasing up to numerical noise of order
/// `TAIL_TOL`; callers asserting monotonicity should allow that slack.
pub fn nb_limit_curve(a: f64, c: f64, volume: f64, k_values: &[f64]) -> Result<Vec<LimitPoint>> {
    require_positive("a", a)?;
    require_positive("c", c)?;
    require_positive("volume", volume)?;
    require_increasing("k_values", k_values)?;
    for &k in k_values {
        require_positive("k_values", k)?;
    }
    let p = c / (c + volume);
    let mut table = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let gw = GwdParams::new(a, k * volume, c * k)?;
        let tv = streaming_tv("nb_limit_curve", gw.pmf_terms(), NbTerms::new(a, p))?;
        table.push(LimitPoint { param: k, tv });
    }
    Ok(table)
}

/// Distance from the negative binomial with size `lambda c` and success
/// `c / (c + volume)` to its large-`c` limit `Poisson(lambda * volume)`,
/// for each `c` in the sweep.
///
/// `lambda = 0` is allowed: both sides degenerate to a point mass at zero
/// and every row reports distance 0.
pub fn poisson_limit_curve(
    lambda: f64,
    volume: f64,
    c_values: &[f64],
) -> Result<Vec<LimitPoint>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be nonnegative and finite, got {lambda}"),
        ));
    }
    require_positive("volume", volume)?;
    require_increasing("c_values", c_values)?;
    for &c in c_values {
        require_positive("c_values", c)?;
    }
    let mean = lambda * volume;
    let mut table = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let p = c / (c + volume);
        let tv = streaming_tv(
            "poisson_limit_curve",
            NbTerms::new(lambda * c, p),
            PoissonTerms::new(mean),
        )?;
        table.push(LimitPoint { param: c, tv });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::tv_distance;

    #[test]
    fn streaming_matches_table_based_tv() {
        let direct = streaming_tv("test", PoissonTerms::new(1.0), PoissonTerms::new(2.0)).unwrap();
        let table_a: Vec<f64> = PoissonTerms::new(1.0).take(200).collect();
        let table_b: Vec<f64> = PoissonTerms::new(2.0).take(200).collect();
        assert!((direct - tv_distance(&table_a, &table_b)).abs() < 1e-7);
        let same = streaming_tv("test", PoissonTerms::new(3.0), PoissonTerms::new(3.0)).unwrap();
        assert!(same < 1e-7, "{same}");
    }

    #[test]
    fn nb_terms_recurrence_normalizes() {
        let mass: f64 = NbTerms::new(2.5, 0.4).take(2000).sum();
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
        // Size zero is the point mass at zero.
        let degenerate: Vec<f64> = NbTerms::new(0.0, 0.4).take(3).collect();
        assert_eq!(degenerate, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn nb_curve_shrinks_with_k() {
        let table = nb_limit_curve(2.0, 1.0, 1.0, &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(table.len(), 3);
        for pair in table.windows(2) {
            assert!(
                pair[1].tv <= pair[0].tv + 1e-6,
                "tv rose from {} to {}",
                pair[0].tv,
                pair[1].tv
            );
        }
        assert!(table[0].tv > table[2].tv, "no visible convergence");
        assert!(table[2].tv < 0.1, "tv at k=100 is {}", table[2].tv);
    }

    #[test]
    fn zero_probability_approaches_nb_value() {
        // pi_0 of the k-swept law tends to (c/(c+v))^a = 1/4 here.
        let pi0 = GwdParams::new(2.0, 100.0, 100.0).unwrap().pmf(0);
        assert!((pi0 - 0.25).abs() < 0.05, "{pi0}");
    }

    #[test]
    fn poisson_curve_shrinks_with_c() {
        let table = poisson_limit_curve(1.0, 1.0, &[1.0, 10.0, 100.0]).unwrap();
        for pair in table.windows(2) {
            assert!(pair[1].tv <= pair[0].tv + 1e-6);
        }
        assert!(table[2].tv < 0.01, "tv at c=100 is {}", table[2].tv);
    }

    #[test]
    fn lambda_zero_is_exactly_degenerate() {
        let table = poisson_limit_curve(0.0, 1.0, &[1.0, 10.0]).unwrap();
        for row in &table {
            assert_eq!(row.tv, 0.0);
        }
    }

    #[test]
    fn sweep_validation() {
        assert!(nb_limit_curve(2.0, 1.0, 1.0, &[]).is_err());
        assert!(nb_limit_curve(2.0, 1.0, 1.0, &[2.0, 1.0]).is_err());
        assert!(nb_limit_curve(-1.0, 1.0, 1.0, &[1.0]).is_err());
        assert!(poisson_limit_curve(f64::NAN, 1.0, &[1.0]).is_err());
        assert!(poisson_limit_curve(1.0, 0.0, &[1.0]).is_err());
    }
}
