//! Generalized Waring distributions and the generalized Waring point process.
//!
//! The univariate generalized Waring distribution UGWD(a, k; rho) is the
//! beta mixture of negative binomials: X | p ~ NB(k, p) with p ~ Beta(rho, a).
//! Its multivariate extension shares a single mixing draw across components,
//! which makes component sums collapse back into the same family. Spreading
//! the shape parameter proportionally to volume over a bounded window turns
//! the family into a stationary point process whose quadrat counts follow the
//! multivariate law.
//!
//! The crate provides:
//!
//! * [`dist`]: exact pmf/cdf/quantile/moment evaluation and exact samplers for
//!   the univariate and multivariate distributions, plus the conditional
//!   (Dirichlet-multinomial) allocation used to split a total count over cells.
//! * [`process`]: windows, quadrat grids, two independent simulation backends
//!   for count fields, point-pattern simulation, avoidance and conditional
//!   count laws, factorial moment measures, and orderliness/ergodicity
//!   diagnostics.
//! * [`marked`]: independently marked count fields with marginal, superposed,
//!   and projected views.
//! * [`baselines`]: Polya (mixed Poisson) and compound-Poisson negative
//!   binomial reference processes, convergence curves towards the negative
//!   binomial and Poisson regimes, and a moment-based parameter estimator.
//! * [`special`]: the scalar special-function kernel (log-gamma, log rising
//!   factorials, digamma, a restricted Gauss hypergeometric series) and the
//!   avoidance-probability inversion solver.
//! * [`stream`]: deterministic derivation of per-replicate random streams.
//! * [`io`]: CSV/JSON writers and readers for the artifact formats shared
//!   with the command-line tool.
//! * [`gof`]: chi-square goodness-of-fit helper used to validate samplers.

#![forbid(unsafe_code)]

mod accum;
pub mod baselines;
pub mod dist;
mod error;
pub mod gof;
pub mod io;
pub mod marked;
pub mod process;
pub mod special;
pub mod stream;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
