//! Python bindings: thin function wrappers over the library, with
//! parameters passed as plain floats/lists and errors mapped to ValueError
//! (I/O problems to IOError).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gwp::baselines;
use gwp::dist::{GwdParams, MgwdParams};
use gwp::process::{self, Backend, QuadratGrid, Window};
use gwp::special::{self, SolverConfig};
use gwp::stream::replicate_rng;

fn err(e: gwp::Error) -> PyErr {
    match e {
        gwp::Error::Io { .. } | gwp::Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn params(a: f64, k: f64, rho: f64) -> PyResult<GwdParams> {
    GwdParams::new(a, k, rho).map_err(err)
}

fn backend(name: &str) -> PyResult<Backend> {
    match name {
        "cox" => Ok(Backend::Cox),
        "conditional" => Ok(Backend::Conditional),
        other => Err(PyValueError::new_err(format!(
            "backend must be \"cox\" or \"conditional\", got {other:?}"
        ))),
    }
}

fn grid(lower: &[f64], upper: &[f64], cells: &[usize]) -> PyResult<QuadratGrid> {
    let window = Window::new(lower, upper).map_err(err)?;
    QuadratGrid::new(window, cells).map_err(err)
}

fn moment_or_none(result: gwp::Result<f64>) -> PyResult<Option<f64>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(gwp::Error::InfiniteMoment { .. }) => Ok(None),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
fn log_pmf(a: f64, k: f64, rho: f64, n: u64) -> PyResult<f64> {
    Ok(params(a, k, rho)?.log_pmf(n))
}

#[pyfunction]
fn pmf(a: f64, k: f64, rho: f64, n: u64) -> PyResult<f64> {
    Ok(params(a, k, rho)?.pmf(n))
}

#[pyfunction]
fn pmf_table(a: f64, k: f64, rho: f64, max_n: u64) -> PyResult<Vec<f64>> {
    Ok(params(a, k, rho)?.pmf_table(max_n))
}

#[pyfunction]
fn cdf(a: f64, k: f64, rho: f64, n: u64) -> PyResult<f64> {
    Ok(params(a, k, rho)?.cdf(n))
}

#[pyfunction]
fn quantile(a: f64, k: f64, rho: f64, q: f64) -> PyResult<u64> {
    params(a, k, rho)?.quantile(q).map_err(err)
}

#[pyfunction]
fn pgf(a: f64, k: f64, rho: f64, z: f64) -> PyResult<f64> {
    params(a, k, rho)?.pgf(z).map_err(err)
}

/// Mean, variance, and descending factorial moments of orders 1..=4;
/// infinite moments come back as None.
#[pyfunction]
fn moments(py: Python<'_>, a: f64, k: f64, rho: f64) -> PyResult<Py<PyDict>> {
    let p = params(a, k, rho)?;
    let out = PyDict::new(py);
    out.set_item("mean", moment_or_none(p.mean())?)?;
    out.set_item("variance", moment_or_none(p.variance())?)?;
    let factorials: Vec<Option<f64>> = (1..=4)
        .map(|r| moment_or_none(p.factorial_moment(r)))
        .collect::<PyResult<_>>()?;
    out.set_item("factorial_moments", factorials)?;
    Ok(out.into())
}

/// Independent draws from the derived stream (seed, stream).
#[pyfunction]
#[pyo3(signature = (a, k, rho, n, seed, stream = 0))]
fn sample(a: f64, k: f64, rho: f64, n: usize, seed: u64, stream: u64) -> PyResult<Vec<u64>> {
    let mut rng = replicate_rng(seed, stream);
    Ok(params(a, k, rho)?.sample_n(n, &mut rng))
}

/// Joint pmf of the shared-mixture multivariate law at the integer vector x.
#[pyfunction]
fn mgwd_pmf(a: f64, shapes: Vec<f64>, rho: f64, x: Vec<u64>) -> PyResult<f64> {
    MgwdParams::new(a, shapes, rho).map_err(err)?.pmf(&x).map_err(err)
}

#[pyfunction]
fn avoidance_probability(a: f64, k: f64, rho: f64, volume: f64) -> PyResult<f64> {
    process::avoidance_probability(&params(a, k, rho)?, volume).map_err(err)
}

/// Inverts the avoidance probability back to the shape mass k * volume.
#[pyfunction]
fn solve_avoidance_inverse(a: f64, rho: f64, p0: f64) -> PyResult<f64> {
    special::solve_avoidance_inverse(a, rho, p0, &SolverConfig::default()).map_err(err)
}

#[pyfunction]
fn conditional_count_pmf(
    a: f64,
    k: f64,
    rho: f64,
    vol_b: f64,
    vol_w: f64,
    n: u64,
    j: u64,
) -> PyResult<f64> {
    process::conditional_count_pmf(&params(a, k, rho)?, vol_b, vol_w, n, j).map_err(err)
}

/// Mixed factorial moment measure over disjoint regions of the given
/// volumes, one order per region.
#[pyfunction]
fn moment_measures(a: f64, k: f64, rho: f64, volumes: Vec<f64>, orders: Vec<u32>) -> PyResult<f64> {
    process::moment_measures(&params(a, k, rho)?, &volumes, &orders).map_err(err)
}

#[pyfunction]
fn orderliness_ratio(a: f64, k: f64, rho: f64, volume: f64) -> PyResult<f64> {
    process::orderliness_ratio(&params(a, k, rho)?, volume).map_err(err)
}

#[pyfunction]
fn orderliness_small_volume_limit(a: f64, k: f64, rho: f64) -> PyResult<f64> {
    Ok(process::orderliness_small_volume_limit(&params(a, k, rho)?))
}

/// Per-cell counts on the grid spanned by lower/upper with the given cell
/// counts per axis; backend is "cox" or "conditional".
#[pyfunction]
fn simulate_counts(
    a: f64,
    k: f64,
    rho: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
    backend_name: &str,
    seed: u64,
    replicate: u64,
) -> PyResult<Vec<u64>> {
    let p = params(a, k, rho)?;
    let g = grid(&lower, &upper, &cells)?;
    let field = match backend(backend_name)? {
        Backend::Cox => process::simulate_counts_cox(&p, &g, seed, replicate),
        Backend::Conditional => process::simulate_counts_conditional(&p, &g, seed, replicate),
    }
    .map_err(err)?;
    Ok(field.counts().to_vec())
}

/// Point coordinates from the fine-grid placement recipe.
#[pyfunction]
fn simulate_points(
    a: f64,
    k: f64,
    rho: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
    seed: u64,
    replicate: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let p = params(a, k, rho)?;
    let window = Window::new(&lower, &upper).map_err(err)?;
    let pattern =
        process::simulate_points(&p, &window, &resolution, seed, replicate).map_err(err)?;
    Ok(pattern.points().to_vec())
}

/// (k, tv) pairs measuring the distance to the negative binomial limit.
#[pyfunction]
fn nb_limit_curve(a: f64, c: f64, volume: f64, k_values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let points = baselines::nb_limit_curve(a, c, volume, &k_values).map_err(err)?;
    Ok(points.iter().map(|p| (p.param, p.tv)).collect())
}

/// (c, tv) pairs measuring the negative binomial's distance to Poisson.
#[pyfunction]
fn poisson_limit_curve(lambda: f64, volume: f64, c_values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    let points = baselines::poisson_limit_curve(lambda, volume, &c_values).map_err(err)?;
    Ok(points.iter().map(|p| (p.param, p.tv)).collect())
}

/// Moment-based parameter estimate from a count sample observed on cells of
/// the given volume.
#[pyfunction]
#[pyo3(signature = (counts, volume = 1.0))]
fn fit_moments(py: Python<'_>, counts: Vec<u64>, volume: f64) -> PyResult<Py<PyDict>> {
    let fit = baselines::fit_moments(&counts, volume).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("a_hat", fit.a_hat)?;
    out.set_item("k_hat", fit.k_hat)?;
    out.set_item("rho_hat", fit.rho_hat)?;
    out.set_item("matched_moments", fit.matched_moments.to_vec())?;
    out.set_item("canonical", fit.canonical)?;
    out.set_item("converged", fit.converged)?;
    out.set_item("note", fit.note)?;
    Ok(out.into())
}

/// Total variation distance between two pmf tables; mass beyond each table
/// is treated as a sink state.
#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> f64 {
    gwp::dist::tv_distance(&p, &q)
}

#[pymodule]
fn gwp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(pmf, m)?)?;
    m.add_function(wrap_pyfunction!(pmf_table, m)?)?;
    m.add_function(wrap_pyfunction!(cdf, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(pgf, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(mgwd_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(avoidance_probability, m)?)?;
    m.add_function(wrap_pyfunction!(solve_avoidance_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_count_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(moment_measures, m)?)?;
    m.add_function(wrap_pyfunction!(orderliness_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(orderliness_small_volume_limit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_points, m)?)?;
    m.add_function(wrap_pyfunction!(nb_limit_curve, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_limit_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_moments, m)?)?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    Ok(())
}
