//! The two simulation backends and continuum point rendering.
//!
//! Both backends realize the same finite-dimensional count laws and are
//! cross-validated against each other; a discrepancy between them is a
//! release-blocking test failure, because each one's correctness argument
//! covers the other's blind spots.

use rand::Rng;

use crate::dist::{conditional_allocation, GwdParams, MixingDraw};
use crate::stream::replicate_rng;
use crate::Result;

use super::{Backend, CountField, FieldMeta, ModelParams, PointPattern, QuadratGrid, Window};

/// Retries for in-cell placement before falling back to the cell center.
const PLACEMENT_RETRIES: usize = 8;

fn gwd_meta(params: &GwdParams, seed: u64, replicate: u64, backend: Backend) -> FieldMeta {
    FieldMeta {
        params: ModelParams::Gwd {
            a: params.a(),
            k: params.k(),
            rho: params.rho(),
        },
        seed,
        replicate,
        backend: Some(backend),
    }
}

/// Latent-mixture core: one shared mixing draw, then conditionally
/// independent gamma-Poisson counts per unit of measure `unit_volume`.
pub(crate) fn unit_counts_cox<R: Rng + ?Sized>(
    params: &GwdParams,
    n_units: usize,
    unit_volume: f64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let shape = params.k() * unit_volume;
    let mixing = MixingDraw::sample(params.a(), params.rho(), rng)?;
    Ok((0..n_units)
        .map(|_| crate::dist::nb_mixture_count(shape, &mixing, rng))
        .collect())
}

/// Conditional core: draw the total over `total_volume` from the aggregate
/// law, then allocate it to units with weights proportional to their shapes.
pub(crate) fn unit_counts_conditional<R: Rng + ?Sized>(
    params: &GwdParams,
    n_units: usize,
    unit_volume: f64,
    total_volume: f64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let total_law = params.scaled(total_volume);
    if total_law.is_degenerate() {
        return Ok(vec![0; n_units]);
    }
    let total = total_law.sample(rng);
    if total == 0 || n_units == 1 {
        let mut counts = vec![0; n_units];
        counts[0] = total;
        return Ok(counts);
    }
    // Equal weights may underflow to zero for subnormal k; the smallest
    // positive double keeps the allocation in its vertex-concentration
    // regime, which is the correct limit law.
    let weight = (params.k() * unit_volume).max(f64::MIN_POSITIVE);
    conditional_allocation(total, &vec![weight; n_units], rng)
}

/// Simulates one count field via the latent-mixture backend.
///
/// The generator stream is derived from `(seed, replicate)`, so replicates
/// can run in any order, or in parallel, with identical results.
pub fn simulate_counts_cox(
    params: &GwdParams,
    grid: &QuadratGrid,
    seed: u64,
    replicate: u64,
) -> Result<CountField> {
    let mut rng = replicate_rng(seed, replicate);
    let counts = unit_counts_cox(params, grid.num_cells(), grid.cell_volume(), &mut rng)?;
    Ok(CountField::new(
        grid.clone(),
        counts,
        gwd_meta(params, seed, replicate, Backend::Cox),
    ))
}

/// Simulates one count field via the total-then-allocate backend. The grid
/// total is exactly the drawn aggregate count.
pub fn simulate_counts_conditional(
    params: &GwdParams,
    grid: &QuadratGrid,
    seed: u64,
    replicate: u64,
) -> Result<CountField> {
    let mut rng = replicate_rng(seed, replicate);
    let counts = unit_counts_conditional(
        params,
        grid.num_cells(),
        grid.cell_volume(),
        grid.window().volume(),
        &mut rng,
    )?;
    Ok(CountField::new(
        grid.clone(),
        counts,
        gwd_meta(params, seed, replicate, Backend::Conditional),
    ))
}

/// Uniform point inside a cell that is guaranteed to map back to that cell
/// under the half-open cell convention.
fn place_in_cell<R: Rng + ?Sized>(
    grid: &QuadratGrid,
    cell: usize,
    lower: &[f64],
    extent: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let mut point = vec![0.0; lower.len()];
    for _ in 0..PLACEMENT_RETRIES {
        for (x, (&lo, &e)) in point.iter_mut().zip(lower.iter().zip(extent)) {
            *x = lo + rng.random::<f64>() * e;
        }
        if grid.cell_index_of(&point) == Some(cell) {
            return point;
        }
    }
    // Boundary rounding pushed every retry into a neighbor; the center is
    // safely interior for any non-degenerate extent.
    for (x, (&lo, &e)) in point.iter_mut().zip(lower.iter().zip(extent)) {
        *x = lo + 0.5 * e;
    }
    debug_assert_eq!(grid.cell_index_of(&point), Some(cell));
    point
}

/// Renders the process as points: counts on a fine grid via the conditional
/// backend, then uniform placement inside each cell.
///
/// This is an approximation to the continuum process that is exact at the
/// declared resolution: re-counting the pattern on the generating grid
/// reproduces the simulated counts.
pub fn simulate_points(
    params: &GwdParams,
    window: &Window,
    resolution: &[usize],
    seed: u64,
    replicate: u64,
) -> Result<PointPattern> {
    let grid = QuadratGrid::new(window.clone(), resolution)?;
    let mut rng = replicate_rng(seed, replicate);
    let counts = unit_counts_conditional(
        params,
        grid.num_cells(),
        grid.cell_volume(),
        window.volume(),
        &mut rng,
    )?;
    let mut points = Vec::with_capacity(counts.iter().sum::<u64>() as usize);
    let extent = grid.cell_extent();
    for (cell, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let lower = grid.cell_lower(cell)?;
        for _ in 0..count {
            points.push(place_in_cell(&grid, cell, &lower, &extent, &mut rng));
        }
    }
    Ok(PointPattern::new(window.clone(), points, None))
}
