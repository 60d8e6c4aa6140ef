//! The process on window x {1..m} (integer marks) and its closure
//! operations: per-mark marginals, mark superposition, axis projection.
//!
//! Marks are implemented as extra units of identical measure, so the marked
//! simulators reuse the plain backends verbatim; with one mark they produce
//! bit-identical fields for the same seed.

use serde::{Deserialize, Serialize};

use crate::dist::GwdParams;
use crate::process::{
    unit_counts_conditional, unit_counts_cox, Backend, CountField, FieldMeta, ModelParams,
    QuadratGrid,
};
use crate::stream::replicate_rng;
use crate::{Error, Result};

/// A quadrat grid with an integer mark space `{0, .., num_marks-1}`; the
/// product measure of a (cell, mark) unit equals the cell measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedGrid {
    grid: QuadratGrid,
    num_marks: usize,
}

impl MarkedGrid {
    pub fn new(grid: QuadratGrid, num_marks: usize) -> Result<Self> {
        if num_marks == 0 {
            return Err(Error::invalid("num_marks", "must be at least 1"));
        }
        Ok(MarkedGrid { grid, num_marks })
    }

    pub fn grid(&self) -> &QuadratGrid {
        &self.grid
    }

    pub fn num_marks(&self) -> usize {
        self.num_marks
    }

    pub fn num_units(&self) -> usize {
        self.grid.num_cells() * self.num_marks
    }

    /// Total measure of window x mark space.
    pub fn total_volume(&self) -> f64 {
        self.grid.window().volume() * self.num_marks as f64
    }
}

/// Counts per (cell, mark) pair. Storage is cell-major: the unit index of
/// `(cell, mark)` is `cell * num_marks + mark`, matching the simulation
/// draw order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedCountField {
    marked_grid: MarkedGrid,
    counts: Vec<u64>,
    meta: FieldMeta,
}

impl MarkedCountField {
    pub fn marked_grid(&self) -> &MarkedGrid {
        &self.marked_grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    pub fn count(&self, cell: usize, mark: usize) -> Result<u64> {
        let cells = self.marked_grid.grid().num_cells();
        let marks = self.marked_grid.num_marks();
        if cell >= cells {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                bound: cells,
            });
        }
        if mark >= marks {
            return Err(Error::IndexOutOfRange {
                what: "mark",
                index: mark,
                bound: marks,
            });
        }
        Ok(self.counts[cell * marks + mark])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Simulates all (cell, mark) counts jointly: one shared mixing structure
/// over the product space, each unit carrying shape `k * cell_volume`.
///
/// With `num_marks = 1` this is the plain simulator: same backend, same
/// seed, same counts.
pub fn simulate_marked_counts(
    params: &GwdParams,
    marked_grid: &MarkedGrid,
    backend: Backend,
    seed: u64,
    replicate: u64,
) -> Result<MarkedCountField> {
    let mut rng = replicate_rng(seed, replicate);
    let unit_volume = marked_grid.grid().cell_volume();
    let counts = match backend {
        Backend::Cox => {
            unit_counts_cox(params, marked_grid.num_units(), unit_volume, &mut rng)?
        }
        Backend::Conditional => unit_counts_conditional(
            params,
            marked_grid.num_units(),
            unit_volume,
            marked_grid.total_volume(),
            &mut rng,
        )?,
    };
    Ok(MarkedCountField {
        marked_grid: marked_grid.clone(),
        counts,
        meta: FieldMeta {
            params: ModelParams::Gwd {
                a: params.a(),
                k: params.k(),
                rho: params.rho(),
            },
            seed,
            replicate,
            backend: Some(backend),
        },
    })
}

/// Extracts one mark's cell counts; distributionally the plain process with
/// the same parameters.
pub fn marginal_counts(field: &MarkedCountField, mark: usize) -> Result<CountField> {
    superpose_marks(field, &[mark])
}

/// Cellwise sum over a set of distinct marks; distributionally the plain
/// process with shape multiplied by the number of selected marks.
pub fn superpose_marks(field: &MarkedCountField, marks: &[usize]) -> Result<CountField> {
    let m = field.marked_grid().num_marks();
    if marks.is_empty() {
        return Err(Error::invalid("marks", "selection must be nonempty"));
    }
    let mut seen = vec![false; m];
    for &mark in marks {
        if mark >= m {
            return Err(Error::IndexOutOfRange {
                what: "mark",
                index: mark,
                bound: m,
            });
        }
        if seen[mark] {
            return Err(Error::DuplicateIndex {
                what: "mark",
                index: mark,
            });
        }
        seen[mark] = true;
    }
    let grid = field.marked_grid().grid();
    let mut counts = vec![0u64; grid.num_cells()];
    for (cell, slot) in counts.iter_mut().enumerate() {
        for &mark in marks {
            *slot += field.counts[cell * m + mark];
        }
    }
    Ok(CountField::new(
        grid.clone(),
        counts,
        field.meta().clone(),
    ))
}

/// Sums counts along one axis of a multi-axis field.
///
/// The discarded axis's extent is folded into the density of the projected
/// window, so the projected process keeps parameters (a, k, rho) with its
/// measure scaled by the discarded length.
pub fn project_counts(field: &CountField, axis: usize) -> Result<CountField> {
    let grid = field.grid();
    let window = grid.window();
    let dim = window.dim();
    if dim < 2 {
        return Err(Error::domain(
            "projection",
            "needs a window with at least 2 axes",
        ));
    }
    if axis >= dim {
        return Err(Error::IndexOutOfRange {
            what: "axis",
            index: axis,
            bound: dim,
        });
    }
    let keep: Vec<usize> = (0..dim).filter(|&d| d != axis).collect();
    let lower: Vec<f64> = keep.iter().map(|&d| window.lower()[d]).collect();
    let upper: Vec<f64> = keep
        .iter()
        .map(|&d| window.lower()[d] + window.extent()[d])
        .collect();
    let dropped_extent = window.extent()[axis];
    let projected_window =
        crate::process::Window::with_density(&lower, &upper, window.density() * dropped_extent)?;
    let cells: Vec<usize> = keep.iter().map(|&d| grid.cells_per_axis()[d]).collect();
    let projected_grid = QuadratGrid::new(projected_window, &cells)?;

    let mut counts = vec![0u64; projected_grid.num_cells()];
    for cell in 0..grid.num_cells() {
        let multi = grid.cell_multi_index(cell)?;
        let projected: Vec<usize> = keep.iter().map(|&d| multi[d]).collect();
        counts[projected_grid.flat_index(&projected)?] += field.counts()[cell];
    }
    Ok(CountField::new(
        projected_grid,
        counts,
        field.meta().clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{simulate_counts_conditional, simulate_counts_cox, Window};

    fn marked(cells: &[usize], length: &[f64], m: usize) -> MarkedGrid {
        let upper: Vec<f64> = length.to_vec();
        let lower = vec![0.0; length.len()];
        let grid = QuadratGrid::new(Window::new(&lower, &upper).unwrap(), cells).unwrap();
        MarkedGrid::new(grid, m).unwrap()
    }

    #[test]
    fn single_mark_reduces_to_plain_simulation() {
        let params = GwdParams::new(1.0, 2.0, 2.5).unwrap();
        let mg = marked(&[5], &[2.0], 1);
        for r in 0..20u64 {
            let via_marked =
                simulate_marked_counts(&params, &mg, Backend::Cox, 42, r).unwrap();
            let plain = simulate_counts_cox(&params, mg.grid(), 42, r).unwrap();
            assert_eq!(via_marked.counts(), plain.counts());
            let via_marked =
                simulate_marked_counts(&params, &mg, Backend::Conditional, 42, r).unwrap();
            let plain = simulate_counts_conditional(&params, mg.grid(), 42, r).unwrap();
            assert_eq!(via_marked.counts(), plain.counts());
        }
    }

    #[test]
    fn extraction_and_restacking_round_trip() {
        let params = GwdParams::new(1.0, 1.0, 2.0).unwrap();
        let mg = marked(&[3], &[3.0], 4);
        let field = simulate_marked_counts(&params, &mg, Backend::Cox, 7, 0).unwrap();
        for mark in 0..4 {
            let marginal = marginal_counts(&field, mark).unwrap();
            for cell in 0..3 {
                assert_eq!(marginal.counts()[cell], field.count(cell, mark).unwrap());
            }
        }
        let all = superpose_marks(&field, &[0, 1, 2, 3]).unwrap();
        assert_eq!(all.total(), field.total());
        let partial = superpose_marks(&field, &[1, 3]).unwrap();
        for cell in 0..3 {
            assert_eq!(
                partial.counts()[cell],
                field.count(cell, 1).unwrap() + field.count(cell, 3).unwrap()
            );
        }
    }

    #[test]
    fn superposition_rejects_bad_selections() {
        let params = GwdParams::new(1.0, 1.0, 2.0).unwrap();
        let mg = marked(&[2], &[1.0], 3);
        let field = simulate_marked_counts(&params, &mg, Backend::Cox, 1, 0).unwrap();
        assert!(matches!(
            superpose_marks(&field, &[0, 0]),
            Err(Error::DuplicateIndex { .. })
        ));
        assert!(superpose_marks(&field, &[3]).is_err());
        assert!(superpose_marks(&field, &[]).is_err());
        assert!(field.count(0, 3).is_err());
        assert!(field.count(2, 0).is_err());
    }

    #[test]
    fn projection_bookkeeping_is_exact() {
        let params = GwdParams::new(1.0, 1.0, 1.5).unwrap();
        let window = Window::new(&[0.0, 0.0], &[2.0, 3.0]).unwrap();
        let grid = QuadratGrid::new(window, &[4, 6]).unwrap();
        let field = simulate_counts_cox(&params, &grid, 11, 0).unwrap();

        // Project out axis 1: row sums.
        let rows = project_counts(&field, 1).unwrap();
        assert_eq!(rows.grid().num_cells(), 4);
        for i in 0..4 {
            let direct: u64 = (0..6)
                .map(|j| field.counts()[grid.flat_index(&[i, j]).unwrap()])
                .sum();
            assert_eq!(rows.counts()[i], direct);
        }
        // Measure bookkeeping: projected cell volume equals the original
        // column volume (cell extent times discarded extent).
        assert!((rows.grid().window().density() - 3.0).abs() < 1e-15);
        assert!((rows.grid().cell_volume() - 1.5).abs() < 1e-12);
        assert_eq!(rows.total(), field.total());

        let cols = project_counts(&field, 0).unwrap();
        assert_eq!(cols.grid().num_cells(), 6);
        assert_eq!(cols.total(), field.total());

        assert!(project_counts(&rows, 0).is_err());
        assert!(project_counts(&field, 2).is_err());
    }

    #[test]
    fn double_projection_matches_single_projection_of_projection() {
        let params = GwdParams::new(0.8, 1.2, 1.1).unwrap();
        let window = Window::new(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        let grid = QuadratGrid::new(window, &[2, 3, 2]).unwrap();
        let field = simulate_counts_cox(&params, &grid, 23, 0).unwrap();
        // Dropping axis 2 then axis 1 equals dropping axis 1 then axis 1
        // (the second projection's axis indices shift after the first).
        let step = project_counts(&project_counts(&field, 2).unwrap(), 1).unwrap();
        let other = project_counts(&project_counts(&field, 1).unwrap(), 1).unwrap();
        assert_eq!(step.counts(), other.counts());
        assert_eq!(step.grid().num_cells(), 2);
        assert_eq!(step.total(), field.total());
    }

    #[test]
    fn marked_field_total_volume() {
        let mg = marked(&[2, 2], &[1.0, 1.0], 5);
        assert_eq!(mg.num_units(), 20);
        assert!((mg.total_volume() - 5.0).abs() < 1e-15);
        assert!(MarkedGrid::new(mg.grid().clone(), 0).is_err());
    }
}
