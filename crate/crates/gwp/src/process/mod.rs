//! The point process on axis-aligned windows of R^d (d <= 3), observed
//! through quadrat counts.
//!
//! Geometry lives here: windows, congruent-cell grids, count fields, point
//! patterns. Simulation backends are in [`simulate`] (re-exported), closed
//! form process quantities and diagnostics in [`moments`] (re-exported).
//!
//! The parameter measure is a constant density times Lebesgue measure, so
//! every probability or moment depends on a region only through its measure.
//! `Window` stores lower corner plus extent; translation rewrites only the
//! corner and therefore changes no volume bit, which makes stationarity of
//! the computed quantities exact rather than approximate.

mod moments;
mod simulate;

pub use moments::{
    avoidance_probability, conditional_count_pmf, empirical_summary, ergodicity_diagnostic,
    moment_measures, orderliness_atom_limit, orderliness_ratio, orderliness_small_volume_limit,
    EmpiricalSummary, ErgodicityRow, ErgodicityTable,
};
pub use simulate::{simulate_counts_conditional, simulate_counts_cox, simulate_points};
pub(crate) use simulate::{unit_counts_conditional, unit_counts_cox};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on grid size; keeps flat indices and count buffers sane.
const MAX_CELLS: usize = 1 << 28;

/// Axis-aligned box in R^d, d in {1,2,3}, carrying a constant density
/// multiplier on Lebesgue measure.
///
/// Stored as lower corner plus extent so translated copies have bit-identical
/// extents, hence bit-identical volumes and cell volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lower: Vec<f64>,
    extent: Vec<f64>,
    density: f64,
}

impl Window {
    /// Window from opposite corners with unit density.
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::with_density(lower, upper, 1.0)
    }

    /// Window from opposite corners with an explicit density multiplier.
    pub fn with_density(lower: &[f64], upper: &[f64], density: f64) -> Result<Self> {
        if lower.is_empty() || lower.len() > 3 {
            return Err(Error::invalid(
                "window dimension",
                format!("must be 1, 2, or 3, got {}", lower.len()),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "window corners",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::invalid(
                "density",
                format!("must be positive and finite, got {density}"),
            ));
        }
        let mut extent = Vec::with_capacity(lower.len());
        for (d, (&lo, &up)) in lower.iter().zip(upper).enumerate() {
            if !lo.is_finite() || !up.is_finite() {
                return Err(Error::invalid(
                    "window corners",
                    format!("axis {d} corners ({lo}, {up}) must be finite"),
                ));
            }
            let e = up - lo;
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid(
                    "window corners",
                    format!("axis {d} needs lower < upper, got ({lo}, {up})"),
                ));
            }
            extent.push(e);
        }
        Ok(Window {
            lower: lower.to_vec(),
            extent,
            density,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    /// Upper corner, recomputed as lower + extent.
    pub fn upper(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.extent)
            .map(|(&lo, &e)| lo + e)
            .collect()
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// Measure of the window: density times the product of extents.
    pub fn volume(&self) -> f64 {
        self.density * self.extent.iter().product::<f64>()
    }

    /// Translated copy; extent and density are moved verbatim so the volume
    /// is bit-identical.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "translation vector",
                expected: self.dim(),
                got: shift.len(),
            });
        }
        let mut out = self.clone();
        for (lo, &s) in out.lower.iter_mut().zip(shift) {
            if !s.is_finite() {
                return Err(Error::invalid("shift", format!("must be finite, got {s}")));
            }
            *lo += s;
        }
        Ok(out)
    }

    /// Membership under the half-open convention `[lower, upper)`.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.extent))
                .all(|(&x, (&lo, &e))| x >= lo && x < lo + e)
    }
}

/// Partition of a window into congruent axis-aligned cells.
///
/// Cells are flat-indexed in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratGrid {
    window: Window,
    cells_per_axis: Vec<usize>,
}

impl QuadratGrid {
    pub fn new(window: Window, cells_per_axis: &[usize]) -> Result<Self> {
        if cells_per_axis.len() != window.dim() {
            return Err(Error::DimensionMismatch {
                what: "cells per axis vs window dimension",
                expected: window.dim(),
                got: cells_per_axis.len(),
            });
        }
        let mut total = 1usize;
        for (d, &c) in cells_per_axis.iter().enumerate() {
            if c == 0 {
                return Err(Error::invalid(
                    "cells per axis",
                    format!("axis {d} must have at least one cell"),
                ));
            }
            total = total
                .checked_mul(c)
                .filter(|&t| t <= MAX_CELLS)
                .ok_or_else(|| {
                    Error::invalid("cells per axis", format!("grid exceeds {MAX_CELLS} cells"))
                })?;
        }
        let _ = total;
        Ok(QuadratGrid {
            window,
            cells_per_axis: cells_per_axis.to_vec(),
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    /// Measure of one cell. All cells are congruent, so this is the window
    /// volume divided by the cell count.
    pub fn cell_volume(&self) -> f64 {
        self.window.volume() / self.num_cells() as f64
    }

    /// Per-axis geometric extent of one cell (no density factor).
    pub fn cell_extent(&self) -> Vec<f64> {
        self.window
            .extent
            .iter()
            .zip(&self.cells_per_axis)
            .map(|(&e, &c)| e / c as f64)
            .collect()
    }

    /// Multi-index of a flat cell index, last axis fastest.
    pub fn cell_multi_index(&self, cell: usize) -> Result<Vec<usize>> {
        if cell >= self.num_cells() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                bound: self.num_cells(),
            });
        }
        let mut rest = cell;
        let mut multi = vec![0usize; self.dim()];
        for (d, &c) in self.cells_per_axis.iter().enumerate().rev() {
            multi[d] = rest % c;
            rest /= c;
        }
        Ok(multi)
    }

    /// Flat index of a multi-index, inverse of [`cell_multi_index`].
    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "cell multi-index",
                expected: self.dim(),
                got: multi.len(),
            });
        }
        let mut flat = 0usize;
        for (d, (&i, &c)) in multi.iter().zip(&self.cells_per_axis).enumerate() {
            if i >= c {
                return Err(Error::IndexOutOfRange {
                    what: "cell coordinate",
                    index: i,
                    bound: c,
                });
            }
            let _ = d;
            flat = flat * c + i;
        }
        Ok(flat)
    }

    /// Lower corner of a cell.
    pub fn cell_lower(&self, cell: usize) -> Result<Vec<f64>> {
        let multi = self.cell_multi_index(cell)?;
        let ext = self.cell_extent();
        Ok(multi
            .iter()
            .zip(self.window.lower.iter().zip(&ext))
            .map(|(&i, (&lo, &e))| lo + i as f64 * e)
            .collect())
    }

    /// Cell containing `point`, or `None` when the point is outside the
    /// window (half-open cells, so shared faces belong to the upper cell).
    pub fn cell_index_of(&self, point: &[f64]) -> Option<usize> {
        if !self.window.contains(point) {
            return None;
        }
        let ext = self.cell_extent();
        let mut multi = Vec::with_capacity(self.dim());
        for ((&x, &lo), (&e, &c)) in point
            .iter()
            .zip(&self.window.lower)
            .zip(ext.iter().zip(&self.cells_per_axis))
        {
            let i = (((x - lo) / e).floor() as isize).clamp(0, c as isize - 1) as usize;
            multi.push(i);
        }
        self.flat_index(&multi).ok()
    }

    /// Number of points of a pattern landing in each cell.
    pub fn count_points(&self, points: &[Vec<f64>]) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_cells()];
        for p in points {
            if let Some(c) = self.cell_index_of(p) {
                counts[c] += 1;
            }
        }
        counts
    }

    /// Translated copy; layout bits are untouched.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        Ok(QuadratGrid {
            window: self.window.translated(shift)?,
            cells_per_axis: self.cells_per_axis.clone(),
        })
    }

    /// True when the grids have identical layout (cell counts, extents,
    /// density) regardless of where their windows sit.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.cells_per_axis == other.cells_per_axis
            && self.window.extent == other.window.extent
            && self.window.density == other.window.density
    }
}

/// Which latent representation generated a count field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// One global mixing draw, then independent gamma-Poisson cells.
    Cox,
    /// One total drawn from the aggregate law, allocated to cells.
    Conditional,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Cox => "cox",
            Backend::Conditional => "conditional",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cox" => Ok(Backend::Cox),
            "conditional" => Ok(Backend::Conditional),
            other => Err(Error::invalid(
                "backend",
                format!("expected 'cox' or 'conditional', got '{other}'"),
            )),
        }
    }
}

/// Model that produced a simulated field; stored in metadata so every
/// artifact can be re-run exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Gwd { a: f64, k: f64, rho: f64 },
    Polya { alpha: f64, beta: f64 },
    ClusterNb { lambda: f64, delta: f64 },
    Poisson { intensity: f64 },
}

/// Provenance carried by every simulated field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub params: ModelParams,
    pub seed: u64,
    pub replicate: u64,
    pub backend: Option<Backend>,
}

/// Per-cell counts over a quadrat grid plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountField {
    grid: QuadratGrid,
    counts: Vec<u64>,
    meta: FieldMeta,
}

impl CountField {
    pub(crate) fn new(grid: QuadratGrid, counts: Vec<u64>, meta: FieldMeta) -> Self {
        debug_assert_eq!(counts.len(), grid.num_cells());
        CountField { grid, counts, meta }
    }

    pub fn grid(&self) -> &QuadratGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Points (optionally marked) inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    window: Window,
    points: Vec<Vec<f64>>,
    marks: Option<Vec<u32>>,
}

impl PointPattern {
    pub(crate) fn new(window: Window, points: Vec<Vec<f64>>, marks: Option<Vec<u32>>) -> Self {
        debug_assert!(marks.as_ref().map_or(true, |m| m.len() == points.len()));
        debug_assert!(points.iter().all(|p| window.contains(p)));
        PointPattern {
            window,
            points,
            marks,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn marks(&self) -> Option<&[u32]> {
        self.marks.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
