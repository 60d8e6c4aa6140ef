//! Artifact I/O: CSV writers for count fields, point patterns, and sweep
//! tables, JSON sidecars carrying enough metadata to re-run any file, and
//! the count-sample reader used by fitting.
//!
//! CSV conventions: `.` decimal separator, `\n` line endings, UTF-8, and
//! shortest round-trip float formatting. JSON records carry a
//! `schema_version` field, currently 1.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baselines::LimitPoint;
use crate::marked::MarkedCountField;
use crate::process::{Backend, CountField, ModelParams, PointPattern, QuadratGrid};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Serializes any record as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| io_error(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    text.push('\n');
    write_text(path, &text)
}

/// Sidecar location for a CSV artifact: same stem, `.json` extension.
pub fn sidecar_path(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("json")
}

#[derive(Serialize)]
struct FieldSidecar<'a> {
    schema_version: u32,
    params: &'a ModelParams,
    seed: u64,
    replicate: u64,
    backend: Option<Backend>,
    grid: &'a QuadratGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_marks: Option<usize>,
}

fn axis_header(dim: usize) -> String {
    (0..dim).map(|d| format!("axis{d}")).collect::<Vec<_>>().join(",")
}

/// CSV body for a count field: `cell_index,axis0[,axis1[,axis2]],count`,
/// one row per cell in storage order (last axis fastest).
pub fn count_field_csv(field: &CountField) -> String {
    let grid = field.grid();
    let dim = grid.window().dim();
    let mut out = format!("cell_index,{},count\n", axis_header(dim));
    for (cell, &count) in field.counts().iter().enumerate() {
        let multi = grid.cell_multi_index(cell).expect("cell in range");
        out.push_str(&cell.to_string());
        for m in multi {
            out.push(',');
            out.push_str(&m.to_string());
        }
        out.push(',');
        out.push_str(&count.to_string());
        out.push('\n');
    }
    out
}

/// Writes a count field CSV and its JSON sidecar next to it.
pub fn write_count_field(field: &CountField, csv_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    write_text(csv_path, &count_field_csv(field))?;
    let meta = field.meta();
    write_json(
        &FieldSidecar {
            schema_version: SCHEMA_VERSION,
            params: &meta.params,
            seed: meta.seed,
            replicate: meta.replicate,
            backend: meta.backend,
            grid: field.grid(),
            num_marks: None,
        },
        sidecar_path(csv_path),
    )
}

/// CSV body for a marked count field: the count-field schema with a `mark`
/// column before `count`, rows in cell-major (then mark) order.
pub fn marked_field_csv(field: &MarkedCountField) -> String {
    let grid = field.marked_grid().grid();
    let dim = grid.window().dim();
    let marks = field.marked_grid().num_marks();
    let mut out = format!("cell_index,{},mark,count\n", axis_header(dim));
    for cell in 0..grid.num_cells() {
        let multi = grid.cell_multi_index(cell).expect("cell in range");
        for mark in 0..marks {
            let count = field.count(cell, mark).expect("unit in range");
            out.push_str(&cell.to_string());
            for &m in &multi {
                out.push(',');
                out.push_str(&m.to_string());
            }
            out.push_str(&format!(",{mark},{count}\n"));
        }
    }
    out
}

/// Writes a marked count field CSV and its JSON sidecar.
pub fn write_marked_field(field: &MarkedCountField, csv_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    write_text(csv_path, &marked_field_csv(field))?;
    let meta = field.meta();
    write_json(
        &FieldSidecar {
            schema_version: SCHEMA_VERSION,
            params: &meta.params,
            seed: meta.seed,
            replicate: meta.replicate,
            backend: meta.backend,
            grid: field.marked_grid().grid(),
            num_marks: Some(field.marked_grid().num_marks()),
        },
        sidecar_path(csv_path),
    )
}

/// CSV body for a point pattern: coordinate columns from `x,y,z` by
/// dimension, plus a `mark` column when marks are present.
pub fn point_pattern_csv(pattern: &PointPattern) -> String {
    let dim = pattern.window().dim();
    let mut header: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
    if pattern.marks().is_some() {
        header.push("mark");
    }
    let mut out = header.join(",");
    out.push('\n');
    for (i, point) in pattern.points().iter().enumerate() {
        let mut row = point.iter().map(f64::to_string).collect::<Vec<_>>();
        if let Some(marks) = pattern.marks() {
            row.push(marks[i].to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_point_pattern(pattern: &PointPattern, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &point_pattern_csv(pattern))
}

/// Limit-curve table as `param,tv_distance`.
pub fn limit_curve_csv(points: &[LimitPoint]) -> String {
    let mut out = String::from("param,tv_distance\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.param, p.tv));
    }
    out
}

pub fn write_limit_curve(points: &[LimitPoint], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &limit_curve_csv(points))
}

/// Rectangular float table under a comma-separated header; every row must
/// have exactly as many entries as the header has columns.
pub fn float_table_csv(header: &str, rows: &[Vec<f64>]) -> Result<String> {
    let columns = header.split(',').count();
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        if row.len() != columns {
            return Err(Error::DimensionMismatch {
                what: "table row",
                expected: columns,
                got: row.len(),
            });
        }
        out.push_str(&row.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_float_table(
    header: &str,
    rows: &[Vec<f64>],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &float_table_csv(header, rows)?)
}

/// Reads a replicate count sample: one nonnegative integer per line, blank
/// lines ignored. Parse failures report the 1-based line number.
pub fn read_count_samples(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value = line.parse::<u64>().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: format!("expected a nonnegative integer count, {e}"),
        })?;
        counts.push(value);
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::GwdParams;
    use crate::marked::{self, MarkedGrid};
    use crate::process::{simulate_counts_cox, FieldMeta, Window};

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("gwp-io-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_field() -> CountField {
        let window = Window::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let grid = QuadratGrid::new(window, &[2, 2]).unwrap();
        CountField::new(
            grid,
            vec![5, 0, 1, 2],
            FieldMeta {
                params: ModelParams::Gwd {
                    a: 1.0,
                    k: 1.0,
                    rho: 2.0,
                },
                seed: 42,
                replicate: 3,
                backend: Some(Backend::Cox),
            },
        )
    }

    #[test]
    fn count_field_schema_is_exact() {
        let expected = "cell_index,axis0,axis1,count\n\
                        0,0,0,5\n\
                        1,0,1,0\n\
                        2,1,0,1\n\
                        3,1,1,2\n";
        assert_eq!(count_field_csv(&small_field()), expected);
    }

    #[test]
    fn sidecar_round_trips_metadata() {
        let dir = tmp_dir("sidecar");
        let csv = dir.join("counts_r3.csv");
        write_count_field(&small_field(), &csv).unwrap();
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&csv)).unwrap()).unwrap();
        assert_eq!(side["schema_version"], 1);
        assert_eq!(side["params"]["model"], "gwd");
        assert_eq!(side["params"]["rho"], 2.0);
        assert_eq!(side["seed"], 42);
        assert_eq!(side["replicate"], 3);
        assert_eq!(side["backend"], "cox");
        assert_eq!(side["grid"]["cells_per_axis"][0], 2);
        assert!(side.get("num_marks").is_none());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn marked_csv_matches_storage_order() {
        let window = Window::new(&[0.0], &[2.0]).unwrap();
        let grid = QuadratGrid::new(window, &[2]).unwrap();
        let mg = MarkedGrid::new(grid, 2).unwrap();
        let params = GwdParams::new(1.0, 1.0, 2.0).unwrap();
        let field =
            marked::simulate_marked_counts(&params, &mg, Backend::Conditional, 7, 0).unwrap();
        let csv = marked_field_csv(&field);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "cell_index,axis0,mark,count");
        let mut rebuilt = Vec::new();
        for (row, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 4);
            assert_eq!(cols[0].parse::<usize>().unwrap(), row / 2);
            assert_eq!(cols[1].parse::<usize>().unwrap(), row / 2);
            assert_eq!(cols[2].parse::<usize>().unwrap(), row % 2);
            rebuilt.push(cols[3].parse::<u64>().unwrap());
        }
        assert_eq!(rebuilt, field.counts());
        let dir = tmp_dir("marked");
        let path = dir.join("marked.csv");
        write_marked_field(&field, &path).unwrap();
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side["num_marks"], 2);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn point_pattern_headers_follow_dimension_and_marks() {
        let params = GwdParams::new(1.0, 2.0, 3.0).unwrap();
        let w2 = Window::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let pattern = crate::process::simulate_points(&params, &w2, &[2, 2], 5, 0).unwrap();
        let csv = point_pattern_csv(&pattern);
        assert!(csv.starts_with("x,y\n"));
        assert_eq!(csv.lines().count(), pattern.len() + 1);
        for line in csv.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert!(pattern.window().contains(&cols));
        }
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let dir = tmp_dir("floats");
        let path = dir.join("table.csv");
        let values = [0.1, 1.0 / 3.0, 2.0_f64.powi(-40), 12345.678901234567];
        write_float_table("volume,ratio", &[vec![values[0], values[1]], vec![values[2], values[3]]], &path)
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let parsed: Vec<f64> = text
            .lines()
            .skip(1)
            .flat_map(|l| l.split(','))
            .map(|c| c.parse::<f64>().unwrap())
            .collect();
        for (v, p) in values.iter().zip(&parsed) {
            assert_eq!(v.to_bits(), p.to_bits(), "{v} reread as {p}");
        }
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn float_table_rejects_ragged_rows() {
        let dir = tmp_dir("ragged");
        let err = write_float_table("a,b,c", &[vec![1.0, 2.0]], dir.join("t.csv")).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2, .. }));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn limit_curve_schema() {
        let dir = tmp_dir("limits");
        let path = dir.join("nb.csv");
        write_limit_curve(
            &[
                LimitPoint { param: 1.0, tv: 0.25 },
                LimitPoint { param: 10.0, tv: 0.05 },
            ],
            &path,
        )
        .unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "param,tv_distance\n1,0.25\n10,0.05\n"
        );
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn count_samples_reader_accepts_blanks_and_reports_lines() {
        let dir = tmp_dir("reader");
        let path = dir.join("sample.txt");
        fs::write(&path, "3\n0\n\n17\n").unwrap();
        assert_eq!(read_count_samples(&path).unwrap(), vec![3, 0, 17]);
        fs::write(&path, "3\nx\n").unwrap();
        match read_count_samples(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match read_count_samples(dir.join("missing.txt")).unwrap_err() {
            Error::Io { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn sidecar_and_csv_rewrites_are_byte_identical() {
        let params = GwdParams::new(1.0, 1.0, 2.0).unwrap();
        let grid = QuadratGrid::new(Window::new(&[0.0], &[4.0]).unwrap(), &[4]).unwrap();
        let field = simulate_counts_cox(&params, &grid, 9, 0).unwrap();
        let dir = tmp_dir("repro");
        let (p1, p2) = (dir.join("a.csv"), dir.join("b.csv"));
        write_count_field(&field, &p1).unwrap();
        write_count_field(&field, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(
            fs::read(sidecar_path(&p1)).unwrap(),
            fs::read(sidecar_path(&p2)).unwrap()
        );
        fs::remove_dir_all(dir).unwrap();
    }
}
