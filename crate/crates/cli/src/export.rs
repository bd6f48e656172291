//! CSV and gnuplot export of kernel fields.

use std::fmt::Write as _;
use std::path::Path;

use levi_core::experiment::FieldSlice;
use levi_core::grid::SpatialGrid;

use crate::error::CliError;

/// Header for a field over a `dim`-dimensional grid.
pub fn header(dim: usize) -> &'static str {
    if dim == 1 {
        "t,x,y,value"
    } else {
        "t,x1,x2,y1,y2,value"
    }
}

/// 17 significant digits, enough to read back the same double.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check(slice: &FieldSlice) -> Result<(), CliError> {
    let (r, c) = slice.values.dim();
    if r == 0 || c == 0 {
        return Err(CliError::Export(format!("field `{}` at t = {} is empty", slice.name, slice.t)));
    }
    if r != slice.rows.len() || c != slice.columns.len() {
        return Err(CliError::Export(format!(
            "field `{}` is {r}×{c} but lists {} rows and {} columns",
            slice.name,
            slice.rows.len(),
            slice.columns.len()
        )));
    }
    Ok(())
}

pub fn field_csv(grid: &SpatialGrid, slice: &FieldSlice) -> Result<String, CliError> {
    check(slice)?;
    let mut out = String::with_capacity(64 * slice.values.len());
    out.push_str(header(grid.dim));
    out.push('\n');
    let t = num(slice.t);
    for (p, &i) in slice.rows.iter().enumerate() {
        let x: Vec<String> = grid.point(i).into_iter().map(num).collect();
        for (q, &j) in slice.columns.iter().enumerate() {
            let y: Vec<String> = grid.point(j).into_iter().map(num).collect();
            writeln!(out, "{t},{},{},{}", x.join(","), y.join(","), num(slice.values[[p, q]])).expect("string write");
        }
    }
    Ok(out)
}

/// Whitespace-separated blocks, one per row point, blank line between.
pub fn field_gnuplot(grid: &SpatialGrid, slice: &FieldSlice) -> Result<String, CliError> {
    check(slice)?;
    let mut out = format!("# {}\n", header(grid.dim).replace(',', " "));
    for (p, &i) in slice.rows.iter().enumerate() {
        let x: Vec<String> = grid.point(i).into_iter().map(num).collect();
        for (q, &j) in slice.columns.iter().enumerate() {
            let y: Vec<String> = grid.point(j).into_iter().map(num).collect();
            writeln!(out, "{} {} {} {}", num(slice.t), x.join(" "), y.join(" "), num(slice.values[[p, q]])).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// One parsed CSV line: time, x, y, value.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

pub fn read_csv(text: &str) -> Result<Vec<CsvRecord>, CliError> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| CliError::Export("missing header".into()))?;
    let dim = match head {
        h if h == header(1) => 1,
        h if h == header(2) => 2,
        h => return Err(CliError::Export(format!("unknown header `{h}`"))),
    };
    lines
        .enumerate()
        .map(|(n, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Export(format!("line {}: {e}", n + 2)))?;
            if v.len() != 2 + 2 * dim {
                return Err(CliError::Export(format!("line {}: {} fields", n + 2, v.len())));
            }
            Ok(CsvRecord {
                t: v[0],
                x: v[1..1 + dim].to_vec(),
                y: v[1 + dim..1 + 2 * dim].to_vec(),
                value: v[1 + 2 * dim],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use levi_core::frozen_kernel::{Boundary, FrozenEvaluator};
    use levi_core::{JumpKernel, Modulation, SpectralMeasure, StableParams};
    use ndarray::Array2;

    use super::*;

    #[test]
    fn shape_and_header() {
        let grid = SpatialGrid::new(1, 10.0, 16).unwrap();
        let all: Vec<usize> = (0..16).collect();
        let slice = FieldSlice {
            name: "p".into(),
            t: 1.0,
            rows: all.clone(),
            columns: all,
            values: Array2::from_elem((16, 16), 0.25),
        };
        let text = field_csv(&grid, &slice).unwrap();
        assert_eq!(text.lines().count(), 16 * 16 + 1);
        assert_eq!(text.lines().next().unwrap(), "t,x,y,value");
        let g = field_gnuplot(&grid, &slice).unwrap();
        assert_eq!(g.lines().filter(|l| l.is_empty()).count(), 16);
    }

    #[test]
    fn empty_field_is_rejected() {
        let grid = SpatialGrid::new(1, 10.0, 16).unwrap();
        let slice = FieldSlice {
            name: "p".into(),
            t: 1.0,
            rows: vec![],
            columns: vec![],
            values: Array2::zeros((0, 0)),
        };
        assert!(matches!(field_csv(&grid, &slice), Err(CliError::Export(_))));
    }

    #[test]
    fn cauchy_slice_survives_a_round_trip() {
        let grid = SpatialGrid::new(1, 40.0, 2048).unwrap();
        let mu = SpectralMeasure::from_pairs(1, &[(vec![1.0], 1.0 / PI), (vec![-1.0], 1.0 / PI)]).unwrap();
        let k = JumpKernel::new(mu, StableParams::new(1.0, 1.0, 1, 2.0).unwrap(), Modulation::constant()).unwrap();
        let p = FrozenEvaluator::new(k).evaluate_frozen(&[0.0], 1.0, &grid, Boundary::FreeSpace).unwrap();
        let slice = FieldSlice {
            name: "p0".into(),
            t: 1.0,
            rows: vec![grid.nearest_index(&[0.0])],
            columns: (0..grid.len()).collect(),
            values: Array2::from_shape_vec((1, grid.len()), p.values.clone()).unwrap(),
        };
        let back = read_csv(&field_csv(&grid, &slice).unwrap()).unwrap();
        assert_eq!(back.len(), grid.len());
        for (r, v) in back.iter().zip(&p.values) {
            assert_eq!(r.value, *v);
            if r.y[0].abs() <= 20.0 {
                let exact = 1.0 / (PI * (1.0 + r.y[0] * r.y[0]));
                assert!(((r.value - exact) / exact).abs() < 1e-10);
            }
        }
    }
}
