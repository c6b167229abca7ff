//! Matrix and point encodings: a plain CSV grid and a JSON object
//! `{rows, cols, entries}` with entries in row-major order.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, DenseMatrix};
use crate::variety::VarietyPoint;

/// Scientific notation with 17 significant digits; parses back to the same double.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_matrix(x: &DenseMatrix) -> Self {
        let entries = (0..x.nrows()).flat_map(|i| (0..x.ncols()).map(move |j| (i, j)));
        Self {
            rows: x.nrows(),
            cols: x.ncols(),
            entries: entries.map(|ij| x[ij]).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        if self.entries.len() != self.rows * self.cols {
            return Err(Error::Format(format!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.entries.len()
            )));
        }
        let x = DenseMatrix::from_row_slice(self.rows, self.cols, &self.entries);
        ensure_finite(&x, "matrix document")?;
        Ok(x)
    }
}

pub fn matrix_to_json(x: &DenseMatrix) -> String {
    serde_json::to_string(&MatrixDoc::from_matrix(x)).expect("matrix serializes")
}

pub fn matrix_from_json(text: &str) -> Result<DenseMatrix> {
    serde_json::from_str::<MatrixDoc>(text)?.to_matrix()
}

pub fn matrix_to_csv(x: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format_f64(x[(i, j)])).collect();
        writeln!(out, "{}", row.join(",")).expect("write to string");
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::Format(format!("line {}: bad number {field:?}: {e}", line_no + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} columns, found {}",
                    line_no + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty matrix".into()));
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.concat();
    let x = DenseMatrix::from_row_slice(rows.len(), cols, &flat);
    ensure_finite(&x, "CSV matrix")?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDoc {
    pub u: MatrixDoc,
    pub sigma: Vec<f64>,
    pub v: MatrixDoc,
    pub rank: usize,
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

impl PointDoc {
    pub fn from_point(p: &VarietyPoint) -> Self {
        Self {
            u: MatrixDoc::from_matrix(p.u()),
            sigma: p.sigma().iter().copied().collect(),
            v: MatrixDoc::from_matrix(p.v()),
            rank: p.rank(),
            m: p.rows(),
            n: p.cols(),
            r: p.rank_bound(),
        }
    }

    pub fn to_point(&self) -> Result<VarietyPoint> {
        let u = self.u.to_matrix()?;
        let v = self.v.to_matrix()?;
        if u.shape() != (self.m, self.rank) || v.shape() != (self.n, self.rank) {
            return Err(Error::Format(format!(
                "factor shapes {:?} and {:?} do not match m={}, n={}, rank={}",
                u.shape(),
                v.shape(),
                self.m,
                self.n,
                self.rank
            )));
        }
        VarietyPoint::from_factors(u, DVector::from_vec(self.sigma.clone()), v, self.r)
    }
}

pub fn point_to_json(p: &VarietyPoint) -> String {
    serde_json::to_string(&PointDoc::from_point(p)).expect("point serializes")
}

pub fn point_from_json(text: &str) -> Result<VarietyPoint> {
    serde_json::from_str::<PointDoc>(text)?.to_point()
}
