//! Dense row-major matrices and the joint `(x, y)` sample layout.
//!
//! A [`SampleBatch`] is just a [`Matrix`] whose rows are i.i.d. samples. Joint
//! samples store the x-block followed by the y-block in each row; the split
//! is carried separately as a [`JointLayout`].

use std::io::{Read, Write};
use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("rows have inconsistent lengths: expected {expected}, found {found}")]
    RaggedRows { expected: usize, found: usize },
    #[error("csv header has {found} columns, layout expects {expected}")]
    HeaderMismatch { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid number {value:?} in row {row}")]
    Parse { row: usize, value: String },
}

/// Row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// N samples (rows) of a D-dimensional variable (columns).
pub type SampleBatch = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(MatrixError::RaggedRows {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// A single-column matrix.
    pub fn column(values: Vec<f64>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-column matrix has no row data anyway.
        let cols = self.cols.max(1);
        self.data
            .chunks_exact(cols)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// Copies out column `j`.
    pub fn column_values(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// Copies the given column range of every row into a new matrix.
    pub fn select_columns(&self, cols: Range<usize>) -> Matrix {
        assert!(cols.end <= self.cols, "column range out of bounds");
        let width = cols.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for r in self.iter_rows() {
            data.extend_from_slice(&r[cols.clone()]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: Range<usize>) -> Matrix {
        Matrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Column split of a joint sample: the first `x_dim` columns are X, the
/// remaining `y_dim` columns are Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct JointLayout {
    pub x_dim: usize,
    pub y_dim: usize,
}

impl JointLayout {
    pub fn new(x_dim: usize, y_dim: usize) -> Self {
        Self { x_dim, y_dim }
    }

    pub fn joint_dim(&self) -> usize {
        self.x_dim + self.y_dim
    }

    pub fn x_range(&self) -> Range<usize> {
        0..self.x_dim
    }

    pub fn y_range(&self) -> Range<usize> {
        self.x_dim..self.x_dim + self.y_dim
    }

    /// `x1..xDx,y1..yDy`
    pub fn column_names(&self) -> Vec<String> {
        (1..=self.x_dim)
            .map(|i| format!("x{i}"))
            .chain((1..=self.y_dim).map(|i| format!("y{i}")))
            .collect()
    }
}

/// Writes a joint sample batch as CSV with an `x1..,y1..` header.
///
/// Values use Rust's shortest round-trip float formatting, so reading the
/// file back reproduces every bit.
pub fn write_samples_csv<W: Write>(
    writer: W,
    samples: &SampleBatch,
    layout: JointLayout,
) -> Result<(), MatrixError> {
    if samples.cols() != layout.joint_dim() {
        return Err(MatrixError::HeaderMismatch {
            expected: layout.joint_dim(),
            found: samples.cols(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(layout.column_names())?;
    for row in samples.iter_rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a CSV written by [`write_samples_csv`], recovering the layout from
/// the header.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<(SampleBatch, JointLayout), MatrixError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let x_dim = header.iter().filter(|h| h.starts_with('x')).count();
    let layout = JointLayout::new(x_dim, header.len() - x_dim);
    if layout.column_names().iter().map(String::as_str).ne(header.iter()) {
        return Err(MatrixError::HeaderMismatch {
            expected: layout.joint_dim(),
            found: header.len(),
        });
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record?;
        for field in record.iter() {
            let v = field.trim().parse::<f64>().map_err(|_| MatrixError::Parse {
                row: i,
                value: field.to_string(),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((Matrix::from_vec(rows, layout.joint_dim(), data)?, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_selection_and_stacking() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let y = m.select_columns(1..3);
        assert_eq!(y.as_slice(), &[2.0, 3.0, 5.0, 6.0]);
        let s = m.vstack(&m.select_rows(&[1]));
        assert_eq!(s.rows(), 3);
        assert_eq!(s.row(2), &[4.0, 5.0, 6.0]);
        assert_eq!(m.column_values(0), vec![1.0, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            Matrix::from_rows(&rows),
            Err(MatrixError::RaggedRows { .. })
        ));
    }

    #[test]
    fn header_names_follow_layout() {
        assert_eq!(
            JointLayout::new(2, 1).column_names(),
            vec!["x1", "x2", "y1"]
        );
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            values in proptest::collection::vec(-1e300f64..1e300, 1..40),
            x_dim in 1usize..3,
        ) {
            let cols = x_dim + 1;
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let m = Matrix::from_vec(rows, cols, values[..rows * cols].to_vec()).unwrap();
            let layout = JointLayout::new(x_dim, 1);
            let mut buf = Vec::new();
            write_samples_csv(&mut buf, &m, layout).unwrap();
            let (back, back_layout) = read_samples_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back_layout, layout);
            prop_assert_eq!(back, m);
        }
    }
}
