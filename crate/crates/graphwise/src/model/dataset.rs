use std::path::Path;

use nalgebra::DMatrix;

use super::{ModelError, Result};
use crate::matrix_io::{self, MatrixIoError};

/// `n × d` sample matrix; row `i` is observation `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(ModelError::EmptyDataset);
        }
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                if !x[(i, j)].is_finite() {
                    return Err(ModelError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Dataset { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Rows `range` as a new dataset.
    pub fn rows(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        Dataset::new(self.x.rows(range.start, range.len()).into_owned())
    }

    /// Rows in the given order.
    pub fn select_rows(&self, order: &[usize]) -> Result<Dataset> {
        Dataset::new(self.x.select_rows(order.iter()))
    }

    pub fn save(&self, path: &Path) -> std::result::Result<(), MatrixIoError> {
        matrix_io::save(&self.x, path)
    }

    pub fn load(path: &Path) -> std::result::Result<Dataset, DatasetLoadError> {
        let x = matrix_io::load(path)?;
        Ok(Dataset::new(x)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetLoadError {
    #[error(transparent)]
    Io(#[from] MatrixIoError),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}
