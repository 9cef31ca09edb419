//! Maps from the full parameter θ to a quantity of interest φ = g(θ).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterTransform {
    #[default]
    Identity,
    /// Keep the listed coordinates, in the listed order.
    Select { coords: Vec<usize> },
    /// φ = A·θ + b with `matrix` given row by row.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
}

impl ParameterTransform {
    pub fn select(coords: impl Into<Vec<usize>>) -> Self {
        ParameterTransform::Select {
            coords: coords.into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ParameterTransform::Identity)
    }

    /// Checks the transform against an input dimension and returns the output dimension.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        match self {
            ParameterTransform::Identity => Ok(input_dim),
            ParameterTransform::Select { coords } => {
                if coords.is_empty() {
                    return Err(Error::InvalidArgument("empty coordinate selection".into()));
                }
                if let Some(&c) = coords.iter().find(|&&c| c >= input_dim) {
                    return Err(Error::InvalidArgument(format!(
                        "selected coordinate {c} out of range for dimension {input_dim}"
                    )));
                }
                Ok(coords.len())
            }
            ParameterTransform::Affine { matrix, offset } => {
                if matrix.is_empty() || matrix.len() != offset.len() {
                    return Err(Error::InvalidArgument(
                        "affine transform needs one offset per matrix row".into(),
                    ));
                }
                for row in matrix {
                    if row.len() != input_dim {
                        return Err(Error::DimensionMismatch {
                            expected: input_dim,
                            got: row.len(),
                        });
                    }
                }
                Ok(matrix.len())
            }
        }
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParameterTransform::Identity => theta.to_vec(),
            ParameterTransform::Select { coords } => coords.iter().map(|&c| theta[c]).collect(),
            ParameterTransform::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| row.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + b)
                .collect(),
        }
    }

    /// Dense (A, b) representation for an input of dimension `input_dim`.
    pub fn to_affine(&self, input_dim: usize) -> (DMatrix<f64>, DVector<f64>) {
        match self {
            ParameterTransform::Identity => (
                DMatrix::identity(input_dim, input_dim),
                DVector::zeros(input_dim),
            ),
            ParameterTransform::Select { coords } => {
                let mut a = DMatrix::zeros(coords.len(), input_dim);
                for (r, &c) in coords.iter().enumerate() {
                    a[(r, c)] = 1.0;
                }
                (a, DVector::zeros(coords.len()))
            }
            ParameterTransform::Affine { matrix, offset } => (
                DMatrix::from_fn(matrix.len(), input_dim, |r, c| matrix[r][c]),
                DVector::from_column_slice(offset),
            ),
        }
    }

    /// Per-coordinate `(scale, offset)` when the map acts on each coordinate separately
    /// (square diagonal with nonzero entries, or a selection).
    pub(crate) fn coordinatewise(&self, input_dim: usize) -> Option<Vec<(usize, f64, f64)>> {
        match self {
            ParameterTransform::Identity => Some((0..input_dim).map(|i| (i, 1.0, 0.0)).collect()),
            ParameterTransform::Select { coords } => {
                Some(coords.iter().map(|&c| (c, 1.0, 0.0)).collect())
            }
            ParameterTransform::Affine { matrix, offset } => {
                if matrix.len() != input_dim {
                    return None;
                }
                let mut out = Vec::with_capacity(input_dim);
                for (r, row) in matrix.iter().enumerate() {
                    for (c, &a) in row.iter().enumerate() {
                        if (c == r) != (a != 0.0) {
                            return None;
                        }
                    }
                    out.push((r, row[r], offset[r]));
                }
                Some(out)
            }
        }
    }
}
