//! Sparse binary vectors and the labeled design matrix every learner consumes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("column {column} out of range for dimension {dimension}")]
    ColumnOutOfRange { column: u32, dimension: usize },
    #[error("active columns must be strictly increasing")]
    NotIncreasing,
    #[error("row {row} has dimension {found}, expected {expected}")]
    RowDimension { row: usize, found: usize, expected: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
}

/// A binary vector stored as its strictly increasing set of active columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    active: Vec<u32>,
}

impl SparseVector {
    pub fn new(dimension: usize, active: Vec<u32>) -> Result<Self, MatrixError> {
        if active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MatrixError::NotIncreasing);
        }
        if let Some(&last) = active.last() {
            if last as usize >= dimension {
                return Err(MatrixError::ColumnOutOfRange { column: last, dimension });
            }
        }
        Ok(SparseVector { dimension, active })
    }

    /// Sorts and deduplicates `active` before validating the bound.
    pub fn from_unsorted(dimension: usize, mut active: Vec<u32>) -> Result<Self, MatrixError> {
        active.sort_unstable();
        active.dedup();
        Self::new(dimension, active)
    }

    pub fn from_dense(bits: &[bool]) -> Self {
        let active = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i as u32)
            .collect();
        SparseVector { dimension: bits.len(), active }
    }

    pub fn zeros(dimension: usize) -> Self {
        SparseVector { dimension, active: Vec::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    /// Number of ones.
    pub fn count(&self) -> usize {
        self.active.len()
    }

    pub fn contains(&self, column: u32) -> bool {
        self.active.binary_search(&column).is_ok()
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.dimension];
        for &c in &self.active {
            out[c as usize] = true;
        }
        out
    }

    /// Size of the intersection of both active sets, i.e. the dot product.
    pub fn dot(&self, other: &SparseVector) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.active, &other.active);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Size of the symmetric difference, i.e. the squared Euclidean distance.
    pub fn squared_distance(&self, other: &SparseVector) -> usize {
        self.count() + other.count() - 2 * self.dot(other)
    }

    /// Keeps only the columns in `kept` (strictly increasing) and renumbers them
    /// to their position in `kept`.
    pub fn project(&self, kept: &[u32]) -> SparseVector {
        let mut active = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.active.len() && j < kept.len() {
            match self.active[i].cmp(&kept[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    active.push(j as u32);
                    i += 1;
                    j += 1;
                }
            }
        }
        SparseVector { dimension: kept.len(), active }
    }
}

/// Cohort × feature binary matrix with aligned labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    dimension: usize,
    rows: Vec<SparseVector>,
    labels: Vec<Label>,
}

impl DesignMatrix {
    pub fn new(dimension: usize, rows: Vec<SparseVector>, labels: Vec<Label>) -> Result<Self, MatrixError> {
        if rows.len() != labels.len() {
            return Err(MatrixError::LabelCount { rows: rows.len(), labels: labels.len() });
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.dimension != dimension) {
            return Err(MatrixError::RowDimension { row, found: r.dimension, expected: dimension });
        }
        Ok(DesignMatrix { dimension, rows, labels })
    }

    /// Builds from dense 0/1 rows; convenient for small fixtures.
    pub fn from_dense(rows: &[Vec<u8>], labels: Vec<Label>) -> Result<Self, MatrixError> {
        let dimension = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| SparseVector::from_dense(&r.iter().map(|&v| v != 0).collect::<Vec<_>>()))
            .collect();
        Self::new(dimension, sparse, labels)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &SparseVector {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    /// `(positive, negative)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| l.is_positive()).count();
        (pos, self.labels.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (p, n) = self.class_counts();
        p > 0 && n > 0
    }

    /// Number of ones in every column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dimension];
        for row in &self.rows {
            for &c in row.active() {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    /// Column-major index: for each column, the rows where it is active.
    pub fn column_rows(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.dimension];
        for (i, row) in self.rows.iter().enumerate() {
            for &c in row.active() {
                cols[c as usize].push(i as u32);
            }
        }
        cols
    }

    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            dimension: self.dimension,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Restricts every row to `kept` (strictly increasing column ids).
    pub fn project_columns(&self, kept: &[u32]) -> DesignMatrix {
        DesignMatrix {
            dimension: kept.len(),
            rows: self.rows.iter().map(|r| r.project(kept)).collect(),
            labels: self.labels.clone(),
        }
    }
}
