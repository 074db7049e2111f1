//! Structural similarity between row features.
//!
//! Two rows of `n` partitions are compared by the Euclidean distance of their
//! coverage features, normalized by `sqrt(n)` (the distance between an empty
//! row and a fully covered one). The similarity score is one minus that
//! normalized distance.

use crate::error::{Error, Result};
use crate::row_model::FeatureVector;

/// Default similarity threshold for calling two rows similar.
pub const DEFAULT_TH_SIM: f64 = 0.8;

fn check_dims(fu: &FeatureVector, fv: &FeatureVector) -> Result<()> {
    if fu.len() != fv.len() {
        return Err(Error::Dimension {
            left: fu.len(),
            right: fv.len(),
        });
    }
    Ok(())
}

pub fn euclidean_distance(fu: &FeatureVector, fv: &FeatureVector) -> Result<f64> {
    check_dims(fu, fv)?;
    let sum: f64 = fu
        .values()
        .iter()
        .zip(fv.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum.sqrt())
}

/// Euclidean distance divided by the maximal distance `sqrt(n)`.
pub fn normalized_distance(fu: &FeatureVector, fv: &FeatureVector) -> Result<f64> {
    let d = euclidean_distance(fu, fv)?;
    if fu.is_empty() {
        return Err(Error::InvalidInput("empty feature vectors".into()));
    }
    Ok(d / (fu.len() as f64).sqrt())
}

/// Row similarity score in `[0, 1]`.
///
/// Entries above 1 (only possible when regions overlap in x) can push the
/// normalized distance past 1; the score is clamped at 0 in that case.
pub fn tssm(fu: &FeatureVector, fv: &FeatureVector) -> Result<f64> {
    let dist = normalized_distance(fu, fv)?;
    Ok((1.0 - dist).clamp(0.0, 1.0))
}

#[inline]
pub fn is_similar(score: f64, th_sim: f64) -> bool {
    score >= th_sim
}

/// Symmetric matrix of pairwise scores with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.size && j < self.size, "index out of range");
        self.values[i * self.size + j]
    }

    /// Row-major copy as nested vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.size.max(1))
            .take(self.size)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Scores of consecutive pairs `(i, i + 1)`.
    pub fn adjacent(&self) -> Vec<f64> {
        (1..self.size).map(|i| self.get(i - 1, i)).collect()
    }

    /// Scores of every unordered pair `i < j`.
    pub fn upper_pairs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * self.size.saturating_sub(1) / 2);
        for i in 0..self.size {
            for j in i + 1..self.size {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Square sub-matrix over the index range `rows`.
    pub fn slice(&self, rows: std::ops::Range<usize>) -> SimilarityMatrix {
        assert!(rows.end <= self.size);
        let size = rows.len();
        let mut values = Vec::with_capacity(size * size);
        for i in rows.clone() {
            for j in rows.clone() {
                values.push(self.get(i, j));
            }
        }
        SimilarityMatrix { size, values }
    }
}

pub fn pairwise_tssm(features: &[FeatureVector]) -> Result<SimilarityMatrix> {
    let size = features.len();
    if let Some(first) = features.first() {
        for f in features {
            check_dims(first, f)?;
        }
    }
    let mut values = vec![0.0; size * size];
    for i in 0..size {
        values[i * size + i] = 1.0;
        for j in i + 1..size {
            let s = tssm(&features[i], &features[j])?;
            values[i * size + j] = s;
            values[j * size + i] = s;
        }
    }
    Ok(SimilarityMatrix { size, values })
}
