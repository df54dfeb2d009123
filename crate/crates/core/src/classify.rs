//! Nearest-neighbour classification in the projected label space.

use crate::par::{self, Parallelism};
use crate::solvers::Projection;
use crate::{Error, Matrix, Result};

/// Projected training samples `QX` with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGallery {
    features: Matrix,
    labels: Vec<usize>,
}

impl ProjectedGallery {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.ncols() != labels.len() {
            return Err(Error::Shape(format!(
                "gallery has {} columns but {} labels",
                features.ncols(),
                labels.len()
            )));
        }
        Ok(ProjectedGallery { features, labels })
    }

    /// Projects training samples with `q`.
    pub fn from_training(q: &Projection, x: &Matrix, labels: &[usize]) -> Result<Self> {
        Self::new(project(q, x)?, labels.to_vec())
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

pub fn project(q: &Projection, x: &Matrix) -> Result<Matrix> {
    let q = q.matrix();
    if q.ncols() != x.nrows() {
        return Err(Error::Shape(format!(
            "projection expects {} features, samples have {}",
            q.ncols(),
            x.nrows()
        )));
    }
    Ok(q * x)
}

pub fn nn_predict(gallery: &ProjectedGallery, probes: &Matrix) -> Result<Vec<usize>> {
    nn_predict_with(gallery, probes, Parallelism::Sequential)
}

/// Label of the Euclidean-nearest gallery column for every probe column.
/// Ties go to the lowest gallery index.
pub fn nn_predict_with(gallery: &ProjectedGallery, probes: &Matrix, parallelism: Parallelism) -> Result<Vec<usize>> {
    if gallery.labels.is_empty() {
        return Err(Error::InvalidParameter("gallery is empty".into()));
    }
    if gallery.features.nrows() != probes.nrows() {
        return Err(Error::Shape(format!(
            "gallery rows {} vs probe rows {}",
            gallery.features.nrows(),
            probes.nrows()
        )));
    }
    Ok(par::map_indexed(probes.ncols(), parallelism, |p| {
        let probe = probes.column(p);
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (g, col) in gallery.features.column_iter().enumerate() {
            let dist = (col - probe).norm_squared();
            if dist < best_dist {
                best_dist = dist;
                best = g;
            }
        }
        gallery.labels[best]
    }))
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter("no samples to score".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}
