//! Fisher discrimination term over a class-partitioned target matrix.
//!
//! For targets `T` (`c × n`) split into class blocks `T_i`:
//!
//! ```text
//! Fisher(T) = Σ_i ( ‖T_i − M_i‖² − ‖M_i − M_(i)‖² ) + ‖T‖²
//! ```
//!
//! where `M_i` repeats the class mean of `T_i` and `M_(i)` repeats the global
//! mean column over the same `n_i` columns. Its gradient is `4T + 2M − 4M̂`.

use crate::{Error, Matrix, Result};

/// Class index per column, with every class non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl Partition {
    pub fn new(labels: &[usize], n_classes: usize) -> Result<Self> {
        let mut counts = vec![0; n_classes];
        for &l in labels {
            if l >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    classes: n_classes,
                });
            }
            counts[l] += 1;
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class });
        }
        Ok(Partition {
            labels: labels.to_vec(),
            counts,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Replicated class-mean (`M̂`) and global-mean (`M`) matrices, both `c × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrices {
    pub class_means: Matrix,
    pub global_mean: Matrix,
}

/// Mean column of each class, as a `rows × classes` matrix.
pub fn class_centroids(t: &Matrix, partition: &Partition) -> Matrix {
    assert_eq!(t.ncols(), partition.len(), "target columns vs. partition length");
    let mut centroids = Matrix::zeros(t.nrows(), partition.n_classes());
    for (col, &l) in t.column_iter().zip(partition.labels()) {
        let mut acc = centroids.column_mut(l);
        acc += col;
    }
    for (mut c, &count) in centroids.column_iter_mut().zip(partition.counts()) {
        c /= count as f64;
    }
    centroids
}

pub fn mean_matrices(t: &Matrix, partition: &Partition) -> MeanMatrices {
    let centroids = class_centroids(t, partition);
    let global = t.column_mean();
    let n = t.ncols();
    let class_means = Matrix::from_fn(t.nrows(), n, |r, j| centroids[(r, partition.labels()[j])]);
    let global_mean = Matrix::from_fn(t.nrows(), n, |r, _| global[r]);
    MeanMatrices {
        class_means,
        global_mean,
    }
}

/// Within-class and between-class scatter, `(Σ‖T_i − M_i‖², Σ‖M_i − M_(i)‖²)`.
pub fn scatter(t: &Matrix, partition: &Partition) -> (f64, f64) {
    let MeanMatrices {
        class_means,
        global_mean,
    } = mean_matrices(t, partition);
    let within = (t - &class_means).norm_squared();
    let between = (&class_means - &global_mean).norm_squared();
    (within, between)
}

pub fn fisher_value(t: &Matrix, partition: &Partition) -> f64 {
    let (within, between) = scatter(t, partition);
    within - between + t.norm_squared()
}

/// `4T + 2M − 4M̂` with the means taken from `t` itself.
pub fn fisher_gradient(t: &Matrix, partition: &Partition) -> Matrix {
    let m = mean_matrices(t, partition);
    t * 4.0 + m.global_mean * 2.0 - m.class_means * 4.0
}
