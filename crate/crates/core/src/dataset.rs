//! Labelled feature datasets: CSV ingest, normalization, one-hot encoding,
//! per-class splits, random projection and synthetic blobs.
//!
//! Features are stored with samples as columns (`d × n`). CSV files use the
//! opposite, rows-as-samples layout and are transposed on load.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// A labelled dataset with samples stored as columns.
///
/// Datasets built through [`Dataset::new`] have at least one sample in every
/// class. The test half returned by [`split_per_class`] keeps the full class
/// list but may leave some classes empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let ds = Self::from_parts(features, labels, class_names)?;
        if let Some(class) = ds.class_counts().iter().position(|&count| count == 0) {
            return Err(Error::EmptyClass { class });
        }
        Ok(ds)
    }

    fn from_parts(features: Matrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if features.ncols() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature columns but {} labels",
                features.ncols(),
                labels.len()
            )));
        }
        let classes = class_names.len();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Dataset {
            features,
            labels,
            class_names,
        })
    }

    /// Dataset whose classes are named by their index.
    pub fn with_indexed_classes(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (0..n_classes).map(|i| i.to_string()).collect();
        Self::new(features, labels, names)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Label names in index order (first-appearance order for CSV input).
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Same labels, new features (column count must match).
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        Self::from_parts(features, self.labels.clone(), self.class_names.clone())
    }

    /// Columns at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let features = self.features.select_columns(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset {
            features,
            labels,
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Skip the first line of the file.
    pub skip_header: bool,
}

/// Loads a CSV whose first column is the label and remaining columns are
/// real-valued features. Label strings are mapped to indices in order of
/// first appearance.
pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let first_row = if opts.skip_header { 2 } else { 1 };
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;

    for (i, record) in rdr.records().enumerate() {
        let row = first_row + i;
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                message: "expected a label followed by at least one feature".into(),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }

        let name = &record[0];
        let label = *index_of.entry(name.to_string()).or_insert_with(|| {
            class_names.push(name.to_string());
            class_names.len() - 1
        });
        labels.push(label);

        for (col, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {}: {cell:?} is not a number", col + 1),
            })?;
            values.push(v);
        }
    }

    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    let d = width - 1;
    // `values` is row-major per sample, i.e. column-major for a d × n matrix.
    let features = Matrix::from_vec(d, labels.len(), values);
    Dataset::new(features, labels, class_names)
}

/// Writes `ds` in the layout accepted by [`load_csv`].
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut record = Vec::with_capacity(ds.dim() + 1);
    for (j, col) in ds.features.column_iter().enumerate() {
        record.clear();
        record.push(ds.class_names[ds.labels[j]].clone());
        record.extend(col.iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Scales every nonzero column to unit Euclidean norm.
pub fn normalize_columns(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    l2_normalize_in_place(&mut out.features);
    out
}

fn l2_normalize_in_place(x: &mut Matrix) {
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
}

/// How samples are normalized before fitting and before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Unit ℓ2 norm per sample.
    #[default]
    L2,
    /// Per-feature standardization with statistics from the training set.
    #[value(name = "zscore")]
    ZScore,
    None,
}

impl Normalization {
    /// Fits the scheme on training features.
    pub fn fit(self, train: &Matrix) -> Normalizer {
        match self {
            Normalization::L2 => Normalizer::L2,
            Normalization::None => Normalizer::Identity,
            Normalization::ZScore => {
                let n = train.ncols().max(1) as f64;
                let mut mean = Vec::with_capacity(train.nrows());
                let mut scale = Vec::with_capacity(train.nrows());
                for row in train.row_iter() {
                    let m = row.sum() / n;
                    let var = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                    mean.push(m);
                    scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
                }
                Normalizer::ZScore { mean, scale }
            }
        }
    }
}

/// A fitted normalization, applied identically to training and probe samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    L2,
    ZScore { mean: Vec<f64>, scale: Vec<f64> },
    Identity,
}

impl Normalizer {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        match self {
            Normalizer::L2 => l2_normalize_in_place(&mut out),
            Normalizer::Identity => {}
            Normalizer::ZScore { mean, scale } => {
                for mut col in out.column_iter_mut() {
                    for (i, v) in col.iter_mut().enumerate() {
                        *v = (*v - mean[i]) / scale[i];
                    }
                }
            }
        }
        out
    }
}

/// Binary one-hot targets, `c × n`; entry `(j, i)` is 1 iff sample `i` is in class `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix(Matrix);

impl LabelMatrix {
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Self {
        let mut h = Matrix::zeros(n_classes, labels.len());
        for (i, &l) in labels.iter().enumerate() {
            h[(l, i)] = 1.0;
        }
        LabelMatrix(h)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

pub fn build_label_matrix(ds: &Dataset) -> LabelMatrix {
    LabelMatrix::from_labels(&ds.labels, ds.n_classes())
}

/// Draws `k` training samples from every class; the rest form the test set.
/// Both halves keep the original column order.
pub fn split_per_class(ds: &Dataset, k: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if k == 0 {
        return Err(Error::InvalidParameter("samples per class must be at least 1".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some((class, m)) = members.iter().enumerate().find(|(_, m)| m.len() < k) {
        return Err(Error::SplitTooLarge {
            requested: k,
            class,
            available: m.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; ds.n_samples()];
    for m in &mut members {
        m.shuffle(&mut rng);
        for &i in &m[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.n_samples()).partition(|&i| in_train[i]);
    Ok((ds.select(&train), ds.select(&test)))
}

/// Replaces features by `R·X` with `R` a `target_dim × d` standard-normal matrix.
pub fn random_projection(ds: &Dataset, target_dim: usize, seed: u64) -> Result<Dataset> {
    if target_dim == 0 {
        return Err(Error::InvalidParameter("projection dimension must be at least 1".into()));
    }
    let r = gaussian_matrix(target_dim, ds.dim(), seed);
    project_features(ds, &r)
}

/// Applies an explicit projection matrix to the features.
pub fn project_features(ds: &Dataset, r: &Matrix) -> Result<Dataset> {
    if r.ncols() != ds.dim() {
        return Err(Error::Shape(format!(
            "projection has {} columns, features have {} rows",
            r.ncols(),
            ds.dim()
        )));
    }
    ds.with_features(r * &ds.features)
}

/// `rows × cols` matrix of i.i.d. N(0, 1) entries, filled row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_row_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)),
    )
}

/// Isotropic Gaussian clusters, one per class. Class centers are drawn from
/// N(0, I); each sample adds `spread`·N(0, I) noise to its center. Samples
/// are laid out class by class and classes are named `"0"`, `"1"`, ...
pub fn synth_blobs(classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "classes, per-class and dimension must all be at least 1".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParameter(format!("spread must be positive, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = classes * per_class;
    let mut features = Matrix::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..classes {
        let center: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for s in 0..per_class {
            let j = class * per_class + s;
            for (i, c) in center.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[(i, j)] = c + spread * noise;
            }
            labels.push(class);
        }
    }
    Dataset::with_indexed_classes(features, labels, classes)
}
