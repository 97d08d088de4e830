//! Datasets, libsvm ingestion and client partitioning.

mod libsvm;
mod partition;
mod synthetic;

pub use libsvm::{load_libsvm, parse_libsvm, LabelMap, LibsvmOptions};
pub use partition::{partition, PartitionSpec};
pub use synthetic::{two_class, TwoClassSpec};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input contains no examples")]
    Empty,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("number of clients must be at least 1")]
    NoClients,
    #[error("cannot split {examples} examples across {clients} clients")]
    TooManyClients { clients: usize, examples: usize },
    #[error("iid fraction must lie in [0, 100], got {0}")]
    BadFraction(f64),
    #[error("feature index {index} is outside declared dimension {num_features}")]
    FeatureOutOfRange { index: usize, num_features: usize },
}

/// One labelled example with sparse features. Indices are zero-based and
/// strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<F> {
    pub features: Vec<(u32, F)>,
    pub label: F,
}

impl<F: Scalar> Example<F> {
    /// `⟨features, theta⟩`
    #[inline]
    pub fn dot(&self, theta: &[F]) -> F {
        self.features
            .iter()
            .fold(F::zero(), |acc, &(j, v)| acc + v * theta[j as usize])
    }

    pub fn norm_sq(&self) -> F {
        self.features.iter().map(|&(_, v)| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub examples: Vec<Example<F>>,
    pub num_features: usize,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(examples: Vec<Example<F>>, num_features: usize) -> Result<Self, DataError> {
        for e in &examples {
            if let Some(&(j, _)) = e.features.last() {
                if j as usize >= num_features {
                    return Err(DataError::FeatureOutOfRange { index: j as usize, num_features });
                }
            }
        }
        Ok(Self { examples, num_features })
    }

    /// Builds a dataset from dense rows.
    pub fn from_dense(rows: &[(Vec<F>, F)]) -> Self {
        let num_features = rows.iter().map(|(x, _)| x.len()).max().unwrap_or(0);
        let examples = rows
            .iter()
            .map(|(x, y)| Example {
                features: x
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(j, &v)| (j as u32, v))
                    .collect(),
                label: *y,
            })
            .collect();
        Self { examples, num_features }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<F> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Zero-pads to `num_features`; never shrinks.
    pub fn pad_features(&mut self, num_features: usize) {
        self.num_features = self.num_features.max(num_features);
    }
}

/// Brings two datasets to a common dimension (the larger of the two).
pub fn align_features<F: Scalar>(a: &mut Dataset<F>, b: &mut Dataset<F>) {
    let n = a.num_features.max(b.num_features);
    a.pad_features(n);
    b.pad_features(n);
}
