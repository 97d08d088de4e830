use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{DataError, Dataset, Example};
use crate::scalar::Scalar;

/// How raw labels become ±1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelMap {
    /// `1 → +1`, `0`/`-1 → -1`; any other label is kept as is.
    Auto,
    /// Exactly two raw labels; `positive → +1`, `negative → -1`, anything else is an error.
    Pair { positive: f64, negative: f64 },
    /// Labels are kept verbatim.
    Raw,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap::Auto
    }
}

#[derive(Debug, Clone, Default)]
pub struct LibsvmOptions {
    pub labels: LabelMap,
    /// Declared dimension; the maximum index seen is used when absent.
    pub num_features: Option<usize>,
}

fn map_label(raw: f64, map: LabelMap, line: usize) -> Result<f64, DataError> {
    match map {
        LabelMap::Raw => Ok(raw),
        LabelMap::Auto => Ok(if raw == 1.0 {
            1.0
        } else if raw == 0.0 || raw == -1.0 {
            -1.0
        } else {
            raw
        }),
        LabelMap::Pair { positive, negative } => {
            if raw == positive {
                Ok(1.0)
            } else if raw == negative {
                Ok(-1.0)
            } else {
                Err(DataError::Parse { line, message: format!("label {raw} not in configured pair") })
            }
        }
    }
}

/// Parses `label idx:val idx:val ...` lines with 1-based ascending indices.
/// Blank lines and `#` comments are ignored.
pub fn parse_libsvm<F: Scalar, R: Read>(input: R, opts: &LibsvmOptions) -> Result<Dataset<F>, DataError> {
    let reader = BufReader::new(input);
    let mut examples = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_ascii_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let raw: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line: line_no,
            message: format!("invalid label {label_tok:?}"),
        })?;
        let label = map_label(raw, opts.labels, line_no)?;
        let mut features = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                message: format!("expected index:value, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: line_no,
                message: format!("invalid feature index {idx:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| DataError::Parse {
                line: line_no,
                message: format!("invalid feature value {val:?}"),
            })?;
            if idx == 0 || idx <= prev {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("feature index {idx} is not 1-based ascending"),
                });
            }
            prev = idx;
            if val != 0.0 {
                features.push(((idx - 1) as u32, F::lit(val)));
            }
        }
        max_index = max_index.max(prev);
        examples.push(Example { features, label: F::lit(label) });
    }
    if examples.is_empty() {
        return Err(DataError::Empty);
    }
    let num_features = match opts.num_features {
        Some(n) if n < max_index => {
            return Err(DataError::FeatureOutOfRange { index: max_index - 1, num_features: n })
        }
        Some(n) => n,
        None => max_index,
    };
    Ok(Dataset { examples, num_features })
}

/// Reads a libsvm file, transparently inflating gzip input.
pub fn load_libsvm<F: Scalar>(path: impl AsRef<Path>, opts: &LibsvmOptions) -> Result<Dataset<F>, DataError> {
    let mut file = BufReader::new(File::open(path)?);
    let gz = {
        let head = file.fill_buf()?;
        head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b
    };
    if gz {
        parse_libsvm(GzDecoder::new(file), opts)
    } else {
        parse_libsvm(file, opts)
    }
}
