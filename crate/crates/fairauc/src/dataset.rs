//! Dataset ingestion, group selection, splitting, and sampling.
//!
//! Every data point carries a dense feature vector, a ±1 label, and a ±1
//! sensitive attribute. Groups of interest ("protected positives",
//! "unprotected", "everyone", …) are described by [`GroupSelector`]s; the
//! fairness metrics and the training kernels are phrased as conditional
//! expectations over such groups, so the only group machinery needed here is
//! membership tests and empirical probabilities.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One observation: dense features, a ±1 label, and a ±1 sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub features: Vec<f64>,
    /// +1 or −1.
    pub label: i8,
    /// +1 (protected) or −1 (unprotected).
    pub sensitive: i8,
}

/// An immutable collection of points sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    feature_dim: usize,
}

impl Dataset {
    /// Builds a dataset, checking that it is nonempty and rectangular.
    pub fn new(points: Vec<DataPoint>, feature_dim: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if feature_dim == 0 {
            return Err(Error::InvalidConfig {
                field: "feature_dim".into(),
                message: "must be at least 1".into(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != feature_dim {
                return Err(Error::LengthMismatch {
                    expected: feature_dim,
                    got: p.features.len(),
                    context: "feature vector length",
                });
            }
            if p.label != 1 && p.label != -1 {
                return Err(Error::InvalidConfig {
                    field: format!("points[{i}].label"),
                    message: "must be +1 or -1".into(),
                });
            }
            if p.sensitive != 1 && p.sensitive != -1 {
                return Err(Error::InvalidConfig {
                    field: format!("points[{i}].sensitive"),
                    message: "must be +1 or -1".into(),
                });
            }
        }
        Ok(Self {
            points,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DataPoint {
        &self.points[i]
    }
}

/// Label half of a group description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFilter {
    Positive,
    Negative,
    Any,
}

/// Sensitive-attribute half of a group description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitiveFilter {
    Protected,
    Unprotected,
    Any,
}

/// A conjunction of a label filter and a sensitive filter, e.g.
/// "protected positives" or "everyone".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSelector {
    pub label: LabelFilter,
    pub sensitive: SensitiveFilter,
}

impl GroupSelector {
    pub const fn new(label: LabelFilter, sensitive: SensitiveFilter) -> Self {
        Self { label, sensitive }
    }

    /// All positives, regardless of sensitive attribute.
    pub const fn positives() -> Self {
        Self::new(LabelFilter::Positive, SensitiveFilter::Any)
    }

    /// All negatives, regardless of sensitive attribute.
    pub const fn negatives() -> Self {
        Self::new(LabelFilter::Negative, SensitiveFilter::Any)
    }

    /// The whole space.
    pub const fn everyone() -> Self {
        Self::new(LabelFilter::Any, SensitiveFilter::Any)
    }

    pub fn matches(&self, p: &DataPoint) -> bool {
        let label_ok = match self.label {
            LabelFilter::Positive => p.label == 1,
            LabelFilter::Negative => p.label == -1,
            LabelFilter::Any => true,
        };
        let sens_ok = match self.sensitive {
            SensitiveFilter::Protected => p.sensitive == 1,
            SensitiveFilter::Unprotected => p.sensitive == -1,
            SensitiveFilter::Any => true,
        };
        label_ok && sens_ok
    }
}

impl std::fmt::Display for GroupSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match (self.label, self.sensitive) {
            (LabelFilter::Any, SensitiveFilter::Any) => "everyone",
            (LabelFilter::Positive, SensitiveFilter::Any) => "positives",
            (LabelFilter::Negative, SensitiveFilter::Any) => "negatives",
            (LabelFilter::Any, SensitiveFilter::Protected) => "protected",
            (LabelFilter::Any, SensitiveFilter::Unprotected) => "unprotected",
            (LabelFilter::Positive, SensitiveFilter::Protected) => "protected positives",
            (LabelFilter::Positive, SensitiveFilter::Unprotected) => "unprotected positives",
            (LabelFilter::Negative, SensitiveFilter::Protected) => "protected negatives",
            (LabelFilter::Negative, SensitiveFilter::Unprotected) => "unprotected negatives",
        };
        f.write_str(name)
    }
}

/// Options for [`parse_libsvm_with`].
#[derive(Debug, Clone)]
pub struct LibsvmOptions {
    /// 1-based index of the feature that encodes the sensitive attribute.
    pub sensitive_index: usize,
    /// Values strictly above this threshold are treated as protected (+1).
    pub sensitive_threshold: f64,
    /// Keep the sensitive feature in the feature vector (default: true).
    pub keep_sensitive: bool,
}

/// Parses sparse `label index:value …` text (the common SVM-light layout).
///
/// Feature indices are 1-based and must be strictly increasing within a line;
/// missing indices are zero. The feature dimension is the largest index seen
/// anywhere in the file. The sensitive attribute is derived by thresholding
/// the feature at `sensitive_index` and the sensitive feature column is kept
/// in the feature vector.
pub fn parse_libsvm(text: &str, sensitive_index: usize, sensitive_threshold: f64) -> Result<Dataset> {
    parse_libsvm_with(
        text,
        &LibsvmOptions {
            sensitive_index,
            sensitive_threshold,
            keep_sensitive: true,
        },
    )
}

/// [`parse_libsvm`] with control over whether the sensitive column stays in
/// the feature vector.
pub fn parse_libsvm_with(text: &str, opts: &LibsvmOptions) -> Result<Dataset> {
    struct Row {
        label: i8,
        entries: Vec<(usize, f64)>,
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut dim = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label = match label_tok {
            "+1" | "1" => 1i8,
            "-1" => -1i8,
            other => {
                return Err(Error::SparseParse {
                    line: lineno,
                    message: format!("label {other:?} is not +1 or -1"),
                })
            }
        };
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut last_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::SparseParse {
                line: lineno,
                message: format!("token {tok:?} is not of the form index:value"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::SparseParse {
                line: lineno,
                message: format!("feature index {idx_s:?} is not a positive integer"),
            })?;
            if idx == 0 {
                return Err(Error::SparseParse {
                    line: lineno,
                    message: "feature indices are 1-based; found index 0".into(),
                });
            }
            if idx <= last_index {
                return Err(Error::SparseParse {
                    line: lineno,
                    message: format!(
                        "feature indices must be strictly increasing ({idx} follows {last_index})"
                    ),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::SparseParse {
                line: lineno,
                message: format!("feature value {val_s:?} is not a number"),
            })?;
            if !val.is_finite() {
                return Err(Error::SparseParse {
                    line: lineno,
                    message: format!("feature value {val_s:?} is not finite"),
                });
            }
            last_index = idx;
            entries.push((idx, val));
        }
        dim = dim.max(last_index);
        rows.push(Row { label, entries });
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.sensitive_index == 0 || opts.sensitive_index > dim {
        return Err(Error::SensitiveIndexOutOfRange {
            index: opts.sensitive_index,
            dim,
        });
    }

    let points = rows
        .into_iter()
        .map(|row| {
            let mut features = vec![0.0; dim];
            for (idx, val) in row.entries {
                features[idx - 1] = val;
            }
            let sensitive = if features[opts.sensitive_index - 1] > opts.sensitive_threshold {
                1i8
            } else {
                -1i8
            };
            if !opts.keep_sensitive {
                features.remove(opts.sensitive_index - 1);
            }
            DataPoint {
                features,
                label: row.label,
                sensitive,
            }
        })
        .collect();

    let final_dim = if opts.keep_sensitive { dim } else { dim - 1 };
    Dataset::new(points, final_dim)
}

/// Serializes a dataset in the sparse `label index:value …` layout, writing
/// only nonzero features. Reparsing the output with the same sensitive
/// settings reproduces the dataset.
pub fn serialize_libsvm(d: &Dataset) -> String {
    let mut out = String::new();
    for p in d.points() {
        out.push_str(if p.label == 1 { "+1" } else { "-1" });
        for (i, v) in p.features.iter().enumerate() {
            if *v != 0.0 {
                out.push_str(&format!(" {}:{:?}", i + 1, v));
            }
        }
        out.push('\n');
    }
    out
}

/// Options for [`parse_csv_with`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Header name of the label column.
    pub label_column: String,
    /// Header name of the sensitive-attribute column.
    pub sensitive_column: String,
    /// Cell value that maps to label +1; every other value maps to −1.
    pub positive_label: String,
    /// Cell value that maps to sensitive +1; every other value maps to −1.
    pub protected_token: String,
    /// Keep the sensitive column among the features, recoded ±1 at its
    /// original position (default: false, i.e. drop it).
    pub keep_sensitive: bool,
}

/// Parses comma-separated text with a header row.
///
/// The label column maps to +1 exactly when the cell equals `positive_label`,
/// the sensitive column to +1 exactly when the cell equals `protected_token`.
/// All remaining columns must be numeric and become features in header order;
/// the sensitive column itself is left out of the features.
pub fn parse_csv(
    text: &str,
    label_column: &str,
    sensitive_column: &str,
    positive_label: &str,
    protected_token: &str,
) -> Result<Dataset> {
    parse_csv_with(
        text,
        &CsvOptions {
            label_column: label_column.into(),
            sensitive_column: sensitive_column.into(),
            positive_label: positive_label.into(),
            protected_token: protected_token.into(),
            keep_sensitive: false,
        },
    )
}

/// [`parse_csv`] with control over whether the sensitive column stays among
/// the features (recoded ±1 when kept).
pub fn parse_csv_with(text: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::CsvParse {
            row: 0,
            column: "<header>".into(),
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let label_col = headers
        .iter()
        .position(|h| h == &opts.label_column)
        .ok_or_else(|| Error::MissingColumn(opts.label_column.clone()))?;
    let sens_col = headers
        .iter()
        .position(|h| h == &opts.sensitive_column)
        .ok_or_else(|| Error::MissingColumn(opts.sensitive_column.clone()))?;
    if label_col == sens_col {
        return Err(Error::InvalidConfig {
            field: "sensitive_column".into(),
            message: "label and sensitive columns must differ".into(),
        });
    }

    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvParse {
            row,
            column: "<record>".into(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::CsvParse {
                row,
                column: "<record>".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let label = if record[label_col] == *opts.positive_label {
            1i8
        } else {
            -1i8
        };
        let sensitive = if record[sens_col] == *opts.protected_token {
            1i8
        } else {
            -1i8
        };
        let mut features = Vec::with_capacity(headers.len().saturating_sub(1));
        for (c, cell) in record.iter().enumerate() {
            if c == label_col {
                continue;
            }
            if c == sens_col {
                if opts.keep_sensitive {
                    features.push(f64::from(sensitive));
                }
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                row,
                column: headers[c].clone(),
                message: format!("cell {cell:?} is not numeric"),
            })?;
            features.push(v);
        }
        points.push(DataPoint {
            features,
            label,
            sensitive,
        });
    }

    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = points[0].features.len();
    Dataset::new(points, dim)
}

/// Splits a dataset into train/validation/test by a seeded shuffle.
///
/// Sizes are the floors of `fractions × n` with the remainder assigned to the
/// train split. Fractions must be positive and sum to 1 (±1e-9); the call
/// fails if any resulting split would be empty.
pub fn split(d: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| *f <= 0.0) {
        return Err(Error::InvalidFractions {
            fractions,
            message: "all fractions must be positive".into(),
        });
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions {
            fractions,
            message: format!("fractions sum to {sum}, expected 1"),
        });
    }

    let n = d.len();
    let n_valid = (fractions[1] * n as f64).floor() as usize;
    let n_test = (fractions[2] * n as f64).floor() as usize;
    let n_train_floor = (fractions[0] * n as f64).floor() as usize;
    let n_train = n - n_valid - n_test; // floor(train) + remainder
    debug_assert!(n_train >= n_train_floor);

    for (name, sz) in [("train", n_train), ("valid", n_valid), ("test", n_test)] {
        if sz == 0 {
            return Err(Error::EmptySplit {
                name,
                n,
                fractions,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher–Yates, explicit so the permutation depends only on the seed.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }

    let take = |range: std::ops::Range<usize>| -> Result<Dataset> {
        let pts = order[range]
            .iter()
            .map(|&i| d.point(i).clone())
            .collect::<Vec<_>>();
        Dataset::new(pts, d.feature_dim())
    };
    let train = take(0..n_train)?;
    let valid = take(n_train..n_train + n_valid)?;
    let test = take(n_train + n_valid..n)?;
    Ok((train, valid, test))
}

/// Empirical probability of a group: matching points / total points.
pub fn group_probability(d: &Dataset, g: &GroupSelector) -> f64 {
    let count = d.points().iter().filter(|p| g.matches(p)).count();
    count as f64 / d.len() as f64
}

/// Draws a with-replacement uniform sample of point indices.
pub fn sample_indices<R: Rng>(d: &Dataset, size: usize, rng: &mut R) -> Vec<usize> {
    (0..size).map(|_| rng.random_range(0..d.len())).collect()
}

/// Draws a with-replacement uniform minibatch.
pub fn sample_minibatch<R: Rng>(d: &Dataset, size: usize, rng: &mut R) -> Vec<DataPoint> {
    sample_indices(d, size, rng)
        .into_iter()
        .map(|i| d.point(i).clone())
        .collect()
}

/// Parameters of the synthetic biased-Gaussian generator.
///
/// Feature 0 is shifted by `group_shift` for protected points; the remaining
/// coordinates carry the label signal (`label_separation` along the
/// normalized all-ones direction). Positive rates that differ between groups
/// make the sensitive attribute informative about the label, so an
/// unconstrained scorer learns to exploit feature 0 and acquires a group
/// score gap — which is exactly what a fairness budget then has to trade off.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub feature_dim: usize,
    pub protected_fraction: f64,
    pub positive_rate_protected: f64,
    pub positive_rate_unprotected: f64,
    pub label_separation: f64,
    pub group_shift: f64,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 500,
            feature_dim: 6,
            protected_fraction: 0.35,
            positive_rate_protected: 0.65,
            positive_rate_unprotected: 0.35,
            label_separation: 0.8,
            group_shift: 1.2,
            noise: 1.0,
        }
    }
}

/// Draws a synthetic dataset per [`SyntheticSpec`], deterministically in the
/// seed.
pub fn synthetic_biased_gaussians(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::EmptyDataset);
    }
    if spec.feature_dim < 2 {
        return Err(Error::InvalidConfig {
            field: "feature_dim".into(),
            message: "synthetic generator needs at least 2 features".into(),
        });
    }
    for (field, v) in [
        ("protected_fraction", spec.protected_fraction),
        ("positive_rate_protected", spec.positive_rate_protected),
        ("positive_rate_unprotected", spec.positive_rate_unprotected),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidConfig {
                field: field.into(),
                message: format!("{v} is not a probability"),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = spec.feature_dim;
    let signal_scale = spec.label_separation / ((p - 1) as f64).sqrt();

    let points = (0..spec.n)
        .map(|_| {
            let protected = rng.random_bool(spec.protected_fraction);
            let pos_rate = if protected {
                spec.positive_rate_protected
            } else {
                spec.positive_rate_unprotected
            };
            let positive = rng.random_bool(pos_rate);
            let gamma = if protected { 1.0 } else { -1.0 };
            let zeta = if positive { 1.0 } else { -1.0 };
            let mut features = Vec::with_capacity(p);
            for k in 0..p {
                let mean = if k == 0 {
                    gamma * spec.group_shift
                } else {
                    zeta * signal_scale
                };
                features.push(mean + spec.noise * normal.sample(&mut rng));
            }
            DataPoint {
                features,
                label: if positive { 1 } else { -1 },
                sensitive: if protected { 1 } else { -1 },
            }
        })
        .collect();

    Dataset::new(points, p)
}
