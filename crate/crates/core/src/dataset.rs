//! Labeled sample matrices, columnwise standardization and per-class summaries.
//!
//! Class labels are stored internally as a dense range `1..=K`. Whatever ids
//! were supplied at ingestion are kept in [`LabeledMatrix::class_ids`] so that
//! results can always be reported against the caller's own labels.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample standard deviations below this are treated as zero.
const ZERO_VARIANCE: f64 = 1e-300;

/// An unordered pair of classes, identified by their original label ids.
///
/// The order matters for the sign of discriminant scores: positive scores side
/// with `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ClassPair {
    pub a: i64,
    pub b: i64,
}

impl ClassPair {
    pub fn new(a: i64, b: i64) -> Self {
        ClassPair { a, b }
    }

    pub fn swapped(self) -> Self {
        ClassPair {
            a: self.b,
            b: self.a,
        }
    }
}

impl std::fmt::Display for ClassPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

impl std::str::FromStr for ClassPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['-', ','])
            .ok_or_else(|| Error::InvalidParameter(format!("class pair `{s}`: expected A-B")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidParameter(format!("class pair `{s}`: bad class id")))
        };
        let pair = ClassPair::new(parse(a)?, parse(b)?);
        if pair.a == pair.b {
            return Err(Error::InvalidParameter(format!(
                "class pair `{s}` names the same class twice"
            )));
        }
        Ok(pair)
    }
}

impl From<ClassPair> for String {
    fn from(pair: ClassPair) -> String {
        pair.to_string()
    }
}

impl TryFrom<String> for ClassPair {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Dense `n × p` feature matrix (row-major) with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    labels: Vec<usize>,
    class_ids: Vec<i64>,
    feature_names: Vec<String>,
}

impl LabeledMatrix {
    /// Builds a matrix from row-major values and arbitrary integer labels.
    ///
    /// Distinct label ids are sorted and mapped onto `1..=K`; the mapping is
    /// retained in [`class_ids`](Self::class_ids).
    pub fn new(values: Vec<f64>, p: usize, labels: &[i64]) -> Result<Self> {
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::with_feature_names(values, names, labels)
    }

    pub fn with_feature_names(
        values: Vec<f64>,
        feature_names: Vec<String>,
        labels: &[i64],
    ) -> Result<Self> {
        let p = feature_names.len();
        let n = labels.len();
        if p == 0 {
            return Err(Error::InvalidData("matrix has no feature columns".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidData(format!(
                "{} values cannot form {n} rows of {p} features",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            )));
        }
        let class_ids: Vec<i64> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if class_ids.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least two classes, found {}",
                class_ids.len()
            )));
        }
        let labels = labels
            .iter()
            .map(|id| class_ids.binary_search(id).map(|k| k + 1).unwrap_or(0))
            .collect();
        Ok(LabeledMatrix {
            n,
            p,
            values,
            labels,
            class_ids,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.class_ids.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    /// Dense class index in `1..=K` for every row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Original label id of row `i`.
    pub fn label_id(&self, i: usize) -> i64 {
        self.class_ids[self.labels[i] - 1]
    }

    /// Original label ids, indexed by dense class index minus one.
    pub fn class_ids(&self) -> &[i64] {
        &self.class_ids
    }

    /// Dense class index (`1..=K`) of an original label id.
    pub fn class_index(&self, id: i64) -> Option<usize> {
        self.class_ids.binary_search(&id).ok().map(|k| k + 1)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_count(&self, id: i64) -> usize {
        match self.class_index(id) {
            Some(k) => self.labels.iter().filter(|&&l| l == k).count(),
            None => 0,
        }
    }

    /// Rows whose label is one of `ids`, in their original order.
    pub fn rows_of_classes(&self, ids: &[i64]) -> Vec<usize> {
        let wanted: Vec<usize> = ids.iter().filter_map(|&id| self.class_index(id)).collect();
        (0..self.n).filter(|&i| wanted.contains(&self.labels[i])).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<LabeledMatrix> {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            values.extend_from_slice(self.row(i));
            labels.push(self.label_id(i));
        }
        LabeledMatrix::with_feature_names(values, self.feature_names.clone(), &labels)
    }

    /// Keeps only the rows of the given classes.
    pub fn restrict_to_classes(&self, ids: &[i64]) -> Result<LabeledMatrix> {
        for &id in ids {
            if self.class_index(id).is_none() {
                return Err(Error::MissingClass(id));
            }
        }
        self.select_rows(&self.rows_of_classes(ids))
    }

    pub fn restrict_to_pair(&self, pair: ClassPair) -> Result<LabeledMatrix> {
        self.restrict_to_classes(&[pair.a, pair.b])
    }

    /// Stacks the rows of `other` below `self`.
    pub fn concat(&self, other: &LabeledMatrix) -> Result<LabeledMatrix> {
        if other.p != self.p {
            return Err(Error::InvalidData(format!(
                "cannot stack {} features onto {}",
                other.p, self.p
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let labels: Vec<i64> = (0..self.n)
            .map(|i| self.label_id(i))
            .chain((0..other.n).map(|i| other.label_id(i)))
            .collect();
        LabeledMatrix::with_feature_names(values, self.feature_names.clone(), &labels)
    }

    pub fn with_values(&self, values: Vec<f64>) -> LabeledMatrix {
        assert_eq!(values.len(), self.values.len());
        LabeledMatrix {
            values,
            ..self.clone()
        }
    }

    /// Reads the `label,x1,...,xp` CSV layout.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledMatrix> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file).map_err(|e| match e {
            Error::InvalidData(message) => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<LabeledMatrix> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("label") {
            return Err(Error::InvalidData("first column must be `label`".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != names.len() + 1 {
                return Err(Error::InvalidData(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    names.len() + 1
                )));
            }
            let label = record[0].trim().parse::<i64>().map_err(|_| {
                Error::InvalidData(format!("row {}: label `{}` is not an integer", line + 1, &record[0]))
            })?;
            labels.push(label);
            for field in record.iter().skip(1) {
                let v = field.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!("row {}: `{field}` is not a number", line + 1))
                })?;
                values.push(v);
            }
        }
        LabeledMatrix::with_feature_names(values, names, &labels)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.p + 1);
        header.push("label".to_string());
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(self.p + 1);
        for i in 0..self.n {
            record.clear();
            record.push(self.label_id(i).to_string());
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Column centers and scales learned on one matrix, applicable to new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ColumnScaling {
    /// Sample mean and standard deviation (divisor `n - 1`) of every column.
    pub fn fit(data: &LabeledMatrix) -> Result<ColumnScaling> {
        let (n, p) = (data.n(), data.p());
        if n < 2 {
            return Err(Error::InvalidData("standardization needs at least two rows".into()));
        }
        let mut mean = vec![0.0; p];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; p];
        for i in 0..n {
            for ((s, x), m) in ss.iter_mut().zip(data.row(i)).zip(&mean) {
                let d = x - m;
                *s += d * d;
            }
        }
        let sd: Vec<f64> = ss.iter().map(|s| (s / (n - 1) as f64).sqrt()).collect();
        if let Some(j) = sd.iter().position(|&s| !(s > ZERO_VARIANCE)) {
            return Err(Error::ZeroVarianceColumn(j));
        }
        Ok(ColumnScaling { mean, sd })
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.sd) {
            *o = (x - m) / s;
        }
    }

    pub fn apply(&self, data: &LabeledMatrix) -> LabeledMatrix {
        let p = data.p();
        let mut values = vec![0.0; data.values().len()];
        for (i, out) in values.chunks_mut(p).enumerate() {
            self.apply_row(data.row(i), out);
        }
        data.with_values(values)
    }
}

/// Rescales every column to sample mean 0 and sample standard deviation 1.
pub fn standardize_columns(data: &LabeledMatrix) -> Result<LabeledMatrix> {
    Ok(ColumnScaling::fit(data)?.apply(data))
}

/// Per-class counts and means, plus pooled within-class standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub class_ids: Vec<i64>,
    pub class_counts: Vec<usize>,
    /// `K` rows of length `p`.
    pub class_means: Vec<Vec<f64>>,
    /// Pooled within-class sd, divisor `n - K`. Falls back to 1 when there are
    /// no within-class degrees of freedom and is floored away from zero.
    pub pooled_sd: Vec<f64>,
}

impl ClassSummary {
    pub fn p(&self) -> usize {
        self.pooled_sd.len()
    }

    pub fn n(&self) -> usize {
        self.class_counts.iter().sum()
    }

    fn index(&self, id: i64) -> Result<usize> {
        self.class_ids
            .iter()
            .position(|&c| c == id)
            .ok_or(Error::MissingClass(id))
    }

    pub fn means(&self, id: i64) -> Result<&[f64]> {
        Ok(&self.class_means[self.index(id)?])
    }

    pub fn count(&self, id: i64) -> Result<usize> {
        Ok(self.class_counts[self.index(id)?])
    }

    /// `mean_a - mean_b` for every feature.
    pub fn mean_difference(&self, pair: ClassPair) -> Result<Vec<f64>> {
        let a = self.means(pair.a)?;
        let b = self.means(pair.b)?;
        Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }

    /// Mean difference in units of the pooled within-class standard deviation.
    ///
    /// This is the screening statistic: it lives on the same scale as the
    /// within-class correlation matrix, and it does not change when a column
    /// is rescaled.
    pub fn standardized_difference(&self, pair: ClassPair) -> Result<Vec<f64>> {
        let mut d = self.mean_difference(pair)?;
        for (x, s) in d.iter_mut().zip(&self.pooled_sd) {
            *x /= s;
        }
        Ok(d)
    }
}

/// Computes class counts, class means and pooled within-class deviations.
pub fn class_summaries(data: &LabeledMatrix) -> Result<ClassSummary> {
    let (n, p, k) = (data.n(), data.p(), data.k());
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0; p]; k];
    for i in 0..n {
        let c = data.labels()[i] - 1;
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    for (c, (m, &cnt)) in means.iter_mut().zip(&counts).enumerate() {
        if cnt == 0 {
            return Err(Error::EmptyClass(data.class_ids()[c]));
        }
        m.iter_mut().for_each(|v| *v /= cnt as f64);
    }
    let mut ss = vec![0.0; p];
    for i in 0..n {
        let c = data.labels()[i] - 1;
        for ((s, x), m) in ss.iter_mut().zip(data.row(i)).zip(&means[c]) {
            let d = x - m;
            *s += d * d;
        }
    }
    let df = n.saturating_sub(k);
    let pooled_sd = ss
        .iter()
        .map(|&s| {
            if df == 0 {
                1.0
            } else {
                (s / df as f64).sqrt().max(1e-12)
            }
        })
        .collect();
    Ok(ClassSummary {
        class_ids: data.class_ids().to_vec(),
        class_counts: counts,
        class_means: means,
        pooled_sd,
    })
}
