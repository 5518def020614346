//! Headered CSV datasets with per-feature min-max normalization.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::models::LogisticTask;
use crate::seeding;

/// Which column holds the label; every other column is a feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub label_column: String,
}

impl DatasetSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
        }
    }
}

/// Features scaled to `[0, 1]` per column and raw labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl DatasetFile {
    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.num_features();
        &self.features[i * f..(i + 1) * f]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Distinct label values in increasing order; a row's class index is
    /// its label's position here.
    pub fn classes(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.labels.clone();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    fn class_index(&self) -> (Vec<usize>, usize) {
        let classes = self.classes();
        let idx = self
            .labels
            .iter()
            .map(|y| classes.binary_search_by(|c| c.total_cmp(y)).expect("label present"))
            .collect();
        (idx, classes.len())
    }

    /// Logistic task over `rows`, with classes indexed over the whole file.
    pub fn logistic_task(&self, rows: &[usize], reg: f64) -> Result<LogisticTask> {
        let (idx, classes) = self.class_index();
        let mut features = Vec::with_capacity(rows.len() * self.num_features());
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        let labels = rows.iter().map(|&i| idx[i]).collect();
        LogisticTask::new(features, labels, self.num_features(), classes, reg)
    }
}

fn dataset_error(path: &Path, row: Option<usize>, column: Option<String>, message: impl Into<String>) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        row,
        column,
        message: message.into(),
    }
}

/// Reads a comma-separated numeric table with a header row.
///
/// Rows are numbered from 1 for the first data row. Constant feature
/// columns normalize to 0.
pub fn load_csv_dataset(path: &Path, schema: &DatasetSchema) -> Result<DatasetFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| dataset_error(path, None, None, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| dataset_error(path, None, None, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_at = header
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| {
            dataset_error(path, None, Some(schema.label_column.clone()), "label column missing from header")
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_at)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(dataset_error(path, None, None, "no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| dataset_error(path, Some(row), None, e.to_string()))?;
        if record.len() != header.len() {
            return Err(dataset_error(
                path,
                Some(row),
                None,
                format!("expected {} cells, found {}", header.len(), record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| dataset_error(path, Some(row), Some(header[j].clone()), format!("not a finite number: {cell:?}")))?;
            if j == label_at {
                labels.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(dataset_error(path, None, None, "no data rows"));
    }
    normalize_columns(&mut features, feature_names.len());
    Ok(DatasetFile {
        feature_names,
        features,
        labels,
    })
}

fn normalize_columns(data: &mut [f64], width: usize) {
    for j in 0..width {
        let col = data.iter().skip(j).step_by(width);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for v in data.iter_mut().skip(j).step_by(width) {
            *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
}

/// Disjoint train/test row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws exactly `train_per_class` training and `test_per_class` test rows
/// from every class, without replacement.
pub fn balanced_subsample(dataset: &DatasetFile, train_per_class: usize, test_per_class: usize, seed: u64) -> Result<Split> {
    let mut by_class: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, y) in dataset.labels.iter().enumerate() {
        by_class.entry(y.to_bits()).or_default().push(i);
    }
    let mut rng = seeding::rng(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    let mut classes: Vec<(f64, Vec<usize>)> = by_class.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
    classes.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (label, mut rows) in classes {
        let need = train_per_class + test_per_class;
        if rows.len() < need {
            return Err(Error::InvalidParameter {
                name: "per-class count",
                value: need as f64,
                reason: if label.is_finite() { "exceeds the class population" } else { "invalid label" },
            });
        }
        rows.shuffle(&mut rng);
        split.train.extend_from_slice(&rows[..train_per_class]);
        split.test.extend_from_slice(&rows[train_per_class..need]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn normalizes_and_zeroes_constant_columns() {
        let f = write("a,b,y\n0,3,1\n10,3,0\n");
        let d = load_csv_dataset(f.path(), &DatasetSchema::new("y")).unwrap();
        assert_eq!(d.row(0), &[0.0, 0.0]);
        assert_eq!(d.row(1), &[1.0, 0.0]);
        assert_eq!(d.labels(), &[1.0, 0.0]);
        assert_eq!(d.num_rows(), 2);
    }

    #[test]
    fn reports_positions() {
        let f = write("a,y\n1,0\nx,1\n");
        match load_csv_dataset(f.path(), &DatasetSchema::new("y")) {
            Err(Error::Dataset { row: Some(2), column: Some(c), .. }) => assert_eq!(c, "a"),
            other => panic!("{other:?}"),
        }
        let f = write("a,y\n1,0\n2\n");
        assert!(matches!(
            load_csv_dataset(f.path(), &DatasetSchema::new("y")),
            Err(Error::Dataset { row: Some(2), .. })
        ));
        let f = write("a,b\n1,0\n");
        assert!(matches!(
            load_csv_dataset(f.path(), &DatasetSchema::new("y")),
            Err(Error::Dataset { row: None, column: Some(_), .. })
        ));
    }

    #[test]
    fn balanced_split() {
        let mut text = String::from("f,y\n");
        for i in 0..30 {
            text.push_str(&format!("{i},{}\n", if i % 3 == 0 { 1 } else { 0 }));
        }
        let f = write(&text);
        let d = load_csv_dataset(f.path(), &DatasetSchema::new("y")).unwrap();
        let s = balanced_subsample(&d, 6, 4, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (12, 8));
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        for class in [0.0, 1.0] {
            assert_eq!(s.train.iter().filter(|&&i| d.labels()[i] == class).count(), 6);
            assert_eq!(s.test.iter().filter(|&&i| d.labels()[i] == class).count(), 4);
        }
        assert!(balanced_subsample(&d, 8, 3, 1).is_err());
        let task = d.logistic_task(&s.train, 0.001).unwrap();
        assert_eq!(task.num_classes(), 2);
    }
}
