use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// A labeled table with a train/test split over its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Row indices of the training pool. May repeat rows (see [`duplicate_pool`]).
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn train_rows(&self) -> Vec<&[f64]> {
        self.train.iter().map(|&i| self.features[i].as_slice()).collect()
    }

    pub fn test_rows(&self) -> Vec<&[f64]> {
        self.test.iter().map(|&i| self.features[i].as_slice()).collect()
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn test_labels(&self) -> Vec<usize> {
        self.test.iter().map(|&i| self.labels[i]).collect()
    }

    /// Moves a seeded random `fraction` of the training rows to the test split.
    pub fn with_random_split(mut self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!("test_fraction must be in [0, 1), got {fraction}")));
        }
        let mut rows = self.train.clone();
        rows.shuffle(&mut rng::stream(seed, &[purpose::SPLIT]));
        let n_test = (rows.len() as f64 * fraction).round() as usize;
        let mut test: Vec<usize> = rows[..n_test].to_vec();
        let mut train: Vec<usize> = rows[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        self.test.extend(test);
        self.train = train;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::Config(format!(
                "dataset `{}` has {} classes; at least 2 are required",
                self.name,
                self.num_classes()
            )));
        }
        let train: BTreeSet<usize> = self.train.iter().copied().collect();
        if self.test.iter().any(|i| train.contains(i)) {
            return Err(Error::Config("train and test splits overlap".into()));
        }
        Ok(())
    }
}

/// Raw table before label indexing.
struct RawTable {
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn read_table(path: &Path, label_column: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| Error::format(path, e))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::format(path, format!("unknown label column `{label_column}`")))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(headers.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: headers[c].to_string(),
                message,
            };
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite cell `{cell}`")));
            }
            values.push(v);
        }
        features.push(values);
        labels.push(record[label_idx].to_string());
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(RawTable { features, labels })
}

/// Sorted class names: numerically when every name parses as a number.
fn class_order(names: &BTreeSet<&str>) -> Vec<String> {
    let mut out: Vec<&str> = names.iter().copied().collect();
    if out.iter().all(|n| n.parse::<f64>().is_ok()) {
        out.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    out.into_iter().map(str::to_string).collect()
}

fn assemble(name: String, tables: Vec<RawTable>) -> Result<(Dataset, Vec<usize>)> {
    let names: BTreeSet<&str> = tables.iter().flat_map(|t| t.labels.iter().map(String::as_str)).collect();
    let class_names = class_order(&names);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut sizes = Vec::new();
    for t in &tables {
        sizes.push(t.features.len());
        for (row, label) in t.features.iter().zip(&t.labels) {
            labels.push(class_names.iter().position(|c| c == label).expect("collected above"));
            features.push(row.clone());
        }
    }
    let n = features[0].len();
    if let Some(bad) = features.iter().find(|r| r.len() != n) {
        return Err(Error::InconsistentFeatureCount {
            expected: n,
            found: bad.len(),
        });
    }
    let dataset = Dataset {
        name,
        features,
        labels,
        class_names,
        train: Vec::new(),
        test: Vec::new(),
    };
    Ok((dataset, sizes))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

/// Reads a headered CSV. Every row goes to the training split; labels are
/// re-indexed densely and row order is preserved.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let table = read_table(path, label_column)?;
    let (mut ds, sizes) = assemble(stem(path), vec![table])?;
    ds.train = (0..sizes[0]).collect();
    ds.validate()?;
    Ok(ds)
}

/// Reads separate train and test files sharing one label indexing.
pub fn load_csv_split(train: &Path, test: &Path, label_column: &str) -> Result<Dataset> {
    let tables = vec![read_table(train, label_column)?, read_table(test, label_column)?];
    let (mut ds, sizes) = assemble(stem(train), tables)?;
    ds.train = (0..sizes[0]).collect();
    ds.test = (sizes[0]..sizes[0] + sizes[1]).collect();
    ds.validate()?;
    Ok(ds)
}

/// Repeats the training pool `factor` times; the test split is untouched.
pub fn duplicate_pool(dataset: &Dataset, factor: usize) -> Result<Dataset> {
    if factor == 0 {
        return Err(Error::Config("duplication factor must be at least 1".into()));
    }
    let mut out = dataset.clone();
    out.train = (0..factor).flat_map(|_| dataset.train.iter().copied()).collect();
    if factor > 1 {
        out.name = format!("{}_x{factor}", dataset.name);
    }
    Ok(out)
}

/// Shape of a Gaussian-cluster fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub classes: usize,
    pub features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of cluster means around the origin.
    pub spread: f64,
    /// Within-cluster standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            features: 32,
            train_per_class: 100,
            test_per_class: 50,
            spread: 1.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn sample_clusters<R: Rng>(name: &str, means: &[Vec<f64>], spec: &BlobSpec, rng: &mut R) -> Dataset {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mean) in means.iter().enumerate() {
        for k in 0..spec.train_per_class + spec.test_per_class {
            let row = mean
                .iter()
                .map(|m| m + spec.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            if k < spec.train_per_class {
                train.push(features.len());
            } else {
                test.push(features.len());
            }
            features.push(row);
            labels.push(c);
        }
    }
    Dataset {
        name: name.to_string(),
        features,
        labels,
        class_names: (0..means.len()).map(|c| c.to_string()).collect(),
        train,
        test,
    }
}

/// Seeded Gaussian clusters, one per class.
pub fn synth_blobs(spec: &BlobSpec) -> Dataset {
    let mut r = rng::stream(spec.seed, &[purpose::SYNTH, 0]);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| gaussian_vec(&mut r, spec.features, spec.spread))
        .collect();
    sample_clusters("blobs", &means, spec, &mut r)
}

/// Minimum distance between an in-distribution and an OOD cluster mean, in
/// units of the within-cluster standard deviation.
pub const OOD_MIN_SEPARATION: f64 = 6.0;

/// Default shape of the OOD fixture: 10 classes in 32 dimensions.
pub fn ood_fixture_spec(seed: u64) -> BlobSpec {
    BlobSpec {
        spread: 1.5,
        seed,
        ..BlobSpec::default()
    }
}

/// In-distribution and out-of-distribution cluster fixtures for
/// [`ood_fixture_spec`].
pub fn synth_ood_generator(seed: u64) -> (Dataset, Dataset) {
    synth_ood_pair(&ood_fixture_spec(seed))
}

/// Two cluster sets of the same shape. OOD means are rejection-sampled so
/// that every one lies at least [`OOD_MIN_SEPARATION`] within-cluster
/// standard deviations from every in-distribution mean.
pub fn synth_ood_pair(spec: &BlobSpec) -> (Dataset, Dataset) {
    let mut r = rng::stream(spec.seed, &[purpose::SYNTH, 1]);
    let in_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| gaussian_vec(&mut r, spec.features, spec.spread))
        .collect();
    let mut ood_means = Vec::with_capacity(spec.classes);
    while ood_means.len() < spec.classes {
        let candidate = gaussian_vec(&mut r, spec.features, spec.spread);
        let far = in_means
            .iter()
            .all(|m| euclidean(m, &candidate) >= OOD_MIN_SEPARATION * spec.sigma);
        if far {
            ood_means.push(candidate);
        }
    }
    let in_dist = sample_clusters("synth_in", &in_means, spec, &mut r);
    let ood = sample_clusters("synth_ood", &ood_means, spec, &mut r);
    (in_dist, ood)
}

/// Cluster means of a fixture generated by [`synth_ood_generator`].
pub fn class_means(dataset: &Dataset) -> Vec<Vec<f64>> {
    let n = dataset.feature_count();
    let mut sums = vec![vec![0.0; n]; dataset.num_classes()];
    let mut counts = vec![0usize; dataset.num_classes()];
    for (row, &l) in dataset.features.iter().zip(&dataset.labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(counts) {
        s.iter_mut().for_each(|v| *v /= c.max(1) as f64);
    }
    sums
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
