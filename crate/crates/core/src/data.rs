//! Sample/dataset model, CSV ingestion, synthetic fixtures and seeded splits.
//!
//! The on-disk format is one row per sample with header
//! `ch_0,...,ch_{d-1},label,subject`. Class and subject ids are dense
//! integers starting at 0.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub subject: usize,
}

/// A validated, immutable collection of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    dims: usize,
    num_classes: usize,
    num_subjects: usize,
}

impl Dataset {
    pub fn new(
        samples: Vec<LabeledSample>,
        dims: usize,
        num_classes: usize,
        num_subjects: usize,
    ) -> Result<Self> {
        if dims == 0 || num_classes == 0 || num_subjects == 0 {
            return Err(Error::Input(format!(
                "dataset needs positive dims/classes/subjects, got d={dims}, K={num_classes}, S={num_subjects}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    got: s.features.len(),
                });
            }
            if let Some(ch) = s.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "sample {i} has non-finite value in channel {ch}"
                )));
            }
            if s.label >= num_classes {
                return Err(Error::Label {
                    label: s.label,
                    num_class: num_classes,
                });
            }
            if s.subject >= num_subjects {
                return Err(Error::Input(format!(
                    "sample {i} has subject {} but only {num_subjects} subjects are declared",
                    s.subject
                )));
            }
        }
        Ok(Self {
            samples,
            dims,
            num_classes,
            num_subjects,
        })
    }

    /// Infer `K` and `S` as `max + 1`, rejecting gaps in either id range.
    pub fn from_samples(samples: Vec<LabeledSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InsufficientData("cannot infer dataset shape from zero samples".into()))?;
        let dims = first.features.len();
        let num_classes = samples.iter().map(|s| s.label).max().unwrap_or(0) + 1;
        let num_subjects = samples.iter().map(|s| s.subject).max().unwrap_or(0) + 1;
        check_dense(samples.iter().map(|s| s.label), num_classes, "class")?;
        check_dense(samples.iter().map(|s| s.subject), num_subjects, "subject")?;
        Self::new(samples, dims, num_classes, num_subjects)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_subjects(&self) -> usize {
        self.num_subjects
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Same labels and subjects, new feature vectors (which may change `d`).
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.samples.len() {
            return Err(Error::Dimension {
                expected: self.samples.len(),
                got: features.len(),
            });
        }
        let dims = features.first().map_or(self.dims, Vec::len);
        let samples = self
            .samples
            .iter()
            .zip(features)
            .map(|(s, features)| LabeledSample {
                features,
                label: s.label,
                subject: s.subject,
            })
            .collect();
        Self::new(samples, dims, self.num_classes, self.num_subjects)
    }

    /// Rows at `indices`, in the given order, keeping the declared shape.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            dims: self.dims,
            num_classes: self.num_classes,
            num_subjects: self.num_subjects,
        }
    }
}

fn check_dense(ids: impl Iterator<Item = usize>, count: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; count];
    for id in ids {
        seen[id] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(Error::Schema(format!(
            "{what} ids must be dense from 0; id {missing} is missing below max {}",
            count - 1
        ))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Optional declared shape for CSV ingestion. Undeclared counts are inferred.
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub num_classes: Option<usize>,
    pub num_subjects: Option<usize>,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_csv_with(path, CsvOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let dims = parse_header(&header)?;

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != dims + 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} cells, found {}", dims + 2, record.len()),
            });
        }
        let mut features = Vec::with_capacity(dims);
        for ch in 0..dims {
            let cell = &record[ch];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("ch_{ch}: '{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("ch_{ch}: non-finite value '{cell}'"),
                });
            }
            features.push(v);
        }
        let label = parse_id(&record[dims], row, "label", opts.num_classes)?;
        let subject = parse_id(&record[dims + 1], row, "subject", opts.num_subjects)?;
        samples.push(LabeledSample {
            features,
            label,
            subject,
        });
    }

    match (opts.num_classes, opts.num_subjects) {
        (Some(k), Some(s)) => Dataset::new(samples, dims, k, s),
        _ => {
            if samples.is_empty() {
                return Err(Error::Schema(
                    "file has no data rows and no declared shape".into(),
                ));
            }
            let k = match opts.num_classes {
                Some(k) => k,
                None => {
                    let k = samples.iter().map(|s| s.label).max().unwrap_or(0) + 1;
                    check_dense(samples.iter().map(|s| s.label), k, "class")?;
                    k
                }
            };
            let s = match opts.num_subjects {
                Some(s) => s,
                None => {
                    let s = samples.iter().map(|s| s.subject).max().unwrap_or(0) + 1;
                    check_dense(samples.iter().map(|s| s.subject), s, "subject")?;
                    s
                }
            };
            Dataset::new(samples, dims, k, s)
        }
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<usize> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 {
        return Err(Error::Schema(format!(
            "header needs ch_0..ch_{{d-1}},label,subject; found {} columns",
            cols.len()
        )));
    }
    let dims = cols.len() - 2;
    for (i, name) in cols[..dims].iter().enumerate() {
        if *name != format!("ch_{i}") {
            return Err(Error::Schema(format!(
                "column {i} should be 'ch_{i}', found '{name}'"
            )));
        }
    }
    if cols[dims] != "label" {
        return Err(Error::Schema(format!(
            "expected 'label' column, found '{}'",
            cols[dims]
        )));
    }
    if cols[dims + 1] != "subject" {
        return Err(Error::Schema(format!(
            "expected 'subject' column, found '{}'",
            cols[dims + 1]
        )));
    }
    Ok(dims)
}

fn parse_id(cell: &str, row: usize, what: &str, bound: Option<usize>) -> Result<usize> {
    let id: usize = cell.parse().map_err(|_| Error::Parse {
        row,
        message: format!("{what} '{cell}' is not a non-negative integer"),
    })?;
    if let Some(bound) = bound {
        if id >= bound {
            return Err(Error::Parse {
                row,
                message: format!("{what} {id} out of range (declared {bound})"),
            });
        }
    }
    Ok(id)
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.dims()).map(|i| format!("ch_{i}")).collect();
    header.push("label".into());
    header.push("subject".into());
    wtr.write_record(&header)?;
    for s in ds.samples() {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(s.label.to_string());
        row.push(s.subject.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(ds, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Train-set size for `n` samples: `round(fraction * n)`.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).round() as usize
}

/// Uniform (unstratified) seeded shuffle split. Both sides keep input row order.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(ds.len(), spec)?;
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n_train = train_size(n, spec.train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(Error::Split(format!(
            "{n} samples at fraction {} leave an empty side (train = {n_train})",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(spec.seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn class_histogram(ds: &Dataset) -> Vec<usize> {
    let mut counts = vec![0; ds.num_classes()];
    for s in ds.samples() {
        counts[s.label] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// Synthetic fixtures
// ---------------------------------------------------------------------------

/// Isotropic Gaussian mixture with one cell per (class, subject).
///
/// Each class owns a sign pattern of amplitude `class_separation / 2` per
/// channel, so two class centroids differ by exactly `class_separation` on
/// every channel where their patterns disagree. Subjects add a Gaussian
/// offset of scale `subject_jitter`, and every sample shares a fixed random
/// channel profile of scale `baseline` (the common resting level that keeps
/// Pearson similarity well defined on structure-free data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub num_subjects: usize,
    pub dims: usize,
    pub samples_per_cell: usize,
    pub class_separation: f64,
    pub subject_jitter: f64,
    pub noise_sigma: f64,
    #[serde(default)]
    pub baseline: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Desk-scale analogue of the 64-channel, 5-class, 20-subject motor imagery layout.
    pub fn motor_imagery() -> Self {
        Self {
            num_classes: 5,
            num_subjects: 20,
            dims: 64,
            samples_per_cell: 40,
            class_separation: 0.6,
            subject_jitter: 0.3,
            noise_sigma: 1.0,
            baseline: 2.0,
            seed: 2018,
        }
    }

    /// 14-channel, 6-class, 5-subject headset layout.
    pub fn case_study() -> Self {
        Self {
            num_classes: 6,
            num_subjects: 5,
            dims: 14,
            samples_per_cell: 60,
            class_separation: 1.2,
            subject_jitter: 0.3,
            noise_sigma: 1.0,
            baseline: 2.0,
            seed: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_subjects == 0 || self.dims == 0 || self.samples_per_cell == 0 {
            return Err(Error::Spec("all counts must be positive".into()));
        }
        let reals = [
            ("class_separation", self.class_separation),
            ("subject_jitter", self.subject_jitter),
            ("baseline", self.baseline),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Spec(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(Error::Spec(format!(
                "noise_sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if self.class_separation > 0.0 && self.dims < 63 && (1u64 << self.dims) < self.num_classes as u64 {
            return Err(Error::Spec(format!(
                "{} dims cannot hold {} distinct class patterns",
                self.dims, self.num_classes
            )));
        }
        Ok(())
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.dims;
    let mut prng = rng::derived(spec.seed, "synth/structure");

    let baseline: Vec<f64> = (0..d)
        .map(|_| spec.baseline * Distribution::<f64>::sample(&StandardNormal, &mut prng))
        .collect();

    let half = spec.class_separation / 2.0;
    let mut patterns: Vec<Vec<bool>> = Vec::with_capacity(spec.num_classes);
    while patterns.len() < spec.num_classes {
        let candidate: Vec<bool> = (0..d).map(|_| prng.random()).collect();
        if spec.class_separation == 0.0 || !patterns.contains(&candidate) {
            patterns.push(candidate);
        }
    }

    let offsets: Vec<Vec<f64>> = (0..spec.num_subjects)
        .map(|_| {
            (0..d)
                .map(|_| spec.subject_jitter * Distribution::<f64>::sample(&StandardNormal, &mut prng))
                .collect()
        })
        .collect();

    let mut noise = rng::derived(spec.seed, "synth/samples");
    let mut samples = Vec::with_capacity(spec.num_classes * spec.num_subjects * spec.samples_per_cell);
    for (label, pattern) in patterns.iter().enumerate() {
        for (subject, offset) in offsets.iter().enumerate() {
            for _ in 0..spec.samples_per_cell {
                let features = (0..d)
                    .map(|ch| {
                        let sign = if pattern[ch] { half } else { -half };
                        let eps: f64 = StandardNormal.sample(&mut noise);
                        baseline[ch] + sign + offset[ch] + spec.noise_sigma * eps
                    })
                    .collect();
                samples.push(LabeledSample {
                    features,
                    label,
                    subject,
                });
            }
        }
    }
    Dataset::new(samples, d, spec.num_classes, spec.num_subjects)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f64>, label: usize, subject: usize) -> LabeledSample {
        LabeledSample {
            features,
            label,
            subject,
        }
    }

    #[test]
    fn load_three_rows() {
        let text = "ch_0,ch_1,label,subject\n1.0,2.0,0,0\n-3e-1,4,1,0\n5,6.5,1,0\n";
        let ds = read_csv(text.as_bytes(), CsvOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dims(), 2);
        assert!(ds.num_classes() >= 2);
        assert!(ds.num_subjects() >= 1);
        assert_eq!(ds.samples()[1].features, vec![-0.3, 4.0]);
    }

    #[test]
    fn missing_subject_column() {
        let text = "ch_0,ch_1,label\n1,2,0\n";
        assert!(matches!(
            read_csv(text.as_bytes(), CsvOptions::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn extra_column_is_schema_error() {
        let text = "ch_0,label,subject,notes\n1,0,0,x\n";
        assert!(matches!(
            read_csv(text.as_bytes(), CsvOptions::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn nan_cell_names_row() {
        let text = "ch_0,ch_1,ch_2,ch_3,label,subject\n0,0,0,0,0,0\n1,1,1,NaN,0,0\n";
        match read_csv(text.as_bytes(), CsvOptions::default()) {
            Err(Error::Parse { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("ch_3"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_with_declared_classes() {
        let text = "ch_0,label,subject\n1,0,0\n2,5,0\n";
        let opts = CsvOptions {
            num_classes: Some(3),
            num_subjects: None,
        };
        assert!(matches!(
            read_csv(text.as_bytes(), opts),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn label_gap_is_rejected() {
        let text = "ch_0,label,subject\n1,0,0\n2,2,0\n";
        assert!(matches!(
            read_csv(text.as_bytes(), CsvOptions::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn negative_label_is_parse_error() {
        let text = "ch_0,label,subject\n1,-1,0\n";
        assert!(matches!(
            read_csv(text.as_bytes(), CsvOptions::default()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let samples = (0..100).map(|i| sample(vec![i as f64], i % 2, 0)).collect();
        let ds = Dataset::new(samples, 1, 2, 1).unwrap();
        let (train, test) = split(
            &ds,
            SplitSpec {
                train_fraction: 0.95,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(train.len(), 95);
        assert_eq!(test.len(), 5);
    }

    #[test]
    fn split_is_deterministic() {
        let samples = (0..10).map(|i| sample(vec![i as f64], 0, 0)).collect();
        let ds = Dataset::new(samples, 1, 1, 1).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.5,
            seed: 11,
        };
        assert_eq!(split(&ds, spec).unwrap(), split(&ds, spec).unwrap());
    }

    #[test]
    fn split_of_one_sample_fails() {
        let ds = Dataset::new(vec![sample(vec![1.0], 0, 0)], 1, 1, 1).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.5,
            seed: 0,
        };
        assert!(matches!(split(&ds, spec), Err(Error::Split(_))));
    }

    #[test]
    fn histogram_cases() {
        let empty = Dataset::new(vec![], 2, 5, 1).unwrap();
        assert_eq!(class_histogram(&empty), vec![0; 5]);
        let one = Dataset::new(vec![sample(vec![0.0, 0.0], 2, 0)], 2, 5, 1).unwrap();
        assert_eq!(class_histogram(&one), vec![0, 0, 1, 0, 0]);
    }

    #[test]
    fn histogram_of_confusion_totals() {
        // Ground-truth column totals of the reported 5-class confusion matrix.
        let totals = [4862usize, 8523, 5200, 4530, 4667];
        let samples = totals
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |_| sample(vec![0.0], c, 0)))
            .collect();
        let ds = Dataset::new(samples, 1, 5, 1).unwrap();
        let h = class_histogram(&ds);
        assert_eq!(h, totals);
        assert_eq!(h.iter().sum::<usize>(), 27782);
    }

    #[test]
    fn zero_sigma_rejected() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            ..SynthSpec::case_study()
        };
        assert!(matches!(synth_generate(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn synth_cells_are_balanced_and_deterministic() {
        let spec = SynthSpec {
            num_classes: 3,
            num_subjects: 4,
            dims: 5,
            samples_per_cell: 7,
            class_separation: 2.0,
            subject_jitter: 0.5,
            noise_sigma: 1.0,
            baseline: 1.0,
            seed: 9,
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        let mut cells = vec![vec![0; 4]; 3];
        for s in a.samples() {
            cells[s.label][s.subject] += 1;
        }
        assert!(cells.iter().flatten().all(|&c| c == 7));
    }
}
