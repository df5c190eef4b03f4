//! Column-wise normalization fitted on training data and applied to any split.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMethod {
    /// `(x - min) / (max - min)`
    MinMax,
    /// `x / sum(x)`
    Unity,
    /// `(x - mean) / std`
    ZScore,
}

impl NormalizationMethod {
    pub const ALL: [NormalizationMethod; 3] = [Self::MinMax, Self::Unity, Self::ZScore];

    pub fn name(self) -> &'static str {
        match self {
            Self::MinMax => "minmax",
            Self::Unity => "unity",
            Self::ZScore => "zscore",
        }
    }
}

impl fmt::Display for NormalizationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormalizationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minmax" | "min-max" => Ok(Self::MinMax),
            "unity" => Ok(Self::Unity),
            "zscore" | "z-score" => Ok(Self::ZScore),
            other => Err(Error::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

/// Per-feature statistics of the fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sum: Vec<f64>,
    pub count: usize,
    /// Always `"population"`: the standard deviation divides by the count.
    pub std_convention: String,
}

impl FeatureStats {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }
}

pub fn fit(train: &Dataset) -> Result<FeatureStats> {
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "cannot fit normalization on an empty set".into(),
        ));
    }
    let d = train.dims();
    let n = train.len() as f64;
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut sum = vec![0.0; d];
    for s in train.samples() {
        for (j, &v) in s.features.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
            sum[j] += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; d];
    for s in train.samples() {
        for (j, &v) in s.features.iter().enumerate() {
            let dv = v - mean[j];
            sq[j] += dv * dv;
        }
    }
    let std = sq.iter().map(|s| (s / n).sqrt()).collect();
    Ok(FeatureStats {
        min,
        max,
        mean,
        std,
        sum,
        count: train.len(),
        std_convention: "population".into(),
    })
}

pub fn apply(method: NormalizationMethod, stats: &FeatureStats, ds: &Dataset) -> Result<Dataset> {
    if ds.dims() != stats.dims() {
        return Err(Error::Dimension {
            expected: stats.dims(),
            got: ds.dims(),
        });
    }
    // (offset, scale) per column: x_new = (x - offset) / scale
    let columns: Vec<(f64, f64)> = (0..stats.dims())
        .map(|j| {
            let (offset, scale, reason) = match method {
                NormalizationMethod::MinMax => (stats.min[j], stats.max[j] - stats.min[j], "max equals min"),
                NormalizationMethod::Unity => (0.0, stats.sum[j], "column sum is zero"),
                NormalizationMethod::ZScore => (stats.mean[j], stats.std[j], "standard deviation is zero"),
            };
            if scale == 0.0 {
                Err(Error::DegenerateFeature {
                    method: method.name(),
                    feature: j,
                    reason,
                })
            } else {
                Ok((offset, scale))
            }
        })
        .collect::<Result<_>>()?;

    let features = ds
        .samples()
        .iter()
        .map(|s| {
            s.features
                .iter()
                .zip(&columns)
                .map(|(&x, &(offset, scale))| (x - offset) / scale)
                .collect()
        })
        .collect();
    ds.with_features(features)
}
