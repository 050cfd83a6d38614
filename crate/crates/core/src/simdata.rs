//! Simulated benchmark data.
//!
//! Random numbers come from `ChaCha8Rng::seed_from_u64(seed)`. Feature
//! column `j` (0-based) is always drawn from ChaCha stream `j` of that
//! generator, so each column is reproducible on its own. Splits use a
//! separate generator seeded the same way on stream `u64::MAX`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{KosError, Result};
use crate::model::DataSet;

pub const MODEL1_CANDIDATES: usize = 300;
pub const MODEL2_SAMPLES: usize = 400;
pub const MODEL1_OUTER_RADIUS: f64 = 2.0 / 3.0;
pub const MODEL1_INNER_RADIUS: f64 = 2.0 / 3.0 - 0.1;
pub const MODEL1_NOISE_VARIANCE: f64 = 0.5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 2.0 / 3.0;
const MAX_ATTEMPTS: usize = 10;
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimModel {
    Model1,
    Model2,
}

impl SimModel {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Self::Model1),
            2 => Ok(Self::Model2),
            other => Err(KosError::InvalidParameter {
                name: "model",
                reason: format!("unknown simulation model {other} (expected 1 or 2)"),
            }),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Self::Model1 => 1,
            Self::Model2 => 2,
        }
    }

    pub fn generate(self, seed: u64) -> Result<DataSet> {
        match self {
            Self::Model1 => gen_model1(seed),
            Self::Model2 => gen_model2(seed),
        }
    }
}

fn column_rng(seed: u64, column: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column);
    rng
}

fn class_labels() -> [String; 2] {
    ["1".to_string(), "2".to_string()]
}

/// Class of a model-1 point from its first two features, `None` inside the
/// annulus gap.
pub fn model1_class(x1: f64, x2: f64) -> Option<usize> {
    let r = (x1 * x1 + x2 * x2).sqrt();
    if r >= MODEL1_OUTER_RADIUS {
        Some(0)
    } else if r <= MODEL1_INNER_RADIUS {
        Some(1)
    } else {
        None
    }
}

/// Class of a model-2 point: class 1 iff `x3 + sin(x4 + x1) < x2^2`.
pub fn model2_class(x: &[f64]) -> usize {
    usize::from(x[2] + (x[3] + x[0]).sin() >= x[1] * x[1])
}

fn try_model1(seed: u64) -> Result<DataSet> {
    let mut c1 = column_rng(seed, 0);
    let mut c2 = column_rng(seed, 1);
    let x1: Vec<f64> = (0..MODEL1_CANDIDATES).map(|_| c1.random_range(-1.0..=1.0)).collect();
    let x2: Vec<f64> = (0..MODEL1_CANDIDATES).map(|_| c2.random_range(-1.0..=1.0)).collect();
    let kept: Vec<(usize, usize)> = (0..MODEL1_CANDIDATES)
        .filter_map(|i| model1_class(x1[i], x2[i]).map(|c| (i, c)))
        .collect();

    let noise = Normal::new(0.0, MODEL1_NOISE_VARIANCE.sqrt()).expect("valid normal");
    let mut c3 = column_rng(seed, 2);
    let mut c4 = column_rng(seed, 3);
    let n = kept.len();
    let mut x = Array2::<f64>::zeros((n, 4));
    for (row, &(i, _)) in kept.iter().enumerate() {
        x[[row, 0]] = x1[i];
        x[[row, 1]] = x2[i];
    }
    for row in 0..n {
        x[[row, 2]] = noise.sample(&mut c3);
    }
    for row in 0..n {
        x[[row, 3]] = noise.sample(&mut c4);
    }
    let classes = kept.into_iter().map(|(_, c)| c).collect();
    DataSet::from_classes(x, classes, class_labels())
}

/// Model 1: two informative features separated by an annulus gap, plus two
/// Gaussian noise features. About 270 of the 300 candidates survive.
pub fn gen_model1(seed: u64) -> Result<DataSet> {
    for attempt in 0..MAX_ATTEMPTS as u64 {
        match try_model1(seed.wrapping_add(attempt)) {
            Err(KosError::EmptyClass(_)) => continue,
            other => return other,
        }
    }
    Err(KosError::GenerationFailed(MAX_ATTEMPTS))
}

/// Model 2: ten uniform features, the class depends on the first four.
pub fn gen_model2(seed: u64) -> Result<DataSet> {
    let p = 10;
    let mut x = Array2::<f64>::zeros((MODEL2_SAMPLES, p));
    for j in 0..p {
        let mut rng = column_rng(seed, j as u64);
        for i in 0..MODEL2_SAMPLES {
            x[[i, j]] = rng.random_range(-1.0..=1.0);
        }
    }
    let classes = x
        .rows()
        .into_iter()
        .map(|row| model2_class(row.as_slice().expect("standard layout")))
        .collect();
    DataSet::from_classes(x, classes, class_labels())
}

/// Stratified train/test split. Within each class a seeded shuffle puts the
/// first `ceil(fraction * n_k)` samples in the training set.
pub fn stratified_split(data: &DataSet, train_fraction: f64, seed: u64) -> Result<(DataSet, DataSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(KosError::InvalidParameter {
            name: "train_fraction",
            reason: format!("must lie in (0, 1), got {train_fraction}"),
        });
    }
    let mut rng = column_rng(seed, SPLIT_STREAM);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2 {
        let mut members: Vec<usize> = (0..data.n()).filter(|&i| data.classes()[i] == class).collect();
        if members.len() < 3 {
            return Err(KosError::ClassTooSmall {
                size: members.len(),
                parts: 3,
            });
        }
        members.shuffle(&mut rng);
        // guard against 2/3 * 90 landing a hair above 60
        let n_train = ((train_fraction * members.len() as f64) - 1e-9).ceil() as usize;
        let n_train = n_train.clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train)?, data.subset(&test)?))
}
