use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::ClaimRecord;
use crate::error::{Error, Result};
use crate::ingest::Publisher;

pub const DEFAULT_SPLIT_SEED: u64 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ClaimRecord>,
    pub test: Vec<ClaimRecord>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub ratio: f64,
    pub train: usize,
    pub test: usize,
}

/// Number of training items: `floor(n * ratio)`, with a small tolerance so
/// that products like `10 * 0.7` are not pushed below an integer by
/// rounding error.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio) + 1e-9).floor() as usize
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

pub fn check_ratio(n: usize, ratio: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("cannot split {n} records")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("split ratio {ratio} outside (0, 1)")));
    }
    Ok(())
}

pub fn split_dataset(records: &[ClaimRecord], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    check_ratio(records.len(), ratio)?;
    let order = shuffled_indices(records.len(), seed);
    let cut = train_size(records.len(), ratio);
    let pick = |ids: &[usize]| ids.iter().map(|&i| records[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&order[..cut]),
        test: pick(&order[cut..]),
        seed,
    })
}

/// Records from one publisher, order preserved.
pub fn subset(records: &[ClaimRecord], publisher: Publisher) -> Vec<ClaimRecord> {
    records
        .iter()
        .filter(|r| r.publisher == publisher)
        .cloned()
        .collect()
}
