use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffled k-fold partition of `0..n`. The first `n % k` folds get one extra
/// row. Index lists are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));

    let mut assignment = vec![0usize; n];
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[start..start + size] {
            assignment[i] = f;
        }
        start += size;
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train) = (0..n).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

/// Splits `0..n` into (train, holdout) with `round(n * fraction)` holdout rows.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<Fold> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let n_hold = (n as f64 * fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut validation = order[..n_hold].to_vec();
    let mut train = order[n_hold..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(Fold { train, validation })
}
