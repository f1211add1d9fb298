use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::mode::{TravelMode, NUM_CLASSES};
use crate::seed;

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    Ok(())
}

/// Shuffles `0..n` and cuts it into `k` contiguous folds whose sizes differ
/// by at most one (the first `n % k` folds get the extra row).
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Class-stratified folds: each class is shuffled, the classes are
/// concatenated and rows are dealt to folds round-robin.
pub fn stratified_kfold(labels: &[TravelMode], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_k(labels.len(), k)?;
    let mut rng = seed::rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in by_class(labels) {
        let mut class = class;
        class.shuffle(&mut rng);
        for i in class {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified `(train, validation)` split with `round(fraction·n_c)`
/// validation rows taken from each class.
pub fn stratified_holdout(labels: &[TravelMode], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = seed::rng(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in by_class(labels) {
        let mut class = class;
        class.shuffle(&mut rng);
        let cut = (fraction * class.len() as f64).round() as usize;
        val.extend_from_slice(&class[..cut]);
        train.extend_from_slice(&class[cut..]);
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} rows are too few for a {fraction} holdout",
            labels.len()
        )));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Row indices outside the given fold.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

fn by_class(labels: &[TravelMode]) -> [Vec<usize>; NUM_CLASSES] {
    let mut out: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        out[l.index()].push(i);
    }
    out
}
