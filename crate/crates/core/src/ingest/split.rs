use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ColumnarTable;
use crate::error::{Error, Result};

/// Disjoint train/test partition of one table.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: ColumnarTable,
    pub test: ColumnarTable,
    /// Row indices of the source table, ascending.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Training rows allotted to a class of `n` rows: `ratio * n` rounded half up.
pub fn train_quota(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 + 0.5).floor() as usize).min(n)
}

/// Stratified split: each class sends [`train_quota`] rows, picked by a
/// seeded shuffle, to train and the rest to test. Both sides keep the
/// source row order.
pub fn stratified_split(table: &ColumnarTable, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); table.n_classes()];
    for (i, &c) in table.labels().iter().enumerate() {
        by_class[c as usize].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(table.class_names()[c].clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::with_capacity(table.n_rows());
    let mut test_rows = Vec::with_capacity(table.n_rows());
    for mut rows in by_class {
        let q = train_quota(rows.len(), ratio);
        rows.shuffle(&mut rng);
        train_rows.extend_from_slice(&rows[..q]);
        test_rows.extend_from_slice(&rows[q..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitPair {
        train: table.select_rows(&train_rows),
        test: table.select_rows(&test_rows),
        train_rows,
        test_rows,
        seed,
        ratio,
    })
}
