use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hfgcn::Masks;

/// Train/validation/test node masks.
///
/// Set sizes are `round(f_train·C)` and `round(f_val·C)` with the rest going
/// to test. Within each set the classes keep the cohort's proportions as far
/// as rounding allows, and the training set gets at least one node of each
/// class. Nodes are drawn uniformly within each class.
pub fn split_nodes(labels: &[u8], fractions: [f64; 3], seed: u64) -> Result<Masks> {
    let c = labels.len();
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions {fractions:?} must lie in [0, 1] and sum to 1")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::domain(format!("labels must be 0 or 1, found {bad}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::config(format!(
            "cannot stratify {c} nodes with {} positives: both classes are needed",
            by_class[1].len()
        )));
    }

    let n_train = (fractions[0] * c as f64).round() as usize;
    let n_val = ((fractions[1] * c as f64).round() as usize).min(c - n_train);
    if n_train < 2 {
        return Err(Error::config(format!(
            "training set of {n_train} nodes cannot hold both classes; use more nodes or a larger fraction"
        )));
    }
    let pos = by_class[1].len();
    let train_pos = ((n_train * pos) as f64 / c as f64).round() as usize;
    let train_pos = train_pos.clamp(1, (n_train - 1).min(pos));
    let val_pos = ((n_val * pos) as f64 / c as f64).round() as usize;
    let val_pos = val_pos.min(pos - train_pos).min(n_val);
    // whatever the negatives cannot fill comes from the positives and vice versa
    let neg = c - pos;
    let train_neg = n_train - train_pos;
    if train_neg > neg {
        return Err(Error::config("not enough negative nodes for the training set"));
    }
    let val_neg = (n_val - val_pos).min(neg - train_neg);
    let val_pos = n_val - val_neg;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Masks {
        train: vec![false; c],
        val: vec![false; c],
        test: vec![true; c],
    };
    for (class, (k_train, k_val)) in [(train_neg, val_neg), (train_pos, val_pos)].into_iter().enumerate() {
        let mut nodes = by_class[class].clone();
        nodes.shuffle(&mut rng);
        for (rank, &i) in nodes.iter().enumerate() {
            if rank < k_train {
                masks.train[i] = true;
                masks.test[i] = false;
            } else if rank < k_train + k_val {
                masks.val[i] = true;
                masks.test[i] = false;
            }
        }
    }
    Ok(masks)
}
