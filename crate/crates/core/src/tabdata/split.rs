use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seeded_rng;

const STREAM_MASK: u64 = 1;
const STREAM_FOLDS: u64 = 2;
const STREAM_HOLDOUT: u64 = 3;

/// Splits `keep` rows across classes in proportion to `counts`, giving every
/// class at least one row and never more than it has.
pub fn stratified_allocation(counts: &[usize], keep: usize) -> Result<Vec<usize>> {
    let total: usize = counts.iter().sum();
    if keep > total {
        return Err(Error::argument(format!(
            "cannot keep {keep} rows out of {total} labeled rows"
        )));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::argument(format!("class {c} has no labeled rows")));
    }
    if keep < counts.len() {
        return Err(Error::argument(format!(
            "keep = {keep} cannot cover all {} classes with at least one row",
            counts.len()
        )));
    }
    let quota: Vec<f64> = counts
        .iter()
        .map(|&n| keep as f64 * n as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quota.iter().map(|q| (q.floor() as usize).max(1)).collect();
    let mut sum: usize = alloc.iter().sum();
    while sum > keep {
        // Take back from the most over-allocated class that can spare a row.
        let c = (0..alloc.len())
            .filter(|&c| alloc[c] > 1)
            .max_by(|&a, &b| {
                let ea = alloc[a] as f64 - quota[a];
                let eb = alloc[b] as f64 - quota[b];
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .expect("keep >= class count");
        alloc[c] -= 1;
        sum -= 1;
    }
    while sum < keep {
        let c = (0..alloc.len())
            .filter(|&c| alloc[c] < counts[c])
            .max_by(|&a, &b| {
                let da = quota[a] - alloc[a] as f64;
                let db = quota[b] - alloc[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("keep <= total");
        alloc[c] += 1;
        sum += 1;
    }
    Ok(alloc)
}

fn indices_by_class(d: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); d.n_classes()];
    for (i, y) in d.labels().iter().enumerate() {
        if let Some(y) = y {
            by_class[*y].push(i);
        }
    }
    by_class
}

/// Keeps `keep` labeled rows chosen by stratified sampling and hides the rest.
///
/// The second dataset holds every other row (including rows that were already
/// unlabeled) with its label moved to the hidden ground-truth field.
pub fn mask_labels(d: &Dataset, keep: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut by_class = indices_by_class(d);
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let alloc = stratified_allocation(&counts, keep)?;
    let mut rng = seeded_rng(seed, STREAM_MASK);
    let mut chosen = vec![false; d.n_rows()];
    for (rows, take) in by_class.iter_mut().zip(&alloc) {
        rows.shuffle(&mut rng);
        for &i in &rows[..*take] {
            chosen[i] = true;
        }
    }
    Ok(partition(d, &chosen))
}

pub(crate) fn partition(d: &Dataset, chosen: &[bool]) -> (Dataset, Dataset) {
    let (keep, rest): (Vec<usize>, Vec<usize>) = (0..d.n_rows()).partition(|&i| chosen[i]);
    (d.subset(&keep), d.subset(&rest).hide_labels())
}

/// Per-row fold index for stratified k-fold cross-validation.
///
/// Unlabeled rows carry no fold; they belong to the training side of every fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Option<usize>>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] == Some(fold))
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len())
            .filter(|&i| self.folds[i] != Some(fold))
            .collect()
    }
}

/// Shuffles each class with `seed` and deals its rows round-robin into `k`
/// folds. The dealing position carries over between classes so fold sizes
/// stay balanced.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::argument(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut by_class = indices_by_class(d);
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < k {
            return Err(Error::argument(format!(
                "class `{}` has {} labeled rows, fewer than k = {k}",
                d.schema().class_names()[c],
                rows.len()
            )));
        }
    }
    let mut rng = seeded_rng(seed, STREAM_FOLDS);
    let mut folds = vec![None; d.n_rows()];
    let mut next = 0;
    for rows in by_class.iter_mut() {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            folds[i] = Some(next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment { k, seed, folds })
}

/// Stratified split of a labeled dataset into (train, holdout).
///
/// Each class with at least two rows contributes `round(fraction * n)` rows to
/// the holdout, clamped so both sides keep at least one row of it. Singleton
/// classes stay in train.
pub fn stratified_holdout(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::argument(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    d.required_labels()?;
    let mut by_class = indices_by_class(d);
    let mut rng = seeded_rng(seed, STREAM_HOLDOUT);
    let mut in_holdout = vec![false; d.n_rows()];
    for rows in by_class.iter_mut() {
        let n = rows.len();
        if n < 2 {
            continue;
        }
        let h = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        rows.shuffle(&mut rng);
        for &i in &rows[..h] {
            in_holdout[i] = true;
        }
    }
    let (hold, train): (Vec<usize>, Vec<usize>) = (0..d.n_rows()).partition(|&i| in_holdout[i]);
    Ok((d.subset(&train), d.subset(&hold)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabdata::FeatureSchema;
    use proptest::prelude::*;

    fn dataset(labels: &[usize]) -> Dataset {
        let schema = FeatureSchema::continuous(1, "y", &["a", "b", "c"]).unwrap();
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(schema, &rows, labels.iter().map(|&y| Some(y)).collect()).unwrap()
    }

    fn binary(labels: &[usize]) -> Dataset {
        let schema = FeatureSchema::continuous(1, "y", &["a", "b"]).unwrap();
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(schema, &rows, labels.iter().map(|&y| Some(y)).collect()).unwrap()
    }

    #[test]
    fn mask_keeps_class_balance() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let d = binary(&labels);
        let (l, u) = mask_labels(&d, 30, 0).unwrap();
        assert_eq!(l.n_rows(), 30);
        assert_eq!(l.class_counts(), vec![15, 15]);
        assert_eq!(u.n_rows(), 70);
        assert!(u.labels().iter().all(Option::is_none));
        assert!(u.hidden_labels().iter().all(Option::is_some));
    }

    #[test]
    fn mask_keep_all_leaves_nothing_unlabeled() {
        let d = binary(&[0, 1, 0, 1]);
        let (l, u) = mask_labels(&d, 4, 0).unwrap();
        assert_eq!(l.n_rows(), 4);
        assert!(u.is_empty());
    }

    #[test]
    fn mask_zero_or_too_many_is_error() {
        let d = binary(&[0, 1, 0, 1]);
        assert!(mask_labels(&d, 0, 0).is_err());
        assert!(mask_labels(&d, 1, 0).is_err());
        assert!(mask_labels(&d, 5, 0).is_err());
    }

    #[test]
    fn kfold_nine_rows_three_folds() {
        let d = binary(&[0, 0, 0, 0, 0, 0, 1, 1, 1]);
        let f = stratified_kfold(&d, 3, 0).unwrap();
        for fold in 0..3 {
            let idx = f.test_indices(fold);
            let a = idx.iter().filter(|&&i| d.label(i) == Some(0)).count();
            let b = idx.iter().filter(|&&i| d.label(i) == Some(1)).count();
            assert_eq!((a, b), (2, 1), "fold {fold}");
        }
        assert_eq!(f, stratified_kfold(&d, 3, 0).unwrap());
    }

    #[test]
    fn kfold_small_class_names_it() {
        let d = binary(&[0, 0, 0, 0, 1, 1]);
        match stratified_kfold(&d, 3, 0) {
            Err(Error::Argument(msg)) => assert!(msg.contains("`b`"), "{msg}"),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i % 4 == 0)).collect();
        let d = binary(&labels);
        let (t, h) = stratified_holdout(&d, 0.25, 7).unwrap();
        assert_eq!(h.class_counts(), vec![8, 3]);
        assert_eq!(t.n_rows() + h.n_rows(), 40);
        assert!(t.row_ids().iter().all(|id| !h.row_ids().contains(id)));
    }

    #[test]
    fn allocation_respects_minimum_per_class() {
        assert_eq!(stratified_allocation(&[98, 1, 1], 3).unwrap(), vec![1, 1, 1]);
        assert_eq!(stratified_allocation(&[98, 1, 1], 10).unwrap(), vec![8, 1, 1]);
    }

    proptest! {
        #[test]
        fn kfold_partitions_and_stratifies(
            labels in prop::collection::vec(0usize..3, 30..120),
            k in 2usize..5,
            seed in 0u64..1000,
        ) {
            let d = dataset(&labels);
            let counts = d.class_counts();
            prop_assume!(counts.iter().all(|&c| c >= k));
            let f = stratified_kfold(&d, k, seed).unwrap();
            let mut seen = vec![0; d.n_rows()];
            for fold in 0..k {
                for i in f.test_indices(fold) {
                    seen[i] += 1;
                }
                for (c, &n) in counts.iter().enumerate() {
                    let in_fold = f.test_indices(fold).iter().filter(|&&i| d.label(i) == Some(c)).count();
                    prop_assert!((in_fold as f64 - n as f64 / k as f64).abs() <= 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }

        #[test]
        fn mask_is_reproducible_partition(
            labels in prop::collection::vec(0usize..3, 10..80),
            seed in 0u64..1000,
        ) {
            let d = dataset(&labels);
            let counts = d.class_counts();
            prop_assume!(counts.iter().all(|&c| c >= 1));
            let keep = 3 + (labels.len() - 3) / 3;
            let (l1, u1) = mask_labels(&d, keep, seed).unwrap();
            let (l2, u2) = mask_labels(&d, keep, seed).unwrap();
            prop_assert_eq!(&l1, &l2);
            prop_assert_eq!(&u1, &u2);
            let mut ids: Vec<u64> = l1.row_ids().iter().chain(u1.row_ids()).copied().collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, d.row_ids().to_vec());
            let total = labels.len() as f64;
            for (c, &n) in counts.iter().enumerate() {
                let expect = keep as f64 * n as f64 / total;
                prop_assert!((l1.class_counts()[c] as f64 - expect).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
