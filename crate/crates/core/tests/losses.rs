mod support;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ocl_core::losses::{cross_entropy, max_separation, sparsity_regularizer, targeted_binary_loss, PairSoftmax};
use ocl_core::metrics::sparsity_stats;

use support::{numeric_gradient, relative_error, uniform_vec};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-4.0..4.0f64, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=16, 1usize..=5)
}

proptest! {
    #[test]
    fn column_ratio_is_bounded(w in dims().prop_flat_map(|(d, c)| matrix(d, c))) {
        let d = w.nrows() as f64;
        for col in w.columns() {
            let l2 = col.dot(&col).sqrt();
            if l2 < 1e-9 {
                continue;
            }
            let ratio = col.iter().map(|v| v.abs()).sum::<f64>() / d / l2;
            prop_assert!(ratio >= 1.0 / d - 1e-12 && ratio <= 1.0 / d.sqrt() + 1e-12);
        }
        let (ls, _) = sparsity_regularizer(w.view());
        prop_assert!(ls <= 0.0);
    }

    #[test]
    fn peak_normalized_mean_is_bounded(w in dims().prop_flat_map(|(d, c)| matrix(d, c))) {
        let d = w.nrows() as f64;
        for s in sparsity_stats(w.view()).s {
            prop_assert!(s >= 1.0 / d - 1e-12 && s <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn separation_loss_is_non_negative(
        reps in (2usize..=8, 2usize..=6).prop_flat_map(|(b, d)| matrix(b, d)),
        seed in any::<u64>(),
    ) {
        let b = reps.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..b).map(|i| i % 2 + (i / 4) % 2 * 2).collect();
        let mut active: Vec<usize> = labels.clone();
        active.sort_unstable();
        active.dedup();
        prop_assume!(active.len() >= 2);
        let proto = ndarray::Array1::from(uniform_vec(&mut rng, reps.ncols(), 0.1, 1.0));
        if let Ok((lp, _)) = max_separation(reps.view(), &labels, &active, |_| Some(proto.clone())) {
            prop_assert!(lp >= 0.0);
        }
    }

    #[test]
    fn single_pair_equals_two_class_cross_entropy(
        logits in (1usize..=8).prop_flat_map(|b| matrix(b, 4)),
        seed in any::<u64>(),
    ) {
        let b = logits.nrows();
        let labels: Vec<usize> = (0..b).map(|i| ((seed >> (2 * i)) & 3) as usize).collect();
        let (lb, _) = targeted_binary_loss(logits.view(), &labels, &[(1, 3)], PairSoftmax::Renormalized);
        let rows: Vec<usize> = (0..b).filter(|&i| labels[i] == 1 || labels[i] == 3).collect();
        let sub = Array2::from_shape_fn((rows.len(), 2), |(r, k)| logits[[rows[r], [1, 3][k]]]);
        let sub_labels: Vec<usize> = rows.iter().map(|&i| usize::from(labels[i] == 3)).collect();
        let expected = if rows.is_empty() {
            0.0
        } else {
            cross_entropy(sub.view(), &sub_labels).0 * rows.len() as f64
        };
        prop_assert!((lb - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

#[test]
fn cross_entropy_gradient_on_a_four_class_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let logits = Array2::from_shape_vec((8, 4), uniform_vec(&mut rng, 32, -3.0, 3.0)).unwrap();
    let labels = [0, 1, 2, 3, 3, 2, 1, 0];
    let (_, grad) = cross_entropy(logits.view(), &labels);
    let f = |v: &[f64]| cross_entropy(Array2::from_shape_vec((8, 4), v.to_vec()).unwrap().view(), &labels).0;
    let fd = numeric_gradient(f, logits.as_slice().unwrap(), 1e-5);
    assert!(relative_error(grad.as_slice().unwrap(), &fd) < 1e-6);
}

#[test]
fn binary_loss_gradient_with_overlapping_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = Array2::from_shape_vec((6, 3), uniform_vec(&mut rng, 18, -3.0, 3.0)).unwrap();
    let labels = [0, 1, 2, 0, 1, 2];
    let pairs = [(0, 1), (0, 2)];
    for mode in [PairSoftmax::Renormalized, PairSoftmax::Full] {
        let (_, grad) = targeted_binary_loss(logits.view(), &labels, &pairs, mode);
        let f = |v: &[f64]| {
            let l = Array2::from_shape_vec((6, 3), v.to_vec()).unwrap();
            targeted_binary_loss(l.view(), &labels, &pairs, mode).0
        };
        let fd = numeric_gradient(f, logits.as_slice().unwrap(), 1e-5);
        assert!(relative_error(grad.as_slice().unwrap(), &fd) < 1e-6);
    }
}

#[test]
fn no_pairs_means_no_binary_loss() {
    let logits = Array2::from_elem((3, 3), 0.3);
    let (lb, grad) = targeted_binary_loss(logits.view(), &[0, 1, 2], &[], PairSoftmax::Renormalized);
    assert_eq!(lb, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn simplex_in_higher_dimension_is_exact() {
    for c in 2..=5usize {
        let d = c + 3;
        let reps = Array2::from_shape_fn((c, d), |(i, j)| {
            if j < c {
                f64::from(u8::from(i == j)) - 1.0 / c as f64
            } else {
                0.0
            }
        });
        let y: Vec<usize> = (0..c).collect();
        let (lp, grad) = max_separation(reps.view(), &y, &y, |_| None).unwrap();
        assert!(lp < 1e-28);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }
}
