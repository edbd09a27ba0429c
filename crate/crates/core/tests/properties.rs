//! Cross-module invariants checked on random inputs.

use proptest::prelude::*;
use rand::Rng;

use radstack::descriptor::{enumerate_descriptors, FIRST_ORDER_NAMES};
use radstack::evaluation::{dsc, hd95, perm_test, roc_auc, MetricCell, MetricTable, SegMetric};
use radstack::features::first_order;
use radstack::filters::{bin_values, Discretization};
use radstack::fusion::{fuse_multiregion, staple_binary, MAX_ITER, TOL};
use radstack::modeling::{smote, train_ensemble, ForestHyper};
use radstack::selection::{anova_f, mrmr, rfe_svm, MrmrScheme};
use radstack::seed;
use radstack::volume::{derive_regions, Geometry, LabelMask, RegionMask, TumorRegion};
use radstack::FeatureMatrix;

fn geometry() -> Geometry {
    Geometry::new([6, 5, 4], [1.0, 1.0, 2.0]).unwrap()
}

fn bool_mask() -> impl Strategy<Value = RegionMask> {
    prop::collection::vec(any::<bool>(), 120).prop_map(|v| RegionMask::new(geometry(), v).unwrap())
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((-5i32..5).prop_map(|v| v as f64 * 0.5), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
    })
}

/// Random classification matrix: `p` columns, some shifted by class.
fn labelled_matrix(seed_value: u64, n: usize, p: usize, k: usize) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = seed::rng(seed_value);
    let y: Vec<usize> = (0..n).map(|i| i % k).collect();
    let shifts: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0)).collect();
    let values = (0..n)
        .flat_map(|i| {
            let c = y[i] as f64;
            shifts.iter().map(|s| s * c + rng.random::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    let descriptors = enumerate_descriptors(false)[..p].to_vec();
    let ids = (0..n).map(|i| format!("s{i}")).collect();
    (FeatureMatrix::new(descriptors, ids, values).unwrap(), y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_negation_and_monotone_invariance((scores, labels) in scored_labels()) {
        let a = roc_auc(&scores, &labels).unwrap().auc;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let warped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + s).collect();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a + roc_auc(&neg, &labels).unwrap().auc, 1.0);
        prop_assert_eq!(a, roc_auc(&warped, &labels).unwrap().auc);
    }

    #[test]
    fn overlap_metrics_symmetric(a in bool_mask(), b in bool_mask()) {
        let (ab, ba) = (dsc(&a, &b).unwrap(), dsc(&b, &a).unwrap());
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        let (h1, h2) = (hd95(&a, &b).unwrap(), hd95(&b, &a).unwrap());
        prop_assert!(h1 == h2 || (h1.is_nan() && h2.is_nan()) || (h1.is_infinite() && h2.is_infinite()));
    }

    #[test]
    fn staple_bounded_monotone_and_order_free(masks in prop::collection::vec(bool_mask(), 2..6)) {
        let refs: Vec<&RegionMask> = masks.iter().collect();
        let r = staple_binary(&refs, MAX_ITER, TOL).unwrap();
        for v in r.sensitivity.iter().chain(&r.specificity).chain(&r.weights) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        for w in r.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        let rev: Vec<&RegionMask> = masks.iter().rev().collect();
        let s = staple_binary(&rev, MAX_ITER, TOL).unwrap();
        for (x, y) in r.weights.iter().zip(&s.weights) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        for (x, y) in r.sensitivity.iter().zip(s.sensitivity.iter().rev()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn fused_labels_nest(raw in prop::collection::vec(prop::collection::vec(0usize..4, 120), 2..5)) {
        let masks: Vec<LabelMask> = raw
            .iter()
            .map(|v| LabelMask::new(geometry(), v.iter().map(|&i| [0u8, 1, 2, 4][i]).collect()).unwrap())
            .collect();
        let (fused, _) = fuse_multiregion(&masks, MAX_ITER, TOL).unwrap();
        let regions = derive_regions(&fused).unwrap();
        let (wt, tc, enc) = (
            regions.get(TumorRegion::WT),
            regions.get(TumorRegion::TC),
            regions.get(TumorRegion::ENC),
        );
        for i in 0..120 {
            prop_assert!(!enc.voxels[i] || tc.voxels[i]);
            prop_assert!(!tc.voxels[i] || wt.voxels[i]);
        }
    }

    #[test]
    fn smote_balances_by_interpolation(counts in prop::collection::vec(2usize..12, 2..4), s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let y: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let x: Vec<Vec<f64>> = y.iter().map(|&c| vec![c as f64 + rng.random::<f64>(), rng.random::<f64>()]).collect();
        let (xs, ys) = smote(&x, &y, 5, s).unwrap();
        let k = counts.len();
        let per_class: Vec<usize> = (0..k).map(|c| ys.iter().filter(|&&v| v == c).count()).collect();
        let entropy: f64 = per_class
            .iter()
            .map(|&n| {
                let p = n as f64 / ys.len() as f64;
                -p * p.log2()
            })
            .sum();
        prop_assert_eq!(entropy, (k as f64).log2());
        prop_assert_eq!(&xs[..x.len()], &x[..]);
        for (row, &c) in xs.iter().zip(&ys).skip(x.len()) {
            let same: Vec<&Vec<f64>> = x.iter().zip(&y).filter(|(_, &v)| v == c).map(|(r, _)| r).collect();
            let on_segment = same.iter().any(|a| {
                same.iter().any(|b| {
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let len2 = d[0] * d[0] + d[1] * d[1];
                    if len2 == 0.0 {
                        return false;
                    }
                    let t = ((row[0] - a[0]) * d[0] + (row[1] - a[1]) * d[1]) / len2;
                    let off = [row[0] - a[0] - t * d[0], row[1] - a[1] - t * d[1]];
                    (-1e-9..=1.0 + 1e-9).contains(&t) && off[0].abs() < 1e-9 && off[1].abs() < 1e-9
                })
            });
            prop_assert!(on_segment);
        }
    }

    #[test]
    fn selectors_return_distinct_features(s in any::<u64>(), k in 2usize..4, n in 1usize..6) {
        let (m, y) = labelled_matrix(s, 24, 8, k);
        let best = (0..m.n_cols())
            .map(|j| (anova_f(&m.column(j), &y).unwrap(), j))
            .fold((f64::NEG_INFINITY, 0), |acc, v| if v.0 > acc.0 { v } else { acc });
        for result in [mrmr(&m, &y, n, MrmrScheme::Quotient).unwrap(), rfe_svm(&m, &y, k, n).unwrap()] {
            let mut names = result.selected.clone();
            prop_assert_eq!(names.len(), n);
            names.sort();
            names.dedup();
            prop_assert_eq!(names.len(), n);
        }
        let first = mrmr(&m, &y, n, MrmrScheme::Difference).unwrap().selected[0].clone();
        prop_assert_eq!(first, m.descriptors[best.1].clone());
    }

    #[test]
    fn first_order_moments_ignore_discretization(values in prop::collection::vec(-50.0f64..50.0, 2..80)) {
        let (b1, n1) = bin_values(&values, Discretization::FixedBinCount(8)).unwrap();
        let (b2, n2) = bin_values(&values, Discretization::FixedBinWidth(3.0)).unwrap();
        let (f1, f2) = (first_order(&values, &b1, n1), first_order(&values, &b2, n2));
        for name in ["Mean", "Variance", "Minimum", "Maximum"] {
            let i = FIRST_ORDER_NAMES.iter().position(|n| *n == name).unwrap();
            prop_assert_eq!(f1[i].to_bits(), f2[i].to_bits());
        }
    }
}

#[test]
fn ensemble_is_thread_count_independent() {
    let (m, y) = labelled_matrix(3, 40, 5, 2);
    let x = m.rows();
    let hyper = ForestHyper {
        n_estimators: 20,
        ..ForestHyper::default()
    };
    let train = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train_ensemble(&x, &y, 2, &hyper, 8, 42).unwrap()).predict(&x)
    };
    assert_eq!(train(1), train(3));
}

/// Under a true null, permutation p-values are close to uniform. Tables carry
/// several cells per subject so the statistic is fine-grained enough for a
/// continuous reference distribution.
#[test]
fn permutation_p_values_uniform_under_null() {
    let n_tables = 1000;
    let mut rng = seed::rng(17);
    let mut ps: Vec<f64> = (0..n_tables)
        .map(|t| {
            let mut cells = Vec::new();
            for s in 0..100 {
                for region in ["WT", "TC", "ENC"] {
                    for metric in [SegMetric::Dsc, SegMetric::Hd95] {
                        cells.push(MetricCell {
                            subject: format!("s{s:03}"),
                            region: region.into(),
                            metric,
                            values: (0..4).map(|_| rng.random::<f64>()).collect(),
                        });
                    }
                }
            }
            let table = MetricTable {
                methods: ["a", "b", "c", "d"].map(String::from).to_vec(),
                cells,
            };
            perm_test(&table, "a", "b", 999, t).unwrap()
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
        .fold(0.0, f64::max);
    assert!(ks <= 0.05, "KS distance {ks}");
}
