use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cislda::classifier::FittedClassifier;
use cislda::covgraph::{build_graph, CorrelationEstimator, CorrelationSource, Depth, LazyCorrGraph, NeighborGraph};
use cislda::dataset::{class_summaries, standardize_columns, ClassPair, LabeledMatrix};
use cislda::screening::{marginal_set, screen, select, ScreeningConfig, SelectionRule};

/// Two classes where features come in strongly correlated pairs and every
/// fifth feature is shifted in class 1.
fn two_class_data(seed: u64, n_per_class: usize, p: usize) -> LabeledMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(2 * n_per_class * p);
    let mut labels = Vec::new();
    for class in [1i64, 2] {
        for _ in 0..n_per_class {
            let links: Vec<f64> = (0..p.div_ceil(2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for j in 0..p {
                let shift = if class == 1 && j % 5 == 0 { 1.2 } else { 0.0 };
                values.push(shift + 2.0 * links[j / 2] + rng.gen_range(-1.0..1.0));
            }
            labels.push(class);
        }
    }
    LabeledMatrix::new(values, p, &labels).unwrap()
}

fn screen_pair(data: &LabeledMatrix, pair: ClassPair, config: &ScreeningConfig) -> cislda::screening::ScreeningResult {
    let graph = LazyCorrGraph::new(
        Arc::new(CorrelationSource::new(data, CorrelationEstimator::PooledWithinClass).unwrap()),
        config.alpha,
    )
    .unwrap();
    let summary = class_summaries(&data.restrict_to_pair(pair).unwrap()).unwrap();
    screen(&graph, &summary, pair, config).unwrap()
}

fn config() -> ScreeningConfig {
    ScreeningConfig {
        tau: 0.3,
        alpha: 0.6,
        depth: Depth::Limited(3),
        selection: SelectionRule::TopN(8),
        ridge_eps: 1e-3,
        max_block: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tiling_and_lazy_exploration_give_the_same_graph(seed in 0u64..1000, p in 8usize..40) {
        let data = standardize_columns(&two_class_data(seed, 15, p)).unwrap();
        let est = CorrelationEstimator::PooledWithinClass;
        let small = build_graph(&data, 0.3, 8 * (2 * 30 * 4 + 16), est).unwrap();
        let large = build_graph(&data, 0.3, 64 << 20, est).unwrap();
        prop_assert_eq!(small.edges().collect::<Vec<_>>(), large.edges().collect::<Vec<_>>());
        let lazy = LazyCorrGraph::new(Arc::new(CorrelationSource::new(&data, est).unwrap()), 0.3).unwrap();
        for j in 0..p {
            prop_assert_eq!(&*lazy.neighbors(j), &*large.neighbors(j));
        }
    }

    #[test]
    fn rescaling_columns_leaves_screening_unchanged(seed in 0u64..1000, factor in 0.01f64..100.0) {
        let data = two_class_data(seed, 30, 24);
        let p = data.p();
        let scaled: Vec<f64> = data
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * factor * (1.0 + (i % p) as f64))
            .collect();
        let scaled = data.with_values(scaled);
        let pair = ClassPair::new(1, 2);
        let a = screen_pair(&data, pair, &config());
        let b = screen_pair(&scaled, pair, &config());
        prop_assert_eq!(&a.marginal_set, &b.marginal_set);
        for (x, y) in a.importance.iter().zip(&b.importance) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
    }

    #[test]
    fn swapping_the_pair_flips_every_score(seed in 0u64..1000) {
        let data = two_class_data(seed, 30, 20);
        let ab = ClassPair::new(1, 2);
        let fit = |pair| {
            let s = screen_pair(&data, pair, &config());
            FittedClassifier::fit_pair(&data, pair, &s).unwrap()
        };
        let (m, w) = (fit(ab), fit(ab.swapped()));
        for i in 0..data.n() {
            let x = data.row(i);
            prop_assert!((m.score(x) + w.score(x)).abs() < 1e-9);
            if m.score(x) != 0.0 {
                prop_assert_eq!(m.predict_pair(x), w.predict_pair(x));
            }
        }
    }

    #[test]
    fn unselected_coordinates_never_matter(seed in 0u64..1000, noise in -50.0f64..50.0) {
        let data = two_class_data(seed, 30, 20);
        let pair = ClassPair::new(1, 2);
        let s = screen_pair(&data, pair, &config());
        let model = FittedClassifier::fit_pair(&data, pair, &s).unwrap();
        for i in 0..data.n() {
            let mut x = data.row(i).to_vec();
            for (j, v) in x.iter_mut().enumerate() {
                if !model.selected.contains(&j) {
                    *v += noise;
                }
            }
            prop_assert_eq!(model.score(&x), model.score(data.row(i)));
        }
    }

    #[test]
    fn thresholds_are_monotone(d in prop::collection::vec(-3.0f64..3.0, 1..40), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let wide = marginal_set(&d, lo);
        prop_assert!(marginal_set(&d, hi).iter().all(|j| wide.contains(j)));
        let scores: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let loose = select(&scores, SelectionRule::Threshold(lo), 0);
        prop_assert!(select(&scores, SelectionRule::Threshold(hi), 0).iter().all(|j| loose.contains(j)));
    }
}
