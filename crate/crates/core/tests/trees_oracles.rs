//! Ensemble predictions checked against independent recursive tree walks:
//! forest output must equal the mean of per-tree leaves, boosted output the
//! sigmoid of the accumulated margin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semc_ad::baselines::{
    gbt_fit, gbt_predict, rf_fit, rf_predict, DecisionTree, GbtConfig, RfConfig, TreeNode,
};
use semc_ad::data_model::EncodedDataset;

/// Recursive reference walk, written independently of the iterative one.
fn walk(tree: &DecisionTree<f64>, idx: usize, row: &[u32]) -> f64 {
    match &tree.nodes[idx] {
        TreeNode::Leaf { value } => *value,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let next = if (row[*feature] as f64) <= *threshold {
                *left
            } else {
                *right
            };
            walk(tree, next, row)
        }
    }
}

fn random_dataset(rng: &mut ChaCha8Rng, n_rows: usize, cards: &[u32]) -> EncodedDataset {
    let mut codes = Vec::with_capacity(n_rows * cards.len());
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut row = Vec::with_capacity(cards.len());
        for &card in cards {
            row.push(rng.gen_range(0..card));
        }
        // label correlates with feature 0 so trees have something to split on
        let label = u8::from(row[0] >= cards[0] / 2 && rng.gen_bool(0.9));
        codes.extend_from_slice(&row);
        labels.push(label);
    }
    // force both classes
    labels[0] = 0;
    labels[1] = 1;
    EncodedDataset::new(
        codes,
        n_rows,
        (0..cards.len()).map(|i| format!("f{i}")).collect(),
        cards.to_vec(),
        labels,
    )
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, cards: &[u32]) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| {
            cards
                .iter()
                // ranges beyond the training cardinality exercise unseen codes
                .map(|&card| rng.gen_range(0..card + 3))
                .collect()
        })
        .collect()
}

#[test]
fn forest_prediction_is_mean_of_recursive_leaf_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let cards = [8u32, 5, 11, 3];
    let dataset = random_dataset(&mut rng, 300, &cards);
    let config = RfConfig {
        n_trees: 25,
        max_depth: 6,
        min_leaf: 3,
        class_weight: 2.0,
        seed: 9,
    };
    let model = rf_fit::<f64>(&dataset, &config).unwrap();
    assert_eq!(model.trees.len(), 25);

    for row in random_rows(&mut rng, 100, &cards) {
        let expected =
            model.trees.iter().map(|t| walk(t, 0, &row)).sum::<f64>() / model.trees.len() as f64;
        let got = rf_predict(&model, &row).unwrap();
        assert_eq!(got.to_bits(), expected.to_bits(), "row {row:?}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn boosted_prediction_is_sigmoid_of_accumulated_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let cards = [7u32, 9, 4];
    let dataset = random_dataset(&mut rng, 250, &cards);
    let config = GbtConfig {
        rounds: 30,
        max_depth: 3,
        learning_rate: 0.2,
        lambda: 1.0,
    };
    let model = gbt_fit::<f64>(&dataset, &config).unwrap();
    assert_eq!(model.trees.len(), 30);

    for row in random_rows(&mut rng, 100, &cards) {
        let mut margin = model.initial;
        for tree in &model.trees {
            margin += model.learning_rate * walk(tree, 0, &row);
        }
        let expected = 1.0 / (1.0 + (-margin).exp());
        let got = gbt_predict(&model, &row).unwrap();
        assert_eq!(got.to_bits(), expected.to_bits(), "row {row:?}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn iterative_and_recursive_walks_agree_on_every_fitted_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(403);
    let cards = [6u32, 6, 6, 6, 6];
    let dataset = random_dataset(&mut rng, 400, &cards);
    let forest = rf_fit::<f64>(
        &dataset,
        &RfConfig {
            n_trees: 10,
            max_depth: 8,
            min_leaf: 2,
            class_weight: 1.0,
            seed: 77,
        },
    )
    .unwrap();
    let rows = random_rows(&mut rng, 100, &cards);
    for tree in &forest.trees {
        for row in &rows {
            assert_eq!(tree.traverse(row).to_bits(), walk(tree, 0, row).to_bits());
        }
    }
}

#[test]
fn boosted_training_loss_decreases_overall() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let dataset = random_dataset(&mut rng, 300, &[10, 4]);
    let model = gbt_fit::<f64>(
        &dataset,
        &GbtConfig {
            rounds: 40,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
        },
    )
    .unwrap();
    let first = model.loss_trace.first().copied().unwrap();
    let last = model.loss_trace.last().copied().unwrap();
    assert!(last < first, "loss {first} -> {last}");
}
