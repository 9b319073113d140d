//! Tree-ensemble baselines over the label-encoded features: a random forest
//! with Gini splits and a second-order gradient-boosted tree classifier with
//! L2 leaf regularization. Integer codes are split as ordinal thresholds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::EncodedDataset;
use crate::error::{Error, Result};
use crate::rng::stage_rng;
use crate::scalar::{cast, Scalar};

/// Flat tree storage; node 0 is the root. Leaf values are class
/// probabilities for forest trees and additive weights for boosted trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum TreeNode<S: Scalar> {
    Leaf {
        value: S,
    },
    Split {
        feature: usize,
        threshold: S,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<S: Scalar> {
    pub nodes: Vec<TreeNode<S>>,
}

impl<S: Scalar> DecisionTree<S> {
    /// Iterative root-to-leaf walk; rows go left when code ≤ threshold.
    pub fn traverse(&self, row: &[u32]) -> S {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if cast::<S>(row[*feature] as f64) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Random-forest settings; `class_weight` scales anomaly counts inside the
/// Gini criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub class_weight: f64,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 5,
            class_weight: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<S: Scalar> {
    pub trees: Vec<DecisionTree<S>>,
    pub n_features: usize,
    pub config: RfConfig,
}

/// Boosting settings for the logistic objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 regularization on leaf weights.
    pub lambda: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostedModel<S: Scalar> {
    pub initial: S,
    pub trees: Vec<DecisionTree<S>>,
    pub learning_rate: S,
    pub n_features: usize,
    pub config: GbtConfig,
    /// Mean training logistic loss after each round.
    pub loss_trace: Vec<S>,
}

fn check_two_classes(dataset: &EncodedDataset) -> Result<()> {
    let anomalies = dataset.labels().iter().filter(|&&l| l == 1).count();
    if dataset.n_rows() == 0 || anomalies == 0 || anomalies == dataset.n_rows() {
        return Err(Error::SingleClass(format!(
            "{anomalies} anomalies in {} rows",
            dataset.n_rows()
        )));
    }
    Ok(())
}

struct GiniSplit<S> {
    feature: usize,
    threshold: S,
    impurity: f64,
}

/// Weighted two-class Gini impurity of a split candidate, summed over sides.
fn split_impurity(l0: f64, l1: f64, r0: f64, r1: f64) -> f64 {
    let side = |c0: f64, c1: f64| -> f64 {
        let total = c0 + c1;
        if total <= 0.0 {
            return 0.0;
        }
        let p0 = c0 / total;
        let p1 = c1 / total;
        total * (1.0 - p0 * p0 - p1 * p1)
    };
    side(l0, l1) + side(r0, r1)
}

fn grow_rf_node<S: Scalar>(
    dataset: &EncodedDataset,
    rows: &[usize],
    depth: usize,
    config: &RfConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
    nodes: &mut Vec<TreeNode<S>>,
) -> usize {
    let n1 = rows.iter().filter(|&&r| dataset.labels()[r] == 1).count();
    let n0 = rows.len() - n1;
    let leaf_prob = n1 as f64 / rows.len() as f64;
    let make_leaf = |nodes: &mut Vec<TreeNode<S>>| {
        nodes.push(TreeNode::Leaf {
            value: cast(leaf_prob),
        });
        nodes.len() - 1
    };
    if depth >= config.max_depth || n0 == 0 || n1 == 0 || rows.len() < 2 * config.min_leaf {
        return make_leaf(nodes);
    }

    // sample ⌈√F⌉ distinct candidate features
    let f_total = dataset.n_features();
    let f_try = (f_total as f64).sqrt().ceil() as usize;
    let mut pool: Vec<usize> = (0..f_total).collect();
    for i in 0..f_try {
        let j = rng.gen_range(i..f_total);
        pool.swap(i, j);
    }

    let w1 = config.class_weight;
    let mut best: Option<GiniSplit<S>> = None;
    let mut pairs: Vec<(u32, u8)> = Vec::with_capacity(rows.len());
    for &feature in &pool[..f_try] {
        pairs.clear();
        for &r in rows {
            pairs.push((dataset.code(r, feature), dataset.labels()[r]));
        }
        pairs.sort_unstable_by_key(|&(c, _)| c);
        let total1 = n1 as f64 * w1;
        let total0 = n0 as f64;
        let mut l0 = 0.0;
        let mut l1 = 0.0;
        let mut left_n = 0usize;
        for i in 0..pairs.len() - 1 {
            let (code, label) = pairs[i];
            if label == 1 {
                l1 += w1;
            } else {
                l0 += 1.0;
            }
            left_n += 1;
            let next_code = pairs[i + 1].0;
            if next_code == code {
                continue;
            }
            if left_n < config.min_leaf || rows.len() - left_n < config.min_leaf {
                continue;
            }
            let impurity = split_impurity(l0, l1, total0 - l0, total1 - l1);
            if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                best = Some(GiniSplit {
                    feature,
                    threshold: cast((code as f64 + next_code as f64) / 2.0),
                    impurity,
                });
            }
        }
    }

    let Some(split) = best else {
        return make_leaf(nodes);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
        cast::<S>(dataset.code(r, split.feature) as f64) <= split.threshold
    });

    let here = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow_rf_node(dataset, &left_rows, depth + 1, config, rng, nodes);
    let right = grow_rf_node(dataset, &right_rows, depth + 1, config, rng, nodes);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[here]
    {
        *l = left;
        *r = right;
    }
    here
}

/// Fit a random forest on bootstrap samples with per-node feature
/// subsampling. Tree t draws from a seed derived for that tree, so forests
/// are reproducible and trees independent.
pub fn rf_fit<S: Scalar>(dataset: &EncodedDataset, config: &RfConfig) -> Result<ForestModel<S>> {
    check_two_classes(dataset)?;
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    let n = dataset.n_rows();
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng = stage_rng(config.seed, &format!("rf-tree-{t}"));
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut nodes = Vec::new();
        grow_rf_node(dataset, &rows, 0, config, &mut rng, &mut nodes);
        trees.push(DecisionTree { nodes });
    }
    Ok(ForestModel {
        trees,
        n_features: dataset.n_features(),
        config: *config,
    })
}

/// Mean of per-tree leaf probabilities.
pub fn rf_predict<S: Scalar>(model: &ForestModel<S>, row: &[u32]) -> Result<S> {
    if row.len() != model.n_features {
        return Err(Error::DimensionMismatch(format!(
            "row has {} features, forest {}",
            row.len(),
            model.n_features
        )));
    }
    let mut acc = S::zero();
    for tree in &model.trees {
        acc += tree.traverse(row);
    }
    Ok(acc / cast(model.trees.len() as f64))
}

struct GbtSplit<S> {
    feature: usize,
    threshold: S,
    gain: f64,
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn grow_gbt_node<S: Scalar>(
    dataset: &EncodedDataset,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    depth: usize,
    config: &GbtConfig,
    nodes: &mut Vec<TreeNode<S>>,
) -> usize {
    let g_total: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h_total: f64 = rows.iter().map(|&r| hess[r]).sum();
    let make_leaf = |nodes: &mut Vec<TreeNode<S>>| {
        nodes.push(TreeNode::Leaf {
            value: cast(leaf_weight(g_total, h_total, config.lambda)),
        });
        nodes.len() - 1
    };
    if depth >= config.max_depth || rows.len() < 2 {
        return make_leaf(nodes);
    }

    let parent_score = g_total * g_total / (h_total + config.lambda);
    let mut best: Option<GbtSplit<S>> = None;
    let mut triples: Vec<(u32, f64, f64)> = Vec::with_capacity(rows.len());
    for feature in 0..dataset.n_features() {
        triples.clear();
        for &r in rows {
            triples.push((dataset.code(r, feature), grad[r], hess[r]));
        }
        triples.sort_unstable_by_key(|&(c, _, _)| c);
        let mut gl = 0.0;
        let mut hl = 0.0;
        for i in 0..triples.len() - 1 {
            let (code, g, h) = triples[i];
            gl += g;
            hl += h;
            let next_code = triples[i + 1].0;
            if next_code == code {
                continue;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            let gain = gl * gl / (hl + config.lambda) + gr * gr / (hr + config.lambda)
                - parent_score;
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(GbtSplit {
                    feature,
                    threshold: cast((code as f64 + next_code as f64) / 2.0),
                    gain,
                });
            }
        }
    }

    let Some(split) = best else {
        return make_leaf(nodes);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
        cast::<S>(dataset.code(r, split.feature) as f64) <= split.threshold
    });
    let here = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow_gbt_node(dataset, &left_rows, grad, hess, depth + 1, config, nodes);
    let right = grow_gbt_node(dataset, &right_rows, grad, hess, depth + 1, config, nodes);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[here]
    {
        *l = left;
        *r = right;
    }
    here
}

/// Fit boosted trees on the logistic objective. Round t fits a regression
/// tree to the gradient/hessian of the current margin; leaf weights are
/// −ΣG/(ΣH+λ). Fully deterministic: no sampling anywhere.
pub fn gbt_fit<S: Scalar>(dataset: &EncodedDataset, config: &GbtConfig) -> Result<BoostedModel<S>> {
    check_two_classes(dataset)?;
    let n = dataset.n_rows();
    let n1 = dataset.labels().iter().filter(|&&l| l == 1).count();
    let prevalence = n1 as f64 / n as f64;
    let initial = (prevalence / (1.0 - prevalence)).ln();

    let mut score = vec![initial; n];
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut loss_trace = Vec::with_capacity(config.rounds);

    for _round in 0..config.rounds {
        for i in 0..n {
            let p = 1.0 / (1.0 + (-score[i]).exp());
            let y = dataset.labels()[i] as f64;
            grad[i] = p - y;
            hess[i] = p * (1.0 - p);
            if !grad[i].is_finite() || !hess[i].is_finite() {
                return Err(Error::NonFinite("boosting residuals".into()));
            }
        }
        let rows: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        grow_gbt_node::<S>(dataset, &rows, &grad, &hess, 0, config, &mut nodes);
        let tree = DecisionTree { nodes };
        let mut loss = 0.0;
        for i in 0..n {
            score[i] += config.learning_rate * tree.traverse(dataset.row(i)).to_f64_lossless();
            let z = score[i];
            let y = dataset.labels()[i] as f64;
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        }
        loss_trace.push(cast(loss / n as f64));
        trees.push(tree);
    }

    Ok(BoostedModel {
        initial: cast(initial),
        trees,
        learning_rate: cast(config.learning_rate),
        n_features: dataset.n_features(),
        config: *config,
        loss_trace,
    })
}

/// Sigmoid of the accumulated margin: σ(initial + η·Σ tree outputs).
pub fn gbt_predict<S: Scalar>(model: &BoostedModel<S>, row: &[u32]) -> Result<S> {
    if row.len() != model.n_features {
        return Err(Error::DimensionMismatch(format!(
            "row has {} features, model {}",
            row.len(),
            model.n_features
        )));
    }
    let mut margin = model.initial;
    for tree in &model.trees {
        margin += model.learning_rate * tree.traverse(row);
    }
    Ok(S::one() / (S::one() + (-margin).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// label = 1 iff feature 0 code ≥ 3; feature 1 is noise-ish
    fn mirror_dataset() -> EncodedDataset {
        let mut codes = Vec::new();
        let mut labels = Vec::new();
        for i in 0..120 {
            let a = (i % 5) + 1;
            codes.push(a as u32);
            codes.push(((i * 7) % 4 + 1) as u32);
            labels.push(u8::from(a >= 3));
        }
        EncodedDataset::new(codes, 120, vec!["a".into(), "b".into()], vec![6, 5], labels)
    }

    #[test]
    fn perfect_feature_reaches_full_accuracy_at_depth_one() {
        let ds = mirror_dataset();
        let config = RfConfig {
            n_trees: 25,
            max_depth: 1,
            min_leaf: 1,
            seed: 3,
            ..RfConfig::default()
        };
        let model: ForestModel<f64> = rf_fit(&ds, &config).unwrap();
        for i in 0..ds.n_rows() {
            let p = rf_predict(&model, ds.row(i)).unwrap();
            assert_eq!(u8::from(p >= 0.5), ds.labels()[i], "row {i}");
        }
    }

    #[test]
    fn single_tree_forest_returns_that_tree() {
        let ds = mirror_dataset();
        let config = RfConfig {
            n_trees: 1,
            seed: 9,
            ..RfConfig::default()
        };
        let model: ForestModel<f64> = rf_fit(&ds, &config).unwrap();
        for i in [0usize, 7, 60] {
            let p = rf_predict(&model, ds.row(i)).unwrap();
            assert_eq!(p, model.trees[0].traverse(ds.row(i)));
        }
    }

    #[test]
    fn same_seed_reproduces_forest() {
        let ds = mirror_dataset();
        let config = RfConfig {
            n_trees: 8,
            seed: 17,
            ..RfConfig::default()
        };
        let a: ForestModel<f64> = rf_fit(&ds, &config).unwrap();
        let b: ForestModel<f64> = rf_fit(&ds, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn unanimous_trees_predict_one() {
        let model = ForestModel::<f64> {
            trees: vec![
                DecisionTree {
                    nodes: vec![TreeNode::Leaf { value: 1.0 }],
                };
                3
            ],
            n_features: 2,
            config: RfConfig::default(),
        };
        assert_abs_diff_eq!(rf_predict(&model, &[1, 1]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn feature_count_mismatch_is_an_error() {
        let ds = mirror_dataset();
        let config = RfConfig {
            n_trees: 2,
            ..RfConfig::default()
        };
        let model: ForestModel<f64> = rf_fit(&ds, &config).unwrap();
        assert!(rf_predict(&model, &[]).is_err());
        let gbt: BoostedModel<f64> = gbt_fit(&ds, &GbtConfig::default()).unwrap();
        assert!(gbt_predict(&gbt, &[1]).is_err());
    }

    #[test]
    fn single_class_data_is_rejected() {
        let ds = EncodedDataset::new(vec![1, 1], 1, vec!["a".into(), "b".into()], vec![2, 2], vec![1]);
        assert!(matches!(
            rf_fit::<f64>(&ds, &RfConfig::default()),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            gbt_fit::<f64>(&ds, &GbtConfig::default()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn boosting_separates_toy_data() {
        let ds = mirror_dataset();
        let config = GbtConfig {
            rounds: 50,
            ..GbtConfig::default()
        };
        let model: BoostedModel<f64> = gbt_fit(&ds, &config).unwrap();
        for i in 0..ds.n_rows() {
            let p = gbt_predict(&model, ds.row(i)).unwrap();
            assert_eq!(u8::from(p >= 0.5), ds.labels()[i], "row {i}");
        }
        for w in model.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_prevalence() {
        let ds = mirror_dataset();
        let config = GbtConfig {
            rounds: 5,
            learning_rate: 0.0,
            ..GbtConfig::default()
        };
        let model: BoostedModel<f64> = gbt_fit(&ds, &config).unwrap();
        let prevalence = ds.labels().iter().filter(|&&l| l == 1).count() as f64 / 120.0;
        for i in [0usize, 31, 119] {
            let p = gbt_predict(&model, ds.row(i)).unwrap();
            assert_abs_diff_eq!(p, prevalence, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_boosted_model_predicts_sigmoid_of_initial() {
        let model = BoostedModel::<f64> {
            initial: 0.0,
            trees: vec![],
            learning_rate: 0.1,
            n_features: 2,
            config: GbtConfig::default(),
            loss_trace: vec![],
        };
        assert_abs_diff_eq!(gbt_predict(&model, &[1, 2]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn prediction_is_monotone_in_leaf_value() {
        let ds = mirror_dataset();
        let config = GbtConfig {
            rounds: 3,
            ..GbtConfig::default()
        };
        let mut model: BoostedModel<f64> = gbt_fit(&ds, &config).unwrap();
        let row = ds.row(0);
        let before = gbt_predict(&model, row).unwrap();
        // find the leaf row 0 lands in for tree 0 and raise it
        let mut idx = 0usize;
        loop {
            match &model.trees[0].nodes[idx] {
                TreeNode::Leaf { .. } => break,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if (row[*feature] as f64) <= *threshold { *left } else { *right },
            }
        }
        if let TreeNode::Leaf { value } = &mut model.trees[0].nodes[idx] {
            *value += 2.0;
        }
        let after = gbt_predict(&model, row).unwrap();
        assert!(after > before);
    }
}
