//! Categorical feature ranking against the label: chi-square statistic and
//! Theil's uncertainty coefficient over per-feature contingency tables.

use serde::{Deserialize, Serialize};

use crate::data_model::EncodedDataset;
use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Counts of (category, label) co-occurrences. Rows are feature categories,
/// columns are label categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Self {
        let rows = counts.len();
        let cols = counts.first().map(|r| r.len()).unwrap_or(0);
        assert!(counts.iter().all(|r| r.len() == cols));
        Self {
            counts,
            row_ids: (0..rows).map(|i| i.to_string()).collect(),
            col_ids: (0..cols).map(|i| i.to_string()).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map(|r| r.len()).unwrap_or(0);
        let mut sums = vec![0u64; cols];
        for row in &self.counts {
            for (j, &c) in row.iter().enumerate() {
                sums[j] += c;
            }
        }
        sums
    }

    /// Tally a table from a dataset column against the label. Row index =
    /// code value (0..card), columns = label 0 and label 1.
    pub fn from_column(dataset: &EncodedDataset, feature: usize) -> Self {
        let card = dataset.cardinalities()[feature] as usize;
        let mut counts = vec![vec![0u64; 2]; card];
        for i in 0..dataset.n_rows() {
            let code = dataset.code(i, feature) as usize;
            let label = dataset.labels()[i] as usize;
            counts[code][label] += 1;
        }
        let mut t = Self::new(counts);
        t.col_ids = vec!["0".into(), "1".into()];
        t
    }
}

/// Per-feature association scores against the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub chi_square_statistic: f64,
    pub chi_square_dof: u32,
    pub theils_u: f64,
    pub selected: bool,
}

/// Pearson's chi-square statistic with its degrees of freedom.
///
/// Expected counts use the product of marginals over N; cells whose expected
/// count is zero are skipped. Rows and columns with zero marginals do not
/// count toward the degrees of freedom, so a table degenerate in either
/// dimension reports statistic 0 with dof 0.
pub fn chi_square<S: Scalar>(table: &ContingencyTable) -> Result<(S, u32)> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "contingency table has all-zero counts".into(),
        ));
    }
    let row_sums = table.row_sums();
    let col_sums = table.col_sums();
    let active_rows = row_sums.iter().filter(|&&s| s > 0).count();
    let active_cols = col_sums.iter().filter(|&&s| s > 0).count();
    if active_rows < 2 || active_cols < 2 {
        return Ok((S::zero(), 0));
    }
    let n_s: S = cast(n as f64);
    let mut stat = S::zero();
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = cast::<S>(row_sums[i] as f64) * cast::<S>(col_sums[j] as f64) / n_s;
            if expected > S::zero() {
                let diff = cast::<S>(obs as f64) - expected;
                stat += diff * diff / expected;
            }
        }
    }
    let dof = (active_rows as u32 - 1) * (active_cols as u32 - 1);
    Ok((stat, dof))
}

fn entropy_from_counts<S: Scalar>(counts: &[u64], total: u64) -> S {
    let total_s: S = cast(total as f64);
    let mut h = S::zero();
    for &c in counts {
        if c > 0 {
            let p = cast::<S>(c as f64) / total_s;
            h -= p * p.ln();
        }
    }
    h
}

/// Uncertainty coefficient U(Y|X) = (H(Y) − H(Y|X)) / H(Y) with natural-log
/// entropies; X indexes table rows, Y the columns. Returns 1 when H(Y) = 0
/// (constant label counts as fully explained).
pub fn theils_u<S: Scalar>(table: &ContingencyTable) -> Result<S> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "contingency table has all-zero counts".into(),
        ));
    }
    let col_sums = table.col_sums();
    let h_y: S = entropy_from_counts(&col_sums, n);
    if h_y == S::zero() {
        return Ok(S::one());
    }
    let mut h_y_given_x = S::zero();
    let n_s: S = cast(n as f64);
    for row in &table.counts {
        let row_total: u64 = row.iter().sum();
        if row_total == 0 {
            continue;
        }
        let weight = cast::<S>(row_total as f64) / n_s;
        h_y_given_x += weight * entropy_from_counts::<S>(row, row_total);
    }
    let u = (h_y - h_y_given_x) / h_y;
    // conditional entropy can exceed h_y only through rounding
    Ok(u.max(S::zero()).min(S::one()))
}

/// Score every feature against the label and mark the top `k` as selected.
///
/// Order: uncertainty coefficient descending, chi-square statistic
/// descending, feature name ascending.
pub fn rank_features(dataset: &EncodedDataset, k: usize) -> Result<Vec<FeatureScore>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > dataset.n_features() {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds feature count {}",
            k,
            dataset.n_features()
        )));
    }
    if dataset.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut scores = Vec::with_capacity(dataset.n_features());
    for f in 0..dataset.n_features() {
        let table = ContingencyTable::from_column(dataset, f);
        let (chi2, dof) = chi_square::<f64>(&table)?;
        let u = theils_u::<f64>(&table)?;
        scores.push(FeatureScore {
            feature: dataset.feature_names()[f].clone(),
            chi_square_statistic: chi2,
            chi_square_dof: dof,
            theils_u: u,
            selected: false,
        });
    }
    scores.sort_by(|a, b| {
        b.theils_u
            .partial_cmp(&a.theils_u)
            .unwrap()
            .then(
                b.chi_square_statistic
                    .partial_cmp(&a.chi_square_statistic)
                    .unwrap(),
            )
            .then(a.feature.cmp(&b.feature))
    });
    for s in scores.iter_mut().take(k) {
        s.selected = true;
    }
    Ok(scores)
}
