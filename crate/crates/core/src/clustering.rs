//! K-means and Gaussian-mixture clustering over projected points, cluster
//! labeling by anomaly ratio, and the resulting anomaly/normal classifier.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_log_det, cholesky_solve, jacobi_eigh};
use crate::mat::Mat;
use crate::scalar::{cast, Scalar};

const LLOYD_MAX_ITERS: usize = 300;

/// K-means result: centroid rows plus the inertia achieved per iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KMeansModel<S: Scalar> {
    pub centroids: Mat<S>,
    pub seed: u64,
    pub inertia: S,
    pub inertia_trace: Vec<S>,
}

fn sq_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc
}

/// Draw an index proportional to `weights`; uniform when all weights vanish.
fn sample_weighted<S: Scalar>(rng: &mut ChaCha8Rng, weights: &[S]) -> usize {
    let total: f64 = weights.iter().map(|w| w.to_f64_lossless()).sum();
    if total <= 0.0 {
        return rng.gen_range(0..weights.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w.to_f64_lossless();
        if r <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Lloyd's algorithm with k-means++ seeding from a seeded generator.
///
/// Iterates to an assignment fixpoint (or 300 rounds); a cluster that loses
/// all points is re-seeded to the point farthest from its centroid.
pub fn kmeans_fit<S: Scalar>(points: &Mat<S>, k: usize, seed: u64) -> Result<KMeansModel<S>> {
    let m = points.rows();
    let n = points.cols();
    if k == 0 || m < k {
        return Err(Error::InvalidArgument(format!(
            "kmeans needs at least k = {k} points, got {m}"
        )));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("kmeans input".into()));
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Mat<S> = Mat::zeros(k, n);
    let first = rng.gen_range(0..m);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut best_d2: Vec<S> = (0..m)
        .map(|i| sq_dist(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let chosen = sample_weighted(&mut rng, &best_d2);
        centroids.row_mut(c).copy_from_slice(points.row(chosen));
        for i in 0..m {
            let d2 = sq_dist(points.row(i), centroids.row(c));
            if d2 < best_d2[i] {
                best_d2[i] = d2;
            }
        }
    }

    let mut assignment = vec![0usize; m];
    let mut inertia_trace = Vec::new();
    for _ in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        let mut inertia = S::zero();
        for i in 0..m {
            let mut best = 0usize;
            let mut best_d = sq_dist(points.row(i), centroids.row(0));
            for c in 1..k {
                let d = sq_dist(points.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        inertia_trace.push(inertia);

        let mut sums: Mat<S> = Mat::zeros(k, n);
        let mut counts = vec![0usize; k];
        for i in 0..m {
            let c = assignment[i];
            counts[c] += 1;
            for (j, v) in sums.row_mut(c).iter_mut().enumerate() {
                *v += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its own centroid takes over
                let mut far = 0usize;
                let mut far_d = S::neg_infinity();
                for i in 0..m {
                    let d = sq_dist(points.row(i), centroids.row(assignment[i]));
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids.row_mut(c).copy_from_slice(points.row(far));
                changed = true;
            } else {
                let cnt: S = cast(counts[c] as f64);
                for (j, v) in centroids.row_mut(c).iter_mut().enumerate() {
                    *v = sums[(c, j)] / cnt;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let inertia = *inertia_trace.last().expect("at least one iteration");
    Ok(KMeansModel {
        centroids,
        seed,
        inertia,
        inertia_trace,
    })
}

/// EM settings for the mixture fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmParams {
    pub k: usize,
    pub seed: u64,
    /// Added to every covariance diagonal each M-step.
    pub reg: f64,
    /// Stop when the log-likelihood gain falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            reg: 1e-6,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Fitted Gaussian mixture with full covariances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GmmModel<S: Scalar> {
    pub weights: Vec<S>,
    /// K×n; row k is μ_k.
    pub means: Mat<S>,
    pub covariances: Vec<Mat<S>>,
    pub seed: u64,
    pub log_likelihood: S,
    pub iterations: usize,
    /// Total log-likelihood observed at the start of each EM iteration.
    pub loglik_trace: Vec<S>,
}

struct Component<S: Scalar> {
    chol: Mat<S>,
    log_det: S,
}

fn prepare_component<S: Scalar>(cov: &Mat<S>, reg: S) -> Result<Component<S>> {
    let chol = match cholesky(cov) {
        Ok(c) => c,
        Err(_) => {
            // eigenfloor repair: clamp eigenvalues to the regularization floor
            let (vals, vecs) = jacobi_eigh(cov, cast(1e-12), 100)?;
            let n = cov.rows();
            let mut fixed: Mat<S> = Mat::zeros(n, n);
            for (r, &l) in vals.iter().enumerate() {
                let l = l.max(reg);
                let v = vecs.row(r);
                for i in 0..n {
                    for j in 0..n {
                        fixed[(i, j)] += l * v[i] * v[j];
                    }
                }
            }
            cholesky(&fixed).map_err(|_| {
                Error::NonFinite("covariance indefinite after eigenfloor repair".into())
            })?
        }
    };
    let log_det = cholesky_log_det(&chol);
    Ok(Component { chol, log_det })
}

fn log_density<S: Scalar>(comp: &Component<S>, mean: &[S], x: &[S]) -> S {
    let n = mean.len();
    let diff: Vec<S> = x.iter().zip(mean).map(|(a, b)| *a - *b).collect();
    let solved = cholesky_solve(&comp.chol, &diff);
    let mut maha = S::zero();
    for (d, s) in diff.iter().zip(&solved) {
        maha += *d * *s;
    }
    let ln_tau: S = cast(std::f64::consts::TAU.ln());
    -cast::<S>(0.5) * (cast::<S>(n as f64) * ln_tau + comp.log_det + maha)
}

/// Fit a Gaussian mixture by EM, initialized from k-means.
///
/// Initial means are the centroids, covariances the within-cluster sample
/// covariances (population divisor) plus reg·I, weights the cluster shares.
/// Each iteration scores the data at the current parameters, then applies
/// the closed-form M-step; the loop stops when the log-likelihood gain
/// drops below `tol` or after `max_iter` rounds.
pub fn gmm_fit<S: Scalar>(points: &Mat<S>, params: &GmmParams) -> Result<GmmModel<S>> {
    let m = points.rows();
    let n = points.cols();
    let k = params.k;
    if k == 0 || m < k {
        return Err(Error::InvalidArgument(format!(
            "gmm needs at least k = {k} points, got {m}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("gmm needs at least 1 dimension".into()));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("gmm input".into()));
    }
    let reg: S = cast(params.reg);
    let tol: S = cast(params.tol);

    let km = kmeans_fit(points, k, params.seed)?;
    let mut assignment = vec![0usize; m];
    for i in 0..m {
        let mut best = 0usize;
        let mut best_d = sq_dist(points.row(i), km.centroids.row(0));
        for c in 1..k {
            let d = sq_dist(points.row(i), km.centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
    }

    let mut weights = vec![S::zero(); k];
    let mut means = km.centroids.clone();
    let mut covariances: Vec<Mat<S>> = vec![Mat::zeros(n, n); k];
    let mut counts = vec![0usize; k];
    for i in 0..m {
        counts[assignment[i]] += 1;
    }
    for c in 0..k {
        let cnt = counts[c].max(1);
        let cnt_s: S = cast(cnt as f64);
        weights[c] = cast::<S>(counts[c] as f64) / cast(m as f64);
        let cov = &mut covariances[c];
        for i in 0..m {
            if assignment[i] != c {
                continue;
            }
            let row = points.row(i);
            for a in 0..n {
                let da = row[a] - means[(c, a)];
                for b in 0..n {
                    cov[(a, b)] += da * (row[b] - means[(c, b)]);
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                cov[(a, b)] /= cnt_s;
            }
            cov[(a, a)] += reg;
        }
    }
    // a cluster k-means left empty still needs positive weight for EM
    let floor: S = cast(1e-10);
    let weight_sum: S = weights
        .iter_mut()
        .map(|w| {
            *w = w.max(floor);
            *w
        })
        .sum();
    for w in weights.iter_mut() {
        *w /= weight_sum;
    }

    let mut loglik_trace: Vec<S> = Vec::new();
    let mut resp: Mat<S> = Mat::zeros(m, k);
    let mut iterations = 0usize;
    for _ in 0..params.max_iter {
        // E-step at current parameters, log-sum-exp per point
        let comps: Vec<Component<S>> = covariances
            .iter()
            .map(|c| prepare_component(c, reg))
            .collect::<Result<_>>()?;
        let mut ll = S::zero();
        for i in 0..m {
            let x = points.row(i);
            let mut logs = vec![S::zero(); k];
            let mut max_log = S::neg_infinity();
            for c in 0..k {
                let l = weights[c].ln() + log_density(&comps[c], means.row(c), x);
                logs[c] = l;
                if l > max_log {
                    max_log = l;
                }
            }
            let mut sum = S::zero();
            for l in &logs {
                sum += (*l - max_log).exp();
            }
            let log_norm = max_log + sum.ln();
            ll += log_norm;
            for c in 0..k {
                resp[(i, c)] = (logs[c] - log_norm).exp();
            }
        }
        if !ll.is_finite() {
            return Err(Error::NonFinite("gmm log-likelihood".into()));
        }
        let converged = match loglik_trace.last() {
            Some(&prev) => ll - prev < tol,
            None => false,
        };
        loglik_trace.push(ll);
        if converged {
            break;
        }
        iterations += 1;

        // M-step
        for c in 0..k {
            let mut nk = S::zero();
            for i in 0..m {
                nk += resp[(i, c)];
            }
            if nk <= floor {
                // degenerate component keeps its parameters
                weights[c] = floor;
                continue;
            }
            weights[c] = nk / cast(m as f64);
            for j in 0..n {
                let mut acc = S::zero();
                for i in 0..m {
                    acc += resp[(i, c)] * points[(i, j)];
                }
                means[(c, j)] = acc / nk;
            }
            let cov = &mut covariances[c];
            for a in 0..n {
                for b in 0..n {
                    cov[(a, b)] = S::zero();
                }
            }
            for i in 0..m {
                let r = resp[(i, c)];
                let row = points.row(i);
                for a in 0..n {
                    let da = row[a] - means[(c, a)];
                    for b in 0..n {
                        cov[(a, b)] += r * da * (row[b] - means[(c, b)]);
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    cov[(a, b)] /= nk;
                }
                cov[(a, a)] += reg;
            }
        }
        let wsum: S = weights.iter().copied().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
    }

    let log_likelihood = *loglik_trace.last().expect("at least one E-step");
    Ok(GmmModel {
        weights,
        means,
        covariances,
        seed: params.seed,
        log_likelihood,
        iterations,
        loglik_trace,
    })
}

impl<S: Scalar> GmmModel<S> {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    fn prepare(&self) -> Result<Vec<Component<S>>> {
        self.covariances
            .iter()
            .map(|c| prepare_component(c, cast(1e-12)))
            .collect()
    }
}

fn responsibilities_prepared<S: Scalar>(
    model: &GmmModel<S>,
    comps: &[Component<S>],
    point: &[S],
) -> Vec<S> {
    let k = model.k();
    let mut logs = vec![S::zero(); k];
    let mut max_log = S::neg_infinity();
    for c in 0..k {
        let l = model.weights[c].ln() + log_density(&comps[c], model.means.row(c), point);
        logs[c] = l;
        if l > max_log {
            max_log = l;
        }
    }
    let mut sum = S::zero();
    for l in &logs {
        sum += (*l - max_log).exp();
    }
    let log_norm = max_log + sum.ln();
    logs.iter().map(|&l| (l - log_norm).exp()).collect()
}

/// Posterior component probabilities for one point; sums to 1.
pub fn responsibilities<S: Scalar>(model: &GmmModel<S>, point: &[S]) -> Result<Vec<S>> {
    if point.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} dims, model {}",
            point.len(),
            model.dim()
        )));
    }
    let comps = model.prepare()?;
    Ok(responsibilities_prepared(model, &comps, point))
}

fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Ratio convention for flagging clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioMode {
    /// anomalies / (anomalies + normals) > ρ
    Fraction,
    /// anomalies / normals > ρ
    Odds,
}

/// Per-cluster label tallies and the anomaly flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub anomalies: u64,
    pub normals: u64,
    pub anomaly_fraction: f64,
    pub is_anomaly_cluster: bool,
}

/// Cluster flags derived from training labels under a ratio threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub clusters: Vec<ClusterStats>,
    pub rho: f64,
    pub mode: RatioMode,
}

/// Hard-assign training points to clusters and flag each cluster whose
/// anomaly ratio exceeds ρ. Empty clusters are never flagged.
pub fn label_clusters<S: Scalar>(
    model: &GmmModel<S>,
    points: &Mat<S>,
    labels: &[u8],
    rho: f64,
    mode: RatioMode,
) -> Result<ClusterLabeling> {
    if points.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points vs {} labels",
            points.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no points to label clusters".into()));
    }
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio threshold {rho} outside (0,1)"
        )));
    }
    let comps = model.prepare()?;
    let mut anomalies = vec![0u64; model.k()];
    let mut normals = vec![0u64; model.k()];
    for i in 0..points.rows() {
        let resp = responsibilities_prepared(model, &comps, points.row(i));
        let c = argmax(&resp);
        if labels[i] == 1 {
            anomalies[c] += 1;
        } else {
            normals[c] += 1;
        }
    }
    let clusters = anomalies
        .iter()
        .zip(&normals)
        .map(|(&a, &nrm)| {
            let total = a + nrm;
            let anomaly_fraction = if total == 0 {
                0.0
            } else {
                a as f64 / total as f64
            };
            let is_anomaly_cluster = match mode {
                RatioMode::Fraction => anomaly_fraction > rho,
                RatioMode::Odds => a as f64 > rho * nrm as f64 && a > 0,
            };
            ClusterStats {
                anomalies: a,
                normals: nrm,
                anomaly_fraction,
                is_anomaly_cluster,
            }
        })
        .collect();
    Ok(ClusterLabeling {
        clusters,
        rho,
        mode,
    })
}

/// Classify one point: anomaly iff its argmax-responsibility cluster is
/// flagged. Ties go to the lowest cluster index.
pub fn classify<S: Scalar>(
    model: &GmmModel<S>,
    labeling: &ClusterLabeling,
    point: &[S],
) -> Result<bool> {
    let resp = responsibilities(model, point)?;
    Ok(labeling.clusters[argmax(&resp)].is_anomaly_cluster)
}

/// Argmax-responsibility cluster index per row.
pub fn assign_batch<S: Scalar>(model: &GmmModel<S>, points: &Mat<S>) -> Result<Vec<usize>> {
    if points.rows() > 0 && points.cols() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "points have {} dims, model {}",
            points.cols(),
            model.dim()
        )));
    }
    let comps = model.prepare()?;
    let mut out = Vec::with_capacity(points.rows());
    for i in 0..points.rows() {
        let resp = responsibilities_prepared(model, &comps, points.row(i));
        out.push(argmax(&resp));
    }
    Ok(out)
}

/// Batch variant of `classify`; agrees with it pointwise.
pub fn classify_batch<S: Scalar>(
    model: &GmmModel<S>,
    labeling: &ClusterLabeling,
    points: &Mat<S>,
) -> Result<Vec<bool>> {
    Ok(assign_batch(model, points)?
        .into_iter()
        .map(|c| labeling.clusters[c].is_anomaly_cluster)
        .collect())
}
