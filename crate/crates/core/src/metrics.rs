//! Evaluation metrics and rank statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::DisentangledEmbedding;
use crate::error::{Error, Result};
use crate::graph::Sign;
use crate::numerics::Tensor;

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve in percent, from the Mann–Whitney statistic.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", &[scores.len()], &[labels.len()]));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(100.0 * u / (pos as f64 * neg as f64))
}

/// Counts with `+` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[Sign], labels: &[Sign]) -> Self {
        let mut c = Confusion::default();
        for (p, l) in predictions.iter().zip(labels) {
            match (p, l) {
                (Sign::Positive, Sign::Positive) => c.true_positive += 1,
                (Sign::Positive, Sign::Negative) => c.false_positive += 1,
                (Sign::Negative, Sign::Negative) => c.true_negative += 1,
                (Sign::Negative, Sign::Positive) => c.false_negative += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    /// Percent.
    pub macro_f1: f64,
    /// Percent.
    pub f1_positive: f64,
    /// Percent.
    pub f1_negative: f64,
    pub confusion: Confusion,
}

fn f1(tp: usize, fp: usize, fn_: usize, class: &str) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        log::warn!("class {class} absent from predictions and labels; its F1 counts as 0");
        return 0.0;
    }
    2.0 * tp as f64 / denom as f64
}

/// Unweighted mean of the per-class F1 scores, in percent.
pub fn macro_f1(predictions: &[Sign], labels: &[Sign]) -> Result<F1Report> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("macro_f1", &[predictions.len()], &[labels.len()]));
    }
    let c = Confusion::from_predictions(predictions, labels);
    let pos = f1(c.true_positive, c.false_positive, c.false_negative, "+");
    let neg = f1(c.true_negative, c.false_negative, c.false_positive, "-");
    Ok(F1Report {
        macro_f1: 50.0 * (pos + neg),
        f1_positive: 100.0 * pos,
        f1_negative: 100.0 * neg,
        confusion: c,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// A constant input has correlation 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("spearman", &[x.len()], &[y.len()]));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedMetric(format!(
            "rank correlation needs at least 3 samples, got {}",
            x.len()
        )));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Mean silhouette coefficient of labelled points (rows of `points`).
/// Points whose cluster has no other member score 0, as do points with
/// `max(a, b) = 0`.
pub fn silhouette(points: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, d) = points.dims2();
    if labels.len() != n {
        return Err(Error::shape("silhouette", &[n], &[labels.len()]));
    }
    let clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; clusters];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::UndefinedMetric("silhouette needs at least two clusters".into()));
    }
    let data = points.data();
    let mut total = 0.0;
    let mut sums = vec![0.0; clusters];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let pi = &data[i * d..(i + 1) * d];
        for j in 0..n {
            if i == j {
                continue;
            }
            let pj = &data[j * d..(j + 1) * d];
            let dist = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            sums[labels[j]] += dist;
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Silhouette of factor clusters: every factor vector `z_u,k` of
/// `min(sample_size, n)` sampled nodes is a point labelled `k`.
pub fn silhouette_score(z: &DisentangledEmbedding, sample_size: usize, seed: u64) -> Result<f64> {
    let k = z.factors();
    if k < 2 {
        return Err(Error::UndefinedMetric("silhouette needs K ≥ 2".into()));
    }
    let n = z.node_count();
    let take = sample_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = rand::seq::index::sample(&mut rng, n, take).into_vec();
    nodes.sort_unstable();
    let w = z.factor_width();
    let mut data = Vec::with_capacity(take * k * w);
    let mut labels = Vec::with_capacity(take * k);
    for &u in &nodes {
        for f in 0..k {
            data.extend_from_slice(z.factor(u, f));
            labels.push(f);
        }
    }
    silhouette(&Tensor::matrix(take * k, w, data)?, &labels)
}

/// Ordinary least-squares line `y ≈ slope · x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::shape("linear_fit", &[x.len()], &[y.len()]));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedMetric("a line fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedMetric("all x values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Sample mean and (n − 1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
