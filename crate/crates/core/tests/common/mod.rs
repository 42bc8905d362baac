#![allow(dead_code)]

use dines::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Relative error between two gradient vectors, measured in the 2-norm.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom < 1e-12 {
        diff
    } else {
        diff / denom
    }
}

/// Central finite differences of a scalar function of several tensors.
pub fn numeric_grads(inputs: &[Tensor], f: &dyn Fn(&[Tensor]) -> f64) -> Vec<Vec<f64>> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = vec![0.0; inputs[i].numel()];
        for j in 0..inputs[i].numel() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let up = f(&work);
            work[i].data_mut()[j] = orig - FD_STEP;
            let down = f(&work);
            work[i].data_mut()[j] = orig;
            g[j] = (up - down) / (2.0 * FD_STEP);
        }
        out.push(g);
    }
    out
}

/// Worst relative error between analytic and numeric gradients over all inputs.
pub fn gradcheck(
    inputs: &[Tensor],
    analytic: &dyn Fn(&[Tensor]) -> (f64, Vec<Vec<f64>>),
) -> f64 {
    let (_, grads) = analytic(inputs);
    let numeric = numeric_grads(inputs, &|x| analytic(x).0);
    grads
        .iter()
        .zip(&numeric)
        .map(|(a, n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Random signed digraph with exactly `m` edges and mixed signs.
pub fn random_graph(n: usize, m: usize, seed: u64) -> dines::graph::SignedDigraph {
    let spec = dines::graph::SyntheticSpec {
        skew: 0.45,
        ..dines::graph::SyntheticSpec::new(n, m, 0.7, seed)
    };
    dines::graph::generate_synthetic(&spec).unwrap()
}

pub fn random_features(n: usize, d: usize, seed: u64) -> dines::features::FeatureMatrix {
    let t = uniform(&mut rng(seed), &[n, d], -1.0, 1.0);
    dines::features::FeatureMatrix::new(t, dines::features::Provenance::File).unwrap()
}
