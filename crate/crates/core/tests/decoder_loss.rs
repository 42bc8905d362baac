mod common;

use std::sync::Arc;

use dines::decoder::{
    bce_loss, disc_loss, edge_feature_map, predict_sign, score_concat, score_pairwise, sigmoid, total_loss, Decoder,
    DecoderKind, Discriminator,
};
use dines::encoder::DisentangledEmbedding;
use dines::graph::Sign;
use dines::numerics::{ParamStore, Tape, Tensor};
use dines::Error;
use proptest::prelude::*;
use rand::Rng;

/// Unit-norm random factors for `n` nodes.
fn unit_embedding(n: usize, k: usize, w: usize, seed: u64) -> DisentangledEmbedding {
    let mut rng = common::rng(seed);
    let mut data = Vec::with_capacity(n * k * w);
    for _ in 0..n * k {
        let v: Vec<f64> = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| x / nv));
    }
    DisentangledEmbedding::new(Tensor::matrix(n, k * w, data).unwrap(), k).unwrap()
}

#[test]
fn edge_feature_map_examples() {
    let h = edge_feature_map(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0], 2).unwrap();
    assert_eq!(h.to_tensor(), Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap());
    let z = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(edge_feature_map(&z, &z, 3).unwrap().to_tensor(), Tensor::identity(3));
    assert!(edge_feature_map(&[1.0; 4], &[1.0; 6], 2).is_err());
}

proptest! {
    #[test]
    fn feature_map_transpose_symmetry(seed in 0u64..5000, k in 1usize..6, w in 1usize..5) {
        let z = unit_embedding(2, k, w, seed);
        let huv = edge_feature_map(z.node(0), z.node(1), k).unwrap();
        let hvu = edge_feature_map(z.node(1), z.node(0), k).unwrap();
        prop_assert_eq!(hvu, huv.transpose());
        for i in 0..k {
            for j in 0..k {
                prop_assert!(huv.get(i, j).abs() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn pairwise_sign_invariant_under_positive_scaling(seed in 0u64..5000, c in 0.01f64..100.0) {
        let z = unit_embedding(2, 3, 4, seed);
        let ws = common::uniform(&mut common::rng(seed + 1), &[3, 3], -1.0, 1.0);
        let h = edge_feature_map(z.node(0), z.node(1), 3).unwrap();
        let scaled = Tensor::matrix(3, 3, ws.data().iter().map(|v| v * c).collect()).unwrap();
        let (s, sc) = (score_pairwise(&h, &ws).unwrap(), score_pairwise(&h, &scaled).unwrap());
        prop_assert_eq!(s.signum(), sc.signum());
        prop_assert!((sc - c * s).abs() <= 1e-12 * (1.0 + c * s.abs()));
    }

    #[test]
    fn losses_are_non_negative(seed in 0u64..5000) {
        let mut rng = common::rng(seed);
        let p: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..=1.0)).collect();
        let y: Vec<f64> = (0..20).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        prop_assert!(bce_loss(&p, &y).unwrap() >= 0.0);
        let z = unit_embedding(5, 4, 3, seed);
        let w = common::uniform(&mut rng, &[4, 3], -3.0, 3.0);
        let b = common::uniform(&mut rng, &[4], -3.0, 3.0);
        prop_assert!(disc_loss(&z, &w, b.data()).unwrap() >= 0.0);
    }
}

#[test]
fn score_pairwise_examples() {
    let h = edge_feature_map(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0], 2).unwrap();
    assert_eq!(score_pairwise(&h, &Tensor::full(&[2, 2], 1.0)).unwrap(), 2.0);
    let zero = score_pairwise(&h, &Tensor::zeros(&[2, 2])).unwrap();
    assert_eq!((zero, sigmoid(zero)), (0.0, 0.5));
}

/// `trace(W_sᵀ · Z_uᵀ Z_v)` with `Z` holding factors as columns.
fn pairwise_oracle(zu: &[f64], zv: &[f64], ws: &Tensor, k: usize) -> f64 {
    let w = zu.len() / k;
    let col = |z: &[f64], c: usize, r: usize| z[c * w + r];
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            let mut h = 0.0;
            for r in 0..w {
                h += col(zu, i, r) * col(zv, j, r);
            }
            total += ws.get2(i, j) * h;
        }
    }
    total
}

#[test]
fn score_pairwise_matches_oracle_and_tape() {
    let (n, k, w) = (12, 4, 3);
    let z = unit_embedding(n, k, w, 7);
    let ws = common::uniform(&mut common::rng(8), &[k, k], -1.0, 1.0);
    let edges: Arc<[(usize, usize)]> = (0..n).map(|i| (i, (i * 5 + 1) % n)).collect();
    let mut tape = Tape::new();
    let zv = tape.leaf(z.values().clone()).unwrap();
    let wv = tape.leaf(ws.clone()).unwrap();
    let s = tape.pairwise_scores(zv, wv, &edges).unwrap();
    for (e, &(u, v)) in edges.iter().enumerate() {
        let h = edge_feature_map(z.node(u), z.node(v), k).unwrap();
        let direct = score_pairwise(&h, &ws).unwrap();
        let oracle = pairwise_oracle(z.node(u), z.node(v), &ws, k);
        assert!((direct - oracle).abs() < 1e-12);
        assert!((tape.value(s).data()[e] - oracle).abs() < 1e-12);
    }
}

#[test]
fn single_factor_is_scaled_dot_product() {
    let z = unit_embedding(2, 1, 6, 9);
    let h = edge_feature_map(z.node(0), z.node(1), 1).unwrap();
    let dot: f64 = z.node(0).iter().zip(z.node(1)).map(|(a, b)| a * b).sum();
    let s = score_pairwise(&h, &Tensor::matrix(1, 1, vec![2.5]).unwrap()).unwrap();
    assert!((s - 2.5 * dot).abs() < 1e-15);
}

#[test]
fn score_concat_examples_and_oracle() {
    let (k, w) = (3, 4);
    let z = unit_embedding(6, k, w, 10);
    assert_eq!(score_concat(z.node(0), z.node(1), &[0.0; 24]).unwrap(), 0.0);
    let wv = common::uniform(&mut common::rng(11), &[2 * k * w], -1.0, 1.0);
    let edges: Arc<[(usize, usize)]> = vec![(0, 1), (2, 3), (5, 4), (1, 1)].into();
    let mut tape = Tape::new();
    let zt = tape.leaf(z.values().clone()).unwrap();
    let wt = tape.leaf(wv.clone()).unwrap();
    let s = tape.concat_scores(zt, wt, &edges).unwrap();
    for (e, &(u, v)) in edges.iter().enumerate() {
        let mut by_factor = 0.0;
        for f in 0..k {
            let wu = &wv.data()[f * w..(f + 1) * w];
            let wvv = &wv.data()[k * w + f * w..k * w + (f + 1) * w];
            by_factor += wu.iter().zip(z.factor(u, f)).map(|(a, b)| a * b).sum::<f64>();
            by_factor += wvv.iter().zip(z.factor(v, f)).map(|(a, b)| a * b).sum::<f64>();
        }
        let direct = score_concat(z.node(u), z.node(v), wv.data()).unwrap();
        assert!((direct - by_factor).abs() < 1e-12);
        assert!((tape.value(s).data()[e] - by_factor).abs() < 1e-12);
    }
}

#[test]
fn bce_examples() {
    assert!((bce_loss(&[0.5], &[1.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-11);
    let v = bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap();
    assert!((v - (-(0.9f64.ln() + 0.8f64.ln()) / 2.0)).abs() < 1e-15);
    assert!((v - 0.1643).abs() < 1e-4);
    assert!(matches!(bce_loss(&[], &[]), Err(Error::Usage(_))));
}

#[test]
fn bce_tape_matches_direct() {
    let mut rng = common::rng(12);
    let p: Vec<f64> = (0..30).map(|_| rng.random_range(0.01..0.99)).collect();
    let y: Arc<[f64]> = (0..30).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let mut tape = Tape::new();
    let pv = tape.leaf(Tensor::vector(p.clone())).unwrap();
    let l = tape.bce(pv, &y).unwrap();
    assert!((tape.scalar(l) - bce_loss(&p, &y).unwrap()).abs() < 1e-14);
}

/// Cross-entropy of every (node, factor) pair with an explicit softmax.
fn disc_oracle(z: &DisentangledEmbedding, w: &Tensor, b: &[f64]) -> f64 {
    let k = z.factors();
    let mut total = 0.0;
    for u in 0..z.node_count() {
        for f in 0..k {
            let logits: Vec<f64> = (0..k)
                .map(|c| b[c] + w.row(c).iter().zip(z.factor(u, f)).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            let denom: f64 = logits.iter().map(|l| l.exp()).sum();
            total -= (logits[f].exp() / denom).ln();
        }
    }
    total / (z.node_count() * k) as f64
}

#[test]
fn disc_loss_examples() {
    let z1 = unit_embedding(7, 1, 4, 13);
    assert_eq!(disc_loss(&z1, &common::uniform(&mut common::rng(1), &[1, 4], -1.0, 1.0), &[0.3]).unwrap(), 0.0);
    for k in [2usize, 3, 8, 16] {
        let z = unit_embedding(5, k, 2, 14);
        let l = disc_loss(&z, &Tensor::zeros(&[k, 2]), &vec![0.0; k]).unwrap();
        assert!((l - (k as f64).ln()).abs() < 1e-14, "K={k}: {l}");
    }
}

#[test]
fn disc_loss_matches_oracle_and_tape() {
    let mut rng = common::rng(15);
    for trial in 0..20 {
        let k = 2 + trial % 4;
        let z = unit_embedding(6, k, 3, 100 + trial as u64);
        let w = common::uniform(&mut rng, &[k, 3], -2.0, 2.0);
        let b = common::uniform(&mut rng, &[k], -1.0, 1.0);
        let direct = disc_loss(&z, &w, b.data()).unwrap();
        assert!((direct - disc_oracle(&z, &w, b.data())).abs() < 1e-10);

        let mut store = ParamStore::new();
        let d = Discriminator::new(k, 3, &mut store, &mut common::rng(0));
        *store.get_mut(d.w) = w.clone();
        *store.get_mut(d.b) = b.clone();
        let mut tape = Tape::new();
        let zv = tape.leaf(z.values().clone()).unwrap();
        let l = d.loss(&mut tape, &store, zv).unwrap();
        assert!((tape.scalar(l) - direct).abs() < 1e-12);
    }
}

#[test]
fn total_loss_examples() {
    assert_eq!(total_loss(0.5, 0.2, 0.0), 0.5);
    assert!((total_loss(0.5, 0.2, 1.0) - 0.7).abs() < 1e-15);
}

#[test]
fn total_loss_gradient_wrt_ws() {
    let (n, k, w) = (8, 3, 2);
    let z = unit_embedding(n, k, w, 16);
    let edges: Arc<[(usize, usize)]> = (0..n).map(|i| (i, (i + 3) % n)).collect();
    let labels: Arc<[f64]> = (0..n).map(|i| (i % 2) as f64).collect();
    let mut store = ParamStore::new();
    let dec = Decoder::new(DecoderKind::Pairwise, k, k * w, &mut store, &mut common::rng(1));
    let disc = Discriminator::new(k, w, &mut store, &mut common::rng(2));
    let lambda = 0.7;
    let eval = |ws: &Tensor| -> (f64, Vec<f64>) {
        let mut s = store.clone();
        *s.get_mut(dec.weight) = ws.clone();
        let mut tape = Tape::new();
        let zv = tape.leaf(z.values().clone()).unwrap();
        let logits = dec.logits(&mut tape, &s, zv, &edges).unwrap();
        let p = tape.sigmoid(logits).unwrap();
        let bce = tape.bce(p, &labels).unwrap();
        let dl = disc.loss(&mut tape, &s, zv).unwrap();
        let scaled = tape.scale(dl, lambda).unwrap();
        let total = tape.add(bce, scaled).unwrap();
        let g = tape.backward(total).unwrap();
        let grad = g.params().find(|(id, _)| *id == dec.weight).and_then(|(_, g)| g).unwrap().to_vec();
        (tape.scalar(total), grad)
    };
    let ws = store.get(dec.weight).clone();
    let worst = common::gradcheck(&[ws], &|inp| {
        let (v, g) = eval(&inp[0]);
        (v, vec![g])
    });
    assert!(worst < 1e-6, "rel err {worst}");
}

#[test]
fn predict_sign_threshold() {
    assert_eq!(predict_sign(0.5), Sign::Positive);
    assert_eq!(predict_sign(0.49), Sign::Negative);
    assert_eq!(predict_sign(1.0), Sign::Positive);
}
