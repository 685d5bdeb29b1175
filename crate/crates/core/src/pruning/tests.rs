use super::*;
use crate::nn::{init_model, Activation, Architecture, Network};
use crate::seed::rng_from;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn model(n: usize, latent: usize, seed: u64) -> Autoencoder {
    init_model(&Architecture::shallow(n, latent), 0.1, seed).unwrap()
}

fn weights(m: &Autoencoder) -> Vec<f64> {
    m.layers().flat_map(|l| l.weights.as_slice().to_vec()).collect()
}

#[test]
fn preserved_percentages() {
    let mut m = model(10, 4, 1);
    assert_eq!(preserved_percentage(&m).total, 100.0);
    for l in m.layers_mut() {
        let w = l.weights.as_mut_slice();
        let half = w.len() / 2;
        w[..half].fill(0.0);
    }
    let p = preserved_percentage(&m);
    assert_eq!((p.total, p.encoder, p.decoder), (50.0, 50.0, 50.0));

    let mut m = model(10, 4, 2);
    prune_random(&mut m, 0.1, &mut rng_from(3)).unwrap();
    // W = 80, ⌊0.1·80⌋ = 8 removed.
    assert_eq!(preserved_percentage(&m).total, 100.0 * 72.0 / 80.0);
}

#[test]
fn random_pruning_counts() {
    let mut m = model(50, 10, 4);
    assert_eq!(m.weight_count(), 1000);
    let before = m.clone();
    let r = prune_random(&mut m, 0.0, &mut rng_from(1)).unwrap();
    assert_eq!((m == before, r.selected()), (true, 0));

    let r = prune_random(&mut m, 0.25, &mut rng_from(1)).unwrap();
    assert_eq!(r.selected(), 250);
    assert_eq!(r.zeroed(), 250);
    assert_eq!(weights(&m).iter().filter(|&&w| w == 0.0).count(), 250);
    for (a, b) in m.layers().zip(before.layers()) {
        assert_eq!(a.biases, b.biases);
    }

    prune_random(&mut m, 1.0, &mut rng_from(2)).unwrap();
    assert!(weights(&m).iter().all(|&w| w == 0.0));
    assert!(prune_random(&mut m, 1.1, &mut rng_from(2)).is_err());
}

#[test]
fn random_pruning_only_counts_live_weights() {
    let mut m = model(20, 5, 8);
    prune_random(&mut m, 0.3, &mut rng_from(1)).unwrap();
    let live_before = nonzero_count(&m).weights_nonzero();
    let r = prune_random(&mut m, 0.3, &mut rng_from(2)).unwrap();
    assert_eq!(r.selected(), 60);
    assert_eq!(nonzero_count(&m).weights_nonzero(), live_before - r.zeroed());
}

#[test]
fn pruning_is_seed_deterministic_and_idempotent_on_zeros() {
    let base = model(12, 3, 5);
    let (mut a, mut b) = (base.clone(), base.clone());
    prune_random(&mut a, 0.4, &mut rng_from(9)).unwrap();
    prune_random(&mut b, 0.4, &mut rng_from(9)).unwrap();
    assert_eq!(a, b);
    let snapshot = a.clone();
    let zeros: Vec<usize> = weights(&a).iter().enumerate().filter(|(_, &w)| w == 0.0).map(|(i, _)| i).collect();
    let r = zero_weights(&mut a, zeros);
    assert_eq!(r.zeroed(), 0);
    assert_eq!(a, snapshot);
}

#[test]
fn node_variance_cases() {
    let m = model(6, 3, 1);
    let constant = Matrix::from_vec(4, 6, vec![1.0; 24]).unwrap();
    let s = collect_node_variance(&m, &constant).unwrap();
    assert!(s.layers.iter().flatten().chain(&s.input).all(|&v| v == 0.0));

    let single = Matrix::from_vec(1, 6, vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let s = collect_node_variance(&m, &single).unwrap();
    assert!(s.layers.iter().flatten().all(|&v| v == 0.0));

    let id = Layer::new(Matrix::identity(1), vec![0.0], Activation::Identity).unwrap();
    let ident =
        Autoencoder::new(Network::new(vec![id.clone()], 0.1).unwrap(), Network::new(vec![id], 0.1).unwrap()).unwrap();
    let two = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
    let s = collect_node_variance(&ident, &two).unwrap();
    assert_eq!(s.layers, vec![vec![0.25], vec![0.25]]);

    assert!(collect_node_variance(&m, &Matrix::zeros(0, 6)).is_err());
}

fn uniform_stats(m: &Autoencoder) -> NodeStats {
    NodeStats { input: vec![0.5; m.input_dim()], layers: m.layers().map(|l| vec![0.5; l.out_dim()]).collect() }
}

#[test]
fn variance_pruning_with_equal_variances_matches_random() {
    // Two-sample chi-square homogeneity test on per-position selection counts.
    let base = model(5, 4, 3);
    let w = base.weight_count();
    let stats = uniform_stats(&base);
    let reps = 3000;
    let (mut cv, mut cr) = (vec![0.0; w], vec![0.0; w]);
    let mut rng = rng_from(77);
    for _ in 0..reps {
        let mut a = base.clone();
        prune_variance(&mut a, &stats, 0.25, VarianceKey::Destination, &mut rng).unwrap();
        let mut b = base.clone();
        prune_random(&mut b, 0.25, &mut rng).unwrap();
        for (i, (x, y)) in weights(&a).iter().zip(weights(&b)).enumerate() {
            cv[i] += f64::from(u8::from(*x == 0.0));
            cr[i] += f64::from(u8::from(y == 0.0));
        }
    }
    let mut stat = 0.0;
    for i in 0..w {
        let pooled = (cv[i] + cr[i]) / 2.0;
        stat += (cv[i] - pooled).powi(2) / pooled + (cr[i] - pooled).powi(2) / pooled;
    }
    let p = 1.0 - ChiSquared::new((w - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat}, p = {p}");
}

#[test]
fn high_variance_node_is_spared() {
    let base = model(8, 4, 6);
    let mut stats = uniform_stats(&base);
    stats.layers[0] = vec![1e-3, 1e-3, 1e6, 1e-3];
    for seed in 0..20 {
        let mut m = base.clone();
        prune_variance(&mut m, &stats, 0.5, VarianceKey::Destination, &mut rng_from(seed)).unwrap();
        assert_eq!(m.encoder.layers[0].weights.row(2), base.encoder.layers[0].weights.row(2));
    }
}

#[test]
fn variance_pruning_edges() {
    let base = model(8, 4, 6);
    let stats = uniform_stats(&base);
    let mut m = base.clone();
    prune_variance(&mut m, &stats, 0.0, VarianceKey::Destination, &mut rng_from(1)).unwrap();
    assert_eq!(m, base);
    let mut bad = stats.clone();
    bad.layers[1].pop();
    assert!(prune_variance(&mut m, &bad, 0.1, VarianceKey::Destination, &mut rng_from(1)).is_err());
    assert!(prune_variance(&mut m, &stats, -0.1, VarianceKey::Destination, &mut rng_from(1)).is_err());
}

#[test]
fn source_key_reads_previous_layer() {
    let m = model(3, 2, 1);
    let stats = NodeStats { input: vec![1.0, 2.0, 3.0], layers: vec![vec![10.0, 20.0], vec![0.1, 0.2, 0.3]] };
    let s = variance_scores(&m, &stats, VarianceKey::Source).unwrap();
    let inv = |v: f64| 1.0 / (v + VARIANCE_EPS);
    // Encoder row 0 reads inputs; decoder rows read the latent layer.
    assert_eq!(&s[..3], &[inv(1.0), inv(2.0), inv(3.0)]);
    assert_eq!(&s[6..8], &[inv(10.0), inv(20.0)]);
    let d = variance_scores(&m, &stats, VarianceKey::Destination).unwrap();
    assert_eq!(&d[..4], &[inv(10.0), inv(10.0), inv(10.0), inv(20.0)]);
}

#[test]
fn conjunctive_selection_cases() {
    let mut rng = rng_from(1);
    // Column 1 is the row minimum in every sample.
    let a = Matrix::from_rows(&[vec![0.9, 0.0, 0.5, 1.0], vec![0.8, 0.1, 0.9, 0.7], vec![1.0, 0.0, 0.6, 0.4]]).unwrap();
    assert_eq!(conjunctive_select(&a, 0.2, &mut rng), vec![false, true, false, false]);

    // Nothing below a zero threshold, even after all rows are dropped.
    assert_eq!(conjunctive_select(&a, 0.0, &mut rng), vec![false; 4]);

    // One row: the selection is the row itself.
    let one = Matrix::from_rows(&[vec![0.0, 0.5, 1.0, 0.2]]).unwrap();
    assert_eq!(conjunctive_select(&one, 0.3, &mut rng), vec![true, false, false, true]);

    // Disjoint low columns force row removal until a single row remains.
    let split = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let sel = conjunctive_select(&split, 0.5, &mut rng);
    assert_eq!(sel.iter().filter(|&&s| s).count(), 1);
}

#[test]
fn conjunctive_pruning_zeroes_node_inputs_and_bias() {
    let mut m = model(6, 3, 2);
    for l in m.layers_mut() {
        l.biases.iter_mut().for_each(|b| *b = 0.1);
    }
    // Latent node 0 has all-negative incoming weights, so it stays at 0
    // for non-negative inputs: always the row minimum.
    m.encoder.layers[0].weights.row_mut(0).fill(-1.0);
    m.encoder.layers[0].biases[0] = -0.5;
    let held = Matrix::from_rows(&[vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0]]).unwrap();
    let r = prune_conjunctive(&mut m, &held, 0.05, &mut rng_from(3)).unwrap();
    assert!(m.encoder.layers[0].weights.row(0).iter().all(|&w| w == 0.0));
    assert_eq!(m.encoder.layers[0].biases[0], 0.0);
    assert!(r.layers.iter().any(|l| l.half == Half::Encoder && l.selected == 7));
    assert!(prune_conjunctive(&mut m, &Matrix::zeros(0, 6), 0.05, &mut rng_from(3)).is_err());
    assert!(prune_conjunctive(&mut m, &held, 1.5, &mut rng_from(3)).is_err());
}

#[test]
fn apply_dispatches() {
    let base = model(6, 3, 4);
    let train = Matrix::from_rows(&[vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0], vec![0.0; 6]]).unwrap();
    let mut m = base.clone();
    let spec = PrunerSpec { kind: PrunerKind::None, ..Default::default() };
    assert_eq!(apply_pruner(&spec, &mut m, &train, &train, &mut rng_from(1)).unwrap().selected(), 0);
    assert_eq!(m, base);
    let spec = PrunerSpec { kind: PrunerKind::Variance, fraction: 0.5, ..Default::default() };
    let r = apply_pruner(&spec, &mut m, &train, &train, &mut rng_from(1)).unwrap();
    assert_eq!(r.selected(), 18);
    for k in PrunerKind::ALL {
        assert_eq!(k.as_str().parse::<PrunerKind>().unwrap(), k);
    }
}
