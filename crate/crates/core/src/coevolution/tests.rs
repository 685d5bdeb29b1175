use super::*;
use crate::nn::Architecture;
use crate::problem::{generate_centroids, generate_dataset, generate_heldout, Split};
use crate::seed::rng_from;

fn data(n: usize, seed: u64) -> TrainingData {
    let c = generate_centroids(3, n, seed).unwrap();
    TrainingData {
        train: generate_dataset(&c, 4, 0.05, seed + 1, Split::Train).unwrap().to_matrix(),
        test: generate_dataset(&c, 4, 0.05, seed + 2, Split::Test).unwrap().to_matrix(),
        heldout: generate_heldout(&c, 5, 0.05, seed + 3).unwrap().to_matrix(),
    }
}

fn params(cells: usize, radius: usize, epochs: usize) -> CoevParams {
    CoevParams {
        cells,
        radius,
        tournament: 1.max(radius.min(2)),
        lr_max: 100.0,
        epochs,
        schedule: ScheduleSpec::with_defaults(ScheduleKind::Fixed, epochs),
        ..CoevParams::default()
    }
}

fn arch() -> Architecture {
    Architecture::shallow(16, 4)
}

#[test]
fn ring_neighborhoods() {
    let ring = Ring::build(6, 1, &arch(), 1.0, 0).unwrap();
    assert_eq!(ring.neighborhood(0), vec![5, 0, 1]);
    assert_eq!(ring.neighborhood(3), vec![2, 3, 4]);
    assert_eq!(ring.neighborhood(5), vec![4, 5, 0]);
    let ring = Ring::build(1, 0, &arch(), 1.0, 0).unwrap();
    assert_eq!(ring.neighborhood(0), vec![0]);
    let ring = Ring::build(5, 2, &arch(), 1.0, 0).unwrap();
    assert_eq!(ring.neighborhood(1), vec![4, 0, 1, 2, 3]);
    assert!(Ring::build(2, 1, &arch(), 1.0, 0).is_err());

    let ring = Ring::build(4, 1, &arch(), 1.0, 7).unwrap();
    let sub = ring.subpopulation(0);
    assert_eq!(sub.encoders[0], ring.cells()[3].encoder);
    assert_eq!(sub.decoders[1], ring.cells()[0].decoder);
    assert_ne!(ring.cells()[0], ring.cells()[1]);
}

#[test]
fn pair_matrix_matches_per_pair_oracle() {
    let d = data(16, 3);
    let ring = Ring::build(5, 1, &arch(), 1.0, 2).unwrap();
    let sub = ring.subpopulation(2);
    let f = evaluate_pairs(&sub, &d.train, LossKind::L1).unwrap();
    assert_eq!(f.size(), 3);
    for e in 0..3 {
        for dd in 0..3 {
            let model = sub.pair(e, dd).unwrap();
            let (out, _) = forward(&model, &d.train, false).unwrap();
            assert_eq!(f.get(e, dd), loss_value(LossKind::L1, &d.train, &out).unwrap());
        }
    }
    let (be, bd) = f.argmin();
    assert!((0..9).all(|i| f.get(be, bd) <= f.get(i / 3, i % 3)));

    // s = 1 is a single self-pairing.
    let one = Ring::build(1, 0, &arch(), 1.0, 2).unwrap();
    let f1 = evaluate_pairs(&one.subpopulation(0), &d.train, LossKind::L1).unwrap();
    let (out, _) = forward(&one.cells()[0], &d.train, false).unwrap();
    assert_eq!(f1.get(0, 0), loss_value(LossKind::L1, &d.train, &out).unwrap());

    // Identical networks give identical rows and columns.
    let mut dup = sub.clone();
    dup.encoders[2] = dup.encoders[0].clone();
    let f = evaluate_pairs(&dup, &d.train, LossKind::L1).unwrap();
    for j in 0..3 {
        assert_eq!(f.get(0, j), f.get(2, j));
    }
}

fn fitness_with_order() -> FitnessMatrix {
    // Row minima 0.3, 0.1, 0.2 and column minima 0.2, 0.3, 0.1.
    FitnessMatrix::from_values(3, vec![0.9, 0.3, 0.5, 0.4, 0.6, 0.1, 0.2, 0.9, 0.8]).unwrap()
}

#[test]
fn tournament_with_everyone_is_deterministic() {
    let f = fitness_with_order();
    for s in 0..20 {
        assert_eq!(tournament_select(&f, 3, &mut rng_from(s)).unwrap(), (1, 2));
    }
    let tied = FitnessMatrix::from_values(2, vec![0.5; 4]).unwrap();
    assert_eq!(tournament_select(&tied, 2, &mut rng_from(0)).unwrap(), (0, 0));
    assert!(tournament_select(&f, 4, &mut rng_from(0)).is_err());
    assert!(tournament_select(&f, 0, &mut rng_from(0)).is_err());
}

/// Winner distribution by enumerating every entrant subset.
fn oracle_distribution(fitness: &[f64], tau: usize) -> Vec<f64> {
    let s = fitness.len();
    let mut p = vec![0.0; s];
    let subsets: Vec<u32> = (0u32..1 << s).filter(|m| m.count_ones() as usize == tau).collect();
    for m in &subsets {
        let best = (0..s)
            .filter(|i| m & (1 << i) != 0)
            .min_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)))
            .unwrap();
        p[best] += 1.0 / subsets.len() as f64;
    }
    p
}

#[test]
fn tournament_frequencies_match_enumeration() {
    let f = fitness_with_order();
    let rows: Vec<f64> = (0..3).map(|i| f.encoder_fitness(i)).collect();
    let cols: Vec<f64> = (0..3).map(|j| f.decoder_fitness(j)).collect();
    let trials = 10_000;
    for tau in [1, 2] {
        let (pe, pd) = (oracle_distribution(&rows, tau), oracle_distribution(&cols, tau));
        let mut ce = [0usize; 3];
        let mut cd = [0usize; 3];
        let mut rng = rng_from(100 + tau as u64);
        for _ in 0..trials {
            let (e, d) = tournament_select(&f, tau, &mut rng).unwrap();
            ce[e] += 1;
            cd[d] += 1;
        }
        for i in 0..3 {
            for (p, c) in [(pe[i], ce[i]), (pd[i], cd[i])] {
                let sd = (trials as f64 * p * (1.0 - p)).sqrt();
                assert!((c as f64 - trials as f64 * p).abs() <= 3.0 * sd + 1e-9, "tau={tau} i={i} p={p} c={c}");
            }
        }
    }
}

#[test]
fn learning_rate_mutation() {
    let ring = Ring::build(5, 2, &arch(), 0.01, 0).unwrap();
    let sub = ring.subpopulation(0);
    let mut same = sub.clone();
    mutate_learning_rate(&mut same, 0.0, 0.1, (1e-8, 0.1), &mut rng_from(1)).unwrap();
    assert_eq!(same, sub);
    let mut tiny = sub.clone();
    mutate_learning_rate(&mut tiny, 1.0, 1e-12, (1e-8, 0.1), &mut rng_from(1)).unwrap();
    assert!(tiny.encoders.iter().all(|n| (n.learning_rate - 0.01).abs() < 1e-12));

    let mut logs = Vec::new();
    let mut rng = rng_from(9);
    for _ in 0..1000 {
        let mut m = sub.clone();
        mutate_learning_rate(&mut m, 1.0, 0.1, (1e-8, 1e3), &mut rng).unwrap();
        logs.extend(m.encoders.iter().chain(&m.decoders).map(|n| (n.learning_rate / 0.01).ln()));
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (logs.len() - 1) as f64).sqrt();
    // 10,000 draws: standard error of the mean is 0.001.
    assert!(mean.abs() < 0.004, "mean {mean}");
    assert!((sd - 0.1).abs() < 0.004, "sd {sd}");

    let mut clamped = sub.clone();
    mutate_learning_rate(&mut clamped, 1.0, 50.0, (0.005, 0.02), &mut rng_from(3)).unwrap();
    assert!(clamped.decoders.iter().all(|n| (0.005..=0.02).contains(&n.learning_rate)));
    assert!(mutate_learning_rate(&mut clamped, 1.5, 0.1, (1e-8, 0.1), &mut rng_from(3)).is_err());
}

#[test]
fn cell_step_without_pruning_keeps_every_weight() {
    let d = data(16, 5);
    let mut p = params(3, 1, 4);
    p.schedule = ScheduleSpec { c: 0.0, ..p.schedule };
    p.pruner = PrunerSpec { kind: PrunerKind::Random, fraction: 0.5, ..PrunerSpec::default() };
    let ring = Ring::build(3, 1, &arch(), 1.0, 1).unwrap();
    let out = cell_step(ring.subpopulation(0), 1, &d, &p, 0, 0, 1).unwrap();
    assert!(out.prune.is_none());
    assert_eq!(preserved_percentage(&out.center).total, 100.0);
}

#[test]
fn certain_pruning_fires_and_weights_regrow() {
    let d = data(16, 5);
    let mut p = params(1, 0, 4);
    p.schedule = ScheduleSpec { c: 1.0, ..p.schedule };
    p.pruner = PrunerSpec { kind: PrunerKind::Random, fraction: 1.0, ..PrunerSpec::default() };
    let mut m = init_model(&arch(), 1.0, 3).unwrap();
    let report = prune_step(&mut m, &p, &d, 1, 1, &mut rng_from(0)).unwrap().unwrap();
    assert_eq!(report.zeroed(), m.weight_count());
    assert_eq!(preserved_percentage(&m).total, 0.0);

    let mut m = init_model(&arch(), 1.0, 3).unwrap();
    p.pruner.fraction = 0.5;
    prune_step(&mut m, &p, &d, 1, 1, &mut rng_from(0)).unwrap().unwrap();
    let zeroed: Vec<bool> =
        m.layers().flat_map(|l| l.weights.as_slice().iter().map(|&w| w == 0.0).collect::<Vec<_>>()).collect();
    train_epoch(&mut m, &d.train, 4, LossKind::L1, &mut rng_from(1)).unwrap();
    let regrown =
        m.layers().flat_map(|l| l.weights.as_slice().to_vec()).zip(&zeroed).filter(|(w, &z)| z && *w != 0.0).count();
    assert!(regrown > 0);
}

#[test]
fn canonical_equals_single_cell_ring() {
    let d = data(16, 11);
    let mut p = params(1, 0, 20);
    p.tournament = 1;
    p.mutation_prob = 0.0;
    let a = run_canonical(&d, &arch(), 2.0, &p, 42).unwrap();
    let ring = Ring::build(1, 0, &arch(), 2.0, 42).unwrap();
    let b = run_lipi(&d, ring, &p, 42).unwrap();
    let losses =
        |r: &RunResult| r.history.iter().map(|m| (m.train_loss.to_bits(), m.test_loss.to_bits())).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(a.best, b.best);
}

#[test]
fn zero_epochs_reports_initial_state() {
    let d = data(16, 1);
    let p = params(3, 1, 0);
    let ring = Ring::build(3, 1, &arch(), 1.0, 0).unwrap();
    let r = run_lipi(&d, ring.clone(), &p, 0).unwrap();
    assert_eq!(r.history.len(), 3);
    assert!(r.prune_log.is_empty());
    assert!(ring.cells().contains(&r.best));
}

#[test]
fn final_window_of_one_prunes_at_most_at_the_last_epoch() {
    let d = data(16, 2);
    let mut p = params(1, 0, 10);
    p.schedule = ScheduleSpec::new(ScheduleKind::FinalN, 1.0, 10, 1).unwrap();
    p.pruner = PrunerSpec { kind: PrunerKind::Random, ..PrunerSpec::default() };
    let r = run_canonical(&d, &arch(), 1.0, &p, 5).unwrap();
    assert!(r.prune_log.len() <= 1);
    assert!(r.prune_log.iter().all(|e| e.epoch == 10));
    let fired: Vec<usize> = r.history.iter().filter(|m| m.prune_event).map(|m| m.epoch).collect();
    assert!(fired.iter().all(|&t| t == 10));

    p.pruner.kind = PrunerKind::None;
    p.schedule.c = 1.0;
    let r = run_canonical(&d, &arch(), 1.0, &p, 5).unwrap();
    assert!(r.prune_log.is_empty() && r.history.iter().all(|m| !m.prune_event));
}

#[test]
fn generation_reads_only_previous_centers() {
    let d = data(16, 4);
    let p = params(5, 1, 1);
    let ring = Ring::build(5, 1, &arch(), 1.0, 8).unwrap();
    let r = run_lipi(&d, ring.clone(), &p, 8).unwrap();
    for k in 0..5 {
        // Each cell, computed alone from the untouched initial ring.
        let out = cell_step(ring.subpopulation(k), 1, &d, &p, 8, k, 1).unwrap();
        let row = &r.history[5 + k];
        assert_eq!(row.cell, Some(k));
        let (o, _) = forward(&out.center, &d.train, false).unwrap();
        assert_eq!(row.train_loss, loss_value(p.loss, &d.train, &o).unwrap());
    }
}

#[test]
fn runs_are_deterministic_across_pool_sizes() {
    let d = data(16, 6);
    let mut p = params(5, 1, 5);
    p.pruner = PrunerSpec { kind: PrunerKind::Variance, ..PrunerSpec::default() };
    p.schedule.c = 0.5;
    let go = || run_lipi(&d, Ring::build(5, 1, &arch(), 1.0, 3).unwrap(), &p, 3).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(go);
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(go);
    assert_eq!(one.history, four.history);
    assert_eq!(one.prune_log, four.prune_log);
    assert_eq!(one.best, four.best);
}

#[test]
fn invalid_parameters_are_rejected() {
    let d = data(16, 0);
    let mut p = params(3, 1, 2);
    p.tournament = 4;
    assert!(run_lipi(&d, Ring::build(3, 1, &arch(), 1.0, 0).unwrap(), &p, 0).is_err());
    let mut p = params(3, 1, 2);
    p.epochs = 3;
    assert!(p.validate().is_err());
    let p = params(5, 1, 2);
    assert!(run_lipi(&d, Ring::build(3, 1, &arch(), 1.0, 0).unwrap(), &p, 0).is_err());
}
