use std::collections::BTreeMap;

use flr_core::data::{generate_synthetic, ClientShard, Example, SyntheticSpec};
use flr_core::engine::{run_experiment, ExperimentSetup, Sequential, TrainerConfig};
use flr_core::metrics::{count_examples, LocalWeighting};
use flr_core::noise::{apply_noise, assign_noise_levels, inject_noise, NoiseKind, NoiseSpec};
use flr_core::optim::SgdConfig;
use flr_core::partition::{class_counts, id_multiset, partition_iid, partition_noniid};
use flr_core::state::ScheduleParams;
use proptest::prelude::*;

fn spec(classes: usize, dim: usize, n: usize, spread: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        classes,
        dim,
        train_per_class: n,
        test_per_class: n / 2,
        spread,
        seed,
    }
}

#[test]
fn synthetic_is_balanced_and_deterministic() {
    let a = generate_synthetic(&spec(4, 2, 30, 2.0, 5)).unwrap();
    let b = generate_synthetic(&spec(4, 2, 30, 2.0, 5)).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.train.len(), 120);
    for c in 0..4 {
        assert_eq!(a.train.iter().filter(|e| e.true_label.class == c).count(), 30);
    }
    let train_ids: Vec<u64> = a.train.iter().map(|e| e.id).collect();
    assert!(a.test.iter().all(|e| !train_ids.contains(&e.id)));
    assert_ne!(a.train[0].features, a.test[0].features);
}

#[test]
fn separated_clusters_admit_a_linear_probe() {
    // Oracle: full-batch logistic regression by gradient descent, written
    // out here independently of the MLP code.
    let split = generate_synthetic(&spec(2, 8, 100, 10.0, 3)).unwrap();
    let d = 8;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..500 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for e in &split.train {
            let z: f64 = w.iter().zip(&e.features).map(|(a, x)| a * x).sum::<f64>() + b;
            let p = 1.0 / (1.0 + (-z).exp());
            let y = e.true_label.class as f64;
            for (g, x) in gw.iter_mut().zip(&e.features) {
                *g += (p - y) * x;
            }
            gb += p - y;
        }
        let n = split.train.len() as f64;
        for (a, g) in w.iter_mut().zip(&gw) {
            *a -= 0.1 * g / n;
        }
        b -= 0.1 * gb / n;
    }
    let correct = split
        .train
        .iter()
        .filter(|e| {
            let z: f64 = w.iter().zip(&e.features).map(|(a, x)| a * x).sum::<f64>() + b;
            (z > 0.0) as usize == e.true_label.class
        })
        .count();
    assert!(correct as f64 >= 0.99 * split.train.len() as f64, "{correct}");
}

#[test]
fn iid_examples() {
    let split = generate_synthetic(&spec(4, 3, 100, 2.0, 1)).unwrap();
    let shards = partition_iid(&split.train, 4, 10, 9).unwrap();
    for s in &shards {
        assert_eq!(s.len(), 40);
        assert_eq!(class_counts(s, 4), vec![10; 4]);
    }
    assert_eq!(id_multiset(&shards), id_multiset(&[whole(&split.train)]));
    let one = partition_iid(&split.train, 4, 1, 9).unwrap();
    assert_eq!(id_multiset(&one), id_multiset(&[whole(&split.train)]));
    assert!(partition_iid(&split.train, 4, 7, 9).is_err());
}

fn whole(examples: &[Example]) -> ClientShard {
    ClientShard {
        client_id: 0,
        examples: examples.to_vec(),
        noise_rate: 0.0,
    }
}

#[test]
fn near_uniform_dirichlet_split() {
    let split = generate_synthetic(&spec(4, 3, 200, 2.0, 1)).unwrap();
    let part = partition_noniid(&split.train, 4, 10, 1.0, 1e6, 4).unwrap();
    for c in 0..4 {
        for s in &part.shards {
            let n = class_counts(s, 4)[c] as i64;
            assert!((n - 20).abs() <= 2, "class {c} count {n}");
        }
    }
}

#[test]
fn tiny_presence_probability_is_a_config_error() {
    let split = generate_synthetic(&spec(8, 3, 10, 2.0, 1)).unwrap();
    assert!(partition_noniid(&split.train, 8, 200, 1e-9, 1.0, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn noniid_partitions_conserve_and_cover(
        seed in 0u64..10_000,
        p in 0.1f64..1.0,
        alpha in 0.05f64..20.0,
        clients in 1usize..15,
    ) {
        let split = generate_synthetic(&spec(5, 2, 30, 2.0, seed)).unwrap();
        let part = partition_noniid(&split.train, 5, clients, p, alpha, seed).unwrap();
        prop_assert_eq!(id_multiset(&part.shards), id_multiset(&[whole(&split.train)]));
        for (k, s) in part.shards.iter().enumerate() {
            prop_assert!(!s.is_empty());
            let counts = class_counts(s, 5);
            for c in 0..5 {
                prop_assert_eq!(part.presence[k][c], counts[c] > 0);
            }
        }
    }

    #[test]
    fn noise_counts_are_exact(
        seed in 0u64..10_000,
        clients in 1usize..30,
        rho in 0.0f64..=1.0,
        tau in 0.0f64..0.99,
        asym in any::<bool>(),
    ) {
        let spec = NoiseSpec {
            kind: if asym { NoiseKind::Asymmetric } else { NoiseKind::Symmetric },
            rho,
            tau,
            pair_map: vec![1, 2, 0],
            seed,
        };
        let levels = assign_noise_levels(clients, &spec);
        let noisy = levels.iter().filter(|(_, r)| *r > 0.0).count();
        prop_assert_eq!(noisy, (rho * clients as f64).floor() as usize);
        for (_, r) in &levels {
            prop_assert!(*r == 0.0 || (*r >= tau && *r < 1.0));
        }
    }
}

#[test]
fn selection_sizes_and_pair_map() {
    let split = generate_synthetic(&spec(3, 2, 100, 2.0, 1)).unwrap();
    let shard = ClientShard {
        noise_rate: 0.5,
        ..whole(&split.train[..100])
    };
    let sym = NoiseSpec {
        kind: NoiseKind::Symmetric,
        rho: 1.0,
        tau: 0.0,
        pair_map: vec![],
        seed: 3,
    };
    let (_, log) = inject_noise(shard.clone(), &sym, 3).unwrap();
    assert_eq!(log.selected, 50);
    assert_eq!(log.entries.len(), 50);

    let asym = NoiseSpec {
        kind: NoiseKind::Asymmetric,
        pair_map: vec![1, 1, 2],
        ..sym.clone()
    };
    let mixed = ClientShard {
        noise_rate: 0.5,
        ..whole(&split.train)
    };
    let (out, log) = inject_noise(mixed, &asym, 3).unwrap();
    assert!(log.entries.iter().all(|e| e.old_class == 0 && e.new_class == 1));
    let changed = out.examples.iter().filter(|e| e.is_noisy()).count();
    assert_eq!(changed, log.entries.len());

    let empty = NoiseSpec {
        pair_map: vec![],
        ..asym
    };
    assert!(inject_noise(shard, &empty, 3).is_err());
}

#[test]
fn symmetric_change_rate_matches_binomial() {
    // C = 10: a selected example keeps its label with probability 1/10.
    let split = generate_synthetic(&spec(10, 2, 1000, 2.0, 1)).unwrap();
    let shard = ClientShard {
        noise_rate: 0.999_999,
        ..whole(&split.train)
    };
    let sym = NoiseSpec {
        kind: NoiseKind::Symmetric,
        rho: 1.0,
        tau: 0.0,
        pair_map: vec![],
        seed: 17,
    };
    let (out, log) = inject_noise(shard, &sym, 10).unwrap();
    assert_eq!(log.selected, 10_000);
    let changed = out.examples.iter().filter(|e| e.is_noisy()).count() as f64 / 1e4;
    assert!((changed - 0.9).abs() <= 0.02, "{changed}");
}

#[test]
fn corruption_log_matches_labels() {
    let split = generate_synthetic(&spec(4, 2, 60, 2.0, 2)).unwrap();
    let shards = partition_iid(&split.train, 4, 4, 2).unwrap();
    let sym = NoiseSpec {
        kind: NoiseKind::Symmetric,
        rho: 0.75,
        tau: 0.3,
        pair_map: vec![],
        seed: 8,
    };
    let (out, log) = apply_noise(shards, &sym, 4).unwrap();
    let logged: BTreeMap<u64, usize> = log
        .entries
        .iter()
        .filter(|e| e.old_class != e.new_class)
        .map(|e| (e.example_id, e.new_class))
        .collect();
    for s in &out {
        for e in &s.examples {
            assert_eq!(e.is_noisy(), logged.contains_key(&e.id));
            if let Some(&c) = logged.get(&e.id) {
                assert_eq!(e.given_label.class, c);
            }
        }
        let expected = (s.noise_rate * s.len() as f64).round() as usize;
        let selected = log.entries.iter().filter(|e| e.client_id == s.client_id).count();
        assert_eq!(selected, expected);
    }
    for (c, row) in log.transitions.iter().enumerate() {
        let from_c = log.entries.iter().filter(|e| e.old_class == c).count();
        assert_eq!(row.iter().sum::<usize>(), from_c);
    }
}

#[test]
fn single_client_fits_separable_data() {
    let split = generate_synthetic(&spec(3, 4, 30, 8.0, 6)).unwrap();
    let setup = ExperimentSetup {
        shards: vec![whole(&split.train)],
        test: split.test,
        layer_sizes: vec![4, 16, 3],
        trainer: TrainerConfig {
            local_epochs: 2,
            batch_size: 10,
            sgd: SgdConfig::plain(0.05),
            fedprox_mu: 0.0,
            participation: 1.0,
        },
        schedule: ScheduleParams {
            rounds: 20,
            warmup_rounds: 20,
            ..ScheduleParams::default()
        },
        seed: 1,
        local_weighting: LocalWeighting::Unweighted,
        record_targets: false,
    };
    let (server, _) = run_experiment(setup, &Sequential, |_, _| Ok(())).unwrap();
    let counts = count_examples(&server, &split.train).unwrap();
    assert_eq!(counts.clean_correct, split.train.len());
}
