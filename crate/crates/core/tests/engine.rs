use flr_core::data::{generate_synthetic, ClientShard, SyntheticSpec};
use flr_core::engine::{
    aggregate, client_update_flr, client_update_warmup, run_experiment, sample_clients,
    ClientUpdateResult, ExperimentSetup, FlrContext, Sequential, Simulation, TrainerConfig,
};
use flr_core::loss::{ce_loss_and_grad, softmax, Sample};
use flr_core::metrics::{Counts, LocalWeighting, Phase};
use flr_core::noise::{apply_noise, NoiseKind, NoiseSpec};
use flr_core::optim::{sgd_step, SgdConfig};
use flr_core::partition::partition_iid;
use flr_core::rng;
use flr_core::state::{AlphaSchedule, PseudoLabelStore, ScheduleParams};
use flr_core::ModelParams;
use rand::seq::SliceRandom;

const CLASSES: usize = 3;

fn shards(clients: usize, seed: u64) -> (Vec<ClientShard>, Vec<flr_core::data::Example>) {
    let split = generate_synthetic(&SyntheticSpec {
        classes: CLASSES,
        dim: 4,
        train_per_class: 24,
        test_per_class: 10,
        spread: 3.0,
        seed,
    })
    .unwrap();
    let shards = partition_iid(&split.train, CLASSES, clients, seed).unwrap();
    let noise = NoiseSpec {
        kind: NoiseKind::Symmetric,
        rho: 0.5,
        tau: 0.2,
        pair_map: vec![],
        seed,
    };
    let (shards, _) = apply_noise(shards, &noise, CLASSES).unwrap();
    (shards, split.test)
}

fn trainer(epochs: usize, batch: usize) -> TrainerConfig {
    TrainerConfig {
        local_epochs: epochs,
        batch_size: batch,
        sgd: SgdConfig::plain(0.1),
        fedprox_mu: 0.0,
        participation: 1.0,
    }
}

fn schedule(lambda: f64, rounds: usize, warmup: usize) -> ScheduleParams {
    ScheduleParams {
        lambda,
        rounds,
        warmup_rounds: warmup,
        ..ScheduleParams::default()
    }
}

fn bits(p: &ModelParams) -> Vec<u64> {
    p.values().iter().map(|v| v.to_bits()).collect()
}

fn sizes() -> Vec<usize> {
    vec![4, 6, CLASSES]
}

#[test]
fn flr_with_zero_lambda_matches_warmup_bitwise() {
    let (shards, _) = shards(2, 1);
    let server = ModelParams::init_he(&sizes(), 7).unwrap();
    let tc = trainer(3, 5);
    let sp = schedule(0.0, 10, 2);
    for round in [2, 5, 9] {
        let mut store = PseudoLabelStore::new();
        let warm = client_update_warmup(&server, &shards[0], &tc, round, 11).unwrap();
        let ctx = FlrContext {
            store: &mut store,
            schedule: &sp,
            record_targets: false,
        };
        let flr = client_update_flr(&server, &shards[0], ctx, &tc, round, 11).unwrap();
        assert_eq!(bits(&warm.params), bits(&flr.params));
        assert_eq!(warm.epoch_losses, flr.epoch_losses);
    }
}

#[test]
fn zero_local_epochs_return_the_server_model() {
    let (shards, _) = shards(2, 1);
    let server = ModelParams::init_he(&sizes(), 7).unwrap();
    let r = client_update_warmup(&server, &shards[1], &trainer(0, 5), 0, 1).unwrap();
    assert_eq!(bits(&r.params), bits(&server));
}

#[test]
fn server_only_targets_equal_server_predictions() {
    let (shards, _) = shards(2, 2);
    let server = ModelParams::init_he(&sizes(), 3).unwrap();
    let sp = ScheduleParams {
        alpha: 1.0,
        alpha_schedule: AlphaSchedule::Constant,
        ..schedule(2.0, 20, 1)
    };
    let mut store = PseudoLabelStore::new();
    // Round 4 < R/2 so beta_r = 0 and s is exactly the fresh server prediction.
    let ctx = FlrContext {
        store: &mut store,
        schedule: &sp,
        record_targets: true,
    };
    let r = client_update_flr(&server, &shards[0], ctx, &trainer(2, 4), 4, 5).unwrap();
    let records = r.targets.unwrap();
    assert_eq!(records.len(), 2 * shards[0].len());
    for rec in &records {
        let e = shards[0].examples.iter().find(|e| e.id == rec.example_id).unwrap();
        let direct = softmax(&server.forward(&e.features).unwrap()).unwrap();
        assert_eq!(rec.p_server, direct);
        assert_eq!(rec.t, rec.p_server);
        assert_eq!(rec.t, rec.s);
    }
}

#[test]
fn local_only_and_entropy_targets() {
    let (shards, _) = shards(2, 2);
    let server = ModelParams::init_he(&sizes(), 3).unwrap();
    for (alpha, gamma) in [(0.0, 0.5), (0.0, 0.0)] {
        let sp = ScheduleParams {
            alpha,
            gamma,
            ..schedule(2.0, 20, 0)
        };
        let mut store = PseudoLabelStore::new();
        let ctx = FlrContext {
            store: &mut store,
            schedule: &sp,
            record_targets: true,
        };
        let r = client_update_flr(&server, &shards[0], ctx, &trainer(2, 4), 12, 5).unwrap();
        for rec in r.targets.unwrap() {
            assert_eq!(rec.t, rec.m);
        }
    }
}

#[test]
fn fedprox_step_is_closed_form() {
    // One example, one batch: the local trajectory is deterministic without
    // any shuffling ambiguity, so the oracle can replay it exactly.
    let (all, _) = shards(1, 3);
    let shard = ClientShard {
        client_id: 0,
        examples: vec![all[0].examples[0].clone()],
        noise_rate: 0.0,
    };
    let server = ModelParams::init_he(&sizes(), 4).unwrap();
    let mu = 0.25;
    let lr = 0.1;
    let tc = TrainerConfig {
        fedprox_mu: mu,
        ..trainer(3, 1)
    };
    let got = client_update_warmup(&server, &shard, &tc, 0, 9).unwrap();

    let e = &shard.examples[0];
    let batch = [Sample {
        x: &e.features,
        label: e.given_label,
        target: None,
    }];
    let mut theta = server.clone();
    for _ in 0..3 {
        let mut g = ce_loss_and_grad(&theta, &batch).unwrap().grad;
        for ((gi, w), w0) in g.values_mut().iter_mut().zip(theta.values()).zip(server.values()) {
            *gi += mu * (w - w0);
        }
        sgd_step(&mut theta, &g, lr).unwrap();
    }
    assert_eq!(bits(&got.params), bits(&theta));

    // A single step starts at the server model, where the proximal term vanishes.
    let one = client_update_warmup(&server, &shard, &TrainerConfig { local_epochs: 1, ..tc }, 0, 9).unwrap();
    let plain = client_update_warmup(&server, &shard, &trainer(1, 1), 0, 9).unwrap();
    assert_eq!(bits(&one.params), bits(&plain.params));
}

fn result(id: usize, n: usize, values: Vec<f64>) -> ClientUpdateResult {
    ClientUpdateResult {
        client_id: id,
        params: ModelParams::from_values(&[1, 1], values).unwrap(),
        n_k: n,
        epoch_losses: vec![],
        local_counts: Counts::default(),
        targets: None,
    }
}

#[test]
fn aggregate_examples() {
    let lone = result(3, 7, vec![0.1, -2.5]);
    assert_eq!(aggregate(std::slice::from_ref(&lone)).unwrap().values(), lone.params.values());

    let two = [result(0, 1, vec![0.0, 0.0]), result(1, 3, vec![4.0, 4.0])];
    assert_eq!(aggregate(&two).unwrap().values(), &[3.0, 3.0]);

    let same: Vec<_> = (0..5).map(|k| result(k, k + 1, vec![0.1, 1.0 / 3.0])).collect();
    assert_eq!(aggregate(&same).unwrap().values(), &[0.1, 1.0 / 3.0]);

    assert!(aggregate(&[]).is_err());
}

#[test]
fn sampling_examples() {
    assert_eq!(sample_clients(3, 8, 1.0, 1), (0..8).collect::<Vec<_>>());
    let s = sample_clients(3, 100, 0.1, 1);
    assert_eq!(s.len(), 10);
    assert_eq!(s, sample_clients(3, 100, 0.1, 1));
    let mut d = s.clone();
    d.dedup();
    assert_eq!(d, s);
    assert_eq!(sample_clients(0, 5, 0.01, 1).len(), 1);
    assert_eq!(sample_clients(0, 10, 0.25, 1).len(), 3);
}

fn setup(clients: usize, lambda: f64, rounds: usize, warmup: usize, participation: f64) -> ExperimentSetup {
    let (shards, test) = shards(clients, 21);
    ExperimentSetup {
        shards,
        test,
        layer_sizes: sizes(),
        trainer: TrainerConfig {
            participation,
            ..trainer(2, 6)
        },
        schedule: schedule(lambda, rounds, warmup),
        seed: 77,
        local_weighting: LocalWeighting::Unweighted,
        record_targets: false,
    }
}

#[test]
fn single_client_equals_centralized_sgd() {
    let s = setup(1, 2.0, 4, 4, 1.0);
    let shard = s.shards[0].clone();
    let (server, _) = run_experiment(s.clone(), &Sequential, |_, _| Ok(())).unwrap();

    let mut theta = ModelParams::init_he(&s.layer_sizes, s.seed).unwrap();
    for round in 0..4 {
        let mut stream = rng::stream(s.seed, rng::tag::LOCAL_TRAIN, &[0, round]);
        let mut order: Vec<usize> = (0..shard.len()).collect();
        for _ in 0..s.trainer.local_epochs {
            order.shuffle(&mut stream);
            for chunk in order.chunks(s.trainer.batch_size) {
                let batch: Vec<Sample<'_>> = chunk
                    .iter()
                    .map(|&i| Sample {
                        x: &shard.examples[i].features,
                        label: shard.examples[i].given_label,
                        target: None,
                    })
                    .collect();
                let g = ce_loss_and_grad(&theta, &batch).unwrap().grad;
                sgd_step(&mut theta, &g, s.trainer.sgd.lr).unwrap();
            }
        }
    }
    assert_eq!(bits(&server), bits(&theta));
}

#[test]
fn warmup_only_run_ignores_lambda() {
    let (a, ma) = run_experiment(setup(4, 0.0, 5, 5, 0.5), &Sequential, |_, _| Ok(())).unwrap();
    let (b, mb) = run_experiment(setup(4, 3.0, 5, 5, 0.5), &Sequential, |_, _| Ok(())).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ma, mb);
    assert!(ma.iter().all(|m| m.phase == Phase::Warmup));
}

#[test]
fn regularizer_is_silent_before_warmup_ends() {
    let (_, ma) = run_experiment(setup(4, 0.0, 6, 3, 1.0), &Sequential, |_, _| Ok(())).unwrap();
    let (_, mb) = run_experiment(setup(4, 3.0, 6, 3, 1.0), &Sequential, |_, _| Ok(())).unwrap();
    assert_eq!(ma[..3], mb[..3]);
    assert_ne!(ma[5], mb[5]);
}

#[test]
fn runs_are_deterministic() {
    let (a, ma) = run_experiment(setup(4, 2.0, 6, 2, 0.5), &Sequential, |_, _| Ok(())).unwrap();
    let (b, mb) = run_experiment(setup(4, 2.0, 6, 2, 0.5), &Sequential, |_, _| Ok(())).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ma, mb);
}

#[test]
fn skipped_clients_keep_their_state() {
    let mut sim = Simulation::new(setup(4, 2.0, 12, 1, 0.5)).unwrap();
    let mut checked = 0;
    while !sim.finished() {
        let before: Vec<PseudoLabelStore> = sim.stores().to_vec();
        let report = sim.step(&Sequential).unwrap();
        for k in 0..4 {
            if !report.plan.participants.contains(&k) {
                assert_eq!(sim.stores()[k], before[k]);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn clients_do_not_see_each_other() {
    // Client 0's update depends only on its own shard and stream: corrupting
    // every other client's data and state leaves it bit-identical.
    let s = setup(4, 2.0, 3, 1, 1.0);
    let mut sim_a = Simulation::new(s.clone()).unwrap();
    sim_a.step(&Sequential).unwrap();
    let report_a = sim_a.step(&Sequential).unwrap();

    let mut tampered = s.clone();
    for shard in tampered.shards.iter_mut().skip(1) {
        for e in &mut shard.examples {
            e.features.iter_mut().for_each(|f| *f = -*f * 3.0);
        }
    }
    let mut sim_b = Simulation::new(tampered).unwrap();
    sim_b.step(&Sequential).unwrap();
    // Put the round-0 server back so both runs hand client 0 the same snapshot.
    let stores = sim_b.stores().to_vec();
    let mut sim_b = Simulation::restore(sim_b.setup().clone(), sim_a_server_round1(&s), stores, 1).unwrap();
    let report_b = sim_b.step(&Sequential).unwrap();
    assert_eq!(bits(&report_a.updates[0].params), bits(&report_b.updates[0].params));
    assert_ne!(bits(&report_a.updates[1].params), bits(&report_b.updates[1].params));
}

fn sim_a_server_round1(s: &ExperimentSetup) -> ModelParams {
    let mut sim = Simulation::new(s.clone()).unwrap();
    sim.step(&Sequential).unwrap();
    sim.server().clone()
}

#[test]
fn client_streams_ignore_who_else_participates() {
    let s = setup(4, 0.0, 1, 1, 1.0);
    let server = ModelParams::init_he(&s.layer_sizes, s.seed).unwrap();
    let mut sim = Simulation::new(s.clone()).unwrap();
    let report = sim.step(&Sequential).unwrap();
    let alone = client_update_warmup(&server, &s.shards[2], &s.trainer, 0, s.seed).unwrap();
    assert_eq!(bits(&report.updates[2].params), bits(&alone.params));
}

#[test]
fn errors_carry_the_round() {
    let mut s = setup(2, 2.0, 3, 1, 1.0);
    s.trainer.sgd.lr = 1e300;
    let err = run_experiment(s, &Sequential, |_, _| Ok(())).unwrap_err();
    assert!(err.to_string().contains("round"), "{err}");
}
