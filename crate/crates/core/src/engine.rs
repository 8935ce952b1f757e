//! Two-phase FedAvg: cross-entropy warmup, then local training with the FLR
//! loss, with optional FedProx proximal term.
//!
//! Rounds `0..R_w` are warmup, rounds `R_w..R` use FLR. Within a round the
//! participating clients train independently on copies of the server model;
//! their results are reduced in client-id order, so running clients through
//! [`Sequential`] or a parallel [`Executor`] gives bit-identical output.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

use crate::data::{ClientShard, Example};
use crate::loss::{loss_and_grad_by, softmax};
use crate::metrics::{self, Counts, LocalWeighting, Phase, RoundMetrics};
use crate::mlp::{ModelParams, Workspace};
use crate::optim::{Sgd, SgdConfig};
use crate::prob::ProbVector;
use crate::rng;
use crate::state::{PseudoLabelStore, ScheduleParams};
use crate::{Error, Result};

/// Local training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerConfig {
    /// Local epochs per round.
    pub local_epochs: usize,
    /// Minibatch size; the last batch of an epoch may be smaller.
    pub batch_size: usize,
    /// Optimizer settings.
    pub sgd: SgdConfig,
    /// FedProx coefficient `mu`; 0 disables the proximal term.
    pub fedprox_mu: f64,
    /// Fraction of clients sampled per round, in `(0, 1]`.
    pub participation: f64,
}

impl TrainerConfig {
    /// Range checks.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("trainer.batch_size must be positive"));
        }
        if !(self.sgd.lr > 0.0 && self.sgd.lr.is_finite()) {
            return Err(Error::config("trainer.lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.sgd.momentum) || self.sgd.weight_decay.is_nan() || self.sgd.weight_decay < 0.0 {
            return Err(Error::config("trainer.momentum must lie in [0, 1), weight_decay >= 0"));
        }
        if !(self.fedprox_mu >= 0.0 && self.fedprox_mu.is_finite()) {
            return Err(Error::config("trainer.fedprox_mu must be nonnegative"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::config("trainer.participation must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Who trains in a round, and how.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    /// Round index.
    pub round: usize,
    /// Distinct participating client ids, ascending.
    pub participants: Vec<usize>,
    /// Phase of the round.
    pub phase: Phase,
}

/// `max(1, round(fraction * N))` with halves rounded up.
pub fn participant_count(clients: usize, fraction: f64) -> usize {
    (libm::round(fraction * clients as f64) as usize).clamp(1, clients.max(1))
}

/// Uniform sample without replacement, deterministic in `(seed, round)`.
pub fn sample_clients(round: usize, clients: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = participant_count(clients, fraction);
    if k >= clients {
        return (0..clients).collect();
    }
    let mut rng = rng::stream(seed, rng::tag::SAMPLING, &[round as u64]);
    let mut chosen = index::sample(&mut rng, clients, k).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Samples participants and tags the phase.
pub fn plan_round(round: usize, clients: usize, fraction: f64, seed: u64, warmup_rounds: usize) -> RoundPlan {
    RoundPlan {
        round,
        participants: sample_clients(round, clients, fraction, seed),
        phase: Phase::of_round(round, warmup_rounds),
    }
}

/// Snapshot of the pseudo labels used for one example in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord {
    /// Example id.
    pub example_id: u64,
    /// Global running average at the time of use.
    pub s: ProbVector,
    /// Local running average at the time of use.
    pub m: ProbVector,
    /// Mixture target fed to the loss.
    pub t: ProbVector,
    /// Server-snapshot prediction used for this round's `s` update.
    pub p_server: ProbVector,
}

/// Outcome of one client's local update.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdateResult {
    /// Client id.
    pub client_id: usize,
    /// Locally updated parameters.
    pub params: ModelParams,
    /// Local dataset size `n_k`.
    pub n_k: usize,
    /// Mean training loss of every local epoch.
    pub epoch_losses: Vec<f64>,
    /// Client-side taxonomy of the fresh local model on its own data.
    pub local_counts: Counts,
    /// Every target used, when recording was requested.
    pub targets: Option<Vec<TargetRecord>>,
}

/// Per-round FLR context handed to a client.
pub struct FlrContext<'a> {
    /// The client's pseudo-label store.
    pub store: &'a mut PseudoLabelStore,
    /// Coefficients and schedules.
    pub schedule: &'a ScheduleParams,
    /// Keep a [`TargetRecord`] for every step.
    pub record_targets: bool,
}

/// One local-update task.
pub struct ClientJob<'a> {
    /// Round index.
    pub round: usize,
    /// Master seed for the client's shuffling stream.
    pub seed: u64,
    /// Server snapshot.
    pub server: &'a ModelParams,
    /// The client's data.
    pub shard: &'a ClientShard,
    /// Local training settings.
    pub trainer: &'a TrainerConfig,
    /// `None` during warmup.
    pub flr: Option<FlrContext<'a>>,
}

impl ClientJob<'_> {
    /// Runs the local update.
    pub fn run(self) -> Result<ClientUpdateResult> {
        let ClientJob {
            round,
            seed,
            server,
            shard,
            trainer,
            flr,
        } = self;
        match flr {
            None => client_update_warmup(server, shard, trainer, round, seed),
            Some(ctx) => client_update_flr(server, shard, ctx, trainer, round, seed),
        }
    }
}

/// Runs a round's client jobs. Implementations must return results in job order.
pub trait Executor {
    /// Executes every job.
    fn execute(&self, jobs: Vec<ClientJob<'_>>) -> Vec<Result<ClientUpdateResult>>;
}

/// Runs jobs one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn execute(&self, jobs: Vec<ClientJob<'_>>) -> Vec<Result<ClientUpdateResult>> {
        jobs.into_iter().map(ClientJob::run).collect()
    }
}

/// Phase-1 local update: `L` epochs of minibatch SGD on cross entropy.
pub fn client_update_warmup(
    server: &ModelParams,
    shard: &ClientShard,
    trainer: &TrainerConfig,
    round: usize,
    seed: u64,
) -> Result<ClientUpdateResult> {
    local_train(server, shard, trainer, round, seed, None)
}

/// Phase-2 local update.
///
/// 1. Every local example's global average `s` absorbs the server snapshot's
///    prediction with momentum `beta(r)`.
/// 2. Each minibatch step refreshes `m` with the current local prediction
///    (momentum `gamma(r)`), forms `t = alpha(r) s + (1 - alpha(r)) m`, and
///    takes an SGD step on `CE + lambda * log(1 - <p, t>)`.
pub fn client_update_flr(
    server: &ModelParams,
    shard: &ClientShard,
    ctx: FlrContext<'_>,
    trainer: &TrainerConfig,
    round: usize,
    seed: u64,
) -> Result<ClientUpdateResult> {
    let beta = ctx.schedule.beta_at(round);
    let mut ws = Workspace::new(server);
    let mut p_server = Vec::with_capacity(shard.len());
    for e in &shard.examples {
        let p = softmax(server.forward_with(&e.features, &mut ws)?)?;
        ctx.store.update_global_avg(e.id, &p, beta);
        p_server.push(p);
    }
    local_train(server, shard, trainer, round, seed, Some((ctx, p_server)))
}

fn local_train(
    server: &ModelParams,
    shard: &ClientShard,
    trainer: &TrainerConfig,
    round: usize,
    seed: u64,
    mut flr: Option<(FlrContext<'_>, Vec<ProbVector>)>,
) -> Result<ClientUpdateResult> {
    let mut params = server.clone();
    let mut ws = Workspace::new(server);
    let mut opt = Sgd::new(trainer.sgd);
    let mut rng = rng::stream(seed, rng::tag::LOCAL_TRAIN, &[shard.client_id as u64, round as u64]);
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut epoch_losses = Vec::with_capacity(trainer.local_epochs);
    let mut records = match &flr {
        Some((ctx, _)) if ctx.record_targets => Some(Vec::new()),
        _ => None,
    };
    let (lambda, alpha, gamma) = match &flr {
        Some((ctx, _)) => (
            ctx.schedule.lambda,
            ctx.schedule.alpha_at(round),
            ctx.schedule.gamma_at(round),
        ),
        None => (0.0, 0.0, 0.0),
    };

    for _ in 0..trainer.local_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(trainer.batch_size) {
            let examples = &shard.examples;
            let step = match flr.as_mut() {
                None => loss_and_grad_by(
                    &params,
                    batch.len(),
                    |i| {
                        let e = &examples[batch[i]];
                        (e.features.as_slice(), e.given_label)
                    },
                    |_, _| Ok(None),
                    0.0,
                    &mut ws,
                ),
                Some((ctx, p_server)) => loss_and_grad_by(
                    &params,
                    batch.len(),
                    |i| {
                        let e = &examples[batch[i]];
                        (e.features.as_slice(), e.given_label)
                    },
                    |i, p| {
                        let e = &examples[batch[i]];
                        let m = ctx.store.update_local_avg(e.id, p, gamma);
                        let t = ctx.store.target(e.id, alpha)?;
                        if let Some(rec) = records.as_mut() {
                            let s = ctx.store.get(e.id).and_then(|st| st.s.clone());
                            rec.push(TargetRecord {
                                example_id: e.id,
                                s: s.ok_or_else(|| Error::State(format!("example {} lost s", e.id)))?,
                                m,
                                t: t.clone(),
                                p_server: p_server[batch[i]].clone(),
                            });
                        }
                        Ok(Some(t))
                    },
                    lambda,
                    &mut ws,
                ),
            };
            let mut step = step?;
            if trainer.fedprox_mu > 0.0 {
                let mu = trainer.fedprox_mu;
                for ((g, w), w0) in step
                    .grad
                    .values_mut()
                    .iter_mut()
                    .zip(params.values())
                    .zip(server.values())
                {
                    *g += mu * (w - w0);
                }
            }
            loss_sum += step.loss * batch.len() as f64;
            opt.step(&mut params, &step.grad)?;
        }
        let mean = loss_sum / shard.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!(
                "client {} diverged: non-finite training loss",
                shard.client_id
            )));
        }
        epoch_losses.push(mean);
    }
    let local_counts = metrics::count_examples(&params, &shard.examples)?;
    Ok(ClientUpdateResult {
        client_id: shard.client_id,
        params,
        n_k: shard.len(),
        epoch_losses,
        local_counts,
        targets: records,
    })
}

/// Size-weighted parameter average over the participants.
///
/// Results are reduced in ascending client-id order as
/// `theta_ref + sum_k (n_k / n) (theta_k - theta_ref)` where `theta_ref` is
/// the lowest-id participant, so the participant order is irrelevant, a lone
/// participant is returned exactly, and identical inputs give back exactly
/// that input.
pub fn aggregate(results: &[ClientUpdateResult]) -> Result<ModelParams> {
    let mut sorted: Vec<&ClientUpdateResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.client_id);
    let first = sorted
        .first()
        .ok_or_else(|| Error::Protocol("aggregate called with no client updates".into()))?;
    let sizes = first.params.layer_sizes();
    if let Some(bad) = sorted.iter().find(|r| !r.params.same_shape(sizes)) {
        return Err(Error::Protocol(format!("client {} returned a mismatched model", bad.client_id)));
    }
    let total: usize = sorted.iter().map(|r| r.n_k).sum();
    if total == 0 {
        return Err(Error::Protocol("aggregate over zero examples".into()));
    }
    let reference = first.params.values();
    let mut out = first.params.clone();
    let weights: Vec<f64> = sorted.iter().map(|r| r.n_k as f64 / total as f64).collect();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let base = reference[i];
        let mut acc = base;
        for (r, w) in sorted.iter().zip(&weights) {
            acc += w * (r.params.values()[i] - base);
        }
        *v = acc;
    }
    if !out.is_finite() {
        return Err(Error::numeric("aggregated model is not finite"));
    }
    Ok(out)
}

/// A fully specified federated training run.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    /// Client datasets (with noise already injected), indexed by client id.
    pub shards: Vec<ClientShard>,
    /// Clean held-out test set.
    pub test: Vec<Example>,
    /// MLP layer sizes `[d, hidden.., C]`.
    pub layer_sizes: Vec<usize>,
    /// Local training settings.
    pub trainer: TrainerConfig,
    /// FLR coefficients and schedules.
    pub schedule: ScheduleParams,
    /// Master seed for initialization, sampling and shuffling.
    pub seed: u64,
    /// Local taxonomy averaging rule.
    pub local_weighting: LocalWeighting,
    /// Keep per-step target records in round reports.
    pub record_targets: bool,
}

impl ExperimentSetup {
    /// Consistency checks.
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        self.schedule.validate()?;
        ModelParams::zeros(&self.layer_sizes)?;
        if self.shards.is_empty() {
            return Err(Error::config("no clients"));
        }
        for (k, s) in self.shards.iter().enumerate() {
            if s.client_id != k {
                return Err(Error::config(format!("shard at index {k} has client id {}", s.client_id)));
            }
            if s.is_empty() {
                return Err(Error::config(format!("client {k} has no examples")));
            }
        }
        Ok(())
    }
}

/// What a single round produced.
#[derive(Debug, Clone)]
pub struct RoundReport {
    /// The round plan.
    pub plan: RoundPlan,
    /// Metrics recorded after aggregation.
    pub metrics: RoundMetrics,
    /// Client results in client-id order.
    pub updates: Vec<ClientUpdateResult>,
}

/// Resumable simulation state.
#[derive(Debug, Clone)]
pub struct Simulation {
    setup: ExperimentSetup,
    server: ModelParams,
    stores: Vec<PseudoLabelStore>,
    next_round: usize,
}

impl Simulation {
    /// Starts a run from a seeded He initialization.
    pub fn new(setup: ExperimentSetup) -> Result<Self> {
        setup.validate()?;
        let server = ModelParams::init_he(&setup.layer_sizes, setup.seed)?;
        let stores = alloc::vec![PseudoLabelStore::new(); setup.shards.len()];
        Ok(Self {
            setup,
            server,
            stores,
            next_round: 0,
        })
    }

    /// Resumes a run from saved state.
    pub fn restore(
        setup: ExperimentSetup,
        server: ModelParams,
        stores: Vec<PseudoLabelStore>,
        next_round: usize,
    ) -> Result<Self> {
        setup.validate()?;
        if !server.same_shape(&setup.layer_sizes) {
            return Err(Error::config("checkpoint model does not match the configured layers"));
        }
        if stores.len() != setup.shards.len() {
            return Err(Error::config("checkpoint has the wrong number of client stores"));
        }
        if next_round > setup.schedule.rounds {
            return Err(Error::config("checkpoint round beyond the configured rounds"));
        }
        Ok(Self {
            setup,
            server,
            stores,
            next_round,
        })
    }

    /// Current server model.
    pub fn server(&self) -> &ModelParams {
        &self.server
    }

    /// Per-client pseudo-label stores.
    pub fn stores(&self) -> &[PseudoLabelStore] {
        &self.stores
    }

    /// The setup this simulation runs.
    pub fn setup(&self) -> &ExperimentSetup {
        &self.setup
    }

    /// Index of the next round to run.
    pub fn next_round(&self) -> usize {
        self.next_round
    }

    /// True once every round has run.
    pub fn finished(&self) -> bool {
        self.next_round >= self.setup.schedule.rounds
    }

    /// Runs one round: sample, local updates, aggregation, metrics.
    pub fn step(&mut self, exec: &dyn Executor) -> Result<RoundReport> {
        let round = self.next_round;
        self.step_inner(exec).map_err(|e| e.at_round(round))
    }

    fn step_inner(&mut self, exec: &dyn Executor) -> Result<RoundReport> {
        let round = self.next_round;
        if self.finished() {
            return Err(Error::Protocol("all rounds already completed".into()));
        }
        let setup = &self.setup;
        let plan = plan_round(
            round,
            setup.shards.len(),
            setup.trainer.participation,
            setup.seed,
            setup.schedule.warmup_rounds,
        );
        let mut jobs = Vec::with_capacity(plan.participants.len());
        let mut wanted = plan.participants.iter().peekable();
        for (k, store) in self.stores.iter_mut().enumerate() {
            if wanted.peek() != Some(&&k) {
                continue;
            }
            wanted.next();
            let flr = match plan.phase {
                Phase::Warmup => None,
                Phase::Flr => Some(FlrContext {
                    store,
                    schedule: &setup.schedule,
                    record_targets: setup.record_targets,
                }),
            };
            jobs.push(ClientJob {
                round,
                seed: setup.seed,
                server: &self.server,
                shard: &setup.shards[k],
                trainer: &setup.trainer,
                flr,
            });
        }
        let updates = exec.execute(jobs).into_iter().collect::<Result<Vec<_>>>()?;
        let server = aggregate(&updates)?;

        let per_client: Vec<(Counts, f64, usize)> = updates
            .iter()
            .map(|u| (u.local_counts, setup.shards[u.client_id].noise_rate, u.n_k))
            .collect();
        let local = metrics::local_breakdown(&per_client, setup.local_weighting, round);
        let global = metrics::global_breakdown(
            &server,
            setup.shards.iter().flat_map(|s| s.examples.iter()),
            round,
        )?;
        let total: usize = updates.iter().map(|u| u.n_k).sum();
        let train_loss = updates
            .iter()
            .map(|u| u.epoch_losses.last().copied().unwrap_or(0.0) * u.n_k as f64)
            .sum::<f64>()
            / total as f64;
        let metrics = RoundMetrics {
            round,
            phase: plan.phase,
            global,
            local,
            test_accuracy: metrics::test_accuracy(&server, &setup.test)?,
            train_loss,
        };
        self.server = server;
        self.next_round += 1;
        Ok(RoundReport {
            plan,
            metrics,
            updates,
        })
    }
}

/// Runs every remaining round; `on_round` sees each report as it completes.
pub fn run_experiment(
    setup: ExperimentSetup,
    exec: &dyn Executor,
    mut on_round: impl FnMut(&Simulation, &RoundReport) -> Result<()>,
) -> Result<(ModelParams, Vec<RoundMetrics>)> {
    let mut sim = Simulation::new(setup)?;
    let mut stream = Vec::new();
    while !sim.finished() {
        let report = sim.step(exec)?;
        on_round(&sim, &report)?;
        stream.push(report.metrics);
    }
    Ok((sim.server, stream))
}
