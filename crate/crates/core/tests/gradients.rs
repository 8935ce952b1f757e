use flr_core::gradcheck::fd_check;
use flr_core::loss::{
    ce_loss_and_grad, flr_g_term, flr_g_term_projected, flr_loss_and_grad, softmax, Sample,
};
use flr_core::{ModelParams, OneHotLabel, ProbVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    params: ModelParams,
    xs: Vec<Vec<f64>>,
    labels: Vec<OneHotLabel>,
    targets: Vec<ProbVector>,
}

impl Instance {
    fn random(sizes: &[usize], batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init_he(sizes, seed).unwrap();
        let d = sizes[0];
        let c = *sizes.last().unwrap();
        let xs = (0..batch)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels = (0..batch)
            .map(|_| OneHotLabel::new(rng.random_range(0..c), c).unwrap())
            .collect();
        let targets = (0..batch).map(|_| random_prob(&mut rng, c)).collect();
        Self {
            params,
            xs,
            labels,
            targets,
        }
    }

    fn batch(&self) -> Vec<Sample<'_>> {
        (0..self.xs.len())
            .map(|i| Sample {
                x: &self.xs[i],
                label: self.labels[i],
                target: Some(&self.targets[i]),
            })
            .collect()
    }
}

fn random_prob(rng: &mut impl Rng, c: usize) -> ProbVector {
    let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
    softmax(&logits).unwrap()
}

#[test]
fn fd_matches_on_small_nets() {
    for (seed, lambda) in [(1, 0.0), (2, 1.0), (3, 3.0), (4, 3.0)] {
        let inst = Instance::random(&[2, 4, 3], 5, seed);
        let err = fd_check(&inst.params, &inst.batch(), lambda, 1e-5).unwrap();
        assert!(err <= 1e-5, "lambda {lambda}: relative error {err}");
    }
}

#[test]
fn fd_single_example() {
    for seed in 0..10 {
        let inst = Instance::random(&[3, 5, 4], 1, 100 + seed);
        let err = fd_check(&inst.params, &inst.batch(), 2.0, 1e-5).unwrap();
        assert!(err <= 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn fd_error_shrinks_with_step() {
    // Central differences are second order, so a 100x smaller step should
    // cut the truncation error well below the coarse one.
    let mut coarse_worse = 0;
    for seed in 0..5 {
        let inst = Instance::random(&[2, 4, 3], 5, 200 + seed);
        let coarse = fd_check(&inst.params, &inst.batch(), 3.0, 1e-3).unwrap();
        let fine = fd_check(&inst.params, &inst.batch(), 3.0, 1e-5).unwrap();
        if fine < coarse {
            coarse_worse += 1;
        }
    }
    assert_eq!(coarse_worse, 5);
}

#[test]
fn zero_lambda_is_bitwise_cross_entropy() {
    let inst = Instance::random(&[4, 6, 3], 7, 9);
    let flr = flr_loss_and_grad(&inst.params, &inst.batch(), 0.0).unwrap();
    let plain: Vec<Sample<'_>> = inst
        .batch()
        .into_iter()
        .map(|s| Sample { target: None, ..s })
        .collect();
    let ce = ce_loss_and_grad(&inst.params, &plain).unwrap();
    assert_eq!(flr.loss.to_bits(), ce.loss.to_bits());
    let a: Vec<u64> = flr.grad.values().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = ce.grad.values().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn target_on_given_label_adds_to_ce_direction() {
    // With t = y the g term points along p - y: (p - y) . g > 0, so the
    // combined error has a larger projection on p - y than CE alone.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let c = rng.random_range(2..8);
        let p = random_prob(&mut rng, c);
        let y = rng.random_range(0..c);
        let t = ProbVector::one_hot(y, c);
        let g = flr_g_term(&p, &t);
        let lambda = rng.random_range(0.1..5.0);
        let e: Vec<f64> = (0..c)
            .map(|k| p.as_slice()[k] - if k == y { 1.0 } else { 0.0 })
            .collect();
        let norm2: f64 = e.iter().map(|v| v * v).sum();
        let with_reg: f64 = e.iter().zip(&g).map(|(a, b)| a * (a + lambda * b)).sum();
        assert!(with_reg > norm2, "{with_reg} vs {norm2}");
    }
}

// The two g forms differ by t[c] p[c] (1 - sum p) / (1 - <p,t>), so the
// absolute comparison needs 1 - <p,t> away from rounding level; logits in
// [-5, 5] keep it above 1e-4.
fn prob_strategy() -> impl Strategy<Value = (ProbVector, ProbVector)> {
    (2usize..12).prop_flat_map(|c| {
        (
            prop::collection::vec(-5.0f64..5.0, c),
            prop::collection::vec(-5.0f64..5.0, c),
        )
            .prop_map(|(a, b)| (softmax(&a).unwrap(), softmax(&b).unwrap()))
    })
}

proptest! {
    #[test]
    fn g_sums_to_zero((p, t) in prob_strategy()) {
        let s: f64 = flr_g_term(&p, &t).iter().sum();
        prop_assert!(s.abs() <= 1e-9, "sum {}", s);
    }

    #[test]
    fn g_matches_projected_form((p, t) in prob_strategy()) {
        let a = flr_g_term(&p, &t);
        let b = flr_g_term_projected(&p, &t);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn softmax_survives_large_logits(logits in prop::collection::vec(-1e3f64..1e3, 2..10)) {
        let p = softmax(&logits).unwrap();
        prop_assert!(ProbVector::new(p.into_vec()).is_ok());
    }
}
