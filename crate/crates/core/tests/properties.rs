use autobid_core::benchmark::{brute_force_optimal, hindsight_optimal};
use autobid_core::dist::{optimistic_cdf, StepDistribution};
use autobid_core::harness::{run_with_bidder, Environment, Scoring};
use autobid_core::learners::{BanditLearner, BanditParams, Bidder, Feedback, ModelPacer};
use autobid_core::ValueDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_step(rng: &mut ChaCha8Rng, max_atoms: usize) -> StepDistribution {
    let n = rng.gen_range(1..=max_atoms);
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen::<f64>(), rng.gen_range(0.05..1.0)))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let atoms: Vec<_> = atoms.into_iter().map(|(b, w)| (b, w / total)).collect();
    StepDistribution::from_atoms(&atoms).unwrap()
}

type OracleCase<'a> = (&'a [(f64, f64)], &'a [f64], f64);

#[test]
fn frozen_oracle_values() {
    // Values produced once by the brute-force oracle (grid 201) and pinned.
    let cases: [OracleCase; 5] = [
        (&[(0.0, 0.5), (1.0, 0.5)], &[0.5], 0.3325),
        (&[(0.0, 0.5), (1.0, 0.5)], &[0.5, 0.9], 1.2),
        (
            &[(0.2, 0.3), (0.5, 0.4), (0.9, 0.3)],
            &[0.3, 0.6, 0.8],
            1.31,
        ),
        (
            &[(0.1, 0.25), (0.4, 0.25), (0.7, 0.5)],
            &[0.2, 0.45],
            0.3155,
        ),
        (&[(0.3, 1.0)], &[0.1, 0.2, 0.25], 0.0),
    ];
    for (atoms, values, brute) in cases {
        let f = StepDistribution::from_atoms(atoms).unwrap();
        let oracle = brute_force_optimal(&f, values, 201).unwrap();
        assert!((oracle - brute).abs() < 1e-12, "{atoms:?}: {oracle}");
        let exact = hindsight_optimal(&f, values).unwrap().opt_reward;
        assert!(exact >= oracle - 1e-12 && exact - oracle <= 2.0 / 201.0);
    }
    // The continuous optimum hits the hand-derived values exactly.
    let f = StepDistribution::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!((hindsight_optimal(&f, &[0.5, 0.9]).unwrap().opt_reward - 1.2).abs() < 1e-12);
}

#[test]
fn opt_is_monotone_in_the_competing_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let f = random_step(&mut rng, 6);
        // Adding mass at lower bids only makes winning cheaper.
        let dagger = optimistic_cdf(&f, rng.gen_range(0.0..0.3)).unwrap();
        for &b in f.support().iter().chain(dagger.support()) {
            assert!(dagger.eval(b) >= f.eval(b));
        }
        let t = rng.gen_range(1..40);
        let values: Vec<f64> = (0..t).map(|_| rng.gen()).collect();
        let under_f = hindsight_optimal(&f, &values).unwrap().opt_reward;
        let under_dagger = hindsight_optimal(&dagger, &values).unwrap().opt_reward;
        assert!(under_dagger >= under_f - 1e-9, "{under_dagger} < {under_f}");
    }
}

/// Pacer fed a law dominating the truth by exactly `2ε`, scored under the truth.
#[test]
fn perturbed_model_costs_at_most_linear_in_the_gap() {
    // Regret constant for the sqrt(T) term, pinned from known-law runs where
    // regret / sqrt(T) stays below 0.5 on these environments.
    const C: f64 = 2.0;
    let truths = [
        StepDistribution::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        StepDistribution::from_atoms(&[(0.2, 0.3), (0.5, 0.4), (0.9, 0.3)]).unwrap(),
        StepDistribution::uniform_grid(51).unwrap(),
    ];
    for f in truths {
        for eps in [0.01, 0.05, 0.1] {
            let dagger = optimistic_cdf(&f, 2.0 * eps).unwrap();
            assert!((dagger.sup_distance(&f) - 2.0 * eps).abs() < 1e-12);
            for t in [1024usize, 4096] {
                let env = Environment {
                    competing: f.clone(),
                    values: ValueDistribution::uniform(0.0, 1.0).unwrap(),
                };
                let seeds = 1..=5u64;
                let n = seeds.clone().count() as f64;
                let (mut regret, mut violation) = (0.0, 0.0);
                for seed in seeds {
                    let mut pacer = ModelPacer::new(dagger.clone(), t).unwrap();
                    let r = run_with_bidder(&env, &mut pacer, t, seed, Scoring::Expected).unwrap();
                    regret += r.metrics.regret / n;
                    violation += r.metrics.roi_violation / n;
                }
                let tf = t as f64;
                let gap = 2.0 * eps * tf;
                assert!(
                    regret <= C * tf.sqrt() + gap,
                    "eps={eps} T={t} regret={regret}"
                );
                assert!(
                    violation <= 2.0 * tf.sqrt() * tf.ln() + gap,
                    "eps={eps} T={t} violation={violation}"
                );
            }
        }
    }
}

fn drive_bandit(
    f: &StepDistribution,
    horizon: usize,
    seed: u64,
    mut inspect: impl FnMut(&BanditLearner, f64, &autobid_core::learners::BidPlan),
) -> BanditLearner {
    let mut learner = BanditLearner::new(horizon, BanditParams::for_horizon(horizon, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..horizon {
        let v: f64 = rng.gen();
        let plan = learner.bid(v).unwrap();
        inspect(&learner, v, &plan);
        let bid = plan.lottery.realize(rng.gen());
        let won = bid >= f.sample(&mut rng);
        learner.observe(Feedback::Bandit { won }).unwrap();
    }
    learner
}

#[test]
fn conservative_reward_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..10 {
        let f = random_step(&mut rng, 5);
        let mut checked = 0;
        drive_bandit(&f, 2048, round, |learner, v, plan| {
            let Some(decision) = plan.pacer else { return };
            let bar = learner.optimistic().unwrap();
            let conservative = learner.conservative().unwrap();
            let shifted = v * plan.lottery.win_probability(bar);
            let unshifted = v * decision.lottery.win_probability(conservative);
            assert!(
                (shifted - unshifted).abs() <= 1e-9,
                "{shifted} vs {unshifted}"
            );
            checked += 1;
        });
        assert!(checked > 0);
    }
}

#[test]
fn bandit_learner_only_sees_the_win_bit() {
    // Two environments with different competing bids but the same win pattern.
    let horizon = 1024;
    let params = BanditParams::for_horizon(horizon, 1.0);
    let mut a = BanditLearner::new(horizon, params).unwrap();
    let mut b = BanditLearner::new(horizon, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..horizon {
        let v: f64 = rng.gen();
        let (pa, pb) = (a.bid(v).unwrap(), b.bid(v).unwrap());
        assert_eq!(pa, pb);
        let bid = pa.lottery.realize(rng.gen());
        let d_a: f64 = rng.gen();
        let won = bid >= d_a;
        // Any other competing bid on the same side of `bid` gives the same bit.
        let d_b = if won {
            bid * rng.gen::<f64>()
        } else {
            bid + (1.0 - bid) * rng.gen::<f64>().max(1e-9)
        };
        assert_eq!(won, bid >= d_b);
        a.observe(Feedback::Bandit { won }).unwrap();
        b.observe(Feedback::Bandit { won: bid >= d_b }).unwrap();
        assert_eq!(a.blocks(), b.blocks());
    }
    assert_eq!(a.conservative(), b.conservative());
}

#[test]
fn exploration_spends_exactly_k_times_m_rounds() {
    let f = StepDistribution::uniform_grid(21).unwrap();
    let params = BanditParams::for_horizon(4096, 1.0);
    let mut explore = 0;
    let learner = drive_bandit(&f, 4096, 3, |l, _, plan| {
        if plan.pacer.is_none() {
            explore += 1;
            assert!(l.is_exploring());
        }
    });
    assert_eq!(explore, params.exploration_rounds());
    assert_eq!(learner.blocks().win_counts().len(), params.k,);
}
