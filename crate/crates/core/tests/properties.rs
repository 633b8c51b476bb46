//! Property tests for the spec-level invariants that hold over whole input
//! domains rather than at hand-picked points.

use proptest::prelude::*;

use lucid::logic::{sigmoid_scalar, sim, LogicVector};
use lucid::planner::{act, lambda_return_direct, lambda_returns, PolicyParams};
use lucid::replay::{Episode, ReplayBuffer};
use lucid::rng::stream;
use lucid::rssm::ModelState;
use ndarray::Array1;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5.0..5.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Replay persist/load is an exact identity and the sampled windows
    // agree element-wise.
    #[test]
    fn replay_roundtrip_identity(
        steps in 3usize..40,
        obs_dim in 1usize..5,
        act_dim in 1usize..3,
        seed in 0u64..1000,
    ) {
        let mut rng = stream(seed, "prop-replay", 0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rand::Rng::random_range(rng, -3.0..3.0)).collect()
        };
        let obs: Vec<Vec<f64>> = (0..=steps).map(|_| draw(&mut rng, obs_dim)).collect();
        let actions: Vec<Vec<f64>> = (0..steps).map(|_| draw(&mut rng, act_dim)).collect();
        let rewards: Vec<f64> = (0..steps).map(|_| rand::Rng::random_range(&mut rng, 0.0..6.0)).collect();
        let mut buf = ReplayBuffer::new(10_000, obs_dim, act_dim);
        buf.add_episode(Episode::from_steps(obs, actions, rewards).unwrap()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.bin");
        buf.persist(&path).unwrap();
        let loaded = ReplayBuffer::load(&path).unwrap();
        prop_assert_eq!(loaded.stored_steps(), buf.stored_steps());

        let len = (steps + 1).min(6);
        let a = buf.sample_sequences(3, len, &mut stream(seed, "s", 1)).unwrap();
        let b = loaded.sample_sequences(3, len, &mut stream(seed, "s", 1)).unwrap();
        for t in 0..len {
            prop_assert_eq!(&a.observations[t], &b.observations[t]);
            prop_assert_eq!(&a.actions[t], &b.actions[t]);
            prop_assert_eq!(&a.rewards[t], &b.rewards[t]);
        }
    }

    // Similarity stays strictly inside its sigmoid bounds for any pair of
    // nonzero vectors.
    #[test]
    fn sim_respects_sigmoid_bounds(
        v in finite_vec(8),
        m in finite_vec(8),
        kappa in 0.5..20.0f64,
    ) {
        let lv = LogicVector(Array1::from_vec(v));
        let lm = LogicVector(Array1::from_vec(m));
        prop_assume!(lv.0.dot(&lv.0) > 1e-12 && lm.0.dot(&lm.0) > 1e-12);
        let s = sim(&lv, &lm, kappa).unwrap();
        prop_assert!(s >= sigmoid_scalar(-kappa) - 1e-12);
        prop_assert!(s <= sigmoid_scalar(kappa) + 1e-12);
    }

    // The backward lambda-return recursion equals the direct mixture for
    // arbitrary horizons, rewards, values and coefficients.
    #[test]
    fn lambda_recursion_equals_direct(
        h in 1usize..12,
        seed in 0u64..10_000,
        gamma in 0.0..1.0f64,
        lambda in 0.0..1.0f64,
    ) {
        let mut rng = stream(seed, "prop-lambda", 0);
        let rewards: Vec<f64> = (0..h).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let values: Vec<f64> = (0..=h).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let rec = lambda_returns(&rewards, &values, gamma, lambda).unwrap();
        for k in 0..h {
            let direct = lambda_return_direct(&rewards, &values, gamma, lambda, k);
            prop_assert!((rec[k] - direct).abs() <= 1e-10);
        }
    }

    // Emitted actions always live in the action box, exploring or not.
    #[test]
    fn actions_stay_in_the_unit_box(
        seed in 0u64..500,
        explore in proptest::bool::ANY,
        h_scale in 0.1..4.0f64,
    ) {
        let policy = PolicyParams::new(&mut stream(seed, "prop-policy", 0), 6, 8, 2);
        let state = ModelState {
            h: Array1::from_vec((0..4).map(|i| h_scale * (i as f64 - 1.5)).collect()),
            z: Array1::from_vec(vec![h_scale, -h_scale]),
        };
        let a = act(&policy, &state, explore, 0.3, &mut stream(seed, "prop-act", 1)).unwrap();
        for &x in a.iter() {
            prop_assert!((-1.0..=1.0).contains(&x));
        }
    }
}
