use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use t20_core::bowling_opt::{greedy_initial_plan, propose_neighbor, sa_accept, Move};
use t20_core::engine::{
    exact_batting_value, is_feasible, rotate_strike, BattingScenario, Batsman, Bowler, BowlingScenario,
    InitialStriker,
};
use t20_core::outcome::Outcome;
use t20_core::profiles::{blend, blend_weight, derive_stats, fit_profile_from_summary, OutcomeVector, PhaseVectors};
use t20_core::rng::derive_seed;

fn vector() -> impl Strategy<Value = OutcomeVector> {
    prop::array::uniform7(0.01f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum();
        OutcomeVector::new(w.map(|x| x / s)).unwrap()
    })
}

fn phases() -> impl Strategy<Value = PhaseVectors> {
    vector().prop_map(PhaseVectors::uniform_across_phases)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blend_stays_on_simplex(a in vector(), b in vector(), n in 0u64..5000) {
        let lambda = blend_weight(n);
        prop_assert!((0.0..1.0).contains(&lambda));
        let v = blend(&a, &b, lambda);
        let s: f64 = v.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(v.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn fitted_summary_hits_its_targets(shape in vector(), p_w in 0.0f64..0.3, frac in 0.0f64..1.0) {
        // largest strike rate the shape can reach with the dots emptied
        let runs: f64 = [1.0, 2.0, 3.0, 4.0, 6.0].iter().zip(&shape.probs()[2..]).map(|(r, p)| r * p).sum();
        let mass: f64 = shape.probs()[2..].iter().sum();
        let sr = frac * 100.0 * (1.0 - p_w) * runs / mass;
        let v = fit_profile_from_summary(sr, p_w, &shape).unwrap();
        let stats = derive_stats(&v);
        prop_assert!((stats.sr - sr).abs() < 1e-9);
        prop_assert_eq!(stats.p_w, p_w);
        prop_assert_eq!(stats.er, 0.06 * stats.sr);
        let s: f64 = v.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strike_rotation_is_odd_runs_xor_over_end(runs in prop::sample::select(vec![0u32, 1, 2, 3, 4, 6]), ball in 0u32..6) {
        let o = Outcome::from_runs(runs).unwrap();
        let (s, _) = rotate_strike('a', 'b', o, ball);
        prop_assert_eq!(s == 'b', (runs % 2 == 1) != (ball == 5));
    }

    #[test]
    fn win_probability_falls_as_target_rises(a in phases(), b in phases(), n in phases(), balls in 3u32..10, runs in 1i32..15) {
        let sc = |r| BattingScenario {
            runs_required: r,
            balls,
            wickets: 2,
            pool: vec![Batsman { id: "a".into(), profile: a }, Batsman { id: "b".into(), profile: b }],
            non_striker: Batsman { id: "n".into(), profile: n },
            initial_striker: InitialStriker::NewBatsman,
            tail: None,
        };
        let lo = exact_batting_value(&sc(runs), &[0, 1]).unwrap();
        let hi = exact_batting_value(&sc(runs + 1), &[0, 1]).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn neighbours_stay_feasible(seed in any::<u64>(), balls in 30u32..=60, quotas in prop::array::uniform5(1u32..=4)) {
        let mut sc = BowlingScenario {
            runs_to_defend: 60,
            balls,
            wickets_to_take: 6,
            slots: vec![],
            bowlers: quotas
                .iter()
                .enumerate()
                .map(|(j, &q)| Bowler { id: format!("b{j}"), quota: q, profile: PhaseVectors::uniform_across_phases(OutcomeVector::uniform()) })
                .collect(),
            prev_bowler: Some(0),
            batting_proxy: None,
        };
        sc.slots = sc.required_slots();
        let Ok(mut plan) = greedy_initial_plan(&sc) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut streak = 0;
        for _ in 0..200 {
            let mv = propose_neighbor(&sc, &mut plan, streak, &mut rng);
            streak = if matches!(mv, Move::Empty { .. }) { streak + 1 } else { 0 };
            prop_assert!(is_feasible(&plan, &sc), "{:?} after {:?}", plan, mv);
        }
    }

    #[test]
    fn improvements_always_accepted(delta in 0.0f64..1.0, t in 1e-6f64..1.0, u in 0.0f64..1.0) {
        prop_assert!(sa_accept(delta, t, u));
    }

    #[test]
    fn seed_paths_are_deterministic_and_distinct(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(seed, &[a]), derive_seed(seed, &[a]));
        if a != b {
            prop_assert_ne!(derive_seed(seed, &[a]), derive_seed(seed, &[b]));
        }
    }
}
