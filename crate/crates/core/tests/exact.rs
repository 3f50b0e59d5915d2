mod common;

use cirl_core::exact::{
    adapted_value_iteration, backup_alpha, backup_stage, human_q_values, prune, reduced_pomdp_vi, BackupKind,
    ExactConfig, PRUNE_TOL,
};
use cirl_core::game::GameDescription;
use cirl_core::{Belief, CirlGame, HumanModel, JointState};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One decision: from x0 the human moves to x1 (a_H = 0) or x2 (a_H = 1);
/// `split` instead sends both actions to x1/x2 with probability ½ each.
fn fork(model: HumanModel, split: bool) -> CirlGame {
    let desc = GameDescription {
        name: "fork".into(),
        world_labels: vec!["x0".into(), "x1".into(), "x2".into()],
        theta_labels: vec!["t".into()],
        human_actions: vec!["left".into(), "right".into()],
        robot_actions: vec!["stay".into()],
        human_wait: None,
        discount: 0.95,
        horizon: 1,
        initial: vec![1.0, 0.0, 0.0],
        human_model: model,
    };
    CirlGame::build(
        desc,
        move |x, _, h, _| {
            if x != 0 {
                vec![(x, 1.0)]
            } else if split {
                vec![(1, 0.5), (2, 0.5)]
            } else {
                vec![(1 + h, 1.0)]
            }
        },
        |_, _| 0.0,
    )
    .unwrap()
}

#[test]
fn human_q_is_the_successor_alpha() {
    let g = fork(HumanModel::Rational, false);
    let child = [0.0, 2.0, 1.0];
    let q = human_q_values(&g, JointState::new(0, 0), 0, &[&child, &child]).unwrap();
    assert_eq!(q, vec![2.0, 1.0]);
    let g = fork(HumanModel::Rational, true);
    let child = [0.0, 0.0, 1.0];
    let q = human_q_values(&g, JointState::new(0, 0), 0, &[&child, &child]).unwrap();
    assert_eq!(q, vec![0.5, 0.5]);
    assert!(human_q_values(&g, JointState::new(0, 0), 0, &[&child]).is_err());
}

#[test]
fn rational_backup_takes_the_max() {
    let g = fork(HumanModel::Rational, false);
    let child = [0.0, 2.0, 1.0];
    let alpha = backup_alpha(&g, 0, &[&child, &child]).unwrap();
    assert!(close(alpha[0], 1.9, 1e-12));
}

#[test]
fn terminal_backup_is_the_reward() {
    let g = sandwich_soup();
    let zero = vec![0.0; g.n_states()];
    let children: Vec<&[f64]> = vec![&zero; g.n_human_actions()];
    for r in 0..g.n_robot_actions() {
        assert_eq!(backup_alpha(&g, r, &children).unwrap(), g.rewards());
    }
}

#[test]
fn sharp_boltzmann_matches_rational() {
    let g = fork(HumanModel::boltzmann(1e4), false);
    let child = [0.0, 2.0, 1.0];
    let alpha = backup_alpha(&g, 0, &[&child, &child]).unwrap();
    assert!(close(alpha[0], 1.9, 1e-6));
    for (r, i) in [(2, 2), (3, 2), (2, 3)] {
        let rational = adapted_value_iteration(&chef(r, i, HumanModel::Rational), &ExactConfig::default()).unwrap();
        let sharp = adapted_value_iteration(&chef(r, i, HumanModel::boltzmann(1e4)), &ExactConfig::default()).unwrap();
        assert!(close(rational.value, sharp.value, 1e-6), "{r}x{i}");
    }
}

#[test]
fn golden_value_and_worked_example_rule() {
    let g = sandwich_soup();
    let sol = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    assert!(close(sol.value, 0.9025, 1e-12));
    let root = sol.policy.root_cursor();
    assert_eq!(g.robot_action_label(sol.policy.robot_action(&g, root)), "meat");
    let rule = sol.policy.human_rule(&g, root, 0);
    assert_eq!(g.human_action_label(rule.action(0)), "wait");
    assert_eq!(g.human_action_label(rule.action(1)), "tomatoes");
    // soup's Q under the plan peaks at tomatoes, sandwich's at wait
    let q_soup = sol.policy.human_q_values(&g, root, g.n_world());
    let q_sandwich = sol.policy.human_q_values(&g, root, 0);
    assert!(q_soup[2] > q_soup.iter().take(2).chain(q_soup.iter().skip(3)).cloned().fold(f64::MIN, f64::max));
    assert!(q_sandwich[3] > q_sandwich[..3].iter().cloned().fold(f64::MIN, f64::max));
}

#[test]
fn matches_brute_force_on_every_small_game() {
    for recipes in two_ingredient_subsets() {
        let g = two_ingredient_game(&recipes, HumanModel::Rational);
        let adapted = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
        let oracle = brute_force_team_value(&g);
        assert!(close(adapted.value, oracle, 1e-12), "{recipes:?}: {} vs {oracle}", adapted.value);
    }
    let g = sandwich_soup();
    assert!(close(brute_force_team_value(&g), 0.9025, 1e-12));
}

#[test]
fn adapted_equals_reduced() {
    for recipes in two_ingredient_subsets().into_iter().step_by(5) {
        let g = two_ingredient_game(&recipes, HumanModel::Rational);
        let a = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
        let r = reduced_pomdp_vi(&g, &ExactConfig::default()).unwrap();
        assert!((a.value - r.value).abs() <= 1e-9, "{recipes:?}");
        r.policy.validate(&g).unwrap();
        a.policy.validate(&g).unwrap();
    }
}

#[test]
fn single_theta_reduced_has_product_action_space() {
    let g = two_ingredient_game(&[[1, 1]], HumanModel::Rational);
    let a = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    let r = reduced_pomdp_vi(&g, &ExactConfig::default()).unwrap();
    assert!(close(a.value, r.value, 1e-12));
    for s in &r.stats {
        assert_eq!(s.actions, (g.n_human_actions() * g.n_robot_actions()) as u128);
    }
}

#[test]
fn candidate_ratio_per_backup() {
    for recipes in two_ingredient_subsets().into_iter().take(6) {
        let g = two_ingredient_game(&recipes, HumanModel::Rational);
        let sol = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
        let reach = cirl_core::exact::reachable_states(&g);
        let factor = (g.n_human_actions() as u128).pow(g.n_theta() as u32);
        for t in 0..g.horizon() {
            let children: Vec<&[f64]> = sol.policy.stages[t + 1].iter().map(|n| n.alpha.as_slice()).collect();
            let cfg = ExactConfig::default();
            let a = backup_stage(&g, BackupKind::Modified, t, &reach[t], &children, &cfg).unwrap();
            let r = backup_stage(&g, BackupKind::Reduced, t, &reach[t], &children, &cfg).unwrap();
            assert_eq!(r.stats.candidates, a.stats.candidates * factor);
        }
    }
}

#[test]
fn reduced_requires_a_rational_human() {
    let g = chef(2, 2, HumanModel::boltzmann(2.0));
    assert!(reduced_pomdp_vi(&g, &ExactConfig::default()).unwrap_err().is_validation());
}

#[test]
fn candidate_cap_is_a_resource_error() {
    let g = chef(4, 2, HumanModel::Rational);
    let err = reduced_pomdp_vi(&g, &ExactConfig::default()).unwrap_err();
    assert!(err.is_resource(), "{err}");
    let tiny = ExactConfig { candidate_cap: Some(10), ..ExactConfig::default() };
    assert!(adapted_value_iteration(&sandwich_soup(), &tiny).unwrap_err().is_resource());
}

#[test]
fn reachable_restriction_does_not_change_the_value() {
    for (r, i) in [(2, 2), (3, 2), (2, 3)] {
        let g = chef(r, i, HumanModel::Rational);
        let restricted = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
        let full = adapted_value_iteration(&g, &ExactConfig { restrict_to_reachable: false, ..ExactConfig::default() }).unwrap();
        assert!(close(restricted.value, full.value, 1e-12));
    }
}

#[test]
fn values_grow_with_the_horizon() {
    for recipes in [vec![[1u32, 2], [2, 1]], vec![[1, 1], [2, 2], [0, 2]]] {
        let mut last = f64::NEG_INFINITY;
        for horizon in 2..=3 {
            let named: Vec<(String, [u32; 2])> = recipes.iter().map(|r| (format!("r{}{}", r[0], r[1]), *r)).collect();
            let refs: Vec<(&str, &[u32])> = named.iter().map(|(n, r)| (n.as_str(), &r[..])).collect();
            let g = chef_spec(&["a", "b"], &refs, horizon, 1.0);
            let v = adapted_value_iteration(&g, &ExactConfig::default()).unwrap().value;
            assert!(v >= last - 1e-12);
            last = v;
        }
    }
}

#[test]
fn noisy_humans_never_raise_the_optimum() {
    for (r, i) in [(2, 2), (3, 2), (2, 3), (4, 2)] {
        let rational = adapted_value_iteration(&chef(r, i, HumanModel::Rational), &ExactConfig::default()).unwrap().value;
        for beta in [0.5, 1.0, 5.0, 20.0] {
            let v = adapted_value_iteration(&chef(r, i, HumanModel::boltzmann(beta)), &ExactConfig::default()).unwrap().value;
            assert!(v <= rational + 1e-9, "{r}x{i} β={beta}: {v} > {rational}");
        }
    }
}

#[test]
fn prune_examples() {
    assert_eq!(prune(&[vec![1.0, 2.0], vec![1.0, 2.0]]), vec![0]);
    assert_eq!(prune(&[vec![1.0, 1.0], vec![0.0, 0.0]]), vec![0]);
    assert_eq!(prune(&[vec![1.0, 0.0], vec![0.0, 1.0]]), vec![0, 1]);
    assert_eq!(prune(&[]), Vec::<usize>::new());
}

#[test]
fn solving_is_deterministic() {
    let g = chef(3, 2, HumanModel::Rational);
    let a = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    let b = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    assert_eq!(a.policy, b.policy);
}

fn random_belief(n: usize, rng: &mut ChaCha8Rng) -> Belief {
    let p: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = p.iter().sum();
    Belief::new(p.into_iter().map(|v| v / total).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pruning_keeps_the_upper_surface(seed in any::<u64>(), n in 1usize..40, dim in 1usize..6, grid in prop::bool::ANY) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| if grid { rng.gen_range(0..3) as f64 } else { rng.gen::<f64>() }).collect())
            .collect();
        let kept = prune(&vectors);
        prop_assert!(!kept.is_empty());
        for _ in 0..1000 {
            let b = random_belief(dim, &mut rng);
            let value = |v: &Vec<f64>| v.iter().zip(b.as_slice()).map(|(a, p)| a * p).sum::<f64>();
            let before = vectors.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
            let after = kept.iter().map(|&i| value(&vectors[i])).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((before - after).abs() <= 1e-12 + PRUNE_TOL);
        }
        // no kept vector is weakly dominated by another kept vector
        for &i in &kept {
            for &j in &kept {
                if i != j {
                    prop_assert!(!vectors[j].iter().zip(&vectors[i]).all(|(a, b)| a >= b));
                }
            }
        }
    }
}
