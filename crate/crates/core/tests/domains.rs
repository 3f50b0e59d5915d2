mod common;

use cirl_core::domains::{
    build_chefworld, build_rocksample, chefworld_preset, load_game_spec, preset, read_game_spec, resolve_game_spec,
    rocksample_preset, save_game_spec, unpruned_state_count, write_game_spec, ChefWorldLayout, ChefWorldSpec, GameSpec,
    RockSampleSpec, GAME_SCHEMA_VERSION,
};
use cirl_core::exact::{adapted_value_iteration, ExactConfig};
use cirl_core::{CirlError, HumanModel, WorldState};
use common::*;
use proptest::prelude::*;

#[test]
fn sandwich_soup_value() {
    let sol = adapted_value_iteration(&sandwich_soup(), &ExactConfig::default()).unwrap();
    assert!(close(sol.value, 0.9025, 1e-12));
}

#[test]
fn single_recipe_needs_no_inference() {
    // (1,1) is met after one joint step, (2,2) after two
    let g = chef_spec(&["a", "b"], &[("one", &[1, 1])], 2, 0.9);
    assert!(close(adapted_value_iteration(&g, &ExactConfig::default()).unwrap().value, 0.9, 1e-12));
    let g = chef_spec(&["a", "b"], &[("two", &[2, 2])], 2, 0.9);
    assert!(close(adapted_value_iteration(&g, &ExactConfig::default()).unwrap().value, 0.81, 1e-12));
}

#[test]
fn separating_first_move_two_recipe_game() {
    let g = chef_spec(&["a", "b"], &[("a", &[1, 0]), ("b", &[0, 1])], 1, 1.0);
    assert!(close(adapted_value_iteration(&g, &ExactConfig::default()).unwrap().value, 1.0, 1e-12));
    assert!(close(brute_force_team_value(&g), 1.0, 1e-12));
}

#[test]
fn chefworld_state_counts() {
    for (r, i) in [(2, 2), (3, 2), (2, 3), (4, 3), (2, 5)] {
        let spec = chefworld_preset(r, i).unwrap();
        let g = build_chefworld(&spec, 2, 0.95, HumanModel::Rational).unwrap();
        let layout = ChefWorldLayout::new(&spec, 2);
        let expect: usize = layout.caps().iter().map(|&c| c as usize + 1).product::<usize>() + 1;
        assert_eq!(g.n_world(), expect);
        assert!((g.n_states() as u128) <= unpruned_state_count(i, 2, r));
        assert_eq!(g.n_human_actions(), i + 1);
        assert_eq!(g.n_robot_actions(), i + 1);
        assert_eq!(g.human_wait(), Some(i));
    }
    assert_eq!(unpruned_state_count(3, 2, 2), 5u128.pow(3) * 2 + 2);
}

#[test]
fn chefworld_reward_only_on_recipe_entry() {
    let g = sandwich_soup();
    let layout = ChefWorldLayout::new(&chefworld_preset(2, 3).unwrap(), 2);
    let sandwich = layout.encode(&[1, 2, 0]).unwrap().0;
    let soup = layout.encode(&[1, 1, 2]).unwrap().0;
    let n_w = g.n_world();
    assert_eq!(g.reward(sandwich), 1.0);
    assert_eq!(g.reward(n_w + sandwich), 0.0);
    assert_eq!(g.reward(n_w + soup), 1.0);
    assert_eq!(g.reward(layout.success().0), 0.0);
    let total: f64 = g.rewards().iter().sum();
    assert_eq!(total, 2.0);
    // b0 uniform over Θ at the origin
    let b0 = g.initial_belief().theta_marginal(&g);
    assert_eq!(b0, vec![0.5, 0.5]);
}

#[test]
fn chefworld_validation_errors() {
    let unreachable = ChefWorldSpec::new(&["a", "b"], &[("big", &[3, 2])]);
    assert!(matches!(build_chefworld(&unreachable, 2, 0.95, HumanModel::Rational), Err(CirlError::Validation(_))));
    let dup = ChefWorldSpec::new(&["a", "b"], &[("x", &[1, 0]), ("y", &[1, 0])]);
    assert!(build_chefworld(&dup, 2, 0.95, HumanModel::Rational).is_err());
    let ragged = ChefWorldSpec::new(&["a", "b"], &[("x", &[1, 0, 0])]);
    assert!(build_chefworld(&ragged, 2, 0.95, HumanModel::Rational).is_err());
    let empty = ChefWorldSpec::new(&["a"], &[]);
    assert!(build_chefworld(&empty, 2, 0.95, HumanModel::Rational).is_err());
}

#[test]
fn rocksample_action_counts() {
    let g = build_rocksample(&rocksample_preset(1, 1), 2, 0.95, HumanModel::Rational).unwrap();
    assert_eq!(g.n_human_actions(), 4);
    assert_eq!(g.n_robot_actions(), 5);
    assert_eq!(g.n_theta(), 6);
    let g = build_rocksample(&rocksample_preset(1, 2), 2, 0.95, HumanModel::Rational).unwrap();
    assert_eq!(g.n_robot_actions(), 13);
    assert_eq!(g.horizon(), 4);
}

#[test]
fn rocksample_single_theta_matches_full_observability() {
    let mut spec = rocksample_preset(1, 1);
    spec.thetas.truncate(1);
    let g = build_rocksample(&spec, 2, 0.95, HumanModel::Rational).unwrap();
    let v = adapted_value_iteration(&g, &ExactConfig::default()).unwrap().value;
    // fully observable team optimum by backward induction over joint actions
    let mut value: Vec<f64> = g.rewards().to_vec();
    for _ in 0..g.horizon() {
        value = (0..g.n_states())
            .map(|s| {
                let best = (0..g.n_human_actions())
                    .flat_map(|h| (0..g.n_robot_actions()).map(move |r| (h, r)))
                    .map(|(h, r)| g.expect(s, h, r, &value))
                    .fold(f64::NEG_INFINITY, f64::max);
                g.reward(s) + g.discount() * best
            })
            .collect();
    }
    let start = g.initial_belief().support().next().unwrap().0;
    assert!(close(v, value[start], 1e-12), "{v} vs {}", value[start]);
    assert!(v > 0.0);
}

#[test]
fn rocksample_validation() {
    let base = rocksample_preset(1, 1);
    let mut off = base.clone();
    off.rocks[0].x = 9;
    assert!(off.validate().is_err());
    let mut same = base.clone();
    same.rocks[1].x = same.rocks[0].x;
    same.rocks[1].y = same.rocks[0].y;
    assert!(same.validate().is_err());
    let mut zero = base.clone();
    zero.robot_steps = 0;
    assert!(zero.validate().is_err());
    let mut kind = base;
    kind.rocks[0].kind = 7;
    assert!(kind.validate().is_err());
}

#[test]
fn rocksample_walk_is_truncated_at_the_edge() {
    let spec = rocksample_preset(1, 1);
    let g = build_rocksample(&spec, 2, 0.95, HumanModel::Rational).unwrap();
    let west = g.robot_action_labels().iter().position(|l| l == "W").unwrap();
    let start = g.initial_belief().support().next().unwrap().0;
    let next = g.transition_dist(g.joint_state(start), 0, west).unwrap();
    let layout = cirl_core::domains::RockSampleLayout::new(&spec);
    assert_eq!(layout.decode(next[0].0).1, (0, 0));
}

#[test]
fn spec_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["chefworld-2x3", "chefworld-5x2", "rocksample-1x2"] {
        let spec = preset(name).unwrap().with_human_model(HumanModel::biased_wait(0.25, HumanModel::boltzmann(5.0)));
        let path = dir.path().join(format!("{name}.json"));
        write_game_spec(&spec, &path).unwrap();
        assert_eq!(read_game_spec(&path).unwrap(), spec);
        let game = load_game_spec(&path).unwrap();
        assert_eq!(game.spec(), Some(&spec));
        let again = dir.path().join("again.json");
        save_game_spec(&game, &again).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(&again).unwrap());
        assert_eq!(resolve_game_spec(path.to_str().unwrap()).unwrap(), spec);
    }
}

#[test]
fn spec_file_errors() {
    assert!(matches!(GameSpec::from_json("{"), Err(CirlError::Parse(_))));
    let mut v: serde_json::Value = serde_json::from_str(&preset("chefworld-2x3").unwrap().to_json()).unwrap();
    v["schema_version"] = serde_json::json!(GAME_SCHEMA_VERSION + 1);
    assert!(matches!(GameSpec::from_json(&v.to_string()), Err(CirlError::Version { .. })));
    v.as_object_mut().unwrap().remove("schema_version");
    assert!(matches!(GameSpec::from_json(&v.to_string()), Err(CirlError::Parse(_))));
    let mut v: serde_json::Value = serde_json::from_str(&preset("chefworld-2x3").unwrap().to_json()).unwrap();
    v["discount"] = serde_json::json!(1.2);
    let spec = GameSpec::from_json(&v.to_string()).unwrap();
    assert!(spec.validate().unwrap_err().is_validation());
    assert!(matches!(read_game_spec("/nonexistent/game.json"), Err(CirlError::Io(_))));
    assert!(preset("chefworld-9x2").is_err());
    assert!(preset("chefworld-two").is_err());
    assert!(preset("tictactoe").is_err());
    let built_by_hand = chef_spec(&["a"], &[("x", &[1])], 1, 0.9);
    assert!(save_game_spec(&built_by_hand, std::env::temp_dir().join("unused.json")).is_err());
}

fn rocksample_specs() -> impl Strategy<Value = RockSampleSpec> {
    (1usize..3, 1usize..3).prop_map(|(h, r)| rocksample_preset(h, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chefworld_layout_round_trips(r in 1usize..=6, i in 2usize..=4) {
        let spec = chefworld_preset(r, i).unwrap();
        let layout = ChefWorldLayout::new(&spec, 2);
        for x in 0..layout.n_world() - 1 {
            let counts = layout.decode(WorldState(x)).unwrap();
            prop_assert_eq!(layout.encode(&counts), Some(WorldState(x)));
        }
        prop_assert_eq!(layout.decode(layout.success()), None);
    }

    #[test]
    fn rocksample_sampling_is_monotone(spec in rocksample_specs(), h in 0usize..8, r in 0usize..16) {
        let g = build_rocksample(&spec, 1, 0.95, HumanModel::Rational).unwrap();
        let layout = cirl_core::domains::RockSampleLayout::new(&spec);
        let (h, r) = (h % g.n_human_actions(), r % g.n_robot_actions());
        for x in (0..g.n_world()).step_by(37) {
            let next = g.transition_dist(cirl_core::JointState::new(x, 0), h, r).unwrap();
            prop_assert_eq!(next.len(), 1);
            for i in 0..spec.rocks.len() {
                prop_assert!(!layout.is_sampled(WorldState(x), i) || layout.is_sampled(next[0].0, i));
            }
            // per-step reward is bounded by the rocks that can be entered in one move
            prop_assert!(g.reward(next[0].0 .0).abs() <= spec.rocks.len() as f64);
        }
    }
}
