mod common;

use cirl_core::domains::{build_rocksample, rocksample_preset, ChefWorldLayout, Rock, RockSampleLayout, Turn};
use cirl_core::exact::{adapted_value_iteration, ExactConfig};
use cirl_core::game::{
    belief_update, belief_update_with, enumerate_decision_rules, value_at_belief, GameDescription, DECISION_RULE_CAP,
};
use cirl_core::{Belief, CirlError, CirlGame, DecisionRule, HumanModel, JointState, WorldState};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desc(n_world: usize, n_theta: usize, n_h: usize, n_r: usize) -> GameDescription {
    let mut initial = vec![0.0; n_world * n_theta];
    for t in 0..n_theta {
        initial[t * n_world] = 1.0 / n_theta as f64;
    }
    GameDescription {
        name: "toy".into(),
        world_labels: (0..n_world).map(|x| format!("x{x}")).collect(),
        theta_labels: (0..n_theta).map(|t| format!("t{t}")).collect(),
        human_actions: (0..n_h).map(|h| format!("h{h}")).collect(),
        robot_actions: (0..n_r).map(|r| format!("r{r}")).collect(),
        human_wait: None,
        discount: 0.9,
        horizon: 2,
        initial,
        human_model: HumanModel::Rational,
    }
}

#[test]
fn chefworld_joint_step_increments_both_ingredients() {
    let g = sandwich_soup();
    let layout = ChefWorldLayout::new(&cirl_core::domains::chefworld_preset(2, 3).unwrap(), 2);
    let origin = layout.encode(&[0, 0, 0]).unwrap();
    let dist = g.transition_dist(JointState::new(origin.0, 0), 1, 0).unwrap();
    assert_eq!(dist, vec![(layout.encode(&[1, 1, 0]).unwrap(), 1.0)]);
    assert_eq!(g.world_label(dist[0].0 .0), "(1,1,0)");
}

#[test]
fn wait_wait_is_identity() {
    let g = sandwich_soup();
    let wait = g.human_wait().unwrap();
    let success = g.n_world() - 1;
    for theta in 0..g.n_theta() {
        for x in 0..g.n_world() {
            let dist = g.transition_dist(JointState::new(x, theta), wait, wait).unwrap();
            let recipe_state = g.reward(theta * g.n_world() + x) > 0.0;
            let expect = if recipe_state { success } else { x };
            assert_eq!(dist, vec![(WorldState(expect), 1.0)]);
        }
    }
}

#[test]
fn rocksample_trajectory_moves_and_samples() {
    let mut spec = rocksample_preset(1, 2);
    spec.rocks.push(Rock { x: 1, y: 0, kind: 1 });
    let g = build_rocksample(&spec, 2, 0.95, HumanModel::Rational).unwrap();
    let layout = RockSampleLayout::new(&spec);
    let start = layout.encode(Turn::Robot, (0, 0), &vec![0; spec.rocks.len()]);
    let ee = g.robot_action_labels().iter().position(|l| l == "EE").unwrap();
    let dist = g.transition_dist(JointState::new(start.0, 0), 0, ee).unwrap();
    assert_eq!(dist.len(), 1);
    assert_eq!(dist[0].1, 1.0);
    let (turn, pos, _) = layout.decode(dist[0].0);
    assert_eq!((turn, pos), (Turn::Human, (2, 0)));
    assert!(layout.is_sampled(dist[0].0, 4), "the traversed rock is flagged");
    for i in 0..4 {
        assert!(!layout.is_sampled(dist[0].0, i));
    }
    // sampling pays r_θ(type) once
    let s = dist[0].0 .0;
    assert_eq!(g.reward(s), spec.thetas[0].values[1]);
}

#[test]
fn transition_rejects_bad_actions() {
    let g = sandwich_soup();
    assert!(matches!(g.transition_dist(JointState::new(0, 0), 9, 0), Err(CirlError::InvalidArgument(_))));
    assert!(matches!(g.transition_dist(JointState::new(0, 0), 0, 9), Err(CirlError::InvalidArgument(_))));
    assert!(g.transition_dist(JointState::new(0, 5), 0, 0).is_err());
}

#[test]
fn build_validates_rows_rewards_and_belief() {
    let ok = CirlGame::build(desc(2, 1, 1, 1), |_, _, _, _| vec![(1, 1.0)], |_, _| 0.0);
    assert!(ok.is_ok());
    let short = CirlGame::build(desc(2, 1, 1, 1), |_, _, _, _| vec![(1, 0.5)], |_, _| 0.0);
    assert!(matches!(short, Err(CirlError::Validation(_))));
    let nan = CirlGame::build(desc(2, 1, 1, 1), |_, _, _, _| vec![(1, 1.0)], |_, _| f64::NAN);
    assert!(nan.is_err());
    let mut d = desc(2, 1, 1, 1);
    d.initial = vec![0.5, 0.4];
    assert!(CirlGame::build(d, |_, _, _, _| vec![(1, 1.0)], |_, _| 0.0).is_err());
    let mut d = desc(2, 1, 1, 1);
    d.discount = 1.5;
    assert!(CirlGame::build(d, |_, _, _, _| vec![(1, 1.0)], |_, _| 0.0).is_err());
    let mut d = desc(2, 1, 1, 1);
    d.human_model = HumanModel::boltzmann(-1.0);
    assert!(CirlGame::build(d, |_, _, _, _| vec![(1, 1.0)], |_, _| 0.0).is_err());
}

#[test]
fn soup_signal_collapses_the_belief() {
    let g = sandwich_soup();
    let sol = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    let root = sol.policy.root_cursor();
    let r = sol.policy.robot_action(&g, root);
    let children = sol.policy.child_alphas(root);
    let tomatoes = 2;
    let b = belief_update(&g, &g.initial_belief(), r, tomatoes, &children).unwrap();
    let m = b.theta_marginal(&g);
    assert!(close(m[0], 0.0, 1e-12) && close(m[1], 1.0, 1e-12), "{m:?}");
    let wait = g.human_wait().unwrap();
    let b = belief_update(&g, &g.initial_belief(), r, wait, &children).unwrap();
    assert_eq!(b.entropy(), 0.0);
    assert!(close(b.theta_marginal(&g)[0], 1.0, 1e-12));
}

#[test]
fn point_mass_is_preserved() {
    let g = sandwich_soup();
    let b = Belief::point(g.n_states(), g.n_world());
    let next = belief_update_with(&g, &b, 0, 1, |_| 0.3).unwrap();
    assert_eq!(next.support().count(), 1);
    assert_eq!(next.theta_marginal(&g), vec![0.0, 1.0]);
}

#[test]
fn uninformative_human_leaves_the_prior() {
    let g = sandwich_soup().with_human_model(HumanModel::epsilon_greedy(1.0)).unwrap();
    let sol = adapted_value_iteration(&g, &ExactConfig::default()).unwrap();
    let root = sol.policy.root_cursor();
    let children = sol.policy.child_alphas(root);
    for h in 0..g.n_human_actions() {
        let b = belief_update(&g, &g.initial_belief(), 0, h, &children).unwrap();
        let m = b.theta_marginal(&g);
        assert!(close(m[0], 0.5, 1e-12) && close(m[1], 0.5, 1e-12));
    }
}

#[test]
fn impossible_observation_is_an_error() {
    let g = sandwich_soup();
    let err = belief_update_with(&g, &g.initial_belief(), 0, 2, |_| 0.0).unwrap_err();
    assert!(matches!(err, CirlError::InconsistentObservation { action: 2 }));
}

#[test]
fn decision_rule_counts_and_order() {
    let g = common::chef_spec(&["a", "b", "c"], &[("x", &[1, 0, 0]), ("y", &[0, 1, 0])], 2, 0.95);
    let rules = enumerate_decision_rules(&g, DECISION_RULE_CAP).unwrap();
    assert_eq!(rules.len(), 16);
    assert_eq!(rules[0], DecisionRule(vec![0, 0]));
    assert_eq!(rules[1], DecisionRule(vec![0, 1]));
    assert_eq!(rules[15], DecisionRule(vec![3, 3]));
    let g3 = common::chef_spec(&["a", "b", "c"], &[("x", &[1, 0, 0]), ("y", &[0, 1, 0]), ("z", &[0, 0, 1])], 2, 0.95);
    assert_eq!(enumerate_decision_rules(&g3, DECISION_RULE_CAP).unwrap().len(), 64);
    let single = CirlGame::build(desc(1, 3, 1, 1), |_, _, _, _| vec![(0, 1.0)], |_, _| 0.0).unwrap();
    assert_eq!(enumerate_decision_rules(&single, DECISION_RULE_CAP).unwrap().len(), 1);
    let err = enumerate_decision_rules(&g3, 10).unwrap_err();
    assert!(err.is_resource());
    assert!(err.to_string().contains("64"));
}

#[test]
fn value_at_belief_examples() {
    let b = Belief::new(vec![0.5, 0.5]).unwrap();
    assert_eq!(value_at_belief(&[1.0, 1.0], &b).unwrap(), 1.0);
    assert!(close(value_at_belief(&[0.9025, 0.0], &b).unwrap(), 0.45125, 1e-15));
    assert_eq!(value_at_belief(&[3.0, 7.0], &Belief::point(2, 1)).unwrap(), 7.0);
    assert!(matches!(value_at_belief(&[1.0], &b), Err(CirlError::InvalidArgument(_))));
    assert!(Belief::new(vec![0.7, 0.7]).is_err());
    assert!(Belief::new(vec![-0.1, 1.1]).is_err());
}

fn random_children(g: &CirlGame, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..g.n_human_actions()).map(|_| (0..g.n_states()).map(|_| rng.gen::<f64>()).collect()).collect()
}

fn random_belief(g: &CirlGame, rng: &mut ChaCha8Rng, sparse: bool) -> Belief {
    let mut p: Vec<f64> = (0..g.n_states()).map(|_| if sparse && rng.gen_bool(0.5) { 0.0 } else { rng.gen() }).collect();
    if p.iter().sum::<f64>() == 0.0 {
        p[0] = 1.0;
    }
    let total: f64 = p.iter().sum();
    Belief::new(p.into_iter().map(|v| v / total).collect()).unwrap()
}

fn models() -> impl Strategy<Value = HumanModel> {
    prop_oneof![
        Just(HumanModel::Rational),
        (0.1f64..20.0).prop_map(HumanModel::boltzmann),
        (0.01f64..=1.0).prop_map(HumanModel::epsilon_greedy),
        (-0.5f64..0.5).prop_map(|b| HumanModel::biased_wait(b, HumanModel::boltzmann(3.0))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn belief_updates_are_distributions_and_conserve_theta(seed in any::<u64>(), model in models(), r in 0usize..3, h in 0usize..3) {
        let g = chef(3, 2, HumanModel::Rational).with_human_model(model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_belief(&g, &mut rng, true);
        let children = random_children(&g, &mut rng);
        let refs: Vec<&[f64]> = children.iter().map(|c| c.as_slice()).collect();
        match belief_update(&g, &b, r, h, &refs) {
            Ok(next) => {
                let total: f64 = next.as_slice().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                prop_assert!(next.as_slice().iter().all(|&p| p >= 0.0));
                let before = b.theta_marginal(&g);
                let after = next.theta_marginal(&g);
                for (p, q) in before.iter().zip(&after) {
                    prop_assert!(*p > 0.0 || *q == 0.0);
                }
            }
            Err(e) => prop_assert!(matches!(e, CirlError::InconsistentObservation { .. }), "unexpected error {}", e),
        }
    }

    #[test]
    fn transition_rows_are_distributions(x in 0usize..64, theta in 0usize..3, h in 0usize..3, r in 0usize..3) {
        let g = chef(3, 2, HumanModel::Rational);
        let x = x % g.n_world();
        let dist = g.transition_dist(JointState::new(x, theta), h, r).unwrap();
        let total: f64 = dist.iter().map(|d| d.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
