#![allow(dead_code)]

use cirl_core::domains::{build_chefworld, chefworld_preset, preset, ChefWorldSpec};
use cirl_core::human::HumanModel;
use cirl_core::CirlGame;

pub const GAMMA: f64 = 0.95;

/// A named preset with its default horizon and discount.
pub fn game(name: &str) -> CirlGame {
    preset(name).unwrap().build().unwrap()
}

/// `chefworld-RxI` with T = 2, γ = 0.95 and the given human model.
pub fn chef(recipes: usize, ingredients: usize, model: HumanModel) -> CirlGame {
    build_chefworld(&chefworld_preset(recipes, ingredients).unwrap(), 2, GAMMA, model).unwrap()
}

pub fn chef_spec(ingredients: &[&str], recipes: &[(&str, &[u32])], horizon: usize, gamma: f64) -> CirlGame {
    build_chefworld(&ChefWorldSpec::new(ingredients, recipes), horizon, gamma, HumanModel::Rational).unwrap()
}

/// The sandwich/soup example over (meat, bread, tomatoes).
pub fn sandwich_soup() -> CirlGame {
    chef(2, 3, HumanModel::Rational)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub const TWO_INGREDIENT_TABLE: [[u32; 2]; 6] = [[1, 2], [2, 1], [1, 1], [2, 2], [0, 2], [2, 0]];

/// Every 2- and 3-recipe subset of the two-ingredient recipe table.
pub fn two_ingredient_subsets() -> Vec<Vec<[u32; 2]>> {
    let n = TWO_INGREDIENT_TABLE.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(vec![TWO_INGREDIENT_TABLE[i], TWO_INGREDIENT_TABLE[j]]);
            for k in j + 1..n {
                out.push(vec![TWO_INGREDIENT_TABLE[i], TWO_INGREDIENT_TABLE[j], TWO_INGREDIENT_TABLE[k]]);
            }
        }
    }
    out
}

pub fn two_ingredient_game(recipes: &[[u32; 2]], model: HumanModel) -> CirlGame {
    let named: Vec<(String, [u32; 2])> = recipes.iter().map(|r| (format!("r{}{}", r[0], r[1]), *r)).collect();
    let refs: Vec<(&str, &[u32])> = named.iter().map(|(n, r)| (n.as_str(), &r[..])).collect();
    build_chefworld(&ChefWorldSpec::new(&["a", "b"], &refs), 2, GAMMA, model).unwrap()
}

/// Value of the best joint policy by brute force: every deterministic robot
/// plan tree, with the human (who knows θ and the tree) choosing her action
/// sequence to maximize the discounted reward. Independent of the solvers'
/// α-vector machinery.
pub fn brute_force_team_value(game: &CirlGame) -> f64 {
    let plans = robot_plan_trees(game, game.horizon());
    let b0 = game.initial();
    plans
        .iter()
        .map(|plan| {
            (0..game.n_states())
                .filter(|&s| b0[s] > 0.0)
                .map(|s| b0[s] * best_response(game, s, plan, 0))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug)]
pub struct Tree {
    pub action: usize,
    pub children: Vec<Tree>,
}

pub fn robot_plan_trees(game: &CirlGame, depth: usize) -> Vec<Tree> {
    if depth == 0 {
        return vec![Tree { action: 0, children: Vec::new() }];
    }
    let subs = robot_plan_trees(game, depth - 1);
    let n_h = game.n_human_actions();
    let total = subs.len().pow(n_h as u32);
    let mut out = Vec::with_capacity(game.n_robot_actions() * total);
    for a in 0..game.n_robot_actions() {
        for mut code in 0..total {
            let children = (0..n_h)
                .map(|_| {
                    let c = subs[code % subs.len()].clone();
                    code /= subs.len();
                    c
                })
                .collect();
            out.push(Tree { action: a, children });
        }
    }
    out
}

/// The fully informed human's best expected discounted reward from joint
/// state `s` against a robot plan tree.
pub fn best_response(game: &CirlGame, s: usize, plan: &Tree, stage: usize) -> f64 {
    let r = game.reward(s);
    if stage == game.horizon() {
        return r;
    }
    let best = (0..game.n_human_actions())
        .map(|h| {
            let (targets, probs) = game.row(s, h, plan.action);
            targets
                .iter()
                .zip(probs)
                .map(|(&t, &p)| p * best_response(game, t as usize, &plan.children[h], stage + 1))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    r + game.discount() * best
}

/// Best robot plan tree against a fixed, stage-dependent human policy
/// `human(stage, s) -> distribution over A_H`, by enumerating every tree.
pub fn brute_force_fixed_human<F>(game: &CirlGame, human: F) -> f64
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    fn value<F: Fn(usize, usize) -> Vec<f64>>(game: &CirlGame, human: &F, s: usize, plan: &Tree, stage: usize) -> f64 {
        let r = game.reward(s);
        if stage == game.horizon() {
            return r;
        }
        let mut next = 0.0;
        for (h, ph) in human(stage, s).into_iter().enumerate() {
            if ph == 0.0 {
                continue;
            }
            let (targets, probs) = game.row(s, h, plan.action);
            for (&t, &p) in targets.iter().zip(probs) {
                next += ph * p * value(game, human, t as usize, &plan.children[h], stage + 1);
            }
        }
        r + game.discount() * next
    }
    let b0 = game.initial();
    robot_plan_trees(game, game.horizon())
        .iter()
        .map(|plan| (0..game.n_states()).filter(|&s| b0[s] > 0.0).map(|s| b0[s] * value(game, &human, s, plan, 0)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}
