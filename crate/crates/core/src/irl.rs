//! The IRL baseline: the human demonstrates as if acting alone with known θ,
//! and the robot treats her as part of the environment.
//!
//! "Acting alone" is the centralized full-information problem: both agents
//! are controlled jointly with θ known, and the human's Q-value for `a_H` is
//! the best continuation over robot actions. A rational demonstrator picks
//! uniformly among the optimal actions that change the world, and waits only
//! when nothing productive is optimal.

use crate::error::Result;
use crate::exact::{fixed_human_vi, ExactConfig, ExactSolution, StageHumanPolicy};
use crate::game::CirlGame;
use crate::human::{HumanModel, ARGMAX_TOL};

/// Centralized Q-values, `[stage][s * |A_H| + a_H]` for stages `0..T`.
pub fn centralized_q(game: &CirlGame) -> Vec<Vec<f64>> {
    let (n, n_h, n_r) = (game.n_states(), game.n_human_actions(), game.n_robot_actions());
    let gamma = game.discount();
    let mut value = game.rewards().to_vec();
    let mut out = vec![Vec::new(); game.horizon()];
    for t in (0..game.horizon()).rev() {
        let mut q = vec![0.0; n * n_h];
        for s in 0..n {
            for h in 0..n_h {
                let best = (0..n_r).map(|r| game.expect(s, h, r, &value)).fold(f64::NEG_INFINITY, f64::max);
                q[s * n_h + h] = game.reward(s) + gamma * best;
            }
        }
        value = (0..n).map(|s| q[s * n_h..(s + 1) * n_h].iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        out[t] = q;
    }
    out
}

/// Whether `h` changes the world differently from waiting for some robot
/// action. Without a wait action every action counts as productive.
pub fn is_productive(game: &CirlGame, s: usize, h: usize) -> bool {
    let Some(w) = game.human_wait() else { return true };
    if h == w {
        return false;
    }
    (0..game.n_robot_actions()).any(|r| game.row(s, h, r) != game.row(s, w, r))
}

/// The demonstrator's greedy choice: uniform over optimal productive
/// actions, else wait if it is optimal, else uniform over all optimal ones.
fn greedy_demo(game: &CirlGame, s: usize, q: &[f64], out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best: Vec<usize> = (0..q.len()).filter(|&h| q[h] >= max - ARGMAX_TOL).collect();
    let productive: Vec<usize> = best.iter().copied().filter(|&h| is_productive(game, s, h)).collect();
    out.iter_mut().for_each(|p| *p = 0.0);
    let chosen = match game.human_wait() {
        _ if !productive.is_empty() => productive,
        Some(w) if best.contains(&w) => vec![w],
        _ => best,
    };
    let p = 1.0 / chosen.len() as f64;
    for h in chosen {
        out[h] = p;
    }
}

fn demo_dist(game: &CirlGame, model: &HumanModel, s: usize, q: &[f64], out: &mut [f64]) {
    match model {
        HumanModel::Rational => greedy_demo(game, s, q, out),
        HumanModel::EpsilonGreedy { epsilon } => {
            greedy_demo(game, s, q, out);
            let n = q.len() as f64;
            out.iter_mut().for_each(|p| *p = (1.0 - epsilon) * *p + epsilon / n);
        }
        HumanModel::Boltzmann { .. } => model.dist_into(q, game.human_wait(), crate::human::TieBreak::Uniform, out),
        HumanModel::BiasedWait { bonus, inner } => {
            let mut shaped = q.to_vec();
            if let Some(w) = game.human_wait() {
                shaped[w] += bonus;
            }
            demo_dist(game, inner, s, &shaped, out);
        }
    }
}

/// The demonstrator's policy when she follows `model` on the centralized
/// Q-values. It depends only on the stage and the joint state.
pub fn demonstration_policy(game: &CirlGame, model: &HumanModel) -> Result<StageHumanPolicy> {
    model.validate()?;
    let n_h = game.n_human_actions();
    let probs = centralized_q(game)
        .into_iter()
        .map(|q| {
            let mut p = vec![0.0; q.len()];
            for s in 0..game.n_states() {
                demo_dist(game, model, s, &q[s * n_h..(s + 1) * n_h], &mut p[s * n_h..(s + 1) * n_h]);
            }
            p
        })
        .collect();
    Ok(StageHumanPolicy { probs })
}

/// Demonstration policy under the game's own human model.
pub fn irl_human_policy(game: &CirlGame) -> Result<StageHumanPolicy> {
    demonstration_policy(game, game.human_model())
}

/// The robot's best response to a fixed demonstration policy.
pub fn irl_robot_policy(game: &CirlGame, human: &StageHumanPolicy, cfg: &ExactConfig) -> Result<ExactSolution> {
    fixed_human_vi(game, human, cfg)
}

/// Both halves of the IRL pipeline.
#[derive(Clone, Debug)]
pub struct IrlSolution {
    pub human: StageHumanPolicy,
    pub robot: ExactSolution,
}

pub fn irl_pipeline(game: &CirlGame, cfg: &ExactConfig) -> Result<IrlSolution> {
    let human = irl_human_policy(game)?;
    let robot = irl_robot_policy(game, &human, cfg)?;
    Ok(IrlSolution { human, robot })
}
