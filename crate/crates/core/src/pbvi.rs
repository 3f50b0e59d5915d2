//! Point-based value iteration.
//!
//! Plan sets are stage-indexed and append-only: each round backs up every
//! belief point at every stage, then expands the belief set by simulating one
//! step from each point. The adapted variant ranges over robot actions and
//! finds the continuation map `v` by coordinate ascent on the belief value
//! (starting from the best child per human action); every candidate is
//! evaluated exactly, so reported values are achievable. The baseline is
//! standard PBVI on the reduced POMDP.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::exact::{best_at, PRUNE_TOL};
use crate::game::{belief_update, belief_update_with, decision_rule_count, Belief, CirlGame, DecisionRule, DECISION_RULE_CAP};
use crate::human::{sample_index, TieBreak};
use crate::par;
use crate::plan::{ActionKind, PlanNode, PolicyGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PbviVariant {
    Adapted,
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Number of rounds (backup sweep followed by expansion).
    Expansions(usize),
    WallClock(Duration),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbviConfig {
    pub variant: PbviVariant,
    pub budget: Budget,
    pub seed: u64,
    /// Belief points beyond this are not added.
    pub max_beliefs: usize,
    /// Coordinate-ascent sweeps per backup (adapted variant).
    pub max_sweeps: usize,
    /// Stop early once the value at `b0` reaches this.
    #[serde(default)]
    pub target: Option<f64>,
}

impl PbviConfig {
    pub fn new(variant: PbviVariant, budget: Budget, seed: u64) -> Self {
        PbviConfig { variant, budget, seed, max_beliefs: 4096, max_sweeps: 8, target: None }
    }
}

/// A belief point and the stage at which it was reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefPoint {
    pub belief: Belief,
    pub stage: usize,
    /// Expansion round that added the point (0 for `b0`).
    pub generation: usize,
}

#[derive(Clone, Debug)]
pub struct PbviSolution {
    pub policy: PolicyGraph,
    pub value: f64,
    /// Value at `b0` after each round.
    pub history: Vec<f64>,
    pub beliefs: Vec<BeliefPoint>,
    pub rounds: usize,
    pub elapsed: Duration,
}

struct Solver<'a> {
    game: &'a CirlGame,
    cfg: &'a PbviConfig,
    rules: Vec<DecisionRule>,
    stages: Vec<Vec<PlanNode>>,
    keys: Vec<HashSet<Vec<u64>>>,
}

fn alpha_key(alpha: &[f64]) -> Vec<u64> {
    alpha.iter().map(|x| (x + 0.0).to_bits()).collect()
}

impl<'a> Solver<'a> {
    fn new(game: &'a CirlGame, cfg: &'a PbviConfig) -> Result<Self> {
        let (n_h, n_t) = (game.n_human_actions(), game.n_theta());
        let mut rules = Vec::new();
        let mut wait_rule = 0;
        if cfg.variant == PbviVariant::Baseline {
            if !game.human_model().is_rational() {
                return Err(CirlError::InvalidArgument("baseline PBVI assumes a rational human".into()));
            }
            let count = decision_rule_count(n_h, n_t).unwrap_or(u128::MAX);
            if count > DECISION_RULE_CAP {
                return Err(CirlError::resource("decision rule", count, DECISION_RULE_CAP));
            }
            rules = (0..count).map(|i| DecisionRule::from_index(i, n_h, n_t)).collect();
            if let Some(w) = game.human_wait() {
                wait_rule = rules.iter().position(|r| r.0.iter().all(|&a| a == w)).unwrap_or(0);
            }
        }
        let horizon = game.horizon();
        let mut solver = Solver {
            game,
            cfg,
            rules,
            stages: vec![Vec::new(); horizon + 1],
            keys: vec![HashSet::new(); horizon + 1],
        };
        solver.push(horizon, PlanNode { action: 0, children: Vec::new(), alpha: game.rewards().to_vec() });
        for t in (0..horizon).rev() {
            for r in 0..game.n_robot_actions() {
                let action = match cfg.variant {
                    PbviVariant::Adapted => r,
                    PbviVariant::Baseline => wait_rule * game.n_robot_actions() + r,
                };
                let child = if t + 1 == horizon { 0 } else { r as u32 };
                let children = vec![child; n_h];
                let alpha = solver.evaluate(t, action, &children);
                solver.stages[t].push(PlanNode { action, children, alpha: alpha.clone() });
                solver.keys[t].insert(alpha_key(&alpha));
            }
        }
        Ok(solver)
    }

    fn push(&mut self, t: usize, node: PlanNode) -> bool {
        if self.keys[t].insert(alpha_key(&node.alpha)) {
            self.stages[t].push(node);
            true
        } else {
            false
        }
    }

    /// Exact α-vector of the plan `(action, children)` at stage `t`.
    fn evaluate(&self, t: usize, action: usize, children: &[u32]) -> Vec<f64> {
        let game = self.game;
        let next = &self.stages[t + 1];
        let alphas: Vec<&[f64]> = children.iter().map(|&c| next[c as usize].alpha.as_slice()).collect();
        let n_h = game.n_human_actions();
        let gamma = game.discount();
        match self.cfg.variant {
            PbviVariant::Adapted => {
                let (mut q, mut pi) = (vec![0.0; n_h], vec![0.0; n_h]);
                (0..game.n_states())
                    .map(|s| {
                        game.human_policy_into(s, action, &alphas, TieBreak::LowestIndex, &mut q, &mut pi);
                        game.reward(s) + gamma * pi.iter().zip(&q).map(|(p, v)| p * v).sum::<f64>()
                    })
                    .collect()
            }
            PbviVariant::Baseline => {
                let n_r = game.n_robot_actions();
                let (r, rule) = (action % n_r, &self.rules[action / n_r]);
                (0..game.n_states())
                    .map(|s| {
                        let h = rule.action(game.theta_of(s));
                        game.reward(s) + gamma * game.expect(s, h, r, alphas[h])
                    })
                    .collect()
            }
        }
    }

    /// Best new plan for stage `t` at belief `b`, as `(action, children)`.
    fn backup_point(&self, t: usize, b: &Belief) -> (usize, Vec<u32>) {
        match self.cfg.variant {
            PbviVariant::Adapted => self.backup_adapted(t, b),
            PbviVariant::Baseline => self.backup_baseline(t, b),
        }
    }

    fn backup_adapted(&self, t: usize, b: &Belief) -> (usize, Vec<u32>) {
        let game = self.game;
        let n_h = game.n_human_actions();
        let next = &self.stages[t + 1];
        let g = next.len();
        let support: Vec<(usize, f64)> = b.support().collect();
        let model = game.human_model();
        let wait = game.human_wait();
        let mut best: Option<(f64, usize, Vec<u32>)> = None;
        let (mut q, mut pi) = (vec![0.0; n_h], vec![0.0; n_h]);
        for r in 0..game.n_robot_actions() {
            // e[(i * n_h + h) * g + j] = Σ T(s_i, h, r, s') α_j(s')
            let mut e = vec![0.0; support.len() * n_h * g];
            for (i, &(s, _)) in support.iter().enumerate() {
                for h in 0..n_h {
                    for (j, child) in next.iter().enumerate() {
                        e[(i * n_h + h) * g + j] = game.expect(s, h, r, &child.alpha);
                    }
                }
            }
            let mut objective = |v: &[u32]| -> f64 {
                support
                    .iter()
                    .enumerate()
                    .map(|(i, &(_, p))| {
                        for h in 0..n_h {
                            q[h] = e[(i * n_h + h) * g + v[h] as usize];
                        }
                        model.dist_into(&q, wait, TieBreak::LowestIndex, &mut pi);
                        p * pi.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .sum()
            };
            let mut v: Vec<u32> = (0..n_h)
                .map(|h| {
                    let mut bj = (0, f64::NEG_INFINITY);
                    for j in 0..g {
                        let val: f64 = support.iter().enumerate().map(|(i, &(_, p))| p * e[(i * n_h + h) * g + j]).sum();
                        if val > bj.1 + PRUNE_TOL {
                            bj = (j, val);
                        }
                    }
                    bj.0 as u32
                })
                .collect();
            let mut current = objective(&v);
            for _ in 0..self.cfg.max_sweeps {
                let mut improved = false;
                for h in 0..n_h {
                    let keep = v[h];
                    for j in 0..g as u32 {
                        if j == keep {
                            continue;
                        }
                        let prev = v[h];
                        v[h] = j;
                        let val = objective(&v);
                        if val > current + PRUNE_TOL {
                            current = val;
                            improved = true;
                        } else {
                            v[h] = prev;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(bv, _, _)| current > *bv + PRUNE_TOL) {
                best = Some((current, r, v));
            }
        }
        let (_, r, v) = best.expect("at least one robot action");
        (r, v)
    }

    fn backup_baseline(&self, t: usize, b: &Belief) -> (usize, Vec<u32>) {
        let game = self.game;
        let (n_h, n_r, n_t) = (game.n_human_actions(), game.n_robot_actions(), game.n_theta());
        let next = &self.stages[t + 1];
        let g = next.len();
        // w[((r * n_h + h) * g + j) * n_t + θ] = Σ_{s: θ(s) = θ} b(s) Σ T(s, h, r, s') α_j(s')
        let mut w = vec![0.0; n_r * n_h * g * n_t];
        for (s, p) in b.support() {
            let theta = game.theta_of(s);
            for r in 0..n_r {
                for h in 0..n_h {
                    for (j, child) in next.iter().enumerate() {
                        w[((r * n_h + h) * g + j) * n_t + theta] += p * game.expect(s, h, r, &child.alpha);
                    }
                }
            }
        }
        let mut best: Option<(f64, usize, Vec<u32>)> = None;
        for (d, rule) in self.rules.iter().enumerate() {
            for r in 0..n_r {
                let mut total = 0.0;
                let mut v = vec![0u32; n_h];
                for h in 0..n_h {
                    if !rule.0.contains(&h) {
                        continue;
                    }
                    let mut bj = (0, f64::NEG_INFINITY);
                    for j in 0..g {
                        let base = ((r * n_h + h) * g + j) * n_t;
                        let val: f64 = (0..n_t).filter(|&th| rule.0[th] == h).map(|th| w[base + th]).sum();
                        if val > bj.1 + PRUNE_TOL {
                            bj = (j, val);
                        }
                    }
                    v[h] = bj.0 as u32;
                    total += bj.1;
                }
                if best.as_ref().is_none_or(|(bv, _, _)| total > *bv + PRUNE_TOL) {
                    best = Some((total, d * n_r + r, v));
                }
            }
        }
        let (_, a, v) = best.expect("at least one joint action");
        (a, v)
    }

    /// One backup sweep over all stages and belief points.
    fn sweep(&mut self, beliefs: &[BeliefPoint]) {
        for t in (0..self.game.horizon()).rev() {
            let this: &Solver<'_> = self;
            let proposals = par::map_slice(beliefs, |bp| {
                let (action, children) = this.backup_point(t, &bp.belief);
                let alpha = this.evaluate(t, action, &children);
                let (_, existing) = best_at(&this.stages[t], &bp.belief);
                let value = crate::game::dot_belief(&alpha, &bp.belief);
                (value > existing + PRUNE_TOL).then_some(PlanNode { action, children, alpha })
            });
            for node in proposals.into_iter().flatten() {
                self.push(t, node);
            }
        }
    }

    fn value_at_b0(&self) -> (usize, f64) {
        best_at(&self.stages[0], &self.game.initial_belief())
    }

    /// Simulates one step from every belief point and adds the successor
    /// farthest (in L1) from the current set.
    fn expand(&self, beliefs: &[BeliefPoint], generation: usize, rng: &mut ChaCha8Rng) -> Vec<BeliefPoint> {
        let game = self.game;
        let mut out = beliefs.to_vec();
        for bp in beliefs {
            if out.len() >= self.cfg.max_beliefs {
                break;
            }
            if bp.stage >= game.horizon() {
                continue;
            }
            let (idx, _) = best_at(&self.stages[bp.stage], &bp.belief);
            let node = &self.stages[bp.stage][idx];
            let alphas: Vec<&[f64]> =
                node.children.iter().map(|&c| self.stages[bp.stage + 1][c as usize].alpha.as_slice()).collect();
            let mut candidates = Vec::new();
            for r in 0..game.n_robot_actions() {
                let s = sample_index(bp.belief.as_slice(), rng);
                let next = match self.cfg.variant {
                    PbviVariant::Adapted => {
                        let n_h = game.n_human_actions();
                        let (mut q, mut pi) = (vec![0.0; n_h], vec![0.0; n_h]);
                        game.human_policy_into(s, r, &alphas, TieBreak::LowestIndex, &mut q, &mut pi);
                        let h = sample_index(&pi, rng);
                        belief_update(game, &bp.belief, r, h, &alphas)
                    }
                    PbviVariant::Baseline => {
                        let rule = &self.rules[node.action / game.n_robot_actions()];
                        let h = rule.action(game.theta_of(s));
                        belief_update_with(game, &bp.belief, r, h, |s| (rule.action(game.theta_of(s)) == h) as u8 as f64)
                    }
                };
                if let Ok(b) = next {
                    candidates.push(b);
                }
            }
            let mut best: Option<(f64, Belief)> = None;
            for c in candidates {
                let d = out.iter().map(|o| o.belief.l1_distance(&c)).fold(f64::INFINITY, f64::min);
                if d > 1e-9 && best.as_ref().is_none_or(|(bd, _)| d > *bd) {
                    best = Some((d, c));
                }
            }
            if let Some((_, b)) = best {
                out.push(BeliefPoint { belief: b, stage: bp.stage + 1, generation });
            }
        }
        out
    }
}

/// Slack when comparing against [`PbviConfig::target`].
pub const TARGET_TOL: f64 = 1e-9;

/// Runs PBVI until the budget is spent or the target value is reached.
pub fn pbvi_solve(game: &CirlGame, cfg: &PbviConfig) -> Result<PbviSolution> {
    let start = Instant::now();
    let mut solver = Solver::new(game, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut beliefs = vec![BeliefPoint { belief: game.initial_belief(), stage: 0, generation: 0 }];
    let mut history = Vec::new();
    let mut rounds = 0;
    loop {
        let done = match cfg.budget {
            Budget::Expansions(n) => rounds >= n,
            Budget::WallClock(limit) => rounds > 0 && start.elapsed() >= limit,
        };
        if done {
            break;
        }
        solver.sweep(&beliefs);
        let value = solver.value_at_b0().1;
        history.push(value);
        rounds += 1;
        if cfg.target.is_some_and(|t| value >= t - TARGET_TOL) {
            break;
        }
        beliefs = solver.expand(&beliefs, rounds, &mut rng);
    }
    let (root, value) = solver.value_at_b0();
    let action_kind = match cfg.variant {
        PbviVariant::Adapted => ActionKind::Robot,
        PbviVariant::Baseline => ActionKind::Joint,
    };
    let policy = PolicyGraph {
        action_kind,
        training_model: game.human_model().clone(),
        stages: solver.stages,
        root,
        value,
    };
    Ok(PbviSolution { policy, value, history, beliefs, rounds, elapsed: start.elapsed() })
}
