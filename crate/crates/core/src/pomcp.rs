//! Monte Carlo tree search over action-observation histories.
//!
//! The adapted variant searches over robot actions only; human-action nodes
//! keep value estimates per θ and the simulated human picks her action by
//! feeding those estimates, plus an exploration bonus, through the game's
//! human model. The baseline searches over the joint actions `(δ, a_R)` of
//! the reduced POMDP, with the simulated human following `δ`.

use std::mem::size_of;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::{decision_rule_count, Belief, CirlGame, DecisionRule, DECISION_RULE_CAP};
use crate::human::{sample_index, HumanModel, TieBreak};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PomcpVariant {
    Adapted,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PomcpConfig {
    pub variant: PomcpVariant,
    /// UCB1 exploration constant, in reward units.
    pub c: f64,
    /// Simulations stop once `γ^depth` falls below this.
    pub epsilon_depth: f64,
    /// Simulations per search call.
    pub simulations: usize,
    pub seed: u64,
    pub max_particles: usize,
    /// Memory the tree may occupy.
    pub max_bytes: u64,
}

impl PomcpConfig {
    pub fn new(variant: PomcpVariant, simulations: usize, seed: u64) -> Self {
        PomcpConfig {
            variant,
            c: 1.0,
            epsilon_depth: 0.01,
            simulations,
            seed,
            max_particles: 100_000,
            max_bytes: 1 << 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(CirlError::Validation("exploration constant must be finite and nonnegative".into()));
        }
        if !(self.epsilon_depth > 0.0 && self.epsilon_depth < 1.0) {
            return Err(CirlError::Validation("epsilon_depth must lie in (0, 1)".into()));
        }
        if self.simulations == 0 {
            return Err(CirlError::Validation("simulation budget must be at least 1".into()));
        }
        if self.max_particles == 0 {
            return Err(CirlError::Validation("particle cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
struct Node {
    n: u32,
    edges: u32,
    particles: Vec<u32>,
    seen: u64,
}

#[derive(Clone, Copy, Debug)]
struct RobotEdge {
    n: u32,
    v: f64,
    human: u32,
}

#[derive(Clone, Copy, Debug)]
struct HumanEdge {
    n: u32,
    child: u32,
}

/// Augmented human values `V + c·sqrt(ln N / n)`, with `+inf` for unvisited
/// actions.
pub fn augmented_values(values: &[f64], counts: &[u32], c: f64) -> Vec<f64> {
    let total: u32 = counts.iter().sum();
    let log_n = (total.max(1) as f64).ln();
    values
        .iter()
        .zip(counts)
        .map(|(&v, &n)| if n == 0 { f64::INFINITY } else { v + c * (log_n / n as f64).sqrt() })
        .collect()
}

/// Samples the human's action from her model applied to augmented values.
pub fn sample_human_action<R: Rng + ?Sized>(
    model: &HumanModel,
    wait: Option<usize>,
    values: &[f64],
    counts: &[u32],
    c: f64,
    rng: &mut R,
) -> usize {
    let aug = augmented_values(values, counts, c);
    let probs = model.dist(&aug, wait, TieBreak::Uniform);
    sample_index(&probs, rng)
}

/// An online search tree rooted at the current history.
pub struct Pomcp {
    game: CirlGame,
    cfg: PomcpConfig,
    rng: ChaCha8Rng,
    rules: Vec<DecisionRule>,
    n_actions: usize,
    nodes: Vec<Node>,
    robot_edges: Vec<RobotEdge>,
    human_edges: Vec<HumanEdge>,
    theta_n: Vec<u32>,
    theta_v: Vec<f64>,
    particles_total: usize,
    root: u32,
    stage: usize,
    /// Realized `(action, human action)` pairs since the start.
    history: Vec<(usize, usize)>,
    /// Node ids along the realized history, root first.
    path: Vec<u32>,
}

impl Pomcp {
    pub fn new(game: &CirlGame, cfg: PomcpConfig) -> Result<Self> {
        cfg.validate()?;
        let (n_h, n_t, n_r) = (game.n_human_actions(), game.n_theta(), game.n_robot_actions());
        let rules = match cfg.variant {
            PomcpVariant::Adapted => Vec::new(),
            PomcpVariant::Baseline => {
                if !game.human_model().is_rational() {
                    return Err(CirlError::InvalidArgument("baseline POMCP assumes a rational human".into()));
                }
                let count = decision_rule_count(n_h, n_t).unwrap_or(u128::MAX);
                if count > DECISION_RULE_CAP {
                    return Err(CirlError::resource("decision rule", count, DECISION_RULE_CAP));
                }
                (0..count).map(|i| DecisionRule::from_index(i, n_h, n_t)).collect()
            }
        };
        let n_actions = match cfg.variant {
            PomcpVariant::Adapted => n_r,
            PomcpVariant::Baseline => rules.len() * n_r,
        };
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tree = Pomcp {
            game: game.clone(),
            cfg,
            rng,
            rules,
            n_actions,
            nodes: Vec::new(),
            robot_edges: Vec::new(),
            human_edges: Vec::new(),
            theta_n: Vec::new(),
            theta_v: Vec::new(),
            particles_total: 0,
            root: 0,
            stage: 0,
            history: Vec::new(),
            path: Vec::new(),
        };
        tree.root = tree.new_node()?;
        tree.path.push(tree.root);
        Ok(tree)
    }

    pub fn config(&self) -> &PomcpConfig {
        &self.cfg
    }

    pub fn game(&self) -> &CirlGame {
        &self.game
    }

    /// Actions at each history node: `|A_R|` or `|A_H|^|Θ| · |A_R|`.
    pub fn branching(&self) -> usize {
        self.n_actions
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn history(&self) -> &[(usize, usize)] {
        &self.history
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn memory_bytes(&self) -> u64 {
        (self.nodes.len() * size_of::<Node>()
            + self.particles_total * size_of::<u32>()
            + self.robot_edges.len() * size_of::<RobotEdge>()
            + self.human_edges.len() * size_of::<HumanEdge>()
            + self.theta_n.len() * (size_of::<u32>() + size_of::<f64>())) as u64
    }

    fn check_memory(&self, extra: u64) -> Result<()> {
        let used = self.memory_bytes() + extra;
        if used > self.cfg.max_bytes {
            return Err(CirlError::resource("search tree memory", used as u128, self.cfg.max_bytes as u128));
        }
        Ok(())
    }

    fn new_node(&mut self) -> Result<u32> {
        self.check_memory((size_of::<Node>() + self.n_actions * size_of::<RobotEdge>()) as u64)?;
        let edges = self.robot_edges.len() as u32;
        self.robot_edges.extend(std::iter::repeat_n(RobotEdge { n: 0, v: 0.0, human: NONE }, self.n_actions));
        self.nodes.push(Node { edges, ..Node::default() });
        Ok((self.nodes.len() - 1) as u32)
    }

    fn human_block(&mut self, edge: usize) -> Result<u32> {
        if self.robot_edges[edge].human != NONE {
            return Ok(self.robot_edges[edge].human);
        }
        let n_h = self.game.n_human_actions();
        let per_theta = match self.cfg.variant {
            PomcpVariant::Adapted => n_h * self.game.n_theta(),
            PomcpVariant::Baseline => 0,
        };
        self.check_memory((n_h * size_of::<HumanEdge>() + per_theta * 12) as u64)?;
        let start = self.human_edges.len() as u32;
        self.human_edges.extend(std::iter::repeat_n(HumanEdge { n: 0, child: NONE }, n_h));
        if per_theta > 0 {
            self.theta_n.extend(std::iter::repeat_n(0, per_theta));
            self.theta_v.extend(std::iter::repeat_n(0.0, per_theta));
        }
        self.robot_edges[edge].human = start;
        Ok(start)
    }

    /// Robot action encoded by a node action.
    pub fn robot_action(&self, a: usize) -> usize {
        a % self.game.n_robot_actions()
    }

    /// Decision rule encoded by a baseline joint action.
    pub fn rule(&self, a: usize) -> Option<&DecisionRule> {
        match self.cfg.variant {
            PomcpVariant::Adapted => None,
            PomcpVariant::Baseline => Some(&self.rules[a / self.game.n_robot_actions()]),
        }
    }

    fn sample_state(&mut self, node: u32) -> Option<usize> {
        if self.history.is_empty() {
            return Some(sample_index(self.game.initial(), &mut self.rng));
        }
        let particles = &self.nodes[node as usize].particles;
        if particles.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..particles.len());
        Some(particles[i] as usize)
    }

    /// Runs the configured number of simulations and returns the best action.
    pub fn search(&mut self) -> Result<usize> {
        self.search_n(self.cfg.simulations)
    }

    pub fn search_n(&mut self, simulations: usize) -> Result<usize> {
        if self.stage >= self.game.horizon() {
            return Err(CirlError::InvalidArgument("the episode is already at the horizon".into()));
        }
        for _ in 0..simulations {
            let s = self.sample_state(self.root).ok_or(CirlError::ParticleDepletion { depth: self.stage })?;
            self.simulate(s, self.root, 0)?;
        }
        Ok(self.best_action())
    }

    /// Greedy root action: highest value among visited actions, lowest index on ties.
    pub fn best_action(&self) -> usize {
        let node = &self.nodes[self.root as usize];
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.n_actions {
            let e = &self.robot_edges[node.edges as usize + a];
            if e.n > 0 && e.v > best.1 {
                best = (a, e.v);
            }
        }
        best.0
    }

    /// `max_a V(h a)` at the root, if any action was tried.
    pub fn root_value(&self) -> Option<f64> {
        let node = &self.nodes[self.root as usize];
        (0..self.n_actions)
            .map(|a| self.robot_edges[node.edges as usize + a])
            .filter(|e| e.n > 0)
            .map(|e| e.v)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m| m.max(v))))
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[self.root as usize].n
    }

    /// `(N(h a), V(h a))` for every root action.
    pub fn root_action_stats(&self) -> Vec<(u32, f64)> {
        let node = &self.nodes[self.root as usize];
        (0..self.n_actions)
            .map(|a| {
                let e = self.robot_edges[node.edges as usize + a];
                (e.n, e.v)
            })
            .collect()
    }

    /// Per-human-action `(N_θ, V_θ)` below root action `a`.
    pub fn human_stats(&self, a: usize, theta: usize) -> Vec<(u32, f64)> {
        let n_h = self.game.n_human_actions();
        let edge = self.robot_edges[self.nodes[self.root as usize].edges as usize + a];
        if edge.human == NONE || self.cfg.variant == PomcpVariant::Baseline {
            return vec![(0, 0.0); n_h];
        }
        (0..n_h)
            .map(|h| {
                let i = (edge.human as usize + h) * self.game.n_theta() + theta;
                (self.theta_n[i], self.theta_v[i])
            })
            .collect()
    }

    /// Frequencies of θ among the root's particles.
    pub fn theta_histogram(&self) -> Vec<f64> {
        let mut hist = vec![0.0; self.game.n_theta()];
        let particles = &self.nodes[self.root as usize].particles;
        if particles.is_empty() && self.history.is_empty() {
            return Belief::new(self.game.initial().to_vec()).map(|b| b.theta_marginal(&self.game)).unwrap_or(hist);
        }
        for &s in particles {
            hist[self.game.theta_of(s as usize)] += 1.0;
        }
        let total: f64 = hist.iter().sum();
        if total > 0.0 {
            hist.iter_mut().for_each(|p| *p /= total);
        }
        hist
    }

    fn add_particle(&mut self, node: u32, s: usize) {
        let cap = self.cfg.max_particles;
        let n = &mut self.nodes[node as usize];
        n.seen += 1;
        if n.particles.len() < cap {
            n.particles.push(s as u32);
            self.particles_total += 1;
        } else {
            let j = self.rng.gen_range(0..n.seen);
            if (j as usize) < cap {
                let n = &mut self.nodes[node as usize];
                n.particles[j as usize] = s as u32;
            }
        }
    }

    fn select_action(&self, node: u32) -> usize {
        let n = &self.nodes[node as usize];
        let log_n = (n.n.max(1) as f64).ln();
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.n_actions {
            let e = &self.robot_edges[n.edges as usize + a];
            if e.n == 0 {
                return a;
            }
            let u = e.v + self.cfg.c * (log_n / e.n as f64).sqrt();
            if u > best.1 {
                best = (a, u);
            }
        }
        best.0
    }

    fn pick_human(&mut self, block: u32, a: usize, theta: usize) -> usize {
        match self.cfg.variant {
            PomcpVariant::Baseline => self.rules[a / self.game.n_robot_actions()].action(theta),
            PomcpVariant::Adapted => {
                let n_h = self.game.n_human_actions();
                let n_t = self.game.n_theta();
                let (mut vals, mut counts) = (vec![0.0; n_h], vec![0u32; n_h]);
                for h in 0..n_h {
                    let i = (block as usize + h) * n_t + theta;
                    vals[h] = self.theta_v[i];
                    counts[h] = self.theta_n[i];
                }
                let model = self.game.human_model().clone();
                sample_human_action(&model, self.game.human_wait(), &vals, &counts, self.cfg.c, &mut self.rng)
            }
        }
    }

    fn simulate(&mut self, s: usize, node: u32, depth: usize) -> Result<f64> {
        let stage = self.stage + depth;
        if stage >= self.game.horizon() {
            return Ok(self.game.reward(s));
        }
        if self.game.discount().powi(depth as i32) < self.cfg.epsilon_depth {
            return Ok(0.0);
        }
        let a = self.select_action(node);
        let edge = self.nodes[node as usize].edges as usize + a;
        let block = self.human_block(edge)?;
        let theta = self.game.theta_of(s);
        let h = self.pick_human(block, a, theta);
        let r = self.robot_action(a);
        let u: f64 = self.rng.gen();
        let next = self.game.sample_successor(s, h, r, u);
        let hi = block as usize + h;
        let child = self.human_edges[hi].child;
        let future = if child == NONE {
            
            if stage + 1 < self.game.horizon() {
                let id = self.new_node()?;
                self.human_edges[hi].child = id;
                self.rollout(next, depth + 1)
            } else {
                self.game.reward(next)
            }
        } else {
            self.simulate(next, child, depth + 1)?
        };
        let ret = self.game.reward(s) + self.game.discount() * future;

        self.add_particle(node, s);
        self.nodes[node as usize].n += 1;
        let e = &mut self.robot_edges[edge];
        e.n += 1;
        e.v += (ret - e.v) / e.n as f64;
        self.human_edges[hi].n += 1;
        if self.cfg.variant == PomcpVariant::Adapted {
            let i = hi * self.game.n_theta() + theta;
            self.theta_n[i] += 1;
            self.theta_v[i] += (ret - self.theta_v[i]) / self.theta_n[i] as f64;
        }
        Ok(ret)
    }

    fn rollout(&mut self, mut s: usize, mut depth: usize) -> f64 {
        let (n_h, n_r) = (self.game.n_human_actions(), self.game.n_robot_actions());
        let gamma = self.game.discount();
        let mut total = 0.0;
        let mut weight = 1.0;
        loop {
            if self.stage + depth >= self.game.horizon() {
                return total + weight * self.game.reward(s);
            }
            if gamma.powi(depth as i32) < self.cfg.epsilon_depth {
                return total;
            }
            let r = self.rng.gen_range(0..n_r);
            let h = self.rng.gen_range(0..n_h);
            let u: f64 = self.rng.gen();
            total += weight * self.game.reward(s);
            weight *= gamma;
            s = self.game.sample_successor(s, h, r, u);
            depth += 1;
        }
    }

    /// Human Q estimates `V_θ(h a a_H)` below root action `a` for the human's
    /// own decision; unvisited actions read as 0.
    pub fn human_estimates(&self, a: usize, theta: usize) -> Vec<f64> {
        self.human_stats(a, theta).into_iter().map(|(n, v)| if n == 0 { 0.0 } else { v }).collect()
    }

    /// Re-roots the tree on the realized `(a, a_H)`. Fails with particle
    /// depletion when the new root has no particles; [`Pomcp::rebuild`]
    /// recovers.
    pub fn advance(&mut self, a: usize, h: usize) -> Result<()> {
        if a >= self.n_actions || h >= self.game.n_human_actions() {
            return Err(CirlError::InvalidArgument("action out of range".into()));
        }
        let edge = self.nodes[self.root as usize].edges as usize + a;
        let block = self.human_block(edge)?;
        let hi = block as usize + h;
        if self.human_edges[hi].child == NONE {
            let id = self.new_node()?;
            self.human_edges[hi].child = id;
        }
        self.root = self.human_edges[hi].child;
        self.history.push((a, h));
        self.path.push(self.root);
        self.stage += 1;
        if self.stage < self.game.horizon() && self.nodes[self.root as usize].particles.is_empty() {
            return Err(CirlError::ParticleDepletion { depth: self.stage });
        }
        Ok(())
    }

    /// Refills the root's particles by rejection sampling: start states are
    /// drawn from `b0` and pushed through the realized history, keeping each
    /// step with the probability the tree's current estimates assign to the
    /// observed human action.
    pub fn rebuild(&mut self, target: usize, max_tries: usize) -> Result<()> {
        let n_h = self.game.n_human_actions();
        let n_t = self.game.n_theta();
        let model = self.game.human_model().clone();
        let mut accepted = 0;
        for _ in 0..max_tries {
            if accepted >= target {
                break;
            }
            let mut s = sample_index(self.game.initial(), &mut self.rng);
            let mut ok = true;
            for (step, &(a, h)) in self.history.clone().iter().enumerate() {
                let theta = self.game.theta_of(s);
                let likelihood = match self.cfg.variant {
                    PomcpVariant::Baseline => (self.rules[a / self.game.n_robot_actions()].action(theta) == h) as u8 as f64,
                    PomcpVariant::Adapted => {
                        let node = self.path[step];
                        let e = self.robot_edges[self.nodes[node as usize].edges as usize + a];
                        if e.human == NONE {
                            1.0 / n_h as f64
                        } else {
                            let q: Vec<f64> = (0..n_h)
                                .map(|k| {
                                    let i = (e.human as usize + k) * n_t + theta;
                                    if self.theta_n[i] == 0 { 0.0 } else { self.theta_v[i] }
                                })
                                .collect();
                            model.dist(&q, self.game.human_wait(), TieBreak::Uniform)[h]
                        }
                    }
                };
                if self.rng.gen::<f64>() >= likelihood {
                    ok = false;
                    break;
                }
                let u: f64 = self.rng.gen();
                s = self.game.sample_successor(s, h, self.robot_action(a), u);
            }
            if ok {
                let root = self.root;
                self.add_particle(root, s);
                accepted += 1;
            }
        }
        if accepted == 0 {
            return Err(CirlError::ParticleDepletion { depth: self.stage });
        }
        Ok(())
    }
}
