//! Exact finite-horizon value iteration over conditional plans.
//!
//! Three backups share one engine:
//! - [`BackupKind::Modified`]: robot actions only; the human's response is
//!   computed from her Q-values under each candidate plan.
//! - [`BackupKind::Reduced`]: joint actions `(δ, a_R)` of the reduced POMDP
//!   with the human following `δ`.
//! - [`BackupKind::FixedHuman`]: robot actions with a plan-independent human
//!   policy folded into the dynamics.
//!
//! Candidates `σ = (a, v)` are enumerated lazily in lexicographic order
//! (action, then `v(a_H)` for `a_H = 0, 1, …`), deduplicated, and pruned by
//! pointwise dominance. α-vectors are only evaluated on the joint states
//! reachable at their stage; other entries are zero.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::{decision_rule_count, Belief, CirlGame, DecisionRule, JointState, DECISION_RULE_CAP};
use crate::human::{HumanModel, TieBreak};
use crate::par;
use crate::plan::{ActionKind, PlanNode, PolicyGraph};

/// Tolerance for dominance and tie comparisons between α-values.
pub const PRUNE_TOL: f64 = 1e-12;

const CHUNK: u128 = 1 << 15;
const MAX_TABLE_ENTRIES: usize = 1 << 28;

/// Resource limits for exact solving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Memory the candidate plans of one backup may occupy if materialized.
    pub byte_budget: u64,
    /// Overrides the cap derived from `byte_budget`.
    pub candidate_cap: Option<u128>,
    /// Evaluate α-vectors only on stage-reachable states.
    pub restrict_to_reachable: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig { byte_budget: DEFAULT_BYTE_BUDGET, candidate_cap: None, restrict_to_reachable: true }
    }
}

/// 16 GiB.
pub const DEFAULT_BYTE_BUDGET: u64 = 16 << 30;

impl ExactConfig {
    /// Bytes one materialized candidate would take: a dense α-vector, the
    /// action and one child index per human action.
    pub fn bytes_per_candidate(game: &CirlGame) -> u64 {
        8 * game.n_states() as u64 + 8 + 4 * game.n_human_actions() as u64
    }

    pub fn candidate_cap(&self, game: &CirlGame) -> u128 {
        self.candidate_cap
            .unwrap_or_else(|| (self.byte_budget / Self::bytes_per_candidate(game)) as u128)
    }
}

/// Per-stage human policy `π(a_H | s)` used by [`BackupKind::FixedHuman`],
/// laid out as `[stage][s * |A_H| + a_H]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageHumanPolicy {
    pub probs: Vec<Vec<f64>>,
}

impl StageHumanPolicy {
    pub fn dist(&self, stage: usize, s: usize, n_human: usize) -> &[f64] {
        &self.probs[stage][s * n_human..(s + 1) * n_human]
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BackupKind<'a> {
    Modified,
    Reduced,
    FixedHuman(&'a StageHumanPolicy),
}

/// Instrumentation for one backup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: usize,
    pub actions: u128,
    pub children: usize,
    /// Candidate plans generated: `actions · children^|A_H|`.
    pub candidates: u128,
    pub distinct: usize,
    pub kept: usize,
    pub reachable_states: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub policy: PolicyGraph,
    pub value: f64,
    pub stats: Vec<StageStats>,
    pub elapsed: Duration,
}

impl ExactSolution {
    pub fn total_candidates(&self) -> u128 {
        self.stats.iter().map(|s| s.candidates).sum()
    }
}

/// `|A| · |Γ|^|A_H|`, saturating.
pub fn candidate_count(n_actions: u128, n_children: usize, n_human: usize) -> u128 {
    (n_children as u128)
        .checked_pow(n_human as u32)
        .and_then(|c| c.checked_mul(n_actions))
        .unwrap_or(u128::MAX)
}

/// Number of actions a backup of this kind ranges over.
pub fn action_count(game: &CirlGame, kind: BackupKind<'_>) -> u128 {
    match kind {
        BackupKind::Reduced => decision_rule_count(game.n_human_actions(), game.n_theta())
            .and_then(|d| d.checked_mul(game.n_robot_actions() as u128))
            .unwrap_or(u128::MAX),
        _ => game.n_robot_actions() as u128,
    }
}

/// Human Q-values `Q_H(s, a_H, σ) = Σ_{s'} T(s, a_H, a_R, s') α_{v(a_H)}(s')`.
pub fn human_q_values(game: &CirlGame, s: JointState, r: usize, children: &[&[f64]]) -> Result<Vec<f64>> {
    check_children(game, children)?;
    game.check_actions(0, r)?;
    let mut q = vec![0.0; game.n_human_actions()];
    game.human_q_values_into(game.state_index(s), r, children, &mut q);
    Ok(q)
}

/// α-vector of the plan `(a_R, v)` under the modified update with the game's
/// human model: `α(s) = R(s) + γ Σ_{a_H} π_H(a_H | Q_H) Q_H(s, a_H)`.
pub fn backup_alpha(game: &CirlGame, r: usize, children: &[&[f64]]) -> Result<Vec<f64>> {
    check_children(game, children)?;
    game.check_actions(0, r)?;
    let n_h = game.n_human_actions();
    let (mut q, mut pi) = (vec![0.0; n_h], vec![0.0; n_h]);
    Ok((0..game.n_states())
        .map(|s| {
            game.human_policy_into(s, r, children, TieBreak::LowestIndex, &mut q, &mut pi);
            game.reward(s) + game.discount() * dot(&pi, &q)
        })
        .collect())
}

fn check_children(game: &CirlGame, children: &[&[f64]]) -> Result<()> {
    if children.len() != game.n_human_actions() || children.iter().any(|c| c.len() != game.n_states()) {
        return Err(CirlError::InvalidArgument(
            "one child alpha-vector of full length is required per human action".into(),
        ));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the vectors that survive duplicate and pointwise-dominance
/// pruning, in increasing order. Among equal vectors the first survives.
pub fn prune(vectors: &[Vec<f64>]) -> Vec<usize> {
    let rows: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    prune_rows(&rows)
}

fn prune_rows(rows: &[&[f64]]) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (r.iter().sum(), i)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<usize> = Vec::new();
    for &(_, i) in &order {
        let v = rows[i];
        let dominated = kept
            .iter()
            .any(|&k| rows[k].iter().zip(v).all(|(a, b)| *a >= *b - PRUNE_TOL));
        if !dominated {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Joint states reachable at each stage `0..=T` from the initial belief.
pub fn reachable_states(game: &CirlGame) -> Vec<Vec<usize>> {
    let n = game.n_states();
    let mut current: Vec<usize> = (0..n).filter(|&s| game.initial()[s] > 0.0).collect();
    let mut out = Vec::with_capacity(game.horizon() + 1);
    for _ in 0..game.horizon() {
        let mut mark = vec![false; n];
        for &s in &current {
            for h in 0..game.n_human_actions() {
                for r in 0..game.n_robot_actions() {
                    for &t in game.row(s, h, r).0 {
                        mark[t as usize] = true;
                    }
                }
            }
        }
        let next = (0..n).filter(|&s| mark[s]).collect();
        out.push(std::mem::replace(&mut current, next));
    }
    out.push(current);
    out
}

/// Output of one backup: the pruned stage plus instrumentation.
#[derive(Clone, Debug)]
pub struct StageResult {
    pub nodes: Vec<PlanNode>,
    /// Candidate indices of the kept plans.
    pub indices: Vec<u128>,
    pub stats: StageStats,
}

struct Evaluator<'a> {
    game: &'a CirlGame,
    kind: BackupKind<'a>,
    stage: usize,
    reach: &'a [usize],
    n_h: usize,
    n_r: usize,
    g: usize,
    /// `E[((a_R · |reach| + i) · |A_H| + a_H) · g + j]`.
    table: Vec<f64>,
    rules: Vec<DecisionRule>,
    model: HumanModel,
}

impl<'a> Evaluator<'a> {
    fn new(game: &'a CirlGame, kind: BackupKind<'a>, stage: usize, reach: &'a [usize], children: &[&[f64]]) -> Result<Self> {
        let (n_h, n_r, g) = (game.n_human_actions(), game.n_robot_actions(), children.len());
        let size = n_r * reach.len() * n_h * g;
        if size > MAX_TABLE_ENTRIES {
            return Err(CirlError::resource("backup table", size as u128, MAX_TABLE_ENTRIES as u128));
        }
        let blocks = par::map_range(n_r * reach.len(), |block| {
            let (r, i) = (block / reach.len(), block % reach.len());
            let s = reach[i];
            let mut out = Vec::with_capacity(n_h * g);
            for h in 0..n_h {
                for child in children {
                    out.push(game.expect(s, h, r, child));
                }
            }
            out
        });
        let rules = match kind {
            BackupKind::Reduced => {
                let count = decision_rule_count(n_h, game.n_theta()).unwrap_or(u128::MAX);
                if count > DECISION_RULE_CAP {
                    return Err(CirlError::resource("decision rule", count, DECISION_RULE_CAP));
                }
                (0..count).map(|i| DecisionRule::from_index(i, n_h, game.n_theta())).collect()
            }
            _ => Vec::new(),
        };
        Ok(Evaluator {
            game,
            kind,
            stage,
            reach,
            n_h,
            n_r,
            g,
            table: blocks.concat(),
            rules,
            model: game.human_model().clone(),
        })
    }

    #[inline]
    fn entry(&self, r: usize, i: usize, h: usize, child: u32) -> f64 {
        self.table[((r * self.reach.len() + i) * self.n_h + h) * self.g + child as usize]
    }

    /// Values on the reachable states for candidate `(a, v)`.
    fn eval(&self, a: usize, v: &[u32], q: &mut [f64], pi: &mut [f64], out: &mut [f64]) {
        let gamma = self.game.discount();
        let wait = self.game.human_wait();
        match self.kind {
            BackupKind::Modified => {
                let rational = self.model.is_rational();
                for (i, &s) in self.reach.iter().enumerate() {
                    for h in 0..self.n_h {
                        q[h] = self.entry(a, i, h, v[h]);
                    }
                    let cont = if rational {
                        q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        self.model.dist_into(q, wait, TieBreak::LowestIndex, pi);
                        dot(pi, q)
                    };
                    out[i] = self.game.reward(s) + gamma * cont;
                }
            }
            BackupKind::Reduced => {
                let (r, rule) = (a % self.n_r, &self.rules[a / self.n_r]);
                for (i, &s) in self.reach.iter().enumerate() {
                    let h = rule.action(self.game.theta_of(s));
                    out[i] = self.game.reward(s) + gamma * self.entry(r, i, h, v[h]);
                }
            }
            BackupKind::FixedHuman(policy) => {
                for (i, &s) in self.reach.iter().enumerate() {
                    let dist = policy.dist(self.stage, s, self.n_h);
                    let cont: f64 = (0..self.n_h).map(|h| dist[h] * self.entry(a, i, h, v[h])).sum();
                    out[i] = self.game.reward(s) + gamma * cont;
                }
            }
        }
    }
}

/// Decodes candidate `index` into its action and child digits.
fn decode_candidate(mut index: u128, g: usize, v: &mut [u32]) -> usize {
    for d in v.iter_mut().rev() {
        *d = (index % g as u128) as u32;
        index /= g as u128;
    }
    index as usize
}

/// Advances `(a, v)` to the next candidate in lexicographic order.
#[inline]
fn next_candidate(a: &mut usize, v: &mut [u32], g: usize) {
    for d in v.iter_mut().rev() {
        *d += 1;
        if (*d as usize) < g {
            return;
        }
        *d = 0;
    }
    *a += 1;
}

type ChunkOut = Vec<(Box<[u64]>, u128)>;

/// Runs one backup producing stage `stage` plans from the continuation plans
/// `children` (stage `stage + 1`).
pub fn backup_stage(
    game: &CirlGame,
    kind: BackupKind<'_>,
    stage: usize,
    reach: &[usize],
    children: &[&[f64]],
    cfg: &ExactConfig,
) -> Result<StageResult> {
    let start = Instant::now();
    let n_h = game.n_human_actions();
    let g = children.len();
    let n_actions = action_count(game, kind);
    let total = candidate_count(n_actions, g, n_h);
    let cap = cfg.candidate_cap(game);
    if total > cap {
        return Err(CirlError::resource("plan", total, cap));
    }
    let eval = Evaluator::new(game, kind, stage, reach, children)?;
    let dims = reach.len();
    let n_chunks = total.div_ceil(CHUNK);
    let batch = (4 * par::threads()).max(1) as u128;

    let mut seen: HashMap<Box<[u64]>, usize> = HashMap::new();
    let mut distinct: Vec<(Box<[u64]>, u128)> = Vec::new();
    let distinct_cap = (cfg.byte_budget / (8 * dims.max(1) as u64 + 48)) as usize;
    let mut lo = 0u128;
    while lo < n_chunks {
        let hi = (lo + batch).min(n_chunks);
        let outs: Vec<ChunkOut> = par::map_range((hi - lo) as usize, |c| {
            let first = (lo + c as u128) * CHUNK;
            let last = (first + CHUNK).min(total);
            let mut v = vec![0u32; n_h];
            let mut a = decode_candidate(first, g, &mut v);
            let (mut q, mut pi, mut vals) = (vec![0.0; n_h], vec![0.0; n_h], vec![0.0; dims]);
            let mut local: HashMap<Box<[u64]>, ()> = HashMap::new();
            let mut out = Vec::new();
            for index in first..last {
                eval.eval(a, &v, &mut q, &mut pi, &mut vals);
                let key: Box<[u64]> = vals.iter().map(|x| (x + 0.0).to_bits()).collect();
                if !local.contains_key(&key) {
                    local.insert(key.clone(), ());
                    out.push((key, index));
                }
                next_candidate(&mut a, &mut v, g);
            }
            out
        });
        for out in outs {
            for (key, index) in out {
                if !seen.contains_key(&key) {
                    seen.insert(key.clone(), distinct.len());
                    distinct.push((key, index));
                }
            }
        }
        if distinct.len() > distinct_cap {
            return Err(CirlError::resource("distinct plan", distinct.len() as u128, distinct_cap as u128));
        }
        lo = hi;
    }
    drop(seen);

    let values: Vec<Vec<f64>> = distinct.iter().map(|(k, _)| k.iter().map(|b| f64::from_bits(*b)).collect()).collect();
    let kept = prune(&values);
    let mut nodes = Vec::with_capacity(kept.len());
    let mut indices = Vec::with_capacity(kept.len());
    for &k in &kept {
        let index = distinct[k].1;
        let mut v = vec![0u32; n_h];
        let action = decode_candidate(index, g, &mut v);
        let mut alpha = vec![0.0; game.n_states()];
        for (i, &s) in reach.iter().enumerate() {
            alpha[s] = values[k][i];
        }
        nodes.push(PlanNode { action, children: v, alpha });
        indices.push(index);
    }
    let stats = StageStats {
        stage,
        actions: n_actions,
        children: g,
        candidates: total,
        distinct: distinct.len(),
        kept: nodes.len(),
        reachable_states: dims,
        elapsed: start.elapsed(),
    };
    Ok(StageResult { nodes, indices, stats })
}

/// Full backward induction from the leaf stage with the given backup.
pub fn solve_with(game: &CirlGame, kind: BackupKind<'_>, cfg: &ExactConfig) -> Result<ExactSolution> {
    let start = Instant::now();
    let horizon = game.horizon();
    let reach: Vec<Vec<usize>> = if cfg.restrict_to_reachable {
        reachable_states(game)
    } else {
        vec![(0..game.n_states()).collect(); horizon + 1]
    };
    let leaf = PlanNode { action: 0, children: Vec::new(), alpha: game.rewards().to_vec() };
    let mut stages: Vec<Vec<PlanNode>> = vec![Vec::new(); horizon + 1];
    stages[horizon] = vec![leaf];
    let mut stats = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let children: Vec<&[f64]> = stages[t + 1].iter().map(|n| n.alpha.as_slice()).collect();
        let result = backup_stage(game, kind, t, &reach[t], &children, cfg)?;
        stats.push(result.stats);
        stages[t] = result.nodes;
    }
    stats.reverse();
    let b0 = game.initial_belief();
    let (root, value) = best_at(&stages[0], &b0);
    let action_kind = match kind {
        BackupKind::Reduced => ActionKind::Joint,
        _ => ActionKind::Robot,
    };
    let training_model = match kind {
        BackupKind::Modified => game.human_model().clone(),
        _ => HumanModel::Rational,
    };
    Ok(ExactSolution {
        policy: PolicyGraph { action_kind, training_model, stages, root, value },
        value,
        stats,
        elapsed: start.elapsed(),
    })
}

/// Index and value of the first plan maximizing `α · b`.
pub fn best_at(nodes: &[PlanNode], b: &Belief) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, node) in nodes.iter().enumerate() {
        let v = crate::game::dot_belief(&node.alpha, b);
        if v > best.1 + PRUNE_TOL {
            best = (i, v);
        }
    }
    best
}

/// Adapted value iteration with the modified Bellman update under the game's
/// human model.
pub fn adapted_value_iteration(game: &CirlGame, cfg: &ExactConfig) -> Result<ExactSolution> {
    solve_with(game, BackupKind::Modified, cfg)
}

/// Standard value iteration on the reduced POMDP with decision-rule actions.
/// Requires a rational human model.
pub fn reduced_pomdp_vi(game: &CirlGame, cfg: &ExactConfig) -> Result<ExactSolution> {
    if !game.human_model().is_rational() {
        return Err(CirlError::InvalidArgument(
            "the reduced POMDP assumes a rational human; use the adapted solver for other models".into(),
        ));
    }
    solve_with(game, BackupKind::Reduced, cfg)
}

/// Value iteration with a fixed, plan-independent human policy.
pub fn fixed_human_vi(game: &CirlGame, policy: &StageHumanPolicy, cfg: &ExactConfig) -> Result<ExactSolution> {
    if policy.probs.len() < game.horizon()
        || policy.probs.iter().any(|p| p.len() != game.n_states() * game.n_human_actions())
    {
        return Err(CirlError::InvalidArgument("human policy does not match the game".into()));
    }
    solve_with(game, BackupKind::FixedHuman(policy), cfg)
}
