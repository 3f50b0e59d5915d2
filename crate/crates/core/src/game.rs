//! Tabular CIRL games, beliefs and the probabilistic machinery shared by all
//! solvers.
//!
//! Joint states `s = (x, θ)` are indexed as `θ * |X| + x`. Transition rows are
//! stored in compressed form and map joint states to joint states; the θ
//! component never changes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domains::GameSpec;
use crate::error::{CirlError, Result};
use crate::human::{HumanModel, TieBreak};

/// Tolerance on transition-row and initial-belief sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on belief sums.
pub const BELIEF_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorldState(pub usize);

/// Index into the game's reward parameters Θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RewardParam(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub x: WorldState,
    pub theta: RewardParam,
}

impl JointState {
    pub fn new(x: usize, theta: usize) -> Self {
        JointState { x: WorldState(x), theta: RewardParam(theta) }
    }
}

/// Labels and scalar parameters needed to tabulate a game.
#[derive(Clone, Debug)]
pub struct GameDescription {
    pub name: String,
    pub world_labels: Vec<String>,
    pub theta_labels: Vec<String>,
    pub human_actions: Vec<String>,
    pub robot_actions: Vec<String>,
    pub human_wait: Option<usize>,
    pub discount: f64,
    pub horizon: usize,
    /// Initial belief over joint states.
    pub initial: Vec<f64>,
    pub human_model: HumanModel,
}

#[derive(Debug)]
struct Tables {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    reward: Vec<f64>,
}

/// Shape of a game, used to check that a policy belongs to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameFingerprint {
    pub name: String,
    pub n_world: usize,
    pub n_theta: usize,
    pub n_human_actions: usize,
    pub n_robot_actions: usize,
    pub horizon: usize,
}

/// A finite CIRL game `⟨X, {A_H, A_R}, T, {Θ, r}, γ⟩` with horizon, initial
/// belief and human model. Immutable once built; cheap to clone.
#[derive(Clone, Debug)]
pub struct CirlGame {
    desc: Arc<GameDescription>,
    tables: Arc<Tables>,
    spec: Option<Arc<GameSpec>>,
}

impl CirlGame {
    /// Tabulates a game. `transition(x, θ, a_H, a_R)` returns the successor
    /// world-state distribution; `reward(x, θ)` the state reward.
    pub fn build<T, R>(desc: GameDescription, transition: T, reward: R) -> Result<Self>
    where
        T: Fn(usize, usize, usize, usize) -> Vec<(usize, f64)>,
        R: Fn(usize, usize) -> f64,
    {
        let n_world = desc.world_labels.len();
        let n_theta = desc.theta_labels.len();
        let n_h = desc.human_actions.len();
        let n_r = desc.robot_actions.len();
        if n_world == 0 || n_theta == 0 || n_h == 0 || n_r == 0 {
            return Err(CirlError::Validation("game needs at least one world state, reward parameter and action per agent".into()));
        }
        if !(desc.discount > 0.0 && desc.discount <= 1.0) {
            return Err(CirlError::Validation(format!("discount out of range: {}", desc.discount)));
        }
        if desc.horizon == 0 {
            return Err(CirlError::Validation("horizon must be positive".into()));
        }
        if let Some(w) = desc.human_wait {
            if w >= n_h {
                return Err(CirlError::Validation("wait action index out of range".into()));
            }
        }
        desc.human_model.validate()?;
        let n_states = n_world * n_theta;
        if n_states >= u32::MAX as usize {
            return Err(CirlError::resource("state table", n_states as u128, u32::MAX as u128));
        }
        if desc.initial.len() != n_states {
            return Err(CirlError::Validation(format!(
                "initial belief has length {} but the game has {} joint states",
                desc.initial.len(),
                n_states
            )));
        }
        check_distribution(&desc.initial, ROW_SUM_TOL, "initial belief")?;

        let rows = n_states * n_h * n_r;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::with_capacity(rows);
        let mut probs = Vec::with_capacity(rows);
        let mut rewards = Vec::with_capacity(n_states);
        offsets.push(0u32);
        for theta in 0..n_theta {
            for x in 0..n_world {
                let r = reward(x, theta);
                if !r.is_finite() {
                    return Err(CirlError::Validation(format!("reward at ({x}, {theta}) is not finite")));
                }
                rewards.push(r);
                for h in 0..n_h {
                    for a in 0..n_r {
                        let row = transition(x, theta, h, a);
                        let mut total = 0.0;
                        for (next, p) in row {
                            if next >= n_world || p.is_nan() || p < 0.0 {
                                return Err(CirlError::Validation(format!(
                                    "bad transition entry ({next}, {p}) from ({x}, {theta})"
                                )));
                            }
                            if p > 0.0 {
                                targets.push((theta * n_world + next) as u32);
                                probs.push(p);
                                total += p;
                            }
                        }
                        if (total - 1.0).abs() > ROW_SUM_TOL {
                            return Err(CirlError::Validation(format!(
                                "transition row from ({x}, {theta}) under ({h}, {a}) sums to {total}"
                            )));
                        }
                        if targets.len() >= u32::MAX as usize {
                            return Err(CirlError::resource("transition table", targets.len() as u128, u32::MAX as u128));
                        }
                        offsets.push(targets.len() as u32);
                    }
                }
            }
        }
        Ok(CirlGame {
            desc: Arc::new(desc),
            tables: Arc::new(Tables { offsets, targets, probs, reward: rewards }),
            spec: None,
        })
    }

    pub(crate) fn with_spec(mut self, spec: GameSpec) -> Self {
        self.spec = Some(Arc::new(spec));
        self
    }

    /// The spec this game was built from, if any.
    pub fn spec(&self) -> Option<&GameSpec> {
        self.spec.as_deref()
    }

    /// Same dynamics with a different human model.
    pub fn with_human_model(&self, model: HumanModel) -> Result<Self> {
        model.validate()?;
        let mut desc = (*self.desc).clone();
        desc.human_model = model.clone();
        let spec = self.spec.as_ref().map(|s| {
            let mut s = (**s).clone();
            s.human_model = model;
            Arc::new(s)
        });
        Ok(CirlGame { desc: Arc::new(desc), tables: Arc::clone(&self.tables), spec })
    }

    pub fn name(&self) -> &str {
        &self.desc.name
    }
    pub fn n_world(&self) -> usize {
        self.desc.world_labels.len()
    }
    pub fn n_theta(&self) -> usize {
        self.desc.theta_labels.len()
    }
    pub fn n_states(&self) -> usize {
        self.n_world() * self.n_theta()
    }
    pub fn n_human_actions(&self) -> usize {
        self.desc.human_actions.len()
    }
    pub fn n_robot_actions(&self) -> usize {
        self.desc.robot_actions.len()
    }
    pub fn discount(&self) -> f64 {
        self.desc.discount
    }
    pub fn horizon(&self) -> usize {
        self.desc.horizon
    }
    pub fn human_model(&self) -> &HumanModel {
        &self.desc.human_model
    }
    pub fn human_wait(&self) -> Option<usize> {
        self.desc.human_wait
    }
    pub fn initial(&self) -> &[f64] {
        &self.desc.initial
    }
    pub fn initial_belief(&self) -> Belief {
        Belief(self.desc.initial.clone())
    }
    pub fn world_label(&self, x: usize) -> &str {
        &self.desc.world_labels[x]
    }
    pub fn theta_label(&self, theta: usize) -> &str {
        &self.desc.theta_labels[theta]
    }
    pub fn theta_labels(&self) -> &[String] {
        &self.desc.theta_labels
    }
    pub fn human_action_label(&self, a: usize) -> &str {
        &self.desc.human_actions[a]
    }
    pub fn human_action_labels(&self) -> &[String] {
        &self.desc.human_actions
    }
    pub fn robot_action_label(&self, a: usize) -> &str {
        &self.desc.robot_actions[a]
    }
    pub fn robot_action_labels(&self) -> &[String] {
        &self.desc.robot_actions
    }

    pub fn fingerprint(&self) -> GameFingerprint {
        GameFingerprint {
            name: self.desc.name.clone(),
            n_world: self.n_world(),
            n_theta: self.n_theta(),
            n_human_actions: self.n_human_actions(),
            n_robot_actions: self.n_robot_actions(),
            horizon: self.horizon(),
        }
    }

    #[inline]
    pub fn reward(&self, s: usize) -> f64 {
        self.tables.reward[s]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.tables.reward
    }

    #[inline]
    pub fn theta_of(&self, s: usize) -> usize {
        s / self.n_world()
    }

    #[inline]
    pub fn world_of(&self, s: usize) -> usize {
        s % self.n_world()
    }

    pub fn state_index(&self, state: JointState) -> usize {
        state.theta.0 * self.n_world() + state.x.0
    }

    pub fn joint_state(&self, s: usize) -> JointState {
        JointState::new(self.world_of(s), self.theta_of(s))
    }

    /// Successor joint states and probabilities for `(s, a_H, a_R)`.
    #[inline]
    pub fn row(&self, s: usize, h: usize, r: usize) -> (&[u32], &[f64]) {
        let i = (s * self.n_human_actions() + h) * self.n_robot_actions() + r;
        let t = &self.tables;
        let (a, b) = (t.offsets[i] as usize, t.offsets[i + 1] as usize);
        (&t.targets[a..b], &t.probs[a..b])
    }

    /// `Σ_{s'} T(s, a_H, a_R, s') · v(s')`.
    #[inline]
    pub fn expect(&self, s: usize, h: usize, r: usize, v: &[f64]) -> f64 {
        let (targets, probs) = self.row(s, h, r);
        targets.iter().zip(probs).map(|(&t, &p)| p * v[t as usize]).sum()
    }

    /// The transition row as a distribution over world states.
    pub fn transition_dist(&self, state: JointState, h: usize, r: usize) -> Result<Vec<(WorldState, f64)>> {
        if state.x.0 >= self.n_world() || state.theta.0 >= self.n_theta() {
            return Err(CirlError::InvalidArgument(format!("state {state:?} out of range")));
        }
        self.check_actions(h, r)?;
        let (targets, probs) = self.row(self.state_index(state), h, r);
        Ok(targets
            .iter()
            .zip(probs)
            .map(|(&t, &p)| (WorldState(self.world_of(t as usize)), p))
            .collect())
    }

    pub fn check_actions(&self, h: usize, r: usize) -> Result<()> {
        if h >= self.n_human_actions() {
            return Err(CirlError::InvalidArgument(format!("human action {h} out of range")));
        }
        if r >= self.n_robot_actions() {
            return Err(CirlError::InvalidArgument(format!("robot action {r} out of range")));
        }
        Ok(())
    }

    /// Samples a successor of `s` using a uniform draw `u ∈ [0, 1)`.
    pub fn sample_successor(&self, s: usize, h: usize, r: usize, u: f64) -> usize {
        let (targets, probs) = self.row(s, h, r);
        let mut acc = 0.0;
        for (&t, &p) in targets.iter().zip(probs) {
            acc += p;
            if u < acc {
                return t as usize;
            }
        }
        *targets.last().expect("transition rows are nonempty") as usize
    }

    /// Human Q-values at `s` when the robot plays `r` and continues with
    /// `children[a_H]` after observing `a_H`.
    pub fn human_q_values_into(&self, s: usize, r: usize, children: &[&[f64]], out: &mut [f64]) {
        for (h, q) in out.iter_mut().enumerate() {
            *q = self.expect(s, h, r, children[h]);
        }
    }

    /// Distribution of the human's action at `s` under the game's human model.
    pub fn human_policy_into(&self, s: usize, r: usize, children: &[&[f64]], ties: TieBreak, q: &mut [f64], out: &mut [f64]) {
        self.human_q_values_into(s, r, children, q);
        self.desc.human_model.dist_into(q, self.desc.human_wait, ties, out);
    }
}

fn check_distribution(p: &[f64], tol: f64, what: &str) -> Result<()> {
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(CirlError::Validation(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(CirlError::Validation(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// A probability distribution over joint states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_distribution(&p, BELIEF_SUM_TOL, "belief")?;
        Ok(Belief(p))
    }

    pub fn point(n_states: usize, s: usize) -> Self {
        let mut p = vec![0.0; n_states];
        p[s] = 1.0;
        Belief(p)
    }

    /// Uniform over the given joint states.
    pub fn uniform_over(n_states: usize, states: &[usize]) -> Self {
        let mut p = vec![0.0; n_states];
        for &s in states {
            p[s] = 1.0 / states.len() as f64;
        }
        Belief(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Indices with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s, &p)| (s, p))
    }

    pub fn theta_marginal(&self, game: &CirlGame) -> Vec<f64> {
        let mut m = vec![0.0; game.n_theta()];
        for (s, p) in self.support() {
            m[game.theta_of(s)] += p;
        }
        m
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.support().map(|(_, p)| p * p.ln()).sum::<f64>()
    }
}

/// `V_σ(b) = b · α_σ`.
pub fn value_at_belief(alpha: &[f64], b: &Belief) -> Result<f64> {
    if alpha.len() != b.len() {
        return Err(CirlError::InvalidArgument(format!(
            "alpha-vector length {} does not match belief length {}",
            alpha.len(),
            b.len()
        )));
    }
    Ok(dot_belief(alpha, b))
}

#[inline]
pub(crate) fn dot_belief(alpha: &[f64], b: &Belief) -> f64 {
    b.0.iter().zip(alpha).filter(|(p, _)| **p > 0.0).map(|(p, a)| p * a).sum()
}

/// Posterior after the robot plays `r` and observes the human play `h`, with
/// `likelihood(s)` giving `P(h | s)`.
///
/// `b'(s') ∝ Σ_s T(s, h, r, s') · P(h | s) · b(s)`.
pub fn belief_update_with<L>(game: &CirlGame, b: &Belief, r: usize, h: usize, mut likelihood: L) -> Result<Belief>
where
    L: FnMut(usize) -> f64,
{
    if b.len() != game.n_states() {
        return Err(CirlError::InvalidArgument("belief length does not match game".into()));
    }
    game.check_actions(h, r)?;
    let mut next = vec![0.0; game.n_states()];
    let mut total = 0.0;
    for (s, p) in b.support() {
        let w = p * likelihood(s);
        if w <= 0.0 {
            continue;
        }
        let (targets, probs) = game.row(s, h, r);
        for (&t, &q) in targets.iter().zip(probs) {
            next[t as usize] += w * q;
            total += w * q;
        }
    }
    if total.is_nan() || total <= 0.0 {
        return Err(CirlError::InconsistentObservation { action: h });
    }
    for v in next.iter_mut() {
        *v /= total;
    }
    Ok(Belief(next))
}

/// Posterior under the game's human model, where the human's Q-values come
/// from the robot's continuation plans `children[a_H]` (one α-vector per
/// human action). Ties break by lowest index, matching the exact solvers.
pub fn belief_update(game: &CirlGame, b: &Belief, r: usize, h: usize, children: &[&[f64]]) -> Result<Belief> {
    belief_update_ties(game, b, r, h, children, TieBreak::LowestIndex)
}

pub fn belief_update_ties(
    game: &CirlGame,
    b: &Belief,
    r: usize,
    h: usize,
    children: &[&[f64]],
    ties: TieBreak,
) -> Result<Belief> {
    if children.len() != game.n_human_actions() || children.iter().any(|c| c.len() != game.n_states()) {
        return Err(CirlError::InvalidArgument("one continuation alpha-vector per human action is required".into()));
    }
    game.check_actions(h, r)?;
    let n_h = game.n_human_actions();
    let mut q = vec![0.0; n_h];
    let mut pi = vec![0.0; n_h];
    belief_update_with(game, b, r, h, |s| {
        game.human_policy_into(s, r, children, ties, &mut q, &mut pi);
        pi[h]
    })
}

/// A human decision rule `δ: Θ → A_H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionRule(pub Vec<usize>);

impl DecisionRule {
    /// The `index`-th rule in lexicographic order (θ₀ most significant).
    pub fn from_index(mut index: u128, n_human: usize, n_theta: usize) -> Self {
        let mut rule = vec![0; n_theta];
        for slot in rule.iter_mut().rev() {
            *slot = (index % n_human as u128) as usize;
            index /= n_human as u128;
        }
        DecisionRule(rule)
    }

    pub fn action(&self, theta: usize) -> usize {
        self.0[theta]
    }
}

/// Default cap on the number of enumerated decision rules.
pub const DECISION_RULE_CAP: u128 = 1_000_000;

/// `|A_H|^|Θ|`, or `None` on overflow.
pub fn decision_rule_count(n_human: usize, n_theta: usize) -> Option<u128> {
    (n_human as u128).checked_pow(n_theta as u32)
}

/// All `|A_H|^|Θ|` decision rules in lexicographic order.
pub fn enumerate_decision_rules(game: &CirlGame, cap: u128) -> Result<Vec<DecisionRule>> {
    let (n_h, n_t) = (game.n_human_actions(), game.n_theta());
    let count = decision_rule_count(n_h, n_t).unwrap_or(u128::MAX);
    if count > cap {
        return Err(CirlError::resource("decision rule", count, cap));
    }
    Ok((0..count).map(|i| DecisionRule::from_index(i, n_h, n_t)).collect())
}
