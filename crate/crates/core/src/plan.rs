//! Conditional plans stored as a stage-indexed graph of α-vectors.

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::{Belief, CirlGame, DecisionRule};
use crate::human::{HumanModel, TieBreak};

/// What a plan node's `action` field encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// A robot action; the human responds through her model.
    Robot,
    /// A joint action `δ · |A_R| + a_R` of the reduced POMDP.
    Joint,
}

/// One plan `σ = (a, v)` together with its α-vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub action: usize,
    /// `v(a_H)`: index of the continuation plan in the next stage, per human action.
    pub children: Vec<u32>,
    pub alpha: Vec<f64>,
}

/// Plans for every stage `0..=T`. Stage `T` holds the single leaf plan whose
/// α-vector is the state reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyGraph {
    pub action_kind: ActionKind,
    /// The human model the plan was optimized against.
    pub training_model: HumanModel,
    pub stages: Vec<Vec<PlanNode>>,
    pub root: usize,
    pub value: f64,
}

/// A materialized plan tree, mainly for display and tests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalPlan {
    pub action: usize,
    pub depth: usize,
    pub children: Vec<ConditionalPlan>,
}

/// Where a running plan currently is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCursor {
    pub stage: usize,
    pub node: usize,
}

impl PolicyGraph {
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn node(&self, cursor: PlanCursor) -> &PlanNode {
        &self.stages[cursor.stage][cursor.node]
    }

    pub fn root_cursor(&self) -> PlanCursor {
        PlanCursor { stage: 0, node: self.root }
    }

    pub fn is_leaf(&self, cursor: PlanCursor) -> bool {
        cursor.stage >= self.horizon()
    }

    /// Robot action taken at `cursor`.
    pub fn robot_action(&self, game: &CirlGame, cursor: PlanCursor) -> usize {
        let a = self.node(cursor).action;
        match self.action_kind {
            ActionKind::Robot => a,
            ActionKind::Joint => a % game.n_robot_actions(),
        }
    }

    /// The decision rule embedded in a joint action, if any.
    pub fn joint_rule(&self, game: &CirlGame, cursor: PlanCursor) -> Option<DecisionRule> {
        match self.action_kind {
            ActionKind::Robot => None,
            ActionKind::Joint => {
                let delta = self.node(cursor).action / game.n_robot_actions();
                Some(DecisionRule::from_index(delta as u128, game.n_human_actions(), game.n_theta()))
            }
        }
    }

    /// Cursor after the human plays `h`.
    pub fn advance(&self, cursor: PlanCursor, h: usize) -> PlanCursor {
        let node = self.node(cursor);
        PlanCursor { stage: cursor.stage + 1, node: node.children[h] as usize }
    }

    /// α-vectors of the continuation plans at `cursor`, indexed by human action.
    pub fn child_alphas(&self, cursor: PlanCursor) -> Vec<&[f64]> {
        let next = &self.stages[cursor.stage + 1];
        self.node(cursor).children.iter().map(|&c| next[c as usize].alpha.as_slice()).collect()
    }

    /// Human Q-values at joint state `s` for the plan at `cursor`.
    pub fn human_q_values(&self, game: &CirlGame, cursor: PlanCursor, s: usize) -> Vec<f64> {
        let children = self.child_alphas(cursor);
        let r = self.robot_action(game, cursor);
        let mut q = vec![0.0; game.n_human_actions()];
        game.human_q_values_into(s, r, &children, &mut q);
        q
    }

    /// The human's best response to this plan at world state `x` for every θ,
    /// lowest index on ties. For joint plans this is the embedded rule.
    pub fn human_rule(&self, game: &CirlGame, cursor: PlanCursor, x: usize) -> DecisionRule {
        if let Some(rule) = self.joint_rule(game, cursor) {
            return rule;
        }
        let rule = (0..game.n_theta())
            .map(|theta| {
                let q = self.human_q_values(game, cursor, theta * game.n_world() + x);
                let d = HumanModel::Rational.dist(&q, game.human_wait(), TieBreak::LowestIndex);
                d.iter().position(|&p| p > 0.5).unwrap_or(0)
            })
            .collect();
        DecisionRule(rule)
    }

    /// Value of the root plan at a belief.
    pub fn value_at(&self, b: &Belief) -> f64 {
        crate::game::dot_belief(&self.stages[0][self.root].alpha, b)
    }

    /// Expands the graph below `cursor` into a tree. Fails when the tree would
    /// have more than `cap` nodes.
    pub fn to_tree(&self, cursor: PlanCursor, cap: u128) -> Result<ConditionalPlan> {
        let depth = self.horizon() - cursor.stage;
        let branching = self.node(cursor).children.len().max(1) as u128;
        let mut size: u128 = 0;
        let mut level: u128 = 1;
        for _ in 0..=depth {
            size = size.saturating_add(level);
            level = level.saturating_mul(branching);
        }
        if size > cap {
            return Err(CirlError::resource("plan tree", size, cap));
        }
        Ok(self.tree_rec(cursor))
    }

    fn tree_rec(&self, cursor: PlanCursor) -> ConditionalPlan {
        let depth = self.horizon() - cursor.stage;
        let node = self.node(cursor);
        let children = if depth == 0 {
            Vec::new()
        } else {
            (0..node.children.len()).map(|h| self.tree_rec(self.advance(cursor, h))).collect()
        };
        ConditionalPlan { action: node.action, depth, children }
    }

    /// Checks structural consistency against a game.
    pub fn validate(&self, game: &CirlGame) -> Result<()> {
        let bad = |m: &str| Err(CirlError::Validation(format!("policy does not fit game: {m}")));
        if self.stages.len() != game.horizon() + 1 {
            return bad("horizon mismatch");
        }
        if self.stages.iter().any(|s| s.is_empty()) || self.root >= self.stages[0].len() {
            return bad("empty stage or bad root");
        }
        let n_actions = match self.action_kind {
            ActionKind::Robot => game.n_robot_actions() as u128,
            ActionKind::Joint => {
                crate::game::decision_rule_count(game.n_human_actions(), game.n_theta()).unwrap_or(u128::MAX)
                    * game.n_robot_actions() as u128
            }
        };
        for (t, stage) in self.stages.iter().enumerate() {
            for node in stage {
                if node.alpha.len() != game.n_states() || node.alpha.iter().any(|v| !v.is_finite()) {
                    return bad("alpha-vector length or entries");
                }
                if t < game.horizon() {
                    if node.action as u128 >= n_actions {
                        return bad("action index out of range");
                    }
                    if node.children.len() != game.n_human_actions()
                        || node.children.iter().any(|&c| c as usize >= self.stages[t + 1].len())
                    {
                        return bad("children do not cover the human actions");
                    }
                }
            }
        }
        Ok(())
    }
}
