//! Solvers for cooperative inverse reinforcement learning (CIRL) games.
//!
//! A CIRL game is a two-player common-payoff game in which only the human
//! knows the reward parameter θ. This crate provides tabular games, the
//! ChefWorld and RockSample domains, exact value iteration, PBVI and POMCP
//! (each with the modified Bellman update and with the reduced-POMDP
//! baseline), an IRL baseline, and evaluation utilities.

pub mod domains;
pub mod error;
pub mod eval;
pub mod exact;
pub mod game;
pub mod human;
pub mod irl;
pub mod par;
pub mod pbvi;
pub mod plan;
pub mod policy_file;
pub mod pomcp;

pub use error::{CirlError, Result};
pub use game::{Belief, CirlGame, DecisionRule, JointState, RewardParam, WorldState};
pub use human::{HumanModel, TieBreak};
pub use plan::{ActionKind, ConditionalPlan, PlanCursor, PlanNode, PolicyGraph};
