//! Versioned JSON envelope for solved policies.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domains::GameSpec;
use crate::error::{CirlError, Result};
use crate::eval::{RobotPolicy, SolverKind};
use crate::exact::StageHumanPolicy;
use crate::game::{CirlGame, GameFingerprint};
use crate::plan::PolicyGraph;
use crate::pomcp::PomcpConfig;

pub const POLICY_SCHEMA_VERSION: u64 = 1;

/// What the robot runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyBody {
    /// A conditional-plan graph from exact VI or PBVI.
    Plan { graph: PolicyGraph },
    /// The IRL robot's plan together with the demonstration policy it assumes.
    Irl { graph: PolicyGraph, human: StageHumanPolicy },
    /// Online search; only the configuration is stored.
    Pomcp { config: PomcpConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u64,
    pub solver: SolverKind,
    pub game: GameFingerprint,
    /// The spec the policy was solved on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_spec: Option<GameSpec>,
    /// Value at `b0` (an estimate for search policies, absent if not run).
    #[serde(default)]
    pub value: Option<f64>,
    pub policy: PolicyBody,
}

impl PolicyFile {
    pub fn new(game: &CirlGame, solver: SolverKind, value: Option<f64>, policy: PolicyBody) -> Self {
        PolicyFile {
            schema_version: POLICY_SCHEMA_VERSION,
            solver,
            game: game.fingerprint(),
            game_spec: game.spec().cloned(),
            value,
            policy,
        }
    }

    /// Fails unless the policy was built for a game of this shape.
    pub fn check_game(&self, game: &CirlGame) -> Result<()> {
        let fp = game.fingerprint();
        if fp != self.game {
            return Err(CirlError::Validation(format!(
                "policy was solved for {} ({} world states, {} human and {} robot actions, horizon {}) but the game is {} ({}, {}, {}, {})",
                self.game.name,
                self.game.n_world,
                self.game.n_human_actions,
                self.game.n_robot_actions,
                self.game.horizon,
                fp.name,
                fp.n_world,
                fp.n_human_actions,
                fp.n_robot_actions,
                fp.horizon
            )));
        }
        match &self.policy {
            PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => graph.validate(game),
            PolicyBody::Pomcp { config } => config.validate(),
        }
    }

    pub fn graph(&self) -> Option<&PolicyGraph> {
        match &self.policy {
            PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => Some(graph),
            PolicyBody::Pomcp { .. } => None,
        }
    }

    pub fn robot(&self) -> RobotPolicy<'_> {
        match &self.policy {
            PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => RobotPolicy::Plan(graph),
            PolicyBody::Pomcp { config } => RobotPolicy::Pomcp(config.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy files always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u64,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| CirlError::Parse(e.to_string()))?;
        if header.schema_version != POLICY_SCHEMA_VERSION {
            return Err(CirlError::Version { found: header.schema_version, expected: POLICY_SCHEMA_VERSION });
        }
        serde_json::from_str(text).map_err(|e| CirlError::Parse(e.to_string()))
    }
}

pub fn save_policy(policy: &PolicyFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, policy.to_json())?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicyFile> {
    PolicyFile::from_json(&fs::read_to_string(path)?)
}
