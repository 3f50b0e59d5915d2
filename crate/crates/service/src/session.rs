//! Session state. A session is persisted as its record (setup plus
//! transcript); the live state is rebuilt by replaying the transcript.

use std::sync::Arc;

use cirl_core::game::{belief_update, belief_update_with};
use cirl_core::policy_file::{PolicyBody, PolicyFile};
use cirl_core::pomcp::Pomcp;
use cirl_core::{Belief, CirlError, CirlGame, PlanCursor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

pub const SESSION_SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub robot_action: usize,
    pub human_action: usize,
    /// World state after the turn.
    pub world: usize,
}

/// What is stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u64,
    pub id: String,
    pub game_id: String,
    pub policy_id: String,
    pub theta: usize,
    pub seed: u64,
    pub initial_world: usize,
    pub transcript: Vec<TurnRecord>,
}

/// What clients see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub schema_version: u64,
    pub id: String,
    pub game_id: String,
    pub policy_id: String,
    pub theta: usize,
    pub theta_label: String,
    pub turn: usize,
    pub horizon: usize,
    pub world: usize,
    pub world_label: String,
    /// The robot's move this turn, already chosen; absent once the session ends.
    pub robot_action: Option<usize>,
    pub robot_action_label: Option<String>,
    pub human_actions: Vec<String>,
    /// The robot's belief over Θ.
    pub belief: Vec<f64>,
    pub theta_labels: Vec<String>,
    pub transcript: Vec<TurnRecord>,
    pub status: Status,
    pub discounted_return: f64,
}

enum Controller {
    Plan(PlanCursor),
    Search(Box<Pomcp>),
}

pub struct Runtime {
    pub record: SessionRecord,
    game: CirlGame,
    /// The game under the policy's training model, used for belief updates.
    model_game: CirlGame,
    policy: Arc<PolicyFile>,
    ctl: Controller,
    belief: Belief,
    state: usize,
    /// Index of the committed action (plan action or search action).
    pending: Option<usize>,
    status: Status,
    ret: f64,
}

impl Runtime {
    /// Rebuilds a session from its record, replaying the transcript.
    pub fn start(game: CirlGame, policy: Arc<PolicyFile>, record: SessionRecord) -> ApiResult<Self> {
        policy.check_game(&game)?;
        if record.theta >= game.n_theta() {
            return Err(ApiError::Validation(format!("theta {} out of range", record.theta)));
        }
        if record.initial_world >= game.n_world() {
            return Err(ApiError::Validation("initial world state out of range".into()));
        }
        let model_game = match &policy.policy {
            PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => game.with_human_model(graph.training_model.clone())?,
            PolicyBody::Pomcp { .. } => game.clone(),
        };
        let ctl = match &policy.policy {
            PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => Controller::Plan(graph.root_cursor()),
            PolicyBody::Pomcp { config } => {
                let mut config = config.clone();
                config.seed ^= record.seed;
                Controller::Search(Box::new(Pomcp::new(&game, config)?))
            }
        };
        let state = record.theta * game.n_world() + record.initial_world;
        let transcript = record.transcript.clone();
        let mut rt = Runtime {
            record: SessionRecord { transcript: Vec::new(), ..record },
            belief: game.initial_belief(),
            game,
            model_game,
            policy,
            ctl,
            state,
            pending: None,
            status: Status::Active,
            ret: 0.0,
        };
        rt.ret = rt.game.reward(state);
        if rt.ret > 0.0 {
            rt.status = Status::Success;
        }
        rt.commit()?;
        for turn in transcript {
            if rt.pending.map(|a| rt.robot_action_of(a)) != Some(turn.robot_action) {
                return Err(ApiError::Internal("transcript does not replay: robot action differs".into()));
            }
            rt.apply(turn.human_action, Some(turn.world))?;
        }
        Ok(rt)
    }

    /// A fresh runtime for `record` on the same game and policy.
    pub fn start_like(other: &Runtime, record: SessionRecord) -> ApiResult<Self> {
        Runtime::start(other.game.clone(), other.policy.clone(), record)
    }

    pub fn status(&self) -> Status {
        self.status
    }

    fn robot_action_of(&self, a: usize) -> usize {
        match &self.ctl {
            Controller::Plan(_) => match &self.policy.policy {
                PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => graph.robot_action(&self.game, self.cursor()),
                PolicyBody::Pomcp { .. } => unreachable!(),
            },
            Controller::Search(tree) => tree.robot_action(a),
        }
    }

    fn cursor(&self) -> PlanCursor {
        match &self.ctl {
            Controller::Plan(c) => *c,
            Controller::Search(_) => PlanCursor { stage: 0, node: 0 },
        }
    }

    fn turn(&self) -> usize {
        self.record.transcript.len()
    }

    /// Chooses the robot's action for the current turn.
    fn commit(&mut self) -> ApiResult<()> {
        if self.status != Status::Active || self.turn() >= self.game.horizon() {
            self.pending = None;
            return Ok(());
        }
        self.pending = Some(match &mut self.ctl {
            Controller::Plan(c) => match &self.policy.policy {
                PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. } => graph.node(*c).action,
                PolicyBody::Pomcp { .. } => unreachable!(),
            },
            Controller::Search(tree) => tree.search()?,
        });
        Ok(())
    }

    /// Plays the human's action against the committed robot action. `world`
    /// forces the successor during replay.
    pub fn apply(&mut self, h: usize, world: Option<usize>) -> ApiResult<()> {
        let Some(a) = self.pending else {
            return Err(ApiError::Conflict(format!("session {} has finished", self.record.id)));
        };
        if h >= self.game.n_human_actions() {
            return Err(ApiError::Validation(format!("human action {h} out of range")));
        }
        let r = self.robot_action_of(a);
        let t = self.turn();
        let next = match world {
            Some(x) => {
                let s2 = self.record.theta * self.game.n_world() + x;
                let (targets, _) = self.game.row(self.state, h, r);
                if !targets.contains(&(s2 as u32)) {
                    return Err(ApiError::Internal("transcript does not replay: impossible transition".into()));
                }
                s2
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.record.seed ^ ((t as u64 + 1) << 32));
                self.game.sample_successor(self.state, h, r, rng.gen())
            }
        };

        self.belief = match (&self.policy.policy, &mut self.ctl) {
            (PolicyBody::Plan { graph }, Controller::Plan(c)) => {
                let updated = match graph.joint_rule(&self.game, *c) {
                    Some(rule) => belief_update_with(&self.game, &self.belief, r, h, |s| {
                        (rule.action(self.game.theta_of(s)) == h) as u8 as f64
                    }),
                    None => belief_update(&self.model_game, &self.belief, r, h, &graph.child_alphas(*c)),
                };
                self.fallback(updated, r, h)?
            }
            (PolicyBody::Irl { human, .. }, Controller::Plan(_)) => {
                let n_h = self.game.n_human_actions();
                let updated = belief_update_with(&self.game, &self.belief, r, h, |s| human.dist(t, s, n_h)[h]);
                self.fallback(updated, r, h)?
            }
            (PolicyBody::Pomcp { .. }, Controller::Search(tree)) => {
                match tree.advance(a, h) {
                    Ok(()) => {}
                    Err(CirlError::ParticleDepletion { .. }) => tree.rebuild(1000, 200_000).or_else(|e| match e {
                        CirlError::ParticleDepletion { .. } => Ok(()),
                        e => Err(e),
                    })?,
                    Err(e) => return Err(e.into()),
                }
                let hist = tree.theta_histogram();
                let n_w = self.game.n_world();
                let mut b = vec![0.0; self.game.n_states()];
                let x = self.game.world_of(next);
                for (theta, p) in hist.iter().enumerate() {
                    b[theta * n_w + x] = *p;
                }
                Belief::new(b).unwrap_or_else(|_| self.belief.clone())
            }
            _ => unreachable!(),
        };
        if let (PolicyBody::Plan { graph } | PolicyBody::Irl { graph, .. }, Controller::Plan(c)) = (&self.policy.policy, &mut self.ctl) {
            *c = graph.advance(*c, h);
        }

        self.state = next;
        self.record.transcript.push(TurnRecord { robot_action: r, human_action: h, world: self.game.world_of(next) });
        let reward = self.game.reward(next);
        self.ret += self.game.discount().powi(self.turn() as i32) * reward;
        if reward > 0.0 {
            self.status = Status::Success;
        } else if self.turn() >= self.game.horizon() {
            self.status = Status::Failure;
        }
        self.commit()
    }

    /// A human action the robot's model rules out leaves only the dynamics to
    /// condition on.
    fn fallback(&self, updated: cirl_core::Result<Belief>, r: usize, h: usize) -> ApiResult<Belief> {
        match updated {
            Ok(b) => Ok(b),
            Err(CirlError::InconsistentObservation { .. }) => Ok(belief_update_with(&self.game, &self.belief, r, h, |_| 1.0)?),
            Err(e) => Err(e.into()),
        }
    }

    pub fn view(&self) -> SessionView {
        let g = &self.game;
        let x = g.world_of(self.state);
        let robot_action = self.pending.map(|a| self.robot_action_of(a));
        SessionView {
            schema_version: SESSION_SCHEMA_VERSION,
            id: self.record.id.clone(),
            game_id: self.record.game_id.clone(),
            policy_id: self.record.policy_id.clone(),
            theta: self.record.theta,
            theta_label: g.theta_label(self.record.theta).to_owned(),
            turn: self.turn(),
            horizon: g.horizon(),
            world: x,
            world_label: g.world_label(x).to_owned(),
            robot_action,
            robot_action_label: robot_action.map(|r| g.robot_action_label(r).to_owned()),
            human_actions: g.human_action_labels().to_vec(),
            belief: self.belief.theta_marginal(g),
            theta_labels: g.theta_labels().to_vec(),
            transcript: self.record.transcript.clone(),
            status: self.status,
            discounted_return: self.ret,
        }
    }
}
