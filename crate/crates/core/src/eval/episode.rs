use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::exact::StageHumanPolicy;
use crate::game::CirlGame;
use crate::human::{sample_index, HumanModel, TieBreak};
use crate::irl::demonstration_policy;
use crate::plan::{PlanCursor, PolicyGraph};
use crate::pomcp::{Pomcp, PomcpConfig};

/// How the simulated human chooses her actions.
#[derive(Clone, Debug)]
pub enum HumanBehavior {
    /// Applies `model` to her Q-values under the robot's committed plan (or
    /// the search tree's estimates).
    Pedagogic(HumanModel),
    /// Follows a fixed, plan-independent demonstration policy.
    Demonstrator(StageHumanPolicy),
}

impl HumanBehavior {
    /// A demonstrator following `model` on the centralized Q-values.
    pub fn demonstrator(game: &CirlGame, model: &HumanModel) -> Result<Self> {
        Ok(HumanBehavior::Demonstrator(demonstration_policy(game, model)?))
    }
}

/// What controls the robot.
#[derive(Clone, Debug)]
pub enum RobotPolicy<'a> {
    Plan(&'a PolicyGraph),
    /// Online search, rebuilt at the start of each episode.
    Pomcp(PomcpConfig),
    /// Uniformly random robot actions.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub robot_action: usize,
    pub human_action: usize,
    /// World state after the step.
    pub world: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub theta: usize,
    pub initial_world: usize,
    pub steps: Vec<EpisodeStep>,
    /// Some stage yielded positive reward.
    pub success: bool,
    pub discounted_return: f64,
    pub seed: u64,
    pub error: Option<String>,
}

impl EpisodeRecord {
    /// Recomputes the discounted return from the visited states.
    pub fn replay_return(&self, game: &CirlGame) -> f64 {
        let mut x = self.initial_world;
        let n_w = game.n_world();
        let mut total = game.reward(self.theta * n_w + x);
        let mut w = 1.0;
        for step in &self.steps {
            w *= game.discount();
            x = step.world;
            total += w * game.reward(self.theta * n_w + x);
        }
        total
    }
}

enum Controller<'a> {
    Plan(&'a PolicyGraph, PlanCursor),
    Search(Box<Pomcp>),
    Uniform,
}

/// Plays one episode with true reward parameter `theta`.
pub fn rollout_episode(
    game: &CirlGame,
    robot: &RobotPolicy<'_>,
    human: &HumanBehavior,
    theta: usize,
    seed: u64,
) -> Result<EpisodeRecord> {
    if theta >= game.n_theta() {
        return Err(CirlError::InvalidArgument(format!("theta {theta} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_w = game.n_world();
    let prior: Vec<f64> = game.initial()[theta * n_w..(theta + 1) * n_w].to_vec();
    let mass: f64 = prior.iter().sum();
    if mass <= 0.0 {
        return Err(CirlError::InvalidArgument(format!("theta {theta} has no prior mass")));
    }
    let x0 = sample_index(&prior.iter().map(|p| p / mass).collect::<Vec<_>>(), &mut rng);
    let demo_fallback;
    let human = match (robot, human) {
        (RobotPolicy::Uniform, HumanBehavior::Pedagogic(m)) => {
            demo_fallback = HumanBehavior::demonstrator(game, m)?;
            &demo_fallback
        }
        _ => human,
    };
    let mut ctl = match robot {
        RobotPolicy::Plan(p) => {
            if p.horizon() != game.horizon() {
                return Err(CirlError::InvalidArgument("plan horizon does not match the game".into()));
            }
            Controller::Plan(p, p.root_cursor())
        }
        RobotPolicy::Pomcp(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed ^ 0x9e37_79b9_7f4a_7c15;
            Controller::Search(Box::new(Pomcp::new(game, cfg)?))
        }
        RobotPolicy::Uniform => Controller::Uniform,
    };

    let mut record = EpisodeRecord {
        theta,
        initial_world: x0,
        steps: Vec::with_capacity(game.horizon()),
        success: false,
        discounted_return: 0.0,
        seed,
        error: None,
    };
    let mut s = theta * n_w + x0;
    let mut weight = 1.0;
    let n_h = game.n_human_actions();
    for t in 0..game.horizon() {
        record.discounted_return += weight * game.reward(s);
        record.success |= game.reward(s) > 0.0;
        weight *= game.discount();

        let (a, r, probs) = match &mut ctl {
            Controller::Plan(p, c) => {
                let r = p.robot_action(game, *c);
                let probs = match human {
                    HumanBehavior::Demonstrator(d) => d.dist(t, s, n_h).to_vec(),
                    HumanBehavior::Pedagogic(m) => match p.joint_rule(game, *c) {
                        Some(rule) if m.is_rational() => one_hot(n_h, rule.action(theta)),
                        _ => m.dist(&p.human_q_values(game, *c, s), game.human_wait(), TieBreak::LowestIndex),
                    },
                };
                (p.node(*c).action, r, probs)
            }
            Controller::Search(tree) => {
                let a = match tree.search() {
                    Ok(a) => a,
                    Err(e) => {
                        record.error = Some(e.to_string());
                        return Ok(record);
                    }
                };
                let r = tree.robot_action(a);
                let probs = match human {
                    HumanBehavior::Demonstrator(d) => d.dist(t, s, n_h).to_vec(),
                    HumanBehavior::Pedagogic(m) => match tree.rule(a) {
                        Some(rule) if m.is_rational() => one_hot(n_h, rule.action(theta)),
                        Some(rule) => m.dist(&one_hot(n_h, rule.action(theta)), game.human_wait(), TieBreak::Uniform),
                        None => m.dist(&tree.human_estimates(a, theta), game.human_wait(), TieBreak::Uniform),
                    },
                };
                (a, r, probs)
            }
            Controller::Uniform => {
                let r = rng.gen_range(0..game.n_robot_actions());
                let probs = match human {
                    HumanBehavior::Demonstrator(d) => d.dist(t, s, n_h).to_vec(),
                    HumanBehavior::Pedagogic(_) => unreachable!("replaced by a demonstrator above"),
                };
                (r, r, probs)
            }
        };
        let h = sample_index(&probs, &mut rng);
        let next = game.sample_successor(s, h, r, rng.gen());
        record.steps.push(EpisodeStep { robot_action: r, human_action: h, world: game.world_of(next) });
        s = next;

        match &mut ctl {
            Controller::Plan(p, c) => *c = p.advance(*c, h),
            Controller::Search(tree) => {
                if let Err(e) = tree.advance(a, h) {
                    match e {
                        CirlError::ParticleDepletion { .. } => {
                            if let Err(e) = tree.rebuild(1000, 200_000) {
                                record.error = Some(e.to_string());
                                return Ok(record);
                            }
                        }
                        e => {
                            record.error = Some(e.to_string());
                            return Ok(record);
                        }
                    }
                }
            }
            Controller::Uniform => {}
        }
    }
    record.discounted_return += weight * game.reward(s);
    record.success |= game.reward(s) > 0.0;
    Ok(record)
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}
