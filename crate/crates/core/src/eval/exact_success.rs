use crate::error::{CirlError, Result};
use crate::game::CirlGame;
use crate::human::TieBreak;
use crate::plan::PlanCursor;

use super::episode::{HumanBehavior, RobotPolicy};

/// Default cap on enumerated branches.
pub const DEFAULT_ENUMERATION_CAP: u64 = 50_000_000;

/// Exact expectations over θ, human choices and transitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactOutcome {
    pub success: f64,
    pub expected_return: f64,
    pub branches: u64,
}

/// Probability that an episode collects positive reward.
pub fn exact_success_probability(game: &CirlGame, robot: &RobotPolicy<'_>, human: &HumanBehavior) -> Result<f64> {
    Ok(exact_outcome(game, robot, human, DEFAULT_ENUMERATION_CAP)?.success)
}

struct Walker<'a> {
    game: &'a CirlGame,
    robot: &'a RobotPolicy<'a>,
    human: &'a HumanBehavior,
    cap: u64,
    branches: u64,
}

impl Walker<'_> {
    /// Returns (success probability, expected return) from `s` at stage `t`.
    fn walk(&mut self, s: usize, t: usize, cursor: PlanCursor, succeeded: bool) -> Result<(f64, f64)> {
        self.branches += 1;
        if self.branches > self.cap {
            return Err(CirlError::resource("enumeration branch", self.branches as u128, self.cap as u128));
        }
        let game = self.game;
        let reward = game.reward(s);
        let succeeded = succeeded || reward > 0.0;
        if t == game.horizon() {
            return Ok((succeeded as u8 as f64, reward));
        }
        let n_h = game.n_human_actions();
        let theta = game.theta_of(s);
        let robot_actions: Vec<(usize, f64)> = match self.robot {
            RobotPolicy::Plan(p) => vec![(p.robot_action(game, cursor), 1.0)],
            RobotPolicy::Uniform => {
                let n_r = game.n_robot_actions();
                (0..n_r).map(|r| (r, 1.0 / n_r as f64)).collect()
            }
            RobotPolicy::Pomcp(_) => unreachable!(),
        };
        let human_probs = match (self.human, self.robot) {
            (HumanBehavior::Demonstrator(d), _) => d.dist(t, s, n_h).to_vec(),
            (HumanBehavior::Pedagogic(m), RobotPolicy::Plan(p)) => match p.joint_rule(game, cursor) {
                Some(rule) if m.is_rational() => {
                    let mut v = vec![0.0; n_h];
                    v[rule.action(theta)] = 1.0;
                    v
                }
                _ => m.dist(&p.human_q_values(game, cursor, s), game.human_wait(), TieBreak::LowestIndex),
            },
            _ => unreachable!(),
        };
        let (mut success, mut ret) = (0.0, 0.0);
        for &(r, pr) in &robot_actions {
            for (h, &ph) in human_probs.iter().enumerate() {
                if ph <= 0.0 {
                    continue;
                }
                let next_cursor = match self.robot {
                    RobotPolicy::Plan(p) => p.advance(cursor, h),
                    _ => cursor,
                };
                let (targets, probs) = game.row(s, h, r);
                for (&s2, &pt) in targets.iter().zip(probs) {
                    let w = pr * ph * pt;
                    let (su, re) = self.walk(s2 as usize, t + 1, next_cursor, succeeded)?;
                    success += w * su;
                    ret += w * re;
                }
            }
        }
        Ok((success, reward + game.discount() * ret))
    }
}

/// Enumerates every outcome of the episode distribution. Online search
/// policies are not enumerable.
pub fn exact_outcome(game: &CirlGame, robot: &RobotPolicy<'_>, human: &HumanBehavior, cap: u64) -> Result<ExactOutcome> {
    let behavior;
    let human = match (robot, human) {
        (RobotPolicy::Pomcp(_), _) => {
            return Err(CirlError::InvalidArgument("online search policies cannot be enumerated; use Monte Carlo".into()))
        }
        (RobotPolicy::Uniform, HumanBehavior::Pedagogic(m)) => {
            behavior = HumanBehavior::demonstrator(game, m)?;
            &behavior
        }
        _ => human,
    };
    let cursor = match robot {
        RobotPolicy::Plan(p) => {
            if p.horizon() != game.horizon() {
                return Err(CirlError::InvalidArgument("plan horizon does not match the game".into()));
            }
            p.root_cursor()
        }
        _ => PlanCursor { stage: 0, node: 0 },
    };
    let mut walker = Walker { game, robot, human, cap, branches: 0 };
    let (mut success, mut ret) = (0.0, 0.0);
    for (s, &p) in game.initial().iter().enumerate() {
        if p > 0.0 {
            let (su, re) = walker.walk(s, 0, cursor, false)?;
            success += p * su;
            ret += p * re;
        }
    }
    Ok(ExactOutcome { success, expected_return: ret, branches: walker.branches })
}
