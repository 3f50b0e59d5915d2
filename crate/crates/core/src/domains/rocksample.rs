//! RockSample-CIRL: a rover and a human take turns moving on a grid; entering
//! a rock's cell samples it and pays the value of its type under θ.
//!
//! The game alternates turns, robot first. On the robot's turn every human
//! action is a no-op and vice versa, so one turn pair takes two game steps.
//! A move is a displacement walked x-first then y; unit steps that would leave
//! the grid are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::{CirlGame, GameDescription, WorldState};
use crate::human::HumanModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rock {
    pub x: usize,
    pub y: usize,
    pub kind: usize,
}

/// One candidate assignment of values to rock types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeValues {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RockSampleSpec {
    pub grid: usize,
    pub rocks: Vec<Rock>,
    pub thetas: Vec<TypeValues>,
    pub human_steps: usize,
    pub robot_steps: usize,
    pub start: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Robot,
    Human,
}

/// Rock status: not sampled, sampled on an earlier step, sampled on the step
/// that produced the current state (the only status that pays reward).
const FRESH: u8 = 0;
const SAMPLED: u8 = 1;
const JUST_SAMPLED: u8 = 2;

impl RockSampleSpec {
    pub fn n_types(&self) -> usize {
        self.thetas.first().map_or(0, |t| t.values.len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CirlError::Validation(m));
        if self.grid == 0 {
            return bad("grid size must be positive".into());
        }
        if self.human_steps == 0 || self.robot_steps == 0 {
            return bad("trajectory lengths must be at least 1".into());
        }
        if self.start[0] >= self.grid || self.start[1] >= self.grid {
            return bad("start position is off the grid".into());
        }
        if self.thetas.is_empty() {
            return bad("at least one reward parameter is required".into());
        }
        let k = self.n_types();
        for (i, t) in self.thetas.iter().enumerate() {
            if t.values.len() != k || t.values.iter().any(|v| !v.is_finite()) {
                return bad(format!("reward parameter `{}` must have {k} finite values", t.name));
            }
            if self.thetas[..i].iter().any(|o| o.values == t.values) {
                return bad(format!("reward parameter `{}` duplicates another", t.name));
            }
        }
        for (i, r) in self.rocks.iter().enumerate() {
            if r.x >= self.grid || r.y >= self.grid {
                return bad(format!("rock {i} is off the grid"));
            }
            if r.kind >= k {
                return bad(format!("rock {i} has unknown type {}", r.kind));
            }
            if self.rocks[..i].iter().any(|o| (o.x, o.y) == (r.x, r.y)) {
                return bad(format!("rock {i} shares a cell with another rock"));
            }
        }
        if self.rocks.len() > 12 {
            return bad("at most 12 rocks are supported".into());
        }
        Ok(())
    }
}

/// Displacements with `|dx| + |dy|` in `lengths`, shortest first.
fn displacements(lengths: std::ops::RangeInclusive<usize>) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for len in lengths {
        let len = len as i64;
        for dx in -len..=len {
            let rest = len - dx.abs();
            out.push((dx, -rest));
            if rest != 0 {
                out.push((dx, rest));
            }
        }
    }
    out
}

fn move_label(d: (i64, i64)) -> String {
    let mut s = String::new();
    let (h, v) = (if d.0 >= 0 { 'E' } else { 'W' }, if d.1 >= 0 { 'N' } else { 'S' });
    s.extend(std::iter::repeat_n(h, d.0.unsigned_abs() as usize));
    s.extend(std::iter::repeat_n(v, d.1.unsigned_abs() as usize));
    if s.is_empty() {
        s.push_str("stay");
    }
    s
}

/// Encoding between `(turn, position, rock statuses)` and world indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RockSampleLayout {
    grid: usize,
    n_rocks: usize,
    n_status: usize,
}

impl RockSampleLayout {
    pub fn new(spec: &RockSampleSpec) -> Self {
        RockSampleLayout { grid: spec.grid, n_rocks: spec.rocks.len(), n_status: 3usize.pow(spec.rocks.len() as u32) }
    }

    pub fn n_world(&self) -> usize {
        2 * self.grid * self.grid * self.n_status
    }

    pub fn encode(&self, turn: Turn, pos: (usize, usize), status: &[u8]) -> WorldState {
        let t = match turn {
            Turn::Robot => 0,
            Turn::Human => 1,
        };
        let code = status.iter().rev().fold(0usize, |acc, &s| acc * 3 + s as usize);
        WorldState(((t * self.grid + pos.1) * self.grid + pos.0) * self.n_status + code)
    }

    pub fn decode(&self, x: WorldState) -> (Turn, (usize, usize), Vec<u8>) {
        let mut code = x.0 % self.n_status;
        let cell = x.0 / self.n_status;
        let pos = (cell % self.grid, (cell / self.grid) % self.grid);
        let turn = if cell / (self.grid * self.grid) == 0 { Turn::Robot } else { Turn::Human };
        let mut status = Vec::with_capacity(self.n_rocks);
        for _ in 0..self.n_rocks {
            status.push((code % 3) as u8);
            code /= 3;
        }
        (turn, pos, status)
    }

    /// Whether rock `i` has been sampled in world state `x`.
    pub fn is_sampled(&self, x: WorldState, i: usize) -> bool {
        self.decode(x).2[i] != FRESH
    }
}

/// Tabulates a RockSample game; `horizon` counts turn pairs.
pub fn build_rocksample(spec: &RockSampleSpec, horizon: usize, discount: f64, human_model: HumanModel) -> Result<CirlGame> {
    spec.validate()?;
    let layout = RockSampleLayout::new(spec);
    let n_world = layout.n_world();
    let robot_moves = displacements(0..=spec.robot_steps);
    let human_moves = displacements(spec.human_steps..=spec.human_steps);
    let m = spec.grid as i64;
    let rock_at = |p: (usize, usize)| spec.rocks.iter().position(|r| (r.x, r.y) == p);

    let walk = |pos: (usize, usize), d: (i64, i64), status: &mut [u8]| -> (usize, usize) {
        let (mut x, mut y) = (pos.0 as i64, pos.1 as i64);
        let steps = std::iter::repeat_n((d.0.signum(), 0), d.0.unsigned_abs() as usize)
            .chain(std::iter::repeat_n((0, d.1.signum()), d.1.unsigned_abs() as usize));
        for (sx, sy) in steps {
            let (nx, ny) = (x + sx, y + sy);
            if nx < 0 || ny < 0 || nx >= m || ny >= m {
                continue;
            }
            x = nx;
            y = ny;
            if let Some(i) = rock_at((x as usize, y as usize)) {
                if status[i] == FRESH {
                    status[i] = JUST_SAMPLED;
                }
            }
        }
        (x as usize, y as usize)
    };

    let world_labels = (0..n_world)
        .map(|x| {
            let (turn, pos, status) = layout.decode(WorldState(x));
            let flags: String = status.iter().map(|&s| if s == FRESH { '.' } else { '#' }).collect();
            let who = if turn == Turn::Robot { "R" } else { "H" };
            format!("{who}@({},{}) {flags}", pos.0, pos.1)
        })
        .collect();
    let n_theta = spec.thetas.len();
    let start = layout.encode(Turn::Robot, (spec.start[0], spec.start[1]), &vec![FRESH; spec.rocks.len()]).0;
    let mut initial = vec![0.0; n_world * n_theta];
    for theta in 0..n_theta {
        initial[theta * n_world + start] = 1.0 / n_theta as f64;
    }
    let desc = GameDescription {
        name: format!("rocksample-{}x{}-{}r-lh{}-lr{}", spec.grid, spec.grid, spec.rocks.len(), spec.human_steps, spec.robot_steps),
        world_labels,
        theta_labels: spec.thetas.iter().map(|t| t.name.clone()).collect(),
        human_actions: human_moves.iter().map(|&d| move_label(d)).collect(),
        robot_actions: robot_moves.iter().map(|&d| move_label(d)).collect(),
        human_wait: None,
        discount,
        horizon: 2 * horizon,
        initial,
        human_model,
    };
    CirlGame::build(
        desc,
        |x, _theta, h, r| {
            let (turn, pos, mut status) = layout.decode(WorldState(x));
            for s in status.iter_mut() {
                if *s == JUST_SAMPLED {
                    *s = SAMPLED;
                }
            }
            let (next_turn, d) = match turn {
                Turn::Robot => (Turn::Human, robot_moves[r]),
                Turn::Human => (Turn::Robot, human_moves[h]),
            };
            let pos = walk(pos, d, &mut status);
            vec![(layout.encode(next_turn, pos, &status).0, 1.0)]
        },
        |x, theta| {
            let (_, _, status) = layout.decode(WorldState(x));
            status
                .iter()
                .zip(&spec.rocks)
                .filter(|(&s, _)| s == JUST_SAMPLED)
                .map(|(_, rock)| spec.thetas[theta].values[rock.kind])
                .sum()
        },
    )
}
