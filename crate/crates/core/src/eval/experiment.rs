use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::resolve_game_spec;
use crate::error::{CirlError, Result};
use crate::exact::{adapted_value_iteration, reduced_pomdp_vi, ExactConfig};
use crate::game::CirlGame;
use crate::human::{sample_index, HumanModel};
use crate::irl::{demonstration_policy, irl_robot_policy};
use crate::par;
use crate::pbvi::{pbvi_solve, Budget, PbviConfig, PbviVariant};
use crate::pomcp::{PomcpConfig, PomcpVariant};

use super::episode::{rollout_episode, HumanBehavior, RobotPolicy};
use super::exact_success::{exact_outcome, DEFAULT_ENUMERATION_CAP};
use super::results::{write_both, ResultRow, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Vi,
    ViBaseline,
    Pbvi,
    PbviBaseline,
    Pomcp,
    PomcpBaseline,
    Irl,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Vi => "vi",
            SolverKind::ViBaseline => "vi-baseline",
            SolverKind::Pbvi => "pbvi",
            SolverKind::PbviBaseline => "pbvi-baseline",
            SolverKind::Pomcp => "pomcp",
            SolverKind::PomcpBaseline => "pomcp-baseline",
            SolverKind::Irl => "irl",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = CirlError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| CirlError::InvalidArgument(format!("unknown solver `{s}`")))
    }
}

/// Which experiment to run. Games are preset names or spec file paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum Suite {
    /// Exact VI, adapted vs reduced, with NA on resource caps.
    Table1 {
        games: Vec<String>,
        #[serde(default)]
        byte_budget: Option<u64>,
    },
    /// PBVI adapted vs baseline at an equal expansion budget.
    Pbvi { games: Vec<String>, rounds: usize },
    /// POMCP adapted vs baseline, mean episode return.
    Pomcp { games: Vec<String>, simulations: usize },
    /// CIRL vs IRL pipelines with a rational human.
    Irl { games: Vec<String> },
    /// Training model × actual model × {pedagogic, demonstrator} grid.
    Robustness {
        game: String,
        #[serde(default)]
        models: Option<Vec<HumanModel>>,
    },
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Table1 { .. } => "table1",
            Suite::Pbvi { .. } => "pbvi",
            Suite::Pomcp { .. } => "pomcp",
            Suite::Irl { .. } => "irl",
            Suite::Robustness { .. } => "robustness",
        }
    }
}

fn default_episodes() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub suite: Suite,
    /// Episodes per Monte Carlo cell; episode `i` uses seed `seed + i`.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Where `<suite>.csv` and `<suite>.json` go, if anywhere.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(suite: Suite) -> Self {
        ExperimentConfig { suite, episodes: default_episodes(), seed: 0, output_dir: None }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = match &self.suite {
            Suite::Table1 { games, .. } | Suite::Pbvi { games, .. } | Suite::Pomcp { games, .. } | Suite::Irl { games } => {
                games.is_empty()
            }
            Suite::Robustness { models, .. } => models.as_ref().is_some_and(|m| m.is_empty()),
        };
        if empty {
            return Err(CirlError::Validation("experiment sweep is empty".into()));
        }
        if self.episodes == 0 {
            return Err(CirlError::Validation("episode count must be at least 1".into()));
        }
        if self.seed.checked_add(self.episodes as u64).is_none() {
            return Err(CirlError::Validation("seed schedule overflows".into()));
        }
        if let Suite::Robustness { models: Some(models), .. } = &self.suite {
            for m in models {
                m.validate()?;
            }
        }
        Ok(())
    }
}

/// The ten human models of the extended robustness grid: five behaviours,
/// each without and with a +0.25 preference for waiting.
pub fn appendix_e_models() -> Vec<HumanModel> {
    let base = [
        HumanModel::Rational,
        HumanModel::boltzmann(1.0),
        HumanModel::boltzmann(5.0),
        HumanModel::epsilon_greedy(0.1),
        HumanModel::epsilon_greedy(0.01),
    ];
    let mut out = base.to_vec();
    out.extend(base.iter().map(|m| HumanModel::biased_wait(0.25, m.clone())));
    out
}

/// Monte Carlo summary over seeded episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    /// Standard error of the success rate.
    pub success_se: f64,
    pub errors: usize,
}

/// Runs `episodes` episodes with seeds `base_seed + i`, drawing θ from the
/// prior of each episode's own stream.
pub fn monte_carlo(
    game: &CirlGame,
    robot: &RobotPolicy<'_>,
    human: &HumanBehavior,
    episodes: usize,
    base_seed: u64,
) -> Result<McSummary> {
    let theta_prior = game.initial_belief().theta_marginal(game);
    let records = par::map_range(episodes, |i| {
        let seed = base_seed + i as u64;
        let theta = sample_index(&theta_prior, &mut ChaCha8Rng::seed_from_u64(seed.rotate_left(17) ^ 0xa5a5));
        rollout_episode(game, robot, human, theta, seed)
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.discounted_return).sum::<f64>() / n;
    let var = records.iter().map(|r| (r.discounted_return - mean).powi(2)).sum::<f64>() / n;
    let success = records.iter().filter(|r| r.success).count() as f64 / n;
    Ok(McSummary {
        episodes: records.len(),
        mean_return: mean,
        std_return: var.sqrt(),
        success_rate: success,
        success_se: (success * (1.0 - success) / n).sqrt(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
    })
}

fn fail(mut row: ResultRow, e: &CirlError) -> ResultRow {
    row.status = if e.is_resource() { Status::Na } else { Status::Error };
    row.note = e.to_string();
    row
}

fn games_of(names: &[String]) -> Result<Vec<(String, CirlGame)>> {
    names.iter().map(|n| Ok((n.clone(), resolve_game_spec(n)?.build()?))).collect()
}

/// Runs one experiment and writes its tables if an output directory is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let suite = cfg.suite.name();
    let rows = match &cfg.suite {
        Suite::Table1 { games, byte_budget } => {
            let exact = ExactConfig { byte_budget: byte_budget.unwrap_or(ExactConfig::default().byte_budget), ..ExactConfig::default() };
            let mut cells = Vec::new();
            for (name, game) in games_of(games)? {
                for kind in [SolverKind::Vi, SolverKind::ViBaseline] {
                    cells.push((name.clone(), game.clone(), kind));
                }
            }
            par::map_slice(&cells, |(name, game, kind)| {
                let row = ResultRow::new(suite, name, kind.name());
                let start = Instant::now();
                let result = match kind {
                    SolverKind::Vi => adapted_value_iteration(game, &exact),
                    _ => reduced_pomdp_vi(game, &exact),
                };
                let mut row = match result {
                    Ok(sol) => ResultRow {
                        value: Some(sol.value),
                        note: format!("candidates={}", sol.total_candidates()),
                        ..row
                    },
                    Err(e) => fail(row, &e),
                };
                row.wall_clock_s = start.elapsed().as_secs_f64();
                row.training_model = game.human_model().label();
                row
            })
        }
        Suite::Pbvi { games, rounds } => {
            let mut cells = Vec::new();
            for (name, game) in games_of(games)? {
                for v in [PbviVariant::Adapted, PbviVariant::Baseline] {
                    cells.push((name.clone(), game.clone(), v));
                }
            }
            par::map_slice(&cells, |(name, game, v)| {
                let solver = match v {
                    PbviVariant::Adapted => SolverKind::Pbvi,
                    PbviVariant::Baseline => SolverKind::PbviBaseline,
                };
                let row = ResultRow::new(suite, name, solver.name());
                let start = Instant::now();
                let mut row = match pbvi_solve(game, &PbviConfig::new(*v, Budget::Expansions(*rounds), cfg.seed)) {
                    Ok(sol) => ResultRow {
                        value: Some(sol.value),
                        seeds: 1,
                        note: format!("rounds={} beliefs={}", sol.rounds, sol.beliefs.len()),
                        ..row
                    },
                    Err(e) => fail(row, &e),
                };
                row.wall_clock_s = start.elapsed().as_secs_f64();
                row
            })
        }
        Suite::Pomcp { games, simulations } => {
            let mut rows = Vec::new();
            for (name, game) in games_of(games)? {
                for v in [PomcpVariant::Adapted, PomcpVariant::Baseline] {
                    let solver = match v {
                        PomcpVariant::Adapted => SolverKind::Pomcp,
                        PomcpVariant::Baseline => SolverKind::PomcpBaseline,
                    };
                    let mut row = ResultRow::new(suite, &name, solver.name());
                    let start = Instant::now();
                    let robot = RobotPolicy::Pomcp(PomcpConfig::new(v, *simulations, cfg.seed));
                    let human = HumanBehavior::Pedagogic(HumanModel::Rational);
                    row = match monte_carlo(&game, &robot, &human, cfg.episodes, cfg.seed) {
                        Ok(mc) => ResultRow {
                            value: Some(mc.mean_return),
                            std: Some(mc.std_return),
                            success_rate: Some(mc.success_rate),
                            seeds: mc.episodes,
                            note: format!("simulations={simulations} errors={}", mc.errors),
                            ..row
                        },
                        Err(e) => fail(row, &e),
                    };
                    row.wall_clock_s = start.elapsed().as_secs_f64();
                    rows.push(row);
                }
                if name == "chefworld-4x4" {
                    for (solver, mean, std) in [("vi", 0.631, 0.221), ("pomcp-baseline", 0.429, 0.183)] {
                        let mut row = ResultRow::new(suite, &name, solver);
                        row.value = Some(mean);
                        row.std = Some(std);
                        row.status = Status::Reference;
                        row.note = "published, 30000 simulations".into();
                        rows.push(row);
                    }
                }
            }
            rows
        }
        Suite::Irl { games } => {
            let exact = ExactConfig::default();
            let mut rows = Vec::new();
            for (name, game) in games_of(games)? {
                let start = Instant::now();
                let mut cirl = ResultRow::new(suite, &name, SolverKind::Vi.name());
                cirl.human = "cirl".into();
                cirl = match adapted_value_iteration(&game, &exact).and_then(|sol| {
                    let out = exact_outcome(&game, &RobotPolicy::Plan(&sol.policy), &HumanBehavior::Pedagogic(HumanModel::Rational), DEFAULT_ENUMERATION_CAP)?;
                    Ok((sol.value, out))
                }) {
                    Ok((value, out)) => ResultRow { value: Some(value), success_rate: Some(out.success), ..cirl },
                    Err(e) => fail(cirl, &e),
                };
                cirl.wall_clock_s = start.elapsed().as_secs_f64();
                rows.push(cirl);

                let start = Instant::now();
                let mut irl = ResultRow::new(suite, &name, SolverKind::Irl.name());
                irl.human = "irl".into();
                irl = match demonstration_policy(&game, &HumanModel::Rational).and_then(|demo| {
                    let sol = irl_robot_policy(&game, &demo, &exact)?;
                    let out = exact_outcome(&game, &RobotPolicy::Plan(&sol.policy), &HumanBehavior::Demonstrator(demo), DEFAULT_ENUMERATION_CAP)?;
                    Ok((sol.value, out))
                }) {
                    Ok((value, out)) => ResultRow { value: Some(value), success_rate: Some(out.success), ..irl },
                    Err(e) => fail(irl, &e),
                };
                irl.wall_clock_s = start.elapsed().as_secs_f64();
                rows.push(irl);
            }
            rows
        }
        Suite::Robustness { game, models } => robustness(cfg, game, models.clone().unwrap_or_else(appendix_e_models))?,
    };
    if let Some(dir) = &cfg.output_dir {
        write_both(&rows, dir, suite)?;
    }
    Ok(rows)
}

fn robustness(cfg: &ExperimentConfig, name: &str, models: Vec<HumanModel>) -> Result<Vec<ResultRow>> {
    let game = resolve_game_spec(name)?.build()?;
    let exact = ExactConfig::default();
    let trained = par::map_slice(&models, |m| -> Result<_> {
        let g = game.with_human_model(m.clone())?;
        let cirl = adapted_value_iteration(&g, &exact)?;
        let irl = irl_robot_policy(&game, &demonstration_policy(&game, m)?, &exact)?;
        Ok((cirl, irl))
    });
    let trained = trained.into_iter().collect::<Result<Vec<_>>>()?;
    let demos = models.iter().map(|m| demonstration_policy(&game, m)).collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for t in 0..models.len() {
        for a in 0..models.len() {
            cells.push((t, a));
        }
    }
    let rows = par::map_slice(&cells, |&(t, a)| {
        let (cirl, irl) = &trained[t];
        let mut out = Vec::with_capacity(2);
        for pedagogic in [true, false] {
            let start = Instant::now();
            let (policy, human) = if pedagogic {
                (&cirl.policy, HumanBehavior::Pedagogic(models[a].clone()))
            } else {
                (&irl.policy, HumanBehavior::Demonstrator(demos[a].clone()))
            };
            let mut row = ResultRow::new("robustness", name, if pedagogic { "vi" } else { "irl" });
            row.training_model = models[t].label();
            row.actual_model = models[a].label();
            row.human = if pedagogic { "cirl" } else { "irl" }.into();
            row = match exact_outcome(&game, &RobotPolicy::Plan(policy), &human, DEFAULT_ENUMERATION_CAP) {
                Ok(o) => ResultRow { value: Some(o.expected_return), success_rate: Some(o.success), ..row },
                Err(e) if e.is_resource() => match monte_carlo(&game, &RobotPolicy::Plan(policy), &human, cfg.episodes, cfg.seed) {
                    Ok(mc) => ResultRow {
                        value: Some(mc.mean_return),
                        success_rate: Some(mc.success_rate),
                        std: Some(mc.success_se),
                        seeds: mc.episodes,
                        note: "monte carlo".into(),
                        ..row
                    },
                    Err(e) => fail(row, &e),
                },
                Err(e) => fail(row, &e),
            };
            row.wall_clock_s = start.elapsed().as_secs_f64();
            out.push(row);
        }
        out
    });
    Ok(rows.into_iter().flatten().collect())
}
