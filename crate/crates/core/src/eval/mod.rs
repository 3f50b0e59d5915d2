//! Episode simulation, exact and Monte Carlo policy evaluation, and the
//! experiment suites.

mod episode;
mod exact_success;
mod experiment;
mod plot;
mod results;

pub use episode::{rollout_episode, EpisodeRecord, EpisodeStep, HumanBehavior, RobotPolicy};
pub use exact_success::{exact_outcome, exact_success_probability, ExactOutcome, DEFAULT_ENUMERATION_CAP};
pub use experiment::{
    appendix_e_models, monte_carlo, run_experiment, ExperimentConfig, McSummary, SolverKind, Suite,
};
pub use plot::{plot_series, PlotPoint, PlotSeries};
pub use results::{read_csv, read_json, write_csv, write_json, ResultRow, Status};
