//! Models of how the human picks actions from her Q-values.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};

/// Q-values within this distance of the maximum count as tied.
pub const ARGMAX_TOL: f64 = 1e-9;

/// How ties among maximal Q-values are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniform over the argmax set.
    Uniform,
    /// All greedy mass on the lowest-index maximiser. Exact solvers use this
    /// so that backups are deterministic.
    LowestIndex,
}

/// A mapping from the human's Q-values to a distribution over her actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[derive(Default)]
pub enum HumanModel {
    #[default]
    Rational,
    Boltzmann { beta: f64 },
    EpsilonGreedy { epsilon: f64 },
    /// Adds `bonus` to the wait action's Q-value, then defers to `inner`.
    BiasedWait { bonus: f64, inner: Box<HumanModel> },
}

impl HumanModel {
    pub fn boltzmann(beta: f64) -> Self {
        HumanModel::Boltzmann { beta }
    }

    pub fn epsilon_greedy(epsilon: f64) -> Self {
        HumanModel::EpsilonGreedy { epsilon }
    }

    pub fn biased_wait(bonus: f64, inner: HumanModel) -> Self {
        HumanModel::BiasedWait { bonus, inner: Box::new(inner) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HumanModel::Rational => Ok(()),
            HumanModel::Boltzmann { beta } => {
                if beta.is_finite() && *beta > 0.0 {
                    Ok(())
                } else {
                    Err(CirlError::Validation(format!("boltzmann beta must be > 0, got {beta}")))
                }
            }
            HumanModel::EpsilonGreedy { epsilon } => {
                if (0.0..=1.0).contains(epsilon) {
                    Ok(())
                } else {
                    Err(CirlError::Validation(format!("epsilon must lie in [0, 1], got {epsilon}")))
                }
            }
            HumanModel::BiasedWait { bonus, inner } => {
                if !bonus.is_finite() {
                    return Err(CirlError::Validation("wait bonus must be finite".into()));
                }
                inner.validate()
            }
        }
    }

    /// True when the model never puts mass outside the argmax set.
    pub fn is_rational(&self) -> bool {
        matches!(self, HumanModel::Rational)
    }

    /// Writes the action distribution for `q` into `out`.
    ///
    /// `q` may contain `+inf` entries (unvisited actions during tree search);
    /// those are treated as the argmax set.
    pub fn dist_into(&self, q: &[f64], wait: Option<usize>, ties: TieBreak, out: &mut [f64]) {
        debug_assert_eq!(q.len(), out.len());
        match self {
            HumanModel::Rational => greedy_into(q, ties, out),
            HumanModel::Boltzmann { beta } => softmax_into(q, *beta, out),
            HumanModel::EpsilonGreedy { epsilon } => {
                greedy_into(q, ties, out);
                let n = q.len() as f64;
                for p in out.iter_mut() {
                    *p = (1.0 - epsilon) * *p + epsilon / n;
                }
            }
            HumanModel::BiasedWait { bonus, inner } => match wait {
                Some(w) if w < q.len() => {
                    let mut shaped = q.to_vec();
                    shaped[w] += bonus;
                    inner.dist_into(&shaped, wait, ties, out);
                }
                _ => inner.dist_into(q, wait, ties, out),
            },
        }
    }

    pub fn dist(&self, q: &[f64], wait: Option<usize>, ties: TieBreak) -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        self.dist_into(q, wait, ties, &mut out);
        out
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for HumanModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HumanModel::Rational => write!(f, "rational"),
            HumanModel::Boltzmann { beta } => write!(f, "boltzmann:{beta}"),
            HumanModel::EpsilonGreedy { epsilon } => write!(f, "epsilon:{epsilon}"),
            HumanModel::BiasedWait { bonus, inner } => write!(f, "biased:{bonus}:{inner}"),
        }
    }
}

impl FromStr for HumanModel {
    type Err = CirlError;

    /// Parses `rational`, `boltzmann:<beta>`, `epsilon:<eps>` and
    /// `biased:<bonus>:<inner>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CirlError::InvalidArgument(format!("unrecognised human model '{s}'"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let model = match s.split_once(':') {
            None if s == "rational" => HumanModel::Rational,
            None => return Err(bad()),
            Some(("boltzmann", v)) => HumanModel::boltzmann(num(v)?),
            Some(("epsilon", v)) => HumanModel::epsilon_greedy(num(v)?),
            Some(("biased", rest)) => {
                let (bonus, inner) = rest.split_once(':').unwrap_or((rest, "rational"));
                HumanModel::biased_wait(num(bonus)?, inner.parse()?)
            }
            Some(_) => return Err(bad()),
        };
        model.validate()?;
        Ok(model)
    }
}

fn greedy_into(q: &[f64], ties: TieBreak, out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let is_max = |v: f64| {
        if max == f64::INFINITY {
            v == f64::INFINITY
        } else {
            v >= max - ARGMAX_TOL
        }
    };
    out.iter_mut().for_each(|p| *p = 0.0);
    match ties {
        TieBreak::LowestIndex => {
            let i = q.iter().position(|&v| is_max(v)).unwrap_or(0);
            out[i] = 1.0;
        }
        TieBreak::Uniform => {
            let count = q.iter().filter(|&&v| is_max(v)).count().max(1) as f64;
            for (p, &v) in out.iter_mut().zip(q) {
                if is_max(v) {
                    *p = 1.0 / count;
                }
            }
        }
    }
}

fn softmax_into(q: &[f64], beta: f64, out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        greedy_into(q, TieBreak::Uniform, out);
        return;
    }
    let mut total = 0.0;
    for (p, &v) in out.iter_mut().zip(q) {
        *p = (beta * (v - max)).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Action distribution for Q-values `q` with uniform tie-breaking.
pub fn human_action_dist(model: &HumanModel, q: &[f64], wait: Option<usize>) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(CirlError::InvalidArgument("empty Q-value vector".into()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(CirlError::InvalidArgument("Q-values must be finite".into()));
    }
    model.validate()?;
    Ok(model.dist(q, wait, TieBreak::Uniform))
}

/// Samples an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
