//! ChefWorld: both agents prepare ingredients until the hidden recipe is met.
//!
//! World states are ingredient-count vectors plus an absorbing `SUCCESS`
//! state. Counts are saturated at one above the largest amount any recipe
//! needs (or at `2T`, the most that can be prepared), which keeps the table
//! small without changing any value: every count past a recipe's requirement
//! already rules that recipe out.

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::{CirlGame, GameDescription, WorldState};
use crate::human::HumanModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub counts: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChefWorldSpec {
    pub ingredients: Vec<String>,
    pub recipes: Vec<Recipe>,
}

impl ChefWorldSpec {
    pub fn new(ingredients: &[&str], recipes: &[(&str, &[u32])]) -> Self {
        ChefWorldSpec {
            ingredients: ingredients.iter().map(|s| s.to_string()).collect(),
            recipes: recipes
                .iter()
                .map(|(name, counts)| Recipe { name: name.to_string(), counts: counts.to_vec() })
                .collect(),
        }
    }

    pub fn n_ingredients(&self) -> usize {
        self.ingredients.len()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let n = self.ingredients.len();
        if n == 0 {
            return Err(CirlError::Validation("chefworld needs at least one ingredient".into()));
        }
        if self.recipes.is_empty() {
            return Err(CirlError::Validation("chefworld needs at least one recipe".into()));
        }
        for (i, r) in self.recipes.iter().enumerate() {
            if r.counts.len() != n {
                return Err(CirlError::Validation(format!(
                    "recipe `{}` has {} counts but there are {n} ingredients",
                    r.name,
                    r.counts.len()
                )));
            }
            let total: u64 = r.counts.iter().map(|&c| c as u64).sum();
            if total > 2 * horizon as u64 {
                return Err(CirlError::Validation(format!(
                    "recipe `{}` needs {total} preparations but at most {} fit in the horizon",
                    r.name,
                    2 * horizon
                )));
            }
            if self.recipes[..i].iter().any(|o| o.counts == r.counts) {
                return Err(CirlError::Validation(format!("recipe `{}` duplicates another recipe", r.name)));
            }
        }
        Ok(())
    }
}

/// `(2T+1)^n · |Θ| + |Θ|`: joint states of the unsaturated count grid plus one
/// success state per recipe.
pub fn unpruned_state_count(n_ingredients: usize, horizon: usize, n_recipes: usize) -> u128 {
    ((2 * horizon + 1) as u128).pow(n_ingredients as u32) * n_recipes as u128 + n_recipes as u128
}

/// Encoding between count vectors and world-state indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChefWorldLayout {
    caps: Vec<u32>,
    strides: Vec<usize>,
    n_counts: usize,
}

impl ChefWorldLayout {
    pub fn new(spec: &ChefWorldSpec, horizon: usize) -> Self {
        let n = spec.n_ingredients();
        let caps: Vec<u32> = (0..n)
            .map(|i| {
                let need = spec.recipes.iter().map(|r| r.counts[i]).max().unwrap_or(0);
                (need + 1).min(2 * horizon as u32)
            })
            .collect();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (caps[i + 1] as usize + 1);
        }
        let n_counts = caps.iter().map(|&c| c as usize + 1).product();
        ChefWorldLayout { caps, strides, n_counts }
    }

    pub fn n_world(&self) -> usize {
        self.n_counts + 1
    }

    pub fn success(&self) -> WorldState {
        WorldState(self.n_counts)
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    /// Index of a count vector, saturating counts above the cap.
    pub fn encode(&self, counts: &[u32]) -> Option<WorldState> {
        if counts.len() != self.caps.len() {
            return None;
        }
        Some(WorldState(
            counts.iter().zip(&self.caps).zip(&self.strides).map(|((&c, &cap), &st)| c.min(cap) as usize * st).sum(),
        ))
    }

    /// Count vector of a world state; `None` for `SUCCESS`.
    pub fn decode(&self, x: WorldState) -> Option<Vec<u32>> {
        if x.0 >= self.n_counts {
            return None;
        }
        Some(
            self.strides
                .iter()
                .zip(&self.caps)
                .map(|(&st, &cap)| ((x.0 / st) % (cap as usize + 1)) as u32)
                .collect(),
        )
    }
}

/// Tabulates a ChefWorld game. Actions for both agents are the ingredients in
/// order followed by `wait`.
pub fn build_chefworld(spec: &ChefWorldSpec, horizon: usize, discount: f64, human_model: HumanModel) -> Result<CirlGame> {
    spec.validate(horizon)?;
    let layout = ChefWorldLayout::new(spec, horizon);
    let n = spec.n_ingredients();
    let n_theta = spec.recipes.len();
    let success = layout.success().0;
    let recipe_states: Vec<usize> = spec
        .recipes
        .iter()
        .map(|r| layout.encode(&r.counts).expect("validated length").0)
        .collect();

    let mut world_labels: Vec<String> = (0..layout.n_counts)
        .map(|x| {
            let c = layout.decode(WorldState(x)).expect("count state");
            let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    world_labels.push("success".into());
    let mut actions = spec.ingredients.clone();
    actions.push("wait".into());

    let n_world = layout.n_world();
    let start = layout.encode(&vec![0; n]).expect("origin").0;
    let mut initial = vec![0.0; n_world * n_theta];
    for theta in 0..n_theta {
        initial[theta * n_world + start] = 1.0 / n_theta as f64;
    }
    let desc = GameDescription {
        name: format!("chefworld-{}x{}", n_theta, n),
        world_labels,
        theta_labels: spec.recipes.iter().map(|r| r.name.clone()).collect(),
        human_actions: actions.clone(),
        robot_actions: actions,
        human_wait: Some(n),
        discount,
        horizon,
        initial,
        human_model,
    };
    let decoded: Vec<Option<Vec<u32>>> = (0..n_world).map(|x| layout.decode(WorldState(x))).collect();
    CirlGame::build(
        desc,
        |x, theta, h, r| {
            if x == success || x == recipe_states[theta] {
                return vec![(success, 1.0)];
            }
            let mut counts = decoded[x].clone().expect("non-success state");
            if h < n {
                counts[h] += 1;
            }
            if r < n {
                counts[r] += 1;
            }
            vec![(layout.encode(&counts).expect("same length").0, 1.0)]
        },
        |x, theta| if x == recipe_states[theta] { 1.0 } else { 0.0 },
    )
}
