//! Named benchmark instances.
//!
//! `chefworld-RxI` has `R` recipes over `I` ingredients, `T = 2`, `γ = 0.95`.
//! With two ingredients the recipes come from a table of small count vectors;
//! with three or more they start with sandwich and soup over
//! (meat, bread, tomatoes) and are padded with zeros for extra ingredients.
//! `rocksample-LHxLR` is the 5×5 grid with four rocks of three types.

use super::chefworld::ChefWorldSpec;
use super::rocksample::{Rock, RockSampleSpec, TypeValues};
use super::GameSpec;
use crate::error::{CirlError, Result};

pub const PRESET_HELP: &str = "chefworld-RxI (R recipes, I ingredients) or rocksample-LHxLR";

pub const DEFAULT_DISCOUNT: f64 = 0.95;
pub const DEFAULT_CHEF_HORIZON: usize = 2;
pub const DEFAULT_ROCK_HORIZON: usize = 4;

const TWO_INGREDIENT_RECIPES: [(&str, [u32; 2]); 6] = [
    ("stack", [1, 2]),
    ("roll", [2, 1]),
    ("pair", [1, 1]),
    ("feast", [2, 2]),
    ("loaf", [0, 2]),
    ("grill", [2, 0]),
];

const THREE_INGREDIENT_RECIPES: [(&str, [u32; 3]); 6] = [
    ("sandwich", [1, 2, 0]),
    ("soup", [1, 1, 2]),
    ("burger", [2, 1, 1]),
    ("bruschetta", [0, 1, 2]),
    ("stew", [2, 0, 2]),
    ("toast", [0, 2, 1]),
];

/// ChefWorld with `recipes` recipes and `ingredients` ingredients.
pub fn chefworld_preset(recipes: usize, ingredients: usize) -> Result<ChefWorldSpec> {
    let table: Vec<(&str, Vec<u32>)> = match ingredients {
        0 | 1 => return Err(CirlError::InvalidArgument("presets need at least two ingredients".into())),
        2 => TWO_INGREDIENT_RECIPES.iter().map(|(n, c)| (*n, c.to_vec())).collect(),
        _ => THREE_INGREDIENT_RECIPES.iter().map(|(n, c)| (*n, c.to_vec())).collect(),
    };
    if recipes == 0 || recipes > table.len() {
        return Err(CirlError::InvalidArgument(format!(
            "presets with {ingredients} ingredients support 1 to {} recipes",
            table.len()
        )));
    }
    let mut names: Vec<String> = ["meat", "bread", "tomatoes"].iter().map(|s| s.to_string()).collect();
    names.truncate(ingredients);
    names.extend((names.len()..ingredients).map(|i| format!("ingredient_{}", i + 1)));
    Ok(ChefWorldSpec {
        ingredients: names,
        recipes: table[..recipes]
            .iter()
            .map(|(name, counts)| {
                let mut counts = counts.clone();
                counts.resize(ingredients, 0);
                super::chefworld::Recipe { name: name.to_string(), counts }
            })
            .collect(),
    })
}

/// The 5×5 RockSample instance with four rocks of three types; Θ holds every
/// permutation of the type values (1, 0.5, 0).
pub fn rocksample_preset(human_steps: usize, robot_steps: usize) -> RockSampleSpec {
    let rocks = [(1, 1, 0), (3, 1, 1), (1, 3, 2), (3, 3, 0)]
        .iter()
        .map(|&(x, y, kind)| Rock { x, y, kind })
        .collect();
    let base = [1.0, 0.5, 0.0];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let thetas = perms
        .iter()
        .map(|p| {
            let values: Vec<f64> = p.iter().map(|&i| base[i]).collect();
            let name = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/");
            TypeValues { name, values }
        })
        .collect();
    RockSampleSpec { grid: 5, rocks, thetas, human_steps, robot_steps, start: [0, 0] }
}

fn parse_pair(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('x')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Resolves a preset name to a spec with default horizon and discount.
pub fn preset(name: &str) -> Result<GameSpec> {
    let unknown = || CirlError::InvalidArgument(format!("unknown preset `{name}`; expected {PRESET_HELP}"));
    if let Some(rest) = name.strip_prefix("chefworld-") {
        let (r, i) = parse_pair(rest).ok_or_else(unknown)?;
        return Ok(GameSpec::chefworld(chefworld_preset(r, i)?, DEFAULT_CHEF_HORIZON, DEFAULT_DISCOUNT));
    }
    if name == "rocksample" {
        return Ok(GameSpec::rocksample(rocksample_preset(1, 1), DEFAULT_ROCK_HORIZON, DEFAULT_DISCOUNT));
    }
    if let Some(rest) = name.strip_prefix("rocksample-") {
        let (h, r) = parse_pair(rest).ok_or_else(unknown)?;
        return Ok(GameSpec::rocksample(rocksample_preset(h, r), DEFAULT_ROCK_HORIZON, DEFAULT_DISCOUNT));
    }
    Err(unknown())
}
