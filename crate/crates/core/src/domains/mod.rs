//! Benchmark domains and versioned game-spec files.

mod chefworld;
mod presets;
mod rocksample;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};
use crate::game::CirlGame;
use crate::human::HumanModel;

pub use chefworld::{build_chefworld, unpruned_state_count, ChefWorldLayout, ChefWorldSpec, Recipe};
pub use presets::{chefworld_preset, preset, rocksample_preset, PRESET_HELP};
pub use rocksample::{build_rocksample, Rock, RockSampleLayout, RockSampleSpec, Turn};

pub const GAME_SCHEMA_VERSION: u64 = 1;

/// A serializable game description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub schema_version: u64,
    #[serde(flatten)]
    pub domain: DomainSpec,
    pub discount: f64,
    pub horizon: usize,
    pub human_model: HumanModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum DomainSpec {
    Chefworld { chefworld: ChefWorldSpec },
    Rocksample { rocksample: RockSampleSpec },
}

impl GameSpec {
    pub fn chefworld(spec: ChefWorldSpec, horizon: usize, discount: f64) -> Self {
        GameSpec {
            schema_version: GAME_SCHEMA_VERSION,
            domain: DomainSpec::Chefworld { chefworld: spec },
            discount,
            horizon,
            human_model: HumanModel::Rational,
        }
    }

    pub fn rocksample(spec: RockSampleSpec, horizon: usize, discount: f64) -> Self {
        GameSpec {
            schema_version: GAME_SCHEMA_VERSION,
            domain: DomainSpec::Rocksample { rocksample: spec },
            discount,
            horizon,
            human_model: HumanModel::Rational,
        }
    }

    pub fn with_human_model(mut self, model: HumanModel) -> Self {
        self.human_model = model;
        self
    }

    pub fn domain_name(&self) -> &'static str {
        match self.domain {
            DomainSpec::Chefworld { .. } => "chefworld",
            DomainSpec::Rocksample { .. } => "rocksample",
        }
    }

    /// Checks the spec without tabulating the game.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != GAME_SCHEMA_VERSION {
            return Err(CirlError::Version { found: self.schema_version, expected: GAME_SCHEMA_VERSION });
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(CirlError::Validation(format!("discount out of range: {}", self.discount)));
        }
        if self.horizon == 0 {
            return Err(CirlError::Validation("horizon must be positive".into()));
        }
        self.human_model.validate()?;
        match &self.domain {
            DomainSpec::Chefworld { chefworld } => chefworld.validate(self.horizon),
            DomainSpec::Rocksample { rocksample } => rocksample.validate(),
        }
    }

    pub fn build(&self) -> Result<CirlGame> {
        self.validate()?;
        let game = match &self.domain {
            DomainSpec::Chefworld { chefworld } => {
                build_chefworld(chefworld, self.horizon, self.discount, self.human_model.clone())?
            }
            DomainSpec::Rocksample { rocksample } => {
                build_rocksample(rocksample, self.horizon, self.discount, self.human_model.clone())?
            }
        };
        Ok(game.with_spec(self.clone()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game specs serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: Option<u64>,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| CirlError::Parse(e.to_string()))?;
        match header.schema_version {
            None => return Err(CirlError::Parse("missing field `schema_version`".into())),
            Some(v) if v != GAME_SCHEMA_VERSION => {
                return Err(CirlError::Version { found: v, expected: GAME_SCHEMA_VERSION })
            }
            _ => {}
        }
        serde_json::from_str(text).map_err(|e| CirlError::Parse(e.to_string()))
    }
}

/// Reads and validates a spec file, then builds the game.
pub fn load_game_spec(path: impl AsRef<Path>) -> Result<CirlGame> {
    read_game_spec(path)?.build()
}

pub fn read_game_spec(path: impl AsRef<Path>) -> Result<GameSpec> {
    let text = fs::read_to_string(path)?;
    let spec = GameSpec::from_json(&text)?;
    spec.validate()?;
    Ok(spec)
}

/// Writes the spec a game was built from.
pub fn save_game_spec(game: &CirlGame, path: impl AsRef<Path>) -> Result<()> {
    let spec = game
        .spec()
        .ok_or_else(|| CirlError::InvalidArgument("game was not built from a spec".into()))?;
    write_game_spec(spec, path)
}

pub fn write_game_spec(spec: &GameSpec, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, spec.to_json() + "\n")?;
    Ok(())
}

/// Resolves a preset name or a path to a game spec file.
pub fn resolve_game_spec(name_or_path: &str) -> Result<GameSpec> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        read_game_spec(path)
    } else {
        preset(name_or_path)
    }
}
