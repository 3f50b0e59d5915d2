//! JSON-file store: one document per game, policy and session under a data
//! directory. Writes go through a temporary file and a rename.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{ApiError, ApiResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Game,
    Policy,
    Session,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::Game => "games",
            Kind::Policy => "policies",
            Kind::Session => "sessions",
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            Kind::Game => "game",
            Kind::Policy => "policy",
            Kind::Session => "session",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> std::io::Result<Self> {
        let root = root.as_ref().to_path_buf();
        for kind in [Kind::Game, Kind::Policy, Kind::Session] {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        Ok(Store { root })
    }

    fn path(&self, kind: Kind, id: &str) -> ApiResult<PathBuf> {
        if !valid_id(id) {
            return Err(ApiError::NotFound(format!("no {} `{id}`", kind.prefix())));
        }
        Ok(self.root.join(kind.dir()).join(format!("{id}.json")))
    }

    pub fn ids(&self, kind: Kind) -> ApiResult<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join(kind.dir()))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_owned))
            .collect();
        ids.sort_by_key(|id| (id.len(), id.clone()));
        Ok(ids)
    }

    /// Next free id of the form `<prefix>-<n>`.
    pub fn next_id(&self, kind: Kind) -> ApiResult<String> {
        let prefix = format!("{}-", kind.prefix());
        let n = self
            .ids(kind)?
            .iter()
            .filter_map(|id| id.strip_prefix(&prefix).and_then(|n| n.parse::<u64>().ok()))
            .max()
            .map_or(1, |m| m + 1);
        Ok(format!("{prefix}{n}"))
    }

    pub fn put<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> ApiResult<()> {
        let path = self.path(kind, id)?;
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_vec_pretty(value).map_err(|e| ApiError::Internal(e.to_string()))?;
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn get_raw(&self, kind: Kind, id: &str) -> ApiResult<String> {
        let path = self.path(kind, id)?;
        fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ApiError::NotFound(format!("no {} `{id}`", kind.prefix())),
            _ => ApiError::Internal(e.to_string()),
        })
    }

    pub fn get<T: DeserializeOwned>(&self, kind: Kind, id: &str) -> ApiResult<T> {
        let text = self.get_raw(kind, id)?;
        serde_json::from_str(&text).map_err(|e| ApiError::Internal(format!("corrupt {} `{id}`: {e}", kind.prefix())))
    }
}
