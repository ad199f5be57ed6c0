//! Scene files: TOML with a `seed`, the `workspace` rectangle and one
//! `[[objects]]` table per object (`spec` with class, shape and color, and
//! `pose` with x, y, yaw, z_base). Floats round-trip exactly.

use std::path::Path;

use super::SceneState;
use crate::error::{Error, Result};

impl SceneState {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "scene",
            message: e.to_string(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "scene",
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
