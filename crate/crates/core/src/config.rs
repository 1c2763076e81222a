//! Config files with named memory and detection presets.
//!
//! ```toml
//! [memory.dense]
//! od = 200.0
//!
//! [detection.quiet]
//! noise_sigma = 0.01
//! ```
//!
//! Unset fields fall back to the built-in defaults. Names in the file shadow
//! the built-in presets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub memory: BTreeMap<String, MemoryParams>,
    pub detection: BTreeMap<String, DetectionConfig>,
}

impl ConfigFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml_str(&text),
            Some("json") => Self::from_json_str(&text),
            _ => Err(Error::InvalidParameter(format!(
                "config file {} must end in .toml or .json",
                path.display()
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in &self.memory {
            p.validate().map_err(|e| Error::InvalidParameter(format!("memory preset {name}: {e}")))?;
        }
        for (name, d) in &self.detection {
            d.validate().map_err(|e| Error::InvalidParameter(format!("detection preset {name}: {e}")))?;
        }
        Ok(())
    }

    /// Looks `name` up in the file, then among the built-in presets.
    pub fn memory_preset(&self, name: &str) -> Result<MemoryParams> {
        self.memory.get(name).cloned().or_else(|| MemoryParams::preset(name)).ok_or_else(|| {
            let mut known: Vec<&str> = MemoryParams::PRESET_NAMES.to_vec();
            known.extend(self.memory.keys().map(String::as_str));
            Error::InvalidParameter(format!("unknown memory preset {name:?} (known: {})", known.join(", ")))
        })
    }

    /// Looks `name` up in the file; `calibrated` is built in.
    pub fn detection_preset(&self, name: &str) -> Result<DetectionConfig> {
        match self.detection.get(name) {
            Some(d) => Ok(d.clone()),
            None if name == "calibrated" => Ok(DetectionConfig::default()),
            None => Err(Error::InvalidParameter(format!("unknown detection preset {name:?}"))),
        }
    }
}
