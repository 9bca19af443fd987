//! Versioned JSON persistence for trained surrogates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MastSurrogate;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "mast-surrogate";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl MastSurrogate {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&Envelope {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            model: self,
        })
        .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Envelope<serde::de::IgnoredAny> =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if header.format != FORMAT_NAME {
            return Err(Error::Serialization(format!("unexpected format {:?}", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                header.version
            )));
        }
        let envelope: Envelope<MastSurrogate> =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(envelope.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
