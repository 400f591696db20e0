//! Portable model artifacts: a checksummed binary that reloads to an
//! identical model, and C source for on-device inference.

mod binary;
mod bytes;
mod firmware;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use binary::{FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::classify::{ModelKind, TrainedModel};
use crate::error::{Error, Result};
use crate::posture::PostureLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArtifactFormat {
    Binary,
    FirmwareSource,
}

impl ArtifactFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ArtifactFormat::Binary => "scm",
            ArtifactFormat::FirmwareSource => "c",
        }
    }
}

impl fmt::Display for ArtifactFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactFormat::Binary => "binary",
            ArtifactFormat::FirmwareSource => "firmware",
        })
    }
}

impl FromStr for ArtifactFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "scm" | "bin" => Ok(ArtifactFormat::Binary),
            "firmware" | "c" | "source" => Ok(ArtifactFormat::FirmwareSource),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelArtifact {
    pub format: ArtifactFormat,
    pub payload: Vec<u8>,
    /// CRC-32: the binary trailer, or the hash of the source text.
    pub checksum: u32,
    pub model_kind: ModelKind,
    pub class_names: Vec<PostureLabel>,
}

impl ModelArtifact {
    pub fn checksum_hex(&self) -> String {
        format!("{:08x}", self.checksum)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.payload)?;
        Ok(())
    }

    /// Reads a binary artifact; the header is validated by [`load_model`].
    pub fn read_binary(path: &Path) -> Result<Self> {
        let payload = std::fs::read(path)?;
        let model = load_bytes(&payload)?;
        Ok(Self {
            format: ArtifactFormat::Binary,
            checksum: binary::trailer_crc(&payload).expect("validated"),
            payload,
            model_kind: model.kind(),
            class_names: model.class_names,
        })
    }
}

pub fn export_model(model: &TrainedModel, format: ArtifactFormat) -> Result<ModelArtifact> {
    let payload = match format {
        ArtifactFormat::Binary => binary::encode(model)?,
        ArtifactFormat::FirmwareSource => firmware::emit(model)?.into_bytes(),
    };
    let checksum = match format {
        ArtifactFormat::Binary => binary::trailer_crc(&payload).expect("encoder writes a trailer"),
        ArtifactFormat::FirmwareSource => crc32fast::hash(&payload),
    };
    Ok(ModelArtifact { format, payload, checksum, model_kind: model.kind(), class_names: model.class_names.clone() })
}

pub fn load_model(artifact: &ModelArtifact) -> Result<TrainedModel> {
    if artifact.format != ArtifactFormat::Binary {
        return Err(Error::UnsupportedFormat(format!("cannot load a {} artifact", artifact.format)));
    }
    load_bytes(&artifact.payload)
}

pub fn load_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    binary::decode(bytes)
}

pub fn load_file(path: &Path) -> Result<TrainedModel> {
    load_bytes(&std::fs::read(path)?)
}
