//! Versioned JSON checkpoints: architecture, block shapes and all parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetConfig, PolicyValueNet};
use crate::error::{Error, Result};

const FORMAT: &str = "gpo-policy-value-net";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: NetConfig,
    shapes: Vec<(String, usize, usize)>,
    params: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(net: &PolicyValueNet, mut writer: W) -> Result<()> {
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        version: VERSION,
        config: net.config().clone(),
        shapes: net.shapes().to_vec(),
        params: net.params().to_vec(),
    };
    serde_json::to_writer(&mut writer, &file).map_err(|e| Error::Checkpoint(e.to_string()))?;
    writeln!(writer)?;
    Ok(())
}

/// Reads a checkpoint; `expected`, when given, must match the stored architecture.
pub fn read_checkpoint<R: Read>(reader: R, expected: Option<&NetConfig>) -> Result<PolicyValueNet> {
    let file: CheckpointFile =
        serde_json::from_reader(reader).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if file.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", file.format)));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {VERSION})",
            file.version
        )));
    }
    if let Some(expected) = expected {
        if *expected != file.config {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: checkpoint has {:?}, expected {:?}",
                file.config, expected
            )));
        }
    }
    let net = PolicyValueNet::from_parts(file.config, file.params)?;
    if net.shapes() != file.shapes.as_slice() {
        return Err(Error::Checkpoint(
            "parameter block shapes do not match the stored architecture".into(),
        ));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &PolicyValueNet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&NetConfig>) -> Result<PolicyValueNet> {
    read_checkpoint(BufReader::new(File::open(path)?), expected)
}
