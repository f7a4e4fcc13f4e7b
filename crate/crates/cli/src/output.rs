//! Report envelope, manifest and number formatting.

use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;
use serde_json::ser::Formatter;

/// Everything needed to rerun a command. No timestamp, so identical
/// invocations produce identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, params: impl Serialize, seed: u64, outputs: Vec<String>) -> Self {
        Self {
            command: command.into(),
            params: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    result: &'a T,
}

/// Compact JSON with every float written as `{:.16e}` (17 significant digits).
struct SigFigs;

impl Formatter for SigFigs {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigs);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

/// Where and how a report is written.
pub struct Sink {
    pub out: Option<PathBuf>,
}

impl Sink {
    pub fn write_json<T: Serialize>(&self, manifest: &RunManifest, result: &T) -> anyhow::Result<()> {
        let mut text = to_json(&Envelope { manifest, result })?;
        text.push('\n');
        self.emit(&text)
    }

    /// CSV body preceded by a `# manifest: {...}` comment line.
    pub fn write_csv(&self, manifest: &RunManifest, csv: &str) -> anyhow::Result<()> {
        let text = format!("# manifest: {}\n{csv}", to_json(manifest)?);
        self.emit(&text)
    }

    pub fn write_side<T: Serialize>(&self, path: &PathBuf, value: &T) -> anyhow::Result<()> {
        let mut text = to_json(value)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    pub fn paths(&self) -> Vec<String> {
        self.out.iter().map(|p| p.display().to_string()).collect()
    }
}
