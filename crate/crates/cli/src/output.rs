use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

/// Output directory plus the provenance every file carries.
pub struct Sink {
    dir: PathBuf,
    command: &'static str,
    seed: u64,
}

impl Sink {
    pub fn new(dir: PathBuf, command: &'static str, seed: u64) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, command, seed })
    }

    pub fn header_comment(&self) -> String {
        format!("perilib {} {} seed={}", self.command, env!("CARGO_PKG_VERSION"), self.seed)
    }

    fn header_value(&self) -> Value {
        json!({ "command": self.command, "version": env!("CARGO_PKG_VERSION"), "seed": self.seed })
    }

    /// Write a JSON object with a `perilib` header key merged in front.
    pub fn json(&self, name: &str, body: Value) -> CliResult<PathBuf> {
        let mut doc = Map::new();
        doc.insert("perilib".into(), self.header_value());
        match body {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write CSV produced by `fill`, which receives the header comment.
    pub fn csv(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>, &str) -> std::io::Result<()>) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf, &self.header_comment()).map_err(|e| CliError::io(&self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    /// Atomic write: a hidden temp file in the same directory, then rename.
    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        write_then_rename(&tmp, &path, bytes).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            CliError::io(&path, e)
        })?;
        Ok(path)
    }
}

fn write_then_rename(tmp: &Path, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = fs::File::create(tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}
