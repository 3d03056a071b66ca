use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Version stamped into every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

pub const OUT_ENV: &str = "QUASIPOT_OUT";

/// Output directory of one run. Keeps the list of files written so the
/// manifest can name them.
pub struct OutDir {
    path: PathBuf,
    files: Vec<String>,
    quiet: bool,
}

impl OutDir {
    /// `explicit` wins; otherwise `$QUASIPOT_OUT/<command>`, then `quasipot-out/<command>`.
    pub fn resolve(explicit: Option<&Path>, command: &str, quiet: bool) -> Result<Self, CliError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("quasipot-out"))
                .join(command),
        };
        std::fs::create_dir_all(&path)?;
        Ok(Self {
            path,
            files: Vec::new(),
            quiet,
        })
    }

    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.path.join(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(p)?))
    }

    /// Writes `value` as pretty JSON with a `schema_version` member.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        serde_json::to_writer_pretty(self.create(name)?, &v)?;
        Ok(())
    }

    /// Writes `manifest.json`: the resolved configuration, tool version and
    /// the outputs of the run. Passing it back through `--config` reruns it.
    pub fn manifest<T: Serialize>(mut self, command: &str, config: &T) -> Result<(), CliError> {
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "tool": "quasipot",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "outputs": self.files,
        });
        serde_json::to_writer_pretty(self.create("manifest.json")?, &doc)?;
        self.progress(format!("wrote {}", self.path.display()));
        Ok(())
    }
}
