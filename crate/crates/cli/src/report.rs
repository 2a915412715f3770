//! Report emission: one structured-text summary per run plus tab-separated
//! data tables. The summary embeds the fully resolved configuration (also
//! written standalone as `resolved_config.toml` so it can be fed straight
//! back to `--config`) and contains no wall-clock fields, so a rerun from
//! the same config reproduces it byte for byte.

use crate::CmdError;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct ReportWriter {
    dir: PathBuf,
}

impl ReportWriter {
    pub fn new(dir: &Path) -> Result<ReportWriter, CmdError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CmdError::Run(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ReportWriter { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, contents: &str) -> Result<(), CmdError> {
        let path = self.path(name);
        let mut f = std::fs::File::create(&path)
            .map_err(|e| CmdError::Run(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }

    /// Tab-separated table with a header row.
    pub fn write_tsv<I: IntoIterator<Item = String>>(
        &self,
        name: &str,
        header: &str,
        rows: I,
    ) -> Result<(), CmdError> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// `summary.toml`: the resolved config under `[config]`, results under
    /// `[result]`, and the run seed at the top level.
    pub fn write_summary<C: Serialize, R: Serialize>(
        &self,
        command: &str,
        seed: u64,
        config: &C,
        result: &R,
    ) -> Result<(), CmdError> {
        let mut root = toml::map::Map::new();
        root.insert("command".into(), toml::Value::String(command.into()));
        root.insert("seed".into(), toml::Value::Integer(seed as i64));
        root.insert(
            "config".into(),
            toml::Value::try_from(config)
                .map_err(|e| CmdError::Run(format!("config serialization: {e}")))?,
        );
        root.insert(
            "result".into(),
            toml::Value::try_from(result)
                .map_err(|e| CmdError::Run(format!("result serialization: {e}")))?,
        );
        let text = toml::to_string_pretty(&toml::Value::Table(root))
            .map_err(|e| CmdError::Run(format!("summary serialization: {e}")))?;
        self.write_text("summary.toml", &text)?;
        // The standalone copy is directly reusable via --config.
        let config_text = toml::to_string_pretty(config)
            .map_err(|e| CmdError::Run(format!("config serialization: {e}")))?;
        self.write_text("resolved_config.toml", &config_text)
    }
}
