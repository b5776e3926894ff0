// SPDX-License-Identifier: Apache-2.0
//! Append-only JSONL store of finished benchmark cells.

use std::fs::{self, File, OpenOptions};
use std::io::{Read as _, Seek as _, SeekFrom, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{EvalError, Judgement, Stage1Summary};
use crate::model::{PipelineOutcome, PipelineStatus};
use crate::pipeline::Stage1Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Record {
    pub problem_id: String,
    pub config_digest: String,
    pub summary: Stage1Summary,
    /// `None` when stage 1 crashed.
    pub result: Option<Stage1Result>,
    /// Why the problem cannot be judged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub problem_id: String,
    pub sample: u32,
    pub config_digest: String,
    /// `None` when the sample crashed before producing an outcome.
    pub status: Option<PipelineStatus>,
    pub judgement: Judgement,
    pub outcome_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_s: f64,
    pub outcome: Option<PipelineOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum JournalEntry {
    Stage1(Stage1Record),
    Sample(SampleRecord),
}

impl JournalEntry {
    pub fn config_digest(&self) -> &str {
        match self {
            JournalEntry::Stage1(r) => &r.config_digest,
            JournalEntry::Sample(r) => &r.config_digest,
        }
    }
}

/// Serialized write point shared by the workers.
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Journal {
    /// Opens for appending. A final line cut short by a crash is closed
    /// off so that the next record starts on a line of its own.
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io(dir))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(io(path))?;
        let len = file.metadata().map_err(io(path))?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(len - 1)).map_err(io(path))?;
            file.read_exact(&mut last).map_err(io(path))?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(io(path))?;
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<(), EvalError> {
        let mut line = serde_json::to_string(entry).expect("journal entry serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("journal lock");
        file.write_all(line.as_bytes()).map_err(io(&self.path))?;
        file.flush().map_err(io(&self.path))
    }

    /// Every readable entry. Unparsable lines (a torn write) are skipped
    /// with a warning; a missing file reads as empty.
    pub fn read(path: &Path) -> Result<Vec<JournalEntry>, EvalError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(path)(e)),
        };
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str(line) {
                Ok(e) => out.push(e),
                Err(e) => warn!(path = %path.display(), line = i + 1, error = %e, "skipping unreadable journal line"),
            }
        }
        Ok(out)
    }
}
