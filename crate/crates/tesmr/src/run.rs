//! Per-run bookkeeping: the output-directory lock and `run.json`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, IoContext, Result};
use crate::store::write_atomic;

/// `git describe`-style version of this build.
pub const VERSION: &str = env!("TESMR_GIT_DESCRIBE");

pub const LOCK_FILE: &str = ".tesmr.lock";
pub const RUN_FILE: &str = "run.json";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).at(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.into())),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub version: &'a str,
    pub command: &'a str,
    /// Every resolved key; loading this file as `--config` restores it.
    pub config: &'a BTreeMap<String, String>,
    pub elapsed_ms: u128,
}

pub fn write_run_record(dir: &Path, record: &RunRecord<'_>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(record).expect("in-memory serialization");
    bytes.push(b'\n');
    write_atomic(&dir.join(RUN_FILE), &bytes)
}
