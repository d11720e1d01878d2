use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, CliResult};

/// Records per flush.
const BATCH: usize = 1000;

/// Append-only JSONL writer, flushed every `BATCH` records so an interrupted
/// run leaves a parseable prefix.
pub struct JsonlSink {
    out: BufWriter<File>,
    path: PathBuf,
    pending: usize,
}

impl JsonlSink {
    pub fn create(path: &Path) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            pending: 0,
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> CliResult<()> {
        serde_json::to_writer(&mut self.out, record).map_err(|e| self.io_error(e.to_string()))?;
        self.out.write_all(b"\n").map_err(|e| self.io_error(e.to_string()))?;
        self.pending += 1;
        if self.pending >= BATCH {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> CliResult<()> {
        self.pending = 0;
        self.out.flush().map_err(|e| self.io_error(e.to_string()))
    }

    fn io_error(&self, e: String) -> CliError {
        CliError::Runtime(format!("{}: {e}", self.path.display()))
    }
}

/// Per-chain sample path: `out` itself for a single chain, otherwise
/// `stem-<i>.ext`.
pub fn chain_path(out: &Path, chain: usize, chains: usize) -> PathBuf {
    if chains == 1 {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{chain}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{chain}"),
    };
    out.with_file_name(name)
}

/// Summary file written next to a sample file.
pub fn summary_path(samples: &Path) -> PathBuf {
    let mut name = samples.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_paths() {
        let out = Path::new("runs/samples.jsonl");
        assert_eq!(chain_path(out, 0, 1), PathBuf::from("runs/samples.jsonl"));
        assert_eq!(chain_path(out, 3, 4), PathBuf::from("runs/samples-3.jsonl"));
        assert_eq!(summary_path(out), PathBuf::from("runs/samples.jsonl.summary.json"));
    }

    #[test]
    fn sink_writes_one_record_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut sink = JsonlSink::create(&path).unwrap();
        for i in 0..3 {
            sink.write(&serde_json::json!({"step": i})).unwrap();
        }
        sink.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "{\"step\":0}\n{\"step\":1}\n{\"step\":2}\n");
    }
}
