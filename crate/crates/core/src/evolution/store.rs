use super::{EvolutionError, IterationRecord, RunReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Version of the run-directory format.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub format_version: u32,
    pub config_sha256: String,
    /// Directory relative config paths resolved against.
    pub base_dir: PathBuf,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File-level access to a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvolutionError {
    EvolutionError::Io { path: path.to_path_buf(), message: e.to_string() }
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn iteration_dir(&self, index: usize) -> PathBuf {
        self.root.join(format!("iter_{index}"))
    }

    pub(crate) fn create(&self) -> Result<(), EvolutionError> {
        fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))
    }

    /// Writes through a sibling temporary file and a rename.
    pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EvolutionError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    }

    pub(crate) fn write_text(&self, name: &str, text: &str) -> Result<(), EvolutionError> {
        Self::write_atomic(&self.path(name), text.as_bytes())
    }

    pub(crate) fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), EvolutionError> {
        self.write_text(name, &json_text(value))
    }

    pub(crate) fn read_text(&self, name: &str) -> Result<String, EvolutionError> {
        let p = self.path(name);
        fs::read_to_string(&p).map_err(|e| io_err(&p, e))
    }

    pub(crate) fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T, EvolutionError> {
        read_json_at(&self.path(name))
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Indices of fully written iterations, which always form a prefix
    /// `1..=m`; anything after a gap is ignored.
    pub fn completed_iterations(&self) -> Vec<usize> {
        (1..).take_while(|&i| self.iteration_dir(i).join("record.json").is_file()).collect()
    }

    /// Writes every artifact of an iteration into a scratch directory and
    /// renames it into place, so an iteration directory is either complete or
    /// absent.
    pub(crate) fn write_iteration(&self, rec: &IterationRecord) -> Result<(), EvolutionError> {
        let final_dir = self.iteration_dir(rec.index);
        let tmp = self.root.join(format!(".iter_{}.partial", rec.index));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
        }
        fs::create_dir_all(tmp.join("transcripts")).map_err(|e| io_err(&tmp, e))?;
        let put = |name: &str, text: String| {
            let p = tmp.join(name);
            fs::write(&p, text).map_err(|e| io_err(&p, e))
        };
        put("program.reward", rec.program.clone())?;
        put("diff.txt", rec.diff.to_string())?;
        put("next_program.reward", rec.next_program.clone())?;
        if let Some(log) = &rec.training_log {
            put("training_log.json", json_text(log))?;
        }
        if let Some(stats) = &rec.stats {
            put("stats.json", json_text(stats))?;
        }
        if let Some(fb) = &rec.feedback {
            put("feedback.json", json_text(fb))?;
        }
        put("metrics.json", json_text(&serde_json::json!({ "status": rec.status, "metrics": rec.metrics })))?;
        for (j, t) in rec.transcripts.iter().enumerate() {
            put(&format!("transcripts/rollout_{}.json", j + 1), json_text(t))?;
        }
        put("record.json", json_text(rec))?;
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir).map_err(|e| io_err(&final_dir, e))?;
        }
        fs::rename(&tmp, &final_dir).map_err(|e| io_err(&final_dir, e))
    }

    pub fn load_iteration(&self, index: usize) -> Result<IterationRecord, EvolutionError> {
        let rec: IterationRecord = read_json_at(&self.iteration_dir(index).join("record.json"))?;
        if rec.index != index {
            return Err(EvolutionError::Corrupt {
                path: self.iteration_dir(index),
                message: format!("record claims index {}", rec.index),
            });
        }
        Ok(rec)
    }

    /// Merges one iteration's wall-clock seconds into `timing.json`.
    pub(crate) fn record_timing(&self, index: usize, seconds: f64) -> Result<(), EvolutionError> {
        let mut map: BTreeMap<String, f64> = if self.exists("timing.json") {
            self.read_json("timing.json").unwrap_or_default()
        } else {
            BTreeMap::new()
        };
        map.insert(format!("iter_{index}"), seconds);
        self.write_json("timing.json", &map)
    }
}

pub(crate) fn json_text<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

fn read_json_at<T: DeserializeOwned>(path: &Path) -> Result<T, EvolutionError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| EvolutionError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

/// Loads `report.json` from a run directory.
pub fn read_report(dir: &Path) -> Result<RunReport, EvolutionError> {
    let report: RunReport = read_json_at(&dir.join("report.json"))?;
    if report.format_version != FORMAT_VERSION {
        return Err(EvolutionError::VersionMismatch(format!(
            "{}: report format {} (expected {FORMAT_VERSION})",
            dir.display(),
            report.format_version
        )));
    }
    Ok(report)
}

pub fn summary_csv(report: &RunReport) -> String {
    let mut out = String::from("iteration,success_rate,mean_episode_length\n");
    for r in &report.summary {
        out.push_str(&format!("{},{},{}\n", r.iteration, r.success_rate, r.mean_episode_length));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completed_iterations_are_a_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let rd = RunDir::new(dir.path());
        for i in [1, 2, 4] {
            fs::create_dir_all(rd.iteration_dir(i)).unwrap();
            fs::write(rd.iteration_dir(i).join("record.json"), "{}").unwrap();
        }
        fs::create_dir_all(rd.iteration_dir(3)).unwrap();
        assert_eq!(rd.completed_iterations(), vec![1, 2]);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let rd = RunDir::new(dir.path());
        rd.write_text("a.txt", "x").unwrap();
        rd.record_timing(1, 0.5).unwrap();
        rd.record_timing(2, 0.25).unwrap();
        let names: Vec<String> =
            fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        assert!(!names.iter().any(|n| n.ends_with(".tmp")));
        let t: BTreeMap<String, f64> = rd.read_json("timing.json").unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn corrupt_report_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_report(dir.path()), Err(EvolutionError::Io { .. })));
        fs::write(dir.path().join("report.json"), "{").unwrap();
        assert!(matches!(read_report(dir.path()), Err(EvolutionError::Corrupt { .. })));
    }
}
