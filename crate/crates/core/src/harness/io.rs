use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{EpisodeStats, HarnessError, TrajectoryStep};

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), detail: e.to_string() }
}

fn create(path: &Path) -> Result<File, HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map_err(|e| io_err(path, e))
}

/// One CSV row per record, header from the record's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| io_err(path, e))
}

pub fn write_episode_csv(path: &Path, episodes: &[EpisodeStats]) -> Result<(), HarnessError> {
    write_csv(path, episodes)
}

/// Columns `t, state_*, u_*, w_*, user_cost, game_cost`.
pub fn write_trajectory_csv(path: &Path, log: &[TrajectoryStep]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    if let Some(first) = log.first() {
        let mut header = vec!["t".to_string()];
        header.extend((0..first.state.len()).map(|i| format!("state_{i}")));
        header.extend((0..first.u.len()).map(|i| format!("u_{i}")));
        header.extend((0..first.w.len()).map(|i| format!("w_{i}")));
        header.push("user_cost".into());
        header.push("game_cost".into());
        w.write_record(&header).map_err(|e| io_err(path, e))?;
    }
    for s in log {
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.state.iter().chain(&s.u).chain(&s.w).map(|v| v.to_string()));
        rec.push(s.user_cost.to_string());
        rec.push(s.game_cost.to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let f = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(f, value).map_err(|e| io_err(path, e))
}
