//! Chat-log length statistics. A line is one transcript message.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::persistence::{FileStore, StoreError};
use crate::session::Session;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no sessions found")]
    NoSessions,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionLength {
    pub session_id: String,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatStats {
    pub sessions: Vec<SessionLength>,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

pub fn line_stats(lengths: &[usize]) -> Option<(f64, f64)> {
    if lengths.is_empty() {
        return None;
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
    let var = lengths
        .iter()
        .map(|&l| {
            let d = l as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Some((mean, var.sqrt()))
}

pub fn compute_stats(sessions: &[Session]) -> Result<ChatStats, StatsError> {
    let mut per: Vec<SessionLength> = sessions
        .iter()
        .map(|s| SessionLength {
            session_id: s.session_id.clone(),
            lines: s.transcript.len(),
        })
        .collect();
    per.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    let lengths: Vec<usize> = per.iter().map(|p| p.lines).collect();
    let (mean, sd) = line_stats(&lengths).ok_or(StatsError::NoSessions)?;
    Ok(ChatStats {
        sessions: per,
        mean,
        sd,
    })
}

/// Statistics over every session document in `dir`.
pub fn stats_for_dir(dir: &Path) -> Result<ChatStats, StatsError> {
    if !dir.is_dir() {
        return Err(
            StoreError::StoreUnavailable(format!("{} is not a directory", dir.display())).into(),
        );
    }
    let store = FileStore::open(dir)?;
    compute_stats(&store.load_all()?)
}

impl ChatStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sessions {
            out.push_str(&format!("{}\t{}\n", s.session_id, s.lines));
        }
        out.push_str(&format!(
            "sessions: {}  mean: {:.2}  sd: {:.2}\n",
            self.sessions.len(),
            self.mean,
            self.sd
        ));
        out
    }
}
