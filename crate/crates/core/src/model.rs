//! Domain types for trajectories at every pipeline stage.
//!
//! A raw trajectory is a time-ordered sequence of symbolic location events for
//! one user. Segmentation turns it into a summary trajectory of
//! (interval, relevant location) segments plus classified noise; generalization
//! replaces locations by frequency ranks and splits the result into weekly
//! rank sequences.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An opaque location label drawn from the symbolic dictionary.
/// Labels compare by exact equality; they carry no geometry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolicLocation(String);

impl SymbolicLocation {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::Data("empty location label".into()));
        }
        Ok(SymbolicLocation(label))
    }

    pub fn label(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SymbolicLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque user identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Data("empty user id".into()));
        }
        Ok(UserId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One timestamped location event. Timestamps are UTC epoch seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrEvent {
    pub user: UserId,
    #[serde(rename = "t")]
    pub timestamp: i64,
    #[serde(rename = "loc")]
    pub location: SymbolicLocation,
}

/// A user's temporally ordered event sequence.
///
/// Invariants: at least one event, all events share the user id, timestamps
/// are non-decreasing. Ties keep their construction order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrTrajectory {
    pub user: UserId,
    events: Vec<CdrEvent>,
}

impl CdrTrajectory {
    /// Builds a trajectory from events of a single user, sorting stably by
    /// timestamp. Duplicate events are kept; deduplication is an ingest concern.
    pub fn from_events(mut events: Vec<CdrEvent>) -> Result<Self> {
        let user = match events.first() {
            Some(e) => e.user.clone(),
            None => return Err(Error::Data("trajectory requires at least one event".into())),
        };
        if events.iter().any(|e| e.user != user) {
            return Err(Error::Data(format!(
                "trajectory for {user} mixes events of several users"
            )));
        }
        events.sort_by_key(|e| e.timestamp);
        Ok(CdrTrajectory { user, events })
    }

    pub fn events(&self) -> &[CdrEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn start(&self) -> i64 {
        self.events[0].timestamp
    }

    pub fn end(&self) -> i64 {
        self.events[self.events.len() - 1].timestamp
    }
}

/// A closed time interval with `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: i64,
    pub end: i64,
}

impl Interval {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::Data(format!("interval start {start} after end {end}")));
        }
        Ok(Interval { start, end })
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }
}

/// Why a discarded event was not part of any segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Temporary absence that falls inside a segment's window.
    Local,
    /// Movement between two consecutive segments (or outside all of them).
    Transition,
}

/// One detected stay: the representative location over its time interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub interval: Interval,
    pub location: SymbolicLocation,
}

/// The segmentation result for one trajectory: ordered disjoint segments plus
/// every discarded event with its noise classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryTrajectory {
    pub user: UserId,
    pub segments: Vec<Segment>,
    pub noise: Vec<(CdrEvent, NoiseKind)>,
}

impl SummaryTrajectory {
    /// Treats every event as its own point segment. This is the "no
    /// summarization" path: downstream ranking then counts raw events.
    pub fn from_native(traj: &CdrTrajectory) -> Self {
        let segments = traj
            .events()
            .iter()
            .map(|e| Segment {
                interval: Interval {
                    start: e.timestamp,
                    end: e.timestamp,
                },
                location: e.location.clone(),
            })
            .collect();
        SummaryTrajectory {
            user: traj.user.clone(),
            segments,
            noise: Vec::new(),
        }
    }

    pub fn noise_count(&self, kind: NoiseKind) -> usize {
        self.noise.iter().filter(|(_, k)| *k == kind).count()
    }
}

/// A summary trajectory with location labels replaced by frequency ranks.
/// Ranks form the contiguous set 1..=max_rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTrajectory {
    pub user: UserId,
    pub segments: Vec<(Interval, u32)>,
}

impl RankTrajectory {
    pub fn max_rank(&self) -> u32 {
        self.segments.iter().map(|(_, r)| *r).max().unwrap_or(0)
    }
}

/// The rank subsequence whose segment start times fall in one week.
/// Timestamps are dropped; an empty rank list means the user was silent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklyTrajectory {
    pub user: UserId,
    /// 1-based week index within the trimmed observation period.
    pub week: u32,
    pub ranks: Vec<u32>,
}

/// Corpus-level shape statistics for any symbol-sequence dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub trajectory_count: usize,
    pub symbol_count: usize,
    pub max_length: usize,
    pub avg_length: f64,
}

/// Counts sequences, distinct symbols, and per-sequence lengths.
pub fn corpus_stats<T: Eq + std::hash::Hash>(corpus: &[Vec<T>]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::Data("corpus statistics require a non-empty corpus".into()));
    }
    let mut symbols = HashSet::new();
    let mut max_length = 0usize;
    let mut total = 0usize;
    for seq in corpus {
        max_length = max_length.max(seq.len());
        total += seq.len();
        for s in seq {
            symbols.insert(s);
        }
    }
    Ok(CorpusStats {
        trajectory_count: corpus.len(),
        symbol_count: symbols.len(),
        max_length,
        avg_length: total as f64 / corpus.len() as f64,
    })
}
