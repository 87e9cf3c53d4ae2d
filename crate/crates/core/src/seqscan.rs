//! Symbolic trajectory segmentation: extract stays ("relevant locations") from
//! a noisy event sequence and classify everything else as local noise or
//! transition points.
//!
//! A symbol becomes the representative of a segment once it *activates*: it
//! accumulates at least `min_count` occurrences and its cumulative presence
//! reaches `min_presence`. Presence is the summed time span of maximal runs of
//! consecutive occurrences, so isolated single occurrences contribute nothing.
//!
//! The scan is sequential. From the first unconsumed event, the symbol whose
//! activation completes earliest opens a segment at its first occurrence.
//! The segment then stays open while its representative keeps recurring; it
//! closes at the representative's last event as soon as some other symbol
//! activates on the events seen since that last event. Events before a
//! segment's window are transitions, non-representative events inside the
//! window are local noise, and a trailing stretch with no further activation
//! is all transitions.
//!
//! This end-on-challenger rule is what yields alternating home/work segments
//! on commuting data: each stay ends exactly when the next location takes
//! hold, rather than being absorbed into whichever symbol accumulates the
//! most presence overall.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{
    CdrEvent, CdrTrajectory, Interval, NoiseKind, Segment, SummaryTrajectory, SymbolicLocation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SeqScanParams {
    /// Minimum occurrence count for a symbol to represent a segment.
    pub min_count: u32,
    /// Minimum cumulative presence (seconds) for a symbol to represent a segment.
    pub min_presence_secs: i64,
}

impl SeqScanParams {
    pub fn new(min_count: u32, min_presence_secs: i64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::Config("seqscan min_count must be >= 1".into()));
        }
        if min_presence_secs < 0 {
            return Err(Error::Config("seqscan min_presence must be >= 0".into()));
        }
        Ok(SeqScanParams {
            min_count,
            min_presence_secs,
        })
    }
}

impl Default for SeqScanParams {
    /// N = 4 occurrences, 15 minutes of cumulative presence.
    fn default() -> Self {
        SeqScanParams {
            min_count: 4,
            min_presence_secs: 15 * 60,
        }
    }
}

#[derive(Default, Clone, Copy)]
struct SymbolStats {
    count: u32,
    presence: i64,
    first_index: usize,
}

struct Activation {
    /// Index of the first occurrence of the winning symbol (window start).
    window_start: usize,
    /// Index of the event that completed the activation.
    activated_at: usize,
}

/// Scans `events[from..]` and returns the first symbol to activate, if any.
fn first_activation(
    events: &[CdrEvent],
    from: usize,
    params: &SeqScanParams,
) -> Option<(SymbolicLocation, Activation)> {
    let mut stats: HashMap<&str, SymbolStats> = HashMap::new();
    for t in from..events.len() {
        let sym = events[t].location.label();
        let run_extends = t > from && events[t - 1].location.label() == sym;
        let entry = stats.entry(sym).or_insert(SymbolStats {
            count: 0,
            presence: 0,
            first_index: t,
        });
        if run_extends {
            entry.presence += events[t].timestamp - events[t - 1].timestamp;
        }
        entry.count += 1;
        if entry.count >= params.min_count && entry.presence >= params.min_presence_secs {
            return Some((
                events[t].location.clone(),
                Activation {
                    window_start: entry.first_index,
                    activated_at: t,
                },
            ));
        }
    }
    None
}

/// Extends an open segment past its activation point. Returns the index of the
/// representative's last event before some challenger activates (or before the
/// trajectory ends).
fn extend_segment(
    events: &[CdrEvent],
    representative: &SymbolicLocation,
    activated_at: usize,
    params: &SeqScanParams,
) -> usize {
    let mut last_rep = activated_at;
    let mut challengers: HashMap<&str, SymbolStats> = HashMap::new();
    for t in activated_at + 1..events.len() {
        let sym = events[t].location.label();
        if sym == representative.label() {
            last_rep = t;
            // The user came back: every pending challenge is a temporary absence.
            challengers.clear();
            continue;
        }
        let run_extends = t > 0 && events[t - 1].location.label() == sym;
        let entry = challengers.entry(sym).or_insert_with(SymbolStats::default);
        if run_extends {
            entry.presence += events[t].timestamp - events[t - 1].timestamp;
        }
        entry.count += 1;
        if entry.count >= params.min_count && entry.presence >= params.min_presence_secs {
            break;
        }
    }
    last_rep
}

/// Segments one trajectory. Every input event ends up in exactly one segment
/// or one noise bucket; a trajectory with no activating symbol yields zero
/// segments and all events classified as transitions.
pub fn segment(trajectory: &CdrTrajectory, params: &SeqScanParams) -> SummaryTrajectory {
    let events = trajectory.events();
    let mut segments = Vec::new();
    let mut noise = Vec::new();
    let mut from = 0usize;

    while from < events.len() {
        let Some((rep, activation)) = first_activation(events, from, params) else {
            for e in &events[from..] {
                noise.push((e.clone(), NoiseKind::Transition));
            }
            break;
        };
        for e in &events[from..activation.window_start] {
            noise.push((e.clone(), NoiseKind::Transition));
        }
        let end = extend_segment(events, &rep, activation.activated_at, params);
        for e in &events[activation.window_start..=end] {
            if e.location != rep {
                noise.push((e.clone(), NoiseKind::Local));
            }
        }
        segments.push(Segment {
            interval: Interval {
                start: events[activation.window_start].timestamp,
                end: events[end].timestamp,
            },
            location: rep,
        });
        from = end + 1;
    }

    SummaryTrajectory {
        user: trajectory.user.clone(),
        segments,
        noise,
    }
}
