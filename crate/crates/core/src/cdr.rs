//! Ingestion of delimited CDR text: one `user,timestamp,location` event per line.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{CdrEvent, CdrTrajectory, SymbolicLocation, UserId};
use crate::time::parse_timestamp;

/// Which input column holds which field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FieldOrder {
    pub user: usize,
    pub timestamp: usize,
    pub location: usize,
}

impl Default for FieldOrder {
    fn default() -> Self {
        FieldOrder {
            user: 0,
            timestamp: 1,
            location: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParseOptions {
    pub delimiter: char,
    pub has_header: bool,
    pub fields: FieldOrder,
    /// Fixed local-time offset used for naive timestamps and week boundaries.
    pub utc_offset_secs: i64,
    /// When set, events outside this period are dropped.
    pub observation_period: Option<(i64, i64)>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            delimiter: ',',
            has_header: false,
            fields: FieldOrder::default(),
            utc_offset_secs: 0,
            observation_period: None,
        }
    }
}

/// Parses delimited CDR text into one trajectory per user.
///
/// Events are grouped by user id, exact duplicates (same user, timestamp and
/// location) are dropped, and each trajectory is sorted by timestamp keeping
/// the input order for ties. Users come out sorted by id, so the result does
/// not depend on record order.
pub fn parse_cdr<R: BufRead>(reader: R, options: &ParseOptions) -> Result<Vec<CdrTrajectory>> {
    let min_fields = options
        .fields
        .user
        .max(options.fields.timestamp)
        .max(options.fields.location)
        + 1;

    let mut per_user: BTreeMap<UserId, Vec<CdrEvent>> = BTreeMap::new();
    let mut seen: HashSet<(UserId, i64, String)> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if options.has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(options.delimiter).collect();
        if fields.len() < min_fields {
            return Err(Error::Record {
                line: line_no,
                reason: format!("expected at least {min_fields} fields, got {}", fields.len()),
            });
        }
        let user = UserId::new(fields[options.fields.user].trim()).map_err(|e| Error::Record {
            line: line_no,
            reason: e.to_string(),
        })?;
        let timestamp = parse_timestamp(fields[options.fields.timestamp], options.utc_offset_secs)
            .map_err(|e| Error::Record {
                line: line_no,
                reason: e.to_string(),
            })?;
        let location =
            SymbolicLocation::new(fields[options.fields.location].trim()).map_err(|e| {
                Error::Record {
                    line: line_no,
                    reason: e.to_string(),
                }
            })?;
        if let Some((start, end)) = options.observation_period {
            if timestamp < start || timestamp > end {
                continue;
            }
        }
        if !seen.insert((user.clone(), timestamp, location.label().to_string())) {
            continue;
        }
        per_user.entry(user.clone()).or_default().push(CdrEvent {
            user,
            timestamp,
            location,
        });
    }

    per_user
        .into_values()
        .map(CdrTrajectory::from_events)
        .collect()
}

/// Writes trajectories in the canonical text form (`user,epoch,location`),
/// the same layout `parse_cdr` reads with default options.
pub fn write_cdr<W: Write>(writer: &mut W, trajectories: &[CdrTrajectory]) -> Result<()> {
    for traj in trajectories {
        for event in traj.events() {
            writeln!(
                writer,
                "{},{},{}",
                event.user,
                event.timestamp,
                event.location
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Vec<CdrTrajectory> {
        parse_cdr(Cursor::new(text), &ParseOptions::default()).unwrap()
    }

    #[test]
    fn groups_records_by_user() {
        let trajs = parse("a,10,x\na,20,y\na,30,x\nb,5,z\nb,6,z2\n");
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[0].user.as_str(), "a");
        assert_eq!(trajs[0].len(), 3);
        assert_eq!(trajs[1].len(), 2);
    }

    #[test]
    fn sorts_out_of_order_records() {
        let trajs = parse("a,30,x\na,10,y\na,20,z\n");
        let times: Vec<i64> = trajs[0].events().iter().map(|e| e.timestamp).collect();
        assert_eq!(times, vec![10, 20, 30]);
    }

    #[test]
    fn drops_exact_duplicates() {
        let trajs = parse("a,10,x\na,10,x\na,10,y\n");
        assert_eq!(trajs[0].len(), 2);
    }

    #[test]
    fn reports_line_numbers_on_bad_records() {
        let err = parse_cdr(
            Cursor::new("a,10,x\na,not-a-time,y\n"),
            &ParseOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::Record { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_cdr(Cursor::new("a,10\n"), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Record { line: 1, .. }));
    }

    #[test]
    fn empty_input_yields_empty_list() {
        assert!(parse("").is_empty());
    }

    #[test]
    fn honors_header_and_field_order() {
        let options = ParseOptions {
            has_header: true,
            fields: FieldOrder {
                user: 2,
                timestamp: 0,
                location: 1,
            },
            ..ParseOptions::default()
        };
        let trajs = parse_cdr(Cursor::new("ts,loc,uid\n10,x,a\n"), &options).unwrap();
        assert_eq!(trajs[0].user.as_str(), "a");
        assert_eq!(trajs[0].events()[0].location.label(), "x");
    }

    #[test]
    fn observation_period_filters_events() {
        let options = ParseOptions {
            observation_period: Some((10, 20)),
            ..ParseOptions::default()
        };
        let trajs = parse_cdr(Cursor::new("a,5,x\na,15,y\na,25,z\n"), &options).unwrap();
        assert_eq!(trajs[0].len(), 1);
        assert_eq!(trajs[0].events()[0].timestamp, 15);
    }

    #[test]
    fn roundtrip_preserves_trajectories() {
        let text = "a,10,x\na,20,y\nb,5,z\n";
        let trajs = parse(text);
        let mut buf = Vec::new();
        write_cdr(&mut buf, &trajs).unwrap();
        let reparsed = parse_cdr(Cursor::new(buf), &ParseOptions::default()).unwrap();
        assert_eq!(trajs, reparsed);
    }
}
