//! Generalization of summary trajectories: replace location labels by
//! frequency ranks, then split rank trajectories into weekly fragments.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{RankTrajectory, SummaryTrajectory, SymbolicLocation, WeeklyTrajectory};
use crate::time::WeekCalendar;

/// Replaces segment locations by frequency ranks.
///
/// The location appearing in the most segments gets rank 1, the next rank 2,
/// and so on. Locations with equal counts receive increasing ranks in order of
/// their first appearance, so the mapping is a bijection onto 1..=r_max.
/// Returns the rank trajectory together with the mapping (index i holds the
/// location of rank i+1).
pub fn to_rank(summary: &SummaryTrajectory) -> Result<(RankTrajectory, Vec<SymbolicLocation>)> {
    if summary.segments.is_empty() {
        return Err(Error::Data(format!(
            "cannot rank an empty summary trajectory for {}",
            summary.user
        )));
    }
    let mut counts: HashMap<&SymbolicLocation, (usize, usize)> = HashMap::new();
    for (idx, seg) in summary.segments.iter().enumerate() {
        let entry = counts.entry(&seg.location).or_insert((0, idx));
        entry.0 += 1;
    }
    let mut order: Vec<(&SymbolicLocation, usize, usize)> = counts
        .into_iter()
        .map(|(loc, (count, first))| (loc, count, first))
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let by_rank: Vec<SymbolicLocation> = order.iter().map(|(loc, _, _)| (*loc).clone()).collect();
    let rank_of: HashMap<&SymbolicLocation, u32> = order
        .iter()
        .enumerate()
        .map(|(i, (loc, _, _))| (*loc, (i + 1) as u32))
        .collect();

    let segments = summary
        .segments
        .iter()
        .map(|seg| (seg.interval, rank_of[&seg.location]))
        .collect();

    Ok((
        RankTrajectory {
            user: summary.user.clone(),
            segments,
        },
        by_rank,
    ))
}

/// Splits a rank trajectory into one weekly trajectory per calendar week.
///
/// A segment belongs to the week containing its interval start; segments
/// starting outside the trimmed period are discarded. Weeks with no segment
/// come out with an empty rank list so callers can still count them.
pub fn split_weeks(rank: &RankTrajectory, calendar: &WeekCalendar) -> Result<Vec<WeeklyTrajectory>> {
    if calendar.weeks == 0 {
        return Err(Error::Data("calendar covers no whole week".into()));
    }
    let mut weeks: Vec<WeeklyTrajectory> = (1..=calendar.weeks)
        .map(|week| WeeklyTrajectory {
            user: rank.user.clone(),
            week,
            ranks: Vec::new(),
        })
        .collect();
    for (interval, r) in &rank.segments {
        if let Some(week) = calendar.week_of(interval.start) {
            weeks[(week - 1) as usize].ranks.push(*r);
        }
    }
    Ok(weeks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interval, Segment, UserId};
    use crate::time::{SECONDS_PER_DAY, SECONDS_PER_WEEK};

    fn summary(labels: &[&str]) -> SummaryTrajectory {
        summary_at(&labels.iter().enumerate().map(|(i, l)| (i as i64 * 100, *l)).collect::<Vec<_>>())
    }

    fn summary_at(segments: &[(i64, &str)]) -> SummaryTrajectory {
        SummaryTrajectory {
            user: UserId::new("u").unwrap(),
            segments: segments
                .iter()
                .map(|(start, label)| Segment {
                    interval: Interval {
                        start: *start,
                        end: *start + 50,
                    },
                    location: SymbolicLocation::new(*label).unwrap(),
                })
                .collect(),
            noise: Vec::new(),
        }
    }

    fn ranks(t: &RankTrajectory) -> Vec<u32> {
        t.segments.iter().map(|(_, r)| *r).collect()
    }

    #[test]
    fn frequency_order_assigns_ranks() {
        let (t, map) = to_rank(&summary(&["A", "B", "A", "B", "A"])).unwrap();
        assert_eq!(ranks(&t), vec![1, 2, 1, 2, 1]);
        assert_eq!(map[0].label(), "A");
        assert_eq!(map[1].label(), "B");
    }

    #[test]
    fn ties_break_by_first_appearance() {
        let (t, _) = to_rank(&summary(&["A", "B"])).unwrap();
        assert_eq!(ranks(&t), vec![1, 2]);
        let (t, _) = to_rank(&summary(&["B", "A"])).unwrap();
        assert_eq!(ranks(&t), vec![1, 2]);
    }

    #[test]
    fn empty_summary_is_an_error() {
        let s = SummaryTrajectory {
            user: UserId::new("u").unwrap(),
            segments: Vec::new(),
            noise: Vec::new(),
        };
        assert!(to_rank(&s).is_err());
    }

    #[test]
    fn ranks_are_contiguous_and_bijective() {
        let (t, map) = to_rank(&summary(&["x", "y", "x", "z", "z", "z", "w"])).unwrap();
        let mut seen: Vec<u32> = ranks(&t);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, (1..=map.len() as u32).collect::<Vec<_>>());
        // Bijective: distinct locations map to distinct ranks.
        let mut labels: Vec<&str> = map.iter().map(|l| l.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), map.len());
    }

    const MONDAY: i64 = 1_672_617_600;

    #[test]
    fn segments_assign_to_week_of_their_start() {
        let cal = WeekCalendar::trim(MONDAY, MONDAY + 2 * SECONDS_PER_WEEK, 0).unwrap();
        // A segment starting Sunday 23:59 of week 1, ending well into week 2.
        let start = MONDAY + SECONDS_PER_WEEK - 60;
        let rank = RankTrajectory {
            user: UserId::new("u").unwrap(),
            segments: vec![(
                Interval {
                    start,
                    end: start + 2 * SECONDS_PER_DAY,
                },
                1,
            )],
        };
        let weeks = split_weeks(&rank, &cal).unwrap();
        assert_eq!(weeks.len(), 2);
        assert_eq!(weeks[0].ranks, vec![1]);
        assert!(weeks[1].ranks.is_empty());
    }

    #[test]
    fn concatenated_weeks_preserve_order_and_content() {
        let cal = WeekCalendar::trim(MONDAY, MONDAY + 10 * SECONDS_PER_WEEK, 0).unwrap();
        let mut segments = Vec::new();
        let mut expected = Vec::new();
        for i in 0..40u32 {
            let r = 1 + (i % 5);
            let start = MONDAY + i as i64 * (10 * SECONDS_PER_WEEK) / 40;
            segments.push((
                Interval {
                    start,
                    end: start + 100,
                },
                r,
            ));
            expected.push(r);
        }
        let rank = RankTrajectory {
            user: UserId::new("u").unwrap(),
            segments,
        };
        let weeks = split_weeks(&rank, &cal).unwrap();
        assert_eq!(weeks.len(), 10);
        let concatenated: Vec<u32> = weeks.iter().flat_map(|w| w.ranks.clone()).collect();
        assert_eq!(concatenated, expected);
    }

    #[test]
    fn out_of_period_segments_are_discarded() {
        let cal = WeekCalendar::trim(MONDAY, MONDAY + SECONDS_PER_WEEK, 0).unwrap();
        let rank = RankTrajectory {
            user: UserId::new("u").unwrap(),
            segments: vec![
                (Interval { start: MONDAY - 10, end: MONDAY }, 1),
                (Interval { start: MONDAY + 10, end: MONDAY + 20 }, 2),
                (
                    Interval {
                        start: MONDAY + SECONDS_PER_WEEK,
                        end: MONDAY + SECONDS_PER_WEEK + 10,
                    },
                    3,
                ),
            ],
        };
        let weeks = split_weeks(&rank, &cal).unwrap();
        assert_eq!(weeks.len(), 1);
        assert_eq!(weeks[0].ranks, vec![2]);
    }

    #[test]
    fn all_segments_in_one_week_leave_others_empty() {
        let cal = WeekCalendar::trim(MONDAY, MONDAY + 3 * SECONDS_PER_WEEK, 0).unwrap();
        let base = MONDAY + 2 * SECONDS_PER_WEEK;
        let rank = RankTrajectory {
            user: UserId::new("u").unwrap(),
            segments: (0..3)
                .map(|i| {
                    (
                        Interval {
                            start: base + i * 1000,
                            end: base + i * 1000 + 10,
                        },
                        1u32,
                    )
                })
                .collect(),
        };
        let weeks = split_weeks(&rank, &cal).unwrap();
        assert!(weeks[0].ranks.is_empty());
        assert!(weeks[1].ranks.is_empty());
        assert_eq!(weeks[2].ranks, vec![1, 1, 1]);
    }
}
