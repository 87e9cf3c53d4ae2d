//! Synthetic CDR corpora with controllable behavioral structure.
//!
//! Each user draws an archetype and a personal set of locations, then emits
//! Poisson-timed events along a daily schedule with a two-peak diurnal
//! intensity. Commuters alternate home and a workplace on weekdays with rare
//! short outings; homebodies stay at a single location; roamers take long,
//! event-dense stays at many extra locations with Zipf-distributed preference.
//! Per-user parameter jitter spreads behavior inside each archetype so rank
//! distributions form a continuum rather than three identical clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CdrEvent, CdrTrajectory, SymbolicLocation, UserId};
use crate::time::SECONDS_PER_DAY;
use crate::util::derive_seed;

/// Default dataset start: a Monday at 00:00 UTC, so a whole-week generation
/// period needs no trimming.
pub const DEFAULT_START: i64 = 1_672_617_600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Commuter,
    Homebody,
    Roamer,
}

impl std::fmt::Display for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Archetype::Commuter => f.write_str("commuter"),
            Archetype::Homebody => f.write_str("homebody"),
            Archetype::Roamer => f.write_str("roamer"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_weeks: u32,
    /// Size of the location dictionary.
    pub n_locations: usize,
    /// Mean events per user per day (before outing bursts).
    pub events_per_day: f64,
    pub commuter_share: f64,
    pub homebody_share: f64,
    pub roamer_share: f64,
    /// Mean probability that an event's location is replaced by a random one.
    /// Per-user rates jitter around this value, and each day's replacements
    /// draw from a small per-day palette, which matches how cell-assignment
    /// noise arrives in bursts rather than as independent uniform flips.
    pub noise_rate: f64,
    /// Preference skew over a user's extra locations.
    pub zipf_exponent: f64,
    pub seed: u64,
    /// First instant of the observation period (UTC epoch seconds).
    pub start: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 500,
            n_weeks: 10,
            n_locations: 250,
            events_per_day: 10.0,
            commuter_share: 0.45,
            homebody_share: 0.15,
            roamer_share: 0.4,
            noise_rate: 0.05,
            zipf_exponent: 1.5,
            seed: 42,
            start: DEFAULT_START,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 1 || self.n_weeks < 1 {
            return Err(Error::Config("need at least one user and one week".into()));
        }
        if self.n_locations < 3 {
            return Err(Error::Config("need at least three locations".into()));
        }
        let mix = self.commuter_share + self.homebody_share + self.roamer_share;
        if (mix - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "archetype shares must sum to 1, got {mix}"
            )));
        }
        for (name, v) in [
            ("commuter_share", self.commuter_share),
            ("homebody_share", self.homebody_share),
            ("roamer_share", self.roamer_share),
            ("noise_rate", self.noise_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.events_per_day <= 0.0 {
            return Err(Error::Config("events_per_day must be positive".into()));
        }
        Ok(())
    }

    pub fn period_end(&self) -> i64 {
        self.start + i64::from(self.n_weeks) * 7 * SECONDS_PER_DAY
    }
}

struct Profile {
    archetype: Archetype,
    home: usize,
    work: usize,
    extras: Vec<usize>,
    extra_cdf: Vec<f64>,
    work_start: f64,
    work_end: f64,
    /// Which weekdays this user actually commutes (part-time spread).
    workdays: [bool; 5],
    /// Per-day probability of a short leisure outing (commuter only).
    outing_prob: f64,
    /// Mean count of long stays per day (roamer only).
    trip_rate: f64,
    /// This user's own event-replacement probability.
    noise_rate: f64,
}

fn location_label(idx: usize) -> String {
    format!("L{idx:04}")
}

fn build_profile(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Profile {
    let archetype = {
        let x: f64 = rng.gen();
        if x < cfg.commuter_share {
            Archetype::Commuter
        } else if x < cfg.commuter_share + cfg.homebody_share {
            Archetype::Homebody
        } else {
            Archetype::Roamer
        }
    };
    let home = rng.gen_range(0..cfg.n_locations);
    let work = loop {
        let w = rng.gen_range(0..cfg.n_locations);
        if w != home {
            break w;
        }
    };
    let n_extras = match archetype {
        Archetype::Commuter => rng.gen_range(1..=8),
        Archetype::Homebody => 0,
        Archetype::Roamer => rng.gen_range(2..=12),
    };
    let mut extras = Vec::with_capacity(n_extras);
    while extras.len() < n_extras {
        let e = rng.gen_range(0..cfg.n_locations);
        if e != home && e != work && !extras.contains(&e) {
            extras.push(e);
        }
    }
    // Zipf preference over the extras, as a cumulative distribution.
    let exponent = (cfg.zipf_exponent + rng.gen_range(-0.7..0.7)).max(0.1);
    let mut extra_cdf = Vec::with_capacity(extras.len());
    let mut acc = 0.0;
    for i in 0..extras.len() {
        acc += 1.0 / ((i + 1) as f64).powf(exponent);
        extra_cdf.push(acc);
    }

    Profile {
        archetype,
        home,
        work,
        extras,
        extra_cdf,
        work_start: (8.6 + rng.gen_range(-0.8..0.8f64)).clamp(7.0, 10.0),
        work_end: {
            let span: f64 = rng.gen_range(3.0..9.5);
            (8.6 + span).clamp(11.0, 20.0)
        },
        workdays: {
            let mut days = [false; 5];
            let count = rng.gen_range(1..=5usize);
            let mut chosen = 0;
            while chosen < count {
                let d = rng.gen_range(0..5);
                if !days[d] {
                    days[d] = true;
                    chosen += 1;
                }
            }
            days
        },
        outing_prob: match archetype {
            Archetype::Commuter => rng.gen_range(0.02..0.6),
            Archetype::Homebody => 0.0,
            Archetype::Roamer => 0.0,
        },
        trip_rate: match archetype {
            Archetype::Roamer => rng.gen_range(0.1..1.5),
            _ => 0.0,
        },
        noise_rate: (cfg.noise_rate * rng.gen_range(0.5..1.5)).clamp(0.0, 1.0),
    }
}

fn pick_extra(profile: &Profile, rng: &mut ChaCha8Rng) -> usize {
    let total = *profile.extra_cdf.last().expect("roamer has extras");
    let x = rng.gen::<f64>() * total;
    let idx = profile.extra_cdf.partition_point(|&c| c <= x);
    profile.extras[idx.min(profile.extras.len() - 1)]
}

/// Two-peak diurnal density: morning and evening activity plus a daytime base.
fn diurnal_second(rng: &mut ChaCha8Rng) -> i64 {
    let morning = Normal::new(8.5, 1.2).expect("valid");
    let evening = Normal::new(19.5, 2.0).expect("valid");
    loop {
        let x: f64 = rng.gen();
        let hour = if x < 0.30 {
            morning.sample(rng)
        } else if x < 0.75 {
            evening.sample(rng)
        } else {
            rng.gen_range(7.0..23.0)
        };
        if (0.0..24.0).contains(&hour) {
            return (hour * 3600.0) as i64;
        }
    }
}

/// A scheduled stay away from the default location.
struct Block {
    start: i64, // seconds within the day
    end: i64,
    location: usize,
    /// Mean extra events emitted inside the stay. Work days and long trips
    /// get bursts so the stay accumulates enough occurrences to register;
    /// short leisure outings stay sparse and read as local noise.
    burst: f64,
}

fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn generate_user(
    cfg: &SynthConfig,
    user_index: usize,
) -> (CdrTrajectory, Archetype) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "user", user_index as u64));
    let profile = build_profile(cfg, &mut rng);
    let user = UserId::new(format!("u{user_index:05}")).expect("non-empty");
    let n_days = i64::from(cfg.n_weeks) * 7;
    let period_end = cfg.period_end();

    // Communication volume swings week to week while the underlying schedule
    // stays put, so some weeks observe a stay from only a couple of events.
    let activity: Vec<f64> = (0..cfg.n_weeks)
        .map(|_| {
            let z: f64 = Normal::new(0.0, 0.7).expect("valid").sample(&mut rng);
            z.exp().clamp(0.15, 4.0)
        })
        .collect();

    let mut events: Vec<CdrEvent> = Vec::new();
    for day in 0..n_days {
        let day_start = cfg.start + day * SECONDS_PER_DAY;
        let weekday = day % 7; // 0 = Monday, generation starts on a Monday
        let week_activity = activity[(day / 7) as usize];

        let mut blocks: Vec<Block> = Vec::new();
        match profile.archetype {
            Archetype::Commuter => {
                if weekday < 5 && profile.workdays[weekday as usize] {
                    let jitter = rng.gen_range(-0.4..0.4);
                    blocks.push(Block {
                        start: ((profile.work_start + jitter) * 3600.0) as i64,
                        end: ((profile.work_end + jitter) * 3600.0) as i64,
                        location: profile.work,
                        burst: 2.5,
                    });
                }
                if !profile.extras.is_empty() && rng.gen::<f64>() < profile.outing_prob {
                    let start_h: f64 = if weekday < 5 {
                        rng.gen_range(18.5..21.0)
                    } else {
                        rng.gen_range(10.0..19.0)
                    };
                    let duration: f64 = rng.gen_range(1.0..2.5);
                    blocks.push(Block {
                        start: (start_h * 3600.0) as i64,
                        end: ((start_h + duration).min(23.9) * 3600.0) as i64,
                        location: pick_extra(&profile, &mut rng),
                        burst: 0.0,
                    });
                }
            }
            Archetype::Homebody => {}
            Archetype::Roamer => {
                for _ in 0..poisson_count(profile.trip_rate, &mut rng) {
                    let start_h: f64 = rng.gen_range(8.0..19.0);
                    let duration: f64 = rng.gen_range(2.5..7.0);
                    blocks.push(Block {
                        start: (start_h * 3600.0) as i64,
                        end: ((start_h + duration).min(23.9) * 3600.0) as i64,
                        location: pick_extra(&profile, &mut rng),
                        burst: 2.5,
                    });
                }
            }
        }

        // Base diurnal events, then a burst of activity inside each stay so
        // stays accumulate enough occurrences to register as clusters.
        let mut seconds: Vec<i64> =
            (0..poisson_count(cfg.events_per_day * week_activity, &mut rng))
                .map(|_| diurnal_second(&mut rng))
                .collect();
        // Handover chains while moving to or from a stay: events at arbitrary
        // cells in the 45 minutes around each block boundary, scaled by the
        // user's noise level so a noise-free corpus stays perfectly clean.
        let transit_mean = 2.0 * profile.noise_rate;
        let mut transit: Vec<(i64, usize)> = Vec::new();
        for block in &blocks {
            if block.burst > 0.0 {
                let burst = poisson_count(block.burst * week_activity, &mut rng);
                for _ in 0..burst {
                    seconds.push(rng.gen_range(block.start..block.end.max(block.start + 1)));
                }
            }
            for window in [
                (block.start - 2700).max(0)..block.start.max(1),
                block.end..(block.end + 2700).min(SECONDS_PER_DAY - 1).max(block.end + 1),
            ] {
                for _ in 0..poisson_count(transit_mean, &mut rng) {
                    transit.push((
                        rng.gen_range(window.clone()),
                        rng.gen_range(0..cfg.n_locations),
                    ));
                }
            }
        }

        // Replacement noise draws from a small per-day palette.
        let palette: Vec<usize> = (0..rng.gen_range(1..=2))
            .map(|_| rng.gen_range(0..cfg.n_locations))
            .collect();

        let mut emit = |sec: i64, location_idx: usize, rng: &mut ChaCha8Rng| {
            let location_idx = if rng.gen::<f64>() < profile.noise_rate {
                palette[rng.gen_range(0..palette.len())]
            } else {
                location_idx
            };
            let timestamp = (day_start + sec).min(period_end - 1);
            events.push(CdrEvent {
                user: user.clone(),
                timestamp,
                location: SymbolicLocation::new(location_label(location_idx))
                    .expect("non-empty label"),
            });
        };
        for sec in seconds {
            let location_idx = blocks
                .iter()
                .rev()
                .find(|b| sec >= b.start && sec < b.end)
                .map(|b| b.location)
                .unwrap_or(profile.home);
            emit(sec, location_idx, &mut rng);
        }
        for (sec, location_idx) in transit {
            emit(sec, location_idx, &mut rng);
        }
    }

    // Guarantee non-empty trajectories even at tiny event rates.
    if events.is_empty() {
        events.push(CdrEvent {
            user: user.clone(),
            timestamp: cfg.start + SECONDS_PER_DAY / 2,
            location: SymbolicLocation::new(location_label(profile.home)).expect("non-empty"),
        });
    }

    (
        CdrTrajectory::from_events(events).expect("events share one user"),
        profile.archetype,
    )
}

/// Generates the corpus with ground-truth archetype labels, deterministically
/// from the seed. Users are generated independently so the work parallelizes
/// without affecting the output.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<(Vec<CdrTrajectory>, Vec<(UserId, Archetype)>)> {
    cfg.validate()?;
    use rayon::prelude::*;
    let results: Vec<(CdrTrajectory, Archetype)> = (0..cfg.n_users)
        .into_par_iter()
        .map(|i| generate_user(cfg, i))
        .collect();
    let labels = results
        .iter()
        .map(|(t, a)| (t.user.clone(), *a))
        .collect();
    Ok((results.into_iter().map(|(t, _)| t).collect(), labels))
}
