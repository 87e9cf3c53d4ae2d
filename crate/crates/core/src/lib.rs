//! Core pipeline for learning behavioral vector representations of symbolic
//! mobility trajectories.
//!
//! The pipeline turns raw timestamped location events into low-dimensional
//! embeddings that place users with similar movement habits close together:
//!
//! 1. ingest delimited CDR text into per-user trajectories ([`cdr`]);
//! 2. segment each trajectory into stays at relevant locations, discarding
//!    noise ([`seqscan`]);
//! 3. replace locations by frequency ranks and split into weekly sequences
//!    ([`generalize`]);
//! 4. mine gap-constrained sequential patterns over the weekly corpus
//!    ([`mining`]);
//! 5. train sequence embeddings over symbols and patterns and average weekly
//!    vectors into per-user trajectory embeddings ([`embedding`]);
//! 6. reduce to 2D with PCA or UMAP ([`reduction`]);
//! 7. score the result against rank-distribution distances and run the
//!    perturbation experiment ([`eval`]).
//!
//! [`synth`] generates CDR corpora with controllable behavioral structure for
//! experiments, and [`pipeline`] wires the stages together in memory.

pub mod cdr;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod generalize;
pub mod mining;
pub mod model;
pub mod persist;
pub mod pipeline;
pub mod reduction;
pub mod seqscan;
pub mod synth;
pub mod time;
pub mod util;

pub use error::{Error, Result};
pub use model::{
    CdrEvent, CdrTrajectory, CorpusStats, Interval, NoiseKind, RankTrajectory, Segment,
    SummaryTrajectory, SymbolicLocation, UserId, WeeklyTrajectory,
};
pub use seqscan::SeqScanParams;
pub use time::WeekCalendar;
