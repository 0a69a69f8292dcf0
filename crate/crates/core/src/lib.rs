//! A deterministic discrete-event simulator of a memory fabric that learns.
//!
//! Memory words are enabled, run for a fixed duration and signal done. For
//! every ordered pair of words a timing filter watches for the second word
//! being triggered soon after the first one finishes. Rehearse a sequence
//! `threshold` times and the filter's set-once shift register fills up; the
//! pair is learned, and from then on enabling the first word of the chain
//! replays the rest of it with no further working-memory involvement.
//!
//! ```
//! use learnfabric::{parse_scenario, RunOutcome, Simulation};
//!
//! let scenario = parse_scenario(
//!     "fabric words=3 delay1=5 delay2=1 threshold=10
//!      dur * 4
//!      rehearse 1 3 2 reps=10 gap=2 rest=20 start=0
//!      at 500 probe 1",
//! )?;
//! let mut sim = Simulation::from_scenario(&scenario)?;
//! let outcome = sim.run_to_quiescence(scenario.max_tick)?;
//! assert_eq!(outcome, RunOutcome::Quiescent(522));
//! assert_eq!(sim.fabric().learned_set().len(), 2);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide in `book/` walks through the model chapter by chapter; its
//! code samples run as doctests of this crate.

pub mod cli;
pub mod driver;
pub mod engine;
pub mod fabric;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod trace;

pub use driver::{Probe, RehearsalPlan};
pub use engine::{EngineError, RunOutcome, Simulation, Tick};
pub use fabric::{Fabric, FabricConfig, FilterMode, Pair, WordId};
pub use report::Report;
pub use scenario::{parse_scenario, Scenario, ScenarioError};
pub use trace::{TraceRecord, EventKind};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/timing-filters.md")]
    pub struct TimingFilters;
    #[doc = include_str!("../../../book/src/replay.md")]
    pub struct Replay;
    #[doc = include_str!("../../../book/src/episodes.md")]
    pub struct Episodes;
    #[doc = include_str!("../../../book/src/scheduling.md")]
    pub struct Scheduling;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub struct Scenarios;
    #[doc = include_str!("../../../book/src/traces.md")]
    pub struct Traces;
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub struct Oracle;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
