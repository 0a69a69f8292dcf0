//! Deterministic discrete-event scheduler.
//!
//! Events are dispatched in strictly ascending `(tick, seq)` order, where
//! `seq` is the insertion number assigned by [`EventQueue::schedule`]. Two
//! events scheduled for the same tick therefore dispatch in FIFO order.
//!
//! [`Simulation`] ties the queue to a [`Fabric`] and a [`Driver`] and owns the
//! trace of everything that was dispatched.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::driver::{Driver, DriverError, PlanId, Probe, RehearsalPlan};
use crate::fabric::{
    EnableSource, EpisodeId, Fabric, FabricConfig, FabricError, Pair, WordId,
};
use crate::report::Report;
use crate::scenario::Scenario;
use crate::trace::TraceRecord;

/// Abstract simulation time.
pub type Tick = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at tick {tick} while the clock is at {now}")]
    SchedulingInPast { tick: Tick, now: Tick },
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// What an event does when it is dispatched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Working memory enables a word. `plan` is set when a rehearsal plan
    /// issued the enable, and unset for probes.
    CpuEnable {
        word: WordId,
        episode: EpisodeId,
        plan: Option<PlanId>,
    },
    /// A learned switch forwards the done of `pair.0` to `pair.1`.
    AutoEnable {
        word: WordId,
        pair: Pair,
        episode: EpisodeId,
    },
    WordDone {
        word: WordId,
        episode: EpisodeId,
    },
    /// Opens or closes the override series switch of a pair.
    Override { pair: Pair, open: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub tick: Tick,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (Tick, u64) {
        (self.tick, self.seq)
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Pending events plus the simulation clock.
#[derive(Debug, Default, Clone)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now: Tick,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an event and returns the sequence number it was given.
    pub fn schedule(&mut self, tick: Tick, payload: Payload) -> Result<u64, EngineError> {
        if tick < self.now {
            return Err(EngineError::SchedulingInPast {
                tick,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { tick, seq, payload }));
        Ok(seq)
    }

    /// Removes the least `(tick, seq)` event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(event) = self.heap.pop()?;
        debug_assert!(event.tick >= self.now);
        self.now = event.tick;
        Some(event)
    }

    pub fn peek_tick(&self) -> Option<Tick> {
        self.heap.peek().map(|Reverse(e)| e.tick)
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Number of events ever scheduled.
    pub fn scheduled_count(&self) -> u64 {
        self.next_seq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// The queue emptied; carries the clock at that point.
    Quiescent(Tick),
    /// The next pending event lies beyond the tick bound.
    TickLimitReached,
}

/// One complete simulation: scheduler, fabric, driver and trace.
///
/// A `Simulation` shares nothing with other simulations and may be moved
/// to another thread.
#[derive(Debug, Clone)]
pub struct Simulation {
    queue: EventQueue,
    fabric: Fabric,
    driver: Driver,
    trace: Vec<TraceRecord>,
    dispatched: u64,
}

impl Simulation {
    pub fn new(config: FabricConfig) -> Result<Self, EngineError> {
        Ok(Self {
            queue: EventQueue::new(),
            fabric: Fabric::new(config)?,
            driver: Driver::new(),
            trace: Vec::new(),
            dispatched: 0,
        })
    }

    /// Builds a simulation and schedules everything the scenario asks for.
    ///
    /// Override directives are scheduled first, then rehearsal plans, then
    /// probes, each group in file order. At equal ticks this order is also
    /// the dispatch order.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, EngineError> {
        let mut sim = Self::new(scenario.config.clone())?;
        for ov in &scenario.overrides {
            sim.schedule_override(ov.tick, ov.pair, ov.open)?;
        }
        for plan in &scenario.plans {
            sim.start_plan(plan.clone())?;
        }
        for probe in &scenario.probes {
            sim.probe(*probe)?;
        }
        Ok(sim)
    }

    /// Disables the episode no-repeat rule. Only useful for exercising the
    /// tick-limit outcome on cyclic learned graphs.
    #[doc(hidden)]
    pub fn set_loop_suppression(&mut self, enabled: bool) {
        self.fabric.set_loop_suppression(enabled);
    }

    pub fn schedule(&mut self, tick: Tick, payload: Payload) -> Result<u64, EngineError> {
        self.queue.schedule(tick, payload)
    }

    pub fn schedule_override(&mut self, tick: Tick, pair: Pair, open: bool) -> Result<(), EngineError> {
        self.fabric.check_pair(pair)?;
        self.queue.schedule(tick, Payload::Override { pair, open })?;
        Ok(())
    }

    pub fn start_plan(&mut self, plan: RehearsalPlan) -> Result<PlanId, EngineError> {
        let (id, (tick, payload)) = self.driver.start_plan(plan, self.fabric.config().words)?;
        self.queue.schedule(tick, payload)?;
        Ok(id)
    }

    pub fn probe(&mut self, probe: Probe) -> Result<EpisodeId, EngineError> {
        let (tick, payload) = self.driver.probe(probe, self.fabric.config().words)?;
        let episode = match payload {
            Payload::CpuEnable { episode, .. } => episode,
            _ => unreachable!("probes always produce a cpu enable"),
        };
        self.queue.schedule(tick, payload)?;
        Ok(episode)
    }

    /// Dispatches the next event, if any.
    pub fn step(&mut self) -> Result<Option<Event>, EngineError> {
        let Some(event) = self.queue.pop() else {
            return Ok(None);
        };
        self.dispatched += 1;
        let tick = event.tick;
        let mut fx = Effects::default();
        match &event.payload {
            Payload::CpuEnable {
                word,
                episode,
                plan,
            } => {
                let outcome =
                    self.fabric
                        .on_enable(*word, tick, EnableSource::Cpu, *episode, &mut fx)?;
                if let Some(plan) = plan {
                    fx.schedule
                        .extend(self.driver.on_cpu_enable(*plan, *word, tick, outcome));
                }
            }
            Payload::AutoEnable {
                word,
                pair,
                episode,
            } => {
                self.fabric
                    .on_enable(*word, tick, EnableSource::Auto(*pair), *episode, &mut fx)?;
            }
            Payload::WordDone { word, episode } => {
                self.fabric.on_done(*word, tick, *episode, &mut fx)?;
                fx.schedule.extend(self.driver.on_done(*word, tick));
            }
            Payload::Override { pair, open } => {
                self.fabric.set_override(*pair, *open)?;
                fx.records.push(TraceRecord::override_set(tick, *pair, *open));
            }
        }
        self.trace.append(&mut fx.records);
        for (t, payload) in fx.schedule {
            self.queue.schedule(t, payload)?;
        }
        Ok(Some(event))
    }

    /// Dispatches until the queue is empty or the next event lies past
    /// `max_tick`.
    pub fn run_to_quiescence(&mut self, max_tick: Tick) -> Result<RunOutcome, EngineError> {
        loop {
            match self.queue.peek_tick() {
                None => return Ok(RunOutcome::Quiescent(self.queue.now())),
                Some(t) if t > max_tick => return Ok(RunOutcome::TickLimitReached),
                Some(_) => {
                    self.step()?;
                }
            }
        }
    }

    pub fn now(&self) -> Tick {
        self.queue.now()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn scheduled(&self) -> u64 {
        self.queue.scheduled_count()
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    pub fn report(&self, outcome: RunOutcome) -> Report {
        Report::build(self.fabric.config(), &self.trace, outcome, self.now())
    }
}

/// Output of a fabric or driver handler: trace records to append and events
/// to schedule, both in emission order.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Effects {
    pub records: Vec<TraceRecord>,
    pub schedule: Vec<(Tick, Payload)>,
}
