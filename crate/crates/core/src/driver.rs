//! Working-memory model: scripted rehearsal plans and one-shot probes.
//!
//! Rehearsal is reactive. A plan enables a word, waits for that word's
//! done, then enables the next word `gap` ticks later. After the last word
//! it rests for `rest` ticks before starting the next repetition. Every
//! repetition and every probe runs in a fresh episode.

use thiserror::Error;

use crate::engine::{Payload, Tick};
use crate::fabric::{EnableOutcome, EpisodeId, WordId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DriverError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown word {0}")]
    UnknownWord(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RehearsalPlan {
    pub sequence: Vec<WordId>,
    pub reps: u32,
    /// Ticks from a done to the next enable within a repetition.
    pub gap: Tick,
    /// Ticks from the last done of a repetition to the next repetition.
    pub rest: Tick,
    pub start: Tick,
}

impl RehearsalPlan {
    pub fn new(sequence: Vec<WordId>, reps: u32, gap: Tick, rest: Tick, start: Tick) -> Self {
        Self {
            sequence,
            reps,
            gap,
            rest,
            start,
        }
    }

    /// Checks the plan against a fabric of `words` words.
    pub fn validate(&self, words: u32) -> Result<(), DriverError> {
        if self.sequence.len() < 2 {
            return Err(DriverError::InvalidPlan(format!(
                "sequence needs at least 2 words, got {}",
                self.sequence.len()
            )));
        }
        if self.reps < 1 {
            return Err(DriverError::InvalidPlan("reps must be at least 1".into()));
        }
        for (i, w) in self.sequence.iter().enumerate() {
            if !(1..=words).contains(&w.0) {
                return Err(DriverError::InvalidPlan(format!("unknown word {w}")));
            }
            if self.sequence[..i].contains(w) {
                return Err(DriverError::InvalidPlan(format!(
                    "word {w} is repeated; a learned sequence cannot revisit a word"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub tick: Tick,
    pub word: WordId,
}

#[derive(Debug, Clone)]
struct PlanRun {
    plan: RehearsalPlan,
    rep: u32,
    pos: usize,
    episode: EpisodeId,
    awaiting: Option<WordId>,
    finished: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Driver {
    runs: Vec<PlanRun>,
    next_episode: u64,
}

impl Driver {
    pub fn new() -> Self {
        Self::default()
    }

    fn new_episode(&mut self) -> EpisodeId {
        let id = EpisodeId(self.next_episode);
        self.next_episode += 1;
        id
    }

    /// Registers a plan and returns the first enable to schedule.
    pub fn start_plan(
        &mut self,
        plan: RehearsalPlan,
        words: u32,
    ) -> Result<(PlanId, (Tick, Payload)), DriverError> {
        plan.validate(words)?;
        let id = PlanId(self.runs.len());
        let episode = self.new_episode();
        let first = (
            plan.start,
            Payload::CpuEnable {
                word: plan.sequence[0],
                episode,
                plan: Some(id),
            },
        );
        self.runs.push(PlanRun {
            plan,
            rep: 0,
            pos: 0,
            episode,
            awaiting: None,
            finished: false,
        });
        Ok((id, first))
    }

    pub fn probe(&mut self, probe: Probe, words: u32) -> Result<(Tick, Payload), DriverError> {
        if !(1..=words).contains(&probe.word.0) {
            return Err(DriverError::UnknownWord(probe.word.0));
        }
        let episode = self.new_episode();
        Ok((
            probe.tick,
            Payload::CpuEnable {
                word: probe.word,
                episode,
                plan: None,
            },
        ))
    }

    /// Called once a plan's enable has been dispatched. A plan whose word was
    /// refused for having already fired in the episode moves on at once,
    /// since no done will follow.
    pub fn on_cpu_enable(
        &mut self,
        id: PlanId,
        word: WordId,
        tick: Tick,
        outcome: EnableOutcome,
    ) -> Option<(Tick, Payload)> {
        match outcome {
            EnableOutcome::Accepted | EnableOutcome::IgnoredBusy => {
                self.runs[id.0].awaiting = Some(word);
                None
            }
            EnableOutcome::Suppressed => self.advance(id, tick),
        }
    }

    /// Advances every plan waiting on `word`.
    pub fn on_done(&mut self, word: WordId, tick: Tick) -> Vec<(Tick, Payload)> {
        let waiting: Vec<PlanId> = self
            .runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.awaiting == Some(word))
            .map(|(i, _)| PlanId(i))
            .collect();
        waiting
            .into_iter()
            .filter_map(|id| {
                self.runs[id.0].awaiting = None;
                self.advance(id, tick)
            })
            .collect()
    }

    fn advance(&mut self, id: PlanId, tick: Tick) -> Option<(Tick, Payload)> {
        let fresh = self.next_episode;
        let run = &mut self.runs[id.0];
        run.pos += 1;
        let at = if run.pos < run.plan.sequence.len() {
            tick + run.plan.gap
        } else {
            run.rep += 1;
            if run.rep >= run.plan.reps {
                run.finished = true;
                return None;
            }
            run.pos = 0;
            run.episode = EpisodeId(fresh);
            self.next_episode += 1;
            tick + run.plan.rest
        };
        let run = &self.runs[id.0];
        Some((
            at,
            Payload::CpuEnable {
                word: run.plan.sequence[run.pos],
                episode: run.episode,
                plan: Some(id),
            },
        ))
    }

    pub fn is_finished(&self, id: PlanId) -> bool {
        self.runs[id.0].finished
    }

    pub fn episodes_created(&self) -> u64 {
        self.next_episode
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u32]) -> Vec<WordId> {
        ids.iter().map(|i| WordId(*i)).collect()
    }

    fn enable_of(p: &(Tick, Payload)) -> (Tick, u32, u64) {
        match p.1 {
            Payload::CpuEnable { word, episode, .. } => (p.0, word.0, episode.0),
            _ => panic!("expected cpu enable"),
        }
    }

    #[test]
    fn repeated_word_is_rejected() {
        let plan = RehearsalPlan::new(seq(&[1, 3, 1, 2]), 1, 0, 0, 0);
        assert!(matches!(plan.validate(3), Err(DriverError::InvalidPlan(m)) if m.contains("word 1")));
    }

    #[test]
    fn short_or_unknown_sequences_are_rejected() {
        assert!(RehearsalPlan::new(seq(&[1]), 1, 0, 0, 0).validate(3).is_err());
        assert!(RehearsalPlan::new(seq(&[]), 1, 0, 0, 0).validate(3).is_err());
        assert!(RehearsalPlan::new(seq(&[1, 4]), 1, 0, 0, 0).validate(3).is_err());
        assert!(RehearsalPlan::new(seq(&[1, 2]), 0, 0, 0, 0).validate(3).is_err());
    }

    #[test]
    fn plan_waits_for_done_then_gaps() {
        let mut d = Driver::new();
        let (id, first) = d
            .start_plan(RehearsalPlan::new(seq(&[1, 3, 2]), 1, 2, 20, 0), 3)
            .unwrap();
        assert_eq!(enable_of(&first), (0, 1, 0));
        assert!(d.on_cpu_enable(id, WordId(1), 0, EnableOutcome::Accepted).is_none());
        assert!(d.on_done(WordId(2), 3).is_empty());
        let next = d.on_done(WordId(1), 4);
        assert_eq!(enable_of(&next[0]), (6, 3, 0));
        d.on_cpu_enable(id, WordId(3), 6, EnableOutcome::Accepted);
        let next = d.on_done(WordId(3), 10);
        assert_eq!(enable_of(&next[0]), (12, 2, 0));
        d.on_cpu_enable(id, WordId(2), 12, EnableOutcome::Accepted);
        assert!(d.on_done(WordId(2), 16).is_empty());
        assert!(d.is_finished(id));
    }

    #[test]
    fn each_repetition_is_a_new_episode() {
        let mut d = Driver::new();
        let (id, _) = d
            .start_plan(RehearsalPlan::new(seq(&[1, 2]), 2, 0, 20, 0), 2)
            .unwrap();
        d.on_cpu_enable(id, WordId(1), 0, EnableOutcome::Accepted);
        d.on_done(WordId(1), 4);
        d.on_cpu_enable(id, WordId(2), 4, EnableOutcome::Accepted);
        let next = d.on_done(WordId(2), 8);
        assert_eq!(enable_of(&next[0]), (28, 1, 1));
    }

    #[test]
    fn ignored_enable_still_waits_for_that_words_done() {
        let mut d = Driver::new();
        let (id, _) = d
            .start_plan(RehearsalPlan::new(seq(&[1, 2, 3]), 1, 1, 0, 0), 3)
            .unwrap();
        d.on_cpu_enable(id, WordId(1), 0, EnableOutcome::Accepted);
        d.on_done(WordId(1), 4);
        d.on_cpu_enable(id, WordId(2), 5, EnableOutcome::IgnoredBusy);
        let next = d.on_done(WordId(2), 7);
        assert_eq!(enable_of(&next[0]), (8, 3, 0));
    }

    #[test]
    fn suppressed_enable_advances_immediately() {
        let mut d = Driver::new();
        let (id, _) = d
            .start_plan(RehearsalPlan::new(seq(&[1, 2, 3]), 1, 1, 0, 0), 3)
            .unwrap();
        d.on_cpu_enable(id, WordId(1), 0, EnableOutcome::Accepted);
        d.on_done(WordId(1), 4);
        let next = d.on_cpu_enable(id, WordId(2), 5, EnableOutcome::Suppressed).unwrap();
        assert_eq!(enable_of(&next), (6, 3, 0));
    }

    #[test]
    fn probes_get_fresh_episodes() {
        let mut d = Driver::new();
        let a = d.probe(Probe { tick: 5, word: WordId(1) }, 3).unwrap();
        let b = d.probe(Probe { tick: 5, word: WordId(2) }, 3).unwrap();
        assert_eq!(enable_of(&a), (5, 1, 0));
        assert_eq!(enable_of(&b), (5, 2, 1));
        assert_eq!(d.probe(Probe { tick: 0, word: WordId(4) }, 3), Err(DriverError::UnknownWord(4)));
    }
}
