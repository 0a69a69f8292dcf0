//! End-of-run summary, derived from the trace.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{RunOutcome, Tick};
use crate::fabric::{EpisodeId, FabricConfig, Pair, WordId};
use crate::trace::{EventKind, Source, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Quiescent,
    TickLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedEntry {
    pub pair: Pair,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub pair: Pair,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: EpisodeId,
    pub trigger: WordId,
    /// Words enabled in the episode, in firing order.
    pub words: Vec<WordId>,
    pub start: Tick,
    pub end: Tick,
    /// Working-memory enable attempts in the episode after its first one.
    pub cpu_enables_after_trigger: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub outcome: Outcome,
    pub final_tick: Tick,
    /// Sorted by pair.
    pub learned: Vec<LearnedEntry>,
    /// One entry per ordered pair, sorted by pair. Counts are register
    /// shifts, i.e. detections that survived the refractory interval.
    pub detections: Vec<DetectionEntry>,
    /// Sorted by start tick, then id.
    pub episodes: Vec<EpisodeSummary>,
}

impl Report {
    pub fn build(config: &FabricConfig, trace: &[TraceRecord], outcome: RunOutcome, now: Tick) -> Self {
        let (outcome, final_tick) = match outcome {
            RunOutcome::Quiescent(t) => (Outcome::Quiescent, t),
            RunOutcome::TickLimitReached => (Outcome::TickLimit, now),
        };

        let mut learned: BTreeMap<Pair, Tick> = BTreeMap::new();
        let mut counts: BTreeMap<Pair, u64> = config.pairs().map(|p| (p, 0)).collect();
        let mut episodes: BTreeMap<EpisodeId, EpisodeSummary> = BTreeMap::new();

        for r in trace {
            match r.ev {
                EventKind::Learned => {
                    if let Some(p) = r.pair {
                        learned.entry(p).or_insert(r.t);
                    }
                }
                EventKind::LatchShift => {
                    if let Some(p) = r.pair {
                        *counts.entry(p).or_default() += 1;
                    }
                }
                _ => {}
            }
            let (Some(ep), Some(word)) = (r.episode, r.word) else {
                continue;
            };
            let fresh = !episodes.contains_key(&ep);
            let summary = episodes.entry(ep).or_insert_with(|| EpisodeSummary {
                episode: ep,
                trigger: word,
                words: Vec::new(),
                start: r.t,
                end: r.t,
                cpu_enables_after_trigger: 0,
            });
            summary.end = summary.end.max(r.t);
            if r.src == Some(Source::Cpu) && !fresh {
                summary.cpu_enables_after_trigger += 1;
            }
            if r.ev == EventKind::Enable {
                summary.words.push(word);
            }
        }

        let mut episodes: Vec<EpisodeSummary> = episodes.into_values().collect();
        episodes.sort_by_key(|e| (e.start, e.episode));
        Self {
            outcome,
            final_tick,
            learned: learned
                .into_iter()
                .map(|(pair, tick)| LearnedEntry { pair, tick })
                .collect(),
            detections: counts
                .into_iter()
                .map(|(pair, count)| DetectionEntry { pair, count })
                .collect(),
            episodes,
        }
    }

    pub fn learned_pairs(&self) -> Vec<Pair> {
        self.learned.iter().map(|l| l.pair).collect()
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&EpisodeSummary> {
        self.episodes.iter().find(|e| e.episode == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn write<W: Write>(&self, mut sink: W) -> io::Result<()> {
        sink.write_all(self.to_json().as_bytes())?;
        sink.flush()
    }
}
