//! Brute-force verifier.
//!
//! Everything here is recomputed from definitions: detections by literally
//! scanning the trace for each ordered pair, replay by expanding the learned
//! graph breadth-first. Detection counting reads only `enable`, `done` and
//! `ignored_enable` records, never the fabric's own `filter_fire`,
//! `latch_shift` or `learned` records. Nothing in this module calls into the
//! fabric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::engine::Tick;
use crate::fabric::{EpisodeId, FabricConfig, FilterMode, Pair, WordId};
use crate::scenario::Scenario;
use crate::trace::{EventKind, Source, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("malformed trace at record {index} (tick {tick}): {msg}")]
    MalformedTrace { index: usize, tick: Tick, msg: String },
}

/// One qualifying coincidence, after the refractory rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    /// Index of the triggering record in the trace.
    pub index: usize,
    pub tick: Tick,
    pub pair: Pair,
}

/// Detections per ordered pair. Every pair of the fabric is present.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectionCount(pub BTreeMap<Pair, u64>);

impl DetectionCount {
    pub fn get(&self, pair: Pair) -> u64 {
        self.0.get(&pair).copied().unwrap_or(0)
    }

    pub fn nonzero(&self) -> BTreeMap<Pair, u64> {
        self.0.iter().filter(|(_, c)| **c > 0).map(|(p, c)| (*p, *c)).collect()
    }
}

fn malformed(index: usize, r: &TraceRecord, msg: impl Into<String>) -> OracleError {
    OracleError::MalformedTrace {
        index,
        tick: r.t,
        msg: msg.into(),
    }
}

fn check_trace(trace: &[TraceRecord], config: &FabricConfig) -> Result<(), OracleError> {
    let mut prev = 0;
    for (i, r) in trace.iter().enumerate() {
        if r.t < prev {
            return Err(malformed(i, r, format!("tick goes backwards from {prev}")));
        }
        prev = r.t;
        if matches!(r.ev, EventKind::Enable | EventKind::Done | EventKind::IgnoredEnable) {
            match r.word {
                None => return Err(malformed(i, r, "missing word")),
                Some(w) if !(1..=config.words).contains(&w.0) => {
                    return Err(malformed(i, r, format!("unknown word {w}")))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Every qualifying detection in trace order.
pub fn detections(trace: &[TraceRecord], config: &FabricConfig) -> Result<Vec<Detection>, OracleError> {
    check_trace(trace, config)?;
    let mut out = Vec::new();
    for i in 1..=config.words {
        for j in (1..=config.words).filter(|j| *j != i) {
            let (src, dst) = (WordId(i), WordId(j));
            let mut last_done: Option<Tick> = None;
            let mut last_counted: Option<Tick> = None;
            for (index, r) in trace.iter().enumerate() {
                let triggered = match config.mode {
                    FilterMode::DoneEnable => r.ev == EventKind::Enable && r.word == Some(dst),
                    FilterMode::DoneDone => r.ev == EventKind::Done && r.word == Some(dst),
                };
                if triggered {
                    let in_window = last_done.is_some_and(|d| d <= r.t && r.t <= d + config.delay1);
                    let rested = last_counted.is_none_or(|c| r.t - c >= config.delay2);
                    if in_window && rested {
                        last_counted = Some(r.t);
                        out.push(Detection {
                            index,
                            tick: r.t,
                            pair: Pair(src, dst),
                        });
                    }
                }
                if r.ev == EventKind::Done && r.word == Some(src) {
                    last_done = Some(r.t);
                }
            }
        }
    }
    out.sort_by_key(|d| (d.index, d.pair));
    Ok(out)
}

pub fn count_detections(trace: &[TraceRecord], config: &FabricConfig) -> Result<DetectionCount, OracleError> {
    let mut counts: BTreeMap<Pair, u64> = BTreeMap::new();
    for i in 1..=config.words {
        for j in (1..=config.words).filter(|j| *j != i) {
            counts.insert(Pair::new(i, j), 0);
        }
    }
    for d in detections(trace, config)? {
        *counts.get_mut(&d.pair).expect("all pairs present") += 1;
    }
    Ok(DetectionCount(counts))
}

pub fn predict_learned(counts: &DetectionCount, threshold: u32) -> BTreeSet<Pair> {
    counts
        .0
        .iter()
        .filter(|(_, c)| **c >= u64::from(threshold))
        .map(|(p, _)| *p)
        .collect()
}

/// For each pair that reaches the threshold, the detection that got it there.
pub fn learning_points(dets: &[Detection], threshold: u32) -> BTreeMap<Pair, Detection> {
    let mut seen: BTreeMap<Pair, u32> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for d in dets {
        let n = seen.entry(d.pair).or_default();
        *n += 1;
        if *n == threshold {
            out.insert(d.pair, *d);
        }
    }
    out
}

/// Pairs learned by trace records strictly before `index`.
pub fn learned_before(points: &BTreeMap<Pair, Detection>, index: usize) -> BTreeSet<Pair> {
    points
        .iter()
        .filter(|(_, d)| d.index < index)
        .map(|(p, _)| *p)
        .collect()
}

/// Kinds of timeline entries. The declaration order is the tie-break
/// order for entries at the same tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TimelineKind {
    Done,
    OverrideBlocked,
    LoopSuppressed,
    Enable,
    /// Never predicted; only appears in observed timelines.
    IgnoredEnable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimelineEntry {
    pub tick: Tick,
    pub kind: TimelineKind,
    pub word: WordId,
    /// Source pair for auto enables and markers. Not part of comparisons:
    /// when two dones at one tick both reach a word, which of them wins is
    /// a dispatch-order detail.
    pub pair: Option<Pair>,
}

impl fmt::Display for TimelineEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {:?} word {}", self.tick, self.kind, self.word)?;
        if let Some(p) = self.pair {
            write!(f, " via {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictedTimeline {
    /// Ordered by tick, kind, word, pair.
    pub entries: Vec<TimelineEntry>,
}

impl PredictedTimeline {
    fn from_entries(mut entries: Vec<TimelineEntry>) -> Self {
        entries.sort();
        Self { entries }
    }

    /// Comparison view: `(tick, kind, word)` per entry.
    pub fn projection(&self) -> Vec<(Tick, TimelineKind, WordId)> {
        let mut v: Vec<_> = self.entries.iter().map(|e| (e.tick, e.kind, e.word)).collect();
        v.sort();
        v
    }

    pub fn shifted(&self, by: Tick) -> Self {
        Self::from_entries(
            self.entries
                .iter()
                .map(|e| TimelineEntry { tick: e.tick + by, ..*e })
                .collect(),
        )
    }

    pub fn merged(&self, other: &Self) -> Self {
        Self::from_entries(self.entries.iter().chain(&other.entries).copied().collect())
    }

    pub fn words(&self) -> BTreeSet<WordId> {
        self.entries.iter().map(|e| e.word).collect()
    }

    pub fn enables(&self) -> Vec<(Tick, WordId)> {
        self.entries
            .iter()
            .filter(|e| e.kind == TimelineKind::Enable)
            .map(|e| (e.tick, e.word))
            .collect()
    }

    /// First position where the two projections differ, if any.
    pub fn first_difference(&self, observed: &Self) -> Option<(Option<TimelineEntry>, Option<TimelineEntry>)> {
        let (a, b) = (self.projection(), observed.projection());
        if a == b {
            return None;
        }
        let find = |t: &Self, key: Option<&(Tick, TimelineKind, WordId)>| {
            key.and_then(|k| t.entries.iter().find(|e| (e.tick, e.kind, e.word) == *k).copied())
        };
        let i = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
        Some((find(self, a.get(i)), find(observed, b.get(i))))
    }
}

/// Replay of one isolated episode started by enabling `start` at tick 0.
pub fn predict_timeline(
    learned: &BTreeSet<Pair>,
    overrides: &BTreeSet<Pair>,
    start: WordId,
    config: &FabricConfig,
) -> PredictedTimeline {
    let dur = |w: WordId| config.durations[w.0 as usize - 1];
    let mut entries = vec![TimelineEntry {
        tick: 0,
        kind: TimelineKind::Enable,
        word: start,
        pair: None,
    }];
    let mut reached: BTreeSet<WordId> = BTreeSet::from([start]);
    let mut pending: BTreeSet<(Tick, WordId)> = BTreeSet::from([(dur(start), start)]);

    while let Some((t, i)) = pending.pop_first() {
        entries.push(TimelineEntry {
            tick: t,
            kind: TimelineKind::Done,
            word: i,
            pair: None,
        });
        for j in (1..=config.words).map(WordId) {
            let pair = Pair(i, j);
            if !learned.contains(&pair) {
                continue;
            }
            let kind = if overrides.contains(&pair) {
                TimelineKind::OverrideBlocked
            } else if reached.contains(&j) {
                TimelineKind::LoopSuppressed
            } else {
                reached.insert(j);
                let at = t + config.delay1;
                pending.insert((at + dur(j), j));
                entries.push(TimelineEntry {
                    tick: at,
                    kind: TimelineKind::Enable,
                    word: j,
                    pair: Some(pair),
                });
                continue;
            };
            entries.push(TimelineEntry {
                tick: t,
                kind,
                word: j,
                pair: Some(pair),
            });
        }
    }
    PredictedTimeline::from_entries(entries)
}

/// The timeline of `episode` as recorded in a trace, in absolute ticks.
pub fn observed_timeline(trace: &[TraceRecord], episode: EpisodeId) -> PredictedTimeline {
    let entries = trace
        .iter()
        .filter(|r| r.episode == Some(episode))
        .filter_map(|r| {
            let kind = match r.ev {
                EventKind::Enable => TimelineKind::Enable,
                EventKind::Done => TimelineKind::Done,
                EventKind::OverrideBlocked => TimelineKind::OverrideBlocked,
                EventKind::LoopSuppressed => TimelineKind::LoopSuppressed,
                EventKind::IgnoredEnable => TimelineKind::IgnoredEnable,
                _ => return None,
            };
            Some(TimelineEntry {
                tick: r.t,
                kind,
                word: r.word?,
                pair: r.pair,
            })
        })
        .collect();
    PredictedTimeline::from_entries(entries)
}

/// First disagreement between the oracle and a trace.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Divergence {
    #[error(transparent)]
    Malformed(#[from] OracleError),
    #[error("pair {pair}: oracle predicts {}, trace {}", if *.oracle { "learned" } else { "not learned" }, if *.oracle { "has no learned record" } else { "has a learned record" })]
    Learned { pair: Pair, oracle: bool },
    #[error("pair {pair}: learned at tick {oracle} per oracle, trace says tick {trace}")]
    LearnedTick { pair: Pair, oracle: Tick, trace: Tick },
    #[error("pair {pair}: oracle counts {oracle} detections, trace has {trace} latch shifts")]
    Count { pair: Pair, oracle: u64, trace: u64 },
    #[error("auto enable of word {word} at tick {tick}: {msg}")]
    Replay { tick: Tick, word: WordId, msg: String },
    #[error("episode {episode}: expected {}, observed {}", show(.expected), show(.observed))]
    Timeline {
        episode: EpisodeId,
        expected: Option<TimelineEntry>,
        observed: Option<TimelineEntry>,
    },
}

fn show(e: &Option<TimelineEntry>) -> String {
    e.map_or_else(|| "nothing".to_string(), |e| e.to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub learned_pairs: usize,
    pub auto_enables_checked: usize,
    pub episodes_compared: usize,
    /// Probe episodes not compared because learning, overrides or other
    /// episodes changed underneath them.
    pub episodes_skipped: usize,
}

/// Cross-checks a trace against oracle predictions for its scenario.
pub fn verify(scenario: &Scenario, trace: &[TraceRecord]) -> Result<VerifySummary, Divergence> {
    let config = &scenario.config;
    let dets = detections(trace, config)?;
    let counts = count_detections(trace, config)?;
    let predicted = predict_learned(&counts, config.threshold);
    let points = learning_points(&dets, config.threshold);

    let mut summary = VerifySummary {
        learned_pairs: predicted.len(),
        ..Default::default()
    };

    // Replay latency and provenance of every auto enable.
    for (idx, r) in trace.iter().enumerate() {
        if r.ev != EventKind::Enable || r.src != Some(Source::Auto) {
            continue;
        }
        let word = r.word.expect("checked");
        let fail = |msg: String| Divergence::Replay { tick: r.t, word, msg };
        let pair = r.pair.ok_or_else(|| fail("no source pair".into()))?;
        if pair.1 != word {
            return Err(fail(format!("source pair {pair} does not end in word {word}")));
        }
        let want = r.t.checked_sub(config.delay1);
        let done_idx = trace[..idx].iter().rposition(|d| {
            d.ev == EventKind::Done
                && d.word == Some(pair.0)
                && d.episode == r.episode
                && Some(d.t) == want
        });
        let Some(done_idx) = done_idx else {
            return Err(fail(format!(
                "no done of word {} in the same episode {} ticks earlier",
                pair.0, config.delay1
            )));
        };
        if !learned_before(&points, done_idx + 1).contains(&pair) {
            return Err(fail(format!("pair {pair} was not learned at the preceding done")));
        }
        if scenario.overrides_at(trace[done_idx].t).contains(&pair) {
            return Err(fail(format!("pair {pair} was overridden at the preceding done")));
        }
        summary.auto_enables_checked += 1;
    }

    let mut trace_learned: BTreeMap<Pair, Tick> = BTreeMap::new();
    let mut trace_shifts: BTreeMap<Pair, u64> = BTreeMap::new();
    for r in trace {
        match (r.ev, r.pair) {
            (EventKind::Learned, Some(p)) => {
                trace_learned.entry(p).or_insert(r.t);
            }
            (EventKind::LatchShift, Some(p)) => *trace_shifts.entry(p).or_default() += 1,
            _ => {}
        }
    }
    let trace_set: BTreeSet<Pair> = trace_learned.keys().copied().collect();
    if let Some(pair) = predicted.symmetric_difference(&trace_set).min() {
        return Err(Divergence::Learned {
            pair: *pair,
            oracle: predicted.contains(pair),
        });
    }
    for (pair, d) in &points {
        let t = trace_learned[pair];
        if t != d.tick {
            return Err(Divergence::LearnedTick {
                pair: *pair,
                oracle: d.tick,
                trace: t,
            });
        }
    }
    for (pair, oracle) in &counts.0 {
        let seen = trace_shifts.get(pair).copied().unwrap_or(0);
        if seen != *oracle {
            return Err(Divergence::Count {
                pair: *pair,
                oracle: *oracle,
                trace: seen,
            });
        }
    }

    // Probe episodes against breadth-first replay.
    let mut by_episode: BTreeMap<EpisodeId, Vec<usize>> = BTreeMap::new();
    for (i, r) in trace.iter().enumerate() {
        if let Some(ep) = r.episode {
            by_episode.entry(ep).or_default().push(i);
        }
    }
    for (ep, idxs) in &by_episode {
        let first = &trace[idxs[0]];
        let cpu_attempts = idxs.iter().filter(|i| trace[**i].src == Some(Source::Cpu)).count();
        let Some(word) = first.word else { continue };
        let is_probe = cpu_attempts == 1
            && scenario.probes.iter().any(|p| p.tick == first.t && p.word == word);
        if !is_probe {
            continue;
        }
        let (lo, hi) = (idxs[0], *idxs.last().unwrap());
        let (start, end) = (first.t, trace[hi].t);
        let learned = learned_before(&points, lo);
        let overrides = scenario.overrides_at(start);
        let expected = predict_timeline(&learned, &overrides, word, config).shifted(start);
        let observed = observed_timeline(trace, *ep);

        let learning_moved = points.values().any(|d| d.index >= lo && d.index <= hi);
        let override_moved = scenario.overrides.iter().any(|o| o.tick > start && o.tick <= end);
        let involved: BTreeSet<WordId> = expected.words().union(&observed.words()).copied().collect();
        let busy_at_start = involved.iter().any(|w| {
            trace[..lo]
                .iter()
                .rev()
                .find(|r| r.word == Some(*w) && matches!(r.ev, EventKind::Enable | EventKind::Done))
                .is_some_and(|r| r.ev == EventKind::Enable)
        });
        let crowded = busy_at_start || trace[lo..=hi].iter().any(|r| {
            r.episode.is_some_and(|e| e != *ep)
                && matches!(r.ev, EventKind::Enable | EventKind::Done | EventKind::IgnoredEnable)
                && r.word.is_some_and(|w| involved.contains(&w))
        });
        if learning_moved || override_moved || crowded {
            summary.episodes_skipped += 1;
            continue;
        }
        if let Some((expected, observed)) = expected.first_difference(&observed) {
            return Err(Divergence::Timeline {
                episode: *ep,
                expected,
                observed,
            });
        }
        summary.episodes_compared += 1;
    }
    Ok(summary)
}
