//! Line-oriented trace records.
//!
//! Each dispatched event produces one primary record (`enable`,
//! `ignored_enable`, `loop_suppressed`, `done` or `override_set`), possibly
//! followed by records derived from it. Records are written as JSON Lines
//! with keys in the fixed order `t, ev, word, pair, src, episode, stage,
//! open`; absent fields are omitted and every value is an integer, a string
//! or a boolean.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Tick;
use crate::fabric::{EpisodeId, Pair, WordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enable,
    Done,
    IgnoredEnable,
    FilterFire,
    LatchShift,
    Learned,
    AutoEnableScheduled,
    LoopSuppressed,
    OverrideBlocked,
    OverrideSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Cpu,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t: Tick,
    pub ev: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<WordId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
}

impl TraceRecord {
    fn bare(t: Tick, ev: EventKind) -> Self {
        Self {
            t,
            ev,
            word: None,
            pair: None,
            src: None,
            episode: None,
            stage: None,
            open: None,
        }
    }

    fn attempt(t: Tick, ev: EventKind, word: WordId, pair: Option<Pair>, episode: EpisodeId) -> Self {
        Self {
            word: Some(word),
            pair,
            src: Some(if pair.is_some() { Source::Auto } else { Source::Cpu }),
            episode: Some(episode),
            ..Self::bare(t, ev)
        }
    }

    /// `pair` is the learned switch that forwarded the enable, if any.
    pub fn enable(t: Tick, word: WordId, pair: Option<Pair>, episode: EpisodeId) -> Self {
        Self::attempt(t, EventKind::Enable, word, pair, episode)
    }

    pub fn ignored_enable(t: Tick, word: WordId, pair: Option<Pair>, episode: EpisodeId) -> Self {
        Self::attempt(t, EventKind::IgnoredEnable, word, pair, episode)
    }

    /// A learned switch would forward to a word already in the episode.
    pub fn loop_suppressed(t: Tick, word: WordId, pair: Pair, episode: EpisodeId) -> Self {
        Self {
            word: Some(word),
            pair: Some(pair),
            episode: Some(episode),
            ..Self::bare(t, EventKind::LoopSuppressed)
        }
    }

    /// An enable was dispatched for a word that already fired in its
    /// episode. Unlike [`TraceRecord::loop_suppressed`] it carries `src`.
    pub fn suppressed_enable(t: Tick, word: WordId, pair: Option<Pair>, episode: EpisodeId) -> Self {
        Self::attempt(t, EventKind::LoopSuppressed, word, pair, episode)
    }

    pub fn done(t: Tick, word: WordId, episode: EpisodeId) -> Self {
        Self {
            word: Some(word),
            episode: Some(episode),
            ..Self::bare(t, EventKind::Done)
        }
    }

    pub fn filter_fire(t: Tick, pair: Pair) -> Self {
        Self {
            pair: Some(pair),
            ..Self::bare(t, EventKind::FilterFire)
        }
    }

    /// `stage` is the number of set latches after the shift.
    pub fn latch_shift(t: Tick, pair: Pair, stage: u32) -> Self {
        Self {
            pair: Some(pair),
            stage: Some(stage),
            ..Self::bare(t, EventKind::LatchShift)
        }
    }

    pub fn learned(t: Tick, pair: Pair) -> Self {
        Self {
            pair: Some(pair),
            ..Self::bare(t, EventKind::Learned)
        }
    }

    pub fn auto_enable_scheduled(t: Tick, word: WordId, pair: Pair, episode: EpisodeId) -> Self {
        Self {
            word: Some(word),
            pair: Some(pair),
            episode: Some(episode),
            ..Self::bare(t, EventKind::AutoEnableScheduled)
        }
    }

    pub fn override_blocked(t: Tick, word: WordId, pair: Pair, episode: EpisodeId) -> Self {
        Self {
            word: Some(word),
            pair: Some(pair),
            episode: Some(episode),
            ..Self::bare(t, EventKind::OverrideBlocked)
        }
    }

    pub fn override_set(t: Tick, pair: Pair, open: bool) -> Self {
        Self {
            pair: Some(pair),
            open: Some(open),
            ..Self::bare(t, EventKind::OverrideSet)
        }
    }

    /// Whether this is the record a dispatched event produces first.
    pub fn is_primary(&self) -> bool {
        match self.ev {
            EventKind::Enable
            | EventKind::IgnoredEnable
            | EventKind::Done
            | EventKind::OverrideSet => true,
            EventKind::LoopSuppressed => self.src.is_some(),
            _ => false,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut sink: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut sink, r)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

pub fn trace_bytes(records: &[TraceRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(records, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads JSON Lines records. Blank lines are skipped.
pub fn read_trace<R: BufRead>(source: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: i + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}
