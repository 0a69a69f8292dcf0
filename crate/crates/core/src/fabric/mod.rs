//! The learning memory fabric.
//!
//! A fabric holds `K` words, one [`TimingFilter`] for every ordered pair of
//! distinct words and a [`SwitchMatrix`]. Each filter watches for its
//! destination word being triggered within `delay1` ticks of its source
//! word finishing. Every such coincidence shifts the filter's learn register;
//! once the register is full the pair is learned and from then on a done of
//! the source word enables the destination word `delay1` ticks later with
//! no help from working memory.
//!
//! Handlers never touch the event queue directly. They append trace records
//! and follow-up events to an [`Effects`] buffer which the engine drains.

mod filter;
mod switch;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Effects, Payload, Tick};
use crate::trace::TraceRecord;

pub use filter::{LearnRegister, Shift, TimingFilter};
pub use switch::SwitchMatrix;

/// 1-based index of a memory word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordId(pub u32);

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordered pair `(source, destination)`. Serializes as `[i, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(pub WordId, pub WordId);

impl Pair {
    pub fn new(src: u32, dst: u32) -> Self {
        Self(WordId(src), WordId(dst))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpisodeId(pub u64);

impl fmt::Display for EpisodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Which events count as the second input of a timing filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    /// done of `i`, then enable of `j`.
    #[default]
    DoneEnable,
    /// done of `i`, then done of `j`.
    DoneDone,
}

impl FilterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterMode::DoneEnable => "done_enable",
            FilterMode::DoneDone => "done_done",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("invalid fabric config: {0}")]
    InvalidConfig(String),
    #[error("unknown word {0}")]
    UnknownWord(u32),
    #[error("pair ({0},{0}) connects a word to itself")]
    SelfPair(u32),
    #[error("done of word {word} at tick {tick} does not match an outstanding enable")]
    UnexpectedDone { word: u32, tick: Tick },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricConfig {
    /// Number of words `K`.
    pub words: u32,
    /// Hold window of a done signal, and the replay latency.
    pub delay1: Tick,
    /// Minimum spacing between two register shifts of one filter.
    pub delay2: Tick,
    /// Rehearsals needed before a pair is learned (register depth).
    pub threshold: u32,
    /// Duration of each word, indexed by `id - 1`.
    pub durations: Vec<Tick>,
    pub mode: FilterMode,
}

impl FabricConfig {
    /// Config with the same duration for every word and the default mode.
    pub fn uniform(words: u32, delay1: Tick, delay2: Tick, threshold: u32, duration: Tick) -> Self {
        Self {
            words,
            delay1,
            delay2,
            threshold,
            durations: vec![duration; words as usize],
            mode: FilterMode::DoneEnable,
        }
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        let bad = |msg: String| Err(FabricError::InvalidConfig(msg));
        if self.words < 2 {
            return bad(format!("words must be at least 2, got {}", self.words));
        }
        if self.delay1 < 1 || self.delay2 < 1 {
            return bad("delay1 and delay2 must be at least 1".into());
        }
        if self.delay2 > self.delay1 {
            return bad(format!(
                "delay2 ({}) must not exceed delay1 ({})",
                self.delay2, self.delay1
            ));
        }
        if self.threshold < 1 {
            return bad("threshold must be at least 1".into());
        }
        if self.durations.len() != self.words as usize {
            return bad(format!(
                "expected {} word durations, got {}",
                self.words,
                self.durations.len()
            ));
        }
        if let Some(i) = self.durations.iter().position(|d| *d < 1) {
            return bad(format!("duration of word {} must be at least 1", i + 1));
        }
        Ok(())
    }

    pub fn contains(&self, word: WordId) -> bool {
        (1..=self.words).contains(&word.0)
    }

    /// # Panics
    ///
    /// If `word` is outside `1..=K`.
    pub fn duration(&self, word: WordId) -> Tick {
        self.durations[word.0 as usize - 1]
    }

    pub fn word_ids(&self) -> impl Iterator<Item = WordId> {
        (1..=self.words).map(WordId)
    }

    /// All ordered pairs of distinct words, ascending.
    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.word_ids()
            .flat_map(move |i| self.word_ids().filter(move |j| *j != i).map(move |j| Pair(i, j)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordState {
    /// Tick of the pending done. Present from an accepted enable until its
    /// done is dispatched.
    pub busy_until: Option<Tick>,
    episode: Option<EpisodeId>,
}

impl WordState {
    pub fn is_busy(&self) -> bool {
        self.busy_until.is_some()
    }
}

/// Activation chain rooted at one working-memory enable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Episode {
    /// Words enabled in this episode.
    pub fired: BTreeSet<WordId>,
    /// Words with an auto enable scheduled but not yet dispatched.
    pub claimed: BTreeSet<WordId>,
}

impl Episode {
    /// Whether `word` has fired or is about to fire in this episode.
    pub fn involves(&self, word: WordId) -> bool {
        self.fired.contains(&word) || self.claimed.contains(&word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnableSource {
    Cpu,
    Auto(Pair),
}

impl EnableSource {
    fn pair(self) -> Option<Pair> {
        match self {
            EnableSource::Cpu => None,
            EnableSource::Auto(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnableOutcome {
    Accepted,
    /// The word was still discharging a previous enable.
    IgnoredBusy,
    /// The word already fired in this episode.
    Suppressed,
}

#[derive(Debug, Clone)]
pub struct Fabric {
    config: FabricConfig,
    words: Vec<WordState>,
    filters: Vec<TimingFilter>,
    switches: SwitchMatrix,
    episodes: BTreeMap<EpisodeId, Episode>,
    loop_suppression: bool,
}

impl Fabric {
    pub fn new(config: FabricConfig) -> Result<Self, FabricError> {
        config.validate()?;
        let filters = config
            .pairs()
            .map(|p| TimingFilter::new(p, config.threshold))
            .collect();
        Ok(Self {
            words: vec![WordState::default(); config.words as usize],
            filters,
            switches: SwitchMatrix::default(),
            episodes: BTreeMap::new(),
            loop_suppression: true,
            config,
        })
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn filters(&self) -> &[TimingFilter] {
        &self.filters
    }

    pub fn filter(&self, pair: Pair) -> Option<&TimingFilter> {
        self.filter_index(pair).map(|i| &self.filters[i])
    }

    pub fn word(&self, word: WordId) -> Option<&WordState> {
        self.config
            .contains(word)
            .then(|| &self.words[word.0 as usize - 1])
    }

    pub fn switches(&self) -> &SwitchMatrix {
        &self.switches
    }

    pub fn learned_set(&self) -> BTreeSet<Pair> {
        self.switches.learned()
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&Episode> {
        self.episodes.get(&id)
    }

    pub(crate) fn set_loop_suppression(&mut self, enabled: bool) {
        self.loop_suppression = enabled;
    }

    pub fn check_word(&self, word: WordId) -> Result<(), FabricError> {
        if self.config.contains(word) {
            Ok(())
        } else {
            Err(FabricError::UnknownWord(word.0))
        }
    }

    pub fn check_pair(&self, pair: Pair) -> Result<(), FabricError> {
        self.check_word(pair.0)?;
        self.check_word(pair.1)?;
        if pair.0 == pair.1 {
            return Err(FabricError::SelfPair(pair.0 .0));
        }
        Ok(())
    }

    // Filters are stored row-major by source, skipping the diagonal.
    fn filter_index(&self, pair: Pair) -> Option<usize> {
        if self.check_pair(pair).is_err() {
            return None;
        }
        let k = self.config.words as usize;
        let (i, j) = (pair.0 .0 as usize - 1, pair.1 .0 as usize - 1);
        Some(i * (k - 1) + if j > i { j - 1 } else { j })
    }

    /// Opens or closes the override switch of `pair`. Learning is untouched.
    pub fn set_override(&mut self, pair: Pair, open: bool) -> Result<(), FabricError> {
        self.check_pair(pair)?;
        self.switches.set_override(pair, open);
        Ok(())
    }

    pub fn on_enable(
        &mut self,
        word: WordId,
        tick: Tick,
        source: EnableSource,
        episode: EpisodeId,
        fx: &mut Effects,
    ) -> Result<EnableOutcome, FabricError> {
        self.check_word(word)?;
        let pair = source.pair();
        let ep = self.episodes.entry(episode).or_default();
        if pair.is_some() {
            ep.claimed.remove(&word);
        }

        let state = &mut self.words[word.0 as usize - 1];
        if state.is_busy() {
            fx.records
                .push(TraceRecord::ignored_enable(tick, word, pair, episode));
            return Ok(EnableOutcome::IgnoredBusy);
        }
        if self.loop_suppression && ep.fired.contains(&word) {
            fx.records
                .push(TraceRecord::suppressed_enable(tick, word, pair, episode));
            return Ok(EnableOutcome::Suppressed);
        }

        let done_at = tick + self.config.duration(word);
        state.busy_until = Some(done_at);
        state.episode = Some(episode);
        ep.fired.insert(word);
        fx.schedule.push((done_at, Payload::WordDone { word, episode }));
        fx.records.push(TraceRecord::enable(tick, word, pair, episode));

        if self.config.mode == FilterMode::DoneEnable {
            self.detect_into(word, tick, fx);
        }
        Ok(EnableOutcome::Accepted)
    }

    pub fn on_done(
        &mut self,
        word: WordId,
        tick: Tick,
        episode: EpisodeId,
        fx: &mut Effects,
    ) -> Result<(), FabricError> {
        self.check_word(word)?;
        let state = &mut self.words[word.0 as usize - 1];
        if state.busy_until != Some(tick) || state.episode != Some(episode) {
            return Err(FabricError::UnexpectedDone { word: word.0, tick });
        }
        state.busy_until = None;
        state.episode = None;
        fx.records.push(TraceRecord::done(tick, word, episode));

        let delay1 = self.config.delay1;
        for j in self.config.word_ids().filter(|j| *j != word) {
            let idx = self.filter_index(Pair(word, j)).unwrap();
            self.filters[idx].hold(tick, delay1);
        }
        if self.config.mode == FilterMode::DoneDone {
            self.detect_into(word, tick, fx);
        }

        let successors: Vec<Pair> = self.switches.successors(word).collect();
        let ep = self.episodes.entry(episode).or_default();
        for pair in successors {
            let next = pair.1;
            if self.switches.is_overridden(pair) {
                fx.records
                    .push(TraceRecord::override_blocked(tick, next, pair, episode));
            } else if self.loop_suppression && ep.involves(next) {
                fx.records
                    .push(TraceRecord::loop_suppressed(tick, next, pair, episode));
            } else {
                ep.claimed.insert(next);
                fx.records
                    .push(TraceRecord::auto_enable_scheduled(tick, next, pair, episode));
                fx.schedule.push((
                    tick + delay1,
                    Payload::AutoEnable {
                        word: next,
                        pair,
                        episode,
                    },
                ));
            }
        }
        Ok(())
    }

    /// Fires every filter `(i, word)` whose window contains `tick`.
    fn detect_into(&mut self, word: WordId, tick: Tick, fx: &mut Effects) {
        for i in self.config.word_ids().filter(|i| *i != word) {
            let pair = Pair(i, word);
            let idx = self.filter_index(pair).unwrap();
            if self.filters[idx].coincides(tick) {
                self.shift(idx, tick, fx);
            }
        }
    }

    fn shift(&mut self, idx: usize, tick: Tick, fx: &mut Effects) {
        let filter = &mut self.filters[idx];
        let pair = filter.pair;
        fx.records.push(TraceRecord::filter_fire(tick, pair));
        match filter.register.shift(tick, self.config.delay2) {
            Shift::Refractory => {}
            Shift::Advanced { stage, filled } => {
                fx.records.push(TraceRecord::latch_shift(tick, pair, stage));
                if filled {
                    self.switches.learn(pair, tick);
                    fx.records.push(TraceRecord::learned(tick, pair));
                }
            }
        }
    }
}
