//! The scenario directive format.
//!
//! One directive per line, `#` starts a comment, arguments are positional
//! or `key=value`:
//!
//! ```text
//! fabric words=3 delay1=5 delay2=1 threshold=10 mode=done_enable
//! dur * 4
//! dur 2 6
//! rehearse 1 3 2 reps=10 gap=2 rest=20 start=0
//! at 500 probe 1
//! at 600 override 1 3 open
//! maxticks 2000
//! ```
//!
//! `fabric` must appear exactly once. `dur *` sets the default duration and
//! `dur <id>` overrides it for one word regardless of line order. `mode`
//! defaults to `done_enable`; `reps` to 1; `gap`, `rest` and `start` to 0;
//! `maxticks` to [`DEFAULT_MAX_TICKS`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::driver::{Probe, RehearsalPlan};
use crate::engine::Tick;
use crate::fabric::{FabricConfig, FilterMode, Pair, WordId};

pub const DEFAULT_MAX_TICKS: Tick = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{}{msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { line: Option<usize>, msg: String },
}

impl ScenarioError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Syntax { line, .. } => Some(*line),
            ScenarioError::Validation { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverrideDirective {
    pub tick: Tick,
    pub pair: Pair,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub config: FabricConfig,
    pub plans: Vec<RehearsalPlan>,
    pub probes: Vec<Probe>,
    pub overrides: Vec<OverrideDirective>,
    pub max_tick: Tick,
}

impl Scenario {
    pub fn new(config: FabricConfig) -> Self {
        Self {
            config,
            plans: Vec::new(),
            probes: Vec::new(),
            overrides: Vec::new(),
            max_tick: DEFAULT_MAX_TICKS,
        }
    }

    /// Non-fatal findings, such as plans whose gap can never land inside
    /// a filter window.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.config.mode == FilterMode::DoneEnable {
            for (i, p) in self.plans.iter().enumerate() {
                if p.gap > self.config.delay1 {
                    out.push(format!(
                        "rehearse #{}: gap {} exceeds delay1 {}; its pairs will never be detected",
                        i + 1,
                        p.gap,
                        self.config.delay1
                    ));
                }
            }
        }
        out
    }

    /// Override state in force just before anything else dispatches at
    /// `tick`, i.e. after every directive at or before it.
    pub fn overrides_at(&self, tick: Tick) -> std::collections::BTreeSet<Pair> {
        let mut open = std::collections::BTreeSet::new();
        let mut sorted: Vec<_> = self.overrides.iter().enumerate().collect();
        sorted.sort_by_key(|(i, o)| (o.tick, *i));
        for (_, o) in sorted.into_iter().filter(|(_, o)| o.tick <= tick) {
            if o.open {
                open.insert(o.pair);
            } else {
                open.remove(&o.pair);
            }
        }
        open
    }
}

struct Line<'a> {
    no: usize,
    words: Vec<&'a str>,
}

impl Line<'_> {
    fn syntax(&self, msg: impl Into<String>) -> ScenarioError {
        ScenarioError::Syntax {
            line: self.no,
            msg: msg.into(),
        }
    }

    fn int<T: std::str::FromStr>(&self, what: &str, tok: &str) -> Result<T, ScenarioError> {
        tok.parse()
            .map_err(|_| self.syntax(format!("{what}: expected a non-negative integer, got `{tok}`")))
    }

    /// Splits trailing `key=value` arguments off the positional ones and
    /// rejects keys not in `allowed`.
    fn split_args(
        &self,
        from: usize,
        allowed: &[&str],
    ) -> Result<(Vec<&str>, BTreeMap<String, String>), ScenarioError> {
        let mut pos = Vec::new();
        let mut kv = BTreeMap::new();
        for tok in &self.words[from..] {
            match tok.split_once('=') {
                Some((k, v)) => {
                    if !allowed.contains(&k) {
                        return Err(self.syntax(format!("unknown argument `{k}`")));
                    }
                    if kv.insert(k.to_string(), v.to_string()).is_some() {
                        return Err(self.syntax(format!("argument `{k}` given twice")));
                    }
                }
                None if kv.is_empty() => pos.push(*tok),
                None => return Err(self.syntax(format!("positional `{tok}` after key=value arguments"))),
            }
        }
        Ok((pos, kv))
    }
}

struct FabricLine {
    no: usize,
    words: u32,
    delay1: Tick,
    delay2: Tick,
    threshold: u32,
    mode: FilterMode,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut fabric: Option<FabricLine> = None;
    let mut default_dur: Option<(usize, Tick)> = None;
    let mut word_durs: Vec<(usize, u32, Tick)> = Vec::new();
    let mut plans: Vec<(usize, RehearsalPlan)> = Vec::new();
    let mut probes: Vec<(usize, Probe)> = Vec::new();
    let mut overrides: Vec<(usize, OverrideDirective)> = Vec::new();
    let mut max_tick: Option<Tick> = None;

    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let line = Line { no: idx + 1, words };
        match line.words[0] {
            "fabric" => {
                if fabric.is_some() {
                    return Err(line.syntax("`fabric` given more than once"));
                }
                let (pos, kv) =
                    line.split_args(1, &["words", "delay1", "delay2", "threshold", "mode"])?;
                if let Some(p) = pos.first() {
                    return Err(line.syntax(format!("unexpected `{p}`")));
                }
                let need = |k: &str| {
                    kv.get(k)
                        .ok_or_else(|| line.syntax(format!("`fabric` needs {k}=")))
                };
                let mode = match kv.get("mode").map(String::as_str) {
                    None | Some("done_enable") => FilterMode::DoneEnable,
                    Some("done_done") => FilterMode::DoneDone,
                    Some(m) => return Err(line.syntax(format!("unknown mode `{m}`"))),
                };
                fabric = Some(FabricLine {
                    no: line.no,
                    words: line.int("words", need("words")?)?,
                    delay1: line.int("delay1", need("delay1")?)?,
                    delay2: line.int("delay2", need("delay2")?)?,
                    threshold: line.int("threshold", need("threshold")?)?,
                    mode,
                });
            }
            "dur" => {
                if line.words.len() != 3 {
                    return Err(line.syntax("expected `dur <id|*> <ticks>`"));
                }
                let ticks: Tick = line.int("duration", line.words[2])?;
                if line.words[1] == "*" {
                    default_dur = Some((line.no, ticks));
                } else {
                    let id = line.int("word id", line.words[1])?;
                    word_durs.push((line.no, id, ticks));
                }
            }
            "rehearse" => {
                let (pos, kv) = line.split_args(1, &["reps", "gap", "rest", "start"])?;
                let sequence = pos
                    .iter()
                    .map(|t| line.int("word id", t).map(WordId))
                    .collect::<Result<Vec<_>, _>>()?;
                let get = |k: &str| -> Result<Option<u64>, ScenarioError> {
                    kv.get(k).map(|v| line.int(k, v)).transpose()
                };
                let reps = get("reps")?.unwrap_or(1);
                let plan = RehearsalPlan {
                    sequence,
                    reps: u32::try_from(reps).map_err(|_| line.syntax("reps out of range"))?,
                    gap: get("gap")?.unwrap_or(0),
                    rest: get("rest")?.unwrap_or(0),
                    start: get("start")?.unwrap_or(0),
                };
                plans.push((line.no, plan));
            }
            "at" => {
                if line.words.len() < 3 {
                    return Err(line.syntax("expected `at <tick> probe|override ...`"));
                }
                let tick: Tick = line.int("tick", line.words[1])?;
                match line.words[2] {
                    "probe" => {
                        if line.words.len() != 4 {
                            return Err(line.syntax("expected `at <tick> probe <id>`"));
                        }
                        let word = WordId(line.int("word id", line.words[3])?);
                        probes.push((line.no, Probe { tick, word }));
                    }
                    "override" => {
                        if line.words.len() != 6 {
                            return Err(line.syntax("expected `at <tick> override <i> <j> open|closed`"));
                        }
                        let i = line.int("word id", line.words[3])?;
                        let j = line.int("word id", line.words[4])?;
                        let open = match line.words[5] {
                            "open" => true,
                            "closed" => false,
                            s => return Err(line.syntax(format!("expected open|closed, got `{s}`"))),
                        };
                        overrides.push((
                            line.no,
                            OverrideDirective {
                                tick,
                                pair: Pair::new(i, j),
                                open,
                            },
                        ));
                    }
                    other => return Err(line.syntax(format!("unknown timed action `{other}`"))),
                }
            }
            "maxticks" => {
                if line.words.len() != 2 {
                    return Err(line.syntax("expected `maxticks <ticks>`"));
                }
                max_tick = Some(line.int("maxticks", line.words[1])?);
            }
            other => return Err(line.syntax(format!("unknown directive `{other}`"))),
        }
    }

    let fab = fabric.ok_or(ScenarioError::Validation {
        line: None,
        msg: "missing `fabric` directive".into(),
    })?;
    let at = |no: usize, msg: String| ScenarioError::Validation { line: Some(no), msg };

    let mut durations = vec![default_dur.map(|(_, t)| t); fab.words as usize];
    for &(no, id, ticks) in &word_durs {
        if !(1..=fab.words).contains(&id) {
            return Err(at(no, format!("unknown word {id}")));
        }
        durations[id as usize - 1] = Some(ticks);
    }
    let durations = durations
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| at(fab.no, format!("no duration for word {}", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;

    let config = FabricConfig {
        words: fab.words,
        delay1: fab.delay1,
        delay2: fab.delay2,
        threshold: fab.threshold,
        durations,
        mode: fab.mode,
    };
    if let Err(e) = config.validate() {
        // A zero duration is reported on the line that set it.
        let no = word_durs
            .iter()
            .rev()
            .find(|d| d.2 == 0)
            .map(|d| d.0)
            .or(default_dur.filter(|d| d.1 == 0).map(|d| d.0))
            .filter(|_| config.durations.contains(&0))
            .unwrap_or(fab.no);
        return Err(at(no, e.to_string()));
    }

    for (no, plan) in &plans {
        plan.validate(config.words).map_err(|e| at(*no, e.to_string()))?;
    }
    for (no, p) in &probes {
        if !config.contains(p.word) {
            return Err(at(*no, format!("unknown word {}", p.word)));
        }
    }
    for (no, o) in &overrides {
        for w in [o.pair.0, o.pair.1] {
            if !config.contains(w) {
                return Err(at(*no, format!("unknown word {w}")));
            }
        }
        if o.pair.0 == o.pair.1 {
            return Err(at(*no, format!("override {} connects a word to itself", o.pair)));
        }
    }

    Ok(Scenario {
        config,
        plans: plans.into_iter().map(|p| p.1).collect(),
        probes: probes.into_iter().map(|p| p.1).collect(),
        overrides: overrides.into_iter().map(|o| o.1).collect(),
        max_tick: max_tick.unwrap_or(DEFAULT_MAX_TICKS),
    })
}

/// Canonical form: every argument spelled out, a `dur *` line for the most
/// common duration (smallest on ties) and `dur <id>` lines for the rest.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "fabric words={} delay1={} delay2={} threshold={} mode={}",
            c.words,
            c.delay1,
            c.delay2,
            c.threshold,
            c.mode.as_str()
        )?;
        let mut freq: BTreeMap<Tick, usize> = BTreeMap::new();
        for d in &c.durations {
            *freq.entry(*d).or_default() += 1;
        }
        let common = freq
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(d, _)| *d);
        if let Some(common) = common {
            writeln!(f, "dur * {common}")?;
            for (i, d) in c.durations.iter().enumerate() {
                if *d != common {
                    writeln!(f, "dur {} {}", i + 1, d)?;
                }
            }
        }
        for p in &self.plans {
            write!(f, "rehearse")?;
            for w in &p.sequence {
                write!(f, " {w}")?;
            }
            writeln!(f, " reps={} gap={} rest={} start={}", p.reps, p.gap, p.rest, p.start)?;
        }
        for o in &self.overrides {
            let state = if o.open { "open" } else { "closed" };
            writeln!(f, "at {} override {} {} {}", o.tick, o.pair.0, o.pair.1, state)?;
        }
        for p in &self.probes {
            writeln!(f, "at {} probe {}", p.tick, p.word)?;
        }
        writeln!(f, "maxticks {}", self.max_tick)
    }
}
