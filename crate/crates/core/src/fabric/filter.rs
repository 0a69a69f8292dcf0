//! Per-pair timing filters and their set-once learn registers.

use crate::engine::Tick;

use super::Pair;

/// Result of asking a register to shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    /// The previous spike is still within the refractory interval.
    Refractory,
    /// The register advanced. `stage` is the number of set latches
    /// afterwards; `filled` is true only on the shift that set the last one.
    Advanced { stage: u32, filled: bool },
}

/// A chain of `n` set-once latches fed by the filter's spike generator.
///
/// Latch `D_1` is set by the first spike and every later spike copies each
/// latch into its successor. A latch is never cleared, so set latches always
/// form a prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnRegister {
    stages: Vec<bool>,
    last_shift: Option<Tick>,
}

impl LearnRegister {
    pub fn new(depth: u32) -> Self {
        assert!(depth >= 1, "learn register needs at least one stage");
        Self {
            stages: vec![false; depth as usize],
            last_shift: None,
        }
    }

    pub fn stages(&self) -> &[bool] {
        &self.stages
    }

    pub fn last_shift(&self) -> Option<Tick> {
        self.last_shift
    }

    /// Number of set latches.
    pub fn level(&self) -> u32 {
        self.stages.iter().take_while(|s| **s).count() as u32
    }

    pub fn is_full(&self) -> bool {
        self.stages.last().copied().unwrap_or(false)
    }

    /// Applies one spike at `tick`. Spikes closer than `refractory` ticks to
    /// the previous accepted spike are dropped.
    pub fn shift(&mut self, tick: Tick, refractory: Tick) -> Shift {
        if let Some(prev) = self.last_shift {
            if tick - prev < refractory {
                return Shift::Refractory;
            }
        }
        self.last_shift = Some(tick);
        let was_full = self.is_full();
        for k in (1..self.stages.len()).rev() {
            self.stages[k] |= self.stages[k - 1];
        }
        self.stages[0] = true;
        Shift::Advanced {
            stage: self.level(),
            filled: !was_full && self.is_full(),
        }
    }
}

/// Coincidence detector for one ordered pair of words.
///
/// A done of `pair.0` holds the filter's window open for `delay1` ticks; a
/// trigger of `pair.1` inside the closed window fires the filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingFilter {
    pub pair: Pair,
    window_open_until: Option<Tick>,
    pub register: LearnRegister,
}

impl TimingFilter {
    pub fn new(pair: Pair, depth: u32) -> Self {
        Self {
            pair,
            window_open_until: None,
            register: LearnRegister::new(depth),
        }
    }

    pub fn window_open_until(&self) -> Option<Tick> {
        self.window_open_until
    }

    /// Restarts the hold window from a done of the source word.
    pub fn hold(&mut self, done_tick: Tick, delay1: Tick) {
        self.window_open_until = Some(done_tick + delay1);
    }

    /// Whether a trigger at `tick` falls inside the window. Windows are only
    /// ever opened at or before the current tick, so the lower edge holds.
    pub fn coincides(&self, tick: Tick) -> bool {
        self.window_open_until.is_some_and(|until| tick <= until)
    }
}
