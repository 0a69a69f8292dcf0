use std::collections::{BTreeMap, BTreeSet};

use crate::engine::Tick;

use super::Pair;

/// The learned switches `S_ij` and the override series switch in front of
/// each of them.
///
/// Learned switches only ever close. Overrides are a mask on top of them and
/// may be toggled freely, including for pairs that are not learned yet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwitchMatrix {
    learned: BTreeMap<Pair, Tick>,
    override_open: BTreeSet<Pair>,
}

impl SwitchMatrix {
    pub fn learn(&mut self, pair: Pair, tick: Tick) {
        self.learned.entry(pair).or_insert(tick);
    }

    pub fn is_learned(&self, pair: Pair) -> bool {
        self.learned.contains_key(&pair)
    }

    pub fn learned_at(&self, pair: Pair) -> Option<Tick> {
        self.learned.get(&pair).copied()
    }

    pub fn learned(&self) -> BTreeSet<Pair> {
        self.learned.keys().copied().collect()
    }

    /// Learned successors of `word`, ascending.
    pub fn successors(&self, word: super::WordId) -> impl Iterator<Item = Pair> + '_ {
        self.learned.keys().copied().filter(move |p| p.0 == word)
    }

    pub fn set_override(&mut self, pair: Pair, open: bool) {
        if open {
            self.override_open.insert(pair);
        } else {
            self.override_open.remove(&pair);
        }
    }

    pub fn is_overridden(&self, pair: Pair) -> bool {
        self.override_open.contains(&pair)
    }

    pub fn overrides(&self) -> &BTreeSet<Pair> {
        &self.override_open
    }
}
