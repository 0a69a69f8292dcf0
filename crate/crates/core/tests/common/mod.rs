#![allow(dead_code)]

use std::collections::BTreeMap;

use learnfabric::driver::{Probe, RehearsalPlan};
use learnfabric::fabric::{FabricConfig, FilterMode, Pair, WordId};
use learnfabric::scenario::{OverrideDirective, Scenario};
use learnfabric::trace::{trace_bytes, EventKind, TraceRecord};
use learnfabric::{parse_scenario, RunOutcome, Simulation};
use rand::seq::SliceRandom;
use rand::Rng;

pub struct Run {
    pub sim: Simulation,
    pub outcome: RunOutcome,
}

impl Run {
    pub fn trace(&self) -> &[TraceRecord] {
        self.sim.trace()
    }
}

pub fn run(scenario: &Scenario) -> Run {
    let mut sim = Simulation::from_scenario(scenario).expect("scenario builds");
    let outcome = sim.run_to_quiescence(scenario.max_tick).expect("run completes");
    Run { sim, outcome }
}

pub fn run_text(text: &str) -> (Scenario, Run) {
    let s = parse_scenario(text).expect("scenario parses");
    let r = run(&s);
    (s, r)
}

/// Latch stages and learned flags never regress; each pair is learned at
/// most once.
pub fn check_monotone(trace: &[TraceRecord]) -> Result<(), String> {
    let mut stage: BTreeMap<Pair, u32> = BTreeMap::new();
    let mut learned: BTreeMap<Pair, u64> = BTreeMap::new();
    for r in trace {
        match r.ev {
            EventKind::LatchShift => {
                let p = r.pair.unwrap();
                let s = r.stage.unwrap();
                let prev = stage.insert(p, s).unwrap_or(0);
                if s < prev || s > prev + 1 {
                    return Err(format!("pair {p}: stage {prev} -> {s} at t={}", r.t));
                }
            }
            EventKind::Learned => {
                let p = r.pair.unwrap();
                if learned.insert(p, r.t).is_some() {
                    return Err(format!("pair {p} learned twice"));
                }
                if !stage.contains_key(&p) {
                    return Err(format!("pair {p} learned with no latch shifts"));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn check_deterministic(scenario: &Scenario) -> Result<(), String> {
    let a = trace_bytes(run(scenario).trace());
    let b = trace_bytes(run(scenario).trace());
    if a == b {
        Ok(())
    } else {
        Err("re-run produced a different trace".into())
    }
}

pub fn w(i: u32) -> WordId {
    WordId(i)
}

/// Random scenario: rehearsals early, then isolated probes and overrides
/// far apart so every probe episode can be compared against the oracle.
pub fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let words = rng.gen_range(2..=6u32);
    let delay1 = rng.gen_range(1..=8);
    let config = FabricConfig {
        words,
        delay1,
        delay2: rng.gen_range(1..=delay1),
        threshold: rng.gen_range(1..=5),
        durations: (0..words).map(|_| rng.gen_range(1..=6)).collect(),
        mode: if rng.gen_bool(0.75) {
            FilterMode::DoneEnable
        } else {
            FilterMode::DoneDone
        },
    };
    let mut s = Scenario::new(config);
    let ids: Vec<WordId> = (1..=words).map(WordId).collect();
    for _ in 0..rng.gen_range(1..=3) {
        let len = rng.gen_range(2..=words.min(4)) as usize;
        let sequence: Vec<WordId> = ids.choose_multiple(rng, len).copied().collect();
        s.plans.push(RehearsalPlan::new(
            sequence,
            rng.gen_range(1..=7),
            rng.gen_range(0..=delay1 + 2),
            rng.gen_range(0..=10),
            rng.gen_range(0..=30),
        ));
    }
    if rng.gen_bool(0.3) {
        s.probes.push(Probe {
            tick: rng.gen_range(0..=100),
            word: *ids.choose(rng).unwrap(),
        });
    }
    for k in 0..rng.gen_range(1..=4u64) {
        let base = 20_000 + k * 2_000;
        if rng.gen_bool(0.4) {
            let a = *ids.choose(rng).unwrap();
            let b = *ids.iter().filter(|x| **x != a).collect::<Vec<_>>().choose(rng).unwrap();
            s.overrides.push(OverrideDirective {
                tick: base - 500,
                pair: Pair(a, *b),
                open: rng.gen_bool(0.7),
            });
        }
        s.probes.push(Probe {
            tick: base,
            word: *ids.choose(rng).unwrap(),
        });
    }
    s.max_tick = 100_000;
    s
}
