mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{check_monotone, random_scenario, run, w};
use learnfabric::engine::Payload;
use learnfabric::fabric::{EpisodeId, Pair};
use learnfabric::oracle::count_detections;
use learnfabric::trace::{EventKind, Source};
use learnfabric::{parse_scenario, FabricConfig, RehearsalPlan, RunOutcome, Scenario, Simulation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario() -> impl Strategy<Value = Scenario> {
    any::<u64>().prop_map(|seed| random_scenario(&mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn event_conservation(s in scenario()) {
        let mut sim = Simulation::from_scenario(&s).unwrap();
        while sim.step().unwrap().is_some() {
            prop_assert_eq!(sim.dispatched() + sim.pending() as u64, sim.scheduled());
        }
        prop_assert_eq!(sim.pending(), 0);
    }

    #[test]
    fn one_primary_record_per_dispatched_event(s in scenario()) {
        let mut sim = Simulation::from_scenario(&s).unwrap();
        let mut seen = 0;
        while let Some(ev) = sim.step().unwrap() {
            let fresh = &sim.trace()[seen..];
            seen = sim.trace().len();
            let primary: Vec<_> = fresh.iter().filter(|r| r.is_primary()).collect();
            prop_assert_eq!(primary.len(), 1, "event {:?} wrote {:?}", ev, fresh);
            let want = match ev.payload {
                Payload::CpuEnable { .. } | Payload::AutoEnable { .. } => vec![
                    EventKind::Enable,
                    EventKind::IgnoredEnable,
                    EventKind::LoopSuppressed,
                ],
                Payload::WordDone { .. } => vec![EventKind::Done],
                Payload::Override { .. } => vec![EventKind::OverrideSet],
            };
            prop_assert!(want.contains(&primary[0].ev));
            prop_assert!(fresh.iter().all(|r| r.t == ev.tick));
        }
    }

    #[test]
    fn latches_are_monotone_and_prefixes_agree(s in scenario(), cut in 0u64..400) {
        let full = run(&s);
        prop_assert!(check_monotone(full.trace()).is_ok());
        let mut partial = Simulation::from_scenario(&s).unwrap();
        partial.run_to_quiescence(cut).unwrap();
        let n = partial.trace().len();
        prop_assert_eq!(partial.trace(), &full.trace()[..n]);
    }

    #[test]
    fn auto_enables_follow_done_by_delay1(s in scenario()) {
        let r = run(&s);
        let trace = r.trace();
        for (i, rec) in trace.iter().enumerate() {
            if rec.ev == EventKind::Enable && rec.src == Some(Source::Auto) {
                let p = rec.pair.unwrap();
                prop_assert!(trace[..i].iter().any(|d| d.ev == EventKind::Done
                    && d.word == Some(p.0)
                    && d.episode == rec.episode
                    && d.t + s.config.delay1 == rec.t));
            }
        }
    }

    #[test]
    fn no_word_enabled_twice_in_an_episode(s in scenario()) {
        let r = run(&s);
        let mut fired: BTreeMap<EpisodeId, BTreeSet<_>> = BTreeMap::new();
        for rec in r.trace().iter().filter(|r| r.ev == EventKind::Enable) {
            let set = fired.entry(rec.episode.unwrap()).or_default();
            prop_assert!(set.insert(rec.word.unwrap()), "word enabled twice: {:?}", rec);
        }
    }

    #[test]
    fn oracle_ignores_filter_records(s in scenario(), drop_fires in any::<bool>()) {
        let r = run(&s);
        let full = count_detections(r.trace(), &s.config).unwrap();
        let kept: Vec<_> = r
            .trace()
            .iter()
            .filter(|rec| match rec.ev {
                EventKind::FilterFire => !drop_fires,
                EventKind::LatchShift | EventKind::Learned => false,
                _ => true,
            })
            .cloned()
            .collect();
        prop_assert_eq!(count_detections(&kept, &s.config).unwrap(), full);
    }

    #[test]
    fn canonical_form_round_trips(s in scenario()) {
        let printed = s.to_string();
        let parsed = parse_scenario(&printed).unwrap();
        prop_assert_eq!(parsed.to_string(), printed);
        prop_assert_eq!(parsed, s);
    }

    #[test]
    fn solo_plan_timing(d in 1u64..8, gap in 0u64..5, reps in 1u32..5, rest in 0u64..30) {
        let config = FabricConfig::uniform(3, 5, 1, 100, d);
        let mut sim = Simulation::new(config).unwrap();
        sim.start_plan(RehearsalPlan::new(vec![w(1), w(3), w(2)], reps, gap, rest, 0)).unwrap();
        prop_assert!(matches!(sim.run_to_quiescence(100_000).unwrap(), RunOutcome::Quiescent(_)));
        let enables: Vec<u64> = sim
            .trace()
            .iter()
            .filter(|r| r.ev == EventKind::Enable)
            .map(|r| r.t)
            .collect();
        let period = 3 * (d + gap) - gap + rest;
        let want: Vec<u64> = (0..reps as u64)
            .flat_map(|k| (0..3).map(move |i| k * period + i * (d + gap)))
            .collect();
        prop_assert_eq!(enables, want);
    }
}

#[test]
fn worked_plan_starts_at_zero_six_twelve() {
    let mut sim = Simulation::new(FabricConfig::uniform(3, 5, 1, 10, 4)).unwrap();
    sim.start_plan(RehearsalPlan::new(vec![w(1), w(3), w(2)], 1, 2, 20, 0)).unwrap();
    sim.run_to_quiescence(1000).unwrap();
    let enables: Vec<_> = sim
        .trace()
        .iter()
        .filter(|r| r.ev == EventKind::Enable)
        .map(|r| (r.t, r.word.unwrap()))
        .collect();
    assert_eq!(enables, vec![(0, w(1)), (6, w(3)), (12, w(2))]);
    let fired = count_detections(sim.trace(), sim.fabric().config()).unwrap();
    assert_eq!(fired.get(Pair::new(1, 3)), 1);
    assert_eq!(fired.get(Pair::new(3, 2)), 1);
}
