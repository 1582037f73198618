//! Test oracles computed from the raw dependency structure only: transitive
//! closure as bitmasks, clocks as ancestor counts, downsets by exhaustive
//! closure-respecting search. Nothing here goes through vector clocks or
//! the traversal code.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use cutlattice::model::{Computation, Cut, EventId, EventRecord};
use cutlattice::traceio::{generate_random, GenSpec};
use proptest::prelude::*;

pub struct Oracle {
    pub ids: Vec<EventId>,
    pub index: HashMap<EventId, usize>,
    pub process: Vec<usize>,
    /// strict ancestors of each event
    pub ancestors: Vec<u64>,
    pub n: usize,
}

impl Oracle {
    pub fn new(comp: &Computation) -> Self {
        assert!(comp.len() <= 64, "oracle handles at most 64 events");
        let ids: Vec<EventId> = comp.events().iter().map(|e| e.id).collect();
        let index: HashMap<EventId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let by_slot: HashMap<(usize, u32), usize> = comp
            .events()
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.process, e.index), i))
            .collect();
        let direct: Vec<Vec<usize>> = comp
            .events()
            .iter()
            .map(|e| {
                let mut d: Vec<usize> = e.deps.iter().map(|id| index[id]).collect();
                if e.index > 1 {
                    d.push(by_slot[&(e.process, e.index - 1)]);
                }
                d
            })
            .collect();
        let mut memo: Vec<Option<u64>> = vec![None; ids.len()];
        fn anc(i: usize, direct: &[Vec<usize>], memo: &mut [Option<u64>]) -> u64 {
            if let Some(m) = memo[i] {
                return m;
            }
            let mut m = 0u64;
            for &d in &direct[i] {
                m |= 1 << d;
                m |= anc(d, direct, memo);
            }
            memo[i] = Some(m);
            m
        }
        let ancestors = (0..ids.len()).map(|i| anc(i, &direct, &mut memo)).collect();
        Self {
            process: comp.events().iter().map(|e| e.process).collect(),
            ids,
            index,
            ancestors,
            n: comp.n(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// `a -> b`
    pub fn before(&self, a: usize, b: usize) -> bool {
        self.ancestors[b] >> a & 1 == 1
    }

    /// Clock of event `i` in display-independent storage order (process 1
    /// first): ancestors plus itself, counted per process.
    pub fn clock(&self, i: usize) -> Vec<u32> {
        let mut v = vec![0u32; self.n];
        let set = self.ancestors[i] | 1 << i;
        for j in 0..self.len() {
            if set >> j & 1 == 1 {
                v[self.process[j] - 1] += 1;
            }
        }
        v
    }

    pub fn is_downset(&self, set: u64) -> bool {
        (0..self.len()).all(|i| set >> i & 1 == 0 || self.ancestors[i] & !set == 0)
    }

    /// Per-process counts of an event set.
    pub fn cut_of(&self, set: u64) -> Cut {
        let mut v = vec![0u32; self.n];
        for j in 0..self.len() {
            if set >> j & 1 == 1 {
                v[self.process[j] - 1] += 1;
            }
        }
        Cut::from_chains(v)
    }

    /// Every downset, found by growing from the empty set one enabled
    /// event at a time.
    pub fn downsets(&self) -> Vec<u64> {
        let mut seen = HashSet::new();
        let mut stack = vec![0u64];
        seen.insert(0u64);
        while let Some(d) = stack.pop() {
            for i in 0..self.len() {
                if d >> i & 1 == 0 && self.ancestors[i] & !d == 0 {
                    let e = d | 1 << i;
                    if seen.insert(e) {
                        stack.push(e);
                    }
                }
            }
        }
        let mut v: Vec<u64> = seen.into_iter().collect();
        v.sort_unstable();
        v
    }

    /// Downsets as original-partition cuts, grouped by rank.
    pub fn cuts_by_rank(&self) -> Vec<BTreeSet<Cut>> {
        let mut out = vec![BTreeSet::new(); self.len() + 1];
        for d in self.downsets() {
            out[d.count_ones() as usize].insert(self.cut_of(d));
        }
        out
    }

    /// Event set of an original-partition cut: the first `cut[p]` events
    /// of each process.
    pub fn set_of_original(&self, comp: &Computation, cut: &Cut) -> u64 {
        let mut set = 0u64;
        for e in comp.events() {
            if e.index <= cut.get(e.process) {
                set |= 1 << self.index[&e.id];
            }
        }
        set
    }
}

/// a,b,c on P1; e,f,g on P2; b -> f.
pub fn six_events() -> Computation {
    Computation::from_records(
        2,
        [
            EventRecord::new(1, 1, &[]),
            EventRecord::new(2, 1, &[]),
            EventRecord::new(3, 1, &[]),
            EventRecord::new(4, 2, &[]),
            EventRecord::new(5, 2, &[2]),
            EventRecord::new(6, 2, &[]),
        ],
    )
    .unwrap()
}

/// P2#1 -> P1#2 and P1#1 -> P2#2, delivered P1#1, P2#1, P2#2, P1#2.
pub fn crossing() -> Computation {
    Computation::from_records(
        2,
        [
            EventRecord::new(1, 1, &[]),
            EventRecord::new(3, 2, &[]),
            EventRecord::new(4, 2, &[1]),
            EventRecord::new(2, 1, &[3]),
        ],
    )
    .unwrap()
}

/// Three chains of three; P2#2 -> P3#1, P1#1 -> P2#3, P1#2 -> P3#3.
pub fn successor_example() -> Computation {
    three_chains(31)
}

/// Three chains of three; P2#2 -> P3#2, P1#1 -> P2#3, P1#2 -> P3#3.
pub fn projection_example() -> Computation {
    three_chains(32)
}

fn three_chains(receiver: u64) -> Computation {
    let deps = |id: u64| -> Vec<u64> {
        match id {
            23 => vec![11],
            33 => vec![12],
            x if x == receiver => vec![22],
            _ => vec![],
        }
    };
    Computation::from_records(
        3,
        [11, 12, 13, 21, 22, 23, 31, 32, 33]
            .into_iter()
            .map(|id| EventRecord::new(id, (id / 10) as usize, &deps(id))),
    )
    .unwrap()
}

pub fn cut(display: &[u32]) -> Cut {
    Cut::from_display(display)
}

/// Random-trace corpus: n in 2..=6, |E| <= 20, p in {0, 0.3, 0.7}.
pub fn corpus(count: usize) -> Vec<(GenSpec, Computation)> {
    let probabilities = [0.0, 0.3, 0.7];
    (0..count)
        .map(|i| {
            let spec = GenSpec {
                n: 2 + i % 5,
                total_events: 4 + (i * 7) % 17,
                message_probability: probabilities[(i / 5) % 3],
                seed: 1000 + i as u64,
            };
            (spec, generate_random(&spec).unwrap())
        })
        .collect()
}

/// Arbitrary small DAGs, not limited to the generator's round-robin shape.
pub fn arb_computation(max_events: usize) -> impl Strategy<Value = Computation> {
    (
        1usize..=5,
        prop::collection::vec(
            (any::<u16>(), 0usize..3, any::<u32>(), any::<u32>()),
            0..=max_events,
        ),
    )
        .prop_map(|(n, raw)| {
            let records: Vec<EventRecord> = raw
                .iter()
                .enumerate()
                .map(|(k, &(proc_seed, ndeps, d1, d2))| {
                    let process = 1 + proc_seed as usize % n;
                    let mut deps = Vec::new();
                    if k > 0 {
                        for seed in [d1, d2].into_iter().take(ndeps) {
                            let d = seed as u64 % k as u64;
                            if !deps.contains(&d) {
                                deps.push(d);
                            }
                        }
                    }
                    EventRecord::new(k as u64, process, &deps)
                })
                .collect();
            Computation::from_records(n, records).unwrap()
        })
}
