//! Events, vector clocks, cuts and the happened-before computation.
//!
//! Chains are numbered from 1. Count vectors are stored with chain 1 at the
//! front, but rendered the other way around: the highest chain is printed
//! leftmost, so a two-process cut with one event from `P2` and two from `P1`
//! displays as `[1,2]`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cut has {count} events on chain {chain}, which only has {len}")]
    CountOutOfRange {
        chain: usize,
        count: u32,
        len: usize,
    },
    #[error("duplicate event id {0}")]
    DuplicateId(EventId),
    #[error("event {event} depends on unknown event {dep}")]
    UnknownDependency { event: EventId, dep: EventId },
    #[error("event {event} is on process {process}, outside 1..={n}")]
    ProcessOutOfRange {
        event: EventId,
        process: usize,
        n: usize,
    },
    #[error("event {0} depends on itself")]
    SelfDependency(EventId),
    #[error("dependency cycle through event {0}")]
    Cycle(EventId),
}

/// Identifier of an event, unique within one computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

macro_rules! count_vector {
    ($name:ident) => {
        impl $name {
            pub fn zero(chains: usize) -> Self {
                Self(vec![0; chains])
            }

            /// Builds from entries ordered chain 1 first.
            pub fn from_chains(counts: Vec<u32>) -> Self {
                Self(counts)
            }

            /// Builds from entries in display order (highest chain first).
            pub fn from_display(counts: &[u32]) -> Self {
                Self(counts.iter().rev().copied().collect())
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            /// Entry for `chain` (1-based).
            pub fn get(&self, chain: usize) -> u32 {
                self.0[chain - 1]
            }

            pub fn set(&mut self, chain: usize, value: u32) {
                self.0[chain - 1] = value;
            }

            /// Entries ordered chain 1 first.
            pub fn as_slice(&self) -> &[u32] {
                &self.0
            }

            pub fn as_mut_slice(&mut self) -> &mut [u32] {
                &mut self.0
            }

            /// Entries in display order (highest chain first).
            pub fn to_display(&self) -> Vec<u32> {
                self.0.iter().rev().copied().collect()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("[")?;
                for (i, c) in self.0.iter().rev().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    };
}

/// Per-chain event counts timestamping one event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct VectorClock(Vec<u32>);

count_vector!(VectorClock);

/// A global state given by the number of events taken from each chain.
/// The cut may or may not be consistent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Cut(Vec<u32>);

count_vector!(Cut);

impl Cut {
    pub fn rank(&self) -> usize {
        rank(self)
    }
}

/// Lexical order: the highest-numbered chain is the most significant entry.
/// Cuts of different lengths order by length first.
impl Ord for Cut {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| lexical_slices(&self.0, &other.0))
    }
}

impl PartialOrd for Cut {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn lexical_slices(g: &[u32], h: &[u32]) -> Ordering {
    g.iter().rev().cmp(h.iter().rev())
}

fn check_len(left: usize, right: usize) -> Result<(), ModelError> {
    if left == right {
        Ok(())
    } else {
        Err(ModelError::LengthMismatch { left, right })
    }
}

/// Componentwise `a <= b`.
#[inline]
pub(crate) fn dominated(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// `a -> b`: every entry of `a` is at most the matching entry of `b`, and
/// at least one is strictly smaller.
pub fn happened_before(a: &VectorClock, b: &VectorClock) -> Result<bool, ModelError> {
    check_len(a.len(), b.len())?;
    Ok(dominated(a.as_slice(), b.as_slice()) && a != b)
}

/// Neither clock happened before the other.
///
/// Two identical clocks report `true`. Distinct events never share a clock,
/// so callers should not pass an event together with itself.
pub fn concurrent(a: &VectorClock, b: &VectorClock) -> Result<bool, ModelError> {
    Ok(!happened_before(a, b)? && !happened_before(b, a)?)
}

pub fn rank(cut: &Cut) -> usize {
    cut.as_slice().iter().map(|&c| c as usize).sum()
}

pub fn lexical_compare(g: &Cut, h: &Cut) -> Result<Ordering, ModelError> {
    check_len(g.len(), h.len())?;
    Ok(lexical_slices(g.as_slice(), h.as_slice()))
}

/// Chain-indexed access to event clocks, shared by the original process
/// partition and uniflow partitions.
pub trait Chains {
    fn chain_count(&self) -> usize;

    /// Number of events on `chain` (1-based).
    fn chain_len(&self, chain: usize) -> usize;

    /// Clock of the `k`-th event (1-based) on `chain`, chain 1 first.
    fn clock_at(&self, chain: usize, k: usize) -> &[u32];
}

pub(crate) fn check_cut<C: Chains + ?Sized>(cut: &Cut, chains: &C) -> Result<(), ModelError> {
    check_len(cut.len(), chains.chain_count())?;
    for chain in 1..=cut.len() {
        let len = chains.chain_len(chain);
        let count = cut.get(chain);
        if count as usize > len {
            return Err(ModelError::CountOutOfRange { chain, count, len });
        }
    }
    Ok(())
}

/// A cut is consistent iff the clock of its last event on every chain is
/// dominated by the cut itself.
pub fn is_consistent<C: Chains + ?Sized>(cut: &Cut, chains: &C) -> Result<bool, ModelError> {
    check_cut(cut, chains)?;
    Ok(consistent_unchecked(cut.as_slice(), chains))
}

pub(crate) fn consistent_unchecked<C: Chains + ?Sized>(counts: &[u32], chains: &C) -> bool {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .all(|(i, &k)| dominated(chains.clock_at(i + 1, k as usize), counts))
}

/// One executed operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    /// Process (original chain), 1-based.
    pub process: usize,
    /// Position on its process, 1-based.
    pub index: u32,
    /// Direct happened-before predecessors on other events. The previous
    /// event of the same process is implied and need not be listed.
    pub deps: Vec<EventId>,
    pub vc: VectorClock,
}

/// Input description of one event. Events of a process are numbered in the
/// order their records appear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub id: EventId,
    pub process: usize,
    pub deps: Vec<EventId>,
}

impl EventRecord {
    pub fn new(id: u64, process: usize, deps: &[u64]) -> Self {
        Self {
            id: EventId(id),
            process,
            deps: deps.iter().map(|&d| EventId(d)).collect(),
        }
    }
}

/// A finite computation on `n` processes, with vector clocks computed.
///
/// Events are stored in a topological order; positions into that order are
/// used as dense event handles throughout the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Computation {
    n: usize,
    events: Vec<Event>,
    chains: Vec<Vec<usize>>,
    by_id: HashMap<EventId, usize>,
    // direct deps as positions, excluding the implicit process predecessor
    dep_pos: Vec<Vec<usize>>,
}

impl Computation {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            events: Vec::new(),
            chains: vec![Vec::new(); n],
            by_id: HashMap::new(),
            dep_pos: Vec::new(),
        }
    }

    /// Validates the records, orders them topologically and computes vector
    /// clocks. Dependencies may point forward in `records`; cycles are
    /// rejected. Among ready events, earlier records come first, so records
    /// that are already topologically sorted keep their order.
    pub fn from_records<I>(n: usize, records: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = EventRecord>,
    {
        let records: Vec<EventRecord> = records.into_iter().collect();
        let mut slot_of: HashMap<EventId, usize> = HashMap::with_capacity(records.len());
        for (slot, rec) in records.iter().enumerate() {
            if rec.process == 0 || rec.process > n {
                return Err(ModelError::ProcessOutOfRange {
                    event: rec.id,
                    process: rec.process,
                    n,
                });
            }
            if slot_of.insert(rec.id, slot).is_some() {
                return Err(ModelError::DuplicateId(rec.id));
            }
        }

        // predecessor slots: explicit deps plus the previous event on the process
        let mut last_on: Vec<Option<usize>> = vec![None; n];
        let mut index_of = Vec::with_capacity(records.len());
        let mut preds: Vec<Vec<usize>> = Vec::with_capacity(records.len());
        for (slot, rec) in records.iter().enumerate() {
            let mut p = Vec::with_capacity(rec.deps.len() + 1);
            for dep in &rec.deps {
                let &d = slot_of.get(dep).ok_or(ModelError::UnknownDependency {
                    event: rec.id,
                    dep: *dep,
                })?;
                if d == slot {
                    return Err(ModelError::SelfDependency(rec.id));
                }
                p.push(d);
            }
            let prev = last_on[rec.process - 1].replace(slot);
            index_of.push(match prev {
                Some(q) => index_of[q] + 1,
                None => 1u32,
            });
            p.extend(prev);
            preds.push(p);
        }

        let order = topo_sort(&preds).map_err(|slot| ModelError::Cycle(records[slot].id))?;
        let mut pos_of = vec![0usize; records.len()];
        for (pos, &slot) in order.iter().enumerate() {
            pos_of[slot] = pos;
        }

        let mut chains = vec![Vec::new(); n];
        let mut events = Vec::with_capacity(records.len());
        let mut dep_pos = Vec::with_capacity(records.len());
        let mut by_id = HashMap::with_capacity(records.len());
        for (pos, &slot) in order.iter().enumerate() {
            let rec = &records[slot];
            chains[rec.process - 1].push(pos);
            by_id.insert(rec.id, pos);
            dep_pos.push(rec.deps.iter().map(|d| pos_of[slot_of[d]]).collect());
            events.push(Event {
                id: rec.id,
                process: rec.process,
                index: index_of[slot],
                deps: rec.deps.clone(),
                vc: VectorClock::default(),
            });
        }

        let mut comp = Self {
            n,
            events,
            chains,
            by_id,
            dep_pos,
        };
        let flat = clocks_over(
            n,
            comp.events.len(),
            |pos| comp.events[pos].process,
            |pos| comp.events[pos].index,
            |pos, out: &mut Vec<usize>| comp.predecessors_into(pos, out),
        );
        for (pos, event) in comp.events.iter_mut().enumerate() {
            event.vc = VectorClock(flat[pos * n..(pos + 1) * n].to_vec());
        }
        Ok(comp)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// All events in topological order.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn topo_order(&self) -> impl Iterator<Item = EventId> + '_ {
        self.events.iter().map(|e| e.id)
    }

    pub fn event(&self, id: EventId) -> Option<&Event> {
        self.by_id.get(&id).map(|&p| &self.events[p])
    }

    /// Position of `id` in the topological order.
    pub fn position(&self, id: EventId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn event_at_position(&self, pos: usize) -> &Event {
        &self.events[pos]
    }

    /// Positions of the events on process `chain` (1-based), in order.
    pub fn chain_positions(&self, chain: usize) -> &[usize] {
        &self.chains[chain - 1]
    }

    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &Event> + '_ {
        self.chains[chain - 1].iter().map(|&p| &self.events[p])
    }

    /// The `k`-th event (1-based) on process `chain`.
    pub fn event_on(&self, chain: usize, k: usize) -> &Event {
        &self.events[self.chains[chain - 1][k - 1]]
    }

    /// Direct dependency positions of the event at `pos`, without the
    /// implicit process predecessor.
    pub fn dep_positions(&self, pos: usize) -> &[usize] {
        &self.dep_pos[pos]
    }

    /// Position of the previous event on the same process.
    pub fn process_predecessor(&self, pos: usize) -> Option<usize> {
        let e = &self.events[pos];
        (e.index > 1).then(|| self.chains[e.process - 1][e.index as usize - 2])
    }

    /// Appends every direct predecessor of `pos` (explicit deps and the
    /// implicit process predecessor) to `out`.
    pub fn predecessors_into(&self, pos: usize, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.dep_pos[pos]);
        out.extend(self.process_predecessor(pos));
    }

    /// The cut containing every event.
    pub fn full_cut(&self) -> Cut {
        Cut(self.chains.iter().map(|c| c.len() as u32).collect())
    }
}

impl Chains for Computation {
    fn chain_count(&self) -> usize {
        self.n
    }

    fn chain_len(&self, chain: usize) -> usize {
        self.chains[chain - 1].len()
    }

    fn clock_at(&self, chain: usize, k: usize) -> &[u32] {
        self.event_on(chain, k).vc.as_slice()
    }
}

/// Kahn's algorithm, smallest ready slot first. On a cycle, returns a slot
/// that could not be ordered.
fn topo_sort(preds: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); preds.len()];
    for (slot, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(slot);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(s, _)| Reverse(s))
        .collect();
    let mut order = Vec::with_capacity(preds.len());
    while let Some(Reverse(slot)) = ready.pop() {
        order.push(slot);
        for &s in &succs[slot] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() == preds.len() {
        Ok(order)
    } else {
        Err(indegree.iter().position(|&d| d > 0).unwrap_or(0))
    }
}

/// Vector clocks over `chain_count` chains for events `0..len`, which must
/// be given in a topological order. Returns a row-major `len x chain_count`
/// table, chain 1 in column 0.
pub(crate) fn clocks_over(
    chain_count: usize,
    len: usize,
    chain_of: impl Fn(usize) -> usize,
    index_of: impl Fn(usize) -> u32,
    preds_into: impl Fn(usize, &mut Vec<usize>),
) -> Vec<u32> {
    let mut table = vec![0u32; len * chain_count];
    let mut preds = Vec::new();
    for pos in 0..len {
        preds.clear();
        preds_into(pos, &mut preds);
        let (done, rest) = table.split_at_mut(pos * chain_count);
        let row = &mut rest[..chain_count];
        for &p in &preds {
            debug_assert!(p < pos, "predecessor after event in topological order");
            let prow = &done[p * chain_count..(p + 1) * chain_count];
            for (r, &v) in row.iter_mut().zip(prow) {
                *r = (*r).max(v);
            }
        }
        row[chain_of(pos) - 1] = index_of(pos);
    }
    table
}
