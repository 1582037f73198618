//! Uniflow chain partitions.
//!
//! A chain partition is uniflow when no event on a higher-numbered chain
//! happened before an event on a lower-numbered chain: every cross-chain
//! edge points upward. Any consistent cut stays consistent when all chains
//! below some level are filled completely, which is what makes the
//! polynomial-space traversal possible.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{self, Chains, Computation, Cut, EventId, ModelError, VectorClock};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UniflowError {
    #[error("event {event} delivered before its dependency {dep}")]
    UnplacedDependency { event: EventId, dep: EventId },
    #[error("event {0} delivered twice")]
    AlreadyPlaced(EventId),
    #[error("event {0} is not on any chain")]
    Unassigned(EventId),
    #[error("event {0} appears on more than one chain")]
    Reassigned(EventId),
    #[error("unknown event {0}")]
    UnknownEvent(EventId),
    #[error("events {0} and {1} are adjacent on a chain but not ordered")]
    NotAChain(EventId, EventId),
    #[error("chain {chain} outside 0..={n_u}")]
    ChainOutOfRange { chain: usize, n_u: usize },
    #[error("cut is not consistent in the partition")]
    InconsistentCut,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Bookkeeping for the online partitioner.
///
/// Chain ids may be sparse while events are being placed: the first event
/// of process `p` opens chain `p` even if lower ids are unused. Ids are
/// compacted when the partition is finished.
#[derive(Debug, Clone, Default)]
pub struct PartitionerState {
    maxid: usize,
    chains: HashMap<usize, Vec<usize>>,
    chain_of: Vec<Option<usize>>,
}

impl PartitionerState {
    pub fn new(event_count: usize) -> Self {
        Self {
            maxid: 0,
            chains: HashMap::new(),
            chain_of: vec![None; event_count],
        }
    }

    /// Highest chain id handed out so far.
    pub fn maxid(&self) -> usize {
        self.maxid
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn last_event_of(&self, chain: usize) -> Option<usize> {
        self.chains.get(&chain).and_then(|c| c.last().copied())
    }

    pub fn chain_of(&self, pos: usize) -> Option<usize> {
        self.chain_of.get(pos).copied().flatten()
    }
}

/// Places the event at position `pos` of `comp` on a uniflow chain and
/// returns the (uncompacted) chain id.
///
/// The candidate chain is the highest of the event's own process and the
/// chains already holding its direct predecessors. If that chain ends with
/// an event concurrent to this one, a new topmost chain is opened instead.
/// Events must be delivered in an order consistent with happened-before.
pub fn find_uniflow_chain(
    state: &mut PartitionerState,
    comp: &Computation,
    pos: usize,
) -> Result<usize, UniflowError> {
    let event = comp.event_at_position(pos);
    if state.chain_of(pos).is_some() {
        return Err(UniflowError::AlreadyPlaced(event.id));
    }
    let mut preds = Vec::new();
    comp.predecessors_into(pos, &mut preds);

    let mut uid = event.process;
    for &p in &preds {
        let chain = state
            .chain_of(p)
            .ok_or_else(|| UniflowError::UnplacedDependency {
                event: event.id,
                dep: comp.event_at_position(p).id,
            })?;
        uid = uid.max(chain);
    }

    let target = match state.last_event_of(uid) {
        Some(last) => {
            let f = &comp.event_at_position(last).vc;
            if model::concurrent(&event.vc, f)? {
                state.maxid += 1;
                state.maxid
            } else {
                uid
            }
        }
        None => {
            state.maxid = state.maxid.max(uid);
            uid
        }
    };
    state.chains.entry(target).or_default().push(pos);
    state.chain_of[pos] = Some(target);
    Ok(target)
}

/// A chain partition of a computation together with vector clocks
/// regenerated over its chains.
///
/// Constructors do not check the uniflow property; use [`verify_uniflow`].
/// Traversal routines assume it holds.
#[derive(Debug, Clone)]
pub struct UniflowPartition<'a> {
    source: &'a Computation,
    chains: Vec<Vec<usize>>,
    chain_of: Vec<usize>,
    slot_of: Vec<usize>,
    row_offset: Vec<usize>,
    clocks: Vec<u32>,
}

impl<'a> UniflowPartition<'a> {
    /// Online partition built by feeding the topological order of `comp`
    /// through [`find_uniflow_chain`].
    pub fn online(comp: &'a Computation) -> Result<Self, UniflowError> {
        build_uniflow_partition(comp)
    }

    /// The computation's own process chains.
    pub fn process_partition(comp: &'a Computation) -> Self {
        let chains = (1..=comp.n())
            .map(|c| comp.chain_positions(c).to_vec())
            .collect();
        Self::assemble(comp, chains)
    }

    /// A partition given explicitly as chains of event ids, lowest chain
    /// first. Every event must appear exactly once, and consecutive events
    /// on a chain must be ordered by happened-before.
    pub fn from_chains(
        comp: &'a Computation,
        chains: &[Vec<EventId>],
    ) -> Result<Self, UniflowError> {
        let mut seen = vec![false; comp.len()];
        let mut pos_chains = Vec::with_capacity(chains.len());
        for chain in chains {
            let mut positions = Vec::with_capacity(chain.len());
            for &id in chain {
                let pos = comp.position(id).ok_or(UniflowError::UnknownEvent(id))?;
                if std::mem::replace(&mut seen[pos], true) {
                    return Err(UniflowError::Reassigned(id));
                }
                if let Some(&prev) = positions.last() {
                    let a = &comp.event_at_position(prev).vc;
                    let b = &comp.event_at_position(pos).vc;
                    if !model::happened_before(a, b)? {
                        return Err(UniflowError::NotAChain(comp.event_at_position(prev).id, id));
                    }
                }
                positions.push(pos);
            }
            pos_chains.push(positions);
        }
        if let Some(pos) = seen.iter().position(|s| !s) {
            return Err(UniflowError::Unassigned(comp.event_at_position(pos).id));
        }
        Ok(Self::assemble(comp, pos_chains))
    }

    fn assemble(source: &'a Computation, chains: Vec<Vec<usize>>) -> Self {
        let mut chain_of = vec![0; source.len()];
        let mut slot_of = vec![0; source.len()];
        let mut row_offset = Vec::with_capacity(chains.len() + 1);
        let mut rows = 0;
        for (i, chain) in chains.iter().enumerate() {
            row_offset.push(rows);
            for (k, &pos) in chain.iter().enumerate() {
                chain_of[pos] = i + 1;
                slot_of[pos] = k + 1;
            }
            rows += chain.len();
        }
        row_offset.push(rows);
        let mut p = Self {
            source,
            chains,
            chain_of,
            slot_of,
            row_offset,
            clocks: Vec::new(),
        };
        p.regenerate_vector_clocks();
        p
    }

    /// Recomputes the clocks over this partition's chains, using the
    /// computation's dependency edges plus the chain order itself.
    pub fn regenerate_vector_clocks(&mut self) {
        let n_u = self.chains.len();
        let comp = self.source;
        let by_pos = model::clocks_over(
            n_u,
            comp.len(),
            |pos| self.chain_of[pos],
            |pos| self.slot_of[pos] as u32,
            |pos, out: &mut Vec<usize>| {
                comp.predecessors_into(pos, out);
                let slot = self.slot_of[pos];
                if slot > 1 {
                    out.push(self.chains[self.chain_of[pos] - 1][slot - 2]);
                }
            },
        );
        // reorder rows chain by chain
        let mut clocks = vec![0u32; by_pos.len()];
        for (pos, row) in by_pos.chunks_exact(n_u.max(1)).enumerate().take(comp.len()) {
            let r = self.row(self.chain_of[pos], self.slot_of[pos]);
            clocks[r * n_u..(r + 1) * n_u].copy_from_slice(row);
        }
        self.clocks = clocks;
    }

    #[inline]
    fn row(&self, chain: usize, k: usize) -> usize {
        self.row_offset[chain - 1] + k - 1
    }

    pub fn source(&self) -> &'a Computation {
        self.source
    }

    /// Number of chains, `n_u`.
    pub fn n_u(&self) -> usize {
        self.chains.len()
    }

    pub fn event_count(&self) -> usize {
        self.source.len()
    }

    /// Event ids on `chain` (1-based), in chain order.
    pub fn chain(&self, chain: usize) -> Vec<EventId> {
        self.chains[chain - 1]
            .iter()
            .map(|&p| self.source.event_at_position(p).id)
            .collect()
    }

    pub fn chain_sizes(&self) -> Vec<usize> {
        self.chains.iter().map(Vec::len).collect()
    }

    pub fn chain_of(&self, id: EventId) -> Option<usize> {
        self.source.position(id).map(|p| self.chain_of[p])
    }

    /// Regenerated clock of event `id`.
    pub fn uvc(&self, id: EventId) -> Option<VectorClock> {
        let pos = self.source.position(id)?;
        Some(VectorClock::from_chains(
            self.clock_at(self.chain_of[pos], self.slot_of[pos])
                .to_vec(),
        ))
    }

    /// Original `(process, index)` of the `k`-th event on uniflow `chain`.
    pub fn back_map(&self, chain: usize, k: usize) -> (usize, usize) {
        let e = self.source.event_at_position(self.chains[chain - 1][k - 1]);
        (e.process, e.index as usize)
    }

    /// The cut containing every event.
    pub fn full_cut(&self) -> Cut {
        Cut::from_chains(self.chains.iter().map(|c| c.len() as u32).collect())
    }
}

impl Chains for UniflowPartition<'_> {
    fn chain_count(&self) -> usize {
        self.chains.len()
    }

    fn chain_len(&self, chain: usize) -> usize {
        self.chains[chain - 1].len()
    }

    #[inline]
    fn clock_at(&self, chain: usize, k: usize) -> &[u32] {
        let n_u = self.chains.len();
        let r = self.row(chain, k);
        &self.clocks[r * n_u..(r + 1) * n_u]
    }
}

/// Runs the online partitioner over `comp` in topological order and
/// compacts the chain ids to `1..=n_u`, preserving their order.
pub fn build_uniflow_partition(comp: &Computation) -> Result<UniflowPartition<'_>, UniflowError> {
    let mut state = PartitionerState::new(comp.len());
    for pos in 0..comp.len() {
        find_uniflow_chain(&mut state, comp, pos)?;
    }
    let mut ids: Vec<usize> = state.chains.keys().copied().collect();
    ids.sort_unstable();
    let chains = ids
        .into_iter()
        .map(|id| state.chains.remove(&id).unwrap_or_default())
        .collect();
    Ok(UniflowPartition::assemble(comp, chains))
}

/// Every event on its own chain, ordered by the lexical order of the
/// original clocks (ties broken by process).
pub fn trivial_partition(comp: &Computation) -> UniflowPartition<'_> {
    let mut order: Vec<usize> = (0..comp.len()).collect();
    order.sort_by(|&a, &b| {
        let ea = comp.event_at_position(a);
        let eb = comp.event_at_position(b);
        model::lexical_slices(ea.vc.as_slice(), eb.vc.as_slice()).then(ea.process.cmp(&eb.process))
    });
    UniflowPartition::assemble(comp, order.into_iter().map(|p| vec![p]).collect())
}

/// Checks the uniflow property against the transitive closure of the
/// dependency edges: no event happened before an event on a lower chain.
pub fn verify_uniflow(p: &UniflowPartition<'_>) -> bool {
    let comp = p.source;
    let words = comp.len().div_ceil(64);
    let mut ancestors = vec![0u64; comp.len() * words];
    let mut preds = Vec::new();
    for pos in 0..comp.len() {
        preds.clear();
        comp.predecessors_into(pos, &mut preds);
        let (done, rest) = ancestors.split_at_mut(pos * words);
        let row = &mut rest[..words];
        for &q in &preds {
            row[q / 64] |= 1 << (q % 64);
            for (w, &a) in row.iter_mut().zip(&done[q * words..(q + 1) * words]) {
                *w |= a;
            }
        }
    }
    (0..comp.len()).all(|x| {
        let row = &ancestors[x * words..(x + 1) * words];
        (0..comp.len())
            .filter(|&y| row[y / 64] >> (y % 64) & 1 == 1)
            .all(|y| p.chain_of[y] <= p.chain_of[x])
    })
}

/// The same check using the regenerated clocks: `y -> x` with `y` on a
/// higher chain than `x` never occurs.
pub fn verify_uniflow_clocks(p: &UniflowPartition<'_>) -> bool {
    let comp = p.source;
    (0..comp.len()).all(|x| {
        let cx = p.chain_of[x];
        let vx = p.clock_at(cx, p.slot_of[x]);
        (0..comp.len()).filter(|&y| p.chain_of[y] > cx).all(|y| {
            let vy = p.clock_at(p.chain_of[y], p.slot_of[y]);
            !(model::dominated(vy, vx) && vy != vx)
        })
    })
}

/// Keeps `g` above chain `k` and takes every event on chains `1..=k`.
/// `k = 0` returns `g` unchanged.
pub fn uniflow_fill(g: &Cut, k: usize, p: &UniflowPartition<'_>) -> Result<Cut, UniflowError> {
    let n_u = p.n_u();
    if k > n_u {
        return Err(UniflowError::ChainOutOfRange { chain: k, n_u });
    }
    if !model::is_consistent(g, p)? {
        return Err(UniflowError::InconsistentCut);
    }
    let mut h = g.clone();
    for chain in 1..=k {
        h.set(chain, p.chain_len(chain) as u32);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventRecord;

    fn vc(display: &[u32]) -> VectorClock {
        VectorClock::from_display(display)
    }

    fn ids(raw: &[u64]) -> Vec<EventId> {
        raw.iter().map(|&i| EventId(i)).collect()
    }

    /// Two crossing edges: P2#1 -> P1#2 and P1#1 -> P2#2. Records are in the
    /// delivery order P1#1, P2#1, P2#2, P1#2.
    fn crossing() -> Computation {
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
    fn three_by_three() -> Computation {
        Computation::from_records(
            3,
            [
                EventRecord::new(11, 1, &[]),
                EventRecord::new(12, 1, &[]),
                EventRecord::new(13, 1, &[]),
                EventRecord::new(21, 2, &[]),
                EventRecord::new(22, 2, &[]),
                EventRecord::new(23, 2, &[11]),
                EventRecord::new(31, 3, &[22]),
                EventRecord::new(32, 3, &[]),
                EventRecord::new(33, 3, &[12]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn online_placement_opens_third_chain() {
        let comp = crossing();
        let mut state = PartitionerState::new(comp.len());
        let placed: Vec<usize> = (0..comp.len())
            .map(|pos| find_uniflow_chain(&mut state, &comp, pos).unwrap())
            .collect();
        assert_eq!(placed, vec![1, 2, 2, 3]);
        assert_eq!(state.maxid(), 3);
    }

    #[test]
    fn online_partition_of_crossing_edges() {
        let comp = crossing();
        let p = build_uniflow_partition(&comp).unwrap();
        assert_eq!(p.n_u(), 3);
        assert_eq!(p.chain(1), ids(&[1]));
        assert_eq!(p.chain(2), ids(&[3, 4]));
        assert_eq!(p.chain(3), ids(&[2]));
        assert_eq!(p.uvc(EventId(2)).unwrap(), vc(&[1, 1, 1]));
        assert_eq!(p.uvc(EventId(1)).unwrap(), vc(&[0, 0, 1]));
        assert_eq!(p.uvc(EventId(3)).unwrap(), vc(&[0, 1, 0]));
        assert_eq!(p.uvc(EventId(4)).unwrap(), vc(&[0, 2, 1]));
        assert_eq!(p.back_map(3, 1), (1, 2));
        assert!(verify_uniflow(&p));
        assert!(verify_uniflow_clocks(&p));
    }

    #[test]
    fn unplaced_dependency_is_rejected() {
        let comp = crossing();
        let mut state = PartitionerState::new(comp.len());
        let err = find_uniflow_chain(&mut state, &comp, 2).unwrap_err();
        assert!(matches!(err, UniflowError::UnplacedDependency { .. }));
        find_uniflow_chain(&mut state, &comp, 0).unwrap();
        assert_eq!(
            find_uniflow_chain(&mut state, &comp, 0),
            Err(UniflowError::AlreadyPlaced(EventId(1)))
        );
    }

    #[test]
    fn single_process_stays_on_one_chain() {
        let comp =
            Computation::from_records(1, (0..5).map(|i| EventRecord::new(i, 1, &[]))).unwrap();
        let p = build_uniflow_partition(&comp).unwrap();
        assert_eq!(p.n_u(), 1);
        assert_eq!(p.chain_sizes(), vec![5]);
    }

    #[test]
    fn antichain_needs_one_chain_each() {
        let comp =
            Computation::from_records(4, (1..=4).map(|i| EventRecord::new(i, i as usize, &[])))
                .unwrap();
        assert_eq!(build_uniflow_partition(&comp).unwrap().n_u(), 4);
    }

    #[test]
    fn sparse_process_ids_are_compacted() {
        // P5's event arrives before anything on P3.
        let comp = Computation::from_records(
            5,
            [
                EventRecord::new(1, 5, &[]),
                EventRecord::new(2, 3, &[]),
                EventRecord::new(3, 3, &[1]),
                EventRecord::new(4, 1, &[]),
            ],
        )
        .unwrap();
        let p = build_uniflow_partition(&comp).unwrap();
        assert!(verify_uniflow(&p));
        assert_eq!(p.chain_sizes().iter().sum::<usize>(), 4);
        assert!(p.chain_sizes().iter().all(|&s| s > 0));
        // P3#2 depends on chain 5, concurrent with nothing there, so it
        // joins P5's chain; chains are {P1#1}, {P3#1}, {P5#1, P3#2}.
        assert_eq!(p.n_u(), 3);
        assert_eq!(p.chain(3), ids(&[1, 3]));
    }

    #[test]
    fn regenerated_clocks_on_three_chains() {
        let comp = three_by_three();
        let p = UniflowPartition::process_partition(&comp);
        assert!(verify_uniflow(&p));
        assert_eq!(p.uvc(EventId(23)).unwrap(), vc(&[0, 3, 1]));
        assert_eq!(p.uvc(EventId(31)).unwrap(), vc(&[1, 2, 0]));
        assert_eq!(p.uvc(EventId(33)).unwrap(), vc(&[3, 2, 2]));
        assert_eq!(p.uvc(EventId(11)).unwrap(), vc(&[0, 0, 1]));
        // the online partitioner leaves an already-uniflow layout alone
        let online = build_uniflow_partition(&comp).unwrap();
        for c in 1..=3 {
            assert_eq!(online.chain(c), p.chain(c));
        }
    }

    #[test]
    fn crossing_process_partitions_are_not_uniflow() {
        // e,f on P2 and a,b on P1 with a -> f and e -> b
        let comp = Computation::from_records(
            2,
            [
                EventRecord::new(1, 1, &[]),
                EventRecord::new(3, 2, &[]),
                EventRecord::new(2, 1, &[3]),
                EventRecord::new(4, 2, &[1]),
            ],
        )
        .unwrap();
        let p = UniflowPartition::process_partition(&comp);
        assert!(!verify_uniflow(&p));
        assert!(!verify_uniflow_clocks(&p));

        // a,b,c on P2 and e,f,g on P1 with f -> b and c -> g
        let comp = Computation::from_records(
            2,
            [
                EventRecord::new(5, 1, &[]),
                EventRecord::new(6, 1, &[]),
                EventRecord::new(1, 2, &[]),
                EventRecord::new(2, 2, &[6]),
                EventRecord::new(3, 2, &[]),
                EventRecord::new(7, 1, &[3]),
            ],
        )
        .unwrap();
        let p = UniflowPartition::process_partition(&comp);
        assert!(!verify_uniflow(&p));
        // moving g on top of c repairs it
        let fixed =
            UniflowPartition::from_chains(&comp, &[ids(&[5, 6]), ids(&[1, 2, 3, 7])]).unwrap();
        assert!(verify_uniflow(&fixed));
    }

    #[test]
    fn from_chains_validation() {
        let comp = crossing();
        assert_eq!(
            UniflowPartition::from_chains(&comp, &[ids(&[1]), ids(&[3, 4])]).unwrap_err(),
            UniflowError::Unassigned(EventId(2))
        );
        assert_eq!(
            UniflowPartition::from_chains(&comp, &[ids(&[1, 2]), ids(&[3, 4, 1])]).unwrap_err(),
            UniflowError::Reassigned(EventId(1))
        );
        assert!(matches!(
            UniflowPartition::from_chains(&comp, &[ids(&[1, 3]), ids(&[2, 4])]),
            Err(UniflowError::NotAChain(..))
        ));
    }

    #[test]
    fn trivial_partition_is_one_event_per_chain() {
        let comp = three_by_three();
        let p = trivial_partition(&comp);
        assert_eq!(p.n_u(), 9);
        assert!(verify_uniflow(&p));
        assert!(verify_uniflow_clocks(&p));
        let empty = Computation::empty(3);
        assert_eq!(trivial_partition(&empty).n_u(), 0);
    }

    #[test]
    fn fill_examples() {
        let comp = three_by_three();
        let p = UniflowPartition::process_partition(&comp);
        let g = Cut::from_display(&[1, 2, 1]);
        let h1 = uniflow_fill(&g, 1, &p).unwrap();
        assert_eq!(h1, Cut::from_display(&[1, 2, 3]));
        assert!(model::is_consistent(&h1, &p).unwrap());
        let h2 = uniflow_fill(&g, 2, &p).unwrap();
        assert_eq!(h2, Cut::from_display(&[1, 3, 3]));
        assert!(model::is_consistent(&h2, &p).unwrap());
        assert_eq!(uniflow_fill(&g, 0, &p).unwrap(), g);
        assert!(uniflow_fill(&g, 4, &p).is_err());
        assert_eq!(
            uniflow_fill(&Cut::from_display(&[1, 0, 0]), 1, &p),
            Err(UniflowError::InconsistentCut)
        );
    }
}
