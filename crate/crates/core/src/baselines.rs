//! Reference enumerators over the original process partition.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{self, Chains, Computation, Cut, ModelError};
use crate::visit::{CutVisitor, Visit};

/// Largest computation [`brute_force_downsets`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("stored cuts exceeded the cap of {cap} at rank {rank}")]
    MemoryCap {
        cap: usize,
        rank: usize,
        stats: Box<BfsStats>,
    },
    #[error("{events} events exceed the brute-force limit of {limit}")]
    TooLarge { events: usize, limit: usize },
    #[error("cut is not consistent")]
    InconsistentCut,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Chains whose next event can be added to `g` while keeping it consistent.
pub fn enabled_events(g: &Cut, comp: &Computation) -> Result<Vec<usize>, BaselineError> {
    if !model::is_consistent(g, comp)? {
        return Err(BaselineError::InconsistentCut);
    }
    Ok(enabled_unchecked(g.as_slice(), comp).collect())
}

fn enabled_unchecked<'a>(g: &'a [u32], comp: &'a Computation) -> impl Iterator<Item = usize> + 'a {
    (1..=comp.n()).filter(move |&i| {
        let next = g[i - 1] as usize + 1;
        next <= comp.chain_len(i)
            && comp
                .clock_at(i, next)
                .iter()
                .zip(g)
                .enumerate()
                .all(|(c, (&v, &have))| c == i - 1 || v <= have)
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BfsOptions {
    /// Only cuts with rank in this inclusive range are visited. Lower ranks
    /// are still expanded.
    pub rank_filter: Option<(usize, usize)>,
    /// Maximum number of cuts held at once (current level plus the level
    /// under construction).
    pub max_stored_cuts: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BfsStats {
    pub cuts_visited: u64,
    /// Visited cuts per rank.
    pub per_rank: Vec<u64>,
    /// Cuts whose successors were generated, per rank.
    pub expanded_per_rank: Vec<u64>,
    pub duplicates_suppressed: u64,
    pub peak_stored_cuts: usize,
    pub max_level_width: usize,
    pub stopped_early: bool,
}

impl BfsStats {
    pub fn expanded(&self) -> u64 {
        self.expanded_per_rank.iter().sum()
    }
}

/// Level-by-level BFS: the cuts of rank `r + 1` are generated from the
/// stored cuts of rank `r`, with a set suppressing duplicates. Each level
/// is visited in lexical order.
pub fn traditional_bfs<V: CutVisitor + ?Sized>(
    comp: &Computation,
    visitor: &mut V,
    options: BfsOptions,
) -> Result<BfsStats, BaselineError> {
    let (lo, hi) = options.rank_filter.unwrap_or((0, comp.len()));
    let hi = hi.min(comp.len());
    let cap = options.max_stored_cuts.unwrap_or(usize::MAX);
    let mut stats = BfsStats {
        per_rank: vec![0; comp.len() + 1],
        expanded_per_rank: vec![0; comp.len() + 1],
        ..Default::default()
    };

    let mut level: BTreeSet<Cut> = BTreeSet::new();
    level.insert(Cut::zero(comp.n()));
    stats.peak_stored_cuts = 1;
    let mut rank = 0;
    while !level.is_empty() {
        stats.max_level_width = stats.max_level_width.max(level.len());
        if rank >= lo && rank <= hi {
            for g in &level {
                stats.cuts_visited += 1;
                stats.per_rank[rank] += 1;
                if visitor.visit(&mut Visit::original_cut(rank, g)).is_break() {
                    stats.stopped_early = true;
                    return Ok(stats);
                }
            }
        }
        if rank >= hi {
            break;
        }

        let mut next = BTreeSet::new();
        for g in &level {
            stats.expanded_per_rank[rank] += 1;
            for i in enabled_unchecked(g.as_slice(), comp) {
                let mut h = g.clone();
                h.set(i, h.get(i) + 1);
                if !next.insert(h) {
                    stats.duplicates_suppressed += 1;
                }
            }
            let stored = level.len() + next.len();
            stats.peak_stored_cuts = stats.peak_stored_cuts.max(stored);
            if stored > cap {
                return Err(BaselineError::MemoryCap {
                    cap,
                    rank: rank + 1,
                    stats: Box::new(stats),
                });
            }
        }
        level = next;
        rank += 1;
    }
    Ok(stats)
}

/// Every downset of the happened-before order, grouped by rank (index =
/// rank), each group in lexical order. Built by deciding events one at a
/// time in topological order; an event may be taken only if all its direct
/// predecessors were.
pub fn brute_force_downsets(comp: &Computation) -> Result<Vec<BTreeSet<Cut>>, BaselineError> {
    if comp.len() > BRUTE_FORCE_LIMIT {
        return Err(BaselineError::TooLarge {
            events: comp.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let preds: Vec<Vec<usize>> = (0..comp.len())
        .map(|pos| {
            let mut v = Vec::new();
            comp.predecessors_into(pos, &mut v);
            v
        })
        .collect();
    let mut out = vec![BTreeSet::new(); comp.len() + 1];
    let mut taken = vec![false; comp.len()];
    let mut counts = vec![0u32; comp.n()];
    extend(comp, &preds, 0, &mut taken, &mut counts, &mut out);
    Ok(out)
}

fn extend(
    comp: &Computation,
    preds: &[Vec<usize>],
    pos: usize,
    taken: &mut [bool],
    counts: &mut [u32],
    out: &mut [BTreeSet<Cut>],
) {
    if pos == comp.len() {
        let cut = Cut::from_chains(counts.to_vec());
        out[cut.rank()].insert(cut);
        return;
    }
    extend(comp, preds, pos + 1, taken, counts, out);
    if preds[pos].iter().all(|&q| taken[q]) {
        let process = comp.event_at_position(pos).process;
        taken[pos] = true;
        counts[process - 1] += 1;
        extend(comp, preds, pos + 1, taken, counts, out);
        counts[process - 1] -= 1;
        taken[pos] = false;
    }
}
