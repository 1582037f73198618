//! Breadth-first traversal of consistent cuts over a uniflow partition.
//!
//! Each rank is walked in lexical order: start from the lexically smallest
//! consistent cut of that rank and step to the lexical successor until none
//! is left. Only the current cut, one candidate and an `n_u x n_u`
//! projection matrix are kept, independent of how many cuts a rank has.

use std::cell::Cell;
use std::ops::{ControlFlow, Deref, DerefMut, RangeInclusive};
use std::rc::Rc;

use thiserror::Error;

use crate::model::{self, Chains, Cut, ModelError};
use crate::uniflow::UniflowPartition;
use crate::visit::{CutVisitor, Visit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraversalError {
    #[error("rank {rank} outside {min}..={max}")]
    RankOutOfRange { rank: usize, min: usize, max: usize },
    #[error("empty rank range {0}..={1}")]
    EmptyRange(usize, usize),
    #[error("cut is not consistent in the partition")]
    InconsistentCut,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-chain causal projections of a cut.
///
/// Row `i` joins the clocks of the cut's last events on chains `i..=n_u`.
/// Row 1 is the cut itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMatrix {
    n_u: usize,
    rows: Vec<u32>,
}

impl ProjectionMatrix {
    pub fn new(n_u: usize) -> Self {
        Self {
            n_u,
            rows: vec![0; n_u * n_u],
        }
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    /// Row for `chain` (1-based), chain 1 first.
    pub fn row(&self, chain: usize) -> &[u32] {
        &self.rows[(chain - 1) * self.n_u..chain * self.n_u]
    }

    pub fn row_cut(&self, chain: usize) -> Cut {
        Cut::from_chains(self.row(chain).to_vec())
    }

    pub fn words(&self) -> usize {
        self.rows.len()
    }

    /// Recomputes rows `top..=1` for cut `g`; rows above `top` must already
    /// be current.
    fn refresh(&mut self, g: &[u32], p: &UniflowPartition<'_>, top: usize, ops: &mut u64) {
        let n_u = self.n_u;
        for i in (1..=top).rev() {
            let (below, above) = self.rows.split_at_mut(i * n_u);
            let row = &mut below[(i - 1) * n_u..];
            if i == n_u {
                row.fill(0);
            } else {
                row.copy_from_slice(&above[..n_u]);
            }
            if g[i - 1] > 0 {
                let vc = p.clock_at(i, g[i - 1] as usize);
                for (r, &v) in row.iter_mut().zip(vc) {
                    *r = (*r).max(v);
                }
            }
            *ops += n_u as u64;
        }
    }
}

fn check_cut(g: &Cut, p: &UniflowPartition<'_>) -> Result<(), TraversalError> {
    if model::is_consistent(g, p)? {
        Ok(())
    } else {
        Err(TraversalError::InconsistentCut)
    }
}

/// Adds `d` events bottom-up, filling each chain before moving to the next.
fn fill_bottom_up(g: &mut [u32], mut d: usize, p: &UniflowPartition<'_>, ops: &mut u64) {
    for (j, count) in g.iter_mut().enumerate() {
        if d == 0 {
            return;
        }
        *ops += 1;
        let room = p.chain_len(j + 1) - *count as usize;
        if d <= room {
            *count += d as u32;
            return;
        }
        *count += room as u32;
        d -= room;
    }
    debug_assert_eq!(d, 0, "rank beyond the full cut");
}

fn sum(g: &[u32]) -> usize {
    g.iter().map(|&c| c as usize).sum()
}

/// Lexically smallest consistent cut of rank `r` that is lexically at least
/// `g`.
pub fn get_min_cut(g: &Cut, r: usize, p: &UniflowPartition<'_>) -> Result<Cut, TraversalError> {
    check_cut(g, p)?;
    let have = g.rank();
    if r < have || r > p.event_count() {
        return Err(TraversalError::RankOutOfRange {
            rank: r,
            min: have,
            max: p.event_count(),
        });
    }
    let mut out = g.clone();
    fill_bottom_up(out.as_mut_slice(), r - have, p, &mut 0);
    Ok(out)
}

fn check_successor_input(
    g: &Cut,
    r: usize,
    p: &UniflowPartition<'_>,
) -> Result<(), TraversalError> {
    check_cut(g, p)?;
    if g.rank() != r {
        return Err(TraversalError::RankOutOfRange {
            rank: r,
            min: g.rank(),
            max: g.rank(),
        });
    }
    Ok(())
}

/// Least consistent cut of rank `r` lexically greater than `g`, found by
/// re-closing the candidate from scratch for every chain tried.
pub fn get_successor(
    g: &Cut,
    r: usize,
    p: &UniflowPartition<'_>,
) -> Result<Option<Cut>, TraversalError> {
    check_successor_input(g, r, p)?;
    let n_u = p.n_u();
    let gs = g.as_slice();
    for i in 2..=n_u {
        if gs[i - 1] as usize >= p.chain_len(i) {
            continue;
        }
        let mut k = gs.to_vec();
        k[i - 1] += 1;
        k[..i - 1].fill(0);
        for j in i..=n_u {
            if k[j - 1] == 0 {
                continue;
            }
            let vc = p.clock_at(j, k[j - 1] as usize);
            for c in 0..i - 1 {
                k[c] = k[c].max(vc[c]);
            }
        }
        let have = sum(&k);
        if have <= r {
            fill_bottom_up(&mut k, r - have, p, &mut 0);
            return Ok(Some(Cut::from_chains(k)));
        }
    }
    Ok(None)
}

pub fn compute_projections(
    g: &Cut,
    p: &UniflowPartition<'_>,
) -> Result<ProjectionMatrix, TraversalError> {
    check_cut(g, p)?;
    let mut m = ProjectionMatrix::new(p.n_u());
    m.refresh(g.as_slice(), p, p.n_u(), &mut 0);
    Ok(m)
}

/// Successor step using projections. `proj` must hold the projections of
/// `g`. Writes the successor into `k` and returns the chain that was
/// advanced, or `None` when `g` is the last cut of rank `r`.
fn successor_into(
    g: &[u32],
    r: usize,
    p: &UniflowPartition<'_>,
    proj: &ProjectionMatrix,
    k: &mut [u32],
    ops: &mut u64,
) -> Option<usize> {
    let n_u = g.len();
    k.copy_from_slice(g);
    *ops += n_u as u64;
    // events of g on chains 1..=i
    let mut below = g.first().copied().unwrap_or(0) as usize;
    for i in 2..=n_u {
        let gi = g[i - 1] as usize;
        below += gi;
        if gi >= p.chain_len(i) {
            continue;
        }
        k[i - 1] = gi as u32 + 1;
        let vc = p.clock_at(i, gi + 1);
        let row = proj.row(i);
        let mut have = r - below + gi + 1;
        for c in 0..i - 1 {
            let v = vc[c].max(row[c]);
            k[c] = v;
            have += v as usize;
        }
        *ops += i as u64;
        if have <= r {
            fill_bottom_up(k, r - have, p, ops);
            return Some(i);
        }
    }
    None
}

/// Same contract as [`get_successor`], with dependencies fixed in one pass
/// per chain from the cut's projections.
pub fn get_successor_optimized(
    g: &Cut,
    r: usize,
    p: &UniflowPartition<'_>,
) -> Result<Option<Cut>, TraversalError> {
    check_successor_input(g, r, p)?;
    let mut ops = 0;
    let mut proj = ProjectionMatrix::new(p.n_u());
    proj.refresh(g.as_slice(), p, p.n_u(), &mut ops);
    let mut k = vec![0; p.n_u()];
    Ok(successor_into(g.as_slice(), r, p, &proj, &mut k, &mut ops).map(|_| Cut::from_chains(k)))
}

/// Translates a uniflow cut into the consistent cut over the original
/// processes holding the same events.
pub fn remap(g_u: &Cut, p: &UniflowPartition<'_>) -> Result<Cut, TraversalError> {
    check_cut(g_u, p)?;
    let mut scratch = RemapScratch::unmetered(p.source().n());
    Ok(scratch.remap(g_u, p).clone())
}

/// Counts cut buffers that are alive at the same time.
#[derive(Debug, Default)]
struct CutMeter {
    live: Cell<usize>,
    peak: Cell<usize>,
    live_words: Cell<usize>,
    peak_words: Cell<usize>,
}

impl CutMeter {
    fn cut(self: &Rc<Self>, len: usize) -> MeteredCut {
        self.live.set(self.live.get() + 1);
        self.peak.set(self.peak.get().max(self.live.get()));
        self.live_words.set(self.live_words.get() + len);
        self.peak_words
            .set(self.peak_words.get().max(self.live_words.get()));
        MeteredCut {
            cut: Cut::zero(len),
            meter: Some(Rc::clone(self)),
        }
    }
}

#[derive(Debug)]
struct MeteredCut {
    cut: Cut,
    meter: Option<Rc<CutMeter>>,
}

impl Drop for MeteredCut {
    fn drop(&mut self) {
        if let Some(m) = &self.meter {
            m.live.set(m.live.get() - 1);
            m.live_words.set(m.live_words.get() - self.cut.len());
        }
    }
}

impl Deref for MeteredCut {
    type Target = Cut;
    fn deref(&self) -> &Cut {
        &self.cut
    }
}

impl DerefMut for MeteredCut {
    fn deref_mut(&mut self) -> &mut Cut {
        &mut self.cut
    }
}

/// Buffers for translating uniflow cuts back to the original processes.
#[derive(Debug)]
pub struct RemapScratch {
    indicator: Vec<u32>,
    out: MeteredCut,
    valid: bool,
}

impl RemapScratch {
    fn unmetered(n: usize) -> Self {
        Self {
            indicator: vec![0; n],
            out: MeteredCut {
                cut: Cut::zero(n),
                meter: None,
            },
            valid: false,
        }
    }

    fn metered(n: usize, meter: &Rc<CutMeter>) -> Self {
        Self {
            indicator: vec![0; n],
            out: meter.cut(n),
            valid: false,
        }
    }

    pub(crate) fn invalidate(&mut self) {
        self.valid = false;
    }

    pub(crate) fn remap(&mut self, g_u: &Cut, p: &UniflowPartition<'_>) -> &Cut {
        if self.valid {
            return &self.out;
        }
        let comp = p.source();
        self.indicator.fill(0);
        for (i, &k) in g_u.as_slice().iter().enumerate() {
            if k > 0 {
                let (c, e) = p.back_map(i + 1, k as usize);
                self.indicator[c - 1] = self.indicator[c - 1].max(e as u32);
            }
        }
        let out = self.out.as_mut_slice();
        out.fill(0);
        for (c, &e) in self.indicator.iter().enumerate() {
            if e > 0 {
                let vce = comp.clock_at(c + 1, e as usize);
                for (o, &v) in out.iter_mut().zip(vce) {
                    *o = (*o).max(v);
                }
            }
        }
        self.valid = true;
        &self.out
    }
}

/// How the projection matrix follows the current cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionRefresh {
    /// Recompute only the rows at or below the chain that produced the
    /// successor.
    #[default]
    Partial,
    /// Recompute every row before each successor step.
    Full,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TraversalOptions {
    pub refresh: ProjectionRefresh,
}

/// Counters gathered during one traversal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub cuts_visited: u64,
    /// Cuts visited per rank, indexed by rank.
    pub per_rank: Vec<u64>,
    pub stopped_early: bool,
    pub min_cut_calls: u64,
    pub successor_calls: u64,
    /// Lowest and highest rank argument passed to the min-cut and
    /// successor steps.
    pub min_rank_called: Option<usize>,
    pub max_rank_called: Option<usize>,
    /// Inner-loop steps spent in successor computation, projections
    /// included.
    pub successor_ops: u64,
    /// Most cut buffers alive at once.
    pub peak_live_cuts: usize,
    /// Projection matrix plus peak cut buffers plus remap indicator, in
    /// integers.
    pub aux_words: usize,
}

impl TraversalStats {
    fn note_call(&mut self, rank: usize) {
        self.min_rank_called = Some(self.min_rank_called.map_or(rank, |m| m.min(rank)));
        self.max_rank_called = Some(self.max_rank_called.map_or(rank, |m| m.max(rank)));
    }
}

/// Visits every consistent cut, rank by rank, lexically within a rank.
pub fn traverse_bfs<V: CutVisitor + ?Sized>(
    p: &UniflowPartition<'_>,
    visitor: &mut V,
) -> TraversalStats {
    walk(p, 0..=p.event_count(), TraversalOptions::default(), visitor)
}

/// Visits the consistent cuts with rank in `r1..=r2` without touching
/// lower ranks.
pub fn traverse_rank_range<V: CutVisitor + ?Sized>(
    p: &UniflowPartition<'_>,
    r1: usize,
    r2: usize,
    visitor: &mut V,
) -> Result<TraversalStats, TraversalError> {
    traverse_with(p, r1, r2, TraversalOptions::default(), visitor)
}

pub fn traverse_with<V: CutVisitor + ?Sized>(
    p: &UniflowPartition<'_>,
    r1: usize,
    r2: usize,
    options: TraversalOptions,
    visitor: &mut V,
) -> Result<TraversalStats, TraversalError> {
    if r1 > r2 {
        return Err(TraversalError::EmptyRange(r1, r2));
    }
    if r2 > p.event_count() {
        return Err(TraversalError::RankOutOfRange {
            rank: r2,
            min: 0,
            max: p.event_count(),
        });
    }
    Ok(walk(p, r1..=r2, options, visitor))
}

fn walk<V: CutVisitor + ?Sized>(
    p: &UniflowPartition<'_>,
    ranks: RangeInclusive<usize>,
    options: TraversalOptions,
    visitor: &mut V,
) -> TraversalStats {
    let n_u = p.n_u();
    let meter = Rc::new(CutMeter::default());
    let mut stats = TraversalStats {
        per_rank: vec![0; *ranks.end() + 1],
        ..Default::default()
    };
    let mut proj = ProjectionMatrix::new(n_u);
    let mut scratch = RemapScratch::metered(p.source().n(), &meter);
    let mut g = meter.cut(n_u);
    let mut k = meter.cut(n_u);

    'ranks: for r in ranks {
        g.as_mut_slice().fill(0);
        stats.note_call(r);
        stats.min_cut_calls += 1;
        fill_bottom_up(g.as_mut_slice(), r, p, &mut 0);
        // rows above this are current for g
        let mut stale_top = n_u;
        loop {
            stats.cuts_visited += 1;
            stats.per_rank[r] += 1;
            let mut visit = Visit::uniflow_cut(r, &g, p, &mut scratch);
            if visitor.visit(&mut visit).is_break() {
                stats.stopped_early = true;
                break 'ranks;
            }
            if options.refresh == ProjectionRefresh::Full {
                stale_top = n_u;
            }
            proj.refresh(g.as_slice(), p, stale_top, &mut stats.successor_ops);
            stats.note_call(r);
            stats.successor_calls += 1;
            match successor_into(
                g.as_slice(),
                r,
                p,
                &proj,
                k.as_mut_slice(),
                &mut stats.successor_ops,
            ) {
                Some(chain) => {
                    std::mem::swap(&mut g, &mut k);
                    stale_top = chain;
                }
                None => break,
            }
        }
    }

    stats.peak_live_cuts = meter.peak.get();
    stats.aux_words = proj.words() + meter.peak_words.get() + scratch.indicator.len();
    stats
}

/// Convenience wrapper: visits with a closure.
pub fn for_each_cut<F>(p: &UniflowPartition<'_>, mut f: F) -> TraversalStats
where
    F: FnMut(&mut Visit<'_>) -> ControlFlow<()>,
{
    traverse_bfs(p, &mut f)
}
