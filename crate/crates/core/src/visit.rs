//! Visitor hook shared by every enumerator.

use std::ops::ControlFlow;

use crate::model::Cut;
use crate::traversal::RemapScratch;
use crate::uniflow::UniflowPartition;

/// One enumerated consistent cut.
///
/// Enumerators over the original partition hand out the cut directly.
/// The uniflow traversal hands out its own cut and translates it back to
/// the original processes only when [`Visit::original`] is called.
pub struct Visit<'v> {
    rank: usize,
    inner: Inner<'v>,
}

enum Inner<'v> {
    Original(&'v Cut),
    Uniflow {
        cut: &'v Cut,
        partition: &'v UniflowPartition<'v>,
        scratch: &'v mut RemapScratch,
    },
}

impl<'v> Visit<'v> {
    pub fn original_cut(rank: usize, cut: &'v Cut) -> Self {
        Self {
            rank,
            inner: Inner::Original(cut),
        }
    }

    pub(crate) fn uniflow_cut(
        rank: usize,
        cut: &'v Cut,
        partition: &'v UniflowPartition<'v>,
        scratch: &'v mut RemapScratch,
    ) -> Self {
        scratch.invalidate();
        Self {
            rank,
            inner: Inner::Uniflow {
                cut,
                partition,
                scratch,
            },
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The cut over the uniflow chains, when the enumerator has one.
    pub fn uniflow(&self) -> Option<&Cut> {
        match &self.inner {
            Inner::Original(_) => None,
            Inner::Uniflow { cut, .. } => Some(cut),
        }
    }

    /// The cut over the original processes.
    pub fn original(&mut self) -> &Cut {
        match &mut self.inner {
            Inner::Original(cut) => cut,
            Inner::Uniflow {
                cut,
                partition,
                scratch,
            } => scratch.remap(cut, partition),
        }
    }
}

pub trait CutVisitor {
    /// Called once per consistent cut; `Break` stops the whole enumeration.
    fn visit(&mut self, visit: &mut Visit<'_>) -> ControlFlow<()>;
}

impl<F> CutVisitor for F
where
    F: FnMut(&mut Visit<'_>) -> ControlFlow<()>,
{
    fn visit(&mut self, visit: &mut Visit<'_>) -> ControlFlow<()> {
        self(visit)
    }
}

/// Counts cuts without looking at them.
#[derive(Debug, Default, Clone, Copy)]
pub struct CountVisitor {
    pub count: u64,
}

impl CutVisitor for CountVisitor {
    fn visit(&mut self, _: &mut Visit<'_>) -> ControlFlow<()> {
        self.count += 1;
        ControlFlow::Continue(())
    }
}

/// Collects every cut over the original processes, with its rank.
#[derive(Debug, Default, Clone)]
pub struct CollectVisitor {
    pub cuts: Vec<(usize, Cut)>,
}

impl CutVisitor for CollectVisitor {
    fn visit(&mut self, visit: &mut Visit<'_>) -> ControlFlow<()> {
        let rank = visit.rank();
        self.cuts.push((rank, visit.original().clone()));
        ControlFlow::Continue(())
    }
}
