//! Runs one enumerator over a rank range and feeds the cuts to an output
//! mode.

use std::io::Write;
use std::ops::{ControlFlow, RangeInclusive};
use std::time::Instant;

use anyhow::Result;
use clap::ValueEnum;
use cutlattice::baselines::{brute_force_downsets, traditional_bfs, BaselineError, BfsOptions};
use cutlattice::model::{Computation, Cut};
use cutlattice::traversal::traverse_rank_range;
use cutlattice::uniflow::UniflowPartition;
use cutlattice::visit::{CutVisitor, Visit};

use crate::report::RunReport;
use crate::spec::PredicateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Uniflow,
    Traditional,
    Brute,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Uniflow => "uniflow",
            Algo::Traditional => "traditional",
            Algo::Brute => "brute",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Count,
    List,
    FirstMatch,
}

pub struct Request<'a> {
    pub algo: Algo,
    pub ranks: Option<RangeInclusive<usize>>,
    pub ranks_label: String,
    pub predicate: Option<&'a PredicateSpec>,
    pub mode: Mode,
    pub max_stored: Option<usize>,
}

pub struct Outcome {
    pub report: RunReport,
    /// Matching cuts (all cuts without a predicate).
    pub matched: u64,
    pub first: Option<(usize, Cut)>,
}

#[derive(Debug)]
pub enum RunError {
    /// Memory cap or size guard hit; the report holds what was done.
    Resource(String, Box<RunReport>),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Other(e)
    }
}

struct Sink<'a> {
    predicate: Option<&'a PredicateSpec>,
    mode: Mode,
    /// visits arrive lexically ordered within a rank
    ordered: bool,
    out: &'a mut dyn Write,
    matched: u64,
    best: Option<(usize, Cut)>,
    pending: Vec<Cut>,
    pending_rank: usize,
    error: Option<std::io::Error>,
}

impl Sink<'_> {
    fn flush_rank(&mut self) {
        self.pending.sort();
        for c in self.pending.drain(..) {
            if let Err(e) = writeln!(self.out, "{} {}", self.pending_rank, c) {
                self.error.get_or_insert(e);
            }
        }
    }
}

impl CutVisitor for Sink<'_> {
    fn visit(&mut self, visit: &mut Visit<'_>) -> ControlFlow<()> {
        let rank = visit.rank();
        if let Some((best_rank, _)) = &self.best {
            if self.mode == Mode::FirstMatch && (rank > *best_rank || self.ordered) {
                return ControlFlow::Break(());
            }
        }
        let cut = visit.original();
        if !self.predicate.is_none_or(|p| p.matches(cut)) {
            return ControlFlow::Continue(());
        }
        self.matched += 1;
        match self.mode {
            Mode::Count => {}
            Mode::List => {
                if rank != self.pending_rank {
                    self.flush_rank();
                    self.pending_rank = rank;
                }
                self.pending.push(cut.clone());
            }
            Mode::FirstMatch => {
                if self.best.as_ref().is_none_or(|(_, b)| cut < b) {
                    self.best = Some((rank, cut.clone()));
                }
            }
        }
        if self.error.is_some() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn run(
    trace: &str,
    comp: &Computation,
    req: &Request<'_>,
    out: &mut dyn Write,
) -> Result<Outcome, RunError> {
    let mut report = RunReport {
        algorithm: req.algo.name().into(),
        trace: trace.into(),
        n: comp.n(),
        events: comp.len(),
        ranks: req.ranks_label.clone(),
        status: "ok".into(),
        ..Default::default()
    };
    let mut sink = Sink {
        predicate: req.predicate,
        mode: req.mode,
        ordered: req.algo != Algo::Uniflow,
        out,
        matched: 0,
        best: None,
        pending: Vec::new(),
        pending_rank: 0,
        error: None,
    };

    if let Some(ranks) = req.ranks.clone() {
        let (lo, hi) = (*ranks.start(), *ranks.end());
        match req.algo {
            Algo::Uniflow => {
                let start = Instant::now();
                let p = UniflowPartition::online(comp).map_err(anyhow::Error::from)?;
                report.partition_ms = Some(ms(start));
                report.n_u = Some(p.n_u());
                let start = Instant::now();
                let stats =
                    traverse_rank_range(&p, lo, hi, &mut sink).map_err(anyhow::Error::from)?;
                report.wall_ms = ms(start);
                report.cuts_visited = stats.cuts_visited;
                report.peak_stored = stats.peak_live_cuts as u64;
                report.lowest_rank_touched = stats.min_rank_called;
            }
            Algo::Traditional => {
                let opts = BfsOptions {
                    rank_filter: Some((lo, hi)),
                    max_stored_cuts: req.max_stored,
                };
                let start = Instant::now();
                let result = traditional_bfs(comp, &mut sink, opts);
                report.wall_ms = ms(start);
                report.lowest_rank_touched = Some(0);
                match result {
                    Ok(stats) => {
                        report.cuts_visited = stats.cuts_visited;
                        report.peak_stored = stats.peak_stored_cuts as u64;
                    }
                    Err(BaselineError::MemoryCap { cap, rank, stats }) => {
                        report.cuts_visited = stats.cuts_visited;
                        report.peak_stored = stats.peak_stored_cuts as u64;
                        report.status = "out-of-memory".into();
                        return Err(RunError::Resource(
                            format!("traditional BFS exceeded {cap} stored cuts at rank {rank}"),
                            Box::new(report),
                        ));
                    }
                    Err(e) => return Err(anyhow::Error::from(e).into()),
                }
            }
            Algo::Brute => {
                let start = Instant::now();
                let levels = match brute_force_downsets(comp) {
                    Ok(levels) => levels,
                    Err(e @ BaselineError::TooLarge { .. }) => {
                        report.status = "too-large".into();
                        return Err(RunError::Resource(e.to_string(), Box::new(report)));
                    }
                    Err(e) => return Err(anyhow::Error::from(e).into()),
                };
                report.peak_stored = levels.iter().map(|l| l.len() as u64).sum();
                report.lowest_rank_touched = Some(0);
                'ranks: for (rank, level) in levels.iter().enumerate().take(hi + 1).skip(lo) {
                    for c in level {
                        report.cuts_visited += 1;
                        if sink.visit(&mut Visit::original_cut(rank, c)).is_break() {
                            break 'ranks;
                        }
                    }
                }
                report.wall_ms = ms(start);
            }
        }
    }

    sink.flush_rank();
    if let Some(e) = sink.error {
        return Err(RunError::Other(e.into()));
    }
    if req.predicate.is_some() {
        report.first_match = sink.best.as_ref().map(|(r, c)| format!("{c}@{r}"));
    }
    Ok(Outcome {
        report,
        matched: sink.matched,
        first: sink.best,
    })
}
