//! Rank specs (`all`, `r`, `r1..r2`) and cut predicates
//! (`p2>=2 & p1>=2 & rank<=5`).

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use cutlattice::model::{Computation, Cut};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSpec {
    All,
    Range(usize, usize),
}

impl RankSpec {
    /// Concrete ranks for a computation of `events` events.
    pub fn resolve(self, events: usize) -> Result<RangeInclusive<usize>> {
        match self {
            RankSpec::All => Ok(0..=events),
            RankSpec::Range(lo, hi) => {
                ensure!(
                    hi <= events,
                    "rank {hi} exceeds the {events} events of the trace"
                );
                Ok(lo..=hi)
            }
        }
    }
}

impl FromStr for RankSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(RankSpec::All);
        }
        let rank = |t: &str| -> Result<usize> {
            t.trim().parse().with_context(|| format!("bad rank `{t}`"))
        };
        match s.split_once("..") {
            Some((a, b)) => {
                let (lo, hi) = (rank(a)?, rank(b)?);
                ensure!(lo <= hi, "empty rank range {lo}..{hi}");
                Ok(RankSpec::Range(lo, hi))
            }
            None => {
                let r = rank(s)?;
                Ok(RankSpec::Range(r, r))
            }
        }
    }
}

impl fmt::Display for RankSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSpec::All => f.write_str("all"),
            RankSpec::Range(lo, hi) if lo == hi => write!(f, "{lo}"),
            RankSpec::Range(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

impl Cmp {
    fn holds(self, have: u64, bound: u64) -> bool {
        match self {
            Cmp::Eq => have == bound,
            Cmp::Le => have <= bound,
            Cmp::Ge => have >= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Process(usize),
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bound {
    pub subject: Subject,
    pub cmp: Cmp,
    pub value: u64,
}

/// Conjunction of bounds on per-process event counts and on the rank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateSpec {
    pub bounds: Vec<Bound>,
}

impl PredicateSpec {
    /// Checks process indices and counts against the trace.
    pub fn validate(&self, comp: &Computation) -> Result<()> {
        for b in &self.bounds {
            match b.subject {
                Subject::Process(p) => {
                    ensure!(
                        (1..=comp.n()).contains(&p),
                        "process p{p} out of range 1..={}",
                        comp.n()
                    );
                    let len = comp.chain(p).count() as u64;
                    ensure!(
                        b.value <= len,
                        "p{p} has only {len} events, bound is {}",
                        b.value
                    );
                }
                Subject::Rank => ensure!(
                    b.value <= comp.len() as u64,
                    "rank bound {} exceeds the {} events",
                    b.value,
                    comp.len()
                ),
            }
        }
        Ok(())
    }

    /// Ranks allowed by the rank bounds, intersected with `ranks`.
    pub fn narrow(&self, ranks: RangeInclusive<usize>) -> Option<RangeInclusive<usize>> {
        let (mut lo, mut hi) = ranks.into_inner();
        for b in self.bounds.iter().filter(|b| b.subject == Subject::Rank) {
            let v = b.value as usize;
            match b.cmp {
                Cmp::Eq => {
                    lo = lo.max(v);
                    hi = hi.min(v);
                }
                Cmp::Le => hi = hi.min(v),
                Cmp::Ge => lo = lo.max(v),
            }
        }
        (lo <= hi).then_some(lo..=hi)
    }

    /// `cut` is over the original processes.
    pub fn matches(&self, cut: &Cut) -> bool {
        self.bounds.iter().all(|b| {
            let have = match b.subject {
                Subject::Process(p) => cut.get(p) as u64,
                Subject::Rank => cut.rank() as u64,
            };
            b.cmp.holds(have, b.value)
        })
    }
}

impl FromStr for PredicateSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bounds = Vec::new();
        for term in s.split('&') {
            let term = term.trim();
            if term.is_empty() {
                bail!("empty term in predicate `{s}`");
            }
            let (at, op_len, cmp) = [(">=", Cmp::Ge), ("<=", Cmp::Le), ("=", Cmp::Eq)]
                .iter()
                .find_map(|&(op, cmp)| term.find(op).map(|at| (at, op.len(), cmp)))
                .with_context(|| format!("term `{term}` has no comparator (=, <=, >=)"))?;
            let lhs = term[..at].trim();
            let rhs = term[at + op_len..].trim();
            let value = rhs
                .parse()
                .with_context(|| format!("bad count `{rhs}` in `{term}`"))?;
            let subject = if lhs == "rank" {
                Subject::Rank
            } else if let Some(p) = lhs.strip_prefix('p') {
                let p: usize = p.parse().with_context(|| format!("bad process `{lhs}`"))?;
                ensure!(p >= 1, "processes are numbered from 1");
                Subject::Process(p)
            } else {
                bail!("unknown subject `{lhs}`, expected p<k> or rank");
            };
            bounds.push(Bound {
                subject,
                cmp,
                value,
            });
        }
        Ok(Self { bounds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_specs() {
        assert_eq!("all".parse::<RankSpec>().unwrap(), RankSpec::All);
        assert_eq!("3".parse::<RankSpec>().unwrap(), RankSpec::Range(3, 3));
        assert_eq!("2..5".parse::<RankSpec>().unwrap(), RankSpec::Range(2, 5));
        assert!("5..2".parse::<RankSpec>().is_err());
        assert!("x".parse::<RankSpec>().is_err());
        assert!("1..".parse::<RankSpec>().is_err());
        assert_eq!(RankSpec::All.resolve(6).unwrap(), 0..=6);
        assert!(RankSpec::Range(0, 7).resolve(6).is_err());
        for s in ["all", "4", "1..3"] {
            assert_eq!(s.parse::<RankSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn predicates() {
        let p: PredicateSpec = "p2>=2 & p1>=2".parse().unwrap();
        assert!(p.matches(&Cut::from_display(&[2, 2])));
        assert!(!p.matches(&Cut::from_display(&[1, 3])));
        let r: PredicateSpec = "rank>=2&rank<=4 & p1=1".parse().unwrap();
        assert_eq!(r.narrow(0..=6), Some(2..=4));
        assert!(r.matches(&Cut::from_display(&[1, 1])));
        assert!(!r.matches(&Cut::from_display(&[0, 1])));
        let none: PredicateSpec = "rank=9".parse().unwrap();
        assert_eq!(none.narrow(0..=6), None);
        assert!("p0>=1".parse::<PredicateSpec>().is_err());
        assert!("q1>=1".parse::<PredicateSpec>().is_err());
        assert!("p1>1".parse::<PredicateSpec>().is_err());
        assert!("p1>=1 &".parse::<PredicateSpec>().is_err());
    }
}
