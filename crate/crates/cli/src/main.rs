//! `cutlattice` command-line tool.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 resource limit hit.

mod report;
mod run;
mod spec;

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use cutlattice::baselines::{brute_force_downsets, traditional_bfs, BfsOptions, BRUTE_FORCE_LIMIT};
use cutlattice::model::{Computation, Cut};
use cutlattice::traceio::{generate_document, parse_document, GenSpec};
use cutlattice::traversal::traverse_rank_range;
use cutlattice::uniflow::{verify_uniflow, UniflowPartition};
use cutlattice::visit::CollectVisitor;

use report::RunReport;
use run::{Algo, Mode, Request, RunError};
use spec::{PredicateSpec, RankSpec};

#[derive(Parser)]
#[command(
    name = "cutlattice",
    version,
    about = "Enumerate the consistent cuts of a computation trace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random trace.
    Gen {
        #[arg(short = 'n', long = "processes")]
        n: usize,
        #[arg(short = 'e', long = "events")]
        events: usize,
        /// Message probability per event.
        #[arg(short = 'p', long = "prob", default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
        /// Value of the `name=` header; defaults to the output file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Build the uniflow partition and describe it.
    Partition {
        trace: PathBuf,
        /// Print the uniflow vector clock of every event.
        #[arg(long)]
        uvc: bool,
    },
    /// Enumerate consistent cuts.
    Traverse {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Uniflow)]
        algo: Algo,
        /// `all`, `r` or `r1..r2`.
        #[arg(long, default_value = "all")]
        ranks: RankSpec,
        /// For example `p2>=2 & p1>=2 & rank<=5`.
        #[arg(long)]
        predicate: Option<PredicateSpec>,
        #[arg(long, value_enum, default_value_t = Mode::Count)]
        mode: Mode,
        /// Stored-cut cap for the traditional BFS.
        #[arg(long)]
        max_stored: Option<usize>,
        /// Append the run report to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cross-check the three enumerators.
    Verify {
        trace: PathBuf,
        /// Highest rank to compare.
        #[arg(long)]
        max_rank: Option<usize>,
        /// Test hook: corrupt the uniflow result at this rank.
        #[arg(long, hide = true)]
        inject_fault: Option<usize>,
    },
    /// Time the enumerators over several traces and rank specs.
    Bench {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algo::Uniflow, Algo::Traditional, Algo::Brute])]
        algo: Vec<Algo>,
        #[arg(long, value_delimiter = ',', default_value = "all")]
        ranks: Vec<RankSpec>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        max_stored: Option<usize>,
        /// Write the CSV report here; the text table still goes to stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        usage(error)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        usage(e.into())
    }
}

fn load(path: &Path) -> Result<(String, Computation)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = parse_document(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let name = doc.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok((name, doc.to_computation()?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen {
            n,
            events,
            p,
            seed,
            out,
            name,
        } => cmd_gen(n, events, p, seed, out, name),
        Command::Partition { trace, uvc } => cmd_partition(&trace, uvc),
        Command::Traverse {
            trace,
            algo,
            ranks,
            predicate,
            mode,
            max_stored,
            csv,
        } => cmd_traverse(&trace, algo, ranks, predicate, mode, max_stored, csv),
        Command::Verify {
            trace,
            max_rank,
            inject_fault,
        } => cmd_verify(&trace, max_rank, inject_fault),
        Command::Bench {
            traces,
            algo,
            ranks,
            reps,
            max_stored,
            csv,
        } => cmd_bench(&traces, &algo, &ranks, reps, max_stored, csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_gen(
    n: usize,
    events: usize,
    p: f64,
    seed: u64,
    out: Option<PathBuf>,
    name: Option<String>,
) -> Result<(), Failure> {
    let spec = GenSpec {
        n,
        total_events: events,
        message_probability: p,
        seed,
    };
    let mut doc = generate_document(&spec).map_err(|e| usage(e.into()))?;
    doc.name = name
        .or_else(|| {
            out.as_ref()
                .and_then(|o| o.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
        })
        .or(doc.name);
    let bytes = doc.to_bytes();
    match out {
        Some(path) => {
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None => io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn cmd_partition(trace: &Path, uvc: bool) -> Result<(), Failure> {
    let (name, comp) = load(trace)?;
    let start = Instant::now();
    let p = UniflowPartition::online(&comp).map_err(|e| usage(e.into()))?;
    let elapsed = start.elapsed();
    let mut out = io::stdout().lock();
    writeln!(out, "trace: {name}")?;
    writeln!(out, "n: {}", comp.n())?;
    writeln!(out, "events: {}", comp.len())?;
    writeln!(out, "n_u: {}", p.n_u())?;
    let sizes: Vec<String> = p.chain_sizes().iter().map(usize::to_string).collect();
    writeln!(out, "chain sizes: {}", sizes.join(" "))?;
    writeln!(out, "partition ms: {:.3}", elapsed.as_secs_f64() * 1e3)?;
    let ok = verify_uniflow(&p);
    writeln!(out, "uniflow: {}", if ok { "verified" } else { "VIOLATED" })?;
    if uvc {
        for c in 1..=p.n_u() {
            for (k, id) in p.chain(c).into_iter().enumerate() {
                let (process, index) = p.back_map(c, k + 1);
                writeln!(
                    out,
                    "chain {c} #{} id {id} p{process}#{index} {}",
                    k + 1,
                    p.uvc(id).unwrap()
                )?;
            }
        }
    }
    if !ok {
        return Err(Failure {
            code: 1,
            error: anyhow!("partition is not uniflow"),
        });
    }
    Ok(())
}

fn cmd_traverse(
    trace: &Path,
    algo: Algo,
    ranks: RankSpec,
    predicate: Option<PredicateSpec>,
    mode: Mode,
    max_stored: Option<usize>,
    csv: Option<PathBuf>,
) -> Result<(), Failure> {
    let (name, comp) = load(trace)?;
    let mut range = Some(ranks.resolve(comp.len())?);
    if let Some(pred) = &predicate {
        pred.validate(&comp)?;
        range = pred.narrow(range.unwrap());
    }
    let req = Request {
        algo,
        ranks: range,
        ranks_label: ranks.to_string(),
        predicate: predicate.as_ref(),
        mode,
        max_stored,
    };
    let mut stdout = io::stdout().lock();
    let outcome = match run::run(&name, &comp, &req, &mut stdout) {
        Ok(o) => o,
        Err(RunError::Resource(msg, report)) => {
            eprintln!("{}", summary(&report));
            return Err(Failure {
                code: 3,
                error: anyhow!(msg),
            });
        }
        Err(RunError::Other(e)) => return Err(usage(e)),
    };
    match mode {
        Mode::Count => writeln!(stdout, "{}", outcome.matched)?,
        Mode::List => {}
        Mode::FirstMatch => match &outcome.first {
            Some((rank, cut)) => writeln!(stdout, "{cut} at rank {rank}")?,
            None => writeln!(stdout, "no match")?,
        },
    }
    eprintln!("{}", summary(&outcome.report));
    if let Some(path) = csv {
        append_csv(&path, &[outcome.report])?;
    }
    Ok(())
}

fn summary(r: &RunReport) -> String {
    format!(
        "# {} {} ranks={} cuts={} peak={} ms={:.3} status={}",
        r.algorithm, r.trace, r.ranks, r.cuts_visited, r.peak_stored, r.wall_ms, r.status
    )
}

fn append_csv(path: &Path, rows: &[RunReport]) -> Result<()> {
    let mut existing = if path.exists() {
        report::read_csv(fs::File::open(path)?)?
    } else {
        Vec::new()
    };
    existing.extend_from_slice(rows);
    report::write_csv(fs::File::create(path)?, &existing)
}

fn cmd_verify(
    trace: &Path,
    max_rank: Option<usize>,
    inject_fault: Option<usize>,
) -> Result<(), Failure> {
    let (name, comp) = load(trace)?;
    let hi = max_rank.unwrap_or(comp.len()).min(comp.len());
    let by_rank = |cuts: Vec<(usize, Cut)>| {
        let mut v = vec![BTreeSet::new(); hi + 1];
        for (r, c) in cuts {
            v[r].insert(c);
        }
        v
    };

    let p = UniflowPartition::online(&comp).map_err(|e| usage(e.into()))?;
    let mut out = io::stdout().lock();
    if !verify_uniflow(&p) {
        return Err(Failure {
            code: 1,
            error: anyhow!("{name}: online partition is not uniflow"),
        });
    }
    let mut uni = CollectVisitor::default();
    traverse_rank_range(&p, 0, hi, &mut uni).map_err(|e| usage(e.into()))?;
    let mut uni = by_rank(uni.cuts);
    if let Some(r) = inject_fault.filter(|&r| r <= hi) {
        if let Some(c) = uni[r].pop_first() {
            let mut bad = c.clone();
            bad.set(1, bad.get(1) + comp.len() as u32 + 1);
            uni[r].insert(bad);
        }
    }

    let mut trad = CollectVisitor::default();
    let opts = BfsOptions {
        rank_filter: Some((0, hi)),
        max_stored_cuts: None,
    };
    traditional_bfs(&comp, &mut trad, opts).map_err(|e| usage(e.into()))?;
    let trad = by_rank(trad.cuts);

    let brute = if comp.len() <= BRUTE_FORCE_LIMIT {
        let mut levels = brute_force_downsets(&comp).map_err(|e| usage(e.into()))?;
        levels.truncate(hi + 1);
        Some(levels)
    } else {
        writeln!(
            out,
            "brute force skipped: {} events exceed {BRUTE_FORCE_LIMIT}",
            comp.len()
        )?;
        None
    };

    for r in 0..=hi {
        let agree = uni[r] == trad[r] && brute.as_ref().is_none_or(|b| b[r] == trad[r]);
        let brute_count = brute
            .as_ref()
            .map_or("-".to_string(), |b| b[r].len().to_string());
        if !agree {
            writeln!(
                out,
                "rank {r}: MISMATCH uniflow={} traditional={} brute={brute_count}",
                uni[r].len(),
                trad[r].len()
            )?;
            return Err(Failure {
                code: 1,
                error: anyhow!("{name}: enumerators diverge first at rank {r}"),
            });
        }
        writeln!(out, "rank {r}: {} cuts agree", trad[r].len())?;
    }
    writeln!(out, "{name}: verified ranks 0..={hi}")?;
    Ok(())
}

fn cmd_bench(
    traces: &[PathBuf],
    algos: &[Algo],
    ranks: &[RankSpec],
    reps: usize,
    max_stored: Option<usize>,
    csv: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut rows = Vec::new();
    let mut sink = io::sink();
    for path in traces {
        let (name, comp) = match load(path) {
            Ok(loaded) => loaded,
            Err(e) => {
                rows.push(RunReport {
                    trace: path.display().to_string(),
                    status: format!("error: {e:#}"),
                    ..Default::default()
                });
                continue;
            }
        };
        for &spec in ranks {
            for &algo in algos {
                for _ in 0..reps.max(1) {
                    let failed = |status: String| RunReport {
                        algorithm: algo.name().into(),
                        trace: name.clone(),
                        n: comp.n(),
                        events: comp.len(),
                        ranks: spec.to_string(),
                        status,
                        ..Default::default()
                    };
                    let range = match spec.resolve(comp.len()) {
                        Ok(r) => r,
                        Err(e) => {
                            rows.push(failed(format!("error: {e:#}")));
                            continue;
                        }
                    };
                    let req = Request {
                        algo,
                        ranks: Some(range),
                        ranks_label: spec.to_string(),
                        predicate: None,
                        mode: Mode::Count,
                        max_stored,
                    };
                    rows.push(match run::run(&name, &comp, &req, &mut sink) {
                        Ok(o) => o.report,
                        Err(RunError::Resource(_, report)) => *report,
                        Err(RunError::Other(e)) => failed(format!("error: {e:#}")),
                    });
                }
            }
        }
    }
    report::write_table(io::stdout().lock(), &rows)?;
    if let Some(path) = csv {
        report::write_csv(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            &rows,
        )?;
    }
    Ok(())
}
