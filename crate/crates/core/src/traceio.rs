//! Trace files and the random computation generator.
//!
//! A trace is UTF-8 text with LF line endings. Lines starting with `#` and
//! blank lines are ignored. A header of `key=value` lines comes first:
//!
//! ```text
//! version=1        # optional, must be 1 when present
//! n=<processes>    # required
//! name=<text>      # optional
//! seed=<u64>       # optional
//! ```
//!
//! followed by one event per line, in a topological order:
//!
//! ```text
//! <id> <process> [<dep>,<dep>,...]
//! ```
//!
//! `process` is 1-based. Each dependency must name an earlier event; the
//! previous event on the same process is implied. Messages are just
//! cross-process dependencies.

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::model::{Computation, EventId, EventRecord, ModelError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace is not valid UTF-8")]
    Utf8,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `n=` header")]
    MissingHeader,
    #[error("line {line}: unsupported version {version}")]
    Version { line: usize, version: u32 },
    #[error("line {line}: duplicate event id {id}")]
    DuplicateId { line: usize, id: u64 },
    #[error("line {line}: event {id} depends on {dep}, which is not an earlier event")]
    ForwardReference { line: usize, id: u64, dep: u64 },
    #[error("line {line}: process {process} outside 1..={n}")]
    ProcessOutOfRange {
        line: usize,
        process: usize,
        n: usize,
    },
    #[error("invalid generator settings: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parsed trace before vector clocks are computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceDocument {
    pub version: u32,
    pub n: usize,
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub records: Vec<EventRecord>,
}

impl TraceDocument {
    pub fn from_computation(comp: &Computation) -> Self {
        Self {
            version: FORMAT_VERSION,
            n: comp.n(),
            name: None,
            seed: None,
            records: comp
                .events()
                .iter()
                .map(|e| EventRecord {
                    id: e.id,
                    process: e.process,
                    deps: e.deps.clone(),
                })
                .collect(),
        }
    }

    pub fn to_computation(&self) -> Result<Computation, TraceError> {
        Ok(Computation::from_records(
            self.n,
            self.records.iter().cloned(),
        )?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        let _ = writeln!(out, "version={}", self.version);
        let _ = writeln!(out, "n={}", self.n);
        if let Some(name) = &self.name {
            let _ = writeln!(out, "name={name}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed={seed}");
        }
        for rec in &self.records {
            let _ = write!(out, "{} {}", rec.id, rec.process);
            for (i, d) in rec.deps.iter().enumerate() {
                out.push(if i == 0 { ' ' } else { ',' });
                let _ = write!(out, "{d}");
            }
            out.push('\n');
        }
        out.into_bytes()
    }
}

fn syntax(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Syntax {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T, TraceError> {
    s.parse()
        .map_err(|_| syntax(line, format!("bad {what} `{s}`")))
}

pub fn parse_document(bytes: &[u8]) -> Result<TraceDocument, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|_| TraceError::Utf8)?;
    let mut doc = TraceDocument {
        version: FORMAT_VERSION,
        n: 0,
        name: None,
        seed: None,
        records: Vec::new(),
    };
    let mut have_n = false;
    let mut seen = std::collections::HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = l.split_once('=') {
            if !doc.records.is_empty() {
                return Err(syntax(line, "header after events"));
            }
            match key.trim() {
                "version" => {
                    let version = number(line, "version", value.trim())?;
                    if version != FORMAT_VERSION {
                        return Err(TraceError::Version { line, version });
                    }
                    doc.version = version;
                }
                "n" => {
                    doc.n = number(line, "process count", value.trim())?;
                    have_n = true;
                }
                "name" => doc.name = Some(value.trim().to_string()),
                "seed" => doc.seed = Some(number(line, "seed", value.trim())?),
                other => return Err(syntax(line, format!("unknown header `{other}`"))),
            }
            continue;
        }
        if !have_n {
            return Err(TraceError::MissingHeader);
        }
        let mut fields = l.split_whitespace();
        let id: u64 = number(line, "event id", fields.next().unwrap_or_default())?;
        let process: usize = number(
            line,
            "process",
            fields
                .next()
                .ok_or_else(|| syntax(line, "missing process"))?,
        )?;
        let deps: Vec<u64> = match fields.next() {
            Some(list) => list
                .split(',')
                .map(|d| number(line, "dependency", d))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        if fields.next().is_some() {
            return Err(syntax(line, "trailing fields"));
        }
        if process == 0 || process > doc.n {
            return Err(TraceError::ProcessOutOfRange {
                line,
                process,
                n: doc.n,
            });
        }
        if let Some(&dep) = deps.iter().find(|d| !seen.contains(*d)) {
            return Err(TraceError::ForwardReference { line, id, dep });
        }
        if !seen.insert(id) {
            return Err(TraceError::DuplicateId { line, id });
        }
        doc.records.push(EventRecord::new(id, process, &deps));
    }
    if !have_n {
        return Err(TraceError::MissingHeader);
    }
    Ok(doc)
}

/// Parses and validates a trace and computes vector clocks.
pub fn parse_trace(bytes: &[u8]) -> Result<Computation, TraceError> {
    parse_document(bytes)?.to_computation()
}

/// Writes events in the computation's topological order; the output is a
/// pure function of the computation.
pub fn serialize_trace(comp: &Computation) -> Vec<u8> {
    TraceDocument::from_computation(comp).to_bytes()
}

/// Settings for [`generate_random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub total_events: usize,
    pub message_probability: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.n == 0 && self.total_events > 0 {
            return Err(TraceError::InvalidSpec(
                "events need at least one process".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.message_probability) {
            return Err(TraceError::InvalidSpec(format!(
                "message probability {} outside [0, 1]",
                self.message_probability
            )));
        }
        Ok(())
    }
}

/// Random computation in the style of the `d-*` benchmarks.
///
/// Event `k` (ids `0..total_events`) runs on process `k mod n + 1`. The
/// generator is ChaCha8 seeded with `ChaCha8Rng::seed_from_u64(seed)` and
/// consumed only through `next_u64`. After each event, when `n > 1`:
///
/// 1. draw `u`; a message is sent iff `(u >> 11) * 2^-53 < p`;
/// 2. if so, draw `t`; the receiver is the `(t mod (n - 1))`-th process
///    other than the sender, counting upward from process 1.
///
/// The receiver's next event depends on the sending event. Messages still
/// pending at the end are dropped.
pub fn generate_random(spec: &GenSpec) -> Result<Computation, TraceError> {
    generate_document(spec)?.to_computation()
}

pub fn generate_document(spec: &GenSpec) -> Result<TraceDocument, TraceError> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pending: Vec<Vec<EventId>> = vec![Vec::new(); n];
    let mut records = Vec::with_capacity(spec.total_events);
    for k in 0..spec.total_events {
        let process = k % n + 1;
        let id = EventId(k as u64);
        records.push(EventRecord {
            id,
            process,
            deps: std::mem::take(&mut pending[process - 1]),
        });
        if n > 1 {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u < spec.message_probability {
                let t = (rng.next_u64() % (n as u64 - 1)) as usize;
                // skip over the sender
                let receiver = if t + 1 >= process { t + 1 } else { t };
                pending[receiver].push(id);
            }
        }
    }
    Ok(TraceDocument {
        version: FORMAT_VERSION,
        n,
        name: None,
        seed: Some(spec.seed),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VectorClock;

    const SIX_EVENTS: &str = "\
# a,b,c on P1 and e,f,g on P2; b -> f
n=2
1 1
2 1
3 1
4 2
5 2 2
6 2
";

    #[test]
    fn parses_six_events() {
        let comp = parse_trace(SIX_EVENTS.as_bytes()).unwrap();
        assert_eq!(
            comp.event(EventId(5)).unwrap().vc,
            VectorClock::from_display(&[2, 2])
        );
        assert_eq!(comp.len(), 6);
    }

    #[test]
    fn empty_trace() {
        let comp = parse_trace(b"n=2\n").unwrap();
        assert!(comp.is_empty());
        assert_eq!(comp.n(), 2);
        assert_eq!(serialize_trace(&comp), b"version=1\nn=2\n");
    }

    #[test]
    fn rejections_carry_lines() {
        assert_eq!(
            parse_trace(b"n=2\n1 1 2\n2 2\n"),
            Err(TraceError::ForwardReference {
                line: 2,
                id: 1,
                dep: 2
            })
        );
        assert_eq!(
            parse_trace(b"n=2\n1 1\n1 2\n"),
            Err(TraceError::DuplicateId { line: 3, id: 1 })
        );
        assert_eq!(
            parse_trace(b"n=2\n\n1 3\n"),
            Err(TraceError::ProcessOutOfRange {
                line: 3,
                process: 3,
                n: 2
            })
        );
        assert_eq!(
            parse_trace(b"n=2\n1 1 1\n"),
            Err(TraceError::ForwardReference {
                line: 2,
                id: 1,
                dep: 1
            })
        );
        assert_eq!(parse_trace(b"1 1\n"), Err(TraceError::MissingHeader));
        assert_eq!(parse_trace(b"# nothing\n"), Err(TraceError::MissingHeader));
        assert!(matches!(
            parse_trace(b"n=x\n"),
            Err(TraceError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace(b"n=1\n1 1\nn=2\n"),
            Err(TraceError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_trace(b"n=1\n1 1 , \n"),
            Err(TraceError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace(b"version=2\nn=1\n"),
            Err(TraceError::Version {
                line: 1,
                version: 2
            })
        ));
        assert_eq!(parse_trace(&[0xff, 0xfe]), Err(TraceError::Utf8));
    }

    #[test]
    fn round_trip_six_events() {
        let comp = parse_trace(SIX_EVENTS.as_bytes()).unwrap();
        let bytes = serialize_trace(&comp);
        assert_eq!(parse_trace(&bytes).unwrap(), comp);
        assert_eq!(serialize_trace(&parse_trace(&bytes).unwrap()), bytes);
    }

    #[test]
    fn metadata_round_trip() {
        let spec = GenSpec {
            n: 3,
            total_events: 12,
            message_probability: 0.3,
            seed: 7,
        };
        let mut doc = generate_document(&spec).unwrap();
        doc.name = Some("small".into());
        let again = parse_document(&doc.to_bytes()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = GenSpec {
            n: 10,
            total_events: 100,
            message_probability: 0.3,
            seed: 1,
        };
        let a = generate_document(&spec).unwrap().to_bytes();
        let b = generate_document(&spec).unwrap().to_bytes();
        assert_eq!(a, b);
        let other = generate_document(&GenSpec { seed: 2, ..spec })
            .unwrap()
            .to_bytes();
        assert_ne!(a, other);
        let comp = generate_random(&spec).unwrap();
        assert_eq!(parse_trace(&serialize_trace(&comp)).unwrap(), comp);
    }

    #[test]
    fn generator_without_messages_has_no_deps() {
        let spec = GenSpec {
            n: 4,
            total_events: 10,
            message_probability: 0.0,
            seed: 3,
        };
        let comp = generate_random(&spec).unwrap();
        assert!(comp.events().iter().all(|e| e.deps.is_empty()));
        assert_eq!(comp.full_cut().to_display(), vec![2, 2, 3, 3]);
    }

    #[test]
    fn generator_messages_cross_processes() {
        let spec = GenSpec {
            n: 3,
            total_events: 300,
            message_probability: 1.0,
            seed: 11,
        };
        let comp = generate_random(&spec).unwrap();
        let mut with_deps = 0;
        for e in comp.events() {
            for d in &e.deps {
                assert_ne!(comp.event(*d).unwrap().process, e.process);
                with_deps += 1;
            }
        }
        assert!(with_deps > 250);
    }

    #[test]
    fn invalid_specs() {
        let bad_p = GenSpec {
            n: 2,
            total_events: 3,
            message_probability: 1.5,
            seed: 0,
        };
        assert!(generate_random(&bad_p).is_err());
        let no_procs = GenSpec {
            n: 0,
            total_events: 3,
            message_probability: 0.3,
            seed: 0,
        };
        assert!(generate_random(&no_procs).is_err());
        let empty = GenSpec {
            total_events: 0,
            ..no_procs
        };
        assert!(generate_random(&empty).unwrap().is_empty());
    }
}
