//! Breadth-first enumeration of the consistent cuts of a distributed
//! computation in polynomial space.
//!
//! The computation is first repartitioned into a *uniflow* chain partition,
//! where every causal edge between chains points from a lower chain to a
//! higher one. Over such a partition the lexically smallest cut of a given
//! rank and the lexical successor of a cut can be computed directly from
//! vector clocks, so each rank is walked without storing the previous one.
//!
//! ```
//! use cutlattice::{traceio, traversal, uniflow::UniflowPartition, visit::CountVisitor};
//!
//! let comp = traceio::parse_trace(b"n=2\n1 1\n2 1\n3 1\n4 2\n5 2 2\n6 2\n").unwrap();
//! let partition = UniflowPartition::online(&comp).unwrap();
//! let mut count = CountVisitor::default();
//! let stats = traversal::traverse_bfs(&partition, &mut count);
//! assert_eq!(count.count, 12);
//! assert_eq!(stats.per_rank, vec![1, 2, 2, 2, 2, 2, 1]);
//! ```

pub mod baselines;
pub mod model;
pub mod traceio;
pub mod traversal;
pub mod uniflow;
pub mod visit;

pub use model::{Computation, Cut, Event, EventId, EventRecord, VectorClock};
pub use uniflow::UniflowPartition;
