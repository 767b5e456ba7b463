//! Identifiability of total effects `P(y_t | do(x_{t-gamma}))` from
//! abstractions of time-series causal graphs.
//!
//! Summary graphs ([`Scg`]) and extended summary graphs ([`Escg`]) abstract an
//! unknown full-time graph ([`Ftcg`]). The identifiers in [`scg`] and [`escg`]
//! decide identifiability and produce adjustment sets; [`oracle`] re-checks
//! every verdict by brute force over all candidate full-time graphs, and
//! [`sim`] checks the numbers on linear-Gaussian models.

mod bits;
pub mod dag;
pub mod error;
pub mod escg;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod path;
pub mod query;
pub mod registry;
pub mod scg;
pub mod sim;
pub mod window;

pub use dag::{Backdoor, Dag};
pub use error::{Error, Result};
pub use graph::{Cycle, Escg, Ftcg, Graph, GraphKind, Scg, SeriesId, TimedVertex};
pub use path::{Mark, MarkedPath};
pub use oracle::{Abstraction, Caps};
pub use query::{AdjustmentSet, NamedSet, Query, Verdict, VerdictKind, Witness};
pub use registry::{Identifier, Registry};
pub use window::Window;
