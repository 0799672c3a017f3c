//! Constraint logic programming over real intervals.
//!
//! Horn-clause resolution generates numerical constraint satisfaction
//! problems; interval constraint propagation and branch-and-prune
//! enumeration solve them. All floating-point endpoint arithmetic rounds
//! outward, so every answer box provably contains the real solutions it
//! claims to.
//!
//! Layers, bottom up:
//!
//! - [`rounding`]: correctly rounded directed `f64` endpoint operations
//! - [`interval`]: the interval domain system (outward arithmetic,
//!   extended division, splitting, decimal I/O)
//! - [`dro`]: primitive constraints and their domain reduction operators
//! - [`csp`]: boxes, worklist propagation to the fixpoint, branch-and-prune
//!   enumeration, consolidation of adjacent result boxes
//! - [`decompose`]: flattening of arithmetic (in)equalities into primitives
//! - [`logic`]: Herbrand terms and unification with occurs check
//! - [`parser`]: the Prolog-like surface syntax (`.ncsp` programs)
//! - [`clp`]: the derivation engine tying resolution to constraint solving
//! - [`oracle`]: exact-rational finite-relation semantics used as ground
//!   truth by the test suites


pub mod clp;
pub mod csp;
pub mod decompose;
pub mod dro;
pub mod interval;
pub mod logic;
pub mod oracle;
pub mod parser;
pub mod rounding;

pub use interval::{format_outward, parse_decimal_outward, Interval};
