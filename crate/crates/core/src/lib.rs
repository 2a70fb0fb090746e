//! Reduction of attributed relations on finite domains.
//!
//! The crate is organized bottom-up:
//!
//! - [`relation`]: domains, schemes, relations and the relational operations
//!   (projection, selection, complement, Cartesian product, join, projoin,
//!   relative product, bond).
//! - [`dependencies`]: functional and multivalued dependencies, keys.
//! - [`formula`]: primitive positive formulas, their evaluation, and
//!   reduction certificates.
//! - [`reducers`]: constructions that return verified certificates.
//! - [`diagrams`]: projoin graphs, bonding diagrams, bond explication and
//!   ternarity bounds.
//! - [`analysis`]: exhaustive deciders and censuses over small domains.

pub mod analysis;
pub mod caps;
pub mod dependencies;
pub mod diagrams;
pub mod error;
pub mod formula;
pub mod io;
pub mod par;
pub mod reducers;
pub mod relation;

pub use error::{Error, ErrorCategory, Refusal, Result, Witness};

pub use formula::{Environment, Formula, ReductionCertificate};
pub use par::Exec;
pub use relation::{Attr, Domain, Elem, Relation, Scheme, StandardKind, Tuple};
