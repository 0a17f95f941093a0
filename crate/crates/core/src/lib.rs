//! Leader/follower pricing for an integrated electric-thermal energy system.
//!
//! An operator sets tiered electricity and heat prices and dispatches its
//! fleet; consumers answer with load curtailment, load shifting and indoor
//! temperature trajectories bounded by comfort bands. The game is rewritten
//! as one mixed-integer program through the follower's KKT conditions and
//! solved with the embedded [`ies_milp`] engine.

pub mod bilevel;
pub mod devices;
pub mod error;
pub mod oracle;
pub mod reform;
pub mod runner;
pub mod thermal;

pub use error::{CoreError, Result};
