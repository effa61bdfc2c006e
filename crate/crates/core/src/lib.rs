//! Battery sizing toolkit for energy-harvesting sensor nodes that transmit
//! opportunistically at node encounters.
//!
//! The node is modeled as two coupled Markovian queues: a finite energy
//! buffer (battery of `K` energy packets, M/M/1/K) and an unbounded data
//! buffer (M/M/1). Both queues are drained together whenever a connection
//! arrives and both are non-empty.
//!
//! The crate provides three independent views of the same system:
//!
//! - [`queue_analytics`]: the decoupled closed-form/fixed-point steady state,
//! - [`ctmc_oracle`]: the exact joint continuous-time Markov chain,
//! - [`simulator`]: a seeded Monte-Carlo discrete-event simulation,
//!
//! plus [`sizing`] (minimal capacity meeting depletion/overflow targets) and
//! [`sweep`] (parameter sweeps and the three-way validation grid as CSV).

pub mod ctmc_oracle;
pub mod format;
pub mod queue_analytics;
pub mod simulator;
pub mod sizing;
pub mod sweep;

pub use queue_analytics::{AnalyticSolution, AnalyticsError, NodeRates};
pub use sizing::{BindingConstraint, DesignTargets, SizingError, SizingResult};
