//! Deadline-aware request routing over converged compute and network
//! resources.
//!
//! A scenario describes routers, links and compute nodes (Cnodes). Requests
//! are regularized to a (service, deadline) pair, planned against a router's
//! global view, split into task sets, transmitted, executed, merged and
//! billed, all inside a deterministic discrete-event engine.

pub mod engine;
pub mod harness;
pub mod ids;
pub mod model;
pub mod planner;
pub mod regularize;
pub mod scenario;
pub mod split;
pub mod sync;
pub mod topology;
pub mod trading;
