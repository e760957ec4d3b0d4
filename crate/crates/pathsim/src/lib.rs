//! Deterministic simulator of a migratory-thread, memory-side-processing
//! machine, plus a concurrent graph-query engine that runs breadth-first
//! search and remote-min connected components over striped in-memory
//! graphs.
//!
//! The pieces, bottom up:
//!
//! * [`machine`] — machine configuration, views/addresses, event counters;
//! * [`memsys`] — simulated global memory with migration-on-remote-read and
//!   memory-side remote operations;
//! * [`exec`] — the deterministic round scheduler driving simulated threads;
//! * [`rmat`] — reproducible recursive-matrix edge generation;
//! * [`graph`] — striped loose-sparse-row graph storage;
//! * [`algos`] — level-synchronous BFS and remote-min connected components;
//! * [`queries`] — sequential/concurrent query execution and reports;
//! * [`oracle`] — independent reference implementations used for checking;
//! * [`cli`] — the `pathsim` command-line interface.

pub mod algos;
pub mod cli;
pub mod edgefile;
pub mod error;
pub mod exec;
pub mod graph;
pub mod machine;
pub mod memsys;
pub mod oracle;
pub mod queries;
pub mod rmat;

pub use error::{SimError, SimResult};
pub use machine::{default_pathfinder_config, MachineConfig, View};
pub use memsys::SimMemory;
