//! Synthesis and design-space exploration of parallel prefix circuits.
//!
//! The crate is organized bottom-up:
//!
//! - [`circuit`]: the prefix-circuit DAG, validity, metrics and carry semantics.
//! - [`baselines`]: Sklansky, Kogge-Stone and Brent-Kung generators.
//! - [`spcr`]: the line-oriented text format, candidate extraction and the pruner.
//! - [`proposer`]: prompt construction, the LLM client and the offline planner.
//! - [`dse`]: the synthesis loop, non-dominated sorting and the circuit pool.
//! - [`verify`], [`rtl`], [`dot`], [`report`]: sign-off and output formats.

pub mod baselines;
pub mod circuit;
pub mod dot;
pub mod dse;
pub mod proposer;
pub mod report;
pub mod rtl;
pub mod spcr;
pub mod verify;

pub use baselines::{brent_kung, kogge_stone, sklansky, Topology};
pub use circuit::{
    area_lower_bound, ripple_oracle, BitRange, CircuitError, Metrics, NodeId, NodeKind,
    NodeRecord, PrefixCircuit,
};
pub use spcr::{parse, serialize, Constraint, Variant};
pub use verify::{verify_adder, Verdict};
