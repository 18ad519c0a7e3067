//! Analytical cost modeling, operation-level schedule search, and
//! iteration-level serving simulation for large-language-model inference.
//!
//! The crate is organized around four workflows, mirrored by the CLI:
//!
//! * [`cost`] — closed-form iteration latencies per resource (compute,
//!   memory, network), workload classification, the optimal-throughput
//!   bound, and a per-operation resource accounting table.
//! * [`autosearch`] — greedy critical-path unit scheduling of a
//!   [`pipeline::PipelineGraph`] onto a fixed execution-unit budget, plus a
//!   search over nano-batch splits.
//! * [`sim`] — a deterministic iteration-level simulator of the serving
//!   loop: continuous batching with chunked prefill, discrete dense batch
//!   sizes, peak-memory admission, and asynchronous end-of-sequence lag.
//! * [`specs`] — the data model for hardware, model architecture, and
//!   workload descriptions, with a built-in catalog of common GPUs and
//!   models.
//!
//! With the default `parallel` feature, split-candidate evaluation and rate
//! sweeps run on rayon; disabling the feature yields a fully sequential
//! build with identical results.

pub mod autosearch;
pub mod cost;
pub mod error;
pub mod pipeline;
pub mod profiles;
pub mod sim;
pub mod specs;
mod units;

pub use error::{Error, Result};
pub use specs::{HardwareSpec, ModelConfig, TraceRequest, WorkloadStats};
