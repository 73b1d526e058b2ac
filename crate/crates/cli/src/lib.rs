//! Batch drivers behind the `guidance` binary: click files, the
//! hyperparameter sweep and the encoder benchmark.

pub mod bench;
pub mod clicks;
pub mod sweep;
