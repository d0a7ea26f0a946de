//! Pipeline library behind the `veriseq` binary.

pub mod dataset;
pub mod evaluate;
pub mod features;
pub mod responses;
pub mod serve;
