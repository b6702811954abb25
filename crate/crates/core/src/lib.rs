//! Random linear network coding for star (relay) networks: finite-field
//! arithmetic, a systematic-free RLNC codec, binary channel models, overhead
//! and throughput analytics, parameter optimisation and a slot-level simulator.

pub mod channel;
pub mod error;
pub mod galois;
pub mod netsim;
pub mod optimizer;
pub mod overhead;
pub mod rlnc;
pub mod throughput;

pub use error::{Error, Result};
