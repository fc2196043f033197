pub mod blind_ic;
pub mod channel;
pub mod coding;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod rx_ofdm;
pub mod rx_otfs;
pub mod selftest;
pub mod sparse;
pub mod transforms;
pub mod tx;

pub use error::RxError;
