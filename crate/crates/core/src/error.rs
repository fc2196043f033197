use crate::channel::ChannelError;
use crate::coding::CodingError;
use crate::transforms::TransformError;
use crate::tx::TxError;
use thiserror::Error;

/// Errors raised by the receivers and the blind cancellation stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RxError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("hypothesis pool is empty")]
    EmptyPool,
    #[error("OFDM slot {0} is outside the frame")]
    Occupancy(usize),
}
