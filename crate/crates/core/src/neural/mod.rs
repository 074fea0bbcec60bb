//! Small fully connected tanh networks and the Adam optimizer.

mod adam;
mod gemm;
mod network;

pub use adam::{Adam, AdamConfig};
pub use network::{ForwardCache, Network, NetworkLayout};
