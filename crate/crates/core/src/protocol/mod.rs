//! State-vector simulation of the block-sum preparation protocols.

pub mod amplify;
pub mod feedforward;
pub mod gates;
pub mod mpo;
pub mod statevector;
