//! Interference-alignment toolkit for M x N single-antenna X networks.
//!
//! An X network has M transmitters and N receivers with an independent
//! message from every transmitter to every receiver. This crate builds the
//! linear beamforming schemes that align interference over symbol-extended
//! time-varying channels, the degrees-of-freedom outerbound they converge
//! to, and the measurement harness that checks both against each other.
//!
//! Capabilities:
//! - seeded bounded channel realizations and their diagonal symbol extensions (`channel`)
//! - exact-rational DoF region outerbound and LP optimizer (`dof_region`)
//! - monomial full-rank certification and aligned subspace pairs (`alignment_core`)
//! - perfect M x 2 / reciprocal 2 x M / general partial alignment plans (`schemes`)
//! - Monte-Carlo link simulation, sum rates and DoF slope estimates (`link_sim`)
//! - propagation-delay slot scheduling on the 2 x 2 network (`delay_tdma`)
//! - two-hop decode-and-forward relay composition (`relay_chain`)
//! - the acceptance battery wiring it all together (`suite`)

pub mod alignment_core;
pub mod channel;
pub mod delay_tdma;
pub mod dof_region;
pub mod link_sim;
pub mod relay_chain;
pub mod schemes;
pub mod seeds;
pub mod suite;
